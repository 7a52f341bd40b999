/**
 * Page wiring: fetch-render loops for the explorer panels and the what-if
 * risk form. All analytics come from the API verbatim; this file only
 * moves data into the DOM.
 */

import { ApiClient } from './api.js';
import { barChart, riskBand, scatterChart, timelineChart } from './charts.js';
import { buildHeatmap } from './heatmap.js';
import { WhatIfController } from './risk-form.js';
import type { CovariateField, GlmResultDoc, RiskScoreDoc } from './types.js';
import {
  DEFAULT_FILTERS,
  FilterState,
  filtersFromQuery,
  filtersToQuery,
  sameFilters,
} from './url-state.js';

const api = new ApiClient();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function banner(section: string, message: string | null): void {
  const node = el<HTMLElement>(`${section}-error`);
  node.textContent = message ?? '';
  node.style.display = message ? 'block' : 'none';
}

// ---------------------------------------------------------------- summary

async function renderSummary(): Promise<void> {
  try {
    const doc = await api.summary();
    el('summary-cases').textContent = String(doc.case_count);
    el('summary-drugs').textContent = String(doc.drug_count);
    el('summary-mean').textContent = doc.mean_drugs_per_case.toFixed(2);
    el('summary-span').textContent = doc.date_span
      ? `${doc.date_span[0].slice(0, 10)} to ${doc.date_span[1].slice(0, 10)}`
      : 'n/a';
    banner('summary', null);
  } catch (err) {
    banner('summary', String(err));
  }
}

// --------------------------------------------------------------- timeline

let filters: FilterState = { ...DEFAULT_FILTERS };

function readFiltersFromControls(): FilterState {
  const drugs = Array.from(
    el<HTMLSelectElement>('filter-drugs').selectedOptions,
  ).map((o) => o.value);
  const sexes = ['Male', 'Female'].filter(
    (s) => el<HTMLInputElement>(`filter-sex-${s.toLowerCase()}`).checked,
  );
  return {
    drugs,
    sexes,
    ageLo: Number(el<HTMLInputElement>('filter-age-lo').value || 0),
    ageHi: Number(el<HTMLInputElement>('filter-age-hi').value || 150),
    bucket: el<HTMLSelectElement>('filter-bucket').value === 'Month' ? 'Month' : 'Year',
  };
}

function writeFiltersToControls(state: FilterState): void {
  const select = el<HTMLSelectElement>('filter-drugs');
  for (const option of Array.from(select.options)) {
    option.selected = state.drugs.includes(option.value);
  }
  el<HTMLInputElement>('filter-sex-male').checked = state.sexes.includes('Male');
  el<HTMLInputElement>('filter-sex-female').checked = state.sexes.includes('Female');
  el<HTMLInputElement>('filter-age-lo').value = String(state.ageLo);
  el<HTMLInputElement>('filter-age-hi').value = String(state.ageHi);
  el<HTMLSelectElement>('filter-bucket').value = state.bucket;
}

async function renderTimeline(): Promise<void> {
  try {
    const doc = await api.timeline(filters);
    el('timeline-chart').innerHTML = timelineChart(doc.series).svg;
    banner('timeline', null);
  } catch (err) {
    banner('timeline', String(err)); // stale chart intentionally retained
  }
}

function applyFilters(next: FilterState, push: boolean): void {
  if (sameFilters(filters, next)) return;
  filters = next;
  if (push) {
    const qs = filtersToQuery(filters);
    history.replaceState(null, '', qs ? `?${qs}` : location.pathname);
  }
  void renderTimeline();
}

async function initTimelineControls(): Promise<void> {
  const { ranking } = await api.topDrugs(25);
  const select = el<HTMLSelectElement>('filter-drugs');
  select.innerHTML = ranking
    .map((r) => `<option value="${r.drug}">${r.drug} (${r.case_count})</option>`)
    .join('');
  filters = filtersFromQuery(location.search);
  writeFiltersToControls(filters);
  for (const id of ['filter-drugs', 'filter-sex-male', 'filter-sex-female',
                    'filter-age-lo', 'filter-age-hi', 'filter-bucket']) {
    el(id).addEventListener('change', () =>
      applyFilters(readFiltersFromControls(), true));
  }
  await renderTimeline();
}

// ---------------------------------------------------- density + top drugs

async function renderDensity(): Promise<void> {
  const doc = await api.numDrugs();
  const ks = Object.keys(doc.frequencies).sort((a, b) => Number(a) - Number(b));
  const chart = barChart(ks, ks.map((k) => doc.frequencies[k]), 'bar bar-density');
  el('density-chart').innerHTML = chart.svg;
  el('density-mean').textContent = doc.mean.toFixed(2);
}

async function renderTopDrugs(): Promise<void> {
  const { ranking } = await api.topDrugs(10);
  el('top-drugs-body').innerHTML = ranking
    .map(
      (r) =>
        `<tr><td>${r.drug}</td><td>${r.case_count}</td>` +
        `<td>${(r.cumulative_case_share * 100).toFixed(1)}%</td></tr>`,
    )
    .join('');
}

// ---------------------------------------------------------------- heatmap

async function renderHeatmap(): Promise<void> {
  try {
    const doc = await api.cooccurrence(10, 0.05);
    const model = buildHeatmap(doc.cells);
    const head =
      '<tr><th></th>' +
      model.drugs.map((d) => `<th class="rot"><span>${d}</span></th>`).join('') +
      '</tr>';
    const rows = model.grid
      .map(
        (row, i) =>
          `<tr><th>${model.drugs[i]}</th>` +
          row
            .map((view) => {
              const tip = view.cell
                ? `${view.cell.drug_a} + ${view.cell.drug_b}: observed ` +
                  `${view.cell.q_obs}, expected ${view.cell.expected.toFixed(1)}` +
                  ` (${view.cell.classification})`
                : '';
              return `<td class="${view.cssClass}" title="${tip}"></td>`;
            })
            .join('') +
          '</tr>',
      )
      .join('');
    el('heatmap-table').innerHTML = head + rows;
    banner('heatmap', null);
  } catch (err) {
    banner('heatmap', String(err));
  }
}

// -------------------------------------------------------------------- GLM

async function pollGlm(fitId: string): Promise<GlmResultDoc> {
  for (;;) {
    const doc = await api.glmResult(fitId);
    if (doc.status === 'Done') return doc;
    if (doc.status === 'Failed') throw new Error(doc.error ?? 'fit failed');
    await new Promise((resolve) => setTimeout(resolve, 300));
  }
}

async function runGlm(): Promise<void> {
  banner('glm', null);
  el('glm-run').setAttribute('disabled', 'true');
  try {
    const { fit_id } = await api.glmFit();
    const doc = await pollGlm(fit_id);
    const rows = (doc.table ?? [])
      .map(
        (r) =>
          `<tr><td>${r.term}</td><td>${r.estimate.toFixed(4)}</td>` +
          `<td>${r.std_error.toFixed(4)}</td><td>${r.z.toFixed(2)}</td>` +
          `<td>${r.p < 0.0001 ? '<  0.0001' : r.p.toFixed(4)}</td></tr>`,
      )
      .join('');
    el('glm-table-body').innerHTML = rows;
    if (doc.diagnostics) {
      el('glm-resid').innerHTML = scatterChart(
        doc.diagnostics.fitted, doc.diagnostics.deviance_residuals).svg;
      el('glm-qq').innerHTML = scatterChart(
        doc.diagnostics.qq_theoretical, doc.diagnostics.qq_sample, true).svg;
    }
    const gof = doc.gof;
    const over = doc.overdispersion;
    el('glm-notes').textContent =
      gof && over
        ? `Goodness of fit p = ${gof.p_value.toFixed(3)}; ` +
          `dispersion ratio ${over.dispersion_ratio.toFixed(3)}`
        : '';
  } catch (err) {
    banner('glm', String(err));
  } finally {
    el('glm-run').removeAttribute('disabled');
  }
}

// ---------------------------------------------------------- risk predictor

let controller: WhatIfController | null = null;

function renderRiskDisplay(score: RiskScoreDoc | null, pending: boolean): void {
  if (!score) return;
  el('risk-value').textContent = (score.risk * 100).toFixed(1) + '%';
  el('risk-ci').textContent =
    `95% CI [${(score.ci_low * 100).toFixed(1)}%, ${(score.ci_high * 100).toFixed(1)}%]`;
  el('risk-band').innerHTML = riskBand(score.risk, score.ci_low, score.ci_high);
  el('risk-value').classList.toggle('pending', pending);
  if (score.importances) {
    const top = Object.entries(score.importances)
      .sort((a, b) => b[1] - a[1])
      .slice(0, 5);
    el('risk-importances').innerHTML = top
      .map(([k, v]) => `<li>${k}: ${(v * 100).toFixed(1)}%</li>`)
      .join('');
  }
}

function fieldInput(field: CovariateField): string {
  if (field.kind === 'categorical') {
    const options = (field.levels ?? [])
      .map((level) => `<option value="${level}">${level}</option>`)
      .join('');
    return `<select data-field="${field.name}">${options}</select>`;
  }
  const min = field.min !== undefined ? ` min="${field.min}"` : '';
  const max = field.max !== undefined ? ` max="${field.max}"` : '';
  return `<input type="number" step="any" data-field="${field.name}"${min}${max}/>`;
}

function buildRiskForm(fields: CovariateField[]): void {
  const haystack = el('risk-form');
  const main = fields.filter((f) => !f.name.startsWith('disease_'));
  const disease = fields.filter((f) => f.name.startsWith('disease_'));
  haystack.innerHTML =
    main
      .map(
        (f) =>
          `<label class="field" id="field-${f.name}">` +
          `<span>${f.name.replace(/_/g, ' ')}</span>${fieldInput(f)}</label>`,
      )
      .join('') +
    `<details class="disease"><summary>disease history (20 bins)</summary>` +
    disease
      .map(
        (f) =>
          `<label class="field small" id="field-${f.name}">` +
          `<span>${f.name}</span>${fieldInput(f)}</label>`,
      )
      .join('') +
    `</details>`;
  if (!controller) return;
  const values = controller.currentValues;
  for (const input of Array.from(
    haystack.querySelectorAll<HTMLInputElement | HTMLSelectElement>('[data-field]'),
  )) {
    const name = input.dataset.field as string;
    input.value = String(values[name]);
    input.addEventListener('input', () => {
      const field = fields.find((f) => f.name === name);
      const value =
        field && field.kind === 'numeric' ? Number(input.value) : input.value;
      controller?.setValue(name, value);
    });
  }
}

async function initRisk(): Promise<void> {
  const button = el<HTMLButtonElement>('risk-train');
  button.addEventListener('click', () => void trainAndAttach());
  const existing = await api.models();
  if (existing.models.length > 0) {
    await attachModel(existing.models[existing.models.length - 1].model_id);
  }
}

async function trainAndAttach(): Promise<void> {
  banner('risk', null);
  const button = el<HTMLButtonElement>('risk-train');
  button.disabled = true;
  button.textContent = 'building cohort…';
  try {
    const seed = Number(el<HTMLInputElement>('risk-seed').value || 1);
    const cohort = await api.buildCohort(seed);
    button.textContent = `training forest on ${cohort.n_o + cohort.n_c} rows…`;
    const { job_id } = await api.trainModel(cohort.cohort_id, 'forest',
                                            { seed, n_trees: 100 });
    for (;;) {
      const job = await api.job(job_id);
      if (job.status === 'Done') {
        await attachModel(job.result as string);
        break;
      }
      if (job.status === 'Failed') throw new Error(job.error ?? 'training failed');
      await new Promise((resolve) => setTimeout(resolve, 500));
    }
  } catch (err) {
    banner('risk', String(err));
  } finally {
    button.disabled = false;
    button.textContent = 'build cohort + train forest';
  }
}

async function attachModel(modelId: string): Promise<void> {
  const schema = await api.modelSchema(modelId);
  el('risk-model-label').textContent = `${schema.kind} ${schema.model_id}`;
  controller = new WhatIfController(api, modelId, schema.covariates, (display) => {
    renderRiskDisplay(display.score, display.pending);
    for (const field of schema.covariates) {
      const wrap = document.getElementById(`field-${field.name}`);
      if (wrap) wrap.classList.remove('invalid');
    }
    if (display.fieldError) {
      const wrap = document.getElementById(`field-${display.fieldError.field}`);
      if (wrap) wrap.classList.add('invalid');
      banner('risk', display.fieldError.message);
    } else {
      banner('risk', null);
    }
  });
  buildRiskForm(schema.covariates);
  el('risk-panel').style.display = 'block';
  controller.prime();
}

// ------------------------------------------------------------------ boot

async function boot(): Promise<void> {
  await renderSummary();
  await initTimelineControls();
  await renderDensity();
  await renderTopDrugs();
  await renderHeatmap();
  el('glm-run').addEventListener('click', () => void runGlm());
  await initRisk();
}

window.addEventListener('DOMContentLoaded', () => void boot());
