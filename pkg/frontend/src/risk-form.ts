/**
 * Schema-driven what-if form. Fields come from the model's covariate
 * manifest (never hardcoded), edits trigger a debounced predict call, and
 * a monotone sequence number discards stale responses so the displayed
 * score always corresponds to the latest form state.
 */

import { ApiClient, ApiError } from './api.js';
import type { CovariateField, RiskScoreDoc } from './types.js';

export interface FormValues {
  [name: string]: string | number;
}

/** Per-field defaults: numeric midpointish, categorical at the reference. */
export function defaultValues(fields: CovariateField[]): FormValues {
  const values: FormValues = {};
  for (const field of fields) {
    if (field.kind === 'categorical') {
      values[field.name] = field.reference ?? field.levels?.[0] ?? '';
    } else if (field.name === 'age') {
      values[field.name] = 40;
    } else if (field.name === 'poverty_ratio') {
      values[field.name] = 0.2;
    } else {
      values[field.name] = 0;
    }
  }
  return values;
}

export interface RiskDisplay {
  score: RiskScoreDoc | null;
  pending: boolean;
  fieldError: { field: string; message: string } | null;
  requestsSent: number;
}

type Listener = (display: RiskDisplay) => void;

export class WhatIfController {
  private values: FormValues;
  private seq = 0;
  private applied = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private display: RiskDisplay = {
    score: null,
    pending: false,
    fieldError: null,
    requestsSent: 0,
  };

  constructor(
    private readonly api: ApiClient,
    private readonly modelId: string,
    public readonly fields: CovariateField[],
    private readonly listener: Listener,
    private readonly debounceMs = 150,
  ) {
    this.values = defaultValues(fields);
  }

  get currentValues(): FormValues {
    return { ...this.values };
  }

  get currentDisplay(): RiskDisplay {
    return { ...this.display };
  }

  /** Set one covariate; identical values are a no-op (no request fired). */
  setValue(name: string, value: string | number): void {
    if (this.values[name] === value) return;
    this.values = { ...this.values, [name]: value };
    this.schedule();
  }

  /** First render: compute the score for the defaults. */
  prime(): void {
    this.schedule();
  }

  private schedule(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.fire();
    }, this.debounceMs);
  }

  private async fire(): Promise<void> {
    const seq = ++this.seq;
    const payload = { ...this.values };
    this.update({ pending: true, requestsSent: this.display.requestsSent + 1 });
    try {
      const score = await this.api.predict(this.modelId, payload);
      if (seq <= this.applied) return; // a newer response already landed
      this.applied = seq;
      if (seq !== this.seq) {
        // stale: a newer request is already in flight; keep pending state
        return;
      }
      this.update({ score, pending: false, fieldError: null });
    } catch (err) {
      if (seq <= this.applied || seq !== this.seq) return;
      this.applied = seq;
      if (err instanceof ApiError && err.status === 422) {
        const field = this.matchField(err.detail);
        this.update({
          pending: false,
          fieldError: { field: field ?? '', message: err.detail },
        });
      } else {
        this.update({
          pending: false,
          fieldError: { field: '', message: String(err) },
        });
      }
    }
  }

  private matchField(detail: string): string | null {
    for (const field of this.fields) {
      if (detail.includes(field.name)) return field.name;
    }
    return null;
  }

  private update(patch: Partial<RiskDisplay>): void {
    this.display = { ...this.display, ...patch };
    this.listener({ ...this.display });
  }
}
