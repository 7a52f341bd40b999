/**
 * Dependency-free SVG chart builders. Each returns markup plus the scaled
 * geometry it derived, so tests can assert the drawn values equal the API
 * payload without pixel inspection.
 */

import type { TimelinePoint } from './types.js';

export interface BarGeometry {
  label: string;
  value: number;
  height: number;
}

export interface BarChart {
  svg: string;
  bars: BarGeometry[];
}

const W = 640;
const H = 240;
const PAD = 28;

function esc(text: string): string {
  return text.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}

export function barChart(labels: string[], values: number[], cssClass = 'bar'): BarChart {
  const max = Math.max(1, ...values);
  const innerH = H - 2 * PAD;
  const slot = (W - 2 * PAD) / Math.max(1, values.length);
  const bars: BarGeometry[] = values.map((value, i) => ({
    label: labels[i],
    value,
    height: (value / max) * innerH,
  }));
  const rects = bars
    .map((bar, i) => {
      const x = PAD + i * slot + slot * 0.1;
      const y = H - PAD - bar.height;
      return (
        `<rect class="${cssClass}" x="${x.toFixed(1)}" y="${y.toFixed(1)}"` +
        ` width="${(slot * 0.8).toFixed(1)}" height="${bar.height.toFixed(1)}"` +
        ` data-label="${esc(bar.label)}" data-value="${bar.value}"><title>` +
        `${esc(bar.label)}: ${bar.value}</title></rect>`
      );
    })
    .join('');
  const ticks = bars
    .map((bar, i) => {
      if (bars.length > 12 && i % Math.ceil(bars.length / 12) !== 0) return '';
      const x = PAD + i * slot + slot * 0.5;
      return `<text class="tick" x="${x.toFixed(1)}" y="${H - 8}" text-anchor="middle">${esc(bar.label)}</text>`;
    })
    .join('');
  const svg =
    `<svg viewBox="0 0 ${W} ${H}" role="img">` +
    `<line class="axis" x1="${PAD}" y1="${H - PAD}" x2="${W - PAD}" y2="${H - PAD}"/>` +
    rects +
    ticks +
    `</svg>`;
  return { svg, bars };
}

export function timelineChart(series: TimelinePoint[]): BarChart {
  return barChart(
    series.map((p) => p.bucket_start.slice(0, 7).replace('-01', '')),
    series.map((p) => p.count),
    'bar bar-timeline',
  );
}

export interface ScatterChart {
  svg: string;
  points: { x: number; y: number }[];
}

export function scatterChart(xs: number[], ys: number[], refLine = false): ScatterChart {
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const sx = (x: number) => PAD + ((x - xMin) / Math.max(1e-9, xMax - xMin)) * (W - 2 * PAD);
  const sy = (y: number) => H - PAD - ((y - yMin) / Math.max(1e-9, yMax - yMin)) * (H - 2 * PAD);
  const dots = xs
    .map((x, i) => `<circle class="dot" cx="${sx(x).toFixed(1)}" cy="${sy(ys[i]).toFixed(1)}" r="2"/>`)
    .join('');
  const line = refLine
    ? `<line class="ref" x1="${sx(Math.max(xMin, yMin))}" y1="${sy(Math.max(xMin, yMin))}"` +
      ` x2="${sx(Math.min(xMax, yMax))}" y2="${sy(Math.min(xMax, yMax))}"/>`
    : '';
  return {
    svg: `<svg viewBox="0 0 ${W} ${H}" role="img">${line}${dots}</svg>`,
    points: xs.map((x, i) => ({ x, y: ys[i] })),
  };
}

/** Risk gauge: point estimate with the 95% band, all in [0, 1]. */
export function riskBand(risk: number, lo: number, hi: number): string {
  const x = (v: number) => PAD + v * (W - 2 * PAD);
  return (
    `<svg viewBox="0 0 ${W} 60" role="img">` +
    `<line class="gauge-track" x1="${x(0)}" y1="30" x2="${x(1)}" y2="30"/>` +
    `<rect class="gauge-band" x="${x(lo).toFixed(1)}" y="22"` +
    ` width="${Math.max(1, x(hi) - x(lo)).toFixed(1)}" height="16"/>` +
    `<circle class="gauge-point" cx="${x(risk).toFixed(1)}" cy="30" r="7"/>` +
    `</svg>`
  );
}
