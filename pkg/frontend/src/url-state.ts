/**
 * Timeline filter state, kept in lockstep with the URL so a shared link
 * restores the exact view. The query-string encoding is byte-compatible
 * with GET /api/timeline, so one serializer drives both.
 */

export interface FilterState {
  drugs: string[];
  sexes: string[];
  ageLo: number;
  ageHi: number;
  bucket: 'Year' | 'Month';
}

export const DEFAULT_FILTERS: FilterState = {
  drugs: [],
  sexes: [],
  ageLo: 0,
  ageHi: 150,
  bucket: 'Year',
};

/** Canonical query-string form; default values are omitted for clean URLs. */
export function filtersToQuery(state: FilterState): string {
  const params = new URLSearchParams();
  if (state.drugs.length > 0) params.set('drugs', state.drugs.join(','));
  if (state.sexes.length > 0) params.set('sexes', state.sexes.join(','));
  if (state.ageLo !== DEFAULT_FILTERS.ageLo) params.set('age_min', String(state.ageLo));
  if (state.ageHi !== DEFAULT_FILTERS.ageHi) params.set('age_max', String(state.ageHi));
  if (state.bucket !== DEFAULT_FILTERS.bucket) params.set('bucket', state.bucket);
  return params.toString();
}

export function filtersFromQuery(query: string): FilterState {
  const params = new URLSearchParams(query);
  const drugs = params.get('drugs');
  const sexes = params.get('sexes');
  const bucket = params.get('bucket');
  return {
    drugs: drugs ? drugs.split(',').filter((d) => d.length > 0) : [],
    sexes: sexes ? sexes.split(',').filter((s) => s.length > 0) : [],
    ageLo: intOr(params.get('age_min'), DEFAULT_FILTERS.ageLo),
    ageHi: intOr(params.get('age_max'), DEFAULT_FILTERS.ageHi),
    bucket: bucket === 'Month' ? 'Month' : 'Year',
  };
}

function intOr(raw: string | null, fallback: number): number {
  if (raw === null) return fallback;
  const v = Number.parseInt(raw, 10);
  return Number.isFinite(v) ? v : fallback;
}

export function sameFilters(a: FilterState, b: FilterState): boolean {
  return filtersToQuery(a) === filtersToQuery(b);
}
