import { describe, expect, it } from 'vitest';

import {
  DEFAULT_FILTERS,
  FilterState,
  filtersFromQuery,
  filtersToQuery,
  sameFilters,
} from '../src/url-state.js';

describe('filter url round-trip', () => {
  const cases: FilterState[] = [
    { ...DEFAULT_FILTERS },
    { drugs: ['FENTANYL'], sexes: [], ageLo: 0, ageHi: 150, bucket: 'Year' },
    { drugs: ['FENTANYL', 'HEROIN'], sexes: ['Male'], ageLo: 20, ageHi: 45, bucket: 'Month' },
    { drugs: [], sexes: ['Male', 'Female'], ageLo: 0, ageHi: 99, bucket: 'Year' },
    { drugs: ['DELTA 9 THC'], sexes: ['Female'], ageLo: 18, ageHi: 18, bucket: 'Month' },
  ];

  it.each(cases.map((c) => [filtersToQuery(c), c] as const))(
    'restores state from "%s"',
    (_query, state) => {
      const restored = filtersFromQuery(filtersToQuery(state));
      expect(restored).toEqual(state);
    },
  );

  it('omits defaults from the query string', () => {
    expect(filtersToQuery({ ...DEFAULT_FILTERS })).toBe('');
  });

  it('matches the api timeline parameter names', () => {
    const qs = filtersToQuery({
      drugs: ['A', 'B'], sexes: ['Male'], ageLo: 10, ageHi: 20, bucket: 'Month',
    });
    const params = new URLSearchParams(qs);
    expect(params.get('drugs')).toBe('A,B');
    expect(params.get('sexes')).toBe('Male');
    expect(params.get('age_min')).toBe('10');
    expect(params.get('age_max')).toBe('20');
    expect(params.get('bucket')).toBe('Month');
  });

  it('survives a full page-url embedding', () => {
    const state: FilterState = {
      drugs: ['HEROIN'], sexes: ['Female'], ageLo: 30, ageHi: 60, bucket: 'Month',
    };
    const url = new URL('http://localhost/?' + filtersToQuery(state));
    expect(filtersFromQuery(url.search)).toEqual(state);
  });

  it('treats junk numerics as defaults', () => {
    const restored = filtersFromQuery('age_min=abc&age_max=');
    expect(restored.ageLo).toBe(0);
    expect(restored.ageHi).toBe(150);
  });

  it('sameFilters is serialization equality', () => {
    const a: FilterState = { drugs: [], sexes: [], ageLo: 0, ageHi: 150, bucket: 'Year' };
    expect(sameFilters(a, { ...DEFAULT_FILTERS })).toBe(true);
    expect(sameFilters(a, { ...a, ageHi: 100 })).toBe(false);
  });
});
