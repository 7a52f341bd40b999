import { describe, expect, it } from 'vitest';

import { ApiClient, ApiError } from '../src/api.js';
import { DEFAULT_FILTERS } from '../src/url-state.js';

function fetchRecorder(status = 200, body: unknown = {}) {
  const urls: string[] = [];
  const doFetch = (url: string) => {
    urls.push(url);
    return Promise.resolve(new Response(JSON.stringify(body), {
      status,
      headers: { 'content-type': 'application/json' },
    }));
  };
  return { urls, doFetch };
}

describe('api client', () => {
  it('timeline url mirrors the filter serialization', async () => {
    const { urls, doFetch } = fetchRecorder(200, { series: [] });
    const api = new ApiClient(doFetch);
    await api.timeline({ ...DEFAULT_FILTERS, drugs: ['A', 'B'], ageLo: 20 });
    expect(urls[0]).toBe('/api/timeline?drugs=A%2CB&age_min=20');
    await api.timeline({ ...DEFAULT_FILTERS });
    expect(urls[1]).toBe('/api/timeline');
  });

  it('raises ApiError with the server detail', async () => {
    const { doFetch } = fetchRecorder(409, { detail: 'no dataset snapshot loaded' });
    const api = new ApiClient(doFetch);
    await expect(api.summary()).rejects.toThrowError(ApiError);
    await expect(api.summary()).rejects.toMatchObject({
      status: 409,
      detail: 'no dataset snapshot loaded',
    });
  });

  it('posts prediction payloads as json', async () => {
    let captured: RequestInit | undefined;
    const doFetch = (_url: string, init?: RequestInit) => {
      captured = init;
      return Promise.resolve(new Response(
        JSON.stringify({ risk: 0.1, ci_low: 0.05, ci_high: 0.2, importances: null }),
        { status: 200 }));
    };
    const api = new ApiClient(doFetch);
    const score = await api.predict('m1', { age: 30 });
    expect(score.risk).toBe(0.1);
    expect(captured?.method).toBe('POST');
    expect(JSON.parse(String(captured?.body))).toEqual({
      model_id: 'm1',
      covariates: { age: 30 },
    });
  });
});
