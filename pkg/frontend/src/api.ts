/**
 * Thin typed client over the JSON API. The fetch implementation is
 * injectable so tests can stub the wire exactly.
 */

import type {
  CooccurrenceCell,
  DrugRank,
  GlmResultDoc,
  JobDoc,
  ModelSchemaDoc,
  NumDrugsDoc,
  RiskScoreDoc,
  SummaryDoc,
  TimelinePoint,
} from './types.js';
import { FilterState, filtersToQuery } from './url-state.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`API ${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private readonly doFetch: FetchLike = (input, init) => fetch(input, init),
    private readonly base: string = '',
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.doFetch(this.base + path, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail =
        typeof (body as { detail?: unknown }).detail === 'string'
          ? (body as { detail: string }).detail
          : response.statusText;
      throw new ApiError(response.status, detail);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
  }

  summary(): Promise<SummaryDoc> {
    return this.request('/api/summary');
  }

  timeline(filters: FilterState): Promise<{ series: TimelinePoint[] }> {
    const qs = filtersToQuery(filters);
    return this.request(`/api/timeline${qs ? '?' + qs : ''}`);
  }

  topDrugs(k: number): Promise<{ ranking: DrugRank[] }> {
    return this.request(`/api/drugs/top?k=${k}`);
  }

  numDrugs(): Promise<NumDrugsDoc> {
    return this.request('/api/num-drugs');
  }

  cooccurrence(top: number, alpha: number): Promise<{ alpha: number; cells: CooccurrenceCell[] }> {
    return this.request(`/api/cooccurrence?top=${top}&alpha=${alpha}`);
  }

  glmFit(): Promise<{ fit_id: string }> {
    return this.post('/api/glm/fit', {});
  }

  glmResult(fitId: string): Promise<GlmResultDoc> {
    return this.request(`/api/glm/${fitId}`);
  }

  job(jobId: string): Promise<JobDoc> {
    return this.request(`/api/jobs/${jobId}`);
  }

  buildCohort(seed: number, ageWindow?: number): Promise<{ cohort_id: string; n_o: number; n_c: number; dropped: Record<string, number> }> {
    const body: Record<string, number> = { seed };
    if (ageWindow !== undefined) body.age_window = ageWindow;
    return this.post('/api/cohort/build', body);
  }

  trainModel(cohortId: string, kind: 'forest' | 'mlp', config: Record<string, unknown>, cvFolds = 10): Promise<{ job_id: string }> {
    return this.post('/api/models/train', {
      cohort_id: cohortId,
      kind,
      config,
      cv_folds: cvFolds,
    });
  }

  models(): Promise<{ models: { model_id: string; kind: string; cohort_id: string | null }[] }> {
    return this.request('/api/models');
  }

  modelSchema(modelId: string): Promise<ModelSchemaDoc> {
    return this.request(`/api/models/${modelId}/schema`);
  }

  modelEval(modelId: string): Promise<unknown> {
    return this.request(`/api/models/${modelId}/eval`);
  }

  predict(modelId: string, covariates: Record<string, unknown>): Promise<RiskScoreDoc> {
    return this.post('/api/predict', { model_id: modelId, covariates });
  }
}
