/** Wire types mirroring the JSON the service emits. */

export interface SummaryDoc {
  case_count: number;
  patient_count: number;
  date_span: [string, string] | null;
  drug_count: number;
  mean_drugs_per_case: number;
}

export interface TimelinePoint {
  bucket_start: string;
  count: number;
}

export interface DrugRank {
  drug: string;
  case_count: number;
  cumulative_case_share: number;
}

export interface NumDrugsDoc {
  frequencies: Record<string, number>;
  mean: number;
  mode: number | null;
}

export type CellClass = 'Positive' | 'Negative' | 'Random';

export interface CooccurrenceCell {
  drug_a: string;
  drug_b: string;
  n_total: number;
  n1: number;
  n2: number;
  q_obs: number;
  expected: number;
  p_lt: number;
  p_gt: number;
  classification: CellClass;
}

export interface GlmRow {
  term: string;
  estimate: number;
  std_error: number;
  z: number;
  p: number;
}

export interface GlmResultDoc {
  status: string;
  table?: GlmRow[];
  deviance?: number;
  df_residual?: number;
  gof?: { statistic: number; df: number; p_value: number };
  overdispersion?: { dispersion_ratio: number; p_value: number };
  diagnostics?: {
    fitted: number[];
    deviance_residuals: number[];
    qq_theoretical: number[];
    qq_sample: number[];
  };
  error?: string | null;
}

export interface CovariateField {
  name: string;
  kind: 'numeric' | 'categorical';
  levels?: string[];
  reference?: string;
  min?: number;
  max?: number;
}

export interface ModelSchemaDoc {
  model_id: string;
  kind: 'forest' | 'mlp';
  covariates: CovariateField[];
  columns: string[];
}

export interface RiskScoreDoc {
  risk: number;
  ci_low: number;
  ci_high: number;
  importances: Record<string, number> | null;
}

export interface JobDoc {
  job_id: string;
  kind: string;
  status: 'Pending' | 'Running' | 'Done' | 'Failed';
  result: string | null;
  error: string | null;
}
