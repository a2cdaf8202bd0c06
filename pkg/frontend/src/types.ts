// Wire types for the audit service JSON API. The explorer displays these
// values as received and never derives numbers of its own.

export interface ModelSummary {
  model_id: string;
  version: number;
  created_at: string;
  content_hash: string;
  features: string[];
  target: { name: string; kind: string };
}

export interface FeatureDoc {
  name: string;
  kind: "continuous" | "categorical";
  categories: string[] | null;
  protected: boolean;
  label: string;
  unit: string;
}

export interface SchemaDoc {
  features: FeatureDoc[];
  target: { name: string; kind: string };
}

export interface ModelRecord {
  model_id: string;
  version: number;
  created_at: string;
  bundle: {
    schema: SchemaDoc;
    content_hash: string;
    [key: string]: unknown;
  };
}

export interface CfRequest {
  x_original: number[];
  target_score: number;
  distance?: string;
  locked_features?: string[];
  n_restarts?: number;
  n_diverse?: number;
  tolerance_eps?: number;
  cap_to_training_range?: boolean;
  clamp_categoricals?: boolean;
  rng_seed?: number;
  outcome_phrase?: string | null;
}

export interface DeltaDoc {
  feature: string;
  old: number;
  new: number;
}

export interface CounterfactualDoc {
  converged: true;
  x_prime: number[];
  achieved_score: number;
  distance: number;
  changed: DeltaDoc[];
  clamp_assignment: Record<string, number>;
  restart_seed: number;
  diagnostics: Record<string, unknown>;
}

export interface ExplanationDoc {
  subject_id: number | null;
  statement: string;
  deltas: { label: string; old: number; new: number; unit: string }[];
  outcome_phrase: string;
  distance: number;
  metric: string;
}

export interface CfSuccess {
  converged: true;
  counterfactuals: CounterfactualDoc[];
  explanations: ExplanationDoc[];
  dependence: { flags: Record<string, boolean>; caveat: string };
  query: Record<string, unknown>;
  record_id?: number;
}

export interface CfFailure {
  converged: false;
  failure: {
    converged: false;
    best_effort_x_prime: number[];
    achieved_score: number;
    target_score: number;
    distance: number;
    rounds: number;
    message: string;
  };
  query: Record<string, unknown>;
  record_id?: number;
}

export type CfResponse = CfSuccess | CfFailure;

export interface PredictResponse {
  score: number;
  record_id?: number;
}

export interface ServiceError {
  code: string;
  message: string;
  detail?: unknown;
}
