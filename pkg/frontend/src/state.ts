// Session controller: all explorer behaviour lives here, DOM-free, so the
// what-if loop is testable against a fixture service. The UI layer only
// reflects this state.
//
// Two rules shape the design. First, the explorer performs no numerics:
// every score and statement it exposes comes verbatim from a service
// response. Second, history is append-only and each entry stores the exact
// request (seed included), so replaying it against the same pinned model
// version returns the same answer.

import { ApiError, AuditApi } from "./api.js";
import type {
  CfRequest,
  CfResponse,
  DeltaDoc,
  FeatureDoc,
  ModelSummary,
  SchemaDoc,
} from "./types.js";

export const NOT_CONVERGED_MESSAGE = "no counterfactual found within limits";

export const PROTECTED_CAVEAT =
  "This suggestion changes a protected attribute, which shows the decision " +
  "depends on it. The reverse is not true: suggestions that leave it alone " +
  "are not evidence the attribute was ignored.";

export interface HistoryEntry {
  modelId: string;
  version: number;
  request: CfRequest;
  response: CfResponse;
}

export interface FieldErrors {
  [feature: string]: string;
}

export class ExplorerSession {
  models: ModelSummary[] = [];
  banner: string | null = null; // service-unreachable retry banner

  modelId: string | null = null;
  version: number | null = null;
  schema: SchemaDoc | null = null;

  values: Record<string, string> = {}; // raw form inputs, validated on submit
  targetScore = "";
  outcomePhrase = "";
  locked = new Set<string>();
  nDiverse = 1;
  clampCategoricals = true;
  fieldErrors: FieldErrors = {};

  currentScore: number | null = null; // verbatim from the predict endpoint
  result: CfResponse | null = null;
  notice: string | null = null;
  readonly history: HistoryEntry[] = [];

  private inflight: AbortController | null = null;
  private seedCounter = 0;

  constructor(private readonly api: AuditApi) {}

  async loadModels(): Promise<void> {
    try {
      this.models = await this.api.listModels();
      this.banner = null;
    } catch {
      this.banner = "Cannot reach the audit service. Check the URL and retry.";
    }
  }

  async select(modelId: string, version: number): Promise<void> {
    const record = await this.api.getModel(modelId, version);
    this.modelId = modelId;
    this.version = version;
    this.schema = record.bundle.schema;
    this.values = {};
    for (const feature of this.schema.features) {
      this.values[feature.name] = "";
    }
    this.locked.clear();
    this.result = null;
    this.notice = null;
    this.currentScore = null;
    this.fieldErrors = {};
  }

  feature(name: string): FeatureDoc | undefined {
    return this.schema?.features.find((f) => f.name === name);
  }

  setValue(name: string, text: string): void {
    this.values[name] = text;
    delete this.fieldErrors[name];
  }

  toggleLock(name: string): void {
    if (this.locked.has(name)) {
      this.locked.delete(name);
    } else {
      this.locked.add(name);
    }
  }

  setDiversity(n: number): void {
    this.nDiverse = Math.max(1, Math.floor(n));
  }

  /** Schema-level validation; no request leaves while this reports errors. */
  validate(): FieldErrors {
    const errors: FieldErrors = {};
    if (!this.schema) {
      return { _form: "select a model first" };
    }
    for (const feature of this.schema.features) {
      const raw = (this.values[feature.name] ?? "").trim();
      const value = Number(raw);
      if (raw === "" || !Number.isFinite(value)) {
        errors[feature.name] = "enter a number";
        continue;
      }
      if (feature.kind === "categorical") {
        const count = feature.categories?.length ?? 0;
        if (!Number.isInteger(value) || value < 0 || value >= count) {
          errors[feature.name] = `must be a category code 0..${count - 1}`;
        }
      }
    }
    if (this.targetScore.trim() === "" || !Number.isFinite(Number(this.targetScore))) {
      errors._target = "enter a target score";
    }
    this.fieldErrors = errors;
    return errors;
  }

  private pointFromForm(): number[] {
    return this.schema!.features.map((f) => Number(this.values[f.name]));
  }

  buildRequest(): CfRequest {
    return {
      x_original: this.pointFromForm(),
      target_score: Number(this.targetScore),
      distance: "l1mad",
      locked_features: [...this.locked].sort(),
      n_diverse: this.nDiverse,
      n_restarts: Math.max(4, this.nDiverse),
      clamp_categoricals: this.clampCategoricals,
      rng_seed: this.seedCounter,
      outcome_phrase: this.outcomePhrase.trim() === "" ? null : this.outcomePhrase,
    };
  }

  /** Submit the current what-if; a submission in flight gets cancelled. */
  async submitWhatIf(): Promise<void> {
    if (Object.keys(this.validate()).length > 0) {
      return;
    }
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const request = this.buildRequest();
    this.seedCounter += 1;
    try {
      const response = await this.api.counterfactuals(
        this.modelId!,
        this.version!,
        request,
        controller.signal,
      );
      if (this.inflight !== controller) {
        return; // a newer submission superseded this one
      }
      this.result = response;
      this.notice = response.converged ? null : NOT_CONVERGED_MESSAGE;
      this.history.push({
        modelId: this.modelId!,
        version: this.version!,
        request,
        response,
      });
    } catch (err) {
      if (controller.signal.aborted) {
        return;
      }
      this.notice = err instanceof ApiError ? err.message : "request failed";
    } finally {
      if (this.inflight === controller) {
        this.inflight = null;
      }
    }
  }

  async predict(): Promise<void> {
    const errors = this.validate();
    delete errors._target; // prediction needs only the feature values
    if (Object.keys(errors).length > 0) {
      return;
    }
    try {
      const response = await this.api.predict(
        this.modelId!,
        this.version!,
        this.pointFromForm(),
      );
      this.currentScore = response.score;
    } catch (err) {
      this.notice = err instanceof ApiError ? err.message : "request failed";
    }
  }

  /** One-click adoption of a suggested change, then re-score. */
  async applyDelta(delta: DeltaDoc): Promise<void> {
    // the service's value is adopted as-is; String() only changes encoding
    this.setValue(delta.feature, String(delta.new));
    await this.predict();
  }

  /** Re-run a past query against its pinned model version. */
  async replay(index: number): Promise<CfResponse> {
    const entry = this.history[index];
    if (!entry) {
      throw new Error(`no history entry ${index}`);
    }
    const response = await this.api.counterfactuals(
      entry.modelId,
      entry.version,
      entry.request,
    );
    this.history.push({ ...entry, response });
    this.result = response;
    this.notice = response.converged ? null : NOT_CONVERGED_MESSAGE;
    return response;
  }

  /** Deltas touching protected attributes, for the one-way caveat badge. */
  protectedDeltas(deltas: DeltaDoc[]): DeltaDoc[] {
    return deltas.filter((d) => this.feature(d.feature)?.protected);
  }
}
