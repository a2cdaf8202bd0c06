import { beforeEach, describe, expect, it } from "vitest";

import { AuditApi } from "../src/api.js";
import {
  ExplorerSession,
  NOT_CONVERGED_MESSAGE,
  PROTECTED_CAVEAT,
} from "../src/state.js";
import type { CfSuccess } from "../src/types.js";
import { FIXTURES, FixtureService } from "./fixture_service.js";

let service: FixtureService;
let session: ExplorerSession;

beforeEach(() => {
  service = new FixtureService();
  session = new ExplorerSession(new AuditApi("http://fixture", service.fetch));
});

async function selectLoanModel() {
  await session.loadModels();
  await session.select("loan", 1);
  session.setValue("income", "30");
  session.setValue("sex", "0");
  session.targetScore = "0.5";
  session.outcomePhrase = "been offered a loan";
}

describe("model list", () => {
  it("lists registered models with their schema summaries", async () => {
    await session.loadModels();
    expect(session.banner).toBeNull();
    expect(session.models).toHaveLength(1);
    expect(session.models[0].model_id).toBe("loan");
    expect(session.models[0].features).toEqual(["income", "sex"]);
  });

  it("shows an empty state for an empty registry", async () => {
    service.emptyRegistry = true;
    await session.loadModels();
    expect(session.models).toEqual([]);
    expect(session.banner).toBeNull();
  });

  it("sets a retry banner when the service is unreachable", async () => {
    service.down = true;
    await session.loadModels();
    expect(session.banner).toMatch(/retry/i);
    service.down = false;
    await session.loadModels();
    expect(session.banner).toBeNull();
  });

  it("selecting a model loads its full schema", async () => {
    await selectLoanModel();
    expect(session.schema?.features.map((f) => f.name)).toEqual(["income", "sex"]);
    expect(session.feature("sex")?.protected).toBe(true);
    expect(session.feature("sex")?.categories).toEqual(["female", "male"]);
  });
});

describe("what-if round trip", () => {
  it("submits and displays the service statements verbatim", async () => {
    await selectLoanModel();
    await session.submitWhatIf();
    expect(session.notice).toBeNull();
    const result = session.result as CfSuccess;
    expect(result.converged).toBe(true);
    const expected = FIXTURES.cfIncome.explanations.map(
      (e: { statement: string }) => e.statement,
    );
    expect(result.explanations.map((e) => e.statement)).toEqual(expected);
    expect(result.explanations[0].statement).toBe(
      "If your annual income was 44.7, you would have been offered a loan.",
    );
    expect(session.history).toHaveLength(1);
  });

  it("applies a suggested delta verbatim and shows the new prediction", async () => {
    await selectLoanModel();
    await session.submitWhatIf();
    const result = session.result as CfSuccess;
    const delta = result.counterfactuals[0].changed[0];
    await session.applyDelta(delta);
    expect(session.values.income).toBe(String(delta.new));
    expect(session.currentScore).toBe(FIXTURES.predictAfterDelta.score);
  });

  it("reports non-convergence inline instead of crashing", async () => {
    await selectLoanModel();
    session.toggleLock("income");
    session.toggleLock("sex");
    await session.submitWhatIf();
    expect(session.result?.converged).toBe(false);
    expect(session.notice).toBe(NOT_CONVERGED_MESSAGE);
    expect(session.history).toHaveLength(1);
  });
});

describe("locking and diversity", () => {
  it("sends locked features and no returned delta touches them", async () => {
    await selectLoanModel();
    session.targetScore = "0.2";
    session.toggleLock("income");
    await session.submitWhatIf();
    const sent = service.calls.find((c) => c.path.endsWith("/counterfactuals"));
    expect(sent?.body.locked_features).toEqual(["income"]);
    const result = session.result as CfSuccess;
    for (const cf of result.counterfactuals) {
      expect(cf.changed.map((d) => d.feature)).not.toContain("income");
    }
  });

  it("flags protected deltas with the one-way caveat", async () => {
    await selectLoanModel();
    session.targetScore = "0.2";
    session.toggleLock("income");
    await session.submitWhatIf();
    const result = session.result as CfSuccess;
    const flagged = session.protectedDeltas(result.counterfactuals[0].changed);
    expect(flagged.map((d) => d.feature)).toEqual(["sex"]);
    expect(PROTECTED_CAVEAT).toMatch(/not evidence/i);
    expect(result.dependence.flags.sex).toBe(true);
  });

  it("diversity control bounds the returned set", async () => {
    await selectLoanModel();
    session.setDiversity(3);
    await session.submitWhatIf();
    const sent = service.calls.find((c) => c.path.endsWith("/counterfactuals"));
    expect(sent?.body.n_diverse).toBe(3);
    const result = session.result as CfSuccess;
    expect(result.explanations.length).toBeLessThanOrEqual(3);
  });

  it("toggling a lock twice removes it", async () => {
    await selectLoanModel();
    session.toggleLock("income");
    session.toggleLock("income");
    expect(session.buildRequest().locked_features).toEqual([]);
  });
});

describe("client-side validation", () => {
  it("rejects an invalid category code without sending a request", async () => {
    await selectLoanModel();
    session.setValue("sex", "2");
    const callsBefore = service.calls.length;
    await session.submitWhatIf();
    expect(session.fieldErrors.sex).toMatch(/category code/);
    expect(service.calls.length).toBe(callsBefore);
    expect(session.history).toHaveLength(0);
  });

  it("rejects non-numeric values and a missing target", async () => {
    await selectLoanModel();
    session.setValue("income", "lots");
    session.targetScore = "";
    const errors = session.validate();
    expect(errors.income).toBeDefined();
    expect(errors._target).toBeDefined();
  });
});

describe("history", () => {
  it("is append-only and replays against the pinned version", async () => {
    await selectLoanModel();
    await session.submitWhatIf();
    const first = session.history[0];
    const replayed = await session.replay(0);
    expect(session.history).toHaveLength(2);
    expect(session.history[0]).toBe(first); // earlier entries untouched
    expect(replayed).toEqual(first.response); // same request, same answer
    const replayCall = service.calls.at(-1);
    expect(replayCall?.body.rng_seed).toBe(first.request.rng_seed);
  });

  it("cancels an in-flight request when a new one is submitted", async () => {
    await selectLoanModel();
    let hangs = 0;
    const inner = service.fetch;
    const gate = new AuditApi("http://fixture", (url, init) => {
      if (String(url).endsWith("/counterfactuals") && hangs === 0) {
        hangs += 1;
        return new Promise((_, reject) => {
          init?.signal?.addEventListener("abort", () =>
            reject(new DOMException("aborted", "AbortError")),
          );
        });
      }
      return inner(url, init);
    });
    const gated = new ExplorerSession(gate);
    await gated.loadModels();
    await gated.select("loan", 1);
    gated.setValue("income", "30");
    gated.setValue("sex", "0");
    gated.targetScore = "0.5";
    const firstSubmit = gated.submitWhatIf(); // hangs until aborted
    await gated.submitWhatIf(); // cancels the first
    await firstSubmit;
    expect(gated.history).toHaveLength(1);
    expect(gated.result?.converged).toBe(true);
  });
});
