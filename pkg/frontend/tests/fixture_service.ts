// In-memory stand-in for the audit service, replaying responses captured
// from the real one (tools/make_frontend_fixtures.py). Routing mirrors the
// real endpoints; counterfactual responses are selected by the request's
// locked-feature set, which is what distinguishes the captured scenarios.

import { readFileSync } from "node:fs";
import type { FetchLike } from "../src/api.js";

function fixture<T = unknown>(name: string): T {
  const url = new URL(`./fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf-8")) as T;
}

export const FIXTURES = {
  models: fixture<{ models: unknown[] }>("models.json"),
  record: fixture<Record<string, never>>("model_record.json"),
  cfIncome: fixture<any>("cf_income.json"),
  cfSexFlip: fixture<any>("cf_sex_flip.json"),
  cfNotConverged: fixture<any>("cf_not_converged.json"),
  predictBase: fixture<any>("predict_base.json"),
  predictAfterDelta: fixture<any>("predict_after_delta.json"),
};

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export interface RecordedCall {
  method: string;
  path: string;
  body?: any;
}

export class FixtureService {
  calls: RecordedCall[] = [];
  down = false;
  emptyRegistry = false;

  readonly fetch: FetchLike = async (url, init) => {
    if (this.down) {
      throw new TypeError("fetch failed: service unreachable");
    }
    const method = init?.method ?? "GET";
    const path = new URL(url, "http://fixture").pathname;
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    this.calls.push({ method, path, body });

    if (method === "GET" && path === "/models") {
      return json(this.emptyRegistry ? { models: [] } : FIXTURES.models);
    }
    if (method === "GET" && path === "/models/loan/1") {
      return json(FIXTURES.record);
    }
    if (method === "POST" && path === "/models/loan/1/predict") {
      const x = body.x as number[];
      const after = FIXTURES.cfIncome.counterfactuals[0].changed[0].new;
      if (x[0] === after) {
        return json(FIXTURES.predictAfterDelta);
      }
      return json(FIXTURES.predictBase);
    }
    if (method === "POST" && path === "/models/loan/1/counterfactuals") {
      const locked = [...(body.locked_features ?? [])].sort().join(",");
      if (locked === "income,sex") {
        return json(FIXTURES.cfNotConverged);
      }
      if (locked === "income") {
        return json(FIXTURES.cfSexFlip);
      }
      return json(FIXTURES.cfIncome);
    }
    return json(
      { code: "not_found", message: `no fixture for ${method} ${path}` },
      404,
    );
  };
}
