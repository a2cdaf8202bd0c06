// DOM layer: renders the session state and forwards events to it. All text
// shown for scores and statements is taken directly from service responses.

import type { ExplorerSession } from "./state.js";
import { PROTECTED_CAVEAT } from "./state.js";
import type { CfSuccess } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export class ExplorerView {
  constructor(
    private readonly root: HTMLElement,
    private readonly session: ExplorerSession,
  ) {}

  async start(): Promise<void> {
    await this.session.loadModels();
    this.render();
  }

  render(): void {
    const s = this.session;
    this.root.replaceChildren();

    if (s.banner) {
      const banner = el("div", { class: "banner" }, s.banner);
      const retry = el("button", {}, "retry");
      retry.onclick = async () => {
        await s.loadModels();
        this.render();
      };
      banner.append(" ", retry);
      this.root.append(banner);
    }

    this.root.append(this.modelPicker());
    if (s.schema) {
      this.root.append(this.whatIfForm(), this.resultPane(), this.historyPane());
    }
  }

  private modelPicker(): HTMLElement {
    const s = this.session;
    const box = el("section", { class: "models" });
    box.append(el("h2", {}, "Archived models"));
    if (s.models.length === 0 && !s.banner) {
      box.append(el("p", { class: "empty" },
        "No models registered yet. Train one and POST it to /models."));
      return box;
    }
    const list = el("ul");
    for (const m of s.models) {
      const item = el("li");
      const pick = el("button", {},
        `${m.model_id} v${m.version} (${m.features.join(", ")} -> ${m.target.name})`);
      pick.onclick = async () => {
        await s.select(m.model_id, m.version);
        this.render();
      };
      if (s.modelId === m.model_id && s.version === m.version) {
        pick.disabled = true;
      }
      item.append(pick);
      list.append(item);
    }
    box.append(list);
    return box;
  }

  private whatIfForm(): HTMLElement {
    const s = this.session;
    const form = el("section", { class: "whatif" });
    form.append(el("h2", {}, `Your data (${s.modelId} v${s.version})`));

    for (const feature of s.schema!.features) {
      const row = el("div", { class: "field" });
      const label = feature.unit
        ? `${feature.label} (${feature.unit})`
        : feature.label;
      row.append(el("label", { for: `f-${feature.name}` }, label));
      if (feature.kind === "categorical") {
        const select = el("select", { id: `f-${feature.name}` });
        select.append(el("option", { value: "" }, "choose..."));
        (feature.categories ?? []).forEach((category, code) => {
          const option = el("option", { value: String(code) }, category);
          if (s.values[feature.name] === String(code)) {
            option.selected = true;
          }
          select.append(option);
        });
        select.onchange = () => s.setValue(feature.name, select.value);
        row.append(select);
      } else {
        const input = el("input", {
          id: `f-${feature.name}`,
          value: s.values[feature.name] ?? "",
        });
        input.oninput = () => s.setValue(feature.name, input.value);
        row.append(input);
      }
      const lock = el("input", { type: "checkbox", title: "cannot change" });
      lock.checked = s.locked.has(feature.name);
      lock.onchange = () => s.toggleLock(feature.name);
      row.append(lock, el("span", { class: "lock-label" }, "locked"));
      if (s.fieldErrors[feature.name]) {
        row.append(el("span", { class: "error" }, s.fieldErrors[feature.name]));
      }
      form.append(row);
    }

    const targetRow = el("div", { class: "field" });
    targetRow.append(el("label", {}, "desired score"));
    const target = el("input", { value: s.targetScore });
    target.oninput = () => {
      s.targetScore = target.value;
    };
    targetRow.append(target);
    if (s.fieldErrors._target) {
      targetRow.append(el("span", { class: "error" }, s.fieldErrors._target));
    }
    form.append(targetRow);

    const phraseRow = el("div", { class: "field" });
    phraseRow.append(el("label", {}, "outcome phrase (optional)"));
    const phrase = el("input", { value: s.outcomePhrase });
    phrase.oninput = () => {
      s.outcomePhrase = phrase.value;
    };
    phraseRow.append(phrase);
    form.append(phraseRow);

    const diversityRow = el("div", { class: "field" });
    diversityRow.append(el("label", {}, "alternatives"));
    const diversity = el("input", {
      type: "number",
      min: "1",
      max: "8",
      value: String(s.nDiverse),
    });
    diversity.onchange = () => s.setDiversity(Number(diversity.value));
    diversityRow.append(diversity);
    form.append(diversityRow);

    const submit = el("button", {}, "what would have to change?");
    submit.onclick = async () => {
      await s.submitWhatIf();
      this.render();
    };
    const score = el("button", {}, "predict current score");
    score.onclick = async () => {
      await s.predict();
      this.render();
    };
    form.append(submit, " ", score);

    if (s.currentScore !== null) {
      form.append(el("p", { class: "score" },
        `current score: ${JSON.stringify(s.currentScore)}`));
    }
    return form;
  }

  private resultPane(): HTMLElement {
    const s = this.session;
    const pane = el("section", { class: "results" });
    if (s.notice) {
      pane.append(el("p", { class: "notice" }, s.notice));
    }
    if (!s.result || !s.result.converged) {
      return pane;
    }
    const success = s.result as CfSuccess;
    pane.append(el("h2", {}, "What would have to change"));
    const list = el("ol");
    success.explanations.forEach((explanation, i) => {
      const item = el("li");
      item.append(el("p", { class: "statement" }, explanation.statement));
      const cf = success.counterfactuals[i];
      for (const delta of cf.changed) {
        const row = el("div", { class: "delta" });
        const feature = s.feature(delta.feature);
        row.append(el("span", {},
          `${feature?.label ?? delta.feature}: ${JSON.stringify(delta.old)} -> ${JSON.stringify(delta.new)}`));
        const apply = el("button", {}, "apply");
        apply.onclick = async () => {
          await s.applyDelta(delta);
          this.render();
        };
        row.append(apply);
        if (feature?.protected) {
          row.append(el("span", { class: "protected" }, " protected attribute"));
          row.append(el("p", { class: "caveat" }, PROTECTED_CAVEAT));
        }
        list.append(row);
      }
      list.append(item);
    });
    pane.append(list);
    return pane;
  }

  private historyPane(): HTMLElement {
    const s = this.session;
    const pane = el("section", { class: "history" });
    if (s.history.length === 0) {
      return pane;
    }
    pane.append(el("h2", {}, "History"));
    const list = el("ol");
    s.history.forEach((entry, index) => {
      const item = el("li");
      const summary = entry.response.converged
        ? `${(entry.response as CfSuccess).explanations.length} explanation(s)`
        : "not converged";
      item.append(
        el("span", {},
          `target ${entry.request.target_score} on ${entry.modelId} v${entry.version}: ${summary} `),
      );
      const replay = el("button", {}, "replay");
      replay.onclick = async () => {
        await s.replay(index);
        this.render();
      };
      item.append(replay);
      list.append(item);
    });
    pane.append(list);
    return pane;
  }
}
