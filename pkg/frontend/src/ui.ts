/** DOM rendering. Reads ViewState, emits DOM; all behavior is delegated to
 * the handler callbacks wired up in main.ts. */

import { renderMarkdown } from "./markdown.js";
import {
  ItemSelection,
  Tab,
  ViewState,
  allRanked,
  canSubmitRanking,
  downloadEnabled,
  middlePosition,
  tabEnabled,
} from "./state.js";
import type { RankTally } from "./api.js";

export interface Handlers {
  onTab(tab: Tab): void;
  onUpload(file: File): void;
  onSend(text: string): void;
  onDownload(kind: "fs" | "zs"): void;
  onStartEvaluation(): void;
  onChooseBest(itemIndex: number, pos: number): void;
  onChooseWorst(itemIndex: number, pos: number): void;
  onSubmitRanking(itemIndex: number): void;
  onShowResults(): void;
  onSubmitSurvey(scores: number[]): void;
}

export const SURVEY_STATEMENTS = [
  "I'm satisfied with the final prompt, it met my requirements.",
  "The system helped me think through how the desired outputs should look " +
    "like and what criteria to consider when building the prompt.",
  "I felt the system was pleasant and responsive throughout the interaction.",
  "I'm satisfied with the time it took to come up with the final prompt.",
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  node.append(...children);
  return node;
}

function renderTabs(state: ViewState, h: Handlers): HTMLElement {
  const bar = el("nav", { class: "tabs" });
  for (const tab of ["chat", "survey", "evaluation"] as Tab[]) {
    const btn = el("button", { class: "tab" }, tab);
    btn.disabled = !tabEnabled(state, tab);
    if (state.activeTab === tab) btn.classList.add("active");
    btn.onclick = () => h.onTab(tab);
    bar.append(btn);
  }
  return bar;
}

function renderChat(state: ViewState, h: Handlers): HTMLElement {
  const pane = el("section", { class: "pane chat" });

  if (!state.uploadDone) {
    const input = el("input", { type: "file", accept: ".csv,.jsonl,.json" });
    const btn = el("button", {}, "Upload data");
    btn.onclick = () => {
      const file = input.files?.[0];
      if (file) h.onUpload(file);
    };
    pane.append(
      el("p", {}, "Upload a CSV or JSONL file with a 'text' column to begin."),
      input,
      btn,
    );
    return pane;
  }

  const log = el("div", { class: "messages" });
  for (const msg of state.chat) {
    const bubble = el("div", { class: `message ${msg.role}` });
    bubble.innerHTML = renderMarkdown(msg.text);
    log.append(bubble);
  }
  pane.append(log);

  if (state.ended) {
    const fs = el("button", {}, "Download few shot prompt");
    fs.onclick = () => h.onDownload("fs");
    const zs = el("button", {}, "Download zero shot prompt");
    zs.onclick = () => h.onDownload("zs");
    fs.disabled = zs.disabled = !downloadEnabled(state);
    pane.append(el("div", { class: "downloads" }, fs, zs));
  } else {
    const input = el("textarea", { rows: "2", placeholder: "Your reply…" });
    const send = el("button", {}, "Send");
    send.disabled = state.requestInFlight;
    send.onclick = () => {
      h.onSend(input.value);
      input.value = "";
    };
    pane.append(el("div", { class: "composer" }, input, send));
  }
  return pane;
}

function renderCandidate(
  sel: ItemSelection,
  itemIndex: number,
  pos: number,
  h: Handlers,
): HTMLElement {
  const card = el("div", { class: "candidate" });
  const body = el("div", { class: "candidate-text" });
  body.innerHTML = renderMarkdown(sel.item.candidates[pos]);
  const best = el("button", {}, "Best");
  const worst = el("button", {}, "Worst");
  best.disabled = worst.disabled = sel.submitted;
  if (sel.best === pos) best.classList.add("chosen");
  if (sel.worst === pos) worst.classList.add("chosen");
  best.onclick = () => h.onChooseBest(itemIndex, pos);
  worst.onclick = () => h.onChooseWorst(itemIndex, pos);
  const mid = middlePosition(sel);
  const tagText =
    sel.best === pos ? "best" : sel.worst === pos ? "worst" :
    mid === pos ? "middle (inferred)" : "";
  card.append(body, el("div", { class: "rank-controls" }, best, worst,
                       el("span", { class: "rank-tag" }, tagText)));
  return card;
}

function renderEvaluation(state: ViewState, h: Handlers): HTMLElement {
  const pane = el("section", { class: "pane evaluation" });
  if (state.evalItems.length === 0) {
    const btn = el("button", {}, "Generate evaluation items");
    btn.onclick = () => h.onStartEvaluation();
    btn.disabled = state.requestInFlight;
    pane.append(
      el("p", {}, "Compare outputs from three prompt variants, blind."),
      btn,
    );
    return pane;
  }
  state.evalItems.forEach((sel, itemIndex) => {
    const block = el("div", { class: "eval-item" });
    block.append(el("h3", {}, sel.item.item_id));
    block.append(el("blockquote", {}, sel.item.input_text));
    sel.item.candidates.forEach((_, pos) =>
      block.append(renderCandidate(sel, itemIndex, pos, h)),
    );
    const submit = el("button", {}, sel.submitted ? "Recorded" : "Submit ranking");
    submit.disabled = !canSubmitRanking(sel);
    submit.onclick = () => h.onSubmitRanking(itemIndex);
    block.append(submit);
    pane.append(block);
  });
  const results = el("button", {}, "Show results");
  results.disabled = !allRanked(state);
  results.onclick = () => h.onShowResults();
  pane.append(results, el("div", { id: "results" }));
  return pane;
}

export function renderResults(tally: RankTally): HTMLElement {
  const table = el("table", { class: "results" });
  const ranks = ["best", "middle", "worst"];
  table.append(el("tr", {}, el("th", {}, "prompt"),
                  ...ranks.map((r) => el("th", {}, r))));
  for (const [provenance, counts] of Object.entries(tally)) {
    table.append(el("tr", {}, el("td", {}, provenance),
                    ...ranks.map((r) => el("td", {}, String(counts[r] ?? 0)))));
  }
  return table;
}

function renderSurvey(state: ViewState, h: Handlers): HTMLElement {
  const pane = el("section", { class: "pane survey" });
  if (state.surveyDone) {
    pane.append(el("p", {}, "Thank you — your feedback was recorded."));
    return pane;
  }
  const selects: HTMLSelectElement[] = [];
  SURVEY_STATEMENTS.forEach((statement, i) => {
    const select = el("select", { id: `survey-${i}` });
    for (let score = 1; score <= 5; score++) {
      select.append(el("option", { value: String(score) }, String(score)));
    }
    select.value = "3";
    selects.push(select);
    pane.append(el("label", {}, statement, select));
  });
  pane.append(
    el("p", { class: "hint" },
       "1 = strongly disagree … 5 = strongly agree"),
  );
  const submit = el("button", {}, "Submit survey");
  submit.onclick = () => h.onSubmitSurvey(selects.map((s) => Number(s.value)));
  pane.append(submit);
  return pane;
}

export function render(root: HTMLElement, state: ViewState, h: Handlers): void {
  root.replaceChildren(renderTabs(state, h));
  if (state.activeTab === "chat") root.append(renderChat(state, h));
  else if (state.activeTab === "evaluation") {
    root.append(renderEvaluation(state, h));
  } else root.append(renderSurvey(state, h));
}
