/** Application wiring: one ApiClient, one ViewState, re-render on change. */

import { ApiClient, ApiError, EvalItem } from "./api.js";
import {
  ViewState,
  appendMessages,
  assertProvenanceFree,
  canSendMessage,
  chooseBest,
  chooseWorst,
  initialState,
  selection,
  switchTab,
} from "./state.js";
import { Handlers, render, renderResults } from "./ui.js";

const api = new ApiClient("");
let state: ViewState = initialState();
const root = document.getElementById("app") as HTMLElement;

function update(next: ViewState): void {
  state = next;
  render(root, state, handlers);
}

function showError(err: unknown): void {
  const detail =
    err instanceof ApiError ? `${err.status}: ${err.message}` : String(err);
  const banner = document.getElementById("error") as HTMLElement;
  banner.textContent = detail;
  banner.hidden = false;
  setTimeout(() => (banner.hidden = true), 6000);
}

async function guarded(fn: () => Promise<void>): Promise<void> {
  if (state.requestInFlight) return;
  update({ ...state, requestInFlight: true });
  try {
    await fn();
  } catch (err) {
    showError(err);
  } finally {
    update({ ...state, requestInFlight: false });
  }
}

function defaultConfig(): Record<string, unknown> {
  // Served configurations come from the operator; the UI only relays them.
  const raw = (window as unknown as { SESSION_CONFIG?: unknown }).SESSION_CONFIG;
  return (raw as Record<string, unknown>) ?? { template: "generic" };
}

const handlers: Handlers = {
  onTab(tab) {
    update(switchTab(state, tab));
  },

  onUpload(file) {
    void guarded(async () => {
      if (state.sessionId === null) {
        const sessionId = await api.createSession(defaultConfig());
        state = { ...state, sessionId };
      }
      const summary = await api.uploadData(
        state.sessionId as string, file, file.name,
      );
      state = appendMessages(
        { ...state, uploadDone: true }, summary.messages,
      );
    });
  },

  onSend(text) {
    if (!canSendMessage(state, text)) return;
    void guarded(async () => {
      const messages = await api.postMessage(state.sessionId as string, text);
      state = appendMessages(state, messages);
      const view = await api.getChat(state.sessionId as string);
      state = { ...state, ended: view.ended };
    });
  },

  onDownload(kind) {
    const a = document.createElement("a");
    a.href = api.promptUrl(state.sessionId as string, kind);
    a.download = `${kind}_prompt.txt`;
    a.click();
  },

  onStartEvaluation() {
    void guarded(async () => {
      await api.startEvaluation(state.sessionId as string);
      const items: EvalItem[] = await api.getEvalItems(
        state.sessionId as string,
      );
      assertProvenanceFree(items);
      state = { ...state, evalItems: items.map(selection) };
    });
  },

  onChooseBest(itemIndex, pos) {
    const evalItems = state.evalItems.slice();
    evalItems[itemIndex] = chooseBest(evalItems[itemIndex], pos);
    update({ ...state, evalItems });
  },

  onChooseWorst(itemIndex, pos) {
    const evalItems = state.evalItems.slice();
    evalItems[itemIndex] = chooseWorst(evalItems[itemIndex], pos);
    update({ ...state, evalItems });
  },

  onSubmitRanking(itemIndex) {
    const sel = state.evalItems[itemIndex];
    if (sel.best === null || sel.worst === null || sel.best === sel.worst) {
      return; // the control never submits best = worst
    }
    void guarded(async () => {
      await api.postRanking(
        state.sessionId as string, sel.item.item_id, sel.best as number,
        sel.worst as number,
      );
      const evalItems = state.evalItems.slice();
      evalItems[itemIndex] = { ...sel, submitted: true };
      state = { ...state, evalItems };
    });
  },

  onShowResults() {
    void guarded(async () => {
      const tally = await api.getResults(state.sessionId as string);
      const target = document.getElementById("results");
      target?.replaceChildren(renderResults(tally));
    });
  },

  onSubmitSurvey(scores) {
    void guarded(async () => {
      await api.postSurvey(state.sessionId as string, scores);
      state = { ...state, surveyDone: true };
    });
  },
};

render(root, state, handlers);
