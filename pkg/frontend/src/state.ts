/** Pure view-state logic: tab gating, ranking selection rules, in-flight
 * guards. Kept free of DOM and network so every invariant is unit-testable.
 */

import type { EvalItem, VisibleMessage } from "./api.js";

export type Tab = "chat" | "survey" | "evaluation";

export interface ItemSelection {
  item: EvalItem;
  best: number | null;
  worst: number | null;
  submitted: boolean;
}

export interface ViewState {
  sessionId: string | null;
  uploadDone: boolean;
  ended: boolean;
  requestInFlight: boolean;
  activeTab: Tab;
  chat: VisibleMessage[];
  evalItems: ItemSelection[];
  surveyDone: boolean;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    uploadDone: false,
    ended: false,
    requestInFlight: false,
    activeTab: "chat",
    chat: [],
    evalItems: [],
    surveyDone: false,
  };
}

/** Survey and evaluation open only once the conversation has ended. */
export function tabEnabled(state: ViewState, tab: Tab): boolean {
  if (tab === "chat") return true;
  return state.ended;
}

export function switchTab(state: ViewState, tab: Tab): ViewState {
  if (!tabEnabled(state, tab)) return state;
  return { ...state, activeTab: tab };
}

/** Sending is allowed only with an active, uploaded, unfinished session and
 * no other request on the wire. */
export function canSendMessage(state: ViewState, text: string): boolean {
  return (
    state.sessionId !== null &&
    state.uploadDone &&
    !state.ended &&
    !state.requestInFlight &&
    text.trim().length > 0
  );
}

export function downloadEnabled(state: ViewState): boolean {
  return state.ended;
}

export function appendMessages(
  state: ViewState,
  messages: VisibleMessage[],
): ViewState {
  return { ...state, chat: [...state.chat, ...messages] };
}

// -- ranking selection ------------------------------------------------------

export function selection(item: EvalItem): ItemSelection {
  return {
    item,
    best: item.best,
    worst: item.worst,
    submitted: item.best !== null && item.worst !== null,
  };
}

/** Choosing a candidate as best clears it as worst (and vice versa), so the
 * two selections can never point at the same candidate. */
export function chooseBest(sel: ItemSelection, pos: number): ItemSelection {
  if (sel.submitted) return sel;
  return { ...sel, best: pos, worst: sel.worst === pos ? null : sel.worst };
}

export function chooseWorst(sel: ItemSelection, pos: number): ItemSelection {
  if (sel.submitted) return sel;
  return { ...sel, worst: pos, best: sel.best === pos ? null : sel.best };
}

export function canSubmitRanking(sel: ItemSelection): boolean {
  return (
    !sel.submitted &&
    sel.best !== null &&
    sel.worst !== null &&
    sel.best !== sel.worst
  );
}

/** The inferred middle position, shown once best and worst are picked. */
export function middlePosition(sel: ItemSelection): number | null {
  if (sel.best === null || sel.worst === null || sel.best === sel.worst) {
    return null;
  }
  return [0, 1, 2].filter((p) => p !== sel.best && p !== sel.worst)[0];
}

export function allRanked(state: ViewState): boolean {
  return state.evalItems.length > 0 && state.evalItems.every((s) => s.submitted);
}

/** Defense in depth: the wire payload must never name a candidate's origin.
 * Throws if a provenance-looking key leaks into an item. */
export function assertProvenanceFree(raw: unknown): void {
  const dumped = JSON.stringify(raw);
  for (const label of ['"baseline"', '"zs"', '"fs"']) {
    if (dumped.includes(label)) {
      throw new Error(`candidate provenance leaked into the payload: ${label}`);
    }
  }
}
