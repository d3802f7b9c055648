// Pure UI state and its transitions. Rendering and fetch side effects live
// in main.ts; everything here is synchronous and unit-testable.

import type { Prediction, PredictResponse } from "./api";

export type SortKey = "rank" | "score" | "id";

export interface UiState {
  observed: string[]; // ordered, no duplicates
  k: number;
  similarity: "dot" | "cosine" | null; // null defers to the model default
  predictions: PredictResponse | null;
  stale: boolean; // true while predictions lag the observed set
  filterText: string;
  sortKey: SortKey;
  error: string | null;
}

export function initialState(): UiState {
  return {
    observed: [],
    k: 20,
    similarity: null,
    predictions: null,
    stale: false,
    filterText: "",
    sortKey: "rank",
    error: null,
  };
}

export function addTechnique(state: UiState, id: string): UiState {
  if (state.observed.includes(id)) return state; // duplicate add is a no-op
  return { ...state, observed: [...state.observed, id], stale: true };
}

export function removeTechnique(state: UiState, id: string): UiState {
  if (!state.observed.includes(id)) return state;
  const observed = state.observed.filter((t) => t !== id);
  if (observed.length === 0) {
    // last input removed: clear the table entirely
    return { ...state, observed, predictions: null, stale: false };
  }
  return { ...state, observed, stale: true };
}

export function setPredictions(state: UiState, resp: PredictResponse): UiState {
  return { ...state, predictions: resp, stale: false, error: null };
}

// A failed refresh keeps the previous observed set and predictions visible.
export function setError(state: UiState, message: string): UiState {
  return { ...state, error: message };
}

export function clearError(state: UiState): UiState {
  return { ...state, error: null };
}

export function setFilter(state: UiState, text: string): UiState {
  return { ...state, filterText: text };
}

export function setSortKey(state: UiState, key: SortKey): UiState {
  return { ...state, sortKey: key };
}

export function setK(state: UiState, k: number): UiState {
  if (!Number.isInteger(k) || k < 1) return state;
  return { ...state, k, stale: state.observed.length > 0 };
}

export function setSimilarity(state: UiState, similarity: "dot" | "cosine" | null): UiState {
  return { ...state, similarity, stale: state.observed.length > 0 };
}

function compareBy(key: SortKey, a: Prediction, b: Prediction): number {
  switch (key) {
    case "rank":
      return a.rank - b.rank;
    case "score":
      return b.score - a.score; // descending, which equals rank ascending
    case "id":
      return a.technique_id < b.technique_id ? -1 : a.technique_id > b.technique_id ? 1 : 0;
  }
}

// Filtered and sorted view of the prediction table. The filter is a
// case-insensitive substring match over id and display name; the sort is
// stable (original rank order breaks ties).
export function visibleRows(state: UiState): Prediction[] {
  if (!state.predictions) return [];
  const needle = state.filterText.trim().toLowerCase();
  const rows = state.predictions.predictions.filter((p) => {
    if (!needle) return true;
    const haystack = `${p.technique_id} ${p.technique_name ?? ""}`.toLowerCase();
    return haystack.includes(needle);
  });
  return rows
    .map((p, index) => ({ p, index }))
    .sort((x, y) => compareBy(state.sortKey, x.p, y.p) || x.index - y.index)
    .map(({ p }) => p);
}

// Scores render with exactly four decimals; the underlying value stays
// whatever the API returned.
export function formatScore(score: number): string {
  return score.toFixed(4);
}
