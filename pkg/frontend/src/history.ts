/** Append-only session history; any entry restores the editor for another round. */

import { GeneratePayload, GenerateResult } from "./api.js";
import { MaskEditorState } from "./maskState.js";

export interface HistoryEntry {
  index: number;
  at: number;
  request: GeneratePayload;
  editor: {
    mode: "tabular" | "airfoil";
    dim: number;
    fixed: boolean[];
    pinned: number[];
    prefixEighths: number;
  };
  summary: {
    nDesigns: number;
    mapeVsTarget: number | null;
    meanPredicted: number | null;
    feasibleRate: number | null;
  };
}

export function summarize(result: GenerateResult): HistoryEntry["summary"] {
  const perfs = result.designs
    .map((d) => d.predicted_performance)
    .filter((v): v is number => v !== null);
  const feas = result.designs
    .map((d) => d.feasible)
    .filter((v): v is boolean => v !== null);
  return {
    nDesigns: result.designs.length,
    mapeVsTarget: result.mape_vs_target ?? null,
    meanPredicted: perfs.length ? perfs.reduce((a, b) => a + b, 0) / perfs.length : null,
    feasibleRate: feas.length ? feas.filter(Boolean).length / feas.length : null,
  };
}

export class SessionHistory {
  private entries: HistoryEntry[] = [];

  record(state: MaskEditorState, request: GeneratePayload, result: GenerateResult): HistoryEntry {
    const entry: HistoryEntry = {
      index: this.entries.length,
      at: Date.now(),
      request,
      editor: {
        mode: state.mode,
        dim: state.dim,
        fixed: [...state.fixed],
        pinned: [...state.pinned],
        prefixEighths: state.prefixEighths,
      },
      summary: summarize(result),
    };
    this.entries.push(entry);
    return entry;
  }

  list(): readonly HistoryEntry[] {
    return this.entries;
  }

  get(index: number): HistoryEntry {
    const entry = this.entries[index];
    if (!entry) throw new RangeError(`no history entry ${index}`);
    return entry;
  }

  /** Rebuild the editor exactly as it was when the entry was recorded. */
  restore(index: number): MaskEditorState {
    const { editor } = this.get(index);
    const state = new MaskEditorState(editor.mode, editor.dim, editor.pinned);
    state.fixed = [...editor.fixed];
    state.prefixEighths = editor.prefixEighths;
    return state;
  }
}
