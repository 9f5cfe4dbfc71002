import type { SamplingDraft } from "./types.js";

export interface ZoomTransform {
  x: number;
  y: number;
  k: number;
}

export const IDENTITY_ZOOM: ZoomTransform = { x: 0, y: 0, k: 1 };

type StateEvent = "selection" | "zoom" | "strategies" | "sampling";

/** Shared view state. Selection and zoom changes propagate to every
 * subscribed panel, which is what keeps the heatmap, force graph and
 * question panel in lockstep. */
export class ViewState {
  selectedQuestionId: string | null = null;
  zoom: ZoomTransform = { ...IDENTITY_ZOOM };
  activeStrategies: string[] = ["plain", "standard"];
  samplingDraft: SamplingDraft = {
    diversity: 0,
    num_chunks: 5,
    keywords: [],
    tags: [],
    num_questions: 5,
    selection: "random",
    focus_question_id: null,
  };

  private listeners = new Map<StateEvent, Set<() => void>>();

  on(event: StateEvent, fn: () => void): () => void {
    if (!this.listeners.has(event)) this.listeners.set(event, new Set());
    this.listeners.get(event)!.add(fn);
    return () => this.listeners.get(event)!.delete(fn);
  }

  private emit(event: StateEvent): void {
    for (const fn of this.listeners.get(event) ?? []) fn();
  }

  selectQuestion(id: string | null): void {
    if (this.selectedQuestionId === id) return;
    this.selectedQuestionId = id;
    this.emit("selection");
  }

  setZoom(zoom: ZoomTransform): void {
    this.zoom = zoom;
    this.emit("zoom");
  }

  setStrategies(kinds: string[]): void {
    this.activeStrategies = kinds;
    this.emit("strategies");
  }

  updateSampling(patch: Partial<SamplingDraft>): void {
    this.samplingDraft = { ...this.samplingDraft, ...patch };
    this.emit("sampling");
  }
}
