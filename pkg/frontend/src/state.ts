/** View-state machine for the triage console.
 *
 * One decision per displayed prototype: submit() is a no-op unless the
 * console is in the "ready" phase, and the phase leaves "ready" before any
 * request is sent, so a double click or repeated keypress cannot post twice.
 */

import { ApiError, Progress, Prototype, TriageApi, Verdict } from "./api.js";

export type Phase = "idle" | "loading" | "ready" | "submitting" | "done" | "error";

export interface TriageViewState {
  phase: Phase;
  prototype: Prototype | null;
  previewSrc: string | null;
  budgetRemaining: number;
  progress: Progress | null;
  toast: string | null;
  errorBanner: string | null;
}

export type Listener = (state: TriageViewState) => void;

export class TriageController {
  state: TriageViewState = {
    phase: "idle",
    prototype: null,
    previewSrc: null,
    budgetRemaining: 0,
    progress: null,
    toast: null,
    errorBanner: null,
  };

  private listeners: Listener[] = [];

  constructor(private readonly api: TriageApi) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    listener(this.state);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<TriageViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  get controlsEnabled(): boolean {
    return this.state.phase === "ready";
  }

  /** Fetch and display the queue head. */
  async viewNext(): Promise<void> {
    if (this.state.phase === "submitting" || this.state.phase === "loading") return;
    this.update({ phase: "loading", errorBanner: null });
    try {
      const head = await this.api.next();
      if (head === null) {
        this.update({ phase: "done", prototype: null, previewSrc: null });
        await this.refreshProgress();
        return;
      }
      this.update({
        phase: "ready",
        prototype: head.prototype,
        previewSrc: this.api.previewUrl(head.prototype.sha256),
        budgetRemaining: head.budget_remaining,
      });
    } catch (err) {
      this.update({ phase: "error", errorBanner: describe(err) });
    }
  }

  /** Submit the verdict for the displayed prototype. Returns false when the
   * console is not accepting decisions (pending request, done, error). */
  async submit(verdict: Verdict): Promise<boolean> {
    if (this.state.phase !== "ready" || this.state.prototype === null) return false;
    const sha = this.state.prototype.sha256;
    this.update({ phase: "submitting", toast: null });
    try {
      const result = await this.api.decide(sha, verdict);
      const toast =
        verdict === "remove"
          ? `removed ${result.removed_count}`
          : "kept (no removals)";
      this.update({ phase: "idle", toast, budgetRemaining: result.budget_remaining });
      await this.refreshProgress();
      await this.viewNext();
      return true;
    } catch (err) {
      // 409: another session advanced the queue, or it is exhausted; 422:
      // bad verdict. Both surface with a retry affordance.
      this.update({ phase: "error", errorBanner: describe(err) });
      return false;
    }
  }

  async refreshProgress(): Promise<void> {
    try {
      this.update({ progress: await this.api.progress() });
    } catch {
      // progress is advisory; the next poll will recover
    }
  }

  /** Retry affordance for the error banner: reload the queue head. */
  async retry(): Promise<void> {
    this.update({ phase: "idle", errorBanner: null });
    await this.viewNext();
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    if (err.status === 409) return `decision rejected (stale queue): ${err.message}`;
    if (err.status === 422) return `decision rejected: ${err.message}`;
    return `service error ${err.status}: ${err.message}`;
  }
  return `service unreachable: ${err instanceof Error ? err.message : String(err)}`;
}
