import { ApiError, ServiceClient } from "./api.js";
import type { Side, TrialPage } from "./types.js";

export type SurveyPhase = "loading" | "answering" | "posting" | "done" | "error";

export interface SurveyViewModel {
  phase: SurveyPhase;
  condition: string;
  /** zero-based index of the trial on screen; == total when done */
  index: number;
  total: number;
  current: TrialPage | null;
  error: string | null;
}

/** Where partial progress lives between reloads (localStorage fits). */
export interface ProgressStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export interface SurveyDeps {
  client: Pick<ServiceClient, "getEvaluation" | "submitResponse" | "resolve">;
  evaluationId: string;
  respondentId: string;
  store?: ProgressStore;
  onChange?: (vm: SurveyViewModel) => void;
}

/**
 * Walks a respondent through every trial of a pairwise study, one
 * forced choice per trial. Trials keep the exact order and left/right
 * placement the service assigned; the client never re-randomizes, or
 * the service's position balancing would be undone.
 *
 * Progress persists locally and is reconciled with the service's own
 * answered list, so a reload resumes at the first unanswered trial.
 */
export class PairwiseSurveyController {
  private readonly client: SurveyDeps["client"];
  private readonly evaluationId: string;
  readonly respondentId: string;
  private readonly store: ProgressStore | null;
  private readonly onChange: (vm: SurveyViewModel) => void;

  private phase: SurveyPhase = "loading";
  private condition = "";
  private trials: TrialPage[] = [];
  private answered = new Set<string>();
  private error: string | null = null;
  private inFlight = false;

  constructor(deps: SurveyDeps) {
    this.client = deps.client;
    this.evaluationId = deps.evaluationId;
    this.respondentId = deps.respondentId;
    this.store = deps.store ?? null;
    this.onChange = deps.onChange ?? (() => {});
  }

  private get storeKey(): string {
    return `latentart-survey/${this.evaluationId}/${this.respondentId}`;
  }

  get viewModel(): SurveyViewModel {
    const index = this.firstUnanswered();
    return {
      phase: this.phase,
      condition: this.condition,
      index,
      total: this.trials.length,
      current: index < this.trials.length ? this.trials[index]! : null,
      error: this.error,
    };
  }

  private firstUnanswered(): number {
    let k = 0;
    while (k < this.trials.length && this.answered.has(this.trials[k]!.trial_id)) {
      k++;
    }
    return k;
  }

  async load(): Promise<void> {
    let page;
    try {
      page = await this.client.getEvaluation(this.evaluationId);
    } catch (failure) {
      this.phase = "error";
      this.error = failure instanceof Error ? failure.message : String(failure);
      this.emit();
      return;
    }
    this.condition = page.condition;
    this.trials = page.trials.map((t) => ({
      trial_id: t.trial_id,
      left: { ...t.left, url: this.client.resolve(t.left.url) },
      right: { ...t.right, url: this.client.resolve(t.right.url) },
    }));
    this.answered = new Set(page.answered[this.respondentId] ?? []);
    for (const trialId of this.readStore()) this.answered.add(trialId);
    this.phase = this.firstUnanswered() < this.trials.length ? "answering" : "done";
    this.emit();
  }

  /**
   * Record the choice for the trial on screen. Resolves false when a
   * post is already in flight or the survey is not accepting input.
   */
  async choose(side: Side): Promise<boolean> {
    if (this.phase !== "answering" || this.inFlight) return false;
    const trial = this.trials[this.firstUnanswered()];
    if (!trial) return false;
    this.inFlight = true;
    this.phase = "posting";
    this.emit();
    try {
      await this.client.submitResponse(this.evaluationId, {
        respondent_id: this.respondentId,
        trial_id: trial.trial_id,
        choice: side,
      });
      this.markAnswered(trial.trial_id);
      return true;
    } catch (failure) {
      if (failure instanceof ApiError && failure.code === "duplicate-response") {
        // an earlier post landed even though we never saw its reply
        this.markAnswered(trial.trial_id);
        return true;
      }
      this.error = failure instanceof Error ? failure.message : String(failure);
      this.phase = "answering"; // nothing recorded; same trial stays up
      return false;
    } finally {
      this.inFlight = false;
      this.emit();
    }
  }

  private markAnswered(trialId: string): void {
    this.answered.add(trialId);
    this.writeStore();
    this.error = null;
    this.phase = this.firstUnanswered() < this.trials.length ? "answering" : "done";
  }

  private emit(): void {
    this.onChange(this.viewModel);
  }

  private readStore(): string[] {
    if (!this.store) return [];
    try {
      const raw = this.store.getItem(this.storeKey);
      const parsed: unknown = raw ? JSON.parse(raw) : [];
      return Array.isArray(parsed) ? parsed.filter((x) => typeof x === "string") : [];
    } catch {
      return [];
    }
  }

  private writeStore(): void {
    if (!this.store) return;
    try {
      this.store.setItem(this.storeKey, JSON.stringify([...this.answered]));
    } catch {
      // storage full or unavailable; the server still has the responses
    }
  }
}
