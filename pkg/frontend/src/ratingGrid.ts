import { ApiError, ServiceClient } from "./api.js";
import type { BallotReply, GenerationPage } from "./types.js";

export type GridPhase =
  | "loading"
  | "rating"
  | "submitting"
  | "waiting"
  | "finished"
  | "error";

export interface Tile {
  imageId: string;
  url: string;
  rating: number | null;
}

export interface RatingGridViewModel {
  phase: GridPhase;
  generation: number;
  tiles: Tile[];
  canSubmit: boolean;
  pendingParticipants: string[];
  submitted: boolean;
  error: string | null;
}

export interface GridDeps {
  client: Pick<ServiceClient, "getGeneration" | "submitBallot" | "resolve">;
  sessionId: string;
  participantId: string;
  onChange?: (vm: RatingGridViewModel) => void;
  pollIntervalMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const realSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

/**
 * Drives one participant's rating loop: load the generation, collect a
 * 1-10 rating for every tile, submit the ballot, then wait (polling)
 * until the roster completes and the next generation appears.
 *
 * The view model never contains fitness aggregates; raters judge each
 * image without seeing how the crowd rated it.
 */
export class RatingGridController {
  private readonly client: GridDeps["client"];
  private readonly sessionId: string;
  readonly participantId: string;
  private readonly onChange: (vm: RatingGridViewModel) => void;
  private readonly pollIntervalMs: number;
  private readonly sleep: (ms: number) => Promise<void>;

  private phase: GridPhase = "loading";
  private generation = -1;
  private tiles: Tile[] = [];
  private pendingParticipants: string[] = [];
  private submitted = false;
  private error: string | null = null;
  private running = false;
  private inFlight = false;

  constructor(deps: GridDeps) {
    this.client = deps.client;
    this.sessionId = deps.sessionId;
    this.participantId = deps.participantId;
    this.onChange = deps.onChange ?? (() => {});
    this.pollIntervalMs = deps.pollIntervalMs ?? 2000;
    this.sleep = deps.sleep ?? realSleep;
  }

  get viewModel(): RatingGridViewModel {
    return {
      phase: this.phase,
      generation: this.generation,
      tiles: this.tiles.map((t) => ({ ...t })),
      canSubmit: this.canSubmit,
      pendingParticipants: [...this.pendingParticipants],
      submitted: this.submitted,
      error: this.error,
    };
  }

  get canSubmit(): boolean {
    return (
      this.phase === "rating" &&
      this.tiles.length > 0 &&
      this.tiles.every((t) => t.rating !== null)
    );
  }

  /** Load the current generation and keep polling until finished. */
  async start(): Promise<void> {
    this.running = true;
    await this.refresh();
    void this.pollLoop();
  }

  stop(): void {
    this.running = false;
  }

  private isFinished(): boolean {
    return this.phase === "finished";
  }

  private async pollLoop(): Promise<void> {
    while (this.running && !this.isFinished()) {
      await this.sleep(this.pollIntervalMs);
      if (!this.running || this.isFinished()) break;
      if (this.inFlight) continue; // a submission owns the state right now
      await this.refresh();
    }
  }

  private async refresh(): Promise<void> {
    let page: GenerationPage;
    try {
      page = await this.client.getGeneration(this.sessionId);
    } catch (failure) {
      // transient fetch trouble: report it and let the next poll retry
      this.error = failure instanceof Error ? failure.message : String(failure);
      this.emit();
      return;
    }
    this.apply(page);
  }

  private apply(page: GenerationPage): void {
    this.error = null;
    if (page.status === "finished") {
      this.phase = "finished";
      this.generation = page.generation;
      this.pendingParticipants = [];
      this.emit();
      return;
    }
    if (page.generation !== this.generation) {
      // a new round: fresh tiles, nothing rated yet
      this.generation = page.generation;
      this.tiles = page.images.map((img) => ({
        imageId: img.image_id,
        url: this.client.resolve(img.url),
        rating: null,
      }));
      this.submitted = false;
    }
    this.pendingParticipants = [...page.pending_participants];
    const mePending = page.pending_participants.includes(this.participantId);
    // not pending while the round is open means our ballot is already in
    this.submitted = !mePending;
    this.phase = mePending ? "rating" : "waiting";
    this.emit();
  }

  /**
   * Record a pending rating on one tile. Returns false when input is
   * currently disabled (submitting/waiting) rather than mutating state.
   */
  setRating(imageId: string, rating: number): boolean {
    if (this.phase !== "rating" || this.inFlight) return false;
    if (!Number.isInteger(rating) || rating < 1 || rating > 10) {
      throw new RangeError(`rating must be an integer in [1, 10], got ${rating}`);
    }
    const tile = this.tiles.find((t) => t.imageId === imageId);
    if (!tile) throw new Error(`no tile for image ${imageId}`);
    tile.rating = rating;
    this.emit();
    return true;
  }

  /**
   * Post the completed ballot. Returns false without any network call
   * when the grid is incomplete or a submission is already in flight.
   */
  async submit(): Promise<boolean> {
    if (!this.canSubmit || this.inFlight) return false;
    this.inFlight = true;
    this.phase = "submitting";
    this.emit();
    const ratings: Record<string, number> = {};
    for (const tile of this.tiles) ratings[tile.imageId] = tile.rating as number;
    try {
      const reply = await this.client.submitBallot(this.sessionId, {
        participant_id: this.participantId,
        generation: this.generation,
        ratings,
      });
      this.afterAccepted(reply);
      return true;
    } catch (failure) {
      this.afterRejected(failure);
      return false;
    } finally {
      this.inFlight = false;
      this.emit();
    }
  }

  private afterAccepted(reply: BallotReply): void {
    this.submitted = true;
    this.error = null;
    if (reply.status === "finished") {
      this.phase = "finished";
      this.generation = reply.generation;
      this.pendingParticipants = [];
    } else if (reply.generation_advanced) {
      // ours was the last ballot; fetch the new images right away
      this.phase = "loading";
      void this.refresh();
    } else {
      this.phase = "waiting";
      this.pendingParticipants = [...reply.pending_participants];
    }
  }

  private afterRejected(failure: unknown): void {
    if (failure instanceof ApiError) {
      this.error = failure.message; // service rejections shown verbatim
      switch (failure.code) {
        case "duplicate-ballot":
          // double submit: the first one counted
          this.submitted = true;
          this.phase = "waiting";
          break;
        case "generation-mismatch":
        case "session-finished":
          // our page is stale; re-sync with the service
          this.phase = "loading";
          void this.refresh();
          break;
        default:
          // invalid-rating, incomplete-ballot, unknown-participant:
          // keep the grid editable so the rater can correct course
          this.phase = "rating";
      }
      return;
    }
    this.error = failure instanceof Error ? failure.message : String(failure);
    this.phase = "rating"; // network trouble: nothing was recorded
  }

  private emit(): void {
    this.onChange(this.viewModel);
  }
}
