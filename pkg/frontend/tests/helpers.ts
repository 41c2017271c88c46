// In-memory stand-in for the rating service, speaking the same wire
// contract (paths, bodies, error envelopes) through a fetch-shaped
// function. Unit tests drive controllers against it; the integration
// suite talks to the real thing instead.

import type { Side } from "../src/types.js";

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function envelope(status: number, error: string, message: string): Response {
  return jsonResponse(status, { error, message });
}

export interface FakeTrial {
  trial_id: string;
  left_image_id: string;
  right_image_id: string;
}

export class FakeService {
  roster: string[];
  generationsTotal: number;
  generation = 0;
  finished = false;
  populationSize: number;
  ballots = new Map<string, Record<string, number>>();
  ballotLog: { participant: string; generation: number }[] = [];

  condition = "collaborative_vs_random";
  trials: FakeTrial[] = [];
  responses: { respondent_id: string; trial_id: string; choice: Side }[] = [];

  constructor(options: {
    roster: string[];
    generations?: number;
    populationSize?: number;
    trials?: FakeTrial[];
  }) {
    this.roster = options.roster;
    this.generationsTotal = options.generations ?? 2;
    this.populationSize = options.populationSize ?? 15;
    this.trials = options.trials ?? [];
  }

  imageIds(): string[] {
    const ids = [];
    for (let k = 0; k < this.populationSize; k++) {
      ids.push(`g${this.generation}-${k}`);
    }
    return ids;
  }

  pending(): string[] {
    return this.roster.filter((p) => !this.ballots.has(p));
  }

  generationPage(): unknown {
    return {
      session_id: "s1",
      mode: "collaborative",
      generation: this.generation,
      status: this.finished ? "finished" : "active",
      images: this.imageIds().map((iid) => ({
        image_id: iid,
        url: `/sessions/s1/images/${iid}.png`,
      })),
      pending_participants: this.pending(),
    };
  }

  /** Accept a ballot exactly the way the real service would. */
  submitBallot(body: {
    participant_id: string;
    generation: number;
    ratings: Record<string, number>;
  }): Response {
    if (this.finished) {
      return envelope(409, "session-finished", "session is finished");
    }
    const { participant_id: pid, generation, ratings } = body;
    if (!this.roster.includes(pid)) {
      return envelope(403, "unknown-participant", `${pid} is not on the roster`);
    }
    if (generation !== this.generation) {
      return envelope(
        409,
        "generation-mismatch",
        `ballot is for generation ${generation}, current is ${this.generation}`,
      );
    }
    if (this.ballots.has(pid)) {
      return envelope(409, "duplicate-ballot", `${pid} already voted`);
    }
    const expected = this.imageIds();
    const missing = expected.filter((iid) => !(iid in ratings));
    if (missing.length > 0 || Object.keys(ratings).length !== expected.length) {
      return envelope(422, "incomplete-ballot", `missing ratings: ${missing}`);
    }
    for (const value of Object.values(ratings)) {
      if (!Number.isInteger(value) || value < 1 || value > 10) {
        return envelope(422, "invalid-rating", `rating ${value} outside [1, 10]`);
      }
    }
    this.ballots.set(pid, ratings);
    this.ballotLog.push({ participant: pid, generation });
    let advanced = false;
    if (this.ballots.size === this.roster.length) {
      advanced = true;
      this.ballots.clear();
      if (this.generation === this.generationsTotal) {
        this.finished = true;
      } else {
        this.generation += 1;
      }
    }
    return jsonResponse(200, {
      accepted: true,
      generation_advanced: advanced,
      status: this.finished ? "finished" : "active",
      generation: this.generation,
      pending_participants: this.pending(),
    });
  }

  evaluationPage(): unknown {
    const answered: Record<string, string[]> = {};
    for (const r of this.responses) {
      (answered[r.respondent_id] ??= []).push(r.trial_id);
    }
    return {
      evaluation_id: "e1",
      session_id: "s1",
      condition: this.condition,
      trials: this.trials.map((t) => ({
        trial_id: t.trial_id,
        left: {
          image_id: t.left_image_id,
          url: `/sessions/s1/images/${t.left_image_id}.png`,
        },
        right: {
          image_id: t.right_image_id,
          url: `/sessions/s1/images/${t.right_image_id}.png`,
        },
      })),
      answered,
    };
  }

  submitResponse(body: {
    respondent_id: string;
    trial_id: string;
    choice: string;
  }): Response {
    if (!this.trials.some((t) => t.trial_id === body.trial_id)) {
      return envelope(404, "unknown-trial", `no trial ${body.trial_id}`);
    }
    if (body.choice !== "left" && body.choice !== "right") {
      return envelope(422, "invalid-response", `choice ${body.choice}`);
    }
    const seen = this.responses.some(
      (r) =>
        r.respondent_id === body.respondent_id && r.trial_id === body.trial_id,
    );
    if (seen) {
      return envelope(
        409,
        "duplicate-response",
        `${body.respondent_id} already answered ${body.trial_id}`,
      );
    }
    this.responses.push({
      respondent_id: body.respondent_id,
      trial_id: body.trial_id,
      choice: body.choice,
    });
    return jsonResponse(200, { accepted: true, responses: this.responses.length });
  }

  /** fetch-shaped entry point the ServiceClient plugs into. */
  fetchFn: typeof fetch = async (input, init) => {
    const url = typeof input === "string" ? input : input.toString();
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    if (path === "/sessions/s1/generation") {
      return jsonResponse(200, this.generationPage());
    }
    if (path === "/sessions/s1/ballots") {
      return this.submitBallot(body);
    }
    if (path === "/evaluations/e1") {
      return jsonResponse(200, this.evaluationPage());
    }
    if (path === "/evaluations/e1/responses") {
      return this.submitResponse(body);
    }
    return envelope(404, "unknown-session", `no route ${path}`);
  };
}

/** A sleep whose wakeups the test controls one by one. */
export function manualSleep(): {
  sleep: (ms: number) => Promise<void>;
  tick: () => void;
  pendingWakeups: () => number;
} {
  const queue: (() => void)[] = [];
  return {
    sleep: () => new Promise<void>((resolve) => queue.push(resolve)),
    tick: () => queue.shift()?.(),
    pendingWakeups: () => queue.length,
  };
}

/** Poll until a condition holds; fails loudly instead of hanging. */
export async function waitFor(
  condition: () => boolean,
  what = "condition",
  timeoutMs = 5000,
): Promise<void> {
  const started = Date.now();
  while (!condition()) {
    if (Date.now() - started > timeoutMs) {
      throw new Error(`timed out waiting for ${what}`);
    }
    await new Promise((r) => setTimeout(r, 5));
  }
}

/** Rate every tile of a controller-shaped grid with a simple pattern. */
export function rateAll(
  controller: {
    viewModel: { tiles: { imageId: string }[] };
    setRating(id: string, rating: number): boolean;
  },
  offset = 0,
): void {
  controller.viewModel.tiles.forEach((tile, k) => {
    controller.setRating(tile.imageId, ((k + offset) % 10) + 1);
  });
}
