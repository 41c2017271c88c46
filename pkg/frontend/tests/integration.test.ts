// End-to-end against the real rating service: a python child process
// runs the actual HTTP app; controllers talk to it over real sockets.

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { buildGallery } from "../src/gallery.js";
import { PairwiseSurveyController } from "../src/pairwise.js";
import type { ProgressStore } from "../src/pairwise.js";
import { RatingGridController } from "../src/ratingGrid.js";
import type { RatingGridViewModel } from "../src/ratingGrid.js";
import { waitFor } from "./helpers.js";

const PORT = 20000 + Math.floor(Math.random() * 20000);
const BASE = `http://127.0.0.1:${PORT}`;
const ROSTER = ["ada", "bea", "cyd", "dee", "eli"];
const POLL_MS = 500;

// small latents and a short local search keep each step quick; the
// population stays at the full 15 so the grid is the real thing
const CONFIG = {
  population_size: 15,
  generations: 1,
  latent_dim: 20,
  local_search_generations: 5,
  diversity_threshold: 3.0,
  participants: 5,
  seed: 505,
};

const BOOT = `
import sys, uvicorn
from latentart import ProceduralBackend, SyntheticScorer
from latentart.service import SessionManager, create_app

manager = SessionManager(sys.argv[1], ProceduralBackend(), SyntheticScorer())
app = create_app(manager)
uvicorn.run(app, host="127.0.0.1", port=int(sys.argv[2]), log_level="warning")
`;

let service: ChildProcess;
let stderrTail = "";

class MemoryStore implements ProgressStore {
  private data = new Map<string, string>();
  getItem(key: string) {
    return this.data.get(key) ?? null;
  }
  setItem(key: string, value: string) {
    this.data.set(key, value);
  }
}

async function post(path: string, body: unknown): Promise<any> {
  const reply = await fetch(BASE + path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  const parsed = await reply.json();
  if (!reply.ok) {
    throw new Error(`POST ${path} -> ${reply.status}: ${JSON.stringify(parsed)}`);
  }
  return parsed;
}

async function get(path: string): Promise<any> {
  const reply = await fetch(BASE + path);
  const parsed = await reply.json();
  if (!reply.ok) {
    throw new Error(`GET ${path} -> ${reply.status}: ${JSON.stringify(parsed)}`);
  }
  return parsed;
}

beforeAll(async () => {
  const dataDir = mkdtempSync(join(tmpdir(), "latentart-webui-"));
  service = spawn("python3", ["-c", BOOT, dataDir, String(PORT)], {
    stdio: ["ignore", "ignore", "pipe"],
  });
  service.stderr!.on("data", (chunk: Buffer) => {
    stderrTail = (stderrTail + chunk.toString()).slice(-4000);
  });
  const died = new Promise<never>((_, reject) => {
    service.on("exit", (code) =>
      reject(new Error(`service exited with ${code}: ${stderrTail}`)),
    );
  });
  // ready once it answers anything at all on the wire
  await Promise.race([
    died,
    (async () => {
      for (let attempt = 0; ; attempt++) {
        try {
          const reply = await fetch(`${BASE}/sessions/none/generation`);
          if (reply.status === 404) return;
        } catch {
          if (attempt > 200) throw new Error(`service never came up: ${stderrTail}`);
        }
        await new Promise((r) => setTimeout(r, 100));
      }
    })(),
  ]);
});

afterAll(() => {
  service?.kill();
});

describe("the collaborative loop in browsers", () => {
  let sessionId: string;
  const grids = new Map<string, RatingGridController>();
  const vms = new Map<string, RatingGridViewModel>();

  function grid(pid: string): RatingGridController {
    return grids.get(pid)!;
  }

  it("hands every participant the same 15-image generation", async () => {
    const page = await post("/sessions", {
      config: CONFIG,
      roster: ROSTER,
      mode: "collaborative",
    });
    sessionId = page.session_id;

    for (const pid of ROSTER) {
      const controller = new RatingGridController({
        client: new ServiceClient({ baseUrl: BASE }),
        sessionId,
        participantId: pid,
        pollIntervalMs: POLL_MS,
        onChange: (vm) => vms.set(pid, vm),
      });
      grids.set(pid, controller);
      await controller.start();
    }
    for (const pid of ROSTER) {
      const vm = grid(pid).viewModel;
      expect(vm.phase).toBe("rating");
      expect(vm.generation).toBe(0);
      expect(vm.tiles).toHaveLength(15);
    }
    // the image bytes are really servable where the tiles point
    const firstUrl = grid("ada").viewModel.tiles[0]!.url;
    const png = await fetch(firstUrl);
    expect(png.status).toBe(200);
    expect(png.headers.get("content-type")).toBe("image/png");
    const bytes = new Uint8Array(await png.arrayBuffer());
    expect([...bytes.slice(1, 4)]).toEqual([0x50, 0x4e, 0x47]); // "PNG"
  });

  it("blocks an incomplete grid from submitting", async () => {
    const ada = grid("ada");
    ada.viewModel.tiles.slice(0, 14).forEach((tile, k) => {
      ada.setRating(tile.imageId, (k % 10) + 1);
    });
    expect(ada.viewModel.canSubmit).toBe(false);
    expect(await ada.submit()).toBe(false);
    // the service never saw a ballot: everyone is still pending
    const page = await get(`/sessions/${sessionId}/generation`);
    expect(page.pending_participants).toHaveLength(5);
  });

  it("advances all five raters within one poll interval", async () => {
    for (const pid of ROSTER) {
      const controller = grid(pid);
      controller.viewModel.tiles.forEach((tile, k) => {
        controller.setRating(tile.imageId, ((k + ROSTER.indexOf(pid)) % 10) + 1);
      });
      expect(controller.viewModel.canSubmit).toBe(true);
    }
    for (const pid of ROSTER.slice(0, 4)) {
      expect(await grid(pid).submit()).toBe(true);
      expect(grid(pid).viewModel.phase).toBe("waiting");
    }

    const closerAccepted = await grid("eli").submit();
    const advancedAt = Date.now();
    expect(closerAccepted).toBe(true);

    await waitFor(
      () => ROSTER.every((pid) => grid(pid).viewModel.generation === 1),
      "all five grids on generation 1",
      POLL_MS * 4,
    );
    const elapsed = Date.now() - advancedAt;
    expect(elapsed).toBeLessThanOrEqual(POLL_MS * 2); // one tick plus slack
    for (const pid of ROSTER) {
      const vm = grid(pid).viewModel;
      expect(vm.phase).toBe("rating");
      expect(vm.tiles).toHaveLength(15);
      expect(vm.tiles.every((t) => t.rating === null)).toBe(true);
    }
  });

  it("runs to the finished screen and only then shows results", async () => {
    // mid-run the results stay away from raters' eyes
    const live = await get(`/sessions/${sessionId}/results`);
    expect(
      buildGallery(live, new ServiceClient({ baseUrl: BASE })),
    ).toBeNull();

    for (const pid of ROSTER) {
      const controller = grid(pid);
      controller.viewModel.tiles.forEach((tile, k) => {
        controller.setRating(tile.imageId, ((k * 3 + ROSTER.indexOf(pid)) % 10) + 1);
      });
      await controller.submit();
    }
    await waitFor(
      () => ROSTER.every((pid) => grid(pid).viewModel.phase === "finished"),
      "all five finished",
      POLL_MS * 4,
    );
    for (const pid of ROSTER) grid(pid).stop();

    const results = await get(`/sessions/${sessionId}/results`);
    expect(results.status).toBe("finished");
    expect(results.fitness_history).toHaveLength(CONFIG.generations + 1);
    const gallery = buildGallery(results, new ServiceClient({ baseUrl: BASE }));
    expect(gallery).not.toBeNull();
    expect(gallery!.items.length).toBeGreaterThan(0);
    expect(gallery!.items.length).toBeLessThanOrEqual(10);
  });

  it("carries a pairwise survey from trials to tallied results", async () => {
    const created = await post("/evaluations", {
      session_id: sessionId,
      condition: "collaborative_vs_random",
      count: 5,
      seed: 7,
    });
    const evaluationId = created.evaluation_id;
    expect(created.trials).toHaveLength(5);
    // respondents are blind: the payload never names the candidate side
    expect(JSON.stringify(created)).not.toContain("candidate_side");

    // the assigned sides are stable across fetches, never re-randomized
    const again = await get(`/evaluations/${evaluationId}`);
    expect(again.trials).toEqual(created.trials);

    const survey = new PairwiseSurveyController({
      client: new ServiceClient({ baseUrl: BASE }),
      evaluationId,
      respondentId: "r1",
      store: new MemoryStore(),
    });
    await survey.load();
    expect(survey.viewModel.total).toBe(5);

    const sidesShown: string[] = [];
    while (survey.viewModel.phase === "answering") {
      const current = survey.viewModel.current!;
      const expected = created.trials[survey.viewModel.index]!;
      expect(current.trial_id).toBe(expected.trial_id);
      expect(current.left.image_id).toBe(expected.left.image_id);
      expect(current.right.image_id).toBe(expected.right.image_id);
      const side = sidesShown.length % 2 === 0 ? "left" : "right";
      sidesShown.push(side);
      expect(await survey.choose(side)).toBe(true);
    }
    expect(survey.viewModel.phase).toBe("done");

    // exactly one response per trial reached the service
    const after = await get(`/evaluations/${evaluationId}`);
    expect([...(after.answered.r1 ?? [])].sort()).toEqual(
      created.trials.map((t: { trial_id: string }) => t.trial_id).sort(),
    );
    const results = await get(`/evaluations/${evaluationId}/results`);
    expect(results.responses).toBe(5);
    expect(results.candidate_chosen + 0).toBeGreaterThanOrEqual(0);

    // a fresh load (reload) goes straight to done, posting nothing new
    const reloaded = new PairwiseSurveyController({
      client: new ServiceClient({ baseUrl: BASE }),
      evaluationId,
      respondentId: "r1",
      store: new MemoryStore(),
    });
    await reloaded.load();
    expect(reloaded.viewModel.phase).toBe("done");
    const finalCount = await get(`/evaluations/${evaluationId}/results`);
    expect(finalCount.responses).toBe(5);
  });
});
