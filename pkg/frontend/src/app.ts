import { ServiceClient } from "./api.js";
import { buildGallery } from "./gallery.js";
import { GalleryScreen, RatingScreen, SurveyScreen } from "./dom.js";
import { PairwiseSurveyController } from "./pairwise.js";
import { RatingGridController } from "./ratingGrid.js";

function loginForm(root: HTMLElement): void {
  root.innerHTML = `
    <div class="header">Join a session</div>
    <form class="login" method="get">
      <label>Session id <input name="session" required></label>
      <label>Your participant token <input name="participant" required></label>
      <button type="submit">Start rating</button>
    </form>
    <div class="header">&hellip;or answer a survey</div>
    <form class="login" method="get">
      <label>Evaluation id <input name="evaluation" required></label>
      <label>Your respondent id <input name="respondent" required></label>
      <button type="submit">Start survey</button>
    </form>`;
}

function main(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const params = new URLSearchParams(window.location.search);
  // same-origin by default; ?service= points elsewhere for development
  const client = new ServiceClient({ baseUrl: params.get("service") ?? "" });

  const evaluationId = params.get("evaluation");
  const respondentId = params.get("respondent");
  if (evaluationId && respondentId) {
    const controller = new PairwiseSurveyController({
      client,
      evaluationId,
      respondentId,
      store: window.localStorage,
      onChange: (vm) => screen.update(vm),
    });
    const screen = new SurveyScreen(root, controller);
    void controller.load();
    return;
  }

  const sessionId = params.get("session");
  const participantId = params.get("participant");
  if (sessionId && participantId) {
    const controller = new RatingGridController({
      client,
      sessionId,
      participantId,
      onChange: (vm) => {
        screen.update(vm);
        if (vm.phase === "finished") void showGallery();
      },
    });
    const screen = new RatingScreen(root, controller);
    let galleryShown = false;
    const showGallery = async () => {
      if (galleryShown) return;
      galleryShown = true;
      const results = await client.getResults(sessionId);
      const gallery = buildGallery(results, client);
      if (gallery) new GalleryScreen(root).update(gallery);
    };
    void controller.start();
    return;
  }

  loginForm(root);
}

main();
