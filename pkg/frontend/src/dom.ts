// Plain-DOM rendering. Controllers own all state; these classes just
// mirror view models into elements and forward clicks back.

import type { GalleryViewModel } from "./gallery.js";
import type { RatingGridController, RatingGridViewModel } from "./ratingGrid.js";
import type { PairwiseSurveyController, SurveyViewModel } from "./pairwise.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class RatingScreen {
  private readonly root: HTMLElement;
  private readonly controller: RatingGridController;
  private header = el("div", "header");
  private banner = el("div", "banner");
  private grid = el("div", "grid");
  private footer = el("div", "footer");
  private submitButton = el("button", "submit", "Submit ratings");
  private tileNodes = new Map<string, { scale: HTMLElement; img: HTMLImageElement }>();
  private renderedGeneration = -2;

  constructor(root: HTMLElement, controller: RatingGridController) {
    this.root = root;
    this.controller = controller;
    this.submitButton.addEventListener("click", () => {
      void this.controller.submit();
    });
    this.footer.append(this.submitButton);
    this.root.replaceChildren(this.header, this.banner, this.grid, this.footer);
  }

  update(vm: RatingGridViewModel): void {
    this.header.textContent =
      vm.phase === "finished"
        ? "Session finished. Thank you for rating!"
        : `Generation ${vm.generation} — rate every image from 1 (worst) to 10 (best)`;

    this.banner.className = "banner" + (vm.error ? " error" : "");
    if (vm.error) {
      this.banner.textContent = vm.error;
    } else if (vm.phase === "waiting") {
      const n = vm.pendingParticipants.length;
      this.banner.textContent =
        `Ballot submitted. Waiting for ${n} more ` +
        (n === 1 ? "participant" : "participants") + "…";
    } else if (vm.phase === "submitting") {
      this.banner.textContent = "Submitting…";
    } else {
      this.banner.textContent = "";
    }

    if (vm.generation !== this.renderedGeneration) {
      this.rebuildGrid(vm);
      this.renderedGeneration = vm.generation;
    }
    this.refreshTiles(vm);

    const inputLocked = vm.phase !== "rating";
    this.submitButton.disabled = !vm.canSubmit;
    this.grid.classList.toggle("locked", inputLocked);
    this.footer.style.display = vm.phase === "finished" ? "none" : "";
  }

  private rebuildGrid(vm: RatingGridViewModel): void {
    this.grid.replaceChildren();
    this.tileNodes.clear();
    for (const tile of vm.tiles) {
      const card = el("figure", "tile");
      const img = el("img");
      img.src = tile.url;
      img.alt = tile.imageId;
      const scale = el("div", "scale");
      for (let value = 1; value <= 10; value++) {
        const btn = el("button", "score", String(value));
        btn.addEventListener("click", () => {
          this.controller.setRating(tile.imageId, value);
        });
        scale.append(btn);
      }
      card.append(img, scale);
      this.grid.append(card);
      this.tileNodes.set(tile.imageId, { scale, img });
    }
  }

  private refreshTiles(vm: RatingGridViewModel): void {
    for (const tile of vm.tiles) {
      const node = this.tileNodes.get(tile.imageId);
      if (!node) continue;
      const buttons = node.scale.querySelectorAll("button");
      buttons.forEach((btn, k) => {
        btn.classList.toggle("chosen", tile.rating === k + 1);
      });
    }
  }
}

export class SurveyScreen {
  private readonly root: HTMLElement;
  private readonly controller: PairwiseSurveyController;
  private header = el("div", "header");
  private banner = el("div", "banner");
  private pair = el("div", "pair");

  constructor(root: HTMLElement, controller: PairwiseSurveyController) {
    this.root = root;
    this.controller = controller;
    this.root.replaceChildren(this.header, this.banner, this.pair);
  }

  update(vm: SurveyViewModel): void {
    this.banner.className = "banner" + (vm.error ? " error" : "");
    this.banner.textContent = vm.error ?? "";

    if (vm.phase === "done") {
      this.header.textContent =
        `All ${vm.total} comparisons answered. Thank you!`;
      this.pair.replaceChildren();
      return;
    }
    if (!vm.current) {
      this.header.textContent = "Loading survey…";
      return;
    }
    this.header.textContent =
      `Comparison ${vm.index + 1} of ${vm.total} — click the image you prefer`;
    this.pair.replaceChildren();
    // left/right exactly as the service assigned them
    for (const side of ["left", "right"] as const) {
      const ref = vm.current[side];
      const button = el("button", `choice ${side}`);
      const img = el("img");
      img.src = ref.url;
      img.alt = side;
      button.append(img);
      button.disabled = vm.phase === "posting";
      button.addEventListener("click", () => {
        void this.controller.choose(side);
      });
      this.pair.append(button);
    }
  }
}

export class GalleryScreen {
  private readonly root: HTMLElement;

  constructor(root: HTMLElement) {
    this.root = root;
  }

  update(gallery: GalleryViewModel): void {
    const header = el("div", "header", "Hall of fame");
    const sub = el(
      "div",
      "subheader",
      `Final ratings over ${gallery.generationsRated} rated generations`,
    );
    const grid = el("div", "grid gallery");
    for (const item of gallery.items) {
      const card = el("figure", "tile");
      const img = el("img");
      img.src = item.url;
      img.alt = item.imageId;
      const caption = el(
        "figcaption",
        "caption",
        `#${item.rank} — rated ${item.fitness.toFixed(2)}`,
      );
      card.append(img, caption);
      grid.append(card);
    }
    this.root.append(header, sub, grid);
  }
}
