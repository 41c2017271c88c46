import { ServiceClient } from "./api.js";
import type { ResultsPayload } from "./types.js";

export interface GalleryItem {
  rank: number;
  imageId: string;
  url: string;
  fitness: number;
}

export interface GalleryViewModel {
  generationsRated: number;
  items: GalleryItem[];
  curve: { generation: number; mean: number; stderr: number }[];
}

/**
 * Results gallery for a finished run: hall-of-fame images with their
 * final ratings and the mean-fitness curve.
 *
 * Returns null while the run is still active: raters must never see
 * aggregate fitness mid-run, so there is nothing to show until the
 * last generation's ballots are in.
 */
export function buildGallery(
  results: ResultsPayload,
  client: Pick<ServiceClient, "resolve">,
): GalleryViewModel | null {
  if (results.status !== "finished") return null;
  return {
    generationsRated: results.fitness_history.length,
    items: results.hall_of_fame.map((entry, k) => ({
      rank: k + 1,
      imageId: entry.image_id,
      url: client.resolve(entry.url),
      fitness: entry.fitness,
    })),
    curve: results.fitness_history.map((e) => ({
      generation: e.generation,
      mean: e.mean,
      stderr: e.stderr,
    })),
  };
}
