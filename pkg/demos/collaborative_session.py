"""Five scripted raters drive a collaborative session over real HTTP.

Starts the service with uvicorn on a local port, creates a session, and
has each participant score every image until the run finishes.  The
"taste" of each rater is a fixed function of the image's brightness and
contrast, so different raters pull the population in different
directions, which is the whole point of the collaborative mode.
"""
import json
import os
import tempfile
import threading
import time
import urllib.request

import numpy as np
import uvicorn

from latentart import ProceduralBackend, SyntheticScorer
from latentart.service import SessionManager, create_app

PORT = 8765
BASE = f"http://127.0.0.1:{PORT}"
OUT = os.path.join(os.path.dirname(__file__), "out", "collaborative")
ROSTER = ["ada", "bea", "cyd", "dee", "eli"]


def call(method, path, body=None):
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(
        BASE + path, data=data, method=method,
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(req) as reply:
        return json.loads(reply.read())


def fetch_png(path):
    with urllib.request.urlopen(BASE + path) as reply:
        return reply.read()


def taste(participant_index, png_bytes):
    """A deterministic 1-10 rating from simple image statistics."""
    from PIL import Image
    import io

    pixels = np.asarray(Image.open(io.BytesIO(png_bytes))) / 255.0
    brightness = pixels.mean()
    contrast = pixels.std()
    # each rater weighs brightness vs contrast differently
    w = participant_index / (len(ROSTER) - 1)
    quality = (1 - w) * brightness + w * contrast * 2.0
    return int(np.clip(round(1 + quality * 9), 1, 10))


def main():
    os.makedirs(OUT, exist_ok=True)
    data_dir = tempfile.mkdtemp(prefix="latentart-demo-")
    manager = SessionManager(data_dir, ProceduralBackend(), SyntheticScorer())
    server = uvicorn.Server(uvicorn.Config(
        create_app(manager), host="127.0.0.1", port=PORT, log_level="warning",
    ))
    threading.Thread(target=server.run, daemon=True).start()
    while not server.started:
        time.sleep(0.05)

    session = call("POST", "/sessions", {
        "config": {"generations": 8, "seed": 11},
        "roster": ROSTER,
        "mode": "collaborative",
    })
    sid = session["session_id"]
    print(f"session {sid} with raters {', '.join(ROSTER)}")

    while True:
        page = call("GET", f"/sessions/{sid}/generation")
        if page["status"] == "finished":
            break
        gen = page["generation"]
        grids = {pid: {} for pid in ROSTER}
        for image in page["images"]:
            png = fetch_png(image["url"])
            for p, pid in enumerate(ROSTER):
                grids[pid][image["image_id"]] = taste(p, png)
        for pid in ROSTER:
            call("POST", f"/sessions/{sid}/ballots", {
                "participant_id": pid,
                "generation": gen,
                "ratings": grids[pid],
            })
        entry = call("GET", f"/sessions/{sid}/results")["fitness_history"][-1]
        print(f"generation {entry['generation']:2d}: "
              f"mean rating {entry['mean']:.2f} +- {entry['stderr']:.2f}")

    results = call("GET", f"/sessions/{sid}/results")
    for rank, ind in enumerate(results["hall_of_fame"]):
        png = fetch_png(ind["url"])
        with open(os.path.join(OUT, f"hof-{rank:02d}.png"), "wb") as fh:
            fh.write(png)
        print(f"hall of fame #{rank + 1}: {ind['image_id']} "
              f"rated {ind['fitness']:.2f}")
    print(f"wrote hall-of-fame images to {OUT}")
    server.should_exit = True


if __name__ == "__main__":
    main()
