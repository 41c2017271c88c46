"""Versioned JSON documents for configs and run states.

Files are human-readable JSON.  Gene values are written as plain JSON
floats, which round-trip float64 exactly, so a reloaded state continues
bit-identically.  Loading a document with an unknown version fails
loudly rather than guessing.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, fields

import numpy as np

from .core import (
    GenerationStats,
    Individual,
    LatentArtError,
    LatentVector,
    RunConfig,
    RunState,
)

DOCUMENT_VERSION = 1


class DocumentError(LatentArtError):
    """A persisted document is missing, malformed, or of unknown version."""


def _check_version(doc: dict, kind: str) -> None:
    if not isinstance(doc, dict):
        raise DocumentError(f"{kind} document must be a JSON object")
    version = doc.get("version")
    if version != DOCUMENT_VERSION:
        raise DocumentError(
            f"unsupported {kind} document version {version!r} "
            f"(expected {DOCUMENT_VERSION})"
        )
    found = doc.get("kind")
    if found != kind:
        raise DocumentError(f"expected a {kind} document, found {found!r}")


def write_json_atomic(doc: dict, path: str) -> None:
    """Write JSON via a temp file + rename so readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DocumentError(f"no such document: {path}")
    except json.JSONDecodeError as exc:
        raise DocumentError(f"malformed JSON in {path}: {exc}")


def config_to_document(config: RunConfig) -> dict:
    doc = {"version": DOCUMENT_VERSION, "kind": "run-config"}
    doc.update(asdict(config))
    return doc


def config_from_document(doc: dict) -> RunConfig:
    _check_version(doc, "run-config")
    known = {f.name for f in fields(RunConfig)}
    kwargs = {k: v for k, v in doc.items() if k in known}
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"invalid run-config document: {exc}")


def save_config(config: RunConfig, path: str) -> None:
    write_json_atomic(config_to_document(config), path)


def load_config(path: str) -> RunConfig:
    return config_from_document(read_json(path))


def _individual_to_document(ind: Individual) -> dict:
    return {
        "id": ind.id,
        "genes": [float(g) for g in ind.genotype.genes],
        "fitness": ind.fitness,
        "origin": ind.origin,
        "born_generation": ind.born_generation,
    }


def _individual_from_document(doc: dict) -> Individual:
    try:
        return Individual(
            id=str(doc["id"]),
            genotype=LatentVector(np.asarray(doc["genes"], dtype=np.float64)),
            fitness=doc.get("fitness"),
            origin=doc.get("origin", "random"),
            born_generation=int(doc.get("born_generation", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DocumentError(f"invalid individual record: {exc}")


def run_state_to_document(state: RunState) -> dict:
    return {
        "version": DOCUMENT_VERSION,
        "kind": "run-state",
        "config": asdict(state.config),
        "generation": state.generation,
        "population": [_individual_to_document(i) for i in state.population],
        "hall_of_fame": [_individual_to_document(i) for i in state.hall_of_fame],
        "rng_state": state.rng.bit_generator.state,
        "fitness_history": [asdict(entry) for entry in state.fitness_history],
    }


def run_state_from_document(doc: dict) -> RunState:
    _check_version(doc, "run-state")
    try:
        config = config_from_document(
            {"version": DOCUMENT_VERSION, "kind": "run-config", **doc["config"]}
        )
        rng_state = doc["rng_state"]
        bit_gen = np.random.PCG64()
        bit_gen.state = rng_state
        history = [
            GenerationStats(
                generation=int(e["generation"]),
                mean=float(e["mean"]),
                stderr=float(e["stderr"]),
                fitness=[float(x) for x in e["fitness"]],
                origins=[str(o) for o in e["origins"]],
            )
            for e in doc.get("fitness_history", [])
        ]
        return RunState(
            config=config,
            generation=int(doc["generation"]),
            population=[_individual_from_document(d) for d in doc["population"]],
            hall_of_fame=[_individual_from_document(d) for d in doc["hall_of_fame"]],
            rng=np.random.Generator(bit_gen),
            fitness_history=history,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DocumentError(f"invalid run-state document: {exc}")


def save_run_state(state: RunState, path: str) -> None:
    write_json_atomic(run_state_to_document(state), path)


def load_run_state(path: str) -> RunState:
    return run_state_from_document(read_json(path))
