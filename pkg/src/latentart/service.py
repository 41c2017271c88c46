"""HTTP service for collaborative rating sessions.

A session holds one evolutionary run.  In collaborative mode the
service publishes the current generation's images, collects exactly one
ballot per roster participant per generation, aggregates the ballots
into fitness, and steps the evolution once the roster is complete.  In
automatic mode the whole run executes with the automatic scorer at
creation time and only the results remain to be browsed.

Durability: every accepted ballot is appended (with fsync) to a
per-session JSONL log before it is acknowledged, and a full run-state
snapshot is written after every generation step.  On startup the
service reloads the latest snapshot of each session and replays the
log's tail, so a crash between ballots loses nothing and a crash
mid-aggregation repeats the (deterministic) aggregation.

All writes to one session are serialized by a per-session lock; admin
rollback discards the current generation's pending ballots.
"""

# no `from __future__ import annotations` here: stringified annotations
# would stop the request models (local to create_app) from resolving

import json
import logging
import os
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Individual,
    LatentVector,
    RunConfig,
    RunState,
    make_rng,
    sample_latent,
)
from .documents import (
    DocumentError,
    config_from_document,
    load_run_state,
    read_json,
    run_state_to_document,
    write_json_atomic,
)
from .evaluation import CONDITIONS, Response, Trial, build_trials, summarize_preferences
from .evolution import (
    assign_rating_fitness,
    local_search,
    record_fitness_history,
    run_automatic,
    step_generation,
    update_hall_of_fame,
)
from .generator import PhenotypeCache, display_png_bytes, generate
from .scoring import FitnessRecord, RatingBallot, aggregate_ratings

log = logging.getLogger(__name__)

MODES = ("collaborative", "automatic")

DOCUMENT_VERSION = 1


class ServiceError(Exception):
    """Domain error with an HTTP status and a stable machine-readable code."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _not_found(code: str, message: str) -> ServiceError:
    return ServiceError(404, code, message)


@dataclass
class Session:
    """In-memory runtime of one session."""

    session_id: str
    mode: str
    roster: tuple
    state: RunState
    directory: str
    ballots: dict = field(default_factory=dict)  # participant -> ballot
    records: dict = field(default_factory=dict)  # generation -> records
    extra_images: dict = field(default_factory=dict)  # image id -> genotype
    lock: threading.Lock = field(default_factory=threading.Lock)
    cache: PhenotypeCache = field(default_factory=lambda: PhenotypeCache(64))

    @property
    def status(self) -> str:
        done = len(self.state.fitness_history) == self.state.config.generations + 1
        return "finished" if done else "awaiting_ratings"

    def pending_participants(self) -> list:
        if self.mode != "collaborative" or self.status == "finished":
            return []
        return sorted(set(self.roster) - set(self.ballots))

    def genotype_of(self, image_id: str) -> LatentVector:
        ind = self.state.find(image_id)
        if ind is not None:
            return ind.genotype
        genotype = self.extra_images.get(image_id)
        if genotype is not None:
            return genotype
        raise _not_found("unknown-image", f"no image {image_id!r} in session")


@dataclass
class Evaluation:
    evaluation_id: str
    session_id: str
    condition: str
    seed: int
    trials: list
    responses: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def answered(self) -> dict:
        answered: dict[str, list] = {}
        for resp in self.responses:
            answered.setdefault(resp.respondent_id, []).append(resp.trial_id)
        return answered


class SessionManager:
    """Owns all sessions and evaluations plus their on-disk mirrors."""

    def __init__(self, data_dir: str, backend, scorer):
        self.data_dir = data_dir
        self.backend = backend
        self.scorer = scorer
        self.sessions: dict[str, Session] = {}
        self.evaluations: dict[str, Evaluation] = {}
        self._create_lock = threading.Lock()
        os.makedirs(os.path.join(data_dir, "sessions"), exist_ok=True)
        os.makedirs(os.path.join(data_dir, "evaluations"), exist_ok=True)
        self._restore()

    # -- creation ---------------------------------------------------------

    def create_session(self, config: RunConfig, roster, mode: str) -> Session:
        if mode not in MODES:
            raise ServiceError(422, "invalid-mode",
                               f"mode must be one of {MODES}")
        roster = tuple(str(p) for p in (roster or ()))
        if mode == "collaborative":
            if len(roster) != config.participants:
                raise ServiceError(
                    422, "roster-size",
                    f"roster must name exactly {config.participants} "
                    f"participants, got {len(roster)}",
                )
            if len(set(roster)) != len(roster) or any(not p for p in roster):
                raise ServiceError(422, "roster-invalid",
                                   "roster ids must be unique and non-empty")
        session_id = uuid.uuid4().hex[:12]
        directory = os.path.join(self.data_dir, "sessions", session_id)
        os.makedirs(directory)
        if mode == "automatic":
            state, _ = run_automatic(config, self.scorer, self.backend)
        else:
            state = RunState.new_run(config)
        session = Session(
            session_id=session_id, mode=mode, roster=roster, state=state,
            directory=directory,
        )
        write_json_atomic(
            {
                "version": DOCUMENT_VERSION,
                "kind": "session-meta",
                "session_id": session_id,
                "mode": mode,
                "roster": list(roster),
            },
            os.path.join(directory, "meta.json"),
        )
        self._snapshot(session)
        with self._create_lock:
            self.sessions[session_id] = session
        return session

    def get_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise _not_found("unknown-session", f"no session {session_id!r}")
        return session

    # -- persistence ------------------------------------------------------

    def _snapshot(self, session: Session) -> None:
        path = os.path.join(
            session.directory, f"state-g{session.state.generation:04d}.json"
        )
        write_json_atomic(run_state_to_document(session.state), path)

    def _append_log(self, session: Session, entry: dict) -> None:
        path = os.path.join(session.directory, "ballots.jsonl")
        with open(path, "a") as fh:
            fh.write(json.dumps(entry) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _restore(self) -> None:
        sessions_dir = os.path.join(self.data_dir, "sessions")
        for session_id in sorted(os.listdir(sessions_dir)):
            directory = os.path.join(sessions_dir, session_id)
            try:
                self._restore_session(session_id, directory)
            except DocumentError as exc:
                log.warning("skipping unreadable session %s: %s",
                            session_id, exc)
        evals_dir = os.path.join(self.data_dir, "evaluations")
        for name in sorted(os.listdir(evals_dir)):
            if name.endswith(".json"):
                try:
                    self._restore_evaluation(os.path.join(evals_dir, name))
                except DocumentError as exc:
                    log.warning("skipping unreadable evaluation %s: %s",
                                name, exc)

    def _restore_session(self, session_id: str, directory: str) -> None:
        meta = read_json(os.path.join(directory, "meta.json"))
        snapshots = sorted(
            name for name in os.listdir(directory)
            if name.startswith("state-g") and name.endswith(".json")
        )
        if not snapshots:
            raise DocumentError("no state snapshot")
        state = load_run_state(os.path.join(directory, snapshots[-1]))
        session = Session(
            session_id=session_id,
            mode=meta.get("mode", "collaborative"),
            roster=tuple(meta.get("roster", ())),
            state=state,
            directory=directory,
        )
        self._replay_log(session)
        self.sessions[session_id] = session

    def _replay_log(self, session: Session) -> None:
        """Rebuild ballot state from the append-only log.

        Entries for generations older than the loaded snapshot rebuild
        the per-generation fitness records; entries for the current
        generation re-enter the pending set, and a complete pending set
        (a crash between the final append and the step) completes the
        generation exactly as the live path would.
        """
        path = os.path.join(session.directory, "ballots.jsonl")
        if not os.path.exists(path):
            return
        per_generation: dict[int, dict] = {}
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                generation = int(entry["generation"])
                if entry["kind"] == "rollback":
                    per_generation[generation] = {}
                elif entry["kind"] == "ballot":
                    ballot = RatingBallot(
                        participant_id=entry["participant_id"],
                        generation=generation,
                        ratings=entry["ratings"],
                    )
                    per_generation.setdefault(generation, {})[
                        ballot.participant_id
                    ] = ballot
        for generation, ballots in sorted(per_generation.items()):
            if generation < session.state.generation and ballots:
                session.records[generation] = aggregate_ratings(
                    ballots.values(), generation, roster=session.roster
                )
        current = per_generation.get(session.state.generation, {})
        if session.status != "finished":
            session.ballots = dict(current)
            if set(session.ballots) == set(session.roster) and session.roster:
                self._complete_generation(session)
        elif current:
            session.records.setdefault(
                session.state.generation,
                aggregate_ratings(current.values(), session.state.generation,
                                  roster=session.roster),
            )

    def _restore_evaluation(self, path: str) -> None:
        doc = read_json(path)
        trials = [
            Trial(
                trial_id=t["trial_id"], condition=t["condition"],
                left_image_id=t["left_image_id"],
                right_image_id=t["right_image_id"],
                candidate_side=t["candidate_side"],
            )
            for t in doc["trials"]
        ]
        evaluation = Evaluation(
            evaluation_id=doc["evaluation_id"],
            session_id=doc["session_id"],
            condition=doc["condition"],
            seed=int(doc["seed"]),
            trials=trials,
        )
        responses_path = path[:-len(".json")] + "-responses.jsonl"
        if os.path.exists(responses_path):
            with open(responses_path) as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        entry = json.loads(line)
                        evaluation.responses.append(Response(
                            respondent_id=entry["respondent_id"],
                            trial_id=entry["trial_id"],
                            choice=entry["choice"],
                        ))
        session = self.sessions.get(evaluation.session_id)
        if session is not None:
            for image_id, genes in doc.get("extra_images", {}).items():
                session.extra_images[image_id] = LatentVector(
                    np.asarray(genes, dtype=np.float64)
                )
        self.evaluations[evaluation.evaluation_id] = evaluation

    # -- collaborative flow -----------------------------------------------

    def submit_ballot(self, session_id: str, participant_id: str,
                      generation: int, ratings: dict) -> dict:
        session = self.get_session(session_id)
        with session.lock:
            if session.mode != "collaborative":
                raise ServiceError(409, "not-collaborative",
                                   "session does not accept ballots")
            if session.status == "finished":
                raise ServiceError(409, "session-finished",
                                   "session already finished")
            if participant_id not in session.roster:
                raise ServiceError(
                    403, "unknown-participant",
                    f"participant {participant_id!r} is not on the roster",
                )
            if generation != session.state.generation:
                raise ServiceError(
                    409, "generation-mismatch",
                    f"ballot is for generation {generation}, current is "
                    f"{session.state.generation}",
                )
            if participant_id in session.ballots:
                raise ServiceError(
                    409, "duplicate-ballot",
                    f"participant {participant_id!r} already submitted for "
                    f"generation {generation}",
                )
            try:
                ballot = RatingBallot(
                    participant_id=participant_id, generation=generation,
                    ratings=ratings,
                )
            except ValueError as exc:
                raise ServiceError(422, "invalid-rating", str(exc))
            expected = set(session.state.image_ids())
            got = set(ballot.ratings)
            if got != expected:
                raise ServiceError(
                    422, "incomplete-ballot",
                    f"ballot must rate exactly the current images; missing "
                    f"{sorted(expected - got)}, extra {sorted(got - expected)}",
                )
            self._append_log(session, {
                "kind": "ballot",
                "generation": generation,
                "participant_id": participant_id,
                "ratings": ballot.ratings,
            })
            session.ballots[participant_id] = ballot
            advanced = False
            if set(session.ballots) == set(session.roster):
                self._complete_generation(session)
                advanced = True
            return {
                "accepted": True,
                "generation_advanced": advanced,
                "status": session.status,
                "generation": session.state.generation,
                "pending_participants": session.pending_participants(),
            }

    def _complete_generation(self, session: Session) -> None:
        state = session.state
        generation = state.generation
        records = aggregate_ratings(
            session.ballots.values(), generation, roster=session.roster,
            image_ids=state.image_ids(),
        )
        assign_rating_fitness(state.population, records)
        session.records[generation] = records
        record_fitness_history(state)
        session.ballots = {}
        if generation == state.config.generations:
            update_hall_of_fame(state)
        else:
            step_generation(state, self.scorer, self.backend)
        self._snapshot(session)

    def rollback(self, session_id: str) -> dict:
        session = self.get_session(session_id)
        with session.lock:
            if session.status == "finished":
                raise ServiceError(409, "session-finished",
                                   "nothing to roll back: session finished")
            discarded = len(session.ballots)
            self._append_log(session, {
                "kind": "rollback",
                "generation": session.state.generation,
            })
            session.ballots = {}
            return {
                "generation": session.state.generation,
                "discarded_ballots": discarded,
            }

    # -- read side ----------------------------------------------------------

    def generation_payload(self, session: Session) -> dict:
        sid = session.session_id
        return {
            "session_id": sid,
            "mode": session.mode,
            "generation": session.state.generation,
            "status": session.status,
            "images": [
                {"image_id": iid, "url": f"/sessions/{sid}/images/{iid}.png"}
                for iid in session.state.image_ids()
            ],
            "pending_participants": session.pending_participants(),
        }

    def image_png(self, session_id: str, image_id: str) -> bytes:
        session = self.get_session(session_id)
        genotype = session.genotype_of(image_id)
        holder = Individual(id=image_id, genotype=genotype)
        img = session.cache.get_or_generate(holder, self.backend)
        return display_png_bytes(img)

    def results_payload(self, session: Session) -> dict:
        sid = session.session_id
        records = [
            {
                "generation": generation,
                "image_id": record.image_id,
                "per_participant": list(record.per_participant),
                "mean": record.mean,
                "sd": record.sd,
                "range": list(record.range),
            }
            for generation in sorted(session.records)
            for record in session.records[generation].values()
        ]
        return {
            "session_id": sid,
            "status": session.status,
            "generation": session.state.generation,
            "fitness_history": [
                {
                    "generation": e.generation,
                    "mean": e.mean,
                    "stderr": e.stderr,
                    "fitness": list(e.fitness),
                }
                for e in session.state.fitness_history
            ],
            "hall_of_fame": [
                {
                    "image_id": ind.id,
                    "fitness": ind.fitness,
                    "url": f"/sessions/{sid}/images/{ind.id}.png",
                }
                for ind in session.state.hall_of_fame
            ],
            "fitness_records": records,
        }

    # -- evaluations --------------------------------------------------------

    def create_evaluation(self, session_id: str, condition: str,
                          count: int | None, seed: int | None) -> Evaluation:
        session = self.get_session(session_id)
        if condition not in CONDITIONS:
            raise ServiceError(422, "invalid-condition",
                               f"condition must be one of {CONDITIONS}")
        with session.lock:
            evaluation_id = uuid.uuid4().hex[:12]
            if seed is None:
                seed = int.from_bytes(os.urandom(8), "big")
            rng = make_rng(seed)
            extra: dict[str, LatentVector] = {}
            config = session.state.config

            if condition == "local_search_vs_original":
                n = count or 20
                candidates = []
                comparators = []
                for k in range(n):
                    z = sample_latent(rng, config.latent_dim)
                    before = f"ev{evaluation_id}-{k}-before"
                    after = f"ev{evaluation_id}-{k}-after"
                    extra[before] = z
                    improved, _ = local_search(
                        z, self.scorer, self.backend,
                        config.local_search_generations,
                        config.per_gene_mutation_rate, rng,
                    )
                    extra[after] = improved
                    candidates.append(after)
                    comparators.append(before)
            else:
                hall = session.state.hall_of_fame
                if not hall:
                    raise ServiceError(
                        409, "hall-of-fame-empty",
                        "session has no hall of fame to evaluate yet",
                    )
                n = min(count or len(hall), len(hall))
                candidates = [ind.id for ind in hall[:n]]
                comparators = []
                for k in range(n):
                    image_id = f"ev{evaluation_id}-cmp-{k}"
                    extra[image_id] = sample_latent(rng, config.latent_dim)
                    comparators.append(image_id)
            trials = build_trials(condition, candidates, comparators, rng)
            evaluation = Evaluation(
                evaluation_id=evaluation_id, session_id=session_id,
                condition=condition, seed=seed, trials=trials,
            )
            session.extra_images.update(extra)
            write_json_atomic(
                {
                    "version": DOCUMENT_VERSION,
                    "kind": "evaluation",
                    "evaluation_id": evaluation_id,
                    "session_id": session_id,
                    "condition": condition,
                    "seed": seed,
                    "trials": [
                        {
                            "trial_id": t.trial_id,
                            "condition": t.condition,
                            "left_image_id": t.left_image_id,
                            "right_image_id": t.right_image_id,
                            "candidate_side": t.candidate_side,
                        }
                        for t in trials
                    ],
                    "extra_images": {
                        iid: [float(g) for g in z.genes]
                        for iid, z in extra.items()
                    },
                },
                os.path.join(self.data_dir, "evaluations",
                             f"{evaluation_id}.json"),
            )
            self.evaluations[evaluation_id] = evaluation
            return evaluation

    def get_evaluation(self, evaluation_id: str) -> Evaluation:
        evaluation = self.evaluations.get(evaluation_id)
        if evaluation is None:
            raise _not_found("unknown-evaluation",
                             f"no evaluation {evaluation_id!r}")
        return evaluation

    def evaluation_payload(self, evaluation: Evaluation) -> dict:
        sid = evaluation.session_id
        return {
            "evaluation_id": evaluation.evaluation_id,
            "session_id": sid,
            "condition": evaluation.condition,
            # candidate sides stay server-side so respondents are blind
            "trials": [
                {
                    "trial_id": t.trial_id,
                    "left": {
                        "image_id": t.left_image_id,
                        "url": f"/sessions/{sid}/images/{t.left_image_id}.png",
                    },
                    "right": {
                        "image_id": t.right_image_id,
                        "url": f"/sessions/{sid}/images/{t.right_image_id}.png",
                    },
                }
                for t in evaluation.trials
            ],
            "answered": evaluation.answered(),
        }

    def submit_response(self, evaluation_id: str, respondent_id: str,
                        trial_id: str, choice: str) -> dict:
        evaluation = self.get_evaluation(evaluation_id)
        with evaluation.lock:
            trial_ids = {t.trial_id for t in evaluation.trials}
            if trial_id not in trial_ids:
                raise _not_found("unknown-trial", f"no trial {trial_id!r}")
            try:
                response = Response(respondent_id=respondent_id,
                                    trial_id=trial_id, choice=choice)
            except ValueError as exc:
                raise ServiceError(422, "invalid-response", str(exc))
            if any(r.respondent_id == respondent_id and r.trial_id == trial_id
                   for r in evaluation.responses):
                raise ServiceError(
                    409, "duplicate-response",
                    f"{respondent_id!r} already answered trial {trial_id!r}",
                )
            path = os.path.join(
                self.data_dir, "evaluations",
                f"{evaluation.evaluation_id}-responses.jsonl",
            )
            with open(path, "a") as fh:
                fh.write(json.dumps({
                    "respondent_id": respondent_id,
                    "trial_id": trial_id,
                    "choice": choice,
                }) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            evaluation.responses.append(response)
            return {
                "accepted": True,
                "responses": len(evaluation.responses),
            }

    def evaluation_results(self, evaluation: Evaluation) -> dict:
        if not evaluation.responses:
            raise ServiceError(409, "no-responses",
                               "evaluation has no responses yet")
        summary = summarize_preferences(evaluation.trials,
                                        evaluation.responses)
        return {
            "evaluation_id": evaluation.evaluation_id,
            "condition": summary.condition,
            "responses": summary.responses,
            "candidate_chosen": summary.candidate_chosen,
            "proportion": summary.proportion,
            "p_value": summary.p_value,
            "mean_trial_proportion": summary.mean,
            "stderr_trial_proportion": summary.stderr,
        }


def create_app(manager: SessionManager):
    """FastAPI application over a session manager."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse, Response as HttpResponse
    from pydantic import BaseModel

    class CreateSession(BaseModel):
        config: dict | None = None
        roster: list[str] | None = None
        mode: str = "collaborative"

    class Ballot(BaseModel):
        participant_id: str
        generation: int
        ratings: dict[str, int]

    class CreateEvaluation(BaseModel):
        session_id: str
        condition: str
        count: int | None = None
        seed: int | None = None

    class EvaluationResponse(BaseModel):
        respondent_id: str
        trial_id: str
        choice: str

    app = FastAPI(title="latentart", docs_url=None, redoc_url=None)

    @app.exception_handler(ServiceError)
    async def service_error_handler(request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": exc.code, "message": exc.message},
        )

    @app.post("/sessions")
    def create_session(body: CreateSession):
        try:
            config = config_from_document(
                {"version": DOCUMENT_VERSION, "kind": "run-config",
                 **(body.config or {})}
            )
        except DocumentError as exc:
            raise ServiceError(422, "invalid-config", str(exc))
        session = manager.create_session(config, body.roster, body.mode)
        return manager.generation_payload(session)

    @app.get("/sessions/{session_id}/generation")
    def get_generation(session_id: str):
        return manager.generation_payload(manager.get_session(session_id))

    @app.get("/sessions/{session_id}/images/{image_id}.png")
    def get_image(session_id: str, image_id: str):
        png = manager.image_png(session_id, image_id)
        return HttpResponse(content=png, media_type="image/png")

    @app.post("/sessions/{session_id}/ballots")
    def post_ballot(session_id: str, body: Ballot):
        return manager.submit_ballot(
            session_id, body.participant_id, body.generation, body.ratings
        )

    @app.get("/sessions/{session_id}/results")
    def get_results(session_id: str):
        return manager.results_payload(manager.get_session(session_id))

    @app.post("/sessions/{session_id}/rollback")
    def post_rollback(session_id: str):
        return manager.rollback(session_id)

    @app.post("/evaluations")
    def post_evaluation(body: CreateEvaluation):
        evaluation = manager.create_evaluation(
            body.session_id, body.condition, body.count, body.seed
        )
        return manager.evaluation_payload(evaluation)

    @app.get("/evaluations/{evaluation_id}")
    def get_evaluation(evaluation_id: str):
        return manager.evaluation_payload(
            manager.get_evaluation(evaluation_id)
        )

    @app.post("/evaluations/{evaluation_id}/responses")
    def post_response(evaluation_id: str, body: EvaluationResponse):
        return manager.submit_response(
            evaluation_id, body.respondent_id, body.trial_id, body.choice
        )

    @app.get("/evaluations/{evaluation_id}/results")
    def get_evaluation_results(evaluation_id: str):
        return manager.evaluation_results(
            manager.get_evaluation(evaluation_id)
        )

    return app


@dataclass
class ServiceConfig:
    """Deployment settings for the HTTP service."""

    host: str = "127.0.0.1"
    port: int = 8000
    data_dir: str = "./service-data"
    generator: str = "procedural"
    scorer: str = "synthetic"

    @classmethod
    def from_file(cls, path: str | None) -> "ServiceConfig":
        if path is None:
            return cls()
        doc = read_json(path)
        known = {"host", "port", "data_dir", "generator", "scorer"}
        return cls(**{k: v for k, v in doc.items() if k in known})


def build_manager(config: ServiceConfig) -> SessionManager:
    from .generator import make_generator_backend
    from .scoring import make_scorer

    return SessionManager(
        data_dir=config.data_dir,
        backend=make_generator_backend(config.generator),
        scorer=make_scorer(config.scorer),
    )


def serve(config: ServiceConfig) -> None:
    """Run the service under uvicorn (blocking)."""
    import uvicorn

    app = create_app(build_manager(config))
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
