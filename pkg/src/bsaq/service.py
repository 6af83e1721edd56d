"""HTTP/JSON session service over the sequential search library.

One JSON document per session in a configurable directory; mutations are
serialized per session and persisted with write-temp-rename so a file is
always one complete state.  The wire schema (version 1) is frozen: renames
or semantic changes bump the version.
"""

from __future__ import annotations

import json
import math
import os
import threading
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict

from .applications import REGRESSIONS, SigmoidEncoder, clipped_probes, probe_width
from .driver import (
    SSchedule,
    SessionConfig,
    SessionState,
    advance,
    default_estimator,
    estimate,
    new_session,
    state_from_doc,
    state_to_doc,
    unscale_from_unit,
)
from .models import MODEL_NAMES, get_model
from .multivariate import (
    MvConfig,
    MvState,
    mv_estimate,
    mv_state_from_doc,
    mv_state_to_doc,
    mv_step,
    new_mv_session,
)
from .numerics import SeededRng

__all__ = [
    "SCHEMA_VERSION",
    "DATA_DIR_ENV",
    "MODES",
    "SessionStore",
    "create_app",
    "default_data_dir",
    "replay_transcript",
    "ReplayMismatch",
]

SCHEMA_VERSION = 1
DATA_DIR_ENV = "BSAQ_DATA_DIR"
MODES = ("quantile", "continuous-root", "kw-minimum")
SIM_MODELS = {
    "quantile": tuple(MODEL_NAMES),
    "continuous-root": tuple(REGRESSIONS),
    "kw-minimum": tuple(REGRESSIONS),
}
DEFAULT_SIM_MODEL = {
    "quantile": "M1",
    "continuous-root": "cubic",
    "kw-minimum": "quadratic",
}


def default_data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "bsaq-sessions"))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


class SessionStore:
    """Directory of one-JSON-file-per-session records with per-session locks."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._registry = threading.Lock()

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._registry:
            return self._locks.setdefault(session_id, threading.Lock())

    def path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.json"

    def load(self, session_id: str) -> dict:
        try:
            return json.loads(self.path(session_id).read_text())
        except FileNotFoundError:
            raise KeyError(session_id) from None

    def save(self, record: dict) -> None:
        target = self.path(record["id"])
        tmp = target.with_name(f"{target.name}.tmp-{uuid.uuid4().hex}")
        tmp.write_text(json.dumps(record, sort_keys=True))
        os.replace(tmp, target)

    def ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.json"))


# --- payload models -----------------------------------------------------------


class CreateSession(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    alpha: float
    mode: str = "quantile"
    domain: tuple[float, float] = (0.0, 1.0)
    dimension: int = 1
    estimator: str | None = None
    s1: int | None = None
    s2: int | None = None
    start: float | list[float] | None = None
    encoder_b: float = 1.0
    encoder_q: int = 2
    simulate: bool = False
    model: str | None = None
    seed: int = 0


class OutcomePost(BaseModel):
    model_config = ConfigDict(extra="forbid")

    step: int
    y: float | None = None
    y_pair: tuple[float, float] | None = None


def _fail(status: int, field: str, message: str) -> HTTPException:
    return HTTPException(status, detail=[{"field": field, "message": message}])


# --- record construction and state plumbing ------------------------------------


def _build_config(req: CreateSession) -> dict:
    """Validate a creation request; returns the config summary stored on the record."""
    if not 0.0 < req.alpha < 1.0:
        raise _fail(422, "alpha", f"alpha must lie in (0, 1), got {req.alpha}")
    if req.mode not in MODES:
        raise _fail(422, "mode", f"mode must be one of {MODES}, got {req.mode!r}")
    lo, hi = req.domain
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise _fail(422, "domain", f"domain must be a finite interval, got {req.domain}")
    if req.dimension < 1:
        raise _fail(422, "dimension", f"dimension must be >= 1, got {req.dimension}")
    if req.dimension > 1:
        if req.mode != "quantile":
            raise _fail(422, "mode", "continuous modes are univariate")
        if (lo, hi) != (0.0, 1.0):
            raise _fail(422, "domain", "multivariate sessions use the unit domain")
    if req.estimator is not None and req.estimator not in ("bayes", "map"):
        raise _fail(422, "estimator", f"estimator must be bayes or map, got {req.estimator!r}")
    if (req.s1 is None) != (req.s2 is None) and req.s2 is not None:
        raise _fail(422, "s1", "s2 without s1 is ambiguous")
    if req.s1 is not None and req.s1 < 1:
        raise _fail(422, "s1", f"grid size must be >= 1, got {req.s1}")
    if req.s2 is not None and req.s2 < 1:
        raise _fail(422, "s2", f"grid size must be >= 1, got {req.s2}")
    if req.encoder_b <= 0:
        raise _fail(422, "encoder_b", f"sigmoid scale must be positive, got {req.encoder_b}")
    if req.encoder_q < 1:
        raise _fail(422, "encoder_q", f"binary count must be >= 1, got {req.encoder_q}")
    if req.model is not None and not req.simulate:
        raise _fail(422, "model", "model is only meaningful with simulate=true")
    if req.simulate:
        model = req.model or DEFAULT_SIM_MODEL[req.mode]
        allowed = SIM_MODELS[req.mode]
        if model not in allowed:
            raise _fail(422, "model", f"model must be one of {allowed}, got {model!r}")
        if req.mode == "quantile" and get_model(model).dim != req.dimension:
            raise _fail(422, "model", f"{model} needs dimension {get_model(model).dim}")
    else:
        model = None

    if req.start is None:
        start: Any = None
    elif req.dimension == 1:
        if isinstance(req.start, list):
            raise _fail(422, "start", "scalar start required for dimension 1")
        start = float(req.start)
        if not lo < start < hi:
            raise _fail(422, "start", f"start {start} outside domain {req.domain}")
    else:
        if not isinstance(req.start, list) or len(req.start) != req.dimension:
            raise _fail(422, "start", f"start must list {req.dimension} coordinates")
        start = [float(v) for v in req.start]
        if not all(0.0 < v < 1.0 for v in start):
            raise _fail(422, "start", "start coordinates must lie in (0, 1)")

    if req.s1 is not None:
        schedule = {"s1": req.s1, "s2": req.s2 if req.s2 is not None else req.s1}
    else:
        sched = SSchedule.from_alpha(req.alpha)
        schedule = {"s1": sched.stage1, "s2": sched.stage2}

    return {
        "alpha": req.alpha,
        "mode": req.mode,
        "domain": [lo, hi],
        "dimension": req.dimension,
        "estimator": req.estimator or default_estimator(req.alpha),
        "schedule": schedule,
        "start": start,
        "encoder": {"b": req.encoder_b, "q": req.encoder_q},
        "simulate": req.simulate,
        "simulation": {"model": model, "seed": req.seed} if req.simulate else None,
    }


def _new_state(config: dict) -> SessionState | MvState:
    schedule = SSchedule(config["schedule"]["s1"], config["schedule"]["s2"])
    if config["dimension"] == 1:
        lo, hi = config["domain"]
        start = config["start"]
        return new_session(
            SessionConfig(
                alpha=config["alpha"],
                estimator=config["estimator"],
                schedule=schedule,
                domain=(lo, hi),
                start=0.5 * (lo + hi) if start is None else start,
            )
        )
    start = config["start"]
    return new_mv_session(
        MvConfig(
            alpha=config["alpha"],
            dimension=config["dimension"],
            estimator=config["estimator"],
            schedule=schedule,
            start=None if start is None else tuple(start),
        )
    )


def _state_doc(state: SessionState | MvState) -> dict:
    if isinstance(state, SessionState):
        return state_to_doc(state)
    return mv_state_to_doc(state)


def _state_from_record(record: dict) -> SessionState | MvState:
    if record["config"]["dimension"] == 1:
        return state_from_doc(record["state"])
    return mv_state_from_doc(record["state"])


def _recommendation(record: dict, state: SessionState | MvState) -> dict:
    """Posterior summary behind the pending design point."""
    if isinstance(state, SessionState):
        r = estimate(state)
        domain = state.config.domain
        payload = {
            "session_id": record["id"],
            "step": r.step,
            "completed": state.steps,
            "x": r.x,
            "x_original": r.x_original,
            "mean": r.mean,
            "mean_original": unscale_from_unit(r.mean, domain),
            "mode": r.mode,
            "mode_original": unscale_from_unit(r.mode, domain),
            "ci90": [r.ci90[0], r.ci90[1]],
            "ci90_original": [
                unscale_from_unit(r.ci90[0], domain),
                unscale_from_unit(r.ci90[1], domain),
            ],
            "subinterval": {
                "t": r.sub.t,
                "s": r.sub.s,
                "v0": r.sub.v0,
                "v1": r.sub.v1,
            },
            "m": r.m,
            "bounds": [r.bounds[0], r.bounds[1]],
        }
        if record["config"]["mode"] == "kw-minimum":
            n = state.steps + 1
            c = probe_width(n)
            hi_u, lo_u, clipped = clipped_probes(r.x, c)
            payload["probes"] = {
                "step": n,
                "c": c,
                "hi": unscale_from_unit(hi_u, domain),
                "lo": unscale_from_unit(lo_u, domain),
                "clipped": clipped,
            }
        return payload
    r = mv_estimate(state)
    # the pending point is the recommendation; a fresh session recommends the
    # configured start, matching the univariate contract
    return {
        "session_id": record["id"],
        "step": state.steps + 1,
        "completed": state.steps,
        "x": [float(v) for v in state.x],
        "x_original": [float(v) for v in state.x],
        "theta": [float(v) for v in r.theta],
        "j_star": r.j_star,
        "cube": {
            "t": [int(t) for t in r.cube.t],
            "s": r.cube.s,
            "vertices": [[float(v) for v in row] for row in r.cube.vertices],
        },
        "m": r.m,
    }


def _summary(record: dict) -> dict:
    return {
        "id": record["id"],
        "mode": record["config"]["mode"],
        "status": record["status"],
        "alpha": record["config"]["alpha"],
        "dimension": record["config"]["dimension"],
        "simulate": record["config"]["simulate"],
        "steps": record["state"]["steps"],
        "created_at": record["created_at"],
        "updated_at": record["updated_at"],
    }


# --- outcome handling -----------------------------------------------------------


def _simulated_outcome(record: dict, state: SessionState | MvState) -> dict:
    """Draw the next outcome server-side; deterministic in (seed, step)."""
    sim = record["config"]["simulation"]
    mode = record["config"]["mode"]
    step = record["state"]["steps"] + 1
    rng = SeededRng(sim["seed"], (step,))
    if mode == "quantile":
        model = get_model(sim["model"])
        x = state.x if isinstance(state, SessionState) else np.asarray(state.x)
        p = float(model.prob(x, record["config"]["alpha"]))
        return {"y": int(rng.uniform() < p)}
    if mode == "continuous-root":
        assert isinstance(state, SessionState)
        return {"y": float(REGRESSIONS[sim["model"]](state.x, rng))}
    assert isinstance(state, SessionState)
    c = probe_width(step)
    hi, lo, _ = clipped_probes(state.x, c)
    mean = {"cubic": lambda x: 200.0 * (x - 0.3) ** 3,
            "quadratic": lambda x: 200.0 * (x - 0.3) ** 2}[sim["model"]]
    noise = rng.standard_normals(2)
    return {"y_pair": [float(mean(hi) + noise[0]), float(mean(lo) + noise[1])]}


def _apply_outcome(
    record: dict, state: SessionState | MvState, outcome: dict
) -> SessionState | MvState:
    mode = record["config"]["mode"]
    if mode == "quantile":
        y = outcome.get("y")
        if y is None or y not in (0, 1, 0.0, 1.0):
            raise _fail(422, "y", f"quantile sessions take a binary outcome, got {y}")
        if isinstance(state, SessionState):
            return advance(state, (int(y),))[0]
        return mv_step(state, int(y))[0]
    assert isinstance(state, SessionState)
    enc = record["config"]["encoder"]
    encoder = SigmoidEncoder(b=enc["b"], q=enc["q"])
    if mode == "continuous-root":
        y = outcome.get("y")
        if y is None or not math.isfinite(y):
            raise _fail(422, "y", f"continuous-root sessions take a finite response, got {y}")
        return advance(state, encoder.encode(float(y)))[0]
    pair = outcome.get("y_pair")
    if pair is None or len(pair) != 2 or not all(math.isfinite(v) for v in pair):
        raise _fail(422, "y_pair", f"kw-minimum sessions take two finite responses, got {pair}")
    c = probe_width(state.steps + 1)
    return advance(state, encoder.encode((float(pair[0]) - float(pair[1])) / c))[0]


def _validate_outcome_shape(record: dict, body: OutcomePost) -> dict:
    mode = record["config"]["mode"]
    if record["config"]["simulate"]:
        if body.y is not None or body.y_pair is not None:
            raise _fail(422, "y", "simulation sessions draw their outcomes server-side")
        return {}
    if mode == "kw-minimum":
        if body.y is not None:
            raise _fail(422, "y", "kw-minimum sessions take y_pair, not y")
        return {"y_pair": None if body.y_pair is None else list(body.y_pair)}
    if body.y_pair is not None:
        raise _fail(422, "y_pair", f"{mode} sessions take y, not y_pair")
    return {"y": body.y}


# --- posterior curve --------------------------------------------------------------


def _posterior_payload(record: dict, state: SessionState, points: int) -> dict:
    r = estimate(state)
    grid = np.linspace(0.0, 1.0, points + 2)[1:-1]
    vals = r.curve.density(grid)
    total = float(np.trapezoid(vals, grid))
    if total > 0.0:
        # normalized against the sampled trapezoid so the returned curve is a
        # proper density under the same rule clients use to integrate it
        vals = vals / total
    return {
        "session_id": record["id"],
        "step": r.step,
        "m": r.m,
        "points": points,
        "theta": grid.tolist(),
        "density": vals.tolist(),
        "theta0": r.model.theta0,
        "endpoints": [r.sub.v0, r.sub.v1],
        "bounds": [r.bounds[0], r.bounds[1]],
    }


# --- application wiring ------------------------------------------------------------


def create_app(data_dir: str | Path | None = None) -> FastAPI:
    store = SessionStore(data_dir if data_dir is not None else default_data_dir())
    app = FastAPI(title="bsaq session service", version="1")
    app.state.store = store

    def load_or_404(session_id: str) -> dict:
        try:
            return store.load(session_id)
        except KeyError:
            raise HTTPException(404, detail=f"unknown session {session_id!r}")

    @app.post("/sessions", status_code=201)
    def create(req: CreateSession) -> dict:
        config = _build_config(req)
        state = _new_state(config)
        now = _now()
        record = {
            "schema_version": SCHEMA_VERSION,
            "id": uuid.uuid4().hex,
            "created_at": now,
            "updated_at": now,
            "status": "active",
            "config": config,
            "state": _state_doc(state),
            "transcript": [],
        }
        store.save(record)
        return {**_summary(record), "recommendation": _recommendation(record, state)}

    @app.get("/sessions")
    def list_sessions() -> list[dict]:
        out = []
        for sid in store.ids():
            try:
                out.append(_summary(store.load(sid)))
            except KeyError:  # pragma: no cover - deleted between glob and read
                continue
        return out

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        record = load_or_404(session_id)
        state = _state_from_record(record)
        return {**_summary(record), "recommendation": _recommendation(record, state)}

    @app.post("/sessions/{session_id}/outcomes")
    def post_outcome(session_id: str, body: OutcomePost) -> dict:
        with store.lock_for(session_id):
            record = load_or_404(session_id)
            if record["status"] != "active":
                raise HTTPException(409, detail="session is closed")
            expected = record["state"]["steps"] + 1
            if body.step != expected:
                raise HTTPException(
                    409,
                    detail={
                        "message": "step mismatch; refresh the recommendation",
                        "expected_step": expected,
                        "got": body.step,
                    },
                )
            outcome = _validate_outcome_shape(record, body)
            state = _state_from_record(record)
            if record["config"]["simulate"]:
                outcome = _simulated_outcome(record, state)
            new_state = _apply_outcome(record, state, outcome)
            record["state"] = _state_doc(new_state)
            record["updated_at"] = _now()
            rec = _recommendation(record, new_state)
            record["transcript"].append(
                {"step": expected, "outcome": outcome, "recommendation": rec}
            )
            store.save(record)
            return rec

    @app.get("/sessions/{session_id}/recommendation")
    def get_recommendation(session_id: str) -> dict:
        record = load_or_404(session_id)
        return _recommendation(record, _state_from_record(record))

    @app.get("/sessions/{session_id}/posterior")
    def get_posterior(session_id: str, points: int = 512) -> dict:
        record = load_or_404(session_id)
        if not 2 <= points <= 100_000:
            raise _fail(422, "points", f"points must lie in [2, 100000], got {points}")
        if record["config"]["dimension"] != 1:
            raise _fail(422, "dimension", "posterior curves are univariate only")
        state = _state_from_record(record)
        assert isinstance(state, SessionState)
        return _posterior_payload(record, state, points)

    @app.post("/sessions/{session_id}/close")
    def close_session(session_id: str) -> dict:
        with store.lock_for(session_id):
            record = load_or_404(session_id)
            if record["status"] != "closed":
                record["status"] = "closed"
                record["updated_at"] = _now()
                store.save(record)
            return _summary(record)

    @app.get("/sessions/{session_id}/export")
    def export_session(session_id: str) -> dict:
        return load_or_404(session_id)

    return app


# --- deterministic replay -----------------------------------------------------------


class ReplayMismatch(Exception):
    """Transcript does not reproduce under direct library calls."""


def replay_transcript(record: dict) -> dict:
    """Re-run an exported session through the library; verify every recommendation.

    Returns the final recommendation.  Raises ReplayMismatch on the first
    diverging design point or a final-state difference; the comparison is on
    the JSON-serialized state documents, so equality is byte-level.
    """
    if record.get("schema_version") != SCHEMA_VERSION:
        raise ReplayMismatch(
            f"unsupported schema version {record.get('schema_version')!r}"
        )
    config = record["config"]
    state = _new_state(config)
    for entry in record["transcript"]:
        state = _apply_outcome(record, state, entry["outcome"])
        got = _recommendation(record, state)
        want = entry["recommendation"]
        if json.dumps(got, sort_keys=True) != json.dumps(want, sort_keys=True):
            raise ReplayMismatch(
                f"recommendation diverged at step {entry['step']}: "
                f"recorded x={want['x']}, replayed x={got['x']}"
            )
    final = json.dumps(_state_doc(state), sort_keys=True)
    recorded = json.dumps(record["state"], sort_keys=True)
    if final != recorded:
        raise ReplayMismatch("final state differs from the recorded state")
    return _recommendation(record, state)
