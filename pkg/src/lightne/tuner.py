"""Budgeted hyperparameter search: seeded random draws plus adaptive local
moves around the incumbent.

This is deliberately not a model-based AutoML engine.  The contract it keeps
is the useful part: the default configuration is evaluated first (so the
result never regresses below it), every trial is a pure function of the
seed, failed objective evaluations consume budget without aborting the
search, and local step sizes halve on failure and double on success.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .rng import STREAM_TUNER, StreamRng

_MIN_STEP = 1e-4


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def sample(self, rng):
        return self.lo + (self.hi - self.lo) * rng.next_float()

    def default(self):
        return 0.5 * (self.lo + self.hi)

    def perturb(self, x, step, rng):
        span = self.hi - self.lo
        return float(np.clip(x + step * span * (2.0 * rng.next_float() - 1.0), self.lo, self.hi))

    def contains(self, x):
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float
    integer: bool = False

    def _round(self, x):
        x = float(np.clip(x, self.lo, self.hi))
        return int(round(x)) if self.integer else x

    def sample(self, rng):
        val = np.exp(np.log(self.lo) + (np.log(self.hi) - np.log(self.lo)) * rng.next_float())
        return self._round(val)

    def default(self):
        return self._round(np.sqrt(self.lo * self.hi))

    def perturb(self, x, step, rng):
        span = np.log(self.hi) - np.log(self.lo)
        val = np.exp(np.log(max(x, self.lo)) + step * span * (2.0 * rng.next_float() - 1.0))
        return self._round(val)

    def contains(self, x):
        return self.lo - 0.5 <= x <= self.hi + 0.5 if self.integer else self.lo <= x <= self.hi


@dataclass(frozen=True)
class IntUniform:
    lo: int
    hi: int

    def sample(self, rng):
        return self.lo + rng.next_u32() % (self.hi - self.lo + 1)

    def default(self):
        return (self.lo + self.hi) // 2

    def perturb(self, x, step, rng):
        width = max(1, int(round(step * (self.hi - self.lo))))
        delta = int(rng.next_u32() % (2 * width + 1)) - width
        return int(np.clip(x + delta, self.lo, self.hi))

    def contains(self, x):
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class Simplex:
    """A vector of weights, each drawn from [floor, 1], then normalized to
    sum to one."""

    size: int
    floor: float = 0.01

    def sample(self, rng):
        raw = np.array([self.floor + (1.0 - self.floor) * rng.next_float() for _ in range(self.size)])
        return tuple(raw / raw.sum())

    def default(self):
        return tuple(np.full(self.size, 1.0 / self.size))

    def perturb(self, x, step, rng):
        raw = np.array(
            [np.clip(v + step * (2.0 * rng.next_float() - 1.0), self.floor, 1.0) for v in x]
        )
        return tuple(raw / raw.sum())

    def contains(self, x):
        return len(x) == self.size and abs(sum(x) - 1.0) <= 1e-9 and min(x) >= 0


@dataclass(frozen=True)
class SearchSpace:
    dims: dict

    def __post_init__(self):
        for name, dim in self.dims.items():
            if isinstance(dim, (Uniform, LogUniform)) and not dim.lo < dim.hi:
                raise ValueError(f"dimension {name}: need lo < hi")
            if isinstance(dim, IntUniform) and not dim.lo <= dim.hi:
                raise ValueError(f"dimension {name}: need lo <= hi")

    def default_config(self) -> dict:
        return {name: dim.default() for name, dim in self.dims.items()}


def embedding_search_space(
    T: int,
    m: int,
    M_lo: float = 0.25,
    M_hi: float = 8.0,
) -> SearchSpace:
    """Search space over the pipeline's tunables.  The sample-count range is
    expressed in multiples of T*m."""
    return SearchSpace(
        dims={
            "s_coeffs": Simplex(size=T),
            "M": LogUniform(max(1.0, M_lo * T * m), max(2.0, M_hi * T * m), integer=True),
            "q": IntUniform(1, 5),
            "k": IntUniform(1, 16),
            "theta": Uniform(1e-3, 2.0),
            "mu": Uniform(0.0, 1.0),
        }
    )


def sample_config(space: SearchSpace, rng: StreamRng) -> dict:
    """Independent draw of every dimension."""
    return {name: dim.sample(rng) for name, dim in space.dims.items()}


def _perturb_config(space: SearchSpace, base: dict, steps: dict, rng: StreamRng) -> dict:
    return {
        name: dim.perturb(base[name], steps[name], rng) for name, dim in space.dims.items()
    }


@dataclass
class TrialRecord:
    index: int
    kind: str  # "initial" | "global" | "local"
    config: dict
    objective: float | None
    error: str | None
    wall_time: float
    best_so_far: float | None

    def as_dict(self) -> dict:
        cfg = {
            k: (list(v) if isinstance(v, tuple) else v) for k, v in self.config.items()
        }
        return {
            "trial": self.index,
            "kind": self.kind,
            "config": cfg,
            "objective": self.objective,
            "error": self.error,
            "wall_time": self.wall_time,
            "best_so_far": self.best_so_far,
        }


@dataclass
class TuneResult:
    best_config: dict
    best_objective: float
    trials: list[TrialRecord] = field(default_factory=list)


def tune(
    space: SearchSpace,
    objective,
    budget: int,
    seed: int = 0,
    initial: dict | None = None,
) -> TuneResult:
    """Maximize ``objective(config)`` within ``budget`` evaluations.

    Trial 0 is the initial config (the space default unless given).  Odd
    trials draw fresh global configs, even trials perturb the incumbent with
    per-dimension steps that double after an improving local move and halve
    after a failed one.  Deterministic given the seed; the result is never
    worse than the initial config's objective.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    initial = dict(initial) if initial is not None else space.default_config()

    steps = {name: 0.25 for name in space.dims}
    trials: list[TrialRecord] = []
    best_config: dict | None = None
    best_objective = -np.inf

    for index in range(budget):
        if index == 0:
            kind, config = "initial", initial
        elif index % 2 == 1 or best_config is None:
            kind = "global"
            config = sample_config(space, StreamRng(seed, STREAM_TUNER, index))
        else:
            kind = "local"
            config = _perturb_config(
                space, best_config, steps, StreamRng(seed, STREAM_TUNER, index)
            )
        t0 = time.perf_counter()
        error = None
        value = None
        try:
            value = float(objective(config))
        except Exception as exc:  # failed trial consumes budget
            error = f"{type(exc).__name__}: {exc}"
        elapsed = time.perf_counter() - t0

        improved = value is not None and value > best_objective
        if improved:
            best_config, best_objective = config, value
        if kind == "local":
            if improved:
                steps = {k: min(0.5, v * 2.0) for k, v in steps.items()}
            else:
                steps = {k: max(_MIN_STEP, v * 0.5) for k, v in steps.items()}
        trials.append(
            TrialRecord(
                index=index,
                kind=kind,
                config=config,
                objective=value,
                error=error,
                wall_time=elapsed,
                best_so_far=None if best_config is None else best_objective,
            )
        )

    if best_config is None:
        raise RuntimeError("every trial failed; no usable configuration")
    return TuneResult(best_config=best_config, best_objective=best_objective, trials=trials)


def save_trial_log(trials: list[TrialRecord], path) -> None:
    """One JSON object per line, append-friendly."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in trials:
            fh.write(json.dumps(record.as_dict()) + "\n")
