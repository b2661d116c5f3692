"""End-to-end runs: ingestion, sparsifier, factorization, propagation,
evaluation, tuning.

A run is described by a JSON config whose keys mirror :class:`RunConfig`.
All randomness flows from the single config seed through named sub-streams,
so reruns (at any thread count) produce byte-identical artifacts.

For link prediction the held-out split is derived deterministically from the
graph and seed, and the embedding is trained on the residual graph; the
evaluation command recreates the same split from the same config.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass

import numpy as np

from .datasets import (
    LabeledNodes,
    LinkPredSplit,
    load_labels,
    make_linkpred_split,
)
from .errors import FormatError
from .evaluation import Metrics, link_pred_score, node_classification_eval
from .graph import Graph, build_graph, load_graph, normalize_edges, read_edge_list, save_graph
from .parallel import resolve_threads
from .propagation import PropagationParams, chebyshev_propagate
from .randsvd import (
    SvdParams,
    embedding_from_factors,
    fast_randomized_svd,
    save_embedding,
)
from .sparsifier import SamplingParams, assemble_netmf, sample_sparsifier
from .tuner import embedding_search_space, save_trial_log, tune


@dataclass(frozen=True)
class HyperParams:
    """Every tunable of the pipeline.

    The sample budget may be given absolutely (``M``) or as a multiple of
    T*m (``samples_per_Tm``).  ``C_multiplier`` scales ln(n) in the
    downsampling probability; ``None`` disables downsampling entirely.
    """

    T: int = 10
    s_coeffs: tuple[float, ...] | None = None
    M: int | None = None
    samples_per_Tm: float | None = None
    C_multiplier: float | None = 1.0
    b: float = 1.0
    d: int = 32
    s_over: int = 16
    q: int = 1
    k: int = 10
    theta: float = 0.5
    mu: float = 0.2
    seed: int = 0
    capacity_multiplier: float = 2.0

    def __post_init__(self):
        if self.M is not None and self.samples_per_Tm is not None:
            raise ValueError("give M or samples_per_Tm, not both")
        if self.M is None and self.samples_per_Tm is None:
            object.__setattr__(self, "samples_per_Tm", 1.0)

    def resolve_M(self, m: int) -> int:
        if self.M is not None:
            return int(self.M)
        return max(1, int(round(self.samples_per_Tm * self.T * m)))

    def sampling_params(self, g: Graph) -> SamplingParams:
        if self.C_multiplier is None:
            C = math.inf
        else:
            C = self.C_multiplier * math.log(max(2, g.n))
        return SamplingParams(
            M=self.resolve_M(g.m),
            T=self.T,
            s_coeffs=self.s_coeffs,
            C=C,
            b=self.b,
            seed=self.seed,
            capacity_multiplier=self.capacity_multiplier,
        )

    def svd_params(self) -> SvdParams:
        return SvdParams(d=self.d, s_over=self.s_over, q=self.q, seed=self.seed)

    def propagation_params(self) -> PropagationParams:
        return PropagationParams(k=self.k, mu=self.mu, theta=self.theta)


@dataclass(frozen=True)
class TaskSpec:
    kind: str  # "classify" | "linkpred"
    labels: str | None = None
    train_ratio: float = 0.1
    repeats: int = 10
    reg: float = 1e-2
    holdout_fraction: float = 0.01
    n_negatives: int = 1000
    objective: str | None = None

    def __post_init__(self):
        if self.kind not in ("classify", "linkpred"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.kind == "classify" and not self.labels:
            raise ValueError("classify task needs a labels path")

    def objective_key(self) -> str:
        if self.objective:
            return self.objective
        return "macro_f1" if self.kind == "classify" else "hits@10"


@dataclass(frozen=True)
class RunConfig:
    graph: str
    hp: HyperParams
    embedding_out: str | None = None
    stats_out: str | None = None
    task: TaskSpec | None = None
    threads: int | None = None
    compress: bool = False


_HP_KEYS = {f.name for f in dataclasses.fields(HyperParams)}
_TASK_KEYS = {f.name for f in dataclasses.fields(TaskSpec)}
_TOP_KEYS = {"graph", "embedding_out", "stats_out", "task", "threads", "compress"}


def run_config_from_dict(data: dict) -> RunConfig:
    """Strict parse: unknown keys are errors, hyperparameters sit at the top
    level next to the paths."""
    unknown = set(data) - _TOP_KEYS - _HP_KEYS
    if unknown:
        raise FormatError(f"unknown config keys: {sorted(unknown)}")
    if "graph" not in data:
        raise FormatError("config needs a 'graph' path")
    hp_kwargs = {k: data[k] for k in _HP_KEYS if k in data}
    if "s_coeffs" in hp_kwargs and hp_kwargs["s_coeffs"] is not None:
        hp_kwargs["s_coeffs"] = tuple(hp_kwargs["s_coeffs"])
    task = None
    if data.get("task") is not None:
        task_data = dict(data["task"])
        bad = set(task_data) - _TASK_KEYS
        if bad:
            raise FormatError(f"unknown task keys: {sorted(bad)}")
        task = TaskSpec(**task_data)
    return RunConfig(
        graph=data["graph"],
        hp=HyperParams(**hp_kwargs),
        embedding_out=data.get("embedding_out"),
        stats_out=data.get("stats_out"),
        task=task,
        threads=data.get("threads"),
        compress=bool(data.get("compress", False)),
    )


def run_config_to_dict(cfg: RunConfig) -> dict:
    out = {"graph": cfg.graph}
    for key, value in dataclasses.asdict(cfg.hp).items():
        if isinstance(value, tuple):
            value = list(value)
        out[key] = value
    if cfg.hp.s_coeffs is not None:
        out["s_coeffs"] = list(cfg.hp.s_coeffs)
    out["embedding_out"] = cfg.embedding_out
    out["stats_out"] = cfg.stats_out
    out["task"] = dataclasses.asdict(cfg.task) if cfg.task else None
    out["threads"] = cfg.threads
    out["compress"] = cfg.compress
    return out


def load_run_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})")
    if not isinstance(data, dict):
        raise FormatError(f"{path}: config must be one JSON object")
    return run_config_from_dict(data)


# ---------------------------------------------------------------------------
# stages


def embed_graph(g: Graph, hp: HyperParams, threads: int | None = None):
    """Sparsify, factorize, propagate.  Returns (X, stats)."""
    threads = resolve_threads(threads)
    stats: dict = {"n": g.n, "m": g.m, "threads": threads, "seed": hp.seed}
    sampling = hp.sampling_params(g)
    stats["M"] = sampling.M

    t0 = time.perf_counter()
    table = sample_sparsifier(g, sampling, threads=threads)
    matrix = assemble_netmf(table, g, sampling)
    t1 = time.perf_counter()
    stats["samples_drawn"] = table.stats["draws"]
    stats["samples_kept"] = table.stats["kept"]
    stats["distinct_entries"] = table.stats["distinct"]
    stats["nnz"] = int(matrix.nnz)

    factors = fast_randomized_svd(matrix, hp.svd_params())
    X = embedding_from_factors(factors)
    t2 = time.perf_counter()
    stats["sigma"] = [float(s) for s in factors.Sigma]

    if hp.k >= 2:
        X = chebyshev_propagate(g, X, hp.propagation_params())
        t3 = time.perf_counter()
        propagation_seconds = t3 - t2
    else:
        propagation_seconds = 0.0
    stats["stage_seconds"] = {
        "sparsifier": t1 - t0,
        "svd": t2 - t1,
        "propagation": propagation_seconds,
    }
    return X, stats


def _training_graph(g: Graph, cfg: RunConfig) -> tuple[Graph, LinkPredSplit | None]:
    if cfg.task is not None and cfg.task.kind == "linkpred":
        split = make_linkpred_split(
            g, cfg.task.holdout_fraction, cfg.task.n_negatives, cfg.hp.seed
        )
        return split.residual, split
    return g, None


def run_embed(cfg: RunConfig):
    """Full embed command: load graph, run stages, write artifacts."""
    g = load_graph(cfg.graph)
    train_g, _ = _training_graph(g, cfg)
    X, stats = embed_graph(train_g, cfg.hp, threads=cfg.threads)
    if cfg.embedding_out:
        save_embedding(X, cfg.embedding_out)
    if cfg.stats_out:
        with open(cfg.stats_out, "w", encoding="utf-8") as fh:
            json.dump(stats, fh, indent=2)
            fh.write("\n")
    return X, stats


def evaluate_embedding(g: Graph, X: np.ndarray, cfg: RunConfig) -> Metrics:
    if cfg.task is None:
        raise ValueError("config has no task to evaluate")
    if X.shape[0] != g.n:
        raise ValueError(
            f"embedding has {X.shape[0]} rows but graph has {g.n} vertices"
        )
    if cfg.task.kind == "classify":
        labeled = load_labels(cfg.task.labels, g.n)
        return node_classification_eval(
            X,
            labeled,
            train_ratio=cfg.task.train_ratio,
            repeats=cfg.task.repeats,
            seed=cfg.hp.seed,
            reg=cfg.task.reg,
        )
    _, split = _training_graph(g, cfg)
    return link_pred_score(X, split)


def run_eval(cfg: RunConfig, embedding_path: str | None = None) -> dict:
    from .randsvd import load_embedding

    path = embedding_path or cfg.embedding_out
    if not path:
        raise ValueError("no embedding path given")
    g = load_graph(cfg.graph)
    X = load_embedding(path)
    return evaluate_embedding(g, X, cfg).as_dict()


def _apply_tuned(hp: HyperParams, config: dict) -> HyperParams:
    return dataclasses.replace(
        hp,
        s_coeffs=tuple(config["s_coeffs"]),
        M=int(config["M"]),
        samples_per_Tm=None,
        q=int(config["q"]),
        k=int(config["k"]),
        theta=float(config["theta"]),
        mu=float(config["mu"]),
    )


def run_tune(
    cfg: RunConfig,
    budget: int,
    best_config_out: str | None = None,
    trial_log_out: str | None = None,
):
    """Search the tunable dimensions, optimizing the task metric."""
    if cfg.task is None:
        raise ValueError("tuning needs a task in the config")
    g = load_graph(cfg.graph)
    space = embedding_search_space(cfg.hp.T, g.m)
    key = cfg.task.objective_key()

    def objective(config: dict) -> float:
        hp = _apply_tuned(cfg.hp, config)
        train_g, split = _training_graph(g, dataclasses.replace(cfg, hp=hp))
        X, _ = embed_graph(train_g, hp, threads=cfg.threads)
        metrics = (
            link_pred_score(X, split).as_dict()
            if split is not None
            else evaluate_embedding(g, X, dataclasses.replace(cfg, hp=hp)).as_dict()
        )
        return metrics[key]

    initial = {
        "s_coeffs": cfg.hp.s_coeffs or tuple([1.0 / cfg.hp.T] * cfg.hp.T),
        "M": cfg.hp.resolve_M(g.m),
        "q": cfg.hp.q,
        "k": cfg.hp.k,
        "theta": cfg.hp.theta,
        "mu": cfg.hp.mu,
    }
    result = tune(space, objective, budget, seed=cfg.hp.seed, initial=initial)

    best_cfg = dataclasses.replace(cfg, hp=_apply_tuned(cfg.hp, result.best_config))
    if best_config_out:
        with open(best_config_out, "w", encoding="utf-8") as fh:
            json.dump(run_config_to_dict(best_cfg), fh, indent=2)
            fh.write("\n")
    if trial_log_out:
        save_trial_log(result.trials, trial_log_out)
    return best_cfg, result


def convert_edge_list(in_path, out_path, compress: bool = False) -> dict:
    """Text edge list to binary graph file; returns summary stats."""
    raw = read_edge_list(in_path)
    g = build_graph(normalize_edges(raw), compress=compress)
    written = save_graph(g, out_path)
    raw_payload = 2 * g.m * 4  # directed u32 entries in raw CSR
    payload = len(g.adj_payload) if g.compressed else raw_payload
    return {
        "n": g.n,
        "m": g.m,
        "bytes": written,
        "compression_ratio": (raw_payload / payload) if payload else 1.0,
    }
