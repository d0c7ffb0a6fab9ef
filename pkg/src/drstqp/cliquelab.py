"""Maximum-weight-clique experiments for the decision-independent and dependent models.

A random graph with vertex weights is turned into a copositive nominal
matrix ``Q_nom = E - A``, perturbed by sampled noise, and the robust StQP is
solved over a parameter grid.  Each solve yields one :class:`RunRecord`;
records are written as CSV and JSON and plotted as SVG.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .d3ro import GammaOverQ, require_strictly_copositive, solve_d3, spectral_regime
from .errors import DomainError
from .randmat import RngSpec, as_stream, sample_exp_weights, sample_goe_batch, sample_wishart_batch
from .stqp import SUPPORT_TOL, solve_stqp
from .symlin import sym_to_json

WEIGHT_RATE = 1.5
DEFAULT_EDGE_PROB = 0.3
CSV_HEADER = (
    "theta_or_gamma",
    "beta",
    "trial",
    "objective",
    "clique_weight",
    "density",
    "support_size",
    "runtime_s",
    "regime",
    "solver",
    "support",
)


# -- graphs


@dataclass(frozen=True)
class WeightedGraph:
    n: int
    edges: frozenset  # of (i, j) with i < j
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.n,) or not np.all(w > 0):
            raise DomainError("need one strictly positive weight per vertex")
        for i, j in self.edges:
            if not (0 <= i < j < self.n):
                raise DomainError(f"bad edge {(i, j)!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash((self.n, self.edges, self.weights.tobytes()))

    def adjacency(self) -> np.ndarray:
        B = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            B[i, j] = B[j, i] = True
        return B

    def is_clique(self, S: Sequence[int]) -> bool:
        return all((i, j) in self.edges for i, j in itertools.combinations(sorted(S), 2))

    def to_json(self) -> dict:
        return {"n": self.n, "edges": sorted(list(e) for e in self.edges), "weights": self.weights.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "WeightedGraph":
        return cls(int(obj["n"]), frozenset(tuple(e) for e in obj["edges"]), np.asarray(obj["weights"], dtype=float))


def gen_graph(n: int, edge_prob: float, rng: Any) -> WeightedGraph:
    """Erdos-Renyi G(n, edge_prob) with vertex weights ``1 + Exp(1.5)``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if not 0.0 < edge_prob < 1.0:
        raise DomainError("edge_prob must lie in (0, 1)")
    stream = as_stream(rng)
    iu, ju = np.triu_indices(n, k=1)
    keep = stream.uniform(iu.size) < edge_prob
    edges = frozenset((int(i), int(j)) for i, j in zip(iu[keep], ju[keep]))
    return WeightedGraph(n, edges, sample_exp_weights(n, WEIGHT_RATE, stream))


def build_qnom(G: WeightedGraph) -> tuple[np.ndarray, np.ndarray]:
    """Weighted adjacency ``A`` and nominal matrix ``Q_nom = E - A``.

    ``Q_nom`` has ``1/(2 w_i)`` on the diagonal, 0 on edges and
    ``1/(2 w_i) + 1/(2 w_j)`` on non-edges, hence positive entries off the edge
    set and strict copositivity.
    """
    h = 1.0 / (2.0 * G.weights)
    Q = h[:, None] + h[None, :]
    Q[G.adjacency()] = 0.0
    np.fill_diagonal(Q, h)
    return np.ones((G.n, G.n)) - Q, Q


def density(G: WeightedGraph, S: Sequence[int]) -> float:
    """Edge density of the subgraph induced by ``S``; 1 for at most one vertex."""
    k = len(S)
    if k <= 1:
        return 1.0
    inside = sum((i, j) in G.edges for i, j in itertools.combinations(sorted(S), 2))
    return inside / (k * (k - 1) / 2)


def support_weight(G: WeightedGraph, S: Sequence[int]) -> float:
    return float(np.sum(G.weights[list(S)]))


# -- grids and records


@dataclass(frozen=True)
class DecisionIndependent:
    """Radius sweep with GOE noise: minimize x^T (Qbar_beta + theta I) x."""

    thetas: tuple[float, ...]
    betas: tuple[float, ...]
    tag = "independent"

    @property
    def params(self) -> tuple[float, ...]:
        return self.thetas


@dataclass(frozen=True)
class DecisionDependent:
    """Scale sweep with Wishart noise: minimize x^T Qbar_beta x + gamma x^T x / x^T Qbar_beta x."""

    gammas: tuple[float, ...]
    betas: tuple[float, ...]
    tag = "dependent"

    @property
    def params(self) -> tuple[float, ...]:
        return self.gammas


@dataclass(frozen=True)
class ExperimentGrid:
    model: DecisionIndependent | DecisionDependent
    seed: int = 0
    N: int = 50
    trials: int = 1
    starts: int = 20

    def __post_init__(self):
        m = self.model
        if not m.params or not m.betas:
            raise DomainError("parameter grids must be nonempty")
        if min(m.params) < 0 or min(m.betas) < 0:
            raise DomainError("grid values must be nonnegative")
        if self.N < 1 or self.trials < 1:
            raise DomainError("need N >= 1 and trials >= 1")

    def to_json(self) -> dict:
        key = "theta" if isinstance(self.model, DecisionIndependent) else "gamma"
        return {
            "model": self.model.tag,
            "grids": {key: list(self.model.params), "beta": list(self.model.betas)},
            "seed": self.seed,
            "N": self.N,
            "trials": self.trials,
            "starts": self.starts,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentGrid":
        grids = obj["grids"]
        betas = tuple(float(b) for b in grids["beta"])
        if obj["model"] == "independent":
            model = DecisionIndependent(tuple(float(t) for t in grids["theta"]), betas)
        elif obj["model"] == "dependent":
            model = DecisionDependent(tuple(float(g) for g in grids["gamma"]), betas)
        else:
            raise DomainError(f"unknown model {obj['model']!r}")
        return cls(model, int(obj.get("seed", 0)), int(obj.get("N", 50)), int(obj.get("trials", 1)),
                   int(obj.get("starts", 20)))


@dataclass(frozen=True)
class RunRecord:
    param: float  # theta or gamma
    beta: float
    trial: int
    objective: float
    clique_weight: float  # vertex weight of the support
    density: float
    support_size: int
    runtime_s: float
    regime: str
    solver: str
    support: tuple[int, ...] = field(default=())

    def key(self) -> tuple:
        return (self.param, self.beta, self.trial)

    def row(self) -> list[str]:
        return [
            repr(self.param),
            repr(self.beta),
            str(self.trial),
            repr(self.objective),
            repr(self.clique_weight),
            repr(self.density),
            str(self.support_size),
            repr(self.runtime_s),
            self.regime,
            self.solver,
            " ".join(map(str, self.support)),
        ]

    @classmethod
    def from_row(cls, row: dict) -> "RunRecord":
        return cls(
            float(row["theta_or_gamma"]),
            float(row["beta"]),
            int(row["trial"]),
            float(row["objective"]),
            float(row["clique_weight"]),
            float(row["density"]),
            int(row["support_size"]),
            float(row["runtime_s"]),
            row["regime"],
            row["solver"],
            tuple(int(i) for i in row["support"].split()),
        )


def _record(G, param, beta, trial, sol, regime, solver) -> RunRecord:
    S = sol.support
    return RunRecord(float(param), float(beta), int(trial), float(sol.value), support_weight(G, S),
                     density(G, S), len(S), float(sol.runtime), regime, solver, tuple(S))


def _solver_label(sol) -> str:
    if sol.engine == "enum":
        return "exact"
    return str(sol.meta.get("label", "local"))


# -- runners


def _cell_seeds(grid: ExperimentGrid, rng: RngSpec | None) -> RngSpec:
    return RngSpec(grid.seed) if rng is None else rng


def _run_cells(fn, grid: ExperimentGrid, threads: int | None) -> list[RunRecord]:
    cells = list(itertools.product(range(len(grid.model.betas)), range(grid.trials)))
    workers = max(1, min(threads or 1, len(cells)))
    if workers == 1:
        chunks = [fn(b, t) for b, t in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda c: fn(*c), cells))
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=RunRecord.key)
    return records


def _descending(values: Sequence[float]) -> list[float]:
    return sorted(set(float(v) for v in values), reverse=True)


def run_decision_independent(
    G: WeightedGraph, grid: ExperimentGrid, rng: RngSpec | None = None, threads: int | None = None
) -> list[RunRecord]:
    """Solve ``min x^T (Qbar_beta + theta I) x`` for every (theta, beta, trial).

    Noise for trial t is one batch of N GOE matrices shared by every beta and
    theta, so each trial is a fixed instance swept over the grid.  Exact
    support enumeration is used up to n = 15; beyond that the replicator
    multistart runs with radii visited in decreasing order, each warm-started
    at the previous solution, which keeps values monotone in theta.
    """
    if not isinstance(grid.model, DecisionIndependent):
        raise DomainError("grid is not decision-independent")
    base = _cell_seeds(grid, rng)
    _, Q_nom = build_qnom(G)
    n = G.n
    noise = {t: sample_goe_batch(n, grid.N, base.child(0, t)).mean(axis=0) for t in range(grid.trials)}

    def cell(b: int, t: int) -> list[RunRecord]:
        beta = grid.model.betas[b]
        Qbar = Q_nom + beta * noise[t]
        regime = spectral_regime(Q_nom, noise[t], beta, with_conv=False).label
        out, prev = [], None
        for theta in _descending(grid.model.thetas):
            sol = solve_stqp(Qbar + theta * np.eye(n), rng=base.child(1, b, t), starts=max(grid.starts, 2),
                             extra_starts=prev)
            prev = sol.x
            out.append(_record(G, theta, beta, t, sol, regime, _solver_label(sol)))
        return out

    return _run_cells(cell, grid, threads)


def run_decision_dependent(
    G: WeightedGraph, grid: ExperimentGrid, rng: RngSpec | None = None, threads: int | None = None
) -> list[RunRecord]:
    """Solve ``min x^T Qbar_beta x + gamma x^T x / x^T Qbar_beta x`` for every (gamma, beta, trial).

    ``Qbar_beta = Q_nom + beta R`` with R the mean of N Wishart W_n(I, n)
    draws, shared by every cell of a trial.  gamma = 0 is the plain StQP.
    Scales are visited in decreasing order with warm starts, so reported values
    are nondecreasing in gamma.
    """
    if not isinstance(grid.model, DecisionDependent):
        raise DomainError("grid is not decision-dependent")
    base = _cell_seeds(grid, rng)
    _, Q_nom = build_qnom(G)
    n = G.n
    noise = {t: sample_wishart_batch(n, n, grid.N, base.child(0, t)).mean(axis=0) for t in range(grid.trials)}

    def cell(b: int, t: int) -> list[RunRecord]:
        beta = grid.model.betas[b]
        R = noise[t]
        Qbar = Q_nom + beta * R
        regime = spectral_regime(Q_nom, R, beta).label
        require_strictly_copositive(Qbar, "Qbar_beta")
        out, prev = [], None
        for gamma in _descending(grid.model.gammas):
            cell_rng = base.child(1, b, t)
            if gamma == 0.0:
                sol = solve_stqp(Qbar, rng=cell_rng, extra_starts=prev)
                label = _solver_label(sol)
            else:
                sol = solve_d3(Qbar, GammaOverQ(gamma), starts=grid.starts, rng=cell_rng,
                               check_copositive=False, extra_starts=prev)
                label = sol.meta["label"]
            prev = sol.x if prev is None else np.vstack([prev, sol.x])
            out.append(_record(G, gamma, beta, t, sol, regime, label))
        return out

    return _run_cells(cell, grid, threads)


def run_grid(G: WeightedGraph, grid: ExperimentGrid, threads: int | None = None) -> list[RunRecord]:
    if isinstance(grid.model, DecisionIndependent):
        return run_decision_independent(G, grid, threads=threads)
    return run_decision_dependent(G, grid, threads=threads)


# -- aggregation


@dataclass(frozen=True)
class Frequency:
    param: float
    beta: float
    trials: int
    nodes: np.ndarray  # fraction of trials whose support contains the vertex
    edges: dict  # (i, j) -> fraction of trials whose support contains both ends


def solution_frequency(records: Sequence[RunRecord], G: WeightedGraph) -> list[Frequency]:
    """Per (param, beta) cell, how often each vertex and graph edge is selected."""
    cells: dict[tuple[float, float], list[RunRecord]] = {}
    for r in records:
        cells.setdefault((r.param, r.beta), []).append(r)
    out = []
    for (param, beta), rs in sorted(cells.items()):
        nodes = np.zeros(G.n)
        edges = {e: 0.0 for e in sorted(G.edges)}
        for r in rs:
            S = set(r.support)
            nodes[list(S)] += 1.0
            for e in edges:
                if e[0] in S and e[1] in S:
                    edges[e] += 1.0
        k = len(rs)
        out.append(Frequency(param, beta, k, nodes / k, {e: c / k for e, c in edges.items()}))
    return out


METRICS = ("objective", "clique_weight", "density", "runtime_s")


def summarize(records: Sequence[RunRecord]) -> list[dict]:
    """Mean, min and max of each metric per (param, beta) cell."""
    cells: dict[tuple[float, float], list[RunRecord]] = {}
    for r in records:
        cells.setdefault((r.param, r.beta), []).append(r)
    rows = []
    for (param, beta), rs in sorted(cells.items()):
        row: dict[str, Any] = {"theta_or_gamma": param, "beta": beta, "trials": len(rs)}
        for m in METRICS:
            v = np.array([getattr(r, m) for r in rs])
            row[m] = {"mean": float(v.mean()), "min": float(v.min()), "max": float(v.max())}
        row["regimes"] = sorted({r.regime for r in rs})
        rows.append(row)
    return rows


# -- output


def write_results_csv(records: Sequence[RunRecord], path: Path | str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.row())


def read_results_csv(path: Path | str) -> list[RunRecord]:
    with open(path, newline="") as fh:
        return [RunRecord.from_row(row) for row in csv.DictReader(fh)]


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "drstqp"
    return plt


def _save_svg(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})


def plot_metric(records: Sequence[RunRecord], metric: str, path: Path, xlabel: str = "parameter") -> None:
    """Mean curve per beta with a shaded min-max band across trials."""
    plt = _plt()
    rows = summarize(records)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    params = [r["theta_or_gamma"] for r in rows]
    for beta in sorted({r["beta"] for r in rows}):
        sel = [r for r in rows if r["beta"] == beta]
        x = np.array([r["theta_or_gamma"] for r in sel])
        mean = np.array([r[metric]["mean"] for r in sel])
        lo = np.array([r[metric]["min"] for r in sel])
        hi = np.array([r[metric]["max"] for r in sel])
        ax.plot(x, mean, marker="o", ms=3, label=f"beta={beta:g}")
        ax.fill_between(x, lo, hi, alpha=0.2)
    if params and min(params) > 0 and max(params) / min(params) > 50:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(metric)
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)


def _layout(n: int) -> np.ndarray:
    ang = 2.0 * math.pi * np.arange(n) / n
    return np.column_stack([np.cos(ang), np.sin(ang)])


def plot_frequency(freqs: Sequence[Frequency], G: WeightedGraph, path: Path, label: str = "param") -> None:
    """One circular graph drawing per cell; edge and vertex shading is selection frequency."""
    plt = _plt()
    k = len(freqs)
    cols = min(3, k) or 1
    rows = max(1, math.ceil(k / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 3 * rows), squeeze=False)
    pos = _layout(G.n)
    for ax in axes.ravel():
        ax.set_axis_off()
    for ax, f in zip(axes.ravel(), freqs):
        for i, j in sorted(G.edges):
            ax.plot(*pos[[i, j]].T, color="0.85", lw=0.6, zorder=1)
        for (i, j), v in sorted(f.edges.items()):
            if v > 0:
                ax.plot(*pos[[i, j]].T, color="tab:red", lw=0.5 + 2.5 * v, alpha=v, zorder=2)
        ax.scatter(pos[:, 0], pos[:, 1], c=f.nodes, cmap="Reds", vmin=0, vmax=1, edgecolors="k", s=60, zorder=3)
        ax.set_title(f"{label}={f.param:g}, beta={f.beta:g}", fontsize=8)
        ax.set_aspect("equal")
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)


def emit_outputs(
    records: Sequence[RunRecord],
    out_dir: Path | str,
    G: WeightedGraph | None = None,
    meta: dict | None = None,
    xlabel: str = "parameter",
) -> list[Path]:
    """Write results.csv, summary.json and one SVG per metric (plus a frequency map when G is given)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "results.csv", out / "summary.json"]
    write_results_csv(records, written[0])
    summary = {"meta": meta or {}, "cells": summarize(records)}
    if G is not None:
        A, Q_nom = build_qnom(G)
        summary["graph"] = G.to_json()
        summary["Q_nom"] = sym_to_json(Q_nom)
    with open(written[1], "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if records:
        for m in METRICS:
            p = out / f"{m}.svg"
            plot_metric(records, m, p, xlabel)
            written.append(p)
        if G is not None:
            p = out / "frequency.svg"
            plot_frequency(solution_frequency(records, G), G, p, xlabel)
            written.append(p)
    return written


# -- configs and demos


@dataclass(frozen=True)
class GraphConfig:
    n: int = 12
    edge_prob: float = DEFAULT_EDGE_PROB
    seed: int = 0

    def build(self) -> WeightedGraph:
        return gen_graph(self.n, self.edge_prob, RngSpec(self.seed))


@dataclass(frozen=True)
class RunConfig:
    graph: GraphConfig
    grid: ExperimentGrid
    output_dir: str = "cliquelab-out"

    def to_json(self) -> dict:
        return {"graph": asdict(self.graph), **self.grid.to_json(), "output_dir": self.output_dir}


def load_config(obj: dict | str | Path) -> RunConfig:
    if not isinstance(obj, dict):
        with open(obj) as fh:
            obj = json.load(fh)
    unknown = set(obj) - {"graph", "model", "grids", "seed", "N", "trials", "starts", "output_dir"}
    if unknown:
        raise DomainError(f"unknown config keys {sorted(unknown)}")
    g = obj.get("graph", {})
    graph = GraphConfig(int(g.get("n", 12)), float(g.get("edge_prob", DEFAULT_EDGE_PROB)), int(g.get("seed", 0)))
    return RunConfig(graph, ExperimentGrid.from_json(obj), str(obj.get("output_dir", "cliquelab-out")))


def run_config(cfg: RunConfig, out_dir: Path | str | None = None, threads: int | None = None) -> list[RunRecord]:
    G = cfg.graph.build()
    records = run_grid(G, cfg.grid, threads)
    xlabel = "theta" if isinstance(cfg.grid.model, DecisionIndependent) else "gamma"
    emit_outputs(records, out_dir or cfg.output_dir, G, cfg.to_json(), xlabel)
    return records


def _logspace(lo: float, hi: float, k: int) -> tuple[float, ...]:
    return tuple(float(v) for v in np.round(np.logspace(math.log10(lo), math.log10(hi), k), 12))


def demo_configs(example: str, seed: int = 0) -> list[tuple[str, RunConfig]]:
    """Desk-scale versions of the five clique experiments, as (subdirectory, config) pairs."""
    di, dd = DecisionIndependent, DecisionDependent
    if example == "5.1":
        grid = ExperimentGrid(di((0.01, 0.6, 1.5), (0.01, 0.1, 0.8)), seed, N=20, trials=1)
        return [("", RunConfig(GraphConfig(12, DEFAULT_EDGE_PROB, seed), grid))]
    if example == "5.2":
        grid = ExperimentGrid(di(_logspace(1e-3, 10.0, 13), (0.001,)), seed, N=20, trials=5)
        return [("", RunConfig(GraphConfig(12, DEFAULT_EDGE_PROB, seed), grid))]
    if example == "5.3":
        grid = ExperimentGrid(dd((0.005, 0.05, 0.3), (0.005, 0.08, 0.2)), seed, N=50, trials=1)
        return [("", RunConfig(GraphConfig(12, DEFAULT_EDGE_PROB, seed), grid))]
    if example == "5.4":
        grid = ExperimentGrid(dd((0.0,) + _logspace(1e-3, 1.0, 10), (0.01,)), seed, N=50, trials=5)
        return [("", RunConfig(GraphConfig(10, DEFAULT_EDGE_PROB, seed), grid))]
    if example == "5.5":
        out = []
        for n in (8, 10, 12):
            grid = ExperimentGrid(dd((0.01,), (0.01,)), seed, N=100, trials=5)
            out.append((f"nodes-{n}", RunConfig(GraphConfig(n, DEFAULT_EDGE_PROB, seed), grid)))
        for N in (20, 50, 100):
            grid = ExperimentGrid(dd((0.01,), (0.01,)), seed, N=N, trials=5)
            out.append((f"samples-{N}", RunConfig(GraphConfig(10, DEFAULT_EDGE_PROB, seed), grid)))
        return out
    raise DomainError(f"unknown example {example!r}; choose from 5.1 to 5.5")


def run_demo(example: str, out_dir: Path | str, seed: int = 0, threads: int | None = None) -> dict:
    """Run one demo and return ``{subdirectory: records}``."""
    results = {}
    for sub, cfg in demo_configs(example, seed):
        target = Path(out_dir) / sub if sub else Path(out_dir)
        results[sub] = run_config(cfg, target, threads)
    return results
