"""Seeded Monte Carlo runs: connectivity sweeps and k-filling frequencies.

Trial ``t`` of a run with master seed ``s`` always draws its points from
stream ``derive_seed(s, t)``, and aggregates are folded in trial order, so
results depend only on (config, master seed), never on the worker count.
"""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from statistics import NormalDist

import numpy as np

from . import __version__, rng
from .analytics import FillingParams, log_p_at_least, log_p_k_filling
from .errors import DomainError, ResourceLimitError
from .geometry import Trap, build_trap, grid_capacity
from .neighbor_graph import Rule, components, edges_from_out_lists, dsu_labels, graph_from_out_lists, knn_out_lists
from .point_process import Model, PointSet, sample, sample_poisson, sample_poisson_batch

DEFAULT_BUDGET = 2_000_000_000
Z95 = NormalDist().inv_cdf(0.975)

CONNECTIVITY_COLUMNS = ["N", "k", "rule", "model", "trials", "connected", "p_hat", "ci_low",
                        "ci_high", "mean_largest_component", "master_seed"]
KFILLING_COLUMNS = ["N", "r", "a", "L", "k", "mode", "trials", "hits", "p_hat", "p_analytic",
                    "z_score", "events_disconnected_union", "events_disconnected_mutual",
                    "certificate_pass_rate", "master_seed"]
EVENT_COLUMNS = ["trial", "trap", "n", "disconnected_union", "disconnected_mutual", "certificate"]


class FillMode(str, Enum):
    EXACT = "exact"
    AT_LEAST = "at_least"


def _fill_mode(mode) -> FillMode:
    return FillMode("at_least" if mode == "atleast" else mode)


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        raise DomainError("trials must be positive")
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def k_from_c(c: float, N: float) -> int:
    """Neighbor count for k = c ln N, rounded down and floored at 1."""
    return max(1, math.floor(c * math.log(N)))


K_ROUNDING_RULE = "k = max(1, floor(c * ln N))"


# -- k-filling detection ----------------------------------------------------

def _trap_counts(pts: np.ndarray, trap: Trap) -> tuple[int, np.ndarray, int]:
    inner = trap.inner_disk.contains(pts)
    outer = trap.outer_disk.contains(pts)
    subs = np.array([d.contains(pts) for d in trap.sub_disks]).reshape(trap.L, -1)
    designated = inner | subs.any(axis=0)
    return int(inner.sum()), subs.sum(axis=1), int((outer & ~designated).sum())


def detect_k_filling(points, trap: Trap, k: int, mode: FillMode | str = FillMode.EXACT) -> bool:
    """Whether the trap holds a k-filling event.

    ``exact``: k points in the inner disk and in every sub-disk, none
    elsewhere in the outer disk.  ``at_least``: at least k in each of those
    regions, still none elsewhere.
    """
    mode = _fill_mode(mode)
    pts = points.points if isinstance(points, PointSet) else np.asarray(points).reshape(-1, 2)
    inner, subs, other = _trap_counts(pts, trap)
    if other:
        return False
    if mode is FillMode.EXACT:
        return inner == k and bool(np.all(subs == k))
    return inner >= k and bool(np.all(subs >= k))


def outside_selection_certificate(points, trap: Trap, k: int) -> bool:
    """True iff no node outside the outer disk can select an inner-disk node.

    Every point strictly outside the outer disk must see at least k
    non-inner points strictly closer than its nearest inner point.
    """
    pts = points.points if isinstance(points, PointSet) else np.asarray(points, dtype=float).reshape(-1, 2)
    inner = trap.inner_disk.contains(pts)
    R = trap.outer_disk.radius
    dx = pts[:, 0] - trap.center[0]
    dy = pts[:, 1] - trap.center[1]
    outside = np.flatnonzero(dx * dx + dy * dy > R * R)
    if not inner.any() or outside.size == 0:
        return True
    inner_pts = pts[inner]
    others = np.flatnonzero(~inner)
    for start in range(0, outside.size, 2048):
        q = outside[start:start + 2048]
        qp = pts[q]
        d_in = ((qp[:, None, :] - inner_pts[None, :, :]) ** 2).sum(-1).min(axis=1)
        d_ot = ((qp[:, None, :] - pts[others][None, :, :]) ** 2).sum(-1)
        d_ot[others[None, :] == q[:, None]] = np.inf
        closer = np.count_nonzero(d_ot < d_in[:, None], axis=1)
        if np.any(closer < k):
            return False
    return True


def _batch_events(pts: np.ndarray, owner: np.ndarray, B: int, trap: Trap, k: int,
                  mode: FillMode) -> np.ndarray:
    # vectorised detect_k_filling over a block of B point sets
    cx, cy = trap.center
    dx = pts[:, 0] - cx
    dy = pts[:, 1] - cy
    d2 = dx * dx + dy * dy
    R = trap.outer_disk.radius
    near = d2 <= R * R
    p, o, dd = pts[near], owner[near], d2[near]
    inner = dd <= trap.r * trap.r
    sub_id = np.full(len(p), -1)
    rho = trap.subdisk_radius
    for i, (yx, yy) in enumerate(trap.subdisk_centers):
        ex = p[:, 0] - yx
        ey = p[:, 1] - yy
        sub_id[ex * ex + ey * ey <= rho * rho] = i
    other = ~inner & (sub_id < 0)
    n_inner = np.bincount(o[inner], minlength=B)
    n_other = np.bincount(o[other], minlength=B)
    sub_counts = np.zeros((B, trap.L), dtype=np.int64)
    np.add.at(sub_counts, (o[sub_id >= 0], sub_id[sub_id >= 0]), 1)
    if mode is FillMode.EXACT:
        ok = (n_inner == k) & np.all(sub_counts == k, axis=1)
    else:
        ok = (n_inner >= k) & np.all(sub_counts >= k, axis=1)
    return ok & (n_other == 0)


# -- experiment configs -----------------------------------------------------

@dataclass
class ConnectivityExperiment:
    N_values: list[float]
    k_values: list[int] | None = None
    c_values: list[float] | None = None
    rule: Rule = Rule.UNION
    model: Model = Model.FIXED
    trials: int = 100
    master_seed: int = 0
    threads: int = 1
    budget: float = DEFAULT_BUDGET

    def __post_init__(self):
        self.rule = Rule(self.rule)
        self.model = Model(self.model)
        if self.rule is Rule.DIRECTED:
            raise DomainError("connectivity experiments need the union or mutual rule")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if any(N < 2 for N in self.N_values):
            raise DomainError("all N must be >= 2")
        if (self.k_values is None) == (self.c_values is None):
            raise DomainError("give exactly one of k_values or c_values")
        if self.k_values is not None and any(int(k) != k or k < 1 for k in self.k_values):
            raise DomainError("k values must be positive integers")

    def ks_for(self, N: float) -> list[int]:
        if self.k_values is not None:
            return [int(k) for k in self.k_values]
        return [k_from_c(c, N) for c in self.c_values]


@dataclass
class KFillingExperiment:
    N: float
    r: float
    a: float
    L: int
    k: int
    mode: FillMode = FillMode.EXACT
    trials: int = 1000
    master_seed: int = 0
    placement: str = "single"  # or "grid"
    model: Model = Model.POISSON
    threads: int = 1
    block: int = 20_000
    budget: float = DEFAULT_BUDGET

    def __post_init__(self):
        self.mode = _fill_mode(self.mode)
        self.model = Model(self.model)
        if self.model is not Model.POISSON:
            raise DomainError("k-filling frequencies need the Poisson model: counts in disjoint "
                              "regions are dependent under fixed N")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if self.placement not in ("single", "grid"):
            raise DomainError(f"unknown placement {self.placement!r}")

    def traps(self) -> list[Trap]:
        if self.placement == "single":
            return [build_trap((0.5, 0.5), self.r, self.a, self.L)]
        _, centers = grid_capacity(self.a, self.r)
        return [build_trap(c, self.r, self.a, self.L) for c in centers]


@dataclass
class Result:
    """Tables produced by a run plus free-text notes for the manifest."""
    tables: dict[str, tuple[list[str], list[dict]]]
    notes: list[str] = field(default_factory=list)


def _check_budget(samples: float, budget: float) -> None:
    if samples > budget:
        raise ResourceLimitError(
            f"{samples:.3g} point samples exceed the budget of {budget:.3g}; "
            f"reduce trials or N, or raise the budget explicitly")


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _connectivity_trial(points: PointSet, ks: list[int], rule: Rule) -> list[tuple[bool, float]]:
    n = len(points)
    if n <= 1:
        return [(True, 1.0)] * len(ks)
    out = knn_out_lists(points, min(max(ks), n - 1))
    res = []
    for k in ks:
        # out-lists are nearest-first, so a prefix is the smaller-k out-list
        edges = edges_from_out_lists(out[:, :min(k, n - 1)], rule)
        sizes = np.bincount(dsu_labels(n, edges))
        res.append((bool(np.count_nonzero(sizes) == 1), float(sizes.max()) / n))
    return res


def run_connectivity(cfg: ConnectivityExperiment) -> Result:
    """Estimate P(connected) for every (N, k) in the config."""
    total = sum(N * cfg.trials for N in cfg.N_values)
    _check_budget(total, cfg.budget)
    rows = []
    notes = []
    if cfg.c_values is not None:
        notes.append(f"k derived from c with {K_ROUNDING_RULE}")
    for N in cfg.N_values:
        ks = cfg.ks_for(N)

        def trial(t, N=N, ks=ks):
            pts = sample(cfg.model, N, rng.derive_seed(cfg.master_seed, t))
            return _connectivity_trial(pts, ks, cfg.rule)

        per_trial = _map(trial, range(cfg.trials), cfg.threads)
        for j, k in enumerate(ks):
            connected = sum(1 for rec in per_trial if rec[j][0])
            lo, hi = wilson_interval(connected, cfg.trials)
            rows.append({
                "N": N, "k": k, "rule": cfg.rule.value, "model": cfg.model.value,
                "trials": cfg.trials, "connected": connected,
                "p_hat": connected / cfg.trials, "ci_low": lo, "ci_high": hi,
                "mean_largest_component": math.fsum(rec[j][1] for rec in per_trial) / cfg.trials,
                "master_seed": cfg.master_seed,
            })
    return Result({"connectivity": (CONNECTIVITY_COLUMNS, rows)}, notes)


def _probe_event(cfg: KFillingExperiment, trial: int, trap_ids: list[int], traps: list[Trap]) -> list[dict]:
    pts = sample_poisson(cfg.N, rng.derive_seed(cfg.master_seed, trial))
    n = len(pts)
    k = cfg.k
    if n >= 2:
        out = knn_out_lists(pts, min(k, n - 1))
        union = graph_from_out_lists(out, Rule.UNION)
        mutual = graph_from_out_lists(out, Rule.MUTUAL)
        disc_u = len(components(union)) > 1
        disc_m = len(components(mutual)) > 1
    else:
        mutual = None
        disc_u = disc_m = False
    records = []
    for i in trap_ids:
        trap = traps[i]
        cert = outside_selection_certificate(pts, trap, k)
        if cert and mutual is not None:
            _assert_probe_consistency(pts, trap, mutual, disc_m)
        records.append({"trial": trial, "trap": i, "n": n, "disconnected_union": int(disc_u),
                        "disconnected_mutual": int(disc_m), "certificate": int(cert)})
    return records


def _assert_probe_consistency(pts: PointSet, trap: Trap, mutual, disconnected: bool) -> None:
    # with no mutual edge leaving the inner disk, inner and outer nodes cannot be joined
    inner = trap.inner_disk.contains(pts.points)
    if not inner.any() or inner.all():
        return
    e = mutual.edges
    crossing = np.any(inner[e[:, 0]] != inner[e[:, 1]]) if len(e) else False
    if not crossing and not disconnected:
        raise AssertionError("mutual graph connected although no edge leaves the inner disk")


def analytic_probability(cfg: KFillingExperiment) -> float:
    params = FillingParams(cfg.N, cfg.r, cfg.a, cfg.L, cfg.k)
    lp = log_p_k_filling(params) if cfg.mode is FillMode.EXACT else log_p_at_least(params)
    return math.exp(lp)


def run_kfilling(cfg: KFillingExperiment) -> Result:
    """Compare the empirical k-filling frequency with its analytic probability.

    Every trial with an event is resampled in full to record whether the
    graph is disconnected under the union and mutual rules and whether the
    outside-selection certificate holds.
    """
    traps = cfg.traps()
    S = len(traps)
    _check_budget(cfg.N * cfg.trials, cfg.budget)
    notes = []
    p = analytic_probability(cfg)
    opportunities = cfg.trials * S
    if S == 0:
        notes.append("no trap fits in the unit square; nothing to count")
    elif p < 10.0 / opportunities:
        msg = (f"analytic probability {p:.4g} is below 10/(trials*traps) = "
               f"{10.0 / opportunities:.4g}: comparison is underpowered")
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)

    blocks = [(s, min(cfg.trials, s + cfg.block)) for s in range(0, cfg.trials, cfg.block)]

    def do_block(bounds):
        lo, hi = bounds
        idx = np.arange(lo, hi)
        pts, owner = sample_poisson_batch(cfg.N, rng.derive_seeds(cfg.master_seed, idx))
        hits = np.zeros((hi - lo, S), dtype=bool)
        for j, trap in enumerate(traps):
            hits[:, j] = _batch_events(pts, owner, hi - lo, trap, cfg.k, cfg.mode)
        return [(lo + int(t), [int(j) for j in np.flatnonzero(hits[t])])
                for t in np.flatnonzero(hits.any(axis=1))]

    event_trials = [ev for chunk in _map(do_block, blocks, cfg.threads) for ev in chunk]
    hits = sum(len(ids) for _, ids in event_trials)
    events = [rec for recs in _map(lambda ev: _probe_event(cfg, ev[0], ev[1], traps),
                                   event_trials, cfg.threads) for rec in recs]

    p_hat = hits / opportunities if opportunities else 0.0
    sd = math.sqrt(opportunities * p * (1 - p)) if opportunities else 0.0
    z = (hits - opportunities * p) / sd if sd > 0 else (0.0 if hits == opportunities * p else math.inf)
    if p >= 100.0 / max(opportunities, 1) and abs(z) > 4:
        msg = f"frequency guard: |z| = {abs(z):.3g} > 4 for analytic p = {p:.4g}"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    n_ev = len(event_trials)
    first_record = {}
    for e in events:
        first_record.setdefault(e["trial"], e)
    row = {
        "N": cfg.N, "r": cfg.r, "a": cfg.a, "L": cfg.L, "k": cfg.k, "mode": cfg.mode.value,
        "trials": cfg.trials, "hits": hits, "p_hat": p_hat, "p_analytic": p, "z_score": z,
        "events_disconnected_union": sum(e["disconnected_union"] for e in first_record.values()),
        "events_disconnected_mutual": sum(e["disconnected_mutual"] for e in first_record.values()),
        "certificate_pass_rate": (sum(e["certificate"] for e in events) / len(events)
                                  if events else math.nan),
        "master_seed": cfg.master_seed,
    }
    if n_ev:
        notes.append(f"{n_ev} trials held a k-filling event; union rule disconnected in "
                     f"{row['events_disconnected_union']}, mutual rule in "
                     f"{row['events_disconnected_mutual']}")
    return Result({"kfilling": (KFILLING_COLUMNS, [row]), "events": (EVENT_COLUMNS, events)}, notes)


# -- persistence ------------------------------------------------------------

def format_cell(v) -> str:
    """Shortest round-trip text for floats; ints and strings as-is."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_cell(row.get(c)) for c in columns])


@dataclass
class RunManifest:
    command: str
    master_seed: int | None
    params: dict
    started_at: str
    duration_ms: int
    outputs: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    version: str = __version__

    def to_json(self) -> str:
        d = asdict(self)
        ordered = {key: d[key] for key in ("command", "version", "master_seed", "params",
                                            "started_at", "duration_ms", "outputs", "notes")}
        return json.dumps(ordered, indent=2, sort_keys=False, default=_json_default) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


def _json_default(o):
    if isinstance(o, Enum):
        return o.value
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def persist(result: Result, manifest: RunManifest, out_dir) -> list[Path]:
    """Write one CSV per table and ``manifest.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, (columns, rows) in result.tables.items():
            path = out_dir / f"{name}.csv"
            write_csv(path, columns, rows)
            paths.append(path)
        manifest.outputs = [str(p) for p in paths]
        manifest.notes = list(manifest.notes) + [n for n in result.notes if n not in manifest.notes]
        mpath = out_dir / "manifest.json"
        mpath.write_text(manifest.to_json())
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {out_dir}: {exc.strerror}",
                      exc.filename) from exc
    return paths + [mpath]


def default_out_dir() -> Path:
    return Path(os.environ.get("KNNLAB_OUT", "runs"))
