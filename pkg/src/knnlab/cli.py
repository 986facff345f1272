"""Command-line interface.

Exit codes: 0 success, 1 bad arguments or validation failure, 2 infeasible
mathematical parameters, 3 I/O failure.  Every run writes
``<out-dir>/<command>-<UTC timestamp>-<seed>/manifest.json`` next to its
CSV outputs.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .analytics import (DEFAULT_C, c_bound, recommended_k, theorem1_threshold,
                        theorem2_threshold)
from .errors import (CertificateError, DomainError, InfeasibleTrapError, KnnlabError,
                     PlacementError, ResourceLimitError, SearchError)
from .experiments import (ConnectivityExperiment, KFillingExperiment, Result, RunManifest,
                          default_out_dir, persist, run_connectivity, run_kfilling)
from .geometry import DEFAULT_CERT_ANGLES, containment_certificate, l_max, l_min_upper, numeric_l_min
from .optimizer import SearchConfig, search, write_grid_csv
from .plotting import PlotInputError, plot_csv
from .point_process import poisson_window_probability, window_bounds, window_normal_limit
from .rng import RNG_ALGORITHM

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3

WINDOW_NOTE = ("window probability: the quoted limit of 1 does not match the computed value; "
               "the window N +/- sqrt(pi N/2) spans +/-1.2533 standard deviations, whose "
               "central-limit probability is 2*Phi(sqrt(pi/2)) - 1 = 0.78991")


class UsageError(Exception):
    pass


class InfeasibleError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt(x) -> str:
    """Six significant digits, with -0 printed as 0."""
    if isinstance(x, float):
        return f"{x + 0.0:.6g}"
    return str(x)


# -- run bookkeeping --------------------------------------------------------

class Run:
    def __init__(self, args, command: str):
        self.args = args
        self.command = command
        self.started = datetime.now(timezone.utc)
        self.t0 = time.perf_counter()
        self.notes: list[str] = []
        stamp = self.started.strftime("%Y%m%dT%H%M%S%fZ")
        self.dir = Path(args.out_dir or default_out_dir()) / f"{command}-{stamp}-{args.seed}"

    def finish(self, result: Result | None = None) -> list[Path]:
        params = {k: v for k, v in sorted(vars(self.args).items())
                  if k not in ("func", "config", "out_dir", "command_name")}
        manifest = RunManifest(
            command=self.command,
            master_seed=self.args.seed,
            params=params,
            started_at=self.started.isoformat(timespec="seconds").replace("+00:00", "Z"),
            duration_ms=int(round((time.perf_counter() - self.t0) * 1000)),
            notes=self.notes + [f"random streams: {RNG_ALGORITHM}"],
        )
        paths = persist(result or Result({}), manifest, self.dir)
        print(f"wrote {self.dir}")
        return paths


# -- subcommands ------------------------------------------------------------

def cmd_bound_eval(args) -> int:
    run = Run(args, "bound-eval")
    ev = c_bound(args.a, args.L)
    print(f"a = {fmt(args.a)}  L = {args.L}")
    print(f"l_max = {ev.l_max}  l_min_upper = {ev.l_min_upper}")
    print(f"ln_g = {fmt(ev.ln_g)}")
    print(f"c = {fmt(ev.c) if ev.c is not None else 'unbounded (ln_g >= 0)'}")
    print(f"feasible = {ev.feasible}")
    row = {"a": ev.a, "L": ev.L, "l_max": ev.l_max, "l_min_upper": ev.l_min_upper,
           "ln_g": ev.ln_g, "c": ev.c, "feasible": ev.feasible}
    if not ev.feasible:
        run.notes.append("infeasible (a, L)")
    run.finish(Result({"bound": (list(row), [row])}))
    if not ev.feasible:
        why = (f"L = {args.L} outside [{ev.l_min_upper}, {ev.l_max}]" if ev.c is not None
               else "ln_g >= 0")
        raise InfeasibleError(f"infeasible (a, L): {why}")
    return EXIT_OK


def cmd_bound_search(args) -> int:
    run = Run(args, "bound-search")
    cfg = SearchConfig(args.a_min, args.a_max, args.a_step,
                       "full_sweep" if args.full_sweep else "lmax_only",
                       refine=not args.no_refine, relax_l_min=args.relax_lmin)
    try:
        res = search(cfg)
    except SearchError as exc:
        raise InfeasibleError(str(exc)) from exc
    ref = c_bound(3.6, 11)
    coarse = search(SearchConfig(args.a_min, args.a_max, 0.1, cfg.L_policy, refine=False,
                                 relax_l_min=cfg.relax_l_min))
    print(f"reference c(3.6, 11) = {fmt(ref.c)}")
    print(f"search optimum: a = {fmt(res.best_a)}  L = {res.best_L}  c = {fmt(res.best_c)}")
    if res.grid_best is not None:
        g = res.grid_best
        print(f"grid best (step {fmt(args.a_step)}): a = {fmt(g.a)}  L = {g.L}  c = {fmt(g.c)}")
    print(f"0.1-grid best: a = {fmt(coarse.best_a)}  L = {coarse.best_L}  c = {fmt(coarse.best_c)}")
    print("l_max steps down at a = " + ", ".join(fmt(b) for b in res.plateau_boundaries))
    run.notes.append(f"reference c(3.6, 11) = {ref.c!r}")
    summary = {"label": "optimum", "a": res.best_a, "L": res.best_L, "c": res.best_c}
    rows = [summary,
            {"label": "reference_3.6_11", "a": 3.6, "L": 11, "c": ref.c},
            {"label": "coarse_0.1", "a": coarse.best_a, "L": coarse.best_L, "c": coarse.best_c}]
    paths = run.finish(Result({"summary": (list(summary), rows)}))
    grid_path = run.dir / "grid.csv"
    write_grid_csv(res.grid + res.refined, grid_path)
    _add_output(run.dir, grid_path)
    return EXIT_OK


def _add_output(run_dir: Path, path: Path) -> None:
    mpath = run_dir / "manifest.json"
    m = RunManifest.from_json(mpath.read_text())
    m.outputs.append(str(path))
    mpath.write_text(m.to_json())


def cmd_threshold(args) -> int:
    if not args.N >= 2:
        raise UsageError(f"threshold: N must be >= 2, got {args.N}")
    run = Run(args, "threshold")
    t1 = theorem1_threshold(args.N, args.c)
    t2 = theorem2_threshold(args.N, args.c)
    ratio = t2 / t1 if t1 != 0 else math.nan
    rec = recommended_k(t2)
    print(f"N = {fmt(args.N)}  c = {fmt(args.c)}")
    print(f"theorem1 = {fmt(t1)}   (c ln N, Poisson model)")
    print(f"theorem2 = {fmt(t2)}   (c ln(N + pi/4 - sqrt(pi N/2 + pi^2/16)), fixed-N model)")
    print(f"ratio = {fmt(ratio)}")
    print(f"largest k below theorem2 = {rec}")
    row = {"N": args.N, "c": args.c, "theorem1": t1, "theorem2": t2, "ratio": ratio,
           "recommended_k": rec}
    run.finish(Result({"threshold": (list(row), [row])}))
    return EXIT_OK


def cmd_simulate_connectivity(args) -> int:
    if (args.k is None) == (args.c is None):
        raise UsageError("simulate connectivity: give exactly one of --k or --c")
    run = Run(args, "simulate-connectivity")
    cfg = ConnectivityExperiment(args.N, k_values=args.k, c_values=args.c, rule=args.rule,
                                 model=args.model, trials=args.trials, master_seed=args.seed,
                                 threads=args.threads, budget=args.budget)
    res = run_connectivity(cfg)
    for row in res.tables["connectivity"][1]:
        print(f"N = {fmt(float(row['N']))}  k = {row['k']}  connected {row['connected']}/{row['trials']}"
              f"  p_hat = {fmt(row['p_hat'])}  95% CI [{fmt(row['ci_low'])}, {fmt(row['ci_high'])}]"
              f"  mean largest component = {fmt(row['mean_largest_component'])}")
    run.notes.extend(res.notes)
    run.finish(res)
    return EXIT_OK


def cmd_simulate_kfill(args) -> int:
    run = Run(args, "simulate-kfill")
    cfg = KFillingExperiment(args.N, args.r, args.a, args.L, args.k, mode=args.mode,
                             trials=args.trials, master_seed=args.seed, placement=args.placement,
                             threads=args.threads, budget=args.budget)
    res = run_kfilling(cfg)
    row = res.tables["kfilling"][1][0]
    print(f"hits = {row['hits']} of {row['trials']} trials  p_hat = {fmt(row['p_hat'])}")
    print(f"p_analytic = {fmt(row['p_analytic'])}  z_score = {fmt(row['z_score'])}")
    print(f"events disconnected: union {row['events_disconnected_union']}, "
          f"mutual {row['events_disconnected_mutual']}; "
          f"certificate pass rate = {fmt(row['certificate_pass_rate'])}")
    run.notes.extend(res.notes)
    run.finish(res)
    return EXIT_OK


def cmd_verify_trap(args) -> int:
    run = Run(args, "verify-trap")
    ok = containment_certificate(args.a, args.L, args.angles, full_exterior=args.full_exterior)
    print(f"a = {fmt(args.a)}  L = {args.L}  angles = {args.angles}: {'PASS' if ok else 'FAIL'}")
    row = {"a": args.a, "L": args.L, "angles": args.angles, "pass": ok}
    run.finish(Result({"certificate": (list(row), [row])}))
    return EXIT_OK


def cmd_verify_lmin(args) -> int:
    run = Run(args, "verify-lmin")
    lmin = numeric_l_min(args.a, args.angles)
    upper = l_min_upper(args.a)
    print(f"numeric_l_min({fmt(args.a)}) = {lmin}  (bound {upper}, l_max {l_max(args.a)})")
    print(lmin)
    row = {"a": args.a, "numeric_l_min": lmin, "l_min_upper": upper, "l_max": l_max(args.a)}
    run.finish(Result({"lmin": (list(row), [row])}))
    return EXIT_OK


def cmd_poisson_window(args) -> int:
    if not args.N > 0:
        raise UsageError(f"poisson-window: N must be positive, got {args.N}")
    run = Run(args, "poisson-window")
    p = poisson_window_probability(args.N)
    lo, hi = window_bounds(args.N)
    limit = window_normal_limit()
    print(f"N = {fmt(args.N)}  window [{lo}, {hi}]")
    print(f"exact probability = {fmt(p)}")
    print(f"normal limit 2*Phi(sqrt(pi/2)) - 1 = {fmt(limit)}")
    run.notes.append(WINDOW_NOTE)
    row = {"N": args.N, "lo": lo, "hi": hi, "probability": p, "normal_limit": limit}
    run.finish(Result({"window": (list(row), [row])}))
    return EXIT_OK


def cmd_plot(args) -> int:
    out = plot_csv(args.input, args.x, args.y, args.out)
    print(f"wrote {out}")
    run = Run(args, "plot")
    run.finish()
    _add_output(run.dir, out)
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default: 1)")
    p.add_argument("--out-dir", default=None,
                   help="output root (default: $KNNLAB_OUT or ./runs)")
    p.add_argument("--config", default=None,
                   help="JSON file whose keys mirror the flags; explicit flags win")
    return p


def _number(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _count(text: str) -> int:
    v = _number(text)
    if v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(v)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    fmt_cls = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="knnlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _common()
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    leaves: dict[str, argparse.ArgumentParser] = {}

    def leaf(group, name, func, help_text, desc):
        p = group.add_parser(name, parents=[common], help=help_text, description=desc,
                             formatter_class=fmt_cls)
        p.set_defaults(func=func)
        return p

    bound = sub.add_parser("bound", help="lower-bound constant c(a, L)")
    bsub = bound.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = leaf(bsub, "eval", cmd_bound_eval, "evaluate c(a, L)",
             "Evaluate the constant c(a, L) = -1/ln g(a, L) of the trap-counting bound "
             "behind the 0.129 ln N disconnection bound, with l_max(a) from sub-disk packing "
             "and the closed-form upper bound on l_min from the containment argument.")
    p.add_argument("--a", type=_number, required=True, help="annulus width ratio a")
    p.add_argument("--L", type=_count, required=True, help="number of sub-disks")
    leaves["bound eval"] = p
    p = leaf(bsub, "search", cmd_bound_search, "search (a, L) for the largest c",
             "Exhaustive search over a (and L) maximising c; the reference point is "
             "a = 3.6, L = 11, c = 0.12905.  Refinement evaluates every l_max plateau exactly.")
    p.add_argument("--a-min", type=_number, default=0.1)
    p.add_argument("--a-max", type=_number, default=10.0)
    p.add_argument("--a-step", type=_number, default=1e-3)
    p.add_argument("--full-sweep", action="store_true",
                   help="sweep L over [l_min_upper, l_max] instead of L = l_max only")
    p.add_argument("--no-refine", action="store_true", help="grid only, no plateau refinement")
    p.add_argument("--relax-lmin", action="store_true",
                   help="feasibility lower limit from the numeric certificate, not the closed-form bound")
    leaves["bound search"] = p

    p = leaf(sub, "threshold", cmd_threshold, "neighbor-count thresholds for a given N",
             "Print c ln N (disconnection threshold, Poisson model) and "
             "c ln(N + pi/4 - sqrt(pi N/2 + pi^2/16)) (fixed-N model), their ratio, and the "
             "largest integer k below the fixed-N threshold.")
    p.add_argument("--N", type=_number, required=True)
    p.add_argument("--c", type=_number, default=DEFAULT_C)
    leaves["threshold"] = p

    sim = sub.add_parser("simulate", help="seeded Monte Carlo experiments")
    ssub = sim.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = leaf(ssub, "connectivity", cmd_simulate_connectivity, "estimate P(connected)",
             "Estimate the probability that the k-nearest-neighbor graph is connected "
             "(the empirical side of the disconnection thresholds).")
    p.add_argument("--N", type=_number, nargs="+", required=True)
    p.add_argument("--k", type=_count, nargs="+", default=None)
    p.add_argument("--c", type=_number, nargs="+", default=None,
                   help="derive k = max(1, floor(c ln N)) instead of giving --k")
    p.add_argument("--rule", choices=["union", "mutual"], default="union")
    p.add_argument("--model", choices=["fixed", "poisson"], default="fixed")
    p.add_argument("--trials", type=_count, default=100)
    p.add_argument("--budget", type=_number, default=2e9, help="max total point samples")
    leaves["simulate connectivity"] = p
    p = leaf(ssub, "kfill", cmd_simulate_kfill, "k-filling frequency vs its formula",
             "Count k-filling events in Poisson samples and compare with the k-filling "
             "probability formula; event trials also check that the trap disconnects the graph under the "
             "union and mutual rules.")
    p.add_argument("--N", type=_number, required=True)
    p.add_argument("--r", type=_number, required=True)
    p.add_argument("--a", type=_number, required=True)
    p.add_argument("--L", type=_count, required=True)
    p.add_argument("--k", type=_count, required=True)
    p.add_argument("--mode", choices=["exact", "atleast", "at_least"], default="exact")
    p.add_argument("--placement", choices=["single", "grid"], default="single")
    p.add_argument("--trials", type=_count, default=100_000)
    p.add_argument("--budget", type=_number, default=2e9, help="max total point samples")
    leaves["simulate kfill"] = p

    ver = sub.add_parser("verify", help="trap containment certificate")
    vsub = ver.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = leaf(vsub, "trap", cmd_verify_trap, "check the containment certificate",
             "Check that every disk of radius 2a centered on the outer trap boundary contains "
             "a whole sub-disk, so no outside node can pick an inner node.")
    p.add_argument("--a", type=_number, required=True)
    p.add_argument("--L", type=_count, required=True)
    p.add_argument("--angles", type=_count, default=DEFAULT_CERT_ANGLES)
    p.add_argument("--full-exterior", action="store_true",
                   help="also sweep probe centers beyond the outer boundary")
    leaves["verify trap"] = p
    p = leaf(vsub, "lmin", cmd_verify_lmin, "smallest L passing the certificate",
             "Smallest sub-disk count passing the containment certificate, against the "
             "closed-form upper bound ceil(pi / (2 asin(a/(2+3a)))).")
    p.add_argument("--a", type=_number, required=True)
    p.add_argument("--angles", type=_count, default=2048)
    leaves["verify lmin"] = p

    p = leaf(sub, "poisson-window", cmd_poisson_window, "Poisson count window probability",
             "Exact P(Poisson(N) in [N - sqrt(pi N/2), N + sqrt(pi N/2)]), the concentration "
             "step linking the Poisson and fixed-N models, next to its central-limit value.")
    p.add_argument("--N", type=_number, required=True)
    leaves["poisson-window"] = p

    p = leaf(sub, "plot", cmd_plot, "SVG chart from a result CSV",
             "Draw a static SVG line/scatter chart of two columns of a result CSV.")
    p.add_argument("--input", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--out", required=True)
    leaves["plot"] = p
    return parser, leaves


def parse_args(argv):
    parser, leaves = build_parser()
    # required flags may come from --config, so they are enforced after it is applied
    required = {name: [a for a in leaf._actions if a.required] for name, leaf in leaves.items()}
    for acts in required.values():
        for a in acts:
            a.required = False
    args = parser.parse_args(argv)
    name = args.command + (f" {args.action}" if getattr(args, "action", None) else "")
    leaf = leaves[name]
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise OSError(exc.errno, f"cannot read config {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config}: invalid JSON ({exc})") from exc
        if not isinstance(cfg, dict):
            raise UsageError(f"config {args.config}: expected a JSON object")
        allowed = {a.dest for a in leaf._actions} - {"help", "config", "func"}
        norm = {k.lstrip("-").replace("-", "_"): v for k, v in cfg.items()}
        unknown = sorted(set(norm) - allowed)
        if unknown:
            raise UsageError(f"config {args.config}: unknown key(s) {', '.join(unknown)}")
        leaf.set_defaults(**norm)
        args = parser.parse_args(argv)
    missing = [a.option_strings[0] for a in required[name] if getattr(args, a.dest) is None]
    if missing:
        raise UsageError(f"{leaf.prog}: the following arguments are required: {', '.join(missing)}")
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleError, InfeasibleTrapError, PlacementError, CertificateError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except PlotInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ResourceLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except KnnlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
