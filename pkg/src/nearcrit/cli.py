"""Command-line entry point.

Exit codes: 0 on success, 2 for an invalid config or input file, 3 for any
other error raised by the package.  ``NEARCRIT_SEED`` sets the default seed;
``--seed`` always overrides it.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import __version__
from .config_model import components, degree_hash, pair_half_edges, sample_simple, write_edges
from .degree_model import load_degrees, load_pmf, size_biased, stats
from .errors import ConfigError, NearcritError
from .experiments import ExperimentConfig, run
from .exploration import explore, write_boundaries, write_trace
from .gw_survival import lower_bound, solve_rho
from .theory import chi, predict_giant, regime_report

SEED_ENV = "NEARCRIT_SEED"
EXIT_OK, EXIT_CONFIG, EXIT_MODULE = 0, 2, 3


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _resolve_seed(args):
    seed = args.seed if args.seed is not None else _default_seed()
    if seed is None:
        seed = int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
    return seed


def _emit(pairs):
    for key, val in pairs:
        print(f"{key}: {val}")


def _load_degrees(path):
    try:
        return load_degrees(path)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read degree file {path}: {e}") from e


def cmd_stats(args):
    seq = _load_degrees(args.degree_file)
    st = stats(seq)
    rep = regime_report(st)
    sol = solve_rho(size_biased(seq))
    out = [(k, getattr(st, k)) for k in ("n", "ell", "mu", "nu", "eps", "m2", "R", "kappa_n", "delta")]
    out += [("rho", sol.rho), ("alpha", sol.alpha), ("regime", rep.regime), ("window_margin", rep.margin),
            ("critical_scale", rep.critical_scale), ("t1", rep.t1)]
    if sol.rho > 0:
        g = predict_giant(seq, sol.rho)
        out += [("v1_prediction", g.v1), ("k1_prediction", st.n * chi(seq, sol.rho))]
    _emit(out)


def cmd_survival(args):
    try:
        law = load_pmf(args.pmf_file)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read pmf file: {e}") from e
    sol = solve_rho(law)
    out = [("mean", law.mean), ("eps", law.eps), ("rho", sol.rho), ("alpha", sol.alpha),
           ("residual", sol.residual), ("iterations", sol.iterations)]
    if law.eps > 0 and law.factorial_moment2 > 0:
        out.append(("lower_bound", lower_bound(law)))
    _emit(out)


def cmd_generate(args):
    seq = _load_degrees(args.degree_file)
    seed = _resolve_seed(args)
    rng = np.random.default_rng(seed)
    extra = {}
    if args.simple:
        g, attempts = sample_simple(seq, rng, args.max_attempts)
        extra["attempts"] = attempts
    else:
        g = pair_half_edges(seq, rng)
    g = dataclasses.replace(g, seed=seed)
    write_edges(g, args.out or sys.stdout, degree_hash(seq), extra)
    c = components(g)
    print(f"seed={seed} edges={g.num_edges} v1={c.v1} e1={c.e1} k1={c.k1}", file=sys.stderr)


def cmd_explore(args):
    seq = _load_degrees(args.degree_file)
    seed = _resolve_seed(args)
    trace, g = explore(seq, np.random.default_rng(seed))
    if args.trace_out:
        write_trace(trace, args.trace_out)
    if args.boundaries_out:
        write_boundaries(trace, args.boundaries_out)
    c = components(g)
    _emit([("seed", seed), ("events", trace.t.size), ("decimated", trace.decimated), ("components", c.component_count),
           ("v1", c.v1), ("e1", c.e1), ("k1", c.k1), ("v2", c.v2)])


def cmd_experiment(args):
    config = ExperimentConfig.load(args.config_file)
    out = args.out or config.output
    result = run(config, threads=args.threads)
    if out:
        result.write(out)
        print(f"wrote {len(result.rows)} rows to {out}", file=sys.stderr)
    else:
        sys.stdout.write(result.to_csv())
    for s in result.summary:
        ratio = "" if s["ratio"] is None else f" ratio={s['ratio']:.4g}"
        print(f"n={s['n']} {s['observable']}: mean={s['mean']:.6g} cv={s['cv']:.3g}{ratio}", file=sys.stderr)


def build_parser():
    p = argparse.ArgumentParser(prog="nearcrit", description="Near-critical configuration-model toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("stats", help="moments, survival probability and regime of a degree file")
    s.add_argument("degree_file")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("survival", help="survival probability of an offspring pmf file")
    s.add_argument("pmf_file")
    s.set_defaults(func=cmd_survival)

    s = sub.add_parser("generate", help="sample a configuration multigraph as an edge list")
    s.add_argument("degree_file")
    s.add_argument("--seed", type=int)
    s.add_argument("--simple", action="store_true", help="condition on simplicity by rejection")
    s.add_argument("--max-attempts", type=int, default=200)
    s.add_argument("--out", help="edge-list CSV path (default: stdout)")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("explore", help="run the exploration process on a sampled graph")
    s.add_argument("degree_file")
    s.add_argument("--seed", type=int)
    s.add_argument("--trace-out")
    s.add_argument("--boundaries-out")
    s.set_defaults(func=cmd_explore)

    s = sub.add_parser("experiment", help="run a replicated experiment from a config file")
    s.add_argument("config_file")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NearcritError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_MODULE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
