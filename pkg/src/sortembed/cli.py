"""Command-line workbench.

Exit codes: 0 success, 1 usage or configuration error, 2 collision found,
3 lemma counterexample.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, sorting
from .config import format_vectors, frame_from_config, load_json, pipeline_from_config, read_vectors
from .embedding import embed_batch, embed_diag
from .errors import ConfigError, SortEmbedError
from .signretrieval import frame_report

log = logging.getLogger("sortembed")

EXIT_OK, EXIT_CONFIG, EXIT_COLLISION, EXIT_COUNTEREXAMPLE = 0, 1, 2, 3


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, default=_json_default) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _child_seeds(seed: int, k: int) -> list[int]:
    """Independent integer seeds for ``k`` consumers of one command seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(k)]


def _config(args) -> tuple[dict, Path]:
    if not args.config:
        raise ConfigError("--config is required")
    return load_json(args.config), Path(args.config).resolve().parent


# -- commands ---------------------------------------------------------------------

def cmd_embed(args) -> int:
    cfg, base = _config(args)
    pipeline = pipeline_from_config(cfg, base)
    src = args.input or cfg.get("input")
    if src is None:
        raise ConfigError("config is missing field 'input' (or pass --input)")
    V = read_vectors(base / src if args.input is None else src)
    if V.size and V.shape[1] != pipeline.dim:
        raise ConfigError(f"input vectors have dimension {V.shape[1]}, pipeline expects {pipeline.dim}")
    out = embed_batch(pipeline, V) if V.size else np.empty((0, pipeline.D))
    text = format_vectors(out) if out.size else ""
    dest = args.out or cfg.get("output")
    if dest:
        Path(dest if args.out else base / dest).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg, base = _config(args)
    pipeline = pipeline_from_config(cfg, base)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    trials = args.trials if args.trials is not None else int(cfg.get("trials", 10_000))
    tol = args.tol if args.tol is not None else float(cfg.get("tol", 1e-6))
    sep_trials = int(cfg.get("separation_trials", min(trials, 2000)))
    est_seed, sep_seed = _child_seeds(seed, 2)

    sep = analysis.check_separation(pipeline, trials=sep_trials, tol=tol, seed=sep_seed)
    extra = [(sep.collision.v, sep.collision.w)] if sep.found else []
    est = analysis.estimate_bilipschitz(pipeline, cfg.get("sampler", "gaussian"), trials, est_seed, extra)
    report = {
        "pipeline_digest": pipeline.digest(),
        "M": pipeline.M,
        "N": pipeline.N,
        "D": pipeline.D,
        "d": pipeline.dim,
        "seed": seed,
        "trials": trials,
        "analytic_upper": est.analytic_upper,
        "c_hat": est.c_hat,
        "C_hat": est.C_hat,
        "estimate": est.to_dict(),
        "separation": sep.to_dict(),
    }
    _emit(report, args.out)
    return EXIT_COLLISION if sep.found else EXIT_OK


def run_lemma_suite(M: int, p_max: int, scenarios: int, seed: int, eps: float | None = None,
                    inject_corrupt: bool = False):
    """Generate and check scenarios for ``p = 1..p_max`` with and without ``y``.

    Returns ``(checked, failures)`` where each failure is a certificate dict.
    """
    failures, checked = [], 0
    for p in range(1, p_max + 1):
        for with_y in (False, True):
            for k in range(scenarios):
                ss = np.random.SeedSequence([seed, M, p, int(with_y), k])
                s_seed = int(ss.generate_state(1)[0])
                e = eps if eps is not None else float(np.random.default_rng(ss).uniform(0.05, 0.5))
                s = sorting.generate_lemma_scenario(M, p, e, with_y, s_seed)
                validate = True
                if inject_corrupt and checked == 0:
                    # harness self-test: weights far outside the eps budget
                    s.cs = s.cs * 10.0
                    validate = False
                verdict = sorting.check_lemma_conclusions(s, validate=validate)
                checked += 1
                if not verdict.passed:
                    failures.append(json.loads(sorting.certificate(s, verdict)))
    return checked, failures


_LEMMA_DEFAULTS = {"M": 4, "p_max": 3, "scenarios": 500, "eps": None, "seed": 0}
_BENCH_DEFAULTS = {"m": 64, "n": 32, "D": 256, "reps": 50, "steps": 4, "vary": "D", "seed": 0}


def _merge(args, defaults: dict) -> None:
    """Fill unset flags from ``--config`` (if any), then from ``defaults``."""
    cfg = _config(args)[0] if args.config else {}
    for key, default in defaults.items():
        if getattr(args, key) is None:
            setattr(args, key, cfg.get(key, default))
    for key in defaults:
        val = getattr(args, key)
        if key not in ("eps", "vary") and not isinstance(val, int):
            raise ConfigError(f"field {key!r} must be an integer, got {val!r}")


def cmd_lemmas(args) -> int:
    _merge(args, _LEMMA_DEFAULTS)
    if args.M > 7 or args.M < 2:
        raise ConfigError(f"--M must lie in 2..7 (exhaustive S_M enumeration), got {args.M}")
    if args.p_max < 1 or args.scenarios < 1:
        raise ConfigError("--p-max and --scenarios must be positive")
    if args.eps is not None and not 0 < args.eps <= 0.5:
        raise ConfigError("--eps must lie in (0, 1/2]")
    checked, failures = run_lemma_suite(args.M, args.p_max, args.scenarios, args.seed, args.eps,
                                        args.inject_corrupt)
    report = {"M": args.M, "p_max": args.p_max, "seed": args.seed, "checked": checked,
              "counterexamples": len(failures)}
    if failures:
        cert = args.certificate or "lemma_counterexamples.json"
        Path(cert).write_text(json.dumps(failures, indent=2) + "\n")
        report["certificate"] = cert
    _emit(report, args.out)
    return EXIT_COUNTEREXAMPLE if failures else EXIT_OK


def _time_once(m: int, n: int, D: int, rng: np.random.Generator, inner: int) -> float:
    A = rng.standard_normal((n, D))
    B = rng.standard_normal((m, D))
    X = rng.standard_normal((m, n))
    embed_diag(A, B, X)
    t0 = time.perf_counter_ns()
    for _ in range(inner):
        embed_diag(A, B, X)
    return (time.perf_counter_ns() - t0) / inner


def time_embed_diag(m: int, n: int, D: int, reps: int, rng: np.random.Generator, inner: int = 5) -> float:
    """Median wall time in ns of one :func:`embed_diag` call over ``reps`` random instances."""
    return float(np.median([_time_once(m, n, D, rng, inner) for _ in range(reps)]))


def bench_ladder(m: int, n: int, D: int, reps: int, seed: int, vary: str = "D", steps: int = 4,
                 inner: int = 5) -> dict:
    """Median times over a doubling ladder in one dimension, plus the log-log slope.

    Sizes are visited round-robin within each repetition so that drift in
    machine speed hits every size alike.
    """
    rng = np.random.default_rng(seed)
    ladder = []
    for k in range(steps):
        dims = {"m": m, "n": n, "D": D}
        dims[vary] *= 2 ** k
        ladder.append(dims)
    samples = [[] for _ in ladder]
    for _ in range(reps):
        for dims, out in zip(ladder, samples):
            out.append(_time_once(dims["m"], dims["n"], dims["D"], rng, inner))
    sizes = [dims[vary] for dims in ladder]
    times = [float(np.median(t)) for t in samples]
    slope = float(np.polyfit(np.log(sizes), np.log(times), 1)[0]) if steps >= 2 else float("nan")
    return {"vary": vary, "sizes": sizes, "median_ns": times, "slope": slope}


def cmd_bench_diag(args) -> int:
    _merge(args, _BENCH_DEFAULTS)
    if args.vary not in ("D", "n", "m"):
        raise ConfigError(f"field 'vary' must be one of D, n, m, got {args.vary!r}")
    if min(args.m, args.n, args.D, args.reps, args.steps) < 1:
        raise ConfigError("sizes, --reps and --steps must be positive")
    ladder = bench_ladder(args.m, args.n, args.D, args.reps, args.seed, args.vary, args.steps)
    report = {"m": args.m, "n": args.n, "D": args.D, "reps": args.reps, "seed": args.seed,
              "median_ns": ladder["median_ns"][0], "ladder": ladder}
    _emit(report, args.out)
    return EXIT_OK


def cmd_sign(args) -> int:
    if args.config:
        cfg, base = _config(args)
        frame = frame_from_config(_field_or(cfg, "frame"), base)
    else:
        frame = frame_from_config(args.frame or "mercedes-benz")
    _emit(frame_report(frame), args.out)
    return EXIT_OK


def _field_or(cfg, name):
    if name not in cfg:
        raise ConfigError(f"config is missing field {name!r}")
    return cfg[name]


# -- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sortembed", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default=0):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--out", help="write the report here instead of stdout")

    p = sub.add_parser("embed", help="embed a batch of vectors")
    common(p)
    p.add_argument("--input", help="vectors file (overrides config 'input')")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("analyze", help="bi-Lipschitz estimate and separation search")
    common(p, seed_default=None)
    p.add_argument("--trials", type=int)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("lemmas", help="run the sorting-lemma oracle suite")
    common(p, seed_default=None)
    p.add_argument("--M", type=int)
    p.add_argument("--p-max", type=int)
    p.add_argument("--scenarios", type=int)
    p.add_argument("--eps", type=float, help="fixed eps (default: random per scenario in [0.05, 0.5])")
    p.add_argument("--certificate", help="where to write counterexample certificates")
    p.add_argument("--inject-corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_lemmas)

    p = sub.add_parser("bench-diag", help="time the diag(B^T sort(XA)) embedding")
    common(p, seed_default=None)
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--D", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--steps", type=int, help="number of doublings in the size ladder")
    p.add_argument("--vary", choices=("D", "n", "m"))
    p.set_defaults(func=cmd_bench_diag)

    p = sub.add_parser("sign", help="exact sign-retrieval constants of a frame")
    common(p)
    p.add_argument("--frame", help="frame file or 'mercedes-benz'")
    p.set_defaults(func=cmd_sign)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SortEmbedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
