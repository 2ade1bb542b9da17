"""Command-line front end.

Exit status: 0 on success, 2 on usage errors (bad flags, config or values),
1 when a library operation fails at run time.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import experiments as ex
from ._kernels import OrbitKernel
from .adic import predecessor, successor
from .beta_core import BetaParam, expand, format_word, is_admissible, parry_density, parse_word
from .cocycle import observable_from_spec
from .errors import BetaAdicError, DomainError
from .spectral import MONTE_CARLO, SPECTRAL, build_ulam, invariant_density, sigma_squared, write_density_csv

EXPERIMENT_NAMES = {"clt": ex.CLT, "ds": ex.DS, "lemma-final": ex.LEMMA_FINAL, "bre": ex.BRE, "llt": ex.LLT}
TOP_KEYS = {"beta", "observable", "output", "plot", "experiment"}
EXPERIMENT_KEYS = {
    "kind", "n", "trials", "seed", "depth", "window", "epsilon", "delta",
    "schedule", "targets", "point", "bins", "workers",
}
#: orbit steps written row by row with --output
ORBIT_ROWS_LIMIT = 10**5


class UsageError(Exception):
    """Bad invocation; maps to exit status 2."""


def _num(v) -> str:
    """Canonical number text shared by stdout and JSON."""
    return json.dumps(v)


def _beta(text: str) -> BetaParam:
    try:
        return BetaParam(text)
    except BetaAdicError as exc:
        raise UsageError(f"--beta: {exc}") from exc


def _word(text: str, flag: str = "--word"):
    try:
        return parse_word(text)
    except BetaAdicError as exc:
        raise UsageError(f"{flag}: {exc}") from exc


def _obs_spec(text: str | None):
    if text is None:
        return None
    text = text.strip()
    if not text.startswith("{"):
        return text
    try:
        return json.loads(text)
    except ValueError as exc:
        raise UsageError(f"--observable: {exc}") from exc


def cmd_expand(args) -> str:
    beta = _beta(args.beta)
    try:
        x = Fraction(args.x)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"--x: cannot parse {args.x!r}") from exc
    return format_word(expand(beta, x, args.depth).digits)


def cmd_admissible(args) -> str:
    return "true" if is_admissible(_word(args.word), _beta(args.beta)) else "false"


def cmd_tau(args) -> str:
    beta = _beta(args.beta)
    w = _word(args.word)
    step = predecessor if args.inverse else successor
    for _ in range(args.steps):
        w = step(beta, w)
    return format_word(w)


def cmd_orbit(args) -> str:
    beta = _beta(args.beta)
    try:
        obs = observable_from_spec(beta, _obs_spec(args.observable))
        window = ex.parse_window(_window_arg(args.window), obs)
    except (BetaAdicError, ValueError) as exc:
        raise UsageError(f"--observable/--window: {exc}") from exc
    word = _word(args.word)
    kernel = OrbitKernel(obs)
    try:
        y = float(Fraction(args.y))
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"--y: cannot parse {args.y!r}") from exc
    if args.output:
        if args.n > ORBIT_ROWS_LIMIT:
            raise UsageError(f"--output supports at most {ORBIT_ROWS_LIMIT} steps")
        st = kernel.state(word, y)
        rows, count = [], 0
        for k in range(args.n):
            hit = _inside(window, st.fiber)
            count += hit
            rows.append((k, format_word(st.word()), st.fiber, int(hit)))
            kernel.occupation(None, None, window, np.array([1]), state=st)
        _write_csv(args.output, ("k", "word", "fiber", "in_window"), rows)
        final_word, fiber = st.word(), st.fiber
    else:
        counts, st = kernel.occupation(word, y, window, np.array([args.n]))
        count, final_word, fiber = int(counts[0]), st.word(), st.fiber
    return f"S_n={count} n={args.n} fiber={_num(fiber)} word={format_word(final_word)}"


def _inside(window, fiber: float) -> bool:
    lo, hi, is_point = window.bounds()
    return fiber == lo if is_point else lo <= fiber < hi


def _window_arg(text):
    if text is None:
        return None
    parts = [p.strip() for p in text.split(",")]
    return parts if len(parts) > 1 else parts[0]


def _write_csv(path, header, rows):
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_density(args) -> str:
    beta = _beta(args.beta)
    if args.bins < 2:
        raise UsageError("--bins must be at least 2")
    est = invariant_density(build_ulam(beta, args.bins))
    oracle = parry_density(beta, est.midpoints)
    l1 = float(np.abs(est.values - oracle).mean())
    if args.output:
        write_density_csv(est, args.output)
    return (
        f"bins={args.bins} min={_num(float(est.values.min()))} max={_num(float(est.values.max()))} "
        f"l1_parry={_num(l1)}"
    )


def cmd_sigma(args) -> str:
    beta = _beta(args.beta)
    try:
        obs = observable_from_spec(beta, _obs_spec(args.observable))
    except BetaAdicError as exc:
        raise UsageError(f"--observable: {exc}") from exc
    if args.method == "spectral":
        est = sigma_squared(obs, SPECTRAL, bins=args.bins)
    else:
        est = sigma_squared(obs, MONTE_CARLO, n=args.n, trials=args.trials, seed=args.seed)
    return f"sigma2={_num(est.sigma2)} method={est.method} stderr={_num(est.stderr)}"


def load_config(path) -> dict:
    """Read a TOML config; unknown keys are rejected."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"--config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"--config: {exc}") from exc
    unknown = set(data) - TOP_KEYS
    if unknown:
        raise UsageError(f"--config: unknown keys {sorted(unknown)}")
    block = data.get("experiment", {})
    if not isinstance(block, dict):
        raise UsageError("--config: [experiment] must be a table")
    unknown = set(block) - EXPERIMENT_KEYS
    if unknown:
        raise UsageError(f"--config: unknown experiment keys {sorted(unknown)}")
    return data


def build_experiment(args) -> tuple[ex.ExperimentConfig, str, bool]:
    data = load_config(args.config) if args.config else {}
    block = dict(data.get("experiment", {}))
    kind = EXPERIMENT_NAMES[args.kind]
    if "kind" in block and str(block.pop("kind")).upper().replace("-", "_") != kind:
        raise UsageError("--config: experiment kind does not match the subcommand")
    fields = dict(block)
    for key in ("beta", "observable"):
        if key in data:
            fields[key] = data[key]
    overrides = {
        "beta": args.beta, "observable": _obs_spec(args.observable), "n": args.n, "trials": args.trials,
        "seed": args.seed, "depth": args.depth, "workers": args.workers, "window": _window_arg(args.window),
    }
    fields.update({k: v for k, v in overrides.items() if v is not None})
    output = args.output or data.get("output") or "."
    plot = data.get("plot", True) if args.plot is None else args.plot
    try:
        cfg = ex.ExperimentConfig(kind=kind, output=output, **fields)
    except (BetaAdicError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid experiment settings: {exc}") from exc
    return cfg, output, bool(plot)


def cmd_experiment(args) -> str:
    from .plotting import emit_plot
    from .errors import UnsupportedKind

    cfg, output, plot = build_experiment(args)
    report = ex.run_experiment(cfg)
    jpath, cpath = ex.write_report(report, output, cfg.stem)
    files = [str(jpath), str(cpath)]
    if plot:
        try:
            files.append(str(emit_plot(report, Path(output) / f"{cfg.stem}.svg")))
        except UnsupportedKind:
            pass
    scalars = " ".join(
        f"{k}={_num(v)}" for k, v in sorted(report.summary.items()) if isinstance(v, (int, float)) or v is None
    )
    return f"{report.kind} verdict={report.verdict} {scalars} files={','.join(files)}"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="beta-adic", description="Beta-expansions, adic orbits and experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("expand", help="greedy digits of x")
    s.add_argument("--beta", required=True)
    s.add_argument("--x", required=True)
    s.add_argument("--depth", type=int, default=20)
    s.set_defaults(func=cmd_expand)

    s = sub.add_parser("admissible", help="Parry admissibility of a word")
    s.add_argument("--beta", required=True)
    s.add_argument("--word", required=True)
    s.set_defaults(func=cmd_admissible)

    s = sub.add_parser("tau", help="adic successor (or predecessor)")
    s.add_argument("--beta", required=True)
    s.add_argument("--word", required=True)
    s.add_argument("--steps", type=int, default=1)
    s.add_argument("--inverse", action="store_true")
    s.set_defaults(func=cmd_tau)

    s = sub.add_parser("orbit", help="occupation count along a random walk adic orbit")
    s.add_argument("--beta", required=True)
    s.add_argument("--word", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--observable", default="d1")
    s.add_argument("--window")
    s.add_argument("--y", default="0")
    s.add_argument("--output")
    s.set_defaults(func=cmd_orbit)

    s = sub.add_parser("density", help="Ulam invariant density")
    s.add_argument("--beta", required=True)
    s.add_argument("--bins", type=int, default=4096)
    s.add_argument("--output")
    s.set_defaults(func=cmd_density)

    s = sub.add_parser("sigma", help="asymptotic variance of an observable")
    s.add_argument("--beta", required=True)
    s.add_argument("--observable", default="d1")
    s.add_argument("--method", choices=("spectral", "mc"), default="spectral")
    s.add_argument("--bins", type=int, default=4096)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--trials", type=int, default=4000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_sigma)

    s = sub.add_parser("experiment", help="run a seeded experiment and write JSON/CSV/SVG")
    s.add_argument("kind", choices=sorted(EXPERIMENT_NAMES))
    s.add_argument("--config")
    s.add_argument("--beta")
    s.add_argument("--observable")
    s.add_argument("--n", type=int)
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--depth", type=int)
    s.add_argument("--window")
    s.add_argument("--workers", type=int)
    s.add_argument("--output")
    s.add_argument("--plot", dest="plot", action="store_true", default=None)
    s.add_argument("--no-plot", dest="plot", action="store_false")
    s.set_defaults(func=cmd_experiment)
    return p


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        line = args.func(args)
    except (UsageError, DomainError) as exc:
        # DomainError here means an argument value outside its domain
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except BetaAdicError as exc:
        print(f"error in {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(line)
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
