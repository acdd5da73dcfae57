"""Command-line front end.

One subcommand per capability; numeric output is printed as ``name = value``
lines in a fixed order with '.' decimal separators so it can be parsed
blind.  Exit codes: 0 success, 2 usage or parameter error, 3 numerical
failure (non-convergence, or a failed ``--verify`` cross-check).

The ``simulate`` subcommand is driven by a flat ``key = value`` config
file ('#' comments, repeated keys form grids); flags override file keys.
``--seed`` falls back to the ``SEED`` environment variable, and the
``THREADS`` environment variable caps the simulation worker pool.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import harness
from .adaptive import (
    fpp_adaptive_asymptotic,
    fpp_type2_asymptotic,
    solve_kstar,
    tau2_max_fpp,
    threshold_for_fpp,
)
from .asymptotics import fpp_fixed_tau_asymptotic
from .bayes import decide, posterior, posterior_n2
from .errors import ConvergenceError, InvalidInputError
from .frequentist import adhoc_critical_value, lrt_critical_value
from .model import ModelSpec, PriorSpec
from .oracle import MAX_DENSE_CHANNELS, dense_posterior, posterior_zform

__all__ = ["main", "build_parser"]

_VERIFY_TOL = 1e-9


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def _emit(name: str, value, out=None) -> None:
    print(f"{name} = {_fmt(value)}", file=out or sys.stdout)


def _seed_from(args) -> int:
    """--seed flag, else the SEED environment variable, else 0."""
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise InvalidInputError(f"SEED must be an integer, got {env!r}")
    return 0


# --------------------------------------------------------------------------
# Subcommand implementations.
# --------------------------------------------------------------------------


def _cmd_critical_value(args) -> int:
    spec = ModelSpec(n_channels=args.n, rho=args.rho)
    if args.method == "adhoc":
        cv = adhoc_critical_value(args.alpha, spec)
    else:
        cv = lrt_critical_value(
            args.alpha, spec, reps=args.reps, master_seed=_seed_from(args)
        )
    _emit("method", args.method)
    _emit("c", cv.value)
    _emit("alpha_attained", cv.alpha)
    if cv.stderr is not None:
        _emit("mc_stderr", cv.stderr)
        _emit("reps", cv.reps)
    return 0


def _read_x(args) -> np.ndarray:
    if args.x is not None:
        tokens = args.x.replace(",", " ").split()
    else:
        with open(args.x_file, "r", encoding="utf-8") as fh:
            tokens = fh.read().replace(",", " ").split()
    try:
        x = np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise InvalidInputError(f"could not parse x values: {exc}")
    if x.size == 0:
        raise InvalidInputError("x is empty")
    return x


def _cmd_posterior(args) -> int:
    x = _read_x(args)
    if args.n is not None and args.n != x.size:
        raise InvalidInputError(
            f"--n {args.n} does not match the {x.size} supplied x values"
        )
    spec = ModelSpec(n_channels=x.size, rho=args.rho)
    prior = PriorSpec(tau2=args.tau2, r=args.r)
    post = posterior(x, spec, prior)
    for i, prob in enumerate(post.probs):
        _emit(f"p{i}", prob)
    dec = decide(post, args.p)
    _emit("accepted", dec.accepted if dec.accepted is not None else "none")
    if args.verify:
        gaps = [np.max(np.abs(posterior_zform(x, spec, prior) - post.probs))]
        if x.size <= MAX_DENSE_CHANNELS:
            gaps.append(np.max(np.abs(dense_posterior(x, spec, prior) - post.probs)))
        if x.size == 2:
            gaps.append(
                np.max(np.abs(posterior_n2(x, args.rho, prior).probs - post.probs))
            )
        gap = float(max(gaps))
        _emit("verify_gap", gap)
        if gap > _VERIFY_TOL:
            raise ConvergenceError(
                f"posterior cross-check gap {gap:.3g} exceeds {_VERIFY_TOL}"
            )
    return 0


def _cmd_tau2(args) -> int:
    _emit("tau2", tau2_max_fpp(args.n, args.rho, args.p, args.r))
    return 0


def _cmd_kstar(args) -> int:
    sol = solve_kstar(args.p, args.r)
    _emit("k_star", sol.k_star)
    _emit("c_star", sol.c_star)
    _emit("residual", sol.residual)
    return 0


def _cmd_threshold(args) -> int:
    p = threshold_for_fpp(args.fpp, args.r, args.n)
    residual = fpp_adaptive_asymptotic(args.n, p, args.r) - args.fpp
    _emit("p", p)
    _emit("residual", residual)
    if args.verify:
        _emit("verify_fpp", fpp_adaptive_asymptotic(args.n, p, args.r))
        if abs(residual) > 1e-10:
            raise ConvergenceError(
                f"threshold round-trip residual {residual:.3g} exceeds 1e-10"
            )
    return 0


def _cmd_fpp_asymptotic(args) -> int:
    if args.kind == "fixed":
        if args.tau2 is None:
            raise InvalidInputError("--kind fixed requires --tau2")
        value = fpp_fixed_tau_asymptotic(args.n, args.rho, args.tau2, args.p, args.r)
    elif args.kind == "adaptive":
        value = fpp_adaptive_asymptotic(args.n, args.p, args.r)
    else:
        value = fpp_type2_asymptotic(args.p, args.r, args.n)
    _emit("kind", args.kind)
    _emit("fpp", value)
    return 0


def _cmd_simulate(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        text = fh.read()
    # Re-use the file grammar for overrides: each --set KEY=VALUE appends a
    # line, so flags land after (and thus override or extend) file keys.
    override_lines = list(args.set or [])
    if args.reps is not None:
        override_lines.append(f"reps = {args.reps}")
    seed = getattr(args, "seed", None)
    if seed is None and os.environ.get("SEED") is not None:
        seed = _seed_from(args)
    if seed is not None:
        override_lines.append(f"seed = {seed}")
    if override_lines:
        mapping = _merge_overrides(text, override_lines)
        cfg = harness.config_from_mapping(mapping)
    else:
        cfg = harness.config_from_text(text)
    rows = harness.run_experiment(cfg)
    csv = harness.rows_to_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(csv)
        dest = args.out
    else:
        sys.stdout.write(csv)
        dest = "stdout"
    print(
        f"simulate: {cfg.experiment} -> {len(rows)} rows -> {dest} "
        f"(seed={cfg.master_seed})",
        file=sys.stderr,
    )
    return 0


def _merge_overrides(text: str, override_lines: list[str]) -> dict[str, list[str]]:
    """File mapping with flag overrides replacing same-named keys."""
    base = _mapping_from_text(text)
    extra = _mapping_from_text("\n".join(override_lines))
    base.update(extra)  # an overridden key is replaced wholesale, grids too
    return base


def _mapping_from_text(text: str) -> dict[str, list[str]]:
    values: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(
                f"config line {lineno}: expected 'key = value', got {raw!r}"
            )
        key, _, val = line.partition("=")
        values.setdefault(key.strip(), []).append(val.strip())
    return values


# --------------------------------------------------------------------------
# Parser assembly.
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="equicorr",
        description=(
            "Model selection for n mutually exclusive normal-mean "
            "hypotheses under equicorrelated noise."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cv = sub.add_parser("critical-value", help="frequentist critical value")
    cv.add_argument("--method", choices=("adhoc", "lrt"), required=True)
    cv.add_argument("--alpha", type=float, required=True)
    cv.add_argument("--n", type=int, required=True)
    cv.add_argument("--rho", type=float, required=True)
    cv.add_argument("--reps", type=int, default=100_000,
                    help="Monte Carlo size for --method lrt")
    cv.add_argument("--seed", type=int, default=None)
    cv.set_defaults(func=_cmd_critical_value)

    po = sub.add_parser("posterior", help="posterior model probabilities")
    src = po.add_mutually_exclusive_group(required=True)
    src.add_argument("--x", help="observations, comma or space separated")
    src.add_argument("--x-file", help="file of whitespace-separated observations")
    po.add_argument("--n", type=int, default=None,
                    help="expected number of channels (cross-checked)")
    po.add_argument("--rho", type=float, required=True)
    po.add_argument("--tau2", type=float, required=True)
    po.add_argument("--r", type=float, required=True)
    po.add_argument("--p", type=float, required=True,
                    help="acceptance threshold for the decision")
    po.add_argument("--verify", action="store_true",
                    help="cross-check against independent posterior routes")
    po.set_defaults(func=_cmd_posterior)

    t2 = sub.add_parser("tau2", help="least-conservative slab variance")
    t2.add_argument("--n", type=int, required=True)
    t2.add_argument("--rho", type=float, required=True)
    t2.add_argument("--p", type=float, required=True)
    t2.add_argument("--r", type=float, required=True)
    t2.set_defaults(func=_cmd_tau2)

    ks = sub.add_parser("kstar", help="fixed-point constant of the MLE rate")
    ks.add_argument("--p", type=float, required=True)
    ks.add_argument("--r", type=float, required=True)
    ks.set_defaults(func=_cmd_kstar)

    th = sub.add_parser("threshold", help="threshold attaining a target FPP")
    th.add_argument("--fpp", type=float, required=True)
    th.add_argument("--r", type=float, required=True)
    th.add_argument("--n", type=int, required=True)
    th.add_argument("--verify", action="store_true",
                    help="check the round trip through the FPP formula")
    th.set_defaults(func=_cmd_threshold)

    fa = sub.add_parser("fpp-asymptotic", help="closed-form FPP approximations")
    fa.add_argument("--kind", choices=("fixed", "adaptive", "type2"),
                    required=True)
    fa.add_argument("--n", type=int, required=True)
    fa.add_argument("--p", type=float, required=True)
    fa.add_argument("--r", type=float, required=True)
    fa.add_argument("--rho", type=float, default=0.0)
    fa.add_argument("--tau2", type=float, default=None)
    fa.set_defaults(func=_cmd_fpp_asymptotic)

    sim = sub.add_parser("simulate", help="run a configured experiment to CSV")
    sim.add_argument("--config", required=True, help="experiment config file")
    sim.add_argument("--out", default=None, help="CSV path (default stdout)")
    sim.add_argument("--seed", type=int, default=None,
                     help="override the config seed (SEED env as fallback)")
    sim.add_argument("--reps", type=int, default=None,
                     help="override the config replicate count")
    sim.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override any config key (repeatable)")
    sim.set_defaults(func=_cmd_simulate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
