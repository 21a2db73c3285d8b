"""Command line front end.

Four subcommands: ``ladder`` tabulates the iterated protocol for one channel
setting, ``asymptotic-sweep`` and ``finite-sweep`` evaluate the interpolated
and uninterpolated figures of merit over a parameter grid, and ``validate``
cross-checks the independent computation routes against each other.

Output is delimited text with a schema tag so downstream consumers can check
they were handed the table they expect. Exit codes: 0 success, 2 bad usage,
3 infeasible target, 4 failed validation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from .bellcore import BellDiagonal, ChannelSpec, channel_bell_diagonal, ree_rate_bound, werner
from .dejmps import IterationLadder, build_ladder, optimal_permutation
from .finitesize import (
    FiniteRunSpec,
    MemoryCapExceeded,
    joint_law_iterative,
    joint_law_markov,
    m_bounds,
    pairs_consumed_distribution,
)
from .interpolate import (
    max_fidelity_at_rate,
    max_rate_at_fidelity,
    protocol_family,
    single_point_result,
)
from .mc_oracle import TrialConfig, simulate_consumption, simulate_runs

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_VALIDATION = 4

LADDER_COLUMNS = ("k", "F", "t", "s", "R", "mu", "sigma2")
ASYMPTOTIC_COLUMNS = (
    "param", "F_initial", "rate_interpolated", "pair_i", "pair_j", "p_i",
    "rate_uninterpolated", "rate_ree_bound", "status",
)
FINITE_COLUMNS = (
    "param", "F_initial", "N", "lower_interpolated", "upper_interpolated",
    "lower_uninterpolated", "upper_uninterpolated", "rate_interpolated",
    "rate_uninterpolated", "status",
)
DEFAULT_N_GRID = ",".join(str(2 ** e) for e in range(3, 13))


class UsageError(Exception):
    pass


class InfeasibleError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _render_rows(columns, rows, fmt: str, schema: str) -> str:
    if fmt == "csv":
        lines = [f"# schema: {schema}", ",".join(columns)]
        for row in rows:
            lines.append(",".join(_format_cell(row.get(c)) for c in columns))
        return "\n".join(lines) + "\n"
    payload = {"schema": schema, "rows": [{c: row.get(c) for c in columns} for row in rows]}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_out(path: str, text: str):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _add_source_args(sub: argparse.ArgumentParser, many: bool):
    kind = _float_list if many else float
    noun = "comma-separated values" if many else "value"
    sub.add_argument("--channel", choices=("depolarising", "dephasing", "pauli", "amplitude-damping"),
                     help="noise channel producing the initial pairs")
    sub.add_argument("--p", type=kind, help=f"channel mixing strength, {noun}")
    sub.add_argument("--gamma", type=kind, help=f"damping strength, {noun}")
    sub.add_argument("--f-initial", type=kind, dest="f_initial",
                     help=f"initial Werner fidelity, {noun}")
    sub.add_argument("--werner-f", type=kind, dest="werner_f",
                     help="alias of --f-initial")
    sub.add_argument("--w-z", type=float, default=1.0, help="pauli channel Z weight")
    sub.add_argument("--w-x", type=float, default=0.0, help="pauli channel X weight")
    sub.add_argument("--w-y", type=float, default=0.0, help="pauli channel Y weight")


def _add_output_args(sub: argparse.ArgumentParser):
    sub.add_argument("--out", default="-", help="output path, - for stdout")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="purinterp",
        description="optimal interpolation of iterated entanglement purification")
    parser.add_argument("--config", help="key=value file of default options")
    subs = parser.add_subparsers(dest="command", required=True)

    lad = subs.add_parser("ladder", help="tabulate the iterated protocol levels")
    _add_source_args(lad, many=False)
    _add_output_args(lad)
    lad.add_argument("--kmax", type=int, default=10, help="iteration depth")
    lad.set_defaults(func=_cmd_ladder)

    asy = subs.add_parser("asymptotic-sweep", help="rate and fidelity optima over a grid")
    _add_source_args(asy, many=True)
    _add_output_args(asy)
    asy.add_argument("--f-target", type=float, default=0.9, dest="f_target")
    asy.add_argument("--kmax", type=int, default=25)
    asy.set_defaults(func=_cmd_asymptotic)

    fin = subs.add_parser("finite-sweep", help="certified output bounds over pool sizes")
    _add_source_args(fin, many=True)
    _add_output_args(fin)
    fin.add_argument("--f-target", type=float, default=0.9, dest="f_target")
    fin.add_argument("--kmax", type=int, default=25)
    fin.add_argument("--epsilon", type=float, default=1e-7,
                     help="infidelity budget of the certificate")
    fin.add_argument("--mode", choices=("global", "per-pair"), default="global")
    fin.add_argument("--method", choices=("markov", "iterative"), default="iterative")
    fin.add_argument("--n-grid", type=_int_list, default=_int_list(DEFAULT_N_GRID),
                     dest="n_grid", help="pool sizes, comma separated")
    fin.add_argument("--workers", type=int, default=1)
    fin.add_argument("--state-cap", type=int, default=10_000_000, dest="state_cap")
    fin.set_defaults(func=_cmd_finite)

    val = subs.add_parser("validate", help="cross-check the independent computation routes")
    _add_output_args(val)
    val.add_argument("--trials", type=int, default=200_000)
    val.add_argument("--seed", type=int, default=12345)
    val.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    val.set_defaults(func=_cmd_validate)
    return parser


def _inject_config(argv: list[str]) -> list[str]:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return argv
    entries: list[str] = []
    with open(known.config, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{known.config}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            entries += [f"--{key.strip().replace('_', '-')}", value.strip()]
    # config entries go before explicit flags so the command line wins
    if rest and not rest[0].startswith("-"):
        return [rest[0], *entries, *rest[1:]]
    return [*entries, *rest]


# ---------------------------------------------------------------------------
# parameter sweeps


def _sweep_source(args) -> tuple[str, str, list[float]]:
    """Resolve (channel kind, swept flag, values) from the source arguments."""
    given = [n for n in ("f_initial", "werner_f", "p", "gamma")
             if getattr(args, n) is not None]
    if len(given) != 1:
        raise UsageError("give exactly one of --f-initial/--werner-f/--p/--gamma")
    source = given[0]
    values = getattr(args, source)
    if not isinstance(values, list):
        values = [values]
    if not values:
        raise UsageError(f"--{source.replace('_', '-')} lists no values")
    kind = args.channel.replace("-", "_") if args.channel else None
    if source in ("f_initial", "werner_f"):
        if kind not in (None, "depolarising"):
            raise UsageError("--f-initial fixes the state only for the depolarising channel")
        kind = "depolarising"
    elif source == "gamma":
        if kind not in (None, "amplitude_damping"):
            raise UsageError("--gamma applies to the amplitude-damping channel")
        kind = "amplitude_damping"
    else:
        if kind is None:
            kind = "depolarising"
        if kind == "amplitude_damping":
            raise UsageError("amplitude damping is parameterised by --gamma, not --p")
    return kind, source, values


def _initial_state(kind: str, source: str, value: float, args) -> BellDiagonal:
    if source in ("f_initial", "werner_f"):
        return werner(value)
    if kind == "depolarising":
        return channel_bell_diagonal(ChannelSpec.depolarising(value))
    if kind == "dephasing":
        return channel_bell_diagonal(ChannelSpec.dephasing(value))
    if kind == "pauli":
        return channel_bell_diagonal(ChannelSpec.pauli(value, args.w_z, args.w_x, args.w_y))
    return channel_bell_diagonal(ChannelSpec.amplitude_damping(value))


def _check_target(f_target: float):
    if not 0.5 < f_target <= 1.0:
        raise InfeasibleError(f"target fidelity {f_target} outside (1/2, 1]")


class _ParamContext:
    """Everything derived from one swept parameter value."""

    def __init__(self, kind, source, value, args):
        self.value = value
        state = optimal_permutation(_initial_state(kind, source, value, args))
        self.F0 = state.a
        self.ladder = None
        if self.F0 > 0.5:
            self.ladder = build_ladder(state, args.kmax)
            self.family = protocol_family(self.ladder)
            self.reachable = any(pt.fidelity >= args.f_target for pt in self.family)
        else:
            self.reachable = False
        if self.reachable:
            if args.f_target <= self.family[0].fidelity:
                self.result = single_point_result(self.family[0])
            else:
                self.result = max_rate_at_fidelity(self.family, args.f_target)
            self.k_star = next(lv.k for lv in self.ladder.improving_levels()
                               if lv.F >= args.f_target)


def _cmd_ladder(args) -> int:
    kind, source, values = _sweep_source(args)
    if len(values) != 1:
        raise UsageError("ladder takes a single parameter value")
    state = optimal_permutation(_initial_state(kind, source, values[0], args))
    if state.a <= 0.5:
        raise InfeasibleError(f"initial fidelity {state.a} is not above 1/2")
    ladder = build_ladder(state, args.kmax)
    rows = []
    for lv in ladder:
        rows.append({"k": lv.k, "F": lv.F, "t": lv.t, "s": lv.s, "R": lv.R,
                     "mu": lv.mu, "sigma2": lv.sigma2})
    _write_out(args.out, _render_rows(LADDER_COLUMNS, rows, args.format,
                                      "purinterp.ladder.v1"))
    return EXIT_OK


def _cmd_asymptotic(args) -> int:
    _check_target(args.f_target)
    kind, source, values = _sweep_source(args)
    rows = []
    for value in values:
        ctx = _ParamContext(kind, source, value, args)
        row = {c: None for c in ASYMPTOTIC_COLUMNS}
        row["param"] = value
        row["F_initial"] = ctx.F0
        if not ctx.reachable:
            row["status"] = "unreachable"
        else:
            res = ctx.result
            row["rate_interpolated"] = res.achieved_rate
            row["pair_i"] = res.pair[0]
            row["pair_j"] = res.pair[1]
            row["p_i"] = res.p_i
            row["rate_uninterpolated"] = ctx.ladder[ctx.k_star].R
            row["rate_ree_bound"] = ree_rate_bound(ctx.F0, args.f_target)
            row["status"] = "ok"
        rows.append(row)
    _write_out(args.out, _render_rows(ASYMPTOTIC_COLUMNS, rows, args.format,
                                      "purinterp.asymptotic-sweep.v1"))
    if all(r["status"] == "unreachable" for r in rows):
        print("purinterp: target fidelity unreachable for every parameter", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _finite_row(ctx: _ParamContext, N: int, args) -> dict:
    row = {c: None for c in FINITE_COLUMNS}
    row["param"] = ctx.value
    row["F_initial"] = ctx.F0
    row["N"] = N
    if not ctx.reachable:
        row["status"] = "unreachable"
        return row
    mode = args.mode.replace("-", "_")
    res = ctx.result
    row["rate_interpolated"] = res.achieved_rate
    row["rate_uninterpolated"] = ctx.ladder[ctx.k_star].R
    spec_i = FiniteRunSpec(N=N, pair=res.pair, p_i=res.p_i,
                           epsilon_tilde=args.epsilon, mode=mode)
    spec_b = FiniteRunSpec(N=N, pair=(ctx.k_star, ctx.k_star), p_i=1.0,
                           epsilon_tilde=args.epsilon, mode=mode,
                           fidelities=(args.f_target, args.f_target),
                           F_prime=args.f_target)
    try:
        if args.method == "markov":
            tab_i = joint_law_markov(spec_i, ctx.ladder, state_cap=args.state_cap)
            tab_b = joint_law_markov(spec_b, ctx.ladder, state_cap=args.state_cap)
        else:
            tab_i = joint_law_iterative(spec_i, ctx.ladder)
            tab_b = joint_law_iterative(spec_b, ctx.ladder)
    except MemoryCapExceeded:
        row["status"] = "state-cap-exceeded"
        return row
    mb_i = m_bounds(spec_i, tab_i, ctx.ladder)
    mb_b = m_bounds(spec_b, tab_b, ctx.ladder)
    row["lower_interpolated"] = mb_i.lower_general / N
    row["upper_interpolated"] = mb_i.upper / N
    row["lower_uninterpolated"] = mb_b.lower_uninterpolated / N
    row["upper_uninterpolated"] = mb_b.upper / N
    row["status"] = "ok"
    return row


def _cmd_finite(args) -> int:
    _check_target(args.f_target)
    if not 0.0 < args.epsilon < 1.0:
        raise UsageError(f"--epsilon {args.epsilon} outside (0, 1)")
    if any(n < 1 for n in args.n_grid):
        raise UsageError("--n-grid entries must be positive")
    kind, source, values = _sweep_source(args)
    contexts = [_ParamContext(kind, source, v, args) for v in values]
    tasks = [(ctx, N) for ctx in contexts for N in args.n_grid]
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(lambda t: _finite_row(t[0], t[1], args), tasks))
    else:
        rows = [_finite_row(ctx, N, args) for ctx, N in tasks]
    _write_out(args.out, _render_rows(FINITE_COLUMNS, rows, args.format,
                                      "purinterp.finite-sweep.v1"))
    if all(r["status"] == "unreachable" for r in rows):
        print("purinterp: target fidelity unreachable for every parameter", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


# ---------------------------------------------------------------------------
# validation


def _perturb_level1(ladder: IterationLadder) -> IterationLadder:
    levels = list(ladder.levels)
    levels[1] = replace(levels[1], t=levels[1].t * (1.0 + 1e-3))
    return IterationLadder(levels=tuple(levels), truncated=ladder.truncated,
                           truncation_reason=ladder.truncation_reason)


def _cmd_validate(args) -> int:
    checks = []
    ladder = build_ladder(werner(0.7), 6)
    markov_ladder = _perturb_level1(ladder) if args.inject_fault else ladder

    worst = 0.0
    for pair in ((0, 1), (1, 2), (2, 3)):
        for p in (0.0, 0.5, 1.0):
            for N in (8, 31, 64):
                spec = FiniteRunSpec(N=N, pair=pair, p_i=p, epsilon_tilde=1e-7)
                a = joint_law_markov(spec, markov_ladder)
                b = joint_law_iterative(spec, ladder)
                if a.T:
                    worst = max(worst,
                                float(abs(a.joint_i - b.joint_i).max()),
                                float(abs(a.joint_j - b.joint_j).max()))
    checks.append({"name": "markov-vs-iterative", "passed": worst <= 1e-9,
                   "detail": f"max row difference {worst:.3e}"})

    cfg = TrialConfig(trials=args.trials, seed=args.seed)
    spec = FiniteRunSpec(N=40, pair=(1, 2), p_i=0.5, epsilon_tilde=1e-7)
    law = simulate_runs(spec, ladder, 5, cfg)
    tab = joint_law_iterative(spec, ladder)
    zs = [abs(law.success_freq - tab.success_prob(5)) / law.se_success]
    for k in spec.pair:
        zs.append(abs(law.joint_freq[k] - tab.joint_prob(5, k)) / law.se_joint[k])
    checks.append({"name": "mc-joint-law", "passed": max(zs) <= 3.0,
                   "detail": f"max z-score {max(zs):.2f} over {args.trials} trials"})

    zs = []
    for k, m_prime in ((1, 3), (2, 2)):
        emp = simulate_consumption(ladder, k, m_prime, cfg)
        ex = pairs_consumed_distribution(ladder, k, m_prime)
        zs.append(abs(emp.mean - ex.mean()) / emp.se_mean)
        zs.append(abs(emp.variance - ex.variance()) / emp.se_variance)
    checks.append({"name": "mc-consumption", "passed": max(zs) <= 3.0,
                   "detail": f"max z-score {max(zs):.2f} over {args.trials} trials"})

    family = protocol_family(ladder)
    worst_rt = 0.0
    endpoint_ok = True
    for pt in family:
        got = max_rate_at_fidelity(family, pt.fidelity)
        endpoint_ok = endpoint_ok and got.achieved_rate == pt.rate
    lo, hi = family[1].fidelity, family[-1].fidelity
    for frac in (0.1, 0.3, 0.5, 0.7, 0.9):
        ft = lo + frac * (hi - lo)
        res = max_rate_at_fidelity(family, ft)
        back = max_fidelity_at_rate(family, res.achieved_rate)
        worst_rt = max(worst_rt, abs(back.achieved_fidelity - ft))
    ree_drift = abs(ree_rate_bound(0.75, 0.9) * ree_rate_bound(0.9, 0.75) - 1.0)
    passed = endpoint_ok and worst_rt <= 1e-9 and ree_drift <= 1e-12
    checks.append({"name": "optimizer-identities", "passed": passed,
                   "detail": f"roundtrip drift {worst_rt:.3e}, endpoint exactness "
                             f"{endpoint_ok}, bound reciprocity drift {ree_drift:.3e}"})

    all_passed = all(c["passed"] for c in checks)
    report = {"schema": "purinterp.validate.v1", "passed": all_passed, "checks": checks}
    _write_out(args.out, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if all_passed else EXIT_VALIDATION


def main(argv: list[str] | None = None) -> int:
    raw = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        argv_full = _inject_config(raw)
    except (OSError, UsageError) as e:
        print(f"purinterp: {e}", file=sys.stderr)
        return EXIT_USAGE
    parser = _build_parser()
    try:
        args = parser.parse_args(argv_full)
    except SystemExit as e:
        return int(e.code) if e.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as e:
        print(f"purinterp: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as e:
        print(f"purinterp: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
