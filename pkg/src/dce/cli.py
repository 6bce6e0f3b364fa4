r"""Command-line interface.

Subcommands:

* ``alloc``  — solve the configured power-allocation problem, print one row.
* ``nmse``   — analytic + empirical NMSE for the solved allocation; with a
  comma-separated ``--tau-f`` list, sweep the forward training length at
  fixed total energy budgets (reciprocal scheme only).
* ``ser``    — data-phase symbol error rates with estimated channels.
* ``verify`` — self-check suite pitting the solvers against brute-force
  oracles and toy problems with known answers.

Exit codes: 0 success, 2 configuration problem, 3 infeasible problem,
4 unsupported geometry, 5 verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from typing import List, Optional, Sequence

import numpy as np

from .alloc_reciprocal import AllocProblem, grid_oracle_reciprocal, solve_reciprocal
from .config import (FORMATS, JENSEN_VARIANTS, ExperimentConfig,
                     load_config_file, parse_float_list)
from .errors import (ConfigError, Infeasible, InfeasibleGamma,
                     NoFeasiblePoint, NotConverged, Stalled,
                     UnsupportedGeometry)
from .gp import (Posynomial, condense, denominator_exponents,
                 grid_oracle_nonreciprocal, monomial, ratio_parts,
                 solve_inner_gp)
from .montecarlo import (DESK_SER_TRIALS, FULL_SER_TRIALS, jensen_oracle,
                         run_nmse_experiment, run_ser_experiment,
                         solve_allocation)
from .nmse import (check_gamma, gamma_bounds, nmse_l_nonreciprocal_approx,
                   nmse_lower_bound, nmse_u_reciprocal)
from .ostbc import verify_code_orthogonality
from .params import (NON_RECIPROCAL, RECIPROCAL, db_to_linear, default_params,
                     linear_to_db, nonreciprocal_allocation,
                     with_fixed_energy_budgets)
from .rng import make_rng
from .tables import ResultTable, strip_footer, write_table

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_GEOMETRY = 4
EXIT_VERIFY = 5


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="key=value config file; flags override it")
    sp.add_argument("--scheme", choices=(RECIPROCAL, NON_RECIPROCAL))
    sp.add_argument("--gamma", help="UR NMSE floor (linear); comma list sweeps")
    sp.add_argument("--pave-db", dest="pave_db",
                    help="average training power in dB; comma list sweeps")
    sp.add_argument("--pbar-t-db", dest="pbar_t_db", type=float,
                    help="transmitter power cap in dB")
    sp.add_argument("--pbar-l-db", dest="pbar_l_db", type=float,
                    help="legitimate-receiver power cap in dB")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tau-f", dest="tau_f",
                    help="forward training length; a comma list sweeps it (nmse)")
    sp.add_argument("--jensen-variant", dest="jensen_variant",
                    choices=JENSEN_VARIANTS)
    sp.add_argument("--out", help="output path (default: stdout)")
    sp.add_argument("--format", choices=FORMATS)
    sp.add_argument("--full-scale", dest="full_scale", action="store_true",
                    default=None, help="use publication-size trial counts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dce",
        description="Discriminatory channel estimation: training simulation, "
                    "power allocation, and verification tools.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, extra in (
            ("alloc", cmd_alloc, "solve the power allocation"),
            ("nmse", cmd_nmse, "analytic vs empirical estimation error"),
            ("ser", cmd_ser, "data-phase symbol error rates"),
            ("verify", cmd_verify, "run the self-check oracle suite")):
        sp = sub.add_parser(name, help=extra)
        _add_common(sp)
        if name == "ser":
            sp.add_argument("--modulation", type=int, choices=(4, 16, 64))
        sp.set_defaults(fn=fn)
    return parser


def _parse_tau_list(raw: Optional[str]) -> Optional[List[int]]:
    if raw is None:
        return None
    try:
        values = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"--tau-f expects integers, got {raw!r}") from exc
    if not values:
        raise ConfigError("--tau-f given but empty")
    return values


_OVERLAY_KEYS = ("scheme", "pbar_t_db", "pbar_l_db", "trials", "seed",
                 "jensen_variant", "modulation", "format", "out", "full_scale")
_SWEEP_FLAGS = ("gamma", "pave_db")


def effective_config(args: argparse.Namespace):
    cfg = load_config_file(args.config) if args.config else ExperimentConfig()
    for key in _OVERLAY_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    for key in _SWEEP_FLAGS:
        raw = getattr(args, key, None)
        if raw is not None:
            setattr(cfg, key, parse_float_list(key, raw))
    taus = _parse_tau_list(getattr(args, "tau_f", None))
    if taus is not None and len(taus) == 1:
        cfg.tau_f = taus[0]
        taus = None
    cfg.validate()
    return cfg, taus


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_alloc(cfg: ExperimentConfig, taus: Optional[List[int]]) -> int:
    if taus is not None:
        raise ConfigError("a --tau-f sweep only applies to the nmse command")
    if cfg.scheme == RECIPROCAL:
        table = ResultTable(["p_ave_db", "gamma", "er_db", "ef_db", "an_db",
                             "nmse_l", "nmse_u"])
    else:
        table = ResultTable(["p_ave_db", "gamma", "e0_db", "e1_db", "e2_db",
                             "e3_db", "an_db", "nmse_l", "nmse_u"])
    for gamma in cfg.gamma:
        for pave_db in cfg.pave_db:
            params = cfg.to_params(pave_db)
            alloc, nmse_l, nmse_u = solve_allocation(params, gamma, cfg.scheme,
                                                     cfg.jensen_variant)
            an_power = (params.n_t - params.n_l) * alloc.var_a
            if cfg.scheme == RECIPROCAL:
                table.add_row(pave_db, gamma, linear_to_db(alloc.e_r),
                              linear_to_db(alloc.e_f), linear_to_db(an_power),
                              nmse_l, nmse_u)
            else:
                table.add_row(pave_db, gamma, linear_to_db(alloc.e_0),
                              linear_to_db(alloc.e_1), linear_to_db(alloc.e_2),
                              linear_to_db(alloc.e_3), linear_to_db(an_power),
                              nmse_l, nmse_u)
    write_table(table, cfg.format, cfg.out)
    return EXIT_OK


def cmd_nmse(cfg: ExperimentConfig, taus: Optional[List[int]]) -> int:
    trials = cfg.trials if cfg.trials is not None else 1000
    if taus is not None and cfg.scheme != RECIPROCAL:
        raise ConfigError("the forward-length sweep exists only for the "
                          "reciprocal scheme (the other geometry pins it)")
    table = ResultTable(["scheme", "gamma", "p_ave_db", "tau_f",
                         "nmse_l_analytic", "nmse_l_empirical", "hw95_lr",
                         "nmse_u_analytic", "nmse_u_empirical", "hw95_ur",
                         "nmse_lower_bound", "trials", "resampled_trials"])
    for gamma in cfg.gamma:
        for pave_db in cfg.pave_db:
            params = cfg.to_params(pave_db)
            sweep = taus if taus is not None else [params.tau_f]
            for tau_f in sweep:
                p = (with_fixed_energy_budgets(params, tau_f)
                     if cfg.scheme == RECIPROCAL else params)
                alloc, nmse_l, nmse_u = solve_allocation(
                    p, gamma, cfg.scheme, cfg.jensen_variant)
                rep = run_nmse_experiment(p, alloc, trials=trials,
                                          seed=cfg.seed,
                                          jensen_variant=cfg.jensen_variant)
                table.add_row(cfg.scheme, gamma, pave_db, tau_f,
                              nmse_l, rep.empirical_lr, rep.half_width_95_lr,
                              nmse_u, rep.empirical_ur, rep.half_width_95_ur,
                              nmse_lower_bound(p, cfg.scheme), rep.trials,
                              rep.resampled_trials)
    write_table(table, cfg.format, cfg.out)
    return EXIT_OK


def cmd_ser(cfg: ExperimentConfig, taus: Optional[List[int]]) -> int:
    if taus is not None:
        raise ConfigError("a --tau-f sweep only applies to the nmse command")
    if cfg.full_scale:
        trials = FULL_SER_TRIALS
    elif cfg.trials is not None:
        trials = cfg.trials
    else:
        trials = DESK_SER_TRIALS
    table = ResultTable(["p_ave_db", "gamma", "ser_lr", "ser_ur", "trials"])
    for gamma in cfg.gamma:
        for pave_db in cfg.pave_db:
            params = cfg.to_params(pave_db)
            rep = run_ser_experiment(params, gamma, cfg.modulation,
                                     trials=trials, seed=cfg.seed,
                                     scheme=cfg.scheme,
                                     jensen_variant=cfg.jensen_variant)
            table.add_row(pave_db, gamma, rep.ser_lr, rep.ser_ur, rep.trials)
    write_table(table, cfg.format, cfg.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verification suite
# ---------------------------------------------------------------------------

def _check_block_code(cfg):
    rng = make_rng(cfg.seed)
    worst_code, worst_map = verify_code_orthogonality(rng)
    assert worst_code < 1e-10, f"code Gram deviates by {worst_code:.2e}"
    assert worst_map < 1e-8, f"dispersion map deviates by {worst_map:.2e}"
    return max(worst_code, worst_map), "worst Gram / dispersion-map residual"


def _check_toy_gps(cfg):
    # min 1/x subject to 2x <= 1  ->  x = 1/2
    x1, _ = solve_inner_gp([monomial(2.0, [1.0])], [-1.0], [0.1])
    assert abs(x1[0] - 0.5) < 1e-6, f"1-d toy optimum {x1[0]} != 0.5"
    # min 1/(xy) subject to x + y <= 1  ->  x = y = 1/2
    cons = [Posynomial(np.array([1.0, 1.0]), np.array([[1.0, 0.0], [0.0, 1.0]]))]
    x2, _ = solve_inner_gp(cons, [-1.0, -1.0], [0.2, 0.6])
    assert np.allclose(x2, [0.5, 0.5], atol=1e-5), f"2-d toy optimum {x2}"
    dev = max(abs(x1[0] - 0.5), float(np.max(np.abs(x2 - 0.5))))
    return dev, "distance from known toy optima"


def _check_tangency(cfg):
    params = default_params()
    rng = make_rng(cfg.seed + 1)
    _, denom = ratio_parts(params)
    worst_grad = 0.0
    worst_over = 0.0
    for _ in range(25):
        x_bar = np.exp(rng.uniform(-1.5, 3.0, size=6))
        a = denominator_exponents(params, x_bar)
        d_bar = denom.value(x_bar)
        scale = d_bar * float(np.prod(x_bar ** (-a)))
        # tangency of log denom: finite-difference gradient match
        for k in range(6):
            h = 1e-6
            xp = x_bar.copy(); xp[k] *= np.exp(h)
            xm = x_bar.copy(); xm[k] *= np.exp(-h)
            fd = (np.log(denom.value(xp)) - np.log(denom.value(xm))) / (2 * h)
            worst_grad = max(worst_grad, abs(fd - a[k]))
            assert abs(fd - a[k]) < 1e-4, f"log-gradient mismatch at {k}"
        # global under-estimation on random points
        pts = np.exp(rng.uniform(-2.0, 3.5, size=(400, 6)))
        hat = scale * np.prod(pts ** a[None, :], axis=1)
        true = (denom.coeffs[None, :]
                * np.prod(pts[:, None, :] ** denom.expo[None, :, :], axis=2)).sum(axis=1)
        worst_over = max(worst_over, float(np.max(hat / true - 1.0)))
        assert np.all(hat <= true * (1 + 1e-9)), "monomial exceeded the denominator"
    return worst_grad, f"worst log-gradient gap; over-estimation {worst_over:.2e}"


def _check_reciprocal_vs_oracle(cfg):
    rng = make_rng(cfg.seed + 2)
    params = default_params()
    worst = -np.inf
    for _ in range(4):
        p_ave_db = float(rng.uniform(12.0, 24.0))
        p = dataclasses.replace(params, p_ave=db_to_linear(p_ave_db))
        lo, hi = gamma_bounds(p, RECIPROCAL)
        gamma = float(np.exp(rng.uniform(np.log(lo * 1.3), np.log(hi * 0.5))))
        problem = AllocProblem(p, gamma)
        sol = solve_reciprocal(problem)
        oracle = grid_oracle_reciprocal(problem, 60)
        worst = max(worst, sol.objective / oracle.objective - 1.0)
        assert sol.objective <= oracle.objective * (1 + 1e-3), (
            f"solver {sol.objective} lost to lattice {oracle.objective}")
        nmse_u = nmse_u_reciprocal(p, sol.alloc.e_f, sol.alloc.var_a)
        assert nmse_u >= gamma * (1 - 1e-9), "UR floor violated"
    return worst, "worst objective excess over the 60-point lattice"


def _check_condensation(cfg):
    params = default_params()
    gamma = 0.1
    sol = condense(params, gamma)
    objs = sol.trace.objectives()
    assert all(b <= a * (1 + 1e-9) for a, b in zip(objs, objs[1:])), (
        "objective not monotone")
    assert sol.trace.ratio_activity <= 1 + 1e-6, "original ratio violated"
    oracle_alloc = grid_oracle_nonreciprocal(params, gamma, resolution=20)
    oracle_obj = nmse_l_nonreciprocal_approx(params, oracle_alloc)
    mine = nmse_l_nonreciprocal_approx(params, sol.alloc)
    assert mine <= oracle_obj * 1.02, (
        f"condensation {mine} worse than lattice {oracle_obj}")
    return mine / oracle_obj - 1.0, "objective excess over the 20-point lattice"


def _check_negative_control(cfg):
    params = default_params()
    sabotage = lambda x_bar: np.array([1.0, 0, 0, 0, 0, 0])
    try:
        condense(params, 0.1, _theta_fn=sabotage)
    except (Stalled, Infeasible, NotConverged) as exc:
        return 0.0, f"sabotaged weights raised {type(exc).__name__}"
    raise AssertionError(
        "deliberately wrong condensation weights were not detected")


def _check_jensen(cfg):
    params = default_params()
    alloc = nonreciprocal_allocation(10.0, 10.0, 10.0, 10.0, 0.5)
    report = jensen_oracle(params, alloc, trials=10000, seed=cfg.seed)
    assert 0.0 < report["empirical"] < 1.0, "spectral factor out of range"
    dead = nonreciprocal_allocation(10.0, 0.0, 10.0, 10.0, 0.5)
    dead_factor = jensen_oracle(params, dead, trials=10000)["empirical"]
    assert dead_factor == 0.0, "factor must vanish without a round trip"
    return dead_factor, f"factor {report['empirical']:.4f} in (0,1); 0 without echo"


def _check_jensen_adjudication(cfg):
    params = cfg.to_params(cfg.pave_db[0])
    gamma = cfg.gamma[0]
    alloc, _, _ = solve_allocation(params, gamma, NON_RECIPROCAL,
                                   cfg.jensen_variant)
    trials = max(cfg.trials or 0, 10000)
    report = jensen_oracle(params, alloc, trials=trials, seed=cfg.seed)
    gaps = {v: abs(report["empirical"] - report[v]) for v in JENSEN_VARIANTS}
    detail = (f"empirical {report['empirical']:.4f}; "
              + "; ".join(f"{v} off by {gaps[v]:.4f}" for v in JENSEN_VARIANTS)
              + f"; closer: {report['closer']}")
    return gaps[report["closer"]], detail


def _check_determinism(cfg):
    params = default_params()
    sol = solve_reciprocal(AllocProblem(params, 0.1))
    table = ResultTable(["er", "ef", "var_a", "objective"])
    table.add_row(sol.alloc.e_r, sol.alloc.e_f, sol.alloc.var_a, sol.objective)
    for fmt in FORMATS:
        first = table.render(fmt)
        second = table.render(fmt)
        assert strip_footer(first) == strip_footer(second), (
            f"{fmt} render is not deterministic")
    return 0.0, "renders byte-identical across repeated calls"


def _check_gamma_guard(cfg):
    params = default_params()
    for scheme, bad in ((RECIPROCAL, params.var_g * 1.5), (RECIPROCAL, 0.0),
                        (NON_RECIPROCAL, 1e-9)):
        try:
            check_gamma(params, bad, scheme)
        except InfeasibleGamma:
            continue
        raise AssertionError(f"gamma={bad} ({scheme}) should have been rejected")
    # below the enforceable floor the reciprocal problem is still solvable:
    # the floor is vacuous and the optimum drops reverse training and noise
    lo, _ = gamma_bounds(default_params(p_ave_db=10.0), RECIPROCAL)
    sol = solve_reciprocal(AllocProblem(default_params(p_ave_db=10.0), lo / 2.0))
    assert sol.alloc.e_r == 0.0 and sol.alloc.var_a == 0.0, \
        f"vacuous floor should zero reverse energy and noise, got {sol.alloc}"
    return 0.0, "bad floors rejected; vacuous floor still solvable"


def cmd_verify(cfg: ExperimentConfig, taus: Optional[List[int]]) -> int:
    checks = [
        ("block-code-orthogonality", _check_block_code),
        ("inner-gp-toy-problems", _check_toy_gps),
        ("condensation-tangency", _check_tangency),
        ("reciprocal-vs-lattice", _check_reciprocal_vs_oracle),
        ("condensation-vs-lattice", _check_condensation),
        ("wrong-weights-detected", _check_negative_control),
        ("spectral-surrogate-range", _check_jensen),
        ("jensen-adjudication", _check_jensen_adjudication),
        ("table-determinism", _check_determinism),
        ("floor-bounds-guard", _check_gamma_guard),
    ]
    table = ResultTable(["check", "status", "deviation", "detail"])
    failures = 0
    for name, fn in checks:
        try:
            deviation, detail = fn(cfg)
        except AssertionError as exc:
            failures += 1
            table.add_row(name, "fail", float("nan"), str(exc))
        except Exception as exc:  # noqa: BLE001 - report, keep checking
            failures += 1
            table.add_row(name, "fail", float("nan"),
                          f"unexpected {type(exc).__name__}: {exc}")
        else:
            table.add_row(name, "pass", deviation, detail)
    write_table(table, cfg.format, cfg.out)
    return EXIT_VERIFY if failures else EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, taus = effective_config(args)
        return args.fn(cfg, taus)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleGamma, Infeasible, NoFeasiblePoint) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except UnsupportedGeometry as exc:
        print(f"unsupported geometry: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (Stalled, NotConverged) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
