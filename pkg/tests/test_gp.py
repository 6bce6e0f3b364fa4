"""Geometric-programming route for the echo-based scheme: variable maps,
condensation weights, inner barrier solver, outer loop, lattice oracle.

The scipy reference solves in this file are the independent second route for
the inner solver; the library itself never imports scipy.
"""

import numpy as np
import pytest
from scipy.optimize import minimize

from dce.errors import Infeasible, NotConverged, Stalled
from dce.gp import (
    GpState,
    X_NAMES,
    budget_posynomials,
    condense,
    condensed_ratio,
    denominator_exponents,
    from_gp_variables,
    grid_oracle_nonreciprocal,
    initial_feasible_state,
    monomial,
    quality_score,
    ratio_parts,
    solve_inner_gp,
    theta_exponents,
    to_gp_variables,
)
from dce.nmse import nmse_l_nonreciprocal_approx
from dce.params import default_params, nonreciprocal_allocation


def _random_alloc(rng):
    return nonreciprocal_allocation(
        float(rng.uniform(1.0, 100.0)),
        float(rng.uniform(1.0, 100.0)),
        float(rng.uniform(1.0, 100.0)),
        float(rng.uniform(1.0, 100.0)),
        float(rng.uniform(0.0, 5.0)),
    )


# ---------------------------------------------------------------------------
# variable maps
# ---------------------------------------------------------------------------

def test_to_gp_variables_frozen_point(defaults):
    # direct-substitution oracle frozen before implementation
    st = to_gp_variables(defaults, nonreciprocal_allocation(10, 10, 10, 10, 0.5))
    assert st.t == pytest.approx(1.70421511627907, rel=1e-12)
    assert st.t0 == pytest.approx(3.5)
    assert st.t1 == pytest.approx(5.0 / 14.0)
    assert st.t2 == pytest.approx(5.0)
    assert st.t3 == pytest.approx(2.5)
    assert st.t4 == pytest.approx(2.0)


def test_to_gp_variables_degenerate_corners(defaults):
    no_probe = to_gp_variables(defaults, nonreciprocal_allocation(0, 1, 1, 1, 0))
    assert no_probe.t0 == pytest.approx(defaults.var_w)
    assert no_probe.t4 == pytest.approx(defaults.var_v)


def test_variable_map_round_trip(defaults, rng):
    for _ in range(100):
        alloc = _random_alloc(rng)
        back = from_gp_variables(defaults, to_gp_variables(defaults, alloc))
        for field in ("e_0", "e_1", "e_2", "e_3", "var_a"):
            np.testing.assert_allclose(getattr(back, field),
                                       getattr(alloc, field), rtol=1e-12)


def test_from_gp_variables_rejects_sub_noise_levels(defaults):
    with pytest.raises(ValueError):
        from_gp_variables(defaults, GpState(1.0, defaults.var_w / 2, 1, 1, 1,
                                            defaults.var_v))


def test_gp_state_validation():
    with pytest.raises(ValueError):
        GpState(1.0, -1.0, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        GpState(np.nan, 1.0, 1.0, 1.0, 1.0, 1.0)


def test_quality_score_activates_ratio(defaults, rng):
    """t from quality_score makes numer(x) == denom(x) exactly."""
    numer, denom = ratio_parts(defaults)
    for _ in range(50):
        alloc = _random_alloc(rng)
        x = to_gp_variables(defaults, alloc).x()
        np.testing.assert_allclose(numer.value(x), denom.value(x), rtol=1e-10)


# ---------------------------------------------------------------------------
# condensation surrogate
# ---------------------------------------------------------------------------

def test_theta_exponents_frozen_point(defaults):
    ones = GpState(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    assert theta_exponents(defaults, ones) == pytest.approx(
        {"t": 0.5, "t0": 0.5, "t1": 0.75, "t2": 0.625, "t3": 0.5, "t4": 0.0})


def test_theta_exponents_in_unit_interval(defaults, rng):
    for _ in range(200):
        x = rng.uniform(0.05, 20.0, size=6)
        a = denominator_exponents(defaults, x)
        assert np.all(a >= 0.0) and np.all(a <= 1.0)


def test_theta_concentrates_when_t3_vanishes(defaults):
    thin = GpState(1.0, 1.0, 1.0, 1.0, 1e-14, 1.0)
    a = theta_exponents(defaults, thin)
    assert a["t3"] == pytest.approx(0.0, abs=1e-12)
    assert a["t"] == pytest.approx(1.0, abs=1e-12)


def test_condensed_ratio_tangent_and_conservative(defaults, rng):
    """Equal value at the expansion point; never below the true ratio
    elsewhere (so feasibility transfers to the original constraint)."""
    numer, denom = ratio_parts(defaults)
    for _ in range(20):
        x_bar = rng.uniform(0.1, 10.0, size=6)
        hat = condensed_ratio(defaults, x_bar)
        true_bar = numer.value(x_bar) / denom.value(x_bar)
        np.testing.assert_allclose(hat.value(x_bar), true_bar, rtol=1e-10)
        for _ in range(500):
            x = x_bar * rng.uniform(0.2, 5.0, size=6)
            assert hat.value(x) >= numer.value(x) / denom.value(x) - 1e-12


def test_condensed_ratio_gradient_tangency(defaults, rng):
    """Central finite differences of log(hat) and log(true ratio) agree at
    the expansion point to 1e-6 in every coordinate."""
    numer, denom = ratio_parts(defaults)
    x_bar = rng.uniform(0.5, 3.0, size=6)
    hat = condensed_ratio(defaults, x_bar)
    h = 1e-6
    for k in range(6):
        up, dn = x_bar.copy(), x_bar.copy()
        up[k] *= 1 + h
        dn[k] *= 1 - h
        g_hat = (np.log(hat.value(up)) - np.log(hat.value(dn))) / (2 * h)
        g_true = (np.log(numer.value(up) / denom.value(up))
                  - np.log(numer.value(dn) / denom.value(dn))) / (2 * h)
        assert g_hat == pytest.approx(g_true, abs=1e-5)


# ---------------------------------------------------------------------------
# inner solver
# ---------------------------------------------------------------------------

def test_inner_solver_scalar_toy():
    x, info = solve_inner_gp([monomial(0.5, [-1.0])], [1.0], [3.0])
    assert x[0] == pytest.approx(0.5, abs=1e-6)
    assert info["kkt_residual"] <= 1e-8


def test_inner_solver_two_variable_toy():
    cons = [monomial(0.5, [-1.0, 0.0]), monomial(0.5, [0.0, -1.0])]
    x, _ = solve_inner_gp(cons, [1.0, 1.0], [2.0, 7.0])
    np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-5)


def test_inner_solver_input_validation():
    with pytest.raises(ValueError):
        solve_inner_gp([monomial(0.5, [-1.0])], [1.0], [-1.0])
    with pytest.raises(ValueError):
        solve_inner_gp([monomial(0.5, [-1.0])], [1.0, 2.0], [1.0])


def test_inner_solver_against_scipy_reference(defaults):
    """Second route: the same log-space program handed to SLSQP.  Objectives
    must agree to 1e-5 relative on a production-sized instance."""
    gamma = 0.1
    start = initial_feasible_state(defaults, gamma)
    constraints = ([condensed_ratio(defaults, start.x())]
                   + budget_posynomials(defaults, gamma))
    objective = np.array([-1.0, 0, 0, 0, 0, 0])
    x_mine, info = solve_inner_gp(constraints, objective, start.x())

    logs = [c.log_data() for c in constraints]

    def neg_log_t(y):
        return objective @ y

    cons_scipy = [
        {"type": "ineq",
         "fun": (lambda y, b=b, a=a:
                 -(np.log(np.exp(b + a @ y).sum())))}
        for b, a in logs
    ]
    ref = minimize(neg_log_t, np.log(start.x()), method="SLSQP",
                   constraints=cons_scipy,
                   options={"maxiter": 400, "ftol": 1e-12})
    assert ref.success
    np.testing.assert_allclose(np.log(info["objective"]), ref.fun, atol=1e-5)


def test_inner_solver_flags_unreachable_tolerance(defaults):
    """An absurd KKT tolerance cannot be met; the failure must carry the
    best iterate instead of silently returning it."""
    gamma = 0.1
    start = initial_feasible_state(defaults, gamma)
    constraints = ([condensed_ratio(defaults, start.x())]
                   + budget_posynomials(defaults, gamma))
    with pytest.raises(NotConverged) as err:
        solve_inner_gp(constraints, [-1.0, 0, 0, 0, 0, 0], start.x(),
                       kkt_tol=1e-300)
    x_best, info = err.value.best
    assert np.all(x_best > 0) and np.isfinite(info["kkt_residual"])


# ---------------------------------------------------------------------------
# outer loop
# ---------------------------------------------------------------------------

def test_condense_production_point():
    params = default_params(p_ave_db=25.0)
    sol = condense(params, 0.1)
    assert sol.trace.converged
    assert len(sol.trace.steps) <= 50
    objs = sol.trace.objectives()
    assert all(b <= a * (1 + 1e-9) for a, b in zip(objs, objs[1:]))
    assert abs(sol.trace.ratio_activity - 1.0) <= 1e-6
    assert sol.objective == pytest.approx(objs[-1])


def test_condense_beats_lattice():
    params = default_params(p_ave_db=25.0)
    sol = condense(params, 0.1)
    oracle_alloc = grid_oracle_nonreciprocal(params, 0.1, resolution=20)
    oracle_obj = nmse_l_nonreciprocal_approx(params, oracle_alloc)
    assert sol.objective <= oracle_obj * 1.02


def test_condense_fixed_point(defaults):
    """Restarting from the solved state terminates in at most two rounds."""
    sol = condense(defaults, 0.1)
    again = condense(defaults, 0.1, start=sol.state)
    assert len(again.trace.steps) <= 2
    assert again.objective == pytest.approx(sol.objective, rel=1e-6)


def test_condense_monotone_on_random_instances():
    rng = np.random.default_rng(47)
    done = 0
    while done < 8:
        params = default_params(p_ave_db=float(rng.uniform(10.0, 28.0)))
        gamma = float(rng.uniform(0.02, 0.5))
        try:
            sol = condense(params, gamma)
        except Infeasible:
            continue
        objs = sol.trace.objectives()
        assert all(b <= a * (1 + 1e-9) for a, b in zip(objs, objs[1:]))
        assert np.isfinite(sol.objective) and sol.objective > 0
        done += 1


def test_condense_detects_sabotaged_weights(defaults):
    """Deliberately wrong condensation weights must not produce a 'solution'."""
    sabotage = lambda x_bar: np.array([1.0, 0, 0, 0, 0, 0])
    with pytest.raises((Stalled, Infeasible, NotConverged)):
        condense(defaults, 0.1, _theta_fn=sabotage)


def test_initial_state_is_strictly_feasible(defaults):
    gamma = 0.1
    st = initial_feasible_state(defaults, gamma)
    for con in budget_posynomials(defaults, gamma):
        assert con.value(st.x()) <= 1.0 + 1e-12


# ---------------------------------------------------------------------------
# lattice oracle
# ---------------------------------------------------------------------------

def test_oracle_resolution_guard(defaults):
    with pytest.raises(ValueError):
        grid_oracle_nonreciprocal(defaults, 0.1, resolution=19)
    with pytest.raises(ValueError):
        grid_oracle_nonreciprocal(defaults, 0.1, jensen_variant="exact")


def test_oracle_nesting(defaults):
    """Doubling the resolution nests the lattice: the finer search can only
    match or improve the coarse one."""
    coarse = nmse_l_nonreciprocal_approx(
        defaults, grid_oracle_nonreciprocal(defaults, 0.1, resolution=20))
    fine = nmse_l_nonreciprocal_approx(
        defaults, grid_oracle_nonreciprocal(defaults, 0.1, resolution=40))
    assert fine <= coarse + 1e-15
