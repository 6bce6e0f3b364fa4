"""LMMSE estimators: closed-form error variances, empirical agreement,
optimality against alternative linear filters, orthogonality of errors."""

import numpy as np
import pytest

from dce.estimators import (
    downlink_beta,
    jensen_factor,
    lr_effective_noise_reciprocal,
    lr_estimate_nonreciprocal,
    lr_estimate_reciprocal,
    spd_solve,
    tx_error_var_reciprocal,
    tx_error_var_uplink,
    tx_estimate_downlink,
    tx_estimate_reciprocal,
    tx_estimate_uplink,
    ur_estimate,
)
from dce.errors import SingularRegressor
from dce.params import (
    NON_RECIPROCAL,
    RECIPROCAL,
    default_params,
    nonreciprocal_allocation,
    reciprocal_allocation,
)
from dce.rng import complex_gaussian, make_rng
from dce.training import (
    forward_training,
    reverse_training,
    round_trip_training,
    sample_channels,
)

TRIALS = 10000


def _empirical_mse(run_one, trials=TRIALS, seed=0):
    rng = make_rng(seed)
    acc = 0.0
    for _ in range(trials):
        est, truth = run_one(rng)
        acc += np.mean(np.abs(est - truth) ** 2)
    return acc / trials


# ---------------------------------------------------------------------------
# transmitter-side, reciprocal
# ---------------------------------------------------------------------------

def test_tx_reciprocal_zero_energy(defaults, rng):
    ch = sample_channels(defaults, RECIPROCAL, rng)
    sig = reverse_training(defaults, reciprocal_allocation(0.0, 1.0), ch, rng)
    out = tx_estimate_reciprocal(sig.received["tx"], defaults, 0.0)
    np.testing.assert_array_equal(out.estimate, 0.0)  # prior mean
    assert out.error_var == pytest.approx(defaults.var_h)


def test_tx_reciprocal_error_variance_formula(defaults):
    # unit variances, n_l=2, e_r=2: (1/1 + 2/2)^{-1} = 0.5
    assert tx_error_var_reciprocal(defaults, 2.0) == pytest.approx(0.5)


def test_tx_reciprocal_empirical_agreement(defaults):
    alloc = reciprocal_allocation(2.0, 4.0)

    def one(rng):
        ch = sample_channels(defaults, RECIPROCAL, rng)
        sig = reverse_training(defaults, alloc, ch, rng)
        return tx_estimate_reciprocal(sig.received["tx"], defaults,
                                      alloc.e_r).estimate, ch.h_d

    assert _empirical_mse(one) == pytest.approx(0.5, rel=0.02)


def test_tx_reciprocal_negative_energy_rejected(defaults):
    with pytest.raises(ValueError):
        tx_estimate_reciprocal(np.zeros((2, 4), dtype=complex), defaults, -1.0)


# ---------------------------------------------------------------------------
# LR, reciprocal
# ---------------------------------------------------------------------------

def test_lr_effective_noise_example(defaults):
    # e_r=2 gives transmitter error 0.5; AN leaks (4-2)*1*0.5, plus var_w=1
    alloc = reciprocal_allocation(2.0, 4.0, var_a=1.0)
    assert lr_effective_noise_reciprocal(defaults, alloc) == pytest.approx(2.0)


def test_lr_effective_noise_perfect_reverse_limit(defaults):
    """e_r -> inf nulls the AN leakage entirely, leaving just var_w."""
    alloc = reciprocal_allocation(1e12, 4.0, var_a=5.0)
    assert lr_effective_noise_reciprocal(defaults, alloc) == pytest.approx(
        defaults.var_w, rel=1e-9)


def test_lr_reciprocal_no_an_agreement(defaults):
    alloc = reciprocal_allocation(0.0, 4.0, var_a=0.0)

    def one(rng):
        ch = sample_channels(defaults, RECIPROCAL, rng)
        sig = forward_training(defaults, alloc, ch.h_d, ch, rng)
        return lr_estimate_reciprocal(sig.received["lr"], defaults,
                                      alloc).estimate, ch.h_d

    mse = _empirical_mse(one)
    assert mse == pytest.approx(0.5, rel=0.02)  # (1/1 + 4/4)^{-1}


def test_lr_reciprocal_with_an_agreement(defaults):
    """Estimator under AN leakage: analytic error matches Monte Carlo (2%)."""
    alloc = reciprocal_allocation(2.0, 4.0, var_a=1.0)
    analytic = 1.0 / (1.0 / 1.0 + (4.0 / 4.0) / 2.0)  # 2/3

    def one(rng):
        ch = sample_channels(defaults, RECIPROCAL, rng)
        tx_sig = reverse_training(defaults, alloc, ch, rng)
        h_hat = tx_estimate_reciprocal(tx_sig.received["tx"], defaults,
                                       alloc.e_r).estimate
        fwd = forward_training(defaults, alloc, h_hat, ch, rng)
        return lr_estimate_reciprocal(fwd.received["lr"], defaults,
                                      alloc).estimate, ch.h_d

    assert _empirical_mse(one) == pytest.approx(analytic, rel=0.02)


# ---------------------------------------------------------------------------
# UR
# ---------------------------------------------------------------------------

def test_ur_error_variance_formulas(defaults):
    no_an = reciprocal_allocation(0.0, 4.0, var_a=0.0)
    with_an = reciprocal_allocation(0.0, 4.0, var_a=1.0)
    rng = make_rng(0)
    y = complex_gaussian(rng, (defaults.tau_f, defaults.n_u))
    assert ur_estimate(y, defaults, no_an).error_var == pytest.approx(0.5)
    # AN raises the UR's noise floor to (4-2)*1*1 + 1 = 3: (1 + (4/4)/3)^{-1}
    assert ur_estimate(y, defaults, with_an).error_var == pytest.approx(0.75)


def test_ur_empirical_agreement(defaults):
    alloc = reciprocal_allocation(2.0, 4.0, var_a=1.0)

    def one(rng):
        ch = sample_channels(defaults, RECIPROCAL, rng)
        tx_sig = reverse_training(defaults, alloc, ch, rng)
        h_hat = tx_estimate_reciprocal(tx_sig.received["tx"], defaults,
                                       alloc.e_r).estimate
        fwd = forward_training(defaults, alloc, h_hat, ch, rng)
        return ur_estimate(fwd.received["ur"], defaults, alloc).estimate, ch.g

    assert _empirical_mse(one) == pytest.approx(0.75, rel=0.02)


# ---------------------------------------------------------------------------
# transmitter-side, non-reciprocal
# ---------------------------------------------------------------------------

def test_tx_uplink_formulas(defaults, rng):
    assert tx_error_var_uplink(defaults, 0.0) == pytest.approx(defaults.var_hu)
    assert tx_error_var_uplink(defaults, 2.0) == pytest.approx(0.5)
    y = complex_gaussian(rng, (defaults.tau_2, defaults.n_t))
    out = tx_estimate_uplink(np.zeros_like(y), defaults, 0.0)
    np.testing.assert_array_equal(out.estimate, 0.0)


def test_tx_uplink_empirical_agreement(defaults):
    alloc = nonreciprocal_allocation(0.0, 0.0, 2.0, 0.0)

    def one(rng):
        ch = sample_channels(defaults, NON_RECIPROCAL, rng)
        sig = reverse_training(defaults, alloc, ch, rng)
        return tx_estimate_uplink(sig.received["tx"], defaults,
                                  alloc.e_2).estimate, ch.h_u

    assert _empirical_mse(one) == pytest.approx(0.5, rel=0.02)


def test_downlink_beta_frozen_value(defaults):
    # direct-substitution oracle at e_0=e_1=e_2=10 (fixed before implementation)
    alloc = nonreciprocal_allocation(10.0, 10.0, 10.0, 10.0)
    assert downlink_beta(defaults, alloc) == pytest.approx(17.0 / 15.0, rel=1e-12)
    dead = nonreciprocal_allocation(10.0, 0.0, 10.0, 10.0)
    assert downlink_beta(defaults, dead) == np.inf


def test_downlink_noiseless_consistency():
    """Huge energies + small noise: the echo-based estimate recovers h_d.

    Noise cannot be pushed arbitrarily low here: the regularizer scales with
    it, and the conditioning guard (cond > 1e14) correctly refuses a
    numerically singular system. 1e-6 stays inside the guard.
    """
    quiet = default_params(var_w=1e-6, var_wt=1e-6)
    alloc = nonreciprocal_allocation(1e6, 1e6, 1e6, 1.0)
    rng = make_rng(21)
    ch = sample_channels(quiet, NON_RECIPROCAL, rng)
    rev = reverse_training(quiet, alloc, ch, rng)
    hu_hat = tx_estimate_uplink(rev.received["tx"], quiet, alloc.e_2)
    rt = round_trip_training(quiet, alloc, ch, rng)
    out = tx_estimate_downlink(rt.received["tx"], rt.transmit, hu_hat, quiet,
                               alloc)
    np.testing.assert_allclose(out.estimate, ch.h_d, atol=1e-3)


def test_downlink_conditional_mse_matches_trace(defaults):
    """For one FIXED uplink estimate, empirical conditional MSE tracks the
    published conditional covariance trace within 3% at 1e4 trials."""
    alloc = nonreciprocal_allocation(10.0, 10.0, 10.0, 10.0)
    setup_rng = make_rng(31)
    ch0 = sample_channels(defaults, NON_RECIPROCAL, setup_rng)
    rev = reverse_training(defaults, alloc, ch0, setup_rng)
    hu_hat = tx_estimate_uplink(rev.received["tx"], defaults, alloc.e_2)

    # Conditioned on hu_hat: true h_u = hu_hat + independent error, and the
    # whole round trip re-randomizes everything else.
    eps2 = tx_error_var_uplink(defaults, alloc.e_2)
    rng = make_rng(32)
    acc = 0.0
    trials = TRIALS
    cond = None
    for _ in range(trials):
        err = complex_gaussian(rng, hu_hat.estimate.shape, eps2)
        h_u = hu_hat.estimate + err
        h_d = complex_gaussian(rng, (defaults.n_t, defaults.n_l),
                               defaults.var_hd)
        ch = type(ch0)(h_d=h_d, h_u=h_u, g=ch0.g, mode=NON_RECIPROCAL)
        rt = round_trip_training(defaults, alloc, ch, rng)
        out = tx_estimate_downlink(rt.received["tx"], rt.transmit, hu_hat,
                                   defaults, alloc)
        cond = out.conditioning
        acc += np.mean(np.abs(out.estimate - h_d) ** 2)
    assert acc / trials == pytest.approx(cond["conditional_nmse"], rel=0.03)


def test_downlink_needs_echo(defaults, rng):
    alloc = nonreciprocal_allocation(10.0, 0.0, 10.0, 10.0)
    hu = tx_estimate_uplink(complex_gaussian(rng, (2, 4)), defaults, alloc.e_2)
    with pytest.raises(ValueError):
        tx_estimate_downlink(complex_gaussian(rng, (4, 4)),
                             complex_gaussian(rng, (4, 4)), hu, defaults, alloc)


# ---------------------------------------------------------------------------
# LR, non-reciprocal
# ---------------------------------------------------------------------------

def test_lr_nonreciprocal_no_an_reduction(defaults, rng):
    """var_a=0 collapses the approximation to the plain LMMSE variance."""
    alloc = nonreciprocal_allocation(10.0, 10.0, 10.0, 8.0, var_a=0.0)
    y = complex_gaussian(rng, (defaults.tau_3, defaults.n_l))
    out = lr_estimate_nonreciprocal(y, defaults, alloc)
    plain = 1.0 / (1.0 / defaults.var_hd + 8.0 / (defaults.n_t * defaults.var_w))
    assert out.error_var == pytest.approx(plain, rel=1e-12)


def test_lr_nonreciprocal_perfect_tx_csi_limit(defaults, rng):
    """e_0, e_2 -> inf: AN fully nulled, same reduction as var_a=0."""
    alloc = nonreciprocal_allocation(1e12, 1e12, 1e12, 8.0, var_a=3.0)
    y = complex_gaussian(rng, (defaults.tau_3, defaults.n_l))
    out = lr_estimate_nonreciprocal(y, defaults, alloc)
    plain = 1.0 / (1.0 / defaults.var_hd + 8.0 / (defaults.n_t * defaults.var_w))
    assert out.error_var == pytest.approx(plain, rel=1e-3)


def test_jensen_factor_variants(defaults):
    alloc = nonreciprocal_allocation(10.0, 10.0, 10.0, 10.0, 0.5)
    printed = jensen_factor(defaults, alloc, "printed")
    squared = jensen_factor(defaults, alloc, "sigma-squared")
    assert 0.0 < squared < printed < 1.0  # sqrt(s) > s for s < 1
    dead = nonreciprocal_allocation(10.0, 0.0, 10.0, 10.0, 0.5)
    assert jensen_factor(defaults, dead) == 0.0
    with pytest.raises(ValueError):
        jensen_factor(defaults, alloc, "exact")


# ---------------------------------------------------------------------------
# cross-cutting properties
# ---------------------------------------------------------------------------

def test_lmmse_beats_alternative_linear_filters():
    """2x1 toy: scalar LMMSE beats least squares and 100 perturbed filters."""
    var_h, var_n, energy = 1.0, 1.0, 3.0
    tau, n = 2, 1
    from dce.training import pilot_matrix

    c = pilot_matrix(tau, n)
    x = np.sqrt(energy / n) * c
    w_lmmse = (np.sqrt(energy / n) / (energy / n + var_n / var_h)) * c.conj().T
    w_ls = np.linalg.pinv(x)

    rng = make_rng(17)
    trials = 10000
    h = complex_gaussian(rng, (trials, 1, 1), var_h)
    noise = complex_gaussian(rng, (trials, tau, 1), var_n)
    y = x[None, :, :] @ h + noise

    def mse(w):
        return float(np.mean(np.abs(w[None, :, :] @ y - h) ** 2))

    mse_lmmse = mse(w_lmmse)
    assert mse_lmmse < mse(w_ls)
    for _ in range(100):
        perturbed = w_lmmse * (1 + 0.05 * rng.standard_normal()) \
            + 0.05 * complex_gaussian(rng, w_lmmse.shape)
        assert mse_lmmse <= mse(perturbed) + 1e-12


def test_error_estimate_orthogonality(defaults):
    """|corr(estimate, error)| <= 0.03 at 1e4 trials for each estimator."""
    alloc = reciprocal_allocation(2.0, 4.0, var_a=1.0)
    rng = make_rng(23)
    trials = TRIALS
    pairs = {"tx": [], "lr": [], "ur": []}
    for _ in range(trials):
        ch = sample_channels(defaults, RECIPROCAL, rng)
        rev = reverse_training(defaults, alloc, ch, rng)
        tx = tx_estimate_reciprocal(rev.received["tx"], defaults, alloc.e_r)
        fwd = forward_training(defaults, alloc, tx.estimate, ch, rng)
        lr = lr_estimate_reciprocal(fwd.received["lr"], defaults, alloc)
        ur = ur_estimate(fwd.received["ur"], defaults, alloc)
        pairs["tx"].append((tx.estimate[0, 0], tx.estimate[0, 0] - ch.h_d[0, 0]))
        pairs["lr"].append((lr.estimate[0, 0], lr.estimate[0, 0] - ch.h_d[0, 0]))
        pairs["ur"].append((ur.estimate[0, 0], ur.estimate[0, 0] - ch.g[0, 0]))
    for name, vals in pairs.items():
        est, err = np.array([v[0] for v in vals]), np.array([v[1] for v in vals])
        rho = np.mean(est * np.conj(err)) / np.sqrt(
            np.mean(np.abs(est) ** 2) * np.mean(np.abs(err) ** 2))
        assert abs(rho) <= 0.03, f"{name} estimator violates orthogonality: {rho}"


def test_analytic_error_monotone_in_energy(defaults):
    """More training energy never hurts, across 1000 random operating points."""
    rng = make_rng(29)
    for _ in range(1000):
        e = float(rng.uniform(0.0, 50.0))
        bump = float(rng.uniform(0.01, 10.0))
        assert tx_error_var_reciprocal(defaults, e + bump) <= \
            tx_error_var_reciprocal(defaults, e) + 1e-15
        assert tx_error_var_uplink(defaults, e + bump) <= \
            tx_error_var_uplink(defaults, e) + 1e-15


def test_spd_solve_jitter_guard():
    """Nearly singular system still solves (jitter engaged) and stays finite."""
    m = np.diag([1.0, 1e-15]).astype(complex)
    b = np.array([[1.0], [1.0]], dtype=complex)
    x = spd_solve(m, b)
    assert np.all(np.isfinite(x))


def test_downlink_singular_regressor(defaults, rng):
    alloc = nonreciprocal_allocation(10.0, 10.0, 10.0, 10.0)
    bad = EstimateLike(np.full((2, 4), np.nan, dtype=complex))
    with pytest.raises(SingularRegressor):
        tx_estimate_downlink(complex_gaussian(rng, (4, 4)),
                             complex_gaussian(rng, (4, 4)), bad, defaults,
                             alloc)


class EstimateLike:
    """Minimal stand-in carrying just the .estimate attribute."""

    def __init__(self, estimate):
        self.estimate = estimate
