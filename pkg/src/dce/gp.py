r"""Non-reciprocal power allocation by successive geometric-programming
condensation.

Change of variables (all strictly positive at interior points):

    t0 = var_hd*e_0/n_t + var_w        round-trip downlink signal-plus-noise level
    t1 = alpha**2                      squared echo gain
    t2 = e_2/n_l                       uplink pilot energy per antenna
    t3 = e_3/n_t                       forward pilot energy per antenna
    t4 = (n_t-n_l)*var_a*var_g + var_v effective UR noise level
    t                                  estimation-quality score; the LR NMSE
                                       surrogate equals 1/(1/var_hd + t/var_w)

Maximizing t subject to the budget constraints is a generalized GP whose
single non-posynomial piece is the ratio constraint numer(x)/denom(x) <= 1.
Each outer iteration replaces denom by its best monomial under-estimator at
the current point (weights = log-gradient exponents, an AM-GM bound, hence
global under-estimation and tangency), leaving an ordinary GP that a
log-barrier interior-point routine solves to high accuracy.  Because the
monomial never exceeds the true denominator, every inner-feasible point is
feasible for the original problem, and the objective improves monotonically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import Infeasible, NoFeasiblePoint, NotConverged, Stalled
from .nmse import NON_RECIPROCAL, check_gamma
from .params import PowerAllocation, SystemParams, nonreciprocal_allocation

X_NAMES = ("t", "t0", "t1", "t2", "t3", "t4")
LOG_BOX = 60.0            # |log x_k| cage keeping the barrier method bounded
RATIO_ACTIVITY_TOL = 1e-6


# ---------------------------------------------------------------------------
# state and problem data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GpState:
    """A point in the transformed variable space, plus problem constants."""

    t: float
    t0: float
    t1: float
    t2: float
    t3: float
    t4: float
    c1: Optional[float] = None
    c2: Optional[float] = None
    c3: Optional[float] = None
    c4: Optional[float] = None

    def __post_init__(self):
        for name in X_NAMES:
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")

    def x(self) -> np.ndarray:
        return np.array([self.t, self.t0, self.t1, self.t2, self.t3, self.t4])


@dataclass(frozen=True)
class CondensationStep:
    expansion: Tuple[float, ...]
    thetas: Dict[str, float]
    optimum: Tuple[float, ...]
    objective: float


@dataclass
class CondensationTrace:
    steps: List[CondensationStep]
    converged: bool = False
    ratio_activity: float = float("nan")

    def objectives(self) -> List[float]:
        return [s.objective for s in self.steps]


@dataclass(frozen=True)
class NonReciprocalSolution:
    alloc: PowerAllocation
    objective: float
    state: GpState
    trace: CondensationTrace


@dataclass(frozen=True)
class Posynomial:
    """sum_i coeffs[i] * prod_k x_k**expo[i, k]; constraint sense is <= 1."""

    coeffs: np.ndarray
    expo: np.ndarray

    def value(self, x: np.ndarray) -> float:
        return float(self.coeffs @ np.prod(x[None, :] ** self.expo, axis=1))

    def log_data(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.log(self.coeffs), self.expo


def monomial(coeff: float, expo: Sequence[float]) -> Posynomial:
    return Posynomial(np.array([coeff], dtype=float),
                      np.asarray([expo], dtype=float))


def gp_constants(params: SystemParams, gamma: float) -> Tuple[float, float, float, float]:
    """Constraint normalizers (UR floor, average, transmitter, LR budgets)."""
    p = params
    offset = p.n_t * p.var_w / p.var_hd + p.n_t * p.var_v / p.var_g
    c1 = 1.0 / (1.0 / gamma - 1.0 / p.var_g)
    c2 = 1.0 / (p.budget_average_nonreciprocal() + offset)
    c3 = 1.0 / (p.budget_tx_nonreciprocal() + offset)
    c4 = 1.0 / p.budget_lr_nonreciprocal()
    return c1, c2, c3, c4


# ---------------------------------------------------------------------------
# variable maps
# ---------------------------------------------------------------------------

def _quality_terms(params: SystemParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Coefficients/exponents (over t0,t1,t2 only) of the two echo-quality
    posynomials: f_num (weights the estimate side) and f_den (weights the
    noise side, i.e. f_num with a 1/var_w on the t0-free terms and the
    round-trip term divided by t0)."""
    p = params
    k = p.n_t * p.var_hu / p.var_wt
    num_c = np.array([p.n_l, k, 1.0, p.var_wt / p.var_hu])
    num_e = np.array([[1, 1, 0], [1, 1, 1], [0, 0, 1], [0, 0, 0]], dtype=float)
    den_c = np.array([p.n_l / p.var_w, k, 1.0 / p.var_w,
                      p.var_wt / (p.var_hu * p.var_w)])
    den_e = np.array([[1, 1, 0], [0, 1, 1], [0, 0, 1], [0, 0, 0]], dtype=float)
    return num_c, num_e, den_c, den_e


def _embed(expo3: np.ndarray, t_pow: float = 0.0, t3_pow: float = 0.0,
           t4_pow: float = 0.0) -> np.ndarray:
    """Lift exponents over (t0,t1,t2) into the full 6-variable space."""
    m = expo3.shape[0]
    out = np.zeros((m, 6))
    out[:, 0] = t_pow
    out[:, 1:4] = expo3
    out[:, 4] = t3_pow
    out[:, 5] = t4_pow
    return out


def ratio_parts(params: SystemParams) -> Tuple[Posynomial, Posynomial]:
    """Numerator and denominator posynomials of the quality-ratio constraint
    numer(x) <= denom(x); both have eight monomial terms."""
    p = params
    num_c, num_e, den_c, den_e = _quality_terms(params)
    lever = p.var_hd / p.var_g
    numer = Posynomial(
        np.concatenate([lever * den_c, num_c]),
        np.vstack([_embed(den_e, t_pow=1.0, t4_pow=1.0),
                   _embed(num_e, t_pow=1.0)]))
    denom = Posynomial(
        np.concatenate([num_c, p.var_v * lever * den_c]),
        np.vstack([_embed(num_e, t3_pow=1.0),
                   _embed(den_e, t_pow=1.0)]))
    return numer, denom


def quality_score(params: SystemParams, t0: float, t1: float, t2: float,
                  t3: float, t4: float) -> float:
    """Value of t that makes the quality ratio exactly active."""
    p = params
    num_c, num_e, den_c, den_e = _quality_terms(params)
    x3 = np.array([t0, t1, t2])
    f_num = float(num_c @ np.prod(x3[None, :] ** num_e, axis=1))
    f_den = float(den_c @ np.prod(x3[None, :] ** den_e, axis=1))
    lever = p.var_hd / p.var_g
    return t3 * f_num / (lever * (t4 - p.var_v) * f_den + f_num)


def to_gp_variables(params: SystemParams, alloc: PowerAllocation,
                    gamma: Optional[float] = None) -> GpState:
    """Map a physical allocation to the transformed variables.

    The score t is set so the quality ratio is active, which is where any
    optimum lives.  Constants are attached when the UR floor is supplied.
    """
    p = params
    t0 = p.var_hd * alloc.e_0 / p.n_t + p.var_w
    t1 = alloc.e_1 / (p.n_t * p.n_l * t0)
    t2 = alloc.e_2 / p.n_l
    t3 = alloc.e_3 / p.n_t
    t4 = (p.n_t - p.n_l) * alloc.var_a * p.var_g + p.var_v
    t = quality_score(params, t0, t1, t2, t3, t4)
    cs = gp_constants(params, gamma) if gamma is not None else (None,) * 4
    return GpState(t, t0, t1, t2, t3, t4, *cs)


def from_gp_variables(params: SystemParams, state: GpState) -> PowerAllocation:
    """Invert the variable map back to physical powers (exact inverse)."""
    p = params

    def _clip(v: float, what: str) -> float:
        if v < -1e-8 * max(1.0, abs(v)):
            raise ValueError(f"{what} maps to a negative energy: {v}")
        return max(v, 0.0)

    e_0 = _clip(p.n_t * (state.t0 - p.var_w) / p.var_hd, "t0")
    e_1 = p.n_t * p.n_l * state.t0 * state.t1
    e_2 = p.n_l * state.t2
    e_3 = p.n_t * state.t3
    var_a = _clip((state.t4 - p.var_v) / ((p.n_t - p.n_l) * p.var_g), "t4")
    return nonreciprocal_allocation(e_0, e_1, e_2, e_3, var_a)


# ---------------------------------------------------------------------------
# condensation pieces
# ---------------------------------------------------------------------------

def denominator_exponents(params: SystemParams, x_bar: np.ndarray) -> np.ndarray:
    """Log-gradient weights a_k = x_k * d(log denom)/d(x_k) at x_bar.

    These are the AM-GM weights: denom(x) >= denom(x_bar) * prod (x_k/x_bar_k)**a_k
    with equality (value and gradient) at x_bar.  Every component lies in
    [0, 1] because each variable enters every denominator term with exponent
    0 or 1.
    """
    _, denom = ratio_parts(params)
    terms = denom.coeffs * np.prod(x_bar[None, :] ** denom.expo, axis=1)
    total = terms.sum()
    if not (total > 0):
        raise ValueError("expansion point gives a vanishing denominator")
    return (terms / total) @ denom.expo


def theta_exponents(params: SystemParams, expansion: GpState) -> Dict[str, float]:
    """Condensation weights at an expansion point, keyed by variable name."""
    a = denominator_exponents(params, expansion.x())
    return dict(zip(X_NAMES, (float(v) for v in a)))


def condensed_ratio(params: SystemParams, x_bar: np.ndarray,
                    a: Optional[np.ndarray] = None) -> Posynomial:
    """Posynomial form of numer(x)/denom_hat(x) <= 1 after condensation."""
    numer, denom = ratio_parts(params)
    if a is None:
        a = denominator_exponents(params, x_bar)
    d_bar = denom.value(x_bar)
    scale = d_bar * float(np.prod(x_bar ** (-a)))
    return Posynomial(numer.coeffs / scale, numer.expo - a[None, :])


def budget_posynomials(params: SystemParams, gamma: float) -> List[Posynomial]:
    """The fixed (already posynomial) constraints: variable floors, the UR
    floor, and the three power budgets, each normalized to <= 1."""
    p = params
    c1, c2, c3, c4 = gp_constants(params, gamma)
    e = np.eye(6)
    avg_c = np.array([p.n_t / p.var_hd, p.n_t * p.n_l, p.n_l, p.n_t,
                      p.n_t / p.var_g])
    avg_e = np.array([e[1], e[1] + e[2], e[3], e[4], e[5]])
    tx_c = np.array([p.n_t / p.var_hd, p.n_t, p.n_t / p.var_g])
    tx_e = np.array([e[1], e[4], e[5]])
    lr_c = np.array([p.n_t * p.n_l, p.n_l])
    lr_e = np.array([e[1] + e[2], e[3]])
    return [
        monomial(p.var_w, -e[1]),            # t0 >= var_w
        monomial(p.var_v, -e[5]),            # t4 >= var_v
        monomial(c1, e[4] - e[5]),           # UR floor: c1 * t3 / t4 <= 1
        Posynomial(c2 * avg_c, avg_e),       # average power
        Posynomial(c3 * tx_c, tx_e),         # transmitter power
        Posynomial(c4 * lr_c, lr_e),         # LR power
    ]


# ---------------------------------------------------------------------------
# inner GP solver (log-space barrier method)
# ---------------------------------------------------------------------------

def _lse(b: np.ndarray, a_mat: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    z = b + a_mat @ y
    zmax = z.max()
    w = np.exp(z - zmax)
    s = w.sum()
    return float(zmax + math.log(s)), w / s


def _barrier_eval(t_bar: float, c_lin: np.ndarray, cons, y: np.ndarray):
    """Barrier merit c.y - (1/t_bar) sum log(-f_j) with gradient and Hessian.

    The merit is scaled by 1/t_bar so its magnitude stays O(1) as the barrier
    parameter grows; otherwise the Armijo test loses all resolution once
    t_bar * c.y dwarfs the achievable decrease.  Returns (inf, None, None)
    outside the strictly feasible region.
    """
    n = y.size
    inv_t = 1.0 / t_bar
    val = float(c_lin @ y)
    grad = c_lin.copy()
    hess = np.zeros((n, n))
    for b, a_mat in cons:
        f, p = _lse(b, a_mat, y)
        if f >= 0.0:
            return np.inf, None, None
        gj = a_mat.T @ p
        hj = (a_mat.T * p) @ a_mat - np.outer(gj, gj)
        val -= inv_t * math.log(-f)
        grad += inv_t * (-gj / f)
        hess += inv_t * (-hj / f + np.outer(gj, gj) / f ** 2)
    return val, grad, hess


def _newton_descend(t_bar: float, c_lin: np.ndarray, cons, y: np.ndarray,
                    max_steps: int = 200) -> np.ndarray:
    for _ in range(max_steps):
        val, grad, hess = _barrier_eval(t_bar, c_lin, cons, y)
        if not np.isfinite(val):
            raise FloatingPointError("barrier evaluated outside its domain")
        try:
            dy = np.linalg.solve(hess + 1e-12 * np.eye(y.size), -grad)
        except np.linalg.LinAlgError:
            dy = np.linalg.lstsq(hess + 1e-9 * np.eye(y.size), -grad, rcond=None)[0]
        decrement = float(-grad @ dy)
        if decrement / 2.0 <= 1e-13:
            return y
        step = 1.0
        for _ in range(60):
            cand, _, _ = _barrier_eval(t_bar, c_lin, cons, y + step * dy)
            if cand <= val - 0.25 * step * decrement:
                break
            step *= 0.5
        else:
            return y
        y = y + step * dy
    return y


def _log_constraints(constraints: Sequence[Posynomial], n: int):
    cons = []
    for posy in constraints:
        b, a_mat = posy.log_data()
        cons.append((b, a_mat))
    # safety cage: |y_k| <= LOG_BOX, expressed as monomial constraints
    for k in range(n):
        ek = np.zeros((1, n))
        ek[0, k] = 1.0
        cons.append((np.array([-LOG_BOX]), ek.copy()))
        cons.append((np.array([-LOG_BOX]), -ek))
    return cons


def _phase1(cons, y0: np.ndarray) -> np.ndarray:
    """Find a strictly feasible y or raise Infeasible.

    Solves min s subject to f_j(y) <= s with the same barrier machinery in
    the lifted space (y, s).
    """
    n = y0.size

    def max_f(y):
        return max(_lse(b, a_mat, y)[0] for b, a_mat in cons)

    s0 = max_f(y0) + 1.0
    z = np.concatenate([y0, [s0]])
    c_lin = np.zeros(n + 1)
    c_lin[-1] = 1.0

    # lift to (y, s) and impose f_j(y) - s <= 0
    barrier_cons = [(b, np.hstack([a_mat, -np.ones((a_mat.shape[0], 1))]))
                    for b, a_mat in cons]

    t_bar, m = 1.0, len(barrier_cons)
    best_y, best_s = y0.copy(), max_f(y0)
    for _ in range(80):
        z = _newton_descend(t_bar, c_lin, barrier_cons, z)
        s_now = max_f(z[:n])
        if s_now < best_s:
            best_y, best_s = z[:n].copy(), s_now
        if best_s < -1e-3:
            return best_y
        if m / t_bar < 1e-12:
            break
        t_bar *= 20.0
    if best_s < -1e-9:
        return best_y
    raise Infeasible(
        "no strictly feasible point exists for the inner geometric program "
        f"(best constraint slack {best_s:.3e})")


def _stationarity_system(c_lin: np.ndarray, cons, act, y: np.ndarray,
                         lam_a: np.ndarray):
    """Residual and derivatives of the active-set KKT equations.

    F stacks stationarity (c + sum lam_j grad f_j) over the log-constraint
    values f_j of the active set; G holds the active gradients row-wise and
    h_sum the multiplier-weighted Hessian of the Lagrangian.
    """
    n = y.size
    k = len(act)
    grads = np.empty((k, n))
    f_act = np.empty(k)
    h_sum = np.zeros((n, n))
    for i, j in enumerate(act):
        b, a_mat = cons[j]
        f, p = _lse(b, a_mat, y)
        gj = a_mat.T @ p
        grads[i] = gj
        f_act[i] = f
        h_sum += lam_a[i] * ((a_mat.T * p) @ a_mat - np.outer(gj, gj))
    residual = np.concatenate([c_lin + grads.T @ lam_a, f_act])
    return residual, grads, h_sum


def _kkt_polish(c_lin: np.ndarray, cons, y0: np.ndarray, lam0: np.ndarray):
    """Refine a centered barrier iterate to a true KKT point.

    The barrier certificate reconstructs multipliers as 1/(t_bar * slack),
    which float64 cannot resolve once slacks shrink toward 1e-12.  Here the
    multipliers are unknowns instead: Newton's method is applied to the
    active-set KKT system (stationarity + active constraints at equality),
    dropping any constraint whose multiplier converges negative.  Returns
    (y, full multiplier vector) or None when refinement fails; the caller
    then falls back to the barrier certificate.
    """
    n = y0.size
    m = len(cons)
    f0 = np.array([_lse(b, a_mat, y0)[0] for b, a_mat in cons])
    lam_scale = max(float(np.max(lam0)), 1.0)
    act = [j for j in range(m)
           if f0[j] >= -1e-5 or lam0[j] >= 1e-6 * lam_scale]
    for _ in range(m + 1):
        if not act:
            return None
        y = y0.copy()
        lam_a = np.maximum(lam0[act], 1e-12)
        converged = False
        norm_prev = np.inf
        for it in range(60):
            big_f, grads, h_sum = _stationarity_system(c_lin, cons, act, y, lam_a)
            norm_f = float(np.abs(big_f).max())
            if norm_f <= 1e-12:
                converged = True
                break
            if it > 0 and norm_f >= 0.9999 * norm_prev:
                break
            norm_prev = norm_f
            k = len(act)
            kkt_mat = np.block([[h_sum, grads.T],
                                [grads, np.zeros((k, k))]])
            try:
                d = np.linalg.solve(kkt_mat, -big_f)
                if not np.all(np.isfinite(d)):
                    raise np.linalg.LinAlgError
            except np.linalg.LinAlgError:
                d = np.linalg.lstsq(kkt_mat, -big_f, rcond=None)[0]
            step = 1.0
            for _ in range(25):
                y_try = y + step * d[:n]
                lam_try = lam_a + step * d[n:]
                trial, _, _ = _stationarity_system(c_lin, cons, act, y_try, lam_try)
                if float(np.abs(trial).max()) < norm_f:
                    break
                step *= 0.5
            else:
                break
            y, lam_a = y_try, lam_try
        if not converged:
            return None
        if float(lam_a.min()) < -1e-11:
            worst = act[int(np.argmin(lam_a))]
            act = [j for j in act if j != worst]
            continue
        lam_full = np.zeros(m)
        for i, j in enumerate(act):
            lam_full[j] = max(float(lam_a[i]), 0.0)
        return y, lam_full
    return None


def _kkt_certificate(c_lin: np.ndarray, cons, y: np.ndarray, lam: np.ndarray):
    """Worst violation across all four KKT conditions, plus log-constraint values."""
    residual = c_lin.copy()
    comp = 0.0
    primal = 0.0
    f_all = np.empty(len(cons))
    for j, (b, a_mat) in enumerate(cons):
        f, p = _lse(b, a_mat, y)
        f_all[j] = f
        residual += lam[j] * (a_mat.T @ p)
        comp = max(comp, abs(lam[j] * f))
        primal = max(primal, f)
    dual = max(0.0, -float(lam.min())) if lam.size else 0.0
    kkt = max(float(np.abs(residual).max()), comp, max(primal, 0.0), dual)
    return kkt, comp, f_all


def solve_inner_gp(constraints: Sequence[Posynomial], objective: Sequence[float],
                   start: Sequence[float], kkt_tol: float = 1e-8,
                   ) -> Tuple[np.ndarray, Dict[str, object]]:
    """Solve min prod x**objective s.t. each posynomial <= 1, x > 0.

    Log-space barrier method: with y = log x every constraint becomes a
    log-sum-exp function and the monomial objective becomes linear, so the
    problem is smooth and convex.  Newton centering with backtracking tracks
    the central path; stationarity of the final centered point is checked
    against ``kkt_tol`` and NotConverged carries the best iterate if the
    check fails.
    """
    x0 = np.asarray(start, dtype=float)
    if np.any(x0 <= 0) or not np.all(np.isfinite(x0)):
        raise ValueError("start must be strictly positive and finite")
    n = x0.size
    c_lin = np.asarray(objective, dtype=float)
    if c_lin.size != n:
        raise ValueError("objective exponent vector length must match start")
    cons = _log_constraints(constraints, n)
    y = np.log(x0)

    if max(_lse(b, a_mat, y)[0] for b, a_mat in cons) > -1e-9:
        y = _phase1(cons, y)

    m = len(cons)
    t_bar = 1.0
    for _ in range(60):
        y = _newton_descend(t_bar, c_lin, cons, y)
        if m / t_bar < 1e-9:
            break
        t_bar *= 20.0

    # multipliers estimated from the final centering (lambda_j = 1/(t_bar*slack))
    lam = np.empty(m)
    for j, (b, a_mat) in enumerate(cons):
        f, _ = _lse(b, a_mat, y)
        lam[j] = 1.0 / (t_bar * max(-f, 1e-300))
    polished = _kkt_polish(c_lin, cons, y, lam)
    if polished is not None:
        y, lam = polished
    kkt, comp, f_all = _kkt_certificate(c_lin, cons, y, lam)
    values = np.exp(f_all)
    x_opt = np.exp(y)
    info = {
        "kkt_residual": kkt,
        "duality_gap": comp,
        "objective": float(np.prod(x_opt ** c_lin)),
        "constraint_values": values[: len(constraints)],
    }
    if kkt > kkt_tol or np.any(info["constraint_values"] > 1 + 1e-8):
        err = NotConverged(
            f"inner solve stopped with KKT residual {kkt:.3e} "
            f"(tolerance {kkt_tol:.1e})")
        err.best = (x_opt, info)
        raise err
    return x_opt, info


# ---------------------------------------------------------------------------
# outer loop
# ---------------------------------------------------------------------------

def initial_feasible_state(params: SystemParams, gamma: float) -> GpState:
    """Heuristic interior start: split the average budget evenly over the
    four training energies, pick the smallest AN variance that meets the UR
    floor, then shrink everything until all budgets hold strictly."""
    p = params
    s = p.budget_average_nonreciprocal()
    b_t = p.budget_tx_nonreciprocal()
    b_l = p.budget_lr_nonreciprocal()
    e = s / 4.0
    t4_needed = (e / p.n_t) * (1.0 / gamma - 1.0 / p.var_g)
    var_a = max(0.0, (t4_needed - p.var_v) / ((p.n_t - p.n_l) * p.var_g))
    for _ in range(200):
        an = (p.n_t - p.n_l) * var_a * p.n_t
        ok = (4 * e + an <= s * (1 - 1e-3)
              and 2 * e + an <= b_t * (1 - 1e-3)
              and 2 * e <= b_l * (1 - 1e-3))
        if ok:
            break
        e *= 0.95
        var_a *= 0.95
    alloc = nonreciprocal_allocation(e, e, e, e, var_a)
    return to_gp_variables(params, alloc, gamma)


def condense(params: SystemParams, gamma: float, start: Optional[GpState] = None,
             tol: float = 1e-6, max_iter: int = 50,
             _theta_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
             ) -> NonReciprocalSolution:
    """Successive condensation until the objective stops improving.

    Each round linearizes only the denominator of the quality-ratio
    constraint (in log space), solves the resulting GP, and re-expands at
    the optimum.  The monomial under-estimates the true denominator
    everywhere, so iterates stay feasible for the original problem and the
    score increases monotonically; a decrease raises Stalled, as does a
    final point that violates the original ratio.
    """
    check_gamma(params, gamma, NON_RECIPROCAL)
    if start is None:
        start = initial_feasible_state(params, gamma)
    x_bar = start.x()
    fixed = budget_posynomials(params, gamma)
    numer, denom = ratio_parts(params)
    objective = np.array([-1.0, 0, 0, 0, 0, 0])

    trace = CondensationTrace(steps=[])
    nmse_prev = None
    for _ in range(max_iter):
        a = (_theta_fn(x_bar) if _theta_fn is not None
             else denominator_exponents(params, x_bar))
        constraints = [condensed_ratio(params, x_bar, a)] + fixed
        x_opt, _ = solve_inner_gp(constraints, objective, x_bar)
        nmse = 1.0 / (1.0 / params.var_hd + x_opt[0] / params.var_w)
        trace.steps.append(CondensationStep(
            expansion=tuple(float(v) for v in x_bar),
            thetas=dict(zip(X_NAMES, (float(v) for v in a))),
            optimum=tuple(float(v) for v in x_opt),
            objective=nmse,
        ))
        if nmse_prev is not None:
            if nmse > nmse_prev * (1 + 1e-9):
                raise Stalled(
                    f"objective worsened from {nmse_prev:.12g} to {nmse:.12g}; "
                    "the surrogate no longer under-estimates the denominator")
            if abs(nmse - nmse_prev) <= tol * nmse_prev:
                trace.converged = True
                x_bar = x_opt
                break
        nmse_prev = nmse
        x_bar = x_opt

    ratio = numer.value(x_bar) / denom.value(x_bar)
    trace.ratio_activity = float(ratio)
    if ratio > 1 + RATIO_ACTIVITY_TOL:
        raise Stalled(
            f"final point violates the original quality ratio ({ratio:.8f} > 1); "
            "condensation was not conservative")

    cs = gp_constants(params, gamma)
    state = GpState(*(float(v) for v in x_bar), *cs)
    alloc = from_gp_variables(params, state)
    return NonReciprocalSolution(
        alloc=alloc,
        objective=trace.steps[-1].objective,
        state=state,
        trace=trace,
    )


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

def grid_oracle_nonreciprocal(params: SystemParams, gamma: float,
                              resolution: int = 20,
                              jensen_variant: str = "printed") -> PowerAllocation:
    """Exhaustive lattice minimizer of the analytic LR NMSE surrogate.

    Axes are linspace(0, cap, resolution+1), so doubling the resolution
    nests the lattice and can only improve the result.  Slow but
    assumption-free; raises NoFeasiblePoint when the lattice misses the
    feasible set entirely.
    """
    if resolution < 20:
        raise ValueError("resolution < 20 is too coarse to be a useful oracle")
    p = params
    s = p.budget_average_nonreciprocal()
    b_t = p.budget_tx_nonreciprocal()
    b_l = p.budget_lr_nonreciprocal()
    n_an = p.n_t - p.n_l

    e0_axis = np.linspace(0.0, min(s, b_t), resolution + 1)
    e1_axis = np.linspace(0.0, min(s, b_l), resolution + 1)
    e2_axis = np.linspace(0.0, min(s, b_l), resolution + 1)
    e3_axis = np.linspace(0.0, min(s, b_t), resolution + 1)
    an_axis = np.linspace(0.0, min(s, b_t), resolution + 1)  # AN energy
    va_axis = an_axis / (n_an * p.n_t)

    # UR floor depends only on (e_3, var_a): precompute the feasibility plane.
    ur_noise = n_an * va_axis * p.var_g + p.var_v
    nmse_u = 1.0 / (1.0 / p.var_g + (e3_axis[:, None] / p.n_t) / ur_noise[None, :])
    floor_ok = nmse_u >= gamma * (1 - 1e-9)

    # uplink estimation quality depends only on e_2
    eps2 = 1.0 / (1.0 / p.var_hu + e2_axis / (p.n_l * p.var_wt))
    sig_sq = p.var_hu - eps2
    spectral = np.sqrt(sig_sq) if jensen_variant == "printed" else sig_sq
    if jensen_variant not in ("printed", "sigma-squared"):
        raise ValueError(f"unknown jensen_variant: {jensen_variant!r}")

    best_val = np.inf
    best = None
    for e_0 in e0_axis:
        t0 = p.var_hd * e_0 / p.n_t + p.var_w
        rho0 = (t0 - p.var_w) / t0
        for e_1 in e1_axis:
            if e_1 > b_l * (1 + 1e-9):
                break
            with np.errstate(divide="ignore"):
                beta = p.n_l * eps2 + np.where(
                    e_1 > 0, p.var_wt / ((e_1 / (p.n_t * p.n_l * t0)) * t0), np.inf)
            jfac = np.where(np.isinf(beta), 0.0,
                            p.n_t * spectral / (beta + p.n_t * spectral))
            resid = p.var_hd * (1.0 - rho0 * jfac)          # over e_2
            r_eff = n_an * va_axis[None, :] * resid[:, None] + p.var_w
            nmse_l = 1.0 / (1.0 / p.var_hd
                            + (e3_axis[:, None, None] / p.n_t) / r_eff[None, :, :])
            # every array below is laid out on the (e3, e2, va) axes
            avg_ok = (e_0 + e_1 + e3_axis[:, None, None] + e2_axis[None, :, None]
                      + an_axis[None, None, :]) <= s * (1 + 1e-9)
            tx_ok = (e_0 + e3_axis[:, None] + an_axis[None, :]) <= b_t * (1 + 1e-9)
            lr_ok = (e_1 + e2_axis) <= b_l * (1 + 1e-9)
            mask = (floor_ok[:, None, :]
                    & tx_ok[:, None, :]
                    & lr_ok[None, :, None]
                    & avg_ok)
            if not mask.any():
                continue
            cand = np.where(mask, nmse_l, np.inf)
            i3, i2, ia = np.unravel_index(np.argmin(cand), cand.shape)
            if cand[i3, i2, ia] < best_val:
                best_val = float(cand[i3, i2, ia])
                best = (float(e_0), float(e_1), float(e2_axis[i2]),
                        float(e3_axis[i3]), float(va_axis[ia]))
    if best is None:
        raise NoFeasiblePoint(
            "no lattice point satisfies the budgets and the UR floor")
    return nonreciprocal_allocation(*best)
