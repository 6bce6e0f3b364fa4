r"""Closed-form NMSE evaluators, feasibility bounds and derived constants.

Everything here is a pure scalar function of the system parameters and an
allocation; the Monte-Carlo module checks these formulas empirically and
the allocators optimize them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .errors import InfeasibleGamma
from .estimators import (downlink_beta, lr_effective_noise_nonreciprocal,
                         lr_effective_noise_reciprocal, ur_effective_noise)
from .params import (NON_RECIPROCAL, RECIPROCAL, PowerAllocation, SystemParams,
                     nonreciprocal_allocation, reciprocal_allocation)


def nmse_l_reciprocal(params: SystemParams, e_r: float, e_f: float,
                      var_a: float) -> float:
    """LR channel-estimation NMSE in the reciprocal scheme; in (0, var_h]."""
    if min(e_r, e_f, var_a) < 0:
        raise ValueError("allocation entries must be non-negative")
    alloc = reciprocal_allocation(e_r, e_f, var_a)
    r_eff = lr_effective_noise_reciprocal(params, alloc)
    return 1.0 / (1.0 / params.var_h + (e_f / params.n_t) / r_eff)


def nmse_u_reciprocal(params: SystemParams, e_f: float, var_a: float) -> float:
    """UR channel-estimation NMSE in the reciprocal scheme; in (0, var_g]."""
    if min(e_f, var_a) < 0:
        raise ValueError("allocation entries must be non-negative")
    alloc = reciprocal_allocation(0.0, e_f, var_a)
    return 1.0 / (1.0 / params.var_g
                  + (e_f / params.n_t) / ur_effective_noise(params, alloc))


def nmse_l_nonreciprocal_approx(params: SystemParams, alloc: PowerAllocation,
                                jensen_variant: str = "printed") -> float:
    """Approximate LR NMSE for the echo-based scheme (Jensen surrogate)."""
    r_eff = lr_effective_noise_nonreciprocal(params, alloc, jensen_variant)
    return 1.0 / (1.0 / params.var_hd + (alloc.e_3 / params.n_t) / r_eff)


def nmse_u_nonreciprocal(params: SystemParams, e_3: float, var_a: float) -> float:
    """UR NMSE in the non-reciprocal scheme (exact, not approximated)."""
    if min(e_3, var_a) < 0:
        raise ValueError("allocation entries must be non-negative")
    alloc = nonreciprocal_allocation(0.0, 0.0, 0.0, e_3, var_a)
    return 1.0 / (1.0 / params.var_g
                  + (e_3 / params.n_t) / ur_effective_noise(params, alloc))


def gamma_tilde(params: SystemParams, gamma: float) -> float:
    r"""Forward-energy bound induced by the UR floor:
    (1/gamma - 1/var_g) * n_t * var_v.

    Without AN, NMSE_U >= gamma iff the forward energy stays below this.
    """
    return (1.0 / gamma - 1.0 / params.var_g) * params.n_t * params.var_v


def mu_threshold(params: SystemParams) -> float:
    """Reverse-energy threshold below which AN is counter-productive."""
    return params.n_l * (params.var_v * params.var_wt / (params.var_g * params.var_w)
                         - params.var_wt / params.var_h)


def gamma_bounds(params: SystemParams, scheme: str) -> Tuple[float, float]:
    """Achievable interval (gamma_min, gamma_max) for the UR floor.

    gamma_max is the prior variance var_g; gamma_min is the UR NMSE when the
    entire admissible forward energy is spent on pilots with no AN.
    """
    if scheme == RECIPROCAL:
        budget = min(params.budget_tx_reciprocal(),
                     params.budget_average_reciprocal())
    elif scheme == NON_RECIPROCAL:
        budget = min(params.budget_tx_nonreciprocal(),
                     params.budget_average_nonreciprocal())
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    gamma_min = 1.0 / (1.0 / params.var_g + budget / (params.n_t * params.var_v))
    return gamma_min, params.var_g


def check_gamma(params: SystemParams, gamma: float, scheme: str) -> None:
    """Reject floors no allocation can satisfy.

    Above gamma_max the floor is unconditionally violated, for either scheme.
    Below gamma_min the floor is vacuous (the UR error never gets that small):
    the reciprocal solver simply proceeds with the constraint inactive, while
    the non-reciprocal route rejects it because the condensation construction
    presumes the floor binds at the optimum.
    """
    lo, hi = gamma_bounds(params, scheme)
    if not 0.0 < gamma <= hi:
        raise InfeasibleGamma(
            f"gamma={gamma:g} outside achievable interval (0, {hi:g}]")
    if scheme == NON_RECIPROCAL and gamma < lo:
        raise InfeasibleGamma(
            f"gamma={gamma:g} below the smallest enforceable floor {lo:g}; "
            "the ratio constraint cannot be met with equality")


def nmse_lower_bound(params: SystemParams, scheme: str) -> float:
    """Best LR NMSE attainable with every budget spent on forward pilots."""
    if scheme == RECIPROCAL:
        budget = min(params.budget_tx_reciprocal(),
                     params.budget_average_reciprocal())
        return 1.0 / (1.0 / params.var_h + budget / (params.n_t * params.var_w))
    if scheme == NON_RECIPROCAL:
        budget = min(params.budget_tx_nonreciprocal(),
                     params.budget_average_nonreciprocal())
        return 1.0 / (1.0 / params.var_hd + budget / (params.n_t * params.var_w))
    raise ValueError(f"unknown scheme {scheme!r}")


def sigma_sq_uplink(params: SystemParams, e_2: float) -> float:
    """Per-entry variance of the uplink channel estimate."""
    return (params.var_hu ** 2 * e_2
            / (params.var_hu * e_2 + params.n_l * params.var_wt))


@dataclass(frozen=True)
class DerivedConstants:
    """Bundle of the derived scalars both allocators lean on."""

    gamma_tilde: float
    mu: float
    sigma_sq: Optional[float] = None
    beta: Optional[float] = None


def derived_constants(params: SystemParams, gamma: float,
                      alloc: Optional[PowerAllocation] = None) -> DerivedConstants:
    gt = gamma_tilde(params, gamma)
    if gt < 0:
        raise InfeasibleGamma(f"gamma={gamma:g} exceeds the UR prior variance")
    mu = mu_threshold(params)
    if alloc is not None and alloc.scheme == NON_RECIPROCAL:
        return DerivedConstants(gamma_tilde=gt, mu=mu,
                                sigma_sq=sigma_sq_uplink(params, alloc.e_2),
                                beta=downlink_beta(params, alloc))
    return DerivedConstants(gamma_tilde=gt, mu=mu)
