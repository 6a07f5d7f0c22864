"""Independent verification of the closed-form bounds.

Within one stratum, classify units by their pair of potential outcomes:

    always    y under either exposure      (y_x = 1, y_x' = 1)
    helped    y only if exposed            (y_x = 1, y_x' = 0)
    hurt      y only if unexposed          (y_x = 0, y_x' = 1)
    never     y under neither              (y_x = 0, y_x' = 0)

Any underlying mechanism is a pair of distributions over these four types,
one per exposure arm.  Matching the stratum's observable cells and its
interventional pair fixes, for the exposed arm,

    q_always + q_helped = P(y | x, s)
    q_always + q_hurt   = (P(y_x' | s) - P(x', y | s)) / P(x | s)

and the mirror-image equations for the unexposed arm, leaving exactly one
free parameter per arm (the always-mass).  Sweeping both parameters over
their feasible intervals and evaluating PN, PS and PNS directly from the
type masses traces every attainable value.  The functionals are linear in
the free parameters, so the interval endpoints (always included in the
sweep) attain the exact extremes; interior grid points serve as a
consistency check that nothing inside beats them.

This search shares no formulas with :mod:`pcause.bounds`, which is the
point: :func:`verify_bounds` compares the two routes per stratum and
quantity, and reports any discrepancy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bounds
from .errors import IncompatibilityError, PositivityError, ValidationError
from .model import (
    ExperimentalQuantities,
    StratifiedJoint,
    StratumKey,
    StratumTable,
    stratum_violations,
)

RESPONSE_TYPES = ("always", "helped", "hurt", "never")

_MASS_TOL = 1e-9


@dataclass(frozen=True)
class ResponseTypeDist:
    """Type masses for both arms of one stratum; a witness distribution."""

    exposed: tuple[float, float, float, float]
    unexposed: tuple[float, float, float, float]
    p_exposed: float

    def __post_init__(self) -> None:
        for arm in (self.exposed, self.unexposed):
            if len(arm) != 4:
                raise ValidationError("each arm needs four type masses")
            if min(arm) < -_MASS_TOL:
                raise ValidationError(f"negative type mass in {arm}")
            if abs(sum(arm) - 1.0) > 1e-6:
                raise ValidationError(f"type masses {arm} do not sum to 1")
        if not (0.0 < self.p_exposed < 1.0):
            raise ValidationError("arm probability must lie inside (0, 1)")


def _clip01(v: float) -> float:
    return min(1.0, max(0.0, v))


def _arm_parameters(table: StratumTable, pair: tuple[float, float],
                    tol: float) -> tuple[float, float, float, float, float, float]:
    """(alpha, beta, gamma, delta, p_x, p_x') for the two matching systems.

    alpha and delta are the observational risks; beta and gamma are the
    cross-arm interventional conditionals P(y_x' | x, s) and P(y_x | x', s)
    recovered from the stratum pair.  Infeasible inputs (beta or gamma
    outside [0, 1] beyond ``tol``) raise IncompatibilityError; the same
    four inequalities back :func:`pcause.model.validate_compatibility`.
    """
    violations = stratum_violations(table, pair, tol)
    if violations:
        detail = "; ".join(f"{name} by {amount:.3g}" for name, amount in violations)
        raise IncompatibilityError(
            f"no response-type distribution matches the inputs ({detail})")
    p_x, p_xp = table.p_exposed, table.p_unexposed
    if p_x <= 0.0 or p_xp <= 0.0:
        raise PositivityError("both exposure arms need positive probability")
    alpha = table.risk_exposed
    delta = table.risk_unexposed
    beta = _clip01((pair[1] - table.p_unexposed_event) / p_x)
    gamma = _clip01((pair[0] - table.p_exposed_event) / p_xp)
    return alpha, beta, gamma, delta, p_x, p_xp


def _grid(lo: float, hi: float, resolution: float) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    steps = int(np.ceil((hi - lo) / resolution)) + 1
    return np.linspace(lo, hi, steps)


def _arm_masses(fixed_y: float, fixed_cross: float,
                free: np.ndarray) -> tuple[np.ndarray, ...]:
    """Type masses (always, helped, hurt, never) along a grid of the
    always-mass, given the two matching constraints of one arm."""
    always = free
    helped = fixed_y - free
    hurt = fixed_cross - free
    never = 1.0 - fixed_y - fixed_cross + free
    stacked = np.concatenate([always, helped, hurt, never])
    if stacked.min() < -_MASS_TOL:
        raise RuntimeError(
            "response-type mass went negative; feasibility screening is broken")
    return always, helped, hurt, never


def dist_at(table: StratumTable, pair: tuple[float, float], a: float, b: float,
            *, tol: float = 1e-3) -> ResponseTypeDist:
    """The witness distribution with always-masses (a, b) in the two arms."""
    alpha, beta, gamma, delta, p_x, _ = _arm_parameters(table, pair, tol)
    ranges = (("a", a, max(0.0, alpha + beta - 1.0), min(alpha, beta)),
              ("b", b, max(0.0, gamma + delta - 1.0), min(gamma, delta)))
    for name, free, lo, hi in ranges:
        if not (lo - _MASS_TOL <= free <= hi + _MASS_TOL):
            raise ValidationError(
                f"always-mass {name}={free!r} outside [{lo:.6g}, {hi:.6g}]")
    ex = _arm_masses(alpha, beta, np.array([a]))
    un = _arm_masses(gamma, delta, np.array([b]))
    return ResponseTypeDist(
        exposed=tuple(float(m[0]) for m in ex),
        unexposed=tuple(float(m[0]) for m in un),
        p_exposed=p_x,
    )


def feasible_extrema(table: StratumTable, pair: tuple[float, float],
                     quantity: str, resolution: float = 1e-3, *,
                     no_prevention: bool = False,
                     tol: float = 1e-3) -> bounds.Interval:
    """Extremes of one quantity over all matching type distributions.

    With ``no_prevention`` the hurt mass is pinned to zero in both arms,
    which collapses the sweep to a single distribution (or fails when none
    without prevention fits the inputs).
    """
    if quantity not in bounds.QUANTITIES:
        raise ValidationError(f"unknown quantity {quantity!r}")
    if not (0.0 < resolution <= 0.1):
        raise ValidationError(f"resolution {resolution!r} outside (0, 0.1]")
    alpha, beta, gamma, delta, p_x, p_xp = _arm_parameters(table, pair, tol)

    a_hi = min(alpha, beta)
    a_lo = min(max(0.0, alpha + beta - 1.0), a_hi)
    b_hi = min(gamma, delta)
    b_lo = min(max(0.0, gamma + delta - 1.0), b_hi)

    if no_prevention:
        # zero hurt mass forces the always-mass to the cross-arm constraint
        if beta > alpha + tol or delta > gamma + tol:
            raise IncompatibilityError(
                "no distribution without prevention matches the inputs")
        a_pts = np.array([min(beta, a_hi)])
        b_pts = np.array([min(delta, b_hi)])
    else:
        a_pts = _grid(a_lo, a_hi, resolution)
        b_pts = _grid(b_lo, b_hi, resolution)

    _, helped_x, _, _ = _arm_masses(alpha, beta, a_pts)
    _, helped_xp, _, never_xp = _arm_masses(gamma, delta, b_pts)

    if quantity == "PN":
        if table.p_exposed_event <= 0.0:
            raise PositivityError("PN undefined: no exposed cases in stratum")
        values = helped_x / alpha
        lower, upper = float(values.min()), float(values.max())
    elif quantity == "PS":
        if table.p_unexposed_noevent <= 0.0:
            raise PositivityError("PS undefined: no unexposed non-cases in stratum")
        values = helped_xp / (helped_xp + never_xp)
        lower, upper = float(values.min()), float(values.max())
    else:
        # separable in the two free parameters, so the grid minimum of the
        # sum is the sum of the per-arm minima (and likewise the maximum)
        contrib_x = p_x * helped_x
        contrib_xp = p_xp * helped_xp
        lower = float(contrib_x.min() + contrib_xp.min())
        upper = float(contrib_x.max() + contrib_xp.max())
    return bounds.Interval(lower=lower, upper=upper, quantity=quantity,
                           method="oracle")


@dataclass(frozen=True)
class VerificationEntry:
    stratum: StratumKey
    quantity: str
    closed: bounds.Interval
    searched: bounds.Interval

    @property
    def discrepancy(self) -> float:
        return max(abs(self.closed.lower - self.searched.lower),
                   abs(self.closed.upper - self.searched.upper))


@dataclass(frozen=True)
class VerificationReport:
    entries: tuple[VerificationEntry, ...]
    tol: float
    resolution: float

    @property
    def max_discrepancy(self) -> float:
        return max(e.discrepancy for e in self.entries)

    @property
    def failures(self) -> tuple[VerificationEntry, ...]:
        return tuple(e for e in self.entries if e.discrepancy > self.tol)

    @property
    def passed(self) -> bool:
        return not self.failures


def verify_bounds(joint: StratifiedJoint,
                  experimental: ExperimentalQuantities, *,
                  tol: float = 2e-3,
                  resolution: float = 1e-3) -> VerificationReport:
    """Compare every conditional box against the type-distribution search."""
    closed_forms = {
        "PN": lambda t, pair, key: bounds.pn_interval_conditional(t, pair, key=key),
        "PS": lambda t, pair, key: bounds.ps_interval_conditional(t, pair, key=key),
        "PNS": lambda t, pair, key: bounds.pns_interval_conditional(t, pair, key=key),
    }
    entries = []
    for key, table in joint.items():
        pair = experimental.pair(key)
        for quantity in bounds.QUANTITIES:
            closed = closed_forms[quantity](table, pair, key)
            searched = feasible_extrema(table, pair, quantity,
                                        resolution=resolution)
            entries.append(VerificationEntry(stratum=key, quantity=quantity,
                                             closed=closed, searched=searched))
    return VerificationReport(entries=tuple(entries), tol=tol,
                              resolution=resolution)
