"""Sharp bounds for probabilities of causation.

For a binary exposure x and outcome y, three counterfactual quantities are
bounded from a joint distribution plus interventional outcome marginals:

* PN, necessity: P(y'_x' | x, y), the chance the event would have been
  avoided without exposure, among the exposed with the event.
* PS, sufficiency: P(y_x | x', y'), the chance exposure would have produced
  the event, among the unexposed without it.
* PNS: P(y_x, y'_x'), the joint chance exposure is both necessary and
  sufficient.

Within one stratum s, writing cells as P(x, y | s) and the interventional
pair as P(y_x | s), P(y_x' | s), the sharp conditional bounds are

    PN(s):  max{0, (P(y'_x'|s) - P(y'|s)) / P(x,y|s)}
            <= PN(s) <=
            min{1, (P(y'_x'|s) - P(x',y'|s)) / P(x,y|s)}

    PNS(s): max{0, P(y_x|s) - P(y|s), P(y'_x'|s) - P(y'|s),
                P(y_x|s) - P(y_x'|s)}
            <= PNS(s) <=
            min{P(y_x|s), P(y'_x'|s), P(x,y|s) + P(x',y'|s),
                P(y_x|s) - P(y_x'|s) + P(x',y|s) + P(x,y'|s)}

PS(s) is PN(s) on the relabeled table that swaps both exposure and outcome,
with the interventional pair mapped to (1 - P(y_x'|s), 1 - P(y_x|s)):

    PS(s):  max{0, (P(y_x|s) - P(y|s)) / P(x',y'|s)}
            <= PS(s) <=
            min{1, (P(y_x|s) - P(x,y|s)) / P(x',y'|s)}

The stratified bounds recombine the per-stratum extremes instead of
bounding the pooled table, which can only tighten the interval:

    PN:  sum_s max{0, P(y'_x'|s) - P(y'|s)} P(s) / P(x,y)
         <= PN <=
         sum_s min{P(x,y|s), P(y'_x'|s) - P(x',y'|s)} P(s) / P(x,y)

and likewise for PNS (weight-averaged conditional boxes) and for PS (with
denominator P(x',y')).  The classical unstratified bounds ("tian-pearl"
method here) apply the conditional formulas to the pooled table with the
marginal interventional pair; the stratified interval always nests inside
them.

Each interval records which candidate term produced each endpoint in every
stratum (:class:`TermChoice`), with ties resolved toward the earlier term
in the documented order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import IncompatibilityError, PositivityError, ValidationError
from .model import (
    ExperimentalQuantities,
    StratifiedJoint,
    StratumKey,
    StratumTable,
    stratum_violations,
    validate_compatibility,
)

QUANTITIES = ("PN", "PS", "PNS")
METHODS = ("conditional", "stratified", "tian-pearl", "oracle")

# Candidate terms, in tie-break order.  For PS the labels describe the
# swapped frame: "excess" is P(y_x|s) - P(y|s), "cell" caps at
# P(x',y'|s) and "margin" is P(y_x|s) - P(x,y|s).
PN_LOWER_TERMS = ("zero", "excess")
PN_UPPER_TERMS = ("cell", "margin")
PNS_LOWER_TERMS = ("zero", "treated_excess", "untreated_excess",
                   "risk_difference")
PNS_UPPER_TERMS = ("treated_event", "untreated_nonevent", "concordant_cells",
                   "discordant_margin")

_INVERT_TOL = 1e-9
_COMPAT_TOL = 1e-3


@dataclass(frozen=True)
class TermChoice:
    """Which candidate term won each endpoint within one stratum."""

    stratum: StratumKey
    lower: str
    upper: str


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    quantity: str
    method: str
    attainment: tuple[TermChoice, ...] = ()

    def __post_init__(self) -> None:
        if self.quantity not in QUANTITIES:
            raise ValidationError(f"unknown quantity {self.quantity!r}")
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        if self.lower > self.upper + _INVERT_TOL:
            raise ValidationError(
                f"interval lower {self.lower!r} exceeds upper {self.upper!r}")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, tol: float = _INVERT_TOL) -> bool:
        return self.lower - tol <= value <= self.upper + tol


def _argmax(values: Sequence[float]) -> int:
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    return best


def _argmin(values: Sequence[float]) -> int:
    best = 0
    for i in range(1, len(values)):
        if values[i] < values[best]:
            best = i
    return best


def _swap_pair(pair: tuple[float, float]) -> tuple[float, float]:
    # Under the exposure/outcome relabeling, P(y_x|s) maps to 1 - P(y_x'|s).
    return (1.0 - pair[1], 1.0 - pair[0])


def _necessity_terms(table: StratumTable, pair: tuple[float, float],
                     ) -> tuple[float, tuple[float, float], tuple[float, float]]:
    """Numerators of the PN candidate terms for one stratum.

    Returns (cell, lower numerators, upper numerators) where cell is
    P(x,y|s); dividing a selected numerator by the cell gives the
    conditional bound, while the stratified bound weight-sums numerators
    before dividing by P(x,y).  The selection by size is unaffected by
    the positive division, so both paths pick identical terms.
    """
    p_noevent_do_unexposed = 1.0 - pair[1]
    cell = table.p_exposed_event
    excess = p_noevent_do_unexposed - table.p_noevent
    margin = p_noevent_do_unexposed - table.p_unexposed_noevent
    return cell, (0.0, excess), (cell, margin)


def _joint_benefit_terms(table: StratumTable, pair: tuple[float, float],
                         ) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Candidate values for the PNS bounds in one stratum (no denominator)."""
    do_exposed, do_unexposed = pair
    p_noevent_do_unexposed = 1.0 - do_unexposed
    lows = (0.0,
            do_exposed - table.p_event,
            p_noevent_do_unexposed - table.p_noevent,
            do_exposed - do_unexposed)
    ups = (do_exposed,
           p_noevent_do_unexposed,
           table.p_exposed_event + table.p_unexposed_noevent,
           do_exposed - do_unexposed
           + table.p_unexposed_event + table.p_exposed_noevent)
    return lows, ups


def _require_compatible_stratum(table: StratumTable, pair: tuple[float, float],
                                key: StratumKey) -> None:
    violations = stratum_violations(table, pair, _COMPAT_TOL)
    if violations:
        detail = "; ".join(f"{name} by {amount:.3g}" for name, amount in violations)
        raise IncompatibilityError(
            f"stratum {key}: experimental pair conflicts with joint cells ({detail})")


def _finish(lower: float, upper: float, quantity: str, method: str,
            choices: tuple[TermChoice, ...], clamp: bool, where: str) -> Interval:
    if clamp:
        lower = min(1.0, max(0.0, lower))
        upper = min(1.0, max(0.0, upper))
    if lower > upper + _INVERT_TOL:
        raise IncompatibilityError(
            f"{quantity} bounds invert{where}: lower {lower:.6g} > upper {upper:.6g}; "
            "observational and experimental inputs conflict")
    return Interval(lower=lower, upper=upper, quantity=quantity, method=method,
                    attainment=choices)


def _necessity_box(table: StratumTable, pair: tuple[float, float], *,
                   quantity: str, method: str, key: StratumKey,
                   clamp: bool, validate: bool) -> Interval:
    if validate:
        _require_compatible_stratum(table, pair, key)
    cell, lows, ups = _necessity_terms(table, pair)
    if cell <= 0.0:
        frame = ("exposed cases" if quantity == "PN"
                 else "unexposed non-cases")
        raise PositivityError(
            f"{quantity} undefined in stratum {key}: no probability mass on {frame}")
    li, ui = _argmax(lows), _argmin(ups)
    lower = 0.0 if li == 0 else lows[1] / cell
    upper = 1.0 if ui == 0 else ups[1] / cell
    choice = TermChoice(key, PN_LOWER_TERMS[li], PN_UPPER_TERMS[ui])
    return _finish(lower, upper, quantity, method, (choice,), clamp,
                   where=f" in stratum {key}")


def _pooled_key() -> StratumKey:
    return StratumKey(())


def pn_interval_conditional(table: StratumTable, pair: tuple[float, float], *,
                            key: StratumKey | None = None, clamp: bool = False,
                            validate: bool = True) -> Interval:
    """Sharp bounds on PN(s) = P(y'_x' | x, y, s) for a single stratum."""
    return _necessity_box(table, pair, quantity="PN", method="conditional",
                          key=key if key is not None else _pooled_key(),
                          clamp=clamp, validate=validate)


def ps_interval_conditional(table: StratumTable, pair: tuple[float, float], *,
                            key: StratumKey | None = None, clamp: bool = False,
                            validate: bool = True) -> Interval:
    """Sharp bounds on PS(s) = P(y_x | x', y', s) for a single stratum.

    Computed exactly as PN on the swapped table; see the module docstring.
    """
    return _necessity_box(table.swap(), _swap_pair(pair), quantity="PS",
                          method="conditional",
                          key=key if key is not None else _pooled_key(),
                          clamp=clamp, validate=validate)


def pns_interval_conditional(table: StratumTable, pair: tuple[float, float], *,
                             key: StratumKey | None = None, clamp: bool = False,
                             validate: bool = True) -> Interval:
    """Sharp bounds on PNS(s) = P(y_x, y'_x' | s) for a single stratum."""
    key = key if key is not None else _pooled_key()
    if validate:
        _require_compatible_stratum(table, pair, key)
    lows, ups = _joint_benefit_terms(table, pair)
    li, ui = _argmax(lows), _argmin(ups)
    choice = TermChoice(key, PNS_LOWER_TERMS[li], PNS_UPPER_TERMS[ui])
    return _finish(lows[li], ups[ui], "PNS", "conditional", (choice,), clamp,
                   where=f" in stratum {key}")


def stratified_interval(quantity: str, joint: StratifiedJoint,
                        experimental: ExperimentalQuantities, *,
                        clamp: bool = False, validate: bool = True) -> Interval:
    """Covariate-adjusted bounds that recombine per-stratum extremes.

    Always at least as tight as the unstratified bounds on the same data;
    the two coincide when there is a single stratum.
    """
    if quantity not in QUANTITIES:
        raise ValidationError(f"unknown quantity {quantity!r}")
    if validate:
        report = validate_compatibility(joint, experimental, tol=_COMPAT_TOL)
        if not report.compatible:
            worst = max(report.violations, key=lambda v: v.amount)
            raise IncompatibilityError(
                f"{len(report.violations)} consistency violation(s); worst: "
                f"stratum {worst.stratum} {worst.constraint} by {worst.amount:.3g}")

    if joint.n_strata == 1:
        # With one stratum the weight is semantically 1 even if the stored
        # float drifted, so reuse the conditional computation verbatim.
        key, t = next(joint.items())
        pair = experimental.pair(key)
        box = {
            "PN": pn_interval_conditional,
            "PS": ps_interval_conditional,
            "PNS": pns_interval_conditional,
        }[quantity](t, pair, key=key, clamp=clamp, validate=False)
        return Interval(lower=box.lower, upper=box.upper, quantity=quantity,
                        method="stratified", attainment=box.attainment)

    lower_acc = 0.0
    upper_acc = 0.0
    denom = 0.0
    choices = []
    for key, t in joint.items():
        pair = experimental.pair(key)
        if quantity == "PNS":
            lows, ups = _joint_benefit_terms(t, pair)
            li, ui = _argmax(lows), _argmin(ups)
            lower_acc += lows[li] * t.weight
            upper_acc += ups[ui] * t.weight
            choices.append(TermChoice(key, PNS_LOWER_TERMS[li], PNS_UPPER_TERMS[ui]))
        else:
            if quantity == "PN":
                tt, pp = t, pair
            else:
                tt, pp = t.swap(), _swap_pair(pair)
            cell, lows, ups = _necessity_terms(tt, pp)
            li, ui = _argmax(lows), _argmin(ups)
            denom += cell * t.weight
            lower_acc += lows[li] * t.weight
            upper_acc += ups[ui] * t.weight
            choices.append(TermChoice(key, PN_LOWER_TERMS[li], PN_UPPER_TERMS[ui]))

    if quantity == "PNS":
        lower, upper = lower_acc, upper_acc
    else:
        if denom <= 0.0:
            frame = "exposed cases" if quantity == "PN" else "unexposed non-cases"
            raise PositivityError(f"{quantity} undefined: no {frame} overall")
        lower, upper = lower_acc / denom, upper_acc / denom
    return _finish(lower, upper, quantity, "stratified", tuple(choices), clamp,
                   where="")


def tian_pearl_interval(quantity: str, table: StratumTable,
                        marginal: tuple[float, float], *, clamp: bool = False,
                        validate: bool = True) -> Interval:
    """Classical unstratified bounds from the pooled table and the marginal
    interventional pair.  Same formulas as the conditional boxes, applied
    once to the whole population.
    """
    if quantity not in QUANTITIES:
        raise ValidationError(f"unknown quantity {quantity!r}")
    key = _pooled_key()
    if quantity == "PN":
        return _necessity_box(table, marginal, quantity="PN",
                              method="tian-pearl", key=key, clamp=clamp,
                              validate=validate)
    if quantity == "PS":
        return _necessity_box(table.swap(), _swap_pair(marginal), quantity="PS",
                              method="tian-pearl", key=key, clamp=clamp,
                              validate=validate)
    if validate:
        _require_compatible_stratum(table, marginal, key)
    lows, ups = _joint_benefit_terms(table, marginal)
    li, ui = _argmax(lows), _argmin(ups)
    choice = TermChoice(key, PNS_LOWER_TERMS[li], PNS_UPPER_TERMS[ui])
    return _finish(lows[li], ups[ui], "PNS", "tian-pearl", (choice,), clamp,
                   where="")
