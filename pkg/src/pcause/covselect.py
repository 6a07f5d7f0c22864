"""Choosing which covariates to stratify on.

With two candidate stratifiers s and t available, the point estimators of
:mod:`pcause.identify` stay consistent under any of {s}, {t}, {s, t} as
long as assignment is ignorable given the chosen set, but their precision
differs.  Two conditional independence premises order the asymptotic
variances:

* y independent of t given (x, s): t carries no outcome information beyond
  s, so a.var under {s} is no larger than under {s, t}.
* x independent of s given t: s carries no assignment information beyond
  t, so a.var under {s, t} is no larger than under {t}.

When both hold, stratifying by s alone is (weakly) best for PN and PNS.
Each premise can be checked exactly on a known joint distribution, or with
a likelihood-ratio (G) test against the implied counts of a finite sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import chi2

from .errors import MissingSampleSizeError, ValidationError
from .identify import Estimate, pn_point, pns_point
from .model import StratifiedJoint, StratumKey, StratumTable, collapse

OUTCOME_CI = "y-indep-t-given-xs"
EXPOSURE_CI = "x-indep-s-given-t"
MODES = ("exact-probability", "count-test")

_AVAR_SLACK = 1e-12


@dataclass(frozen=True)
class CIRelation:
    """One of the two premises, with covariate names bound to roles."""

    kind: str
    s: str
    t: str

    def __post_init__(self) -> None:
        if self.kind not in (OUTCOME_CI, EXPOSURE_CI):
            raise ValidationError(f"unknown relation kind {self.kind!r}")
        if not self.s or not self.t or self.s == self.t:
            raise ValidationError("relation needs two distinct covariate names")


@dataclass(frozen=True)
class CIVerdict:
    relation: CIRelation
    mode: str
    holds: bool
    threshold: float
    max_deviation: float | None = None
    statistic: float | None = None
    df: int | None = None
    p_value: float | None = None


def _require_pair(joint: StratifiedJoint, s: str, t: str) -> None:
    if joint.covariates != tuple(sorted((s, t))):
        raise ValidationError(
            f"joint is stratified by {joint.covariates}, expected {s!r} and {t!r}")


def _exact_deviation(joint: StratifiedJoint, relation: CIRelation) -> float:
    s, t = relation.s, relation.t
    if relation.kind == EXPOSURE_CI:
        coarse = collapse(joint, (t,))
        dev = 0.0
        for key, table in joint.items():
            ref = coarse.strata[key.project((t,))]
            dev = max(dev, abs(table.p_exposed - ref.p_exposed))
        return dev
    coarse = collapse(joint, (s,))
    dev = 0.0
    for key, table in joint.items():
        ref = coarse.strata[key.project((s,))]
        dev = max(dev, abs(table.risk_exposed - ref.risk_exposed))
        dev = max(dev, abs(table.risk_unexposed - ref.risk_unexposed))
    return dev


def _level_maps(joint: StratifiedJoint, s: str, t: str,
                ) -> tuple[tuple[str, ...], tuple[str, ...]]:
    s_levels = sorted({key.level(s) for key in joint.keys()})
    t_levels = sorted({key.level(t) for key in joint.keys()})
    return tuple(s_levels), tuple(t_levels)


def _g_statistic(observed: Mapping, row_margin: Mapping, col_margin: Mapping,
                 total: Mapping) -> float:
    """2 * sum n * ln(n * n_block / (n_row * n_col)) over nonzero cells.

    Keys of ``observed`` are (block, row, col); the margins are indexed by
    (block, row), (block, col) and block.
    """
    g = 0.0
    for (block, row, col), n in observed.items():
        if n <= 0.0:
            continue
        g += n * np.log(n * total[block] / (row_margin[(block, row)]
                                            * col_margin[(block, col)]))
    return 2.0 * g


def _count_test(joint: StratifiedJoint, relation: CIRelation,
                n: int) -> tuple[float, int]:
    s, t = relation.s, relation.t
    s_levels, t_levels = _level_maps(joint, s, t)

    observed: dict = {}
    if relation.kind == EXPOSURE_CI:
        # blocks are t levels, rows are s levels, columns are exposure
        for key, table in joint.items():
            block, row = key.level(t), key.level(s)
            observed[(block, row, 1)] = table.p_exposed * table.weight * n
            observed[(block, row, 0)] = table.p_unexposed * table.weight * n
        df = len(t_levels) * (len(s_levels) - 1) * (2 - 1)
    else:
        # blocks are (x, s) pairs, rows are t levels, columns are outcome
        for key, table in joint.items():
            row = key.level(t)
            for x in (1, 0):
                for y in (1, 0):
                    block = (x, key.level(s))
                    observed[(block, row, y)] = table.cell(x, y) * table.weight * n
        df = 2 * len(s_levels) * (2 - 1) * (len(t_levels) - 1)

    row_margin: dict = {}
    col_margin: dict = {}
    total: dict = {}
    for (block, row, col), count in observed.items():
        row_margin[(block, row)] = row_margin.get((block, row), 0.0) + count
        col_margin[(block, col)] = col_margin.get((block, col), 0.0) + count
        total[block] = total.get(block, 0.0) + count
    return _g_statistic(observed, row_margin, col_margin, total), df


def ci_check(joint: StratifiedJoint, relation: CIRelation,
             mode: str = "exact-probability", *, tol: float = 1e-9,
             alpha: float = 0.05, n: int | None = None) -> CIVerdict:
    """Test one premise on a joint stratified by exactly {s, t}.

    ``exact-probability`` compares the relevant conditionals cell by cell
    (suitable when the joint is a known distribution; widen ``tol`` for
    empirical frequencies).  ``count-test`` runs a G test on the counts
    implied by the joint at its sample size.
    """
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}")
    _require_pair(joint, relation.s, relation.t)

    if mode == "exact-probability":
        dev = _exact_deviation(joint, relation)
        return CIVerdict(relation=relation, mode=mode, holds=dev <= tol,
                         threshold=tol, max_deviation=dev)

    n_eff = n if n is not None else joint.total_n
    if n_eff is None:
        raise MissingSampleSizeError("the count-test mode needs a sample size")
    statistic, df = _count_test(joint, relation, n_eff)
    p_value = 1.0 if df == 0 else float(chi2.sf(statistic, df))
    return CIVerdict(relation=relation, mode=mode, holds=p_value >= alpha,
                     threshold=alpha, statistic=statistic, df=df,
                     p_value=p_value)


@dataclass(frozen=True)
class CandidateSummary:
    stratifier: tuple[str, ...]
    pn: Estimate
    pns: Estimate


@dataclass(frozen=True)
class OrderingVerdict:
    """One predicted a.var comparison and whether the data bear it out."""

    quantity: str
    lhs: tuple[str, ...]
    rhs: tuple[str, ...]
    lhs_avar: float
    rhs_avar: float
    premise: CIVerdict

    @property
    def guaranteed(self) -> bool:
        return self.premise.holds

    @property
    def observed(self) -> bool:
        return self.lhs_avar <= self.rhs_avar + _AVAR_SLACK


@dataclass(frozen=True)
class SelectionReport:
    candidates: tuple[CandidateSummary, ...]
    premises: tuple[CIVerdict, CIVerdict]
    orderings: tuple[OrderingVerdict, ...]
    recommendation: tuple[str, ...] | None
    note: str


def compare_covariate_sets(joint: StratifiedJoint, s: str, t: str, *,
                           n: int | None = None,
                           mode: str = "exact-probability",
                           tol: float = 1e-9,
                           alpha: float = 0.05) -> SelectionReport:
    """Estimate PN and PNS under {s}, {t} and {s, t} and compare precision.

    A stratifier is recommended only when both premises hold, in which
    case the predicted orderings make the comparison trustworthy.
    """
    if s == t:
        raise ValidationError("the two candidate covariates must differ")
    _require_pair(joint, s, t)
    n_eff = n if n is not None else joint.total_n

    stratifiers = ((s,), (t,), tuple(sorted((s, t))))
    candidates = []
    by_strat: dict[tuple[str, ...], CandidateSummary] = {}
    for strat in stratifiers:
        sub = collapse(joint, strat)
        summary = CandidateSummary(
            stratifier=strat,
            pn=pn_point(sub, n=n_eff),
            pns=pns_point(sub, n=n_eff),
        )
        candidates.append(summary)
        by_strat[strat] = summary

    outcome = ci_check(joint, CIRelation(OUTCOME_CI, s, t), mode,
                       tol=tol, alpha=alpha, n=n_eff)
    exposure = ci_check(joint, CIRelation(EXPOSURE_CI, s, t), mode,
                        tol=tol, alpha=alpha, n=n_eff)

    both = tuple(sorted((s, t)))
    orderings = []
    for quantity in ("PN", "PNS"):
        pick = (lambda c: c.pn) if quantity == "PN" else (lambda c: c.pns)
        orderings.append(OrderingVerdict(
            quantity=quantity, lhs=(s,), rhs=both,
            lhs_avar=pick(by_strat[(s,)]).avar,
            rhs_avar=pick(by_strat[both]).avar,
            premise=outcome))
        orderings.append(OrderingVerdict(
            quantity=quantity, lhs=both, rhs=(t,),
            lhs_avar=pick(by_strat[both]).avar,
            rhs_avar=pick(by_strat[(t,)]).avar,
            premise=exposure))

    if outcome.holds and exposure.holds:
        best_pn = min(candidates, key=lambda c: c.pn.avar).stratifier
        best_pns = min(candidates, key=lambda c: c.pns.avar).stratifier
        if best_pn == best_pns:
            recommendation = best_pn
            note = "both premises hold; the recommended stratifier minimizes " \
                   "the asymptotic variance of PN and PNS"
        else:
            recommendation = None
            note = "both premises hold but PN and PNS favor different stratifiers"
    else:
        recommendation = None
        note = "conditional independence premises not established; " \
               "the variance orderings are not guaranteed"

    return SelectionReport(candidates=tuple(candidates),
                           premises=(outcome, exposure),
                           orderings=tuple(orderings),
                           recommendation=recommendation,
                           note=note)


def _simplex(rng: np.random.Generator, k: int) -> np.ndarray:
    v = rng.uniform(0.2, 0.8, size=k)
    return v / v.sum()


def random_ci_joint(rng: np.random.Generator, *, s_name: str = "s",
                    t_name: str = "t", s_levels: int = 2,
                    t_levels: int = 2) -> StratifiedJoint:
    """A random joint over {s, t} satisfying both premises by construction.

    Exposure depends on covariates only through t, the outcome only
    through (x, s).  Cells are kept away from zero so variance formulas
    stay well conditioned.
    """
    if s_name == t_name:
        raise ValidationError("covariate names must differ")
    t_probs = _simplex(rng, t_levels)
    s_given_t = [_simplex(rng, s_levels) for _ in range(t_levels)]
    x_given_t = rng.uniform(0.2, 0.8, size=t_levels)
    y_given_xs = {(x, si): float(rng.uniform(0.05, 0.95))
                  for si in range(s_levels) for x in (1, 0)}

    strata = {}
    for ti in range(t_levels):
        for si in range(s_levels):
            px = float(x_given_t[ti])
            key = StratumKey(((s_name, str(si + 1)), (t_name, str(ti + 1))))
            strata[key] = StratumTable(
                p_exposed_event=px * y_given_xs[(1, si)],
                p_exposed_noevent=px * (1.0 - y_given_xs[(1, si)]),
                p_unexposed_event=(1.0 - px) * y_given_xs[(0, si)],
                p_unexposed_noevent=(1.0 - px) * (1.0 - y_given_xs[(0, si)]),
                weight=float(t_probs[ti] * s_given_t[ti][si]),
            )
    return StratifiedJoint(strata=strata, covariates=(s_name, t_name))
