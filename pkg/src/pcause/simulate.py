"""Sampling experiments for the point estimators and their variances.

A :class:`Scenario` is a population over a binary exposure and two
covariates: cell probabilities P(x, s, t) plus outcome conditionals
P(y | x, s).  Because the outcome ignores t given (x, s) and four built-in
scenarios make exposure depend on covariates only through t, the premises
of :mod:`pcause.covselect` hold by construction and different stratifiers
estimate the same quantities at different precision.

:func:`replicate_study` draws many datasets of size n, computes the PN and
PNS point estimates under each stratifier, and compares the spread of the
estimates across replications with the asymptotic variance formulas.
Replications that produce an empty cell under any requested stratifier are
discarded and redrawn with a fresh substream; the study records how often
that happened and refuses to summarize when more than a tenth of all draws
were degenerate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Mapping, Sequence, Union

import numpy as np

from .errors import DegenerateScenarioError, ParseError, ValidationError
from .identify import pn_point, pns_point
from .model import CountTable, StratifiedJoint, StratumKey, StratumTable

_SUM_TOL = 1e-9
_MAX_DISCARD_RATE = 0.10
_MAX_ATTEMPTS_PER_REP = 50

Source = Union[str, IO[str]]


@dataclass(frozen=True)
class Scenario:
    """A synthetic population with two covariates and known conditionals."""

    name: str
    cells: Mapping[tuple[int, str, str], float]
    outcome_conditionals: Mapping[tuple[int, str], float]
    s_name: str = "s"
    t_name: str = "t"

    def __post_init__(self) -> None:
        if self.s_name == self.t_name:
            raise ValidationError("covariate names must differ")
        cleaned = {}
        total = 0.0
        for (x, s, t), p in sorted(self.cells.items()):
            if x not in (0, 1):
                raise ValidationError(f"exposure level {x!r} not in {{0, 1}}")
            if not (p > 0.0):
                raise ValidationError(
                    f"cell (x={x}, {self.s_name}={s}, {self.t_name}={t}) "
                    f"needs positive probability, got {p!r}")
            cleaned[(x, str(s), str(t))] = float(p)
            total += p
        if abs(total - 1.0) > _SUM_TOL:
            raise ValidationError(f"cell probabilities sum to {total!r}, not 1")
        conds = {}
        for (x, s), p in sorted(self.outcome_conditionals.items()):
            if not (0.0 < p < 1.0):
                raise ValidationError(
                    f"outcome conditional for (x={x}, {self.s_name}={s}) "
                    f"must lie strictly inside (0, 1), got {p!r}")
            conds[(x, str(s))] = float(p)
        for (x, s, _t) in cleaned:
            if (x, s) not in conds:
                raise ValidationError(
                    f"missing outcome conditional for (x={x}, {self.s_name}={s})")
        object.__setattr__(self, "cells", cleaned)
        object.__setattr__(self, "outcome_conditionals", conds)

    @property
    def s_levels(self) -> tuple[str, ...]:
        return tuple(sorted({s for (_x, s, _t) in self.cells}))

    @property
    def t_levels(self) -> tuple[str, ...]:
        return tuple(sorted({t for (_x, _s, t) in self.cells}))

    def outcome_cells(self) -> tuple[tuple[tuple[int, str, str, int], float], ...]:
        """The sampling distribution over (x, s, t, y), in a fixed order."""
        out = []
        for (x, s, t), p in self.cells.items():
            q = self.outcome_conditionals[(x, s)]
            out.append(((x, s, t, 1), p * q))
            out.append(((x, s, t, 0), p * (1.0 - q)))
        return tuple(sorted(out))

    def population_joint(self, stratifier: Sequence[str],
                         n: int | None = None) -> StratifiedJoint:
        """The exact joint this scenario induces under a stratifier."""
        strat = tuple(stratifier)
        acc: dict[StratumKey, list[float]] = {}
        for (x, s, t, y), p in self.outcome_cells():
            full = StratumKey(((self.s_name, s), (self.t_name, t)))
            key = full.project(strat)
            cells = acc.setdefault(key, [0.0, 0.0, 0.0, 0.0])
            cells[_cell_slot(x, y)] += p
        strata = {}
        for key, quad in acc.items():
            w = sum(quad)
            strata[key] = StratumTable(
                p_exposed_event=quad[0] / w,
                p_exposed_noevent=quad[1] / w,
                p_unexposed_event=quad[2] / w,
                p_unexposed_noevent=quad[3] / w,
                weight=w,
            )
        return StratifiedJoint(strata=strata, covariates=strat, total_n=n)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "s_name": self.s_name,
            "t_name": self.t_name,
            "cells": [{"x": x, "s": s, "t": t, "p": p}
                      for (x, s, t), p in self.cells.items()],
            "outcome_conditionals": [{"x": x, "s": s, "p": p}
                                     for (x, s), p in
                                     self.outcome_conditionals.items()],
        }


def _cell_slot(x: int, y: int) -> int:
    if x == 1:
        return 0 if y == 1 else 1
    return 2 if y == 1 else 3


def scenario_from_dict(data: Mapping) -> Scenario:
    try:
        cells = {(int(e["x"]), str(e["s"]), str(e["t"])): float(e["p"])
                 for e in data["cells"]}
        conds = {(int(e["x"]), str(e["s"])): float(e["p"])
                 for e in data["outcome_conditionals"]}
        return Scenario(name=str(data.get("name", "scenario")),
                        cells=cells,
                        outcome_conditionals=conds,
                        s_name=str(data.get("s_name", "s")),
                        t_name=str(data.get("t_name", "t")))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed scenario: {exc}") from exc


def load_scenario(source: Source) -> Scenario:
    if hasattr(source, "read"):
        text = source.read()
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read {source}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"scenario file is not valid JSON: {exc}") from exc
    return scenario_from_dict(data)


def builtin_scenarios() -> tuple[Scenario, ...]:
    """Four populations with matched outcome conditionals.

    In all of them P(y | x, s) is 0.7/0.3 for the exposed in s=1/2 and
    0.8/0.4 for the unexposed, while the (x, s, t) design varies: 1 has a
    strong s-t association, 2 weakens it, 3 ties exposure strongly to t,
    and 4 is nearly balanced.
    """
    designs = {
        "setting-1": {(1, "1", "1"): 0.32, (1, "2", "1"): 0.08,
                      (1, "1", "2"): 0.02, (1, "2", "2"): 0.08,
                      (0, "1", "1"): 0.08, (0, "2", "1"): 0.02,
                      (0, "1", "2"): 0.08, (0, "2", "2"): 0.32},
        "setting-2": {(1, "1", "1"): 0.20, (1, "2", "1"): 0.05,
                      (1, "1", "2"): 0.04, (1, "2", "2"): 0.16,
                      (0, "1", "1"): 0.20, (0, "2", "1"): 0.05,
                      (0, "1", "2"): 0.06, (0, "2", "2"): 0.24},
        "setting-3": {(1, "1", "1"): 0.20, (1, "2", "1"): 0.20,
                      (1, "1", "2"): 0.04, (1, "2", "2"): 0.06,
                      (0, "1", "1"): 0.05, (0, "2", "1"): 0.05,
                      (0, "1", "2"): 0.16, (0, "2", "2"): 0.24},
        "setting-4": {(1, "1", "1"): 0.10, (1, "2", "1"): 0.10,
                      (1, "1", "2"): 0.10, (1, "2", "2"): 0.15,
                      (0, "1", "1"): 0.15, (0, "2", "1"): 0.15,
                      (0, "1", "2"): 0.10, (0, "2", "2"): 0.15},
    }
    conditionals = {(1, "1"): 0.7, (1, "2"): 0.3, (0, "1"): 0.8, (0, "2"): 0.4}
    return tuple(Scenario(name=name, cells=cells,
                          outcome_conditionals=conditionals)
                 for name, cells in designs.items())


def _sample_cells(scenario: Scenario, n: int,
                  rng: np.random.Generator) -> np.ndarray:
    order = scenario.outcome_cells()
    probs = np.array([p for _, p in order])
    return rng.multinomial(n, probs)


def sample_dataset(scenario: Scenario, n: int, seed: int) -> CountTable:
    """One multinomial draw of n subjects, as a count table over {s, t}.

    Identical (scenario, n, seed) triples produce identical tables.
    """
    if n < 1:
        raise ValidationError(f"sample size must be positive, got {n!r}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    counts = _sample_cells(scenario, n, rng)
    rows = []
    for ((x, s, t, y), _p), c in zip(scenario.outcome_cells(), counts):
        key = StratumKey(((scenario.s_name, s), (scenario.t_name, t)))
        rows.append((key, x, y, int(c)))
    return CountTable.from_rows(rows, covariates=(scenario.s_name,
                                                  scenario.t_name))


@dataclass(frozen=True)
class ReplicationResult:
    """Variance summary for one (quantity, stratifier) combination."""

    quantity: str
    stratifier: tuple[str, ...]
    n: int
    reps: int
    empirical_var: float
    mean_avar: float
    population_avar: float


@dataclass(frozen=True)
class ReplicationStudy:
    scenario: str
    n: int
    reps: int
    seed: int
    results: tuple[ReplicationResult, ...]
    discarded: int
    attempts: int

    @property
    def discard_rate(self) -> float:
        return self.discarded / self.attempts if self.attempts else 0.0


def _stratifier_layout(scenario: Scenario, stratifier: tuple[str, ...],
                       ) -> tuple[tuple[StratumKey, ...], np.ndarray]:
    """Map each sampling cell index to a (stratum, table slot) position."""
    keys: list[StratumKey] = []
    index: dict[StratumKey, int] = {}
    positions = np.empty(len(scenario.outcome_cells()), dtype=np.int64)
    for i, ((x, s, t, y), _p) in enumerate(scenario.outcome_cells()):
        full = StratumKey(((scenario.s_name, s), (scenario.t_name, t)))
        key = full.project(stratifier)
        if key not in index:
            index[key] = len(keys)
            keys.append(key)
        positions[i] = index[key] * 4 + _cell_slot(x, y)
    return tuple(keys), positions


def _joint_from_layout(keys: tuple[StratumKey, ...], sums: np.ndarray,
                       stratifier: tuple[str, ...], n: int) -> StratifiedJoint:
    # Same arithmetic as model.to_probabilities with no smoothing.
    strata = {}
    for j, key in enumerate(keys):
        quad = sums[4 * j:4 * j + 4]
        st_total = quad.sum()
        strata[key] = StratumTable(
            p_exposed_event=quad[0] / st_total,
            p_exposed_noevent=quad[1] / st_total,
            p_unexposed_event=quad[2] / st_total,
            p_unexposed_noevent=quad[3] / st_total,
            weight=float(st_total) / n,
        )
    return StratifiedJoint(strata=strata, covariates=stratifier, total_n=n)


def replicate_study(scenario: Scenario, n: int, reps: int, seed: int, *,
                    stratifiers: Sequence[Sequence[str]] | None = None,
                    ) -> ReplicationStudy:
    """Empirical versus asymptotic variance over many replications.

    Each replication r draws from a substream keyed by (seed, r, attempt);
    a draw with an empty (stratum, x, y) cell under any requested
    stratifier is discarded and the attempt counter advanced, so the
    surviving datasets are reproducible regardless of how many redraws
    other replications needed.
    """
    if reps < 2:
        raise ValidationError("need at least two replications for a variance")
    if n < 1:
        raise ValidationError(f"sample size must be positive, got {n!r}")
    if stratifiers is None:
        stratifiers = ((scenario.s_name,), (scenario.t_name,),
                       (scenario.s_name, scenario.t_name))
    strat_list = [tuple(sorted(strat)) for strat in stratifiers]
    if len(set(strat_list)) != len(strat_list):
        raise ValidationError("duplicate stratifiers")

    layouts = {strat: _stratifier_layout(scenario, strat)
               for strat in strat_list}
    n_cells = len(scenario.outcome_cells())
    probs = np.array([p for _, p in scenario.outcome_cells()])

    values: dict[tuple[str, tuple[str, ...]], list[float]] = {}
    avars: dict[tuple[str, tuple[str, ...]], list[float]] = {}
    for strat in strat_list:
        for quantity in ("PN", "PNS"):
            values[(quantity, strat)] = []
            avars[(quantity, strat)] = []

    discarded = 0
    attempts = 0
    for r in range(reps):
        for attempt in range(_MAX_ATTEMPTS_PER_REP):
            attempts += 1
            rng = np.random.default_rng(
                np.random.SeedSequence(seed, spawn_key=(r, attempt)))
            counts = rng.multinomial(n, probs)
            per_strat_sums = {}
            ok = True
            for strat in strat_list:
                keys, positions = layouts[strat]
                sums = np.bincount(positions, weights=counts,
                                   minlength=4 * len(keys))
                if sums.min() <= 0.0:
                    ok = False
                    break
                per_strat_sums[strat] = (keys, sums)
            if ok:
                break
            discarded += 1
        else:
            raise DegenerateScenarioError(
                f"replication {r}: {_MAX_ATTEMPTS_PER_REP} consecutive draws "
                f"had empty cells at n={n}; the scenario is too sparse")

        for strat in strat_list:
            keys, sums = per_strat_sums[strat]
            joint = _joint_from_layout(keys, sums, strat, n)
            pn = pn_point(joint)
            pns = pns_point(joint)
            values[("PN", strat)].append(pn.value)
            avars[("PN", strat)].append(pn.avar)
            values[("PNS", strat)].append(pns.value)
            avars[("PNS", strat)].append(pns.avar)

    if discarded / attempts > _MAX_DISCARD_RATE:
        raise DegenerateScenarioError(
            f"{discarded} of {attempts} draws had empty cells "
            f"(rate {discarded / attempts:.1%} exceeds {_MAX_DISCARD_RATE:.0%}); "
            f"increase n or merge strata")

    results = []
    for strat in strat_list:
        pop = {
            "PN": pn_point(scenario.population_joint(strat, n)).avar,
            "PNS": pns_point(scenario.population_joint(strat, n)).avar,
        }
        for quantity in ("PN", "PNS"):
            vals = values[(quantity, strat)]
            results.append(ReplicationResult(
                quantity=quantity,
                stratifier=strat,
                n=n,
                reps=reps,
                empirical_var=float(np.var(vals, ddof=1)),
                mean_avar=float(np.mean(avars[(quantity, strat)])),
                population_avar=pop[quantity],
            ))
    return ReplicationStudy(scenario=scenario.name, n=n, reps=reps, seed=seed,
                            results=tuple(results), discarded=discarded,
                            attempts=attempts)
