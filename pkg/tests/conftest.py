"""Shared fixtures and random-instance generators."""

from pathlib import Path

import numpy as np
import pytest

import pcause as pc

DATA_DIR = Path(__file__).parent / "data"
CANCER_CSV = DATA_DIR / "breast_cancer.csv"


@pytest.fixture(scope="session")
def cancer_counts():
    return pc.load_counts(CANCER_CSV)


@pytest.fixture(scope="session")
def cancer_joint(cancer_counts):
    return pc.to_probabilities(cancer_counts)


@pytest.fixture(scope="session")
def cancer_experimental(cancer_joint):
    return pc.adjusted_experimental(cancer_joint)


def random_stratum(rng: np.random.Generator, weight: float = 1.0,
                   min_cell: float = 0.02) -> pc.StratumTable:
    """A strictly positive random 2x2 table; cells kept off the boundary."""
    cells = rng.dirichlet(np.full(4, 2.0))
    while cells.min() < min_cell:
        cells = rng.dirichlet(np.full(4, 2.0))
    return pc.StratumTable(
        p_exposed_event=float(cells[0]),
        p_exposed_noevent=float(cells[1]),
        p_unexposed_event=float(cells[2]),
        p_unexposed_noevent=float(cells[3]),
        weight=weight,
    )


def random_pair(rng: np.random.Generator,
                table: pc.StratumTable) -> tuple[float, float]:
    """A uniform interventional pair inside the consistency box."""
    do_x = rng.uniform(table.p_exposed_event, 1.0 - table.p_exposed_noevent)
    do_xp = rng.uniform(table.p_unexposed_event,
                        1.0 - table.p_unexposed_noevent)
    return float(do_x), float(do_xp)


def random_joint(rng: np.random.Generator, n_strata: int = 3,
                 covariate: str = "g") -> pc.StratifiedJoint:
    weights = rng.dirichlet(np.full(n_strata, 3.0))
    while weights.min() < 0.05:
        weights = rng.dirichlet(np.full(n_strata, 3.0))
    strata = {
        pc.StratumKey(((covariate, str(i + 1)),)):
            random_stratum(rng, weight=float(weights[i]))
        for i in range(n_strata)
    }
    return pc.StratifiedJoint(strata=strata, covariates=(covariate,))


def random_instance(rng: np.random.Generator, n_strata: int = 3,
                    ) -> tuple[pc.StratifiedJoint, pc.ExperimentalQuantities]:
    """A random joint plus compatible measured experimental pairs."""
    joint = random_joint(rng, n_strata=n_strata)
    pairs = {key: random_pair(rng, table) for key, table in joint.items()}
    experimental = pc.ExperimentalQuantities.from_per_stratum(
        joint, pairs, provenance="measured-experimental")
    return joint, experimental


def random_monotone_stratum(rng: np.random.Generator) -> pc.StratumTable:
    """A table whose exposed risk dominates the unexposed risk, so a
    no-prevention mechanism exists under ignorable assignment."""
    while True:
        p_x = float(rng.uniform(0.15, 0.85))
        risk_lo = float(rng.uniform(0.05, 0.9))
        risk_hi = float(rng.uniform(risk_lo, 0.95))
        table = pc.StratumTable(
            p_exposed_event=p_x * risk_hi,
            p_exposed_noevent=p_x * (1.0 - risk_hi),
            p_unexposed_event=(1.0 - p_x) * risk_lo,
            p_unexposed_noevent=(1.0 - p_x) * (1.0 - risk_lo),
            weight=1.0,
        )
        if table.strictly_positive:
            return table
