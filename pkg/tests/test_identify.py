import math

import numpy as np
import pytest

import pcause as pc
from pcause.identify import OUTSIDE_UNIT_WARNING

from conftest import random_monotone_stratum

TOL = 1e-12

def _scenario(name):
    return next(sc for sc in pc.builtin_scenarios() if sc.name == name)


FLAGGED_RISK_DIFFERENCES = {
    "1": -0.07575757575757575,
    "2": -0.17936117936117942,
    "3": -0.2571428571428571,
}


def _monotone_joint(rng, n_strata=3):
    strata = {}
    raw = rng.dirichlet(np.full(n_strata, 3.0))
    raw = 0.05 + 0.95 * raw / raw.sum()
    raw = raw / raw.sum()
    for i in range(n_strata):
        t = random_monotone_stratum(rng)
        strata[pc.StratumKey.of(g=str(i))] = pc.StratumTable(
            t.p_exposed_event, t.p_exposed_noevent,
            t.p_unexposed_event, t.p_unexposed_noevent, weight=float(raw[i]))
    return pc.StratifiedJoint(strata=strata, covariates=("g",))


class TestPointEstimates:
    def test_survival_fixture_values(self, cancer_joint):
        pn = pc.pn_point(cancer_joint)
        pns = pc.pns_point(cancer_joint)
        assert pn.value == pytest.approx(-0.6869850579528003, abs=1e-9)
        assert pns.value == pytest.approx(-0.15495611276861276, abs=1e-9)
        assert pn.quantity == "PN" and pns.quantity == "PNS"
        assert OUTSIDE_UNIT_WARNING in pn.warnings
        assert OUTSIDE_UNIT_WARNING in pns.warnings
        assert pn.n == cancer_joint.total_n == 192

    def test_in_range_estimate_has_no_warning(self):
        rng = np.random.default_rng(901)
        joint = _monotone_joint(rng)
        pn = pc.pn_point(joint, n=500)
        pns = pc.pns_point(joint, n=500)
        assert pn.warnings == () and pns.warnings == ()
        assert 0.0 <= pn.value <= 1.0
        assert 0.0 <= pns.value <= 1.0

    def test_single_stratum_closed_form(self):
        # risks 0.5 vs 0.2: PN = (0.5 - 0.2) / 0.5, PNS = 0.3
        t = pc.StratumTable(0.25, 0.25, 0.10, 0.40, weight=1.0)
        joint = pc.StratifiedJoint(
            strata={pc.StratumKey.of(g="1"): t}, covariates=("g",))
        assert pc.pn_point(joint, with_avar=False).value == pytest.approx(0.6, abs=TOL)
        assert pc.pns_point(joint, with_avar=False).value == pytest.approx(0.3, abs=TOL)

    def test_estimand_matches_direct_formula(self, cancer_joint):
        # PNS sums risk differences over strata; PN reweights them by the
        # exposure share before dividing by the exposed-case mass
        pns = 0.0
        pn_num = 0.0
        pxy = 0.0
        for _, t in cancer_joint.items():
            rd = t.risk_exposed - t.risk_unexposed
            pns += rd * t.weight
            pn_num += rd * t.p_exposed * t.weight
            pxy += t.p_exposed_event * t.weight
        assert pc.pns_point(cancer_joint, with_avar=False).value == \
            pytest.approx(pns, abs=TOL)
        assert pc.pn_point(cancer_joint, with_avar=False).value == \
            pytest.approx(pn_num / pxy, abs=TOL)


class TestAsymptoticVariance:
    def test_known_population_value(self):
        # two-stratum population with exact hand-checkable variance pieces
        strata = {
            pc.StratumKey.of(s="1"): pc.StratumTable(0.56, 0.24, 0.16, 0.04,
                                                     weight=0.5),
            pc.StratumKey.of(s="2"): pc.StratumTable(0.06, 0.14, 0.32, 0.48,
                                                     weight=0.5),
        }
        joint = pc.StratifiedJoint(strata=strata, covariates=("s",))
        est = pc.pns_point(joint, n=1000)
        base = 0.0
        for _, t in joint.items():
            rx, rxp = t.risk_exposed, t.risk_unexposed
            # arm masses are joint P(x, s), so one weight power survives
            base += (rx * (1 - rx) / (t.p_exposed * t.weight)
                     + rxp * (1 - rxp) / (t.p_unexposed * t.weight)) \
                * t.weight ** 2
        assert est.avar == pytest.approx(base / 1000.0, rel=1e-12)
        assert est.se == pytest.approx(math.sqrt(est.avar), abs=TOL)

    def test_exact_inverse_n_scaling(self):
        rng = np.random.default_rng(902)
        joint = _monotone_joint(rng)
        for point in (pc.pn_point, pc.pns_point):
            a500 = point(joint, n=500).avar
            a1000 = point(joint, n=1000).avar
            assert a500 == pytest.approx(2.0 * a1000, rel=1e-12)

    def test_missing_sample_size(self):
        rng = np.random.default_rng(903)
        joint = _monotone_joint(rng)  # synthetic joints carry no total_n
        with pytest.raises(pc.MissingSampleSizeError):
            pc.pn_point(joint)
        with pytest.raises(pc.MissingSampleSizeError):
            pc.pns_point(joint)
        assert pc.pn_point(joint, with_avar=False).avar is None

    def test_explicit_n_overrides_total(self, cancer_joint):
        est = pc.pns_point(cancer_joint, n=384)
        assert est.n == 384
        assert est.avar == pytest.approx(
            pc.pns_point(cancer_joint).avar * 192 / 384, rel=1e-12)

    def test_degenerate_population_has_zero_variance(self):
        t = pc.StratumTable(0.3, 0.0, 0.0, 0.7, weight=1.0)
        joint = pc.StratifiedJoint(
            strata={pc.StratumKey.of(g="1"): t}, covariates=("g",))
        est = pc.pns_point(joint, n=100)
        assert est.value == pytest.approx(1.0, abs=TOL)
        assert est.avar == 0.0

    def test_positivity_failure_names_stratum(self):
        strata = {
            pc.StratumKey.of(g="1"): pc.StratumTable(0.4, 0.4, 0.1, 0.1,
                                                     weight=0.5),
            pc.StratumKey.of(g="2"): pc.StratumTable(0.0, 0.0, 0.6, 0.4,
                                                     weight=0.5),
        }
        joint = pc.StratifiedJoint(strata=strata, covariates=("g",))
        with pytest.raises(pc.PositivityError, match="g=2"):
            pc.pn_point(joint, with_avar=False)


class TestStratifierInvariance:
    """Estimates agree across stratifiers when the extra covariate is inert."""

    def test_setting_one_population(self):
        scenario = _scenario("setting-1")
        values = {}
        for stratifier in (("s",), ("t",), ("s", "t")):
            joint = scenario.population_joint(stratifier, n=1000)
            values[stratifier] = (pc.pn_point(joint, with_avar=False).value,
                                  pc.pns_point(joint, with_avar=False).value)
        assert values[("s",)] == pytest.approx(values[("t",)], abs=TOL)
        assert values[("s",)] == pytest.approx(values[("s", "t")], abs=TOL)
        assert values[("s",)][0] == pytest.approx(-0.17482517482517487, abs=1e-9)
        assert values[("s",)][1] == pytest.approx(-0.09999999999999998, abs=1e-9)

    def test_setting_one_avar_ordering(self):
        scenario = _scenario("setting-1")
        avars = {}
        for stratifier in (("s",), ("t",), ("s", "t")):
            joint = scenario.population_joint(stratifier, n=1000)
            avars[stratifier] = (pc.pn_point(joint, n=1000).avar,
                                 pc.pns_point(joint, n=1000).avar)
        assert avars[("s",)][0] == pytest.approx(0.0034, abs=1e-4)
        assert avars[("s",)][1] == pytest.approx(0.0009, abs=1e-4)
        for i in (0, 1):
            assert avars[("s",)][i] <= avars[("s", "t")][i] + TOL
            assert avars[("s", "t")][i] <= avars[("t",)][i] + TOL


class TestMonotonicityDiagnostic:
    def test_survival_fixture_flags_everything(self, cancer_joint,
                                               cancer_experimental):
        report = pc.monotonicity_diagnostic(cancer_joint, cancer_experimental)
        assert len(report.risk_differences) == 3
        for key, rd in report.risk_differences:
            level = key.level("stage")
            assert rd == pytest.approx(FLAGGED_RISK_DIFFERENCES[level], abs=1e-6)
        assert set(report.flagged) == set(cancer_joint.keys())
        assert report.pn.value == pytest.approx(-0.6869850579528003, abs=1e-9)
        assert not report.pn_consistent
        assert not report.plausible

    def test_interval_consistency_checked(self, cancer_joint,
                                          cancer_experimental):
        report = pc.monotonicity_diagnostic(cancer_joint, cancer_experimental)
        assert report.pn_interval.method == "stratified"
        assert not report.pn_interval.contains(report.pn.value)
        assert not report.pns_interval.contains(report.pns.value)

    def test_monotone_population_is_plausible(self):
        t = pc.StratumTable(0.25, 0.25, 0.10, 0.40, weight=1.0)
        joint = pc.StratifiedJoint(
            strata={pc.StratumKey.of(g="1"): t}, covariates=("g",))
        exp = pc.ExperimentalQuantities.from_per_stratum(
            joint, {pc.StratumKey.of(g="1"): (0.5, 0.2)},
            provenance="measured-experimental")
        report = pc.monotonicity_diagnostic(joint, exp)
        assert report.flagged == ()
        assert report.pn.value == pytest.approx(0.6, abs=TOL)
        assert report.pn_consistent and report.pns_consistent
        assert report.plausible
