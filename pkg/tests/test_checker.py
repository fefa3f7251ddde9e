import json

import numpy as np
import pytest

import oracles
from conftest import INSTANCES, PHI, SCHEDULE
from qmcverify import checker, models, spectral
from qmcverify.checker import CheckOptions, ChainAnalysis, KSource, Value, model_check, model_check_refined, trajectory
from qmcverify.linalg import QMC
from qmcverify.mltl import INV_SQRT2, TRUE, AtomicProp, ProbInterval, UnknownPropositionError, label, parse
from qmcverify.neighborhood import Mode


def trace_word(analysis, aps, verdict):
    """Labels of the simulated trace up to ``K + 4p`` with the last ``p`` as the loop."""
    p = analysis.period
    n = verdict.k_distance + 4 * p
    labels = [label(analysis.state(i), aps) for i in range(n)]
    return labels[: n - p], labels[n - p:]


def definite_at_or_after_halving(verdicts, expected):
    """Table verdict at 0.125, or Unknown there and the verdict one halving later."""
    at, after = verdicts[SCHEDULE.index(0.125)], verdicts[SCHEDULE.index(0.0625)]
    return at.value is expected or (at.value is Value.UNKNOWN and after.value is expected)


class TestTable1:
    def test_phi0_unknown_at_half(self, table1_runs):
        assert table1_runs["quantum", "phi0"][0].value is Value.UNKNOWN

    def test_phi0_true(self, table1_runs):
        assert definite_at_or_after_halving(table1_runs["quantum", "phi0"], Value.TRUE)

    def test_phi1_false(self, table1_runs):
        verdicts = table1_runs["quantum", "phi1"]
        assert definite_at_or_after_halving(verdicts, Value.FALSE)
        false = next(v for v in verdicts if v.value is Value.FALSE)
        assert false.counterexample is not None

    def test_refined_phi0(self, qwalk_s1, qaps):
        v = model_check_refined(qwalk_s1.qmc, qaps, parse(PHI["phi0"]), 0.5, 3, analysis=qwalk_s1)
        assert v.value is Value.TRUE
        assert v.epsilon in (0.125, 0.0625)
        assert [e for e, _ in v.history] == [0.5, 0.25, 0.125, 0.0625][: len(v.history)]

    @pytest.mark.parametrize("key", list(INSTANCES))
    def test_sound_against_trace(self, key, table1_runs, request):
        chain, aps_name = INSTANCES[key]
        analysis, aps = request.getfixturevalue(chain), request.getfixturevalue(aps_name)
        phi = parse(PHI[key[1]])
        for v in table1_runs[key]:
            if not v.value.definite:
                continue
            stem, loop = trace_word(analysis, aps, v)
            assert v.language.contains(stem, loop)
            assert oracles.holds(phi, stem, loop) == (v.value is Value.TRUE)
            if v.value is Value.FALSE:
                w = v.counterexample
                assert v.language.contains(w.stem, w.loop) and not oracles.holds(phi, w.stem, w.loop)

    @pytest.mark.parametrize("key", list(INSTANCES))
    def test_monotone_information(self, key, table1_runs):
        values = [v.value for v in table1_runs[key]]
        for a, b in zip(values, values[1:]):
            if a.definite:
                assert b is a


class TestModelCheck:
    def test_true_formula(self):
        g = models.quantum_walk(models.WalkSpec(4, 1))
        v = model_check_refined(g, [], TRUE, 0.3, 5)
        assert v.value is Value.TRUE and v.epsilon == 0.3 and len(v.history) == 1

    def test_degenerate_endpoint_stays_unknown(self, qwalk_s1):
        (eta,) = qwalk_s1.states
        m = models.position_projector(20, 0)
        limit = float(np.trace(m @ eta).real)
        ap = AtomicProp("edge", m, ProbInterval(limit, 1.0, False, True))
        v = model_check_refined(qwalk_s1.qmc, [ap], parse("F G ap(edge)"), 0.5, 4, analysis=qwalk_s1)
        assert v.value is Value.UNKNOWN and len(v.history) == 5
        assert abs(limit - INV_SQRT2) < 1e-8

    def test_small_walk_verdicts(self):
        g = models.quantum_walk(models.WalkSpec(4, 1))
        aps = models.builtin_walk_aps(4)
        v = model_check_refined(g, aps, parse("F G ap(abs0)"), 0.5, 4)
        assert v.value is Value.TRUE
        v = model_check_refined(g, aps, parse("G ap(p4lt)"), 0.5, 4)
        assert v.value is Value.TRUE and v.epsilon < 0.5

    def test_undeclared_proposition(self):
        g = models.quantum_walk(models.WalkSpec(4, 1))
        with pytest.raises(UnknownPropositionError):
            model_check(g, [], parse("F ap(nope)"), 0.1)

    def test_not_stable(self):
        g = QMC(models.phase_channel(1 / np.sqrt(2)), np.full((2, 2), 0.5))
        ap = AtomicProp("z", np.diag([1.0, 0.0]), ProbInterval.closed(0, 1))
        with pytest.raises(spectral.NotStableError):
            model_check(g, [ap], parse("G ap(z)"), 0.1)

    def test_period_three(self):
        g = QMC(models.phase_channel(1 / 3), np.full((2, 2), 0.5))
        plus = np.full((2, 2), 0.5)
        ap = AtomicProp("plus", plus, ProbInterval.closed(0.9, 1))
        v = model_check(g, [ap], parse("G F ap(plus) & F !ap(plus)"), 0.05)
        assert v.period == 3 and v.value is Value.TRUE
        v = model_check(g, [ap], parse("F G ap(plus)"), 0.05)
        assert v.value is Value.FALSE

    def test_json_and_export(self, tmp_path):
        g = models.quantum_walk(models.WalkSpec(4, 1))
        aps = models.builtin_walk_aps(4)
        v = model_check(g, aps, parse("G ap(p4lt)"), 0.0625, CheckOptions(export_dir=tmp_path / "hoa"))
        doc = json.loads(json.dumps(v.to_json()))
        assert {"verdict", "epsilon", "period", "k_eps"} <= doc.keys()
        assert doc["verdict"] == "True"
        assert sorted(p.name for p in (tmp_path / "hoa").iterdir()) == ["formula.hoa", "negated_formula.hoa", "trajectory.hoa"]

    @pytest.mark.parametrize("source", list(KSource))
    def test_k_sources(self, source):
        g = models.quantum_walk(models.WalkSpec(4, 1))
        aps = models.builtin_walk_aps(4)
        v = model_check(g, aps, parse("F G ap(abs0)"), 0.0625, CheckOptions(k_source=source))
        assert v.value is Value.TRUE
        if source is KSource.MIN:
            assert v.k_distance == min(v.k_analytic, v.k_simulated)

    def test_untightened_prefix_agrees(self):
        g = models.quantum_walk(models.WalkSpec(4, 1))
        aps = models.builtin_walk_aps(4)
        phi = parse("F G ap(abs0)")
        a = model_check(g, aps, phi, 0.0625)
        b = model_check(g, aps, phi, 0.0625, CheckOptions(tighten_prefix=False))
        assert a.value is b.value and b.k_eps == b.k_distance >= a.k_eps

    @pytest.mark.parametrize("seed", range(40))
    def test_random_chains_sound(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 5))
        p = rng.random((n, n)) * (rng.random((n, n)) < 0.6)
        p[np.arange(n), rng.integers(0, n, n)] += 0.2
        p /= p.sum(axis=1, keepdims=True)
        g = models.classical_mc_to_qmc(p, np.eye(n)[0])
        aps = [AtomicProp(f"a{i}", np.diag(np.eye(n)[i % n]), ProbInterval.closed(*sorted(rng.random(2)))) for i in range(2)]
        phi = oracles.random_formula(rng, ["a0", "a1"], 3)
        opts = CheckOptions(mode=Mode(rng.choice(["cheap", "refined"])))
        try:
            analysis = ChainAnalysis.of(g, opts)
        except spectral.NotStableError:
            pytest.skip("chain not recognised as stable")
        for eps in (0.2, 0.05):
            try:
                v = model_check(g, aps, phi, eps, opts, analysis)
            except spectral.TruncationUnavailable:
                continue
            if v.value.definite:
                stem, loop = trace_word(analysis, aps, v)
                assert oracles.holds(phi, stem, loop) == (v.value is Value.TRUE)


class TestTrajectory:
    def test_single(self):
        g = models.quantum_walk(models.WalkSpec(3, 1))
        (rho,) = trajectory(g, 1)
        assert np.array_equal(rho, g.initial)

    def test_classical_powers(self):
        p = np.array([[0.1, 0.9, 0.0], [0.0, 0.5, 0.5], [1.0, 0.0, 0.0]])
        mu = np.array([0.2, 0.3, 0.5])
        for k, rho in enumerate(trajectory(models.classical_mc_to_qmc(p, mu), 30)):
            assert np.allclose(np.diag(rho).real, mu @ np.linalg.matrix_power(p, k))

    def test_walk_absorption(self):
        m = models.position_projector(20, 0)
        ps = [np.trace(m @ r).real for r in trajectory(models.quantum_walk(models.WalkSpec(20, 1)), 600)]
        assert all(b >= a - 1e-12 for a, b in zip(ps, ps[1:]))
        assert abs(ps[-1] - INV_SQRT2) < 0.1

    def test_negative(self):
        with pytest.raises(ValueError):
            trajectory(models.quantum_walk(models.WalkSpec(3, 1)), -1)
