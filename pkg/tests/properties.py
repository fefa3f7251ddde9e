"""Randomised property checks shared by the module tests and the acceptance run.

Each ``check_*`` draws one instance from ``rng`` and raises ``AssertionError``
on a violation. It returns False when the drawn instance is out of scope
(for instance an unstable chain) so callers can keep sampling.
"""

from __future__ import annotations

import numpy as np

import oracles
from qmcverify import automata, models, spectral
from qmcverify.linalg import QMC, SuperOperator, random_channel, random_density, vectorize
from qmcverify.mltl import AtomicProp, ProbInterval, label
from qmcverify.neighborhood import Mode, neighborhood


def random_mixed_channel(rng: np.random.Generator, d: int) -> SuperOperator:
    """Random channel, sometimes blended with the identity for slow decay."""
    n = int(rng.integers(1, d * d))
    base = random_channel(d, n, rng)
    t = float(rng.choice([1.0, rng.uniform(0.05, 1.0)]))
    if t == 1.0:
        return base
    return SuperOperator([np.sqrt(1 - t) * np.eye(d)] + [np.sqrt(t) * k for k in base.kraus])


def check_vectorization_identity(rng: np.random.Generator) -> bool:
    d = int(rng.integers(1, 5))
    e = random_channel(d, int(rng.integers(1, min(4, d * d) + 1)), rng)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    err = np.linalg.norm(e.matrix @ vectorize(a) - vectorize(e(a)))
    assert err <= 1e-10, err
    return True


def check_classical_simulation(rng: np.random.Generator) -> bool:
    n = int(rng.integers(1, 7))
    p = rng.random((n, n)) * (rng.random((n, n)) < 0.7)
    p[np.arange(n), rng.integers(0, n, n)] += 0.1
    p /= p.sum(axis=1, keepdims=True)
    mu = rng.dirichlet(np.ones(n))
    g = models.classical_mc_to_qmc(p, mu)
    rho, dist = np.array(g.initial), mu.copy()
    for _ in range(int(rng.integers(0, 51))):
        rho, dist = g.transition(rho), dist @ p
        assert np.abs(np.diag(rho) - dist).max() <= 1e-9
        assert np.abs(rho - np.diag(np.diag(rho))).max() <= 1e-12
    return True


def _stable(rng: np.random.Generator, d: int):
    e = random_mixed_channel(rng, d)
    g = QMC(e, random_density(d, rng))
    sd = spectral.decompose(e, use_cache=False)
    report = spectral.check_stability(g, sd=sd)
    return g, sd, report


def check_decay_sandwich(rng: np.random.Generator) -> bool:
    g, sd, report = _stable(rng, int(rng.integers(2, 4)))
    if not report.is_stable or sd.omega == 0 or not np.isfinite(sd.cond_number):
        return False
    c, w, dw = spectral.decay_constant(sd), sd.omega, sd.d_omega
    m, m_phi = sd.matrix, spectral.stabilizer(sd)
    power = np.linalg.matrix_power(m, dw)
    for n in range(dw, 31):
        gap = np.linalg.norm(power - power @ m_phi, 2)
        scale = w**n * n ** (dw - 1)
        assert gap >= scale / c * (1 - 1e-8) - 1e-14, (n, gap, scale / c)
        assert gap <= c * scale * (1 + 1e-8) + sd.nil_tail * sd.cond_number + 1e-14, (n, gap, c * scale)
        power = power @ m
    return True


def check_analytic_dominates_simulated(rng: np.random.Generator) -> bool:
    g, sd, report = _stable(rng, int(rng.integers(2, 4)))
    if not report.is_stable:
        return False
    eps = float(rng.uniform(0.01, 0.5))
    try:
        k_an = spectral.truncation_bound(sd, report, eps)
    except spectral.TruncationUnavailable:
        return False
    states = spectral.stable_states(g, report, sd)
    k_sim = spectral.truncation_bound_simulated(g, states, eps)
    assert k_an >= k_sim, (k_an, k_sim, eps)
    # The analytic bound must hold pointwise past K.
    dist = spectral.distances_to_cycle(g, states, k_an + 50)
    assert (dist[k_an:] < eps).all()
    return True


def random_measurement(rng: np.random.Generator, d: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    if rng.random() < 0.3:
        spectrum = (rng.random(d) < 0.5).astype(float)
    else:
        spectrum = rng.random(d)
    return q @ np.diag(spectrum) @ q.conj().T


def random_interval(rng: np.random.Generator) -> ProbInterval:
    lo, hi = sorted(rng.random(2))
    if rng.random() < 0.2:
        lo = 0.0
    if rng.random() < 0.2:
        hi = 1.0
    if lo == hi:
        return ProbInterval.closed(lo, hi)
    return ProbInterval(lo, hi, bool(rng.random() < 0.5), bool(rng.random() < 0.5))


def ball_sample(rng: np.random.Generator, eta: np.ndarray, eps: float) -> np.ndarray:
    """A density matrix within ``eps`` of ``eta`` (on the boundary one time in four)."""
    sigma = random_density(eta.shape[0], rng, int(rng.integers(1, eta.shape[0] + 1)))
    gap = np.linalg.norm(sigma - eta)
    r = 1.0 if rng.random() < 0.25 else rng.random()
    t = min(1.0, eps * r / gap) if gap > 0 else 0.0
    return eta + t * (sigma - eta)


def check_neighborhood_soundness(rng: np.random.Generator, samples: int = 5) -> bool:
    d = int(rng.integers(1, 4))
    eta = random_density(d, rng, int(rng.integers(1, d + 1)))
    eps = float(rng.uniform(0.005, 0.5))
    aps = [AtomicProp(f"a{i}", random_measurement(rng, d), random_interval(rng)) for i in range(3)]
    sets = {mode: neighborhood(eta, eps, aps, mode) for mode in Mode}
    for _ in range(samples):
        rho = ball_sample(rng, eta, eps)
        assert np.linalg.norm(rho - eta) <= eps * (1 + 1e-12)
        lt = label(rho, aps)
        for mode, sym in sets.items():
            assert lt in sym, (mode, str(sym), sorted(lt))
    return True


def check_automata_oracle(rng: np.random.Generator) -> bool:
    aps = ["a", "b"][: int(rng.integers(1, 3))]
    phi = oracles.random_formula(rng, aps, 3)
    stem, loop = oracles.random_word(rng, aps, 6, 6)
    truth = oracles.holds(phi, stem, loop)
    nba = automata.ltl_to_nba(phi)
    edges = {q: [(g.matches, t) for g, t in nba.edges[q]] for q in range(nba.n_states)}
    assert oracles.nba_accepts(nba.n_states, nba.initial, edges, nba.accepting, stem, loop) == truth, (str(phi), stem, loop)
    word = automata.lasso_to_nba(
        automata.LassoLanguage(
            tuple(frozenset(x) for x in stem),
            tuple(automata.SymbolSet.singleton(x, aps) for x in loop),
            frozenset(aps),
        )
    )
    assert automata.product_empty(word, nba).empty == (not truth), str(phi)
    return True


def run(check, count: int, seed: int, max_draws: int | None = None) -> int:
    """Run ``check`` until ``count`` in-scope instances passed; returns the number checked."""
    rng = np.random.default_rng(seed)
    done = draws = 0
    limit = max_draws if max_draws is not None else 10 * count
    while done < count:
        draws += 1
        assert draws <= limit, f"only {done} in-scope instances after {draws - 1} draws"
        if check(rng):
            done += 1
    return done
