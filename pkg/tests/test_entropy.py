import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasiorth.constructions import bell_masa, quantum_fourier
from quasiorth.linalg import SIGMA, TOL, random_density, random_unitary
from quasiorth.subalgebra import (
    Subalgebra,
    diagonal_masa,
    full_algebra,
    masa_from_basis,
    tensor_factor,
)
from quasiorth.entropy import (
    ConvexDecomposition,
    InvalidDecomposition,
    appendix_algebras,
    appendix_decomposition,
    appendix_probe,
    estimate,
    evaluate,
    minimal_projection_seed,
    prune,
    trivial_decomposition,
    upper_bound,
)

LOG2 = math.log(2)
E11 = np.diag([1.0, 0.0]).astype(complex)
E22 = np.diag([0.0, 1.0]).astype(complex)
DIAG2 = diagonal_masa(2)
FOURIER2 = masa_from_basis(quantum_fourier(2))
LEFT = tensor_factor(2, 2, "left")


def xlogx_eta(x):
    return 0.0 if x <= 0 else -x * math.log(x)


def random_decomposition(n, terms, rng):
    """Random decomposition of I built independently: G_i >= 0, M_i = S^-1/2 G_i S^-1/2."""
    g = rng.standard_normal((terms, n, n)) + 1j * rng.standard_normal((terms, n, n))
    g = g @ g.conj().transpose(0, 2, 1)
    w, v = np.linalg.eigh(g.sum(axis=0))
    root = v @ np.diag(w**-0.5) @ v.conj().T
    effects = root @ g @ root
    weights = np.trace(effects, axis1=1, axis2=2).real / n
    return ConvexDecomposition(weights, effects / weights[:, None, None])


# -- decompositions -------------------------------------------------------------------


def test_decomposition_validation_reports_failures():
    bad = ConvexDecomposition(np.array([0.5, 0.5]), np.array([2 * E11, 2 * E11]))
    assert any("identity" in p for p in bad.problems())
    with pytest.raises(InvalidDecomposition):
        bad.validate()
    untraced = ConvexDecomposition(np.array([0.5]), np.array([2 * np.eye(2)]))
    assert any("normalized trace" in p for p in untraced.problems())
    negative = ConvexDecomposition(np.array([-1.0, 2.0]), np.array([np.eye(2), np.eye(2)]))
    assert any("positive" in p for p in negative.problems())
    with pytest.raises(InvalidDecomposition):
        ConvexDecomposition(np.array([1.0, 2.0]), np.array([np.eye(2)]))
    nonpsd = ConvexDecomposition(np.array([0.5, 0.5]), np.array([np.diag([2.5, -0.5]), np.diag([-0.5, 2.5])]))
    assert any("semidefinite" in p for p in nonpsd.problems())
    assert ConvexDecomposition(np.zeros(0), np.zeros((0, 2, 2))).problems()


def test_evaluate_examples():
    assert evaluate(DIAG2, FOURIER2, trivial_decomposition(2)) == pytest.approx(0, abs=1e-15)
    dec = ConvexDecomposition.from_terms([(0.5, 2 * E11), (0.5, 2 * E22)])
    assert evaluate(DIAG2, FOURIER2, dec) == pytest.approx(LOG2, abs=1e-12)
    assert evaluate(DIAG2, DIAG2, dec) == pytest.approx(0, abs=1e-15)


def test_evaluate_closed_form_for_qubit_masas(rng):
    # for MASAs of M_2 the conditional expectations are diagonal parts in two bases
    u = random_unitary(2, rng)
    b = masa_from_basis(u)
    dec = random_decomposition(2, 3, rng)
    expected = 0.0
    for w, rho in zip(dec.weights, dec.rhos):
        pa = np.real(np.diag(rho))
        pb = np.real(np.diag(u.conj().T @ rho @ u))
        expected += w * (sum(map(xlogx_eta, pb)) - sum(map(xlogx_eta, pa))) / 2
    assert evaluate(DIAG2, b, dec) == pytest.approx(expected, abs=1e-12)


def test_evaluate_rejects_invalid_and_mismatched():
    bad = ConvexDecomposition(np.array([1.0]), np.array([2 * E11]))
    with pytest.raises(InvalidDecomposition):
        evaluate(DIAG2, FOURIER2, bad)
    with pytest.raises(ValueError):
        evaluate(DIAG2, diagonal_masa(3), trivial_decomposition(2))
    with pytest.raises(ValueError):
        evaluate(DIAG2, FOURIER2, trivial_decomposition(3))


def test_decomposition_json():
    dec = ConvexDecomposition.from_terms([(0.5, 2 * E11), (0.5, 2 * E22)])
    js = json.loads(json.dumps(dec.to_json()))
    assert [t["weight"] for t in js] == [0.5, 0.5]
    assert js[0]["rho"]["dim"] == 2


# -- bound -------------------------------------------------------------------------------


def test_upper_bound_examples():
    assert upper_bound(diagonal_masa(5)) == pytest.approx(math.log(5))
    assert upper_bound(LEFT) == pytest.approx(LOG2)
    assert upper_bound(full_algebra(3)) == pytest.approx(math.log(3))
    uneven = Subalgebra.from_generators(3, [np.diag([1, 0, 0])])
    assert sorted(uneven.minimal_projection_traces) == pytest.approx([1 / 3, 2 / 3])
    with pytest.raises(ValueError):
        upper_bound(uneven)


def test_block_algebra_c_plus_m2_is_homogeneous():
    # every minimal projection of C (+) M_2 in M_3 has rank one
    gens = [np.diag([1, 0, 0])] + [np.pad(m, ((1, 0), (1, 0))) for m in SIGMA[1:]]
    alg = Subalgebra.from_generators(3, gens)
    assert upper_bound(alg) == pytest.approx(math.log(3))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["qubit", "bell", "m3"]))
def test_evaluate_never_exceeds_bound(seed, case):
    r = np.random.default_rng(seed)
    if case == "qubit":
        a, b = DIAG2, masa_from_basis(random_unitary(2, r))
    elif case == "bell":
        a, b = bell_masa(), LEFT.conjugate(random_unitary(4, r))
    else:
        a, b = masa_from_basis(random_unitary(3, r)), full_algebra(3)
    dec = random_decomposition(a.ambient_dim, int(r.integers(1, 12)), r)
    assert evaluate(a, b, dec) <= upper_bound(a) + 10 * TOL


# -- pruning -------------------------------------------------------------------------------


def test_prune_merges_duplicates(rng):
    rho = random_density(2, rng)
    rest = 2 * np.eye(2) - rho
    dec = ConvexDecomposition.from_terms([(0.25, rho), (0.25, rho), (0.5, rest)])
    out = prune(dec, DIAG2, FOURIER2)
    assert len(out) == 2
    assert evaluate(DIAG2, FOURIER2, out) >= evaluate(DIAG2, FOURIER2, dec) - 10 * TOL


def test_prune_identical_pair_to_single_term():
    dec = ConvexDecomposition.from_terms([(0.5, np.eye(2)), (0.5, np.eye(2))])
    out = prune(dec, DIAG2, FOURIER2)
    assert len(out) == 1 and out.weights[0] == pytest.approx(1.0)


def test_prune_keeps_independent_decomposition():
    dec = ConvexDecomposition.from_terms([(0.5, 2 * E11), (0.5, 2 * E22)])
    out = prune(dec, DIAG2, FOURIER2)
    assert np.array_equal(out.weights, dec.weights) and np.array_equal(out.rhos, dec.rhos)


@pytest.mark.parametrize("seed", range(8))
def test_prune_random_overcomplete(seed):
    r = np.random.default_rng(seed)
    for n, a, b in ((2, DIAG2, masa_from_basis(random_unitary(2, r))), (4, bell_masa(), LEFT)):
        dec = random_decomposition(n, 20 if n == 2 else 24, r)
        out = prune(dec, a, b)
        assert len(out) <= n * n
        assert evaluate(a, b, out) >= evaluate(a, b, dec) - 1e-9
        total = np.einsum("k,kij->ij", out.weights, out.rhos)
        assert np.allclose(total, np.eye(n), atol=TOL)


# -- estimation -------------------------------------------------------------------------------


def test_estimate_complementary_qubit_masas():
    est = estimate(DIAG2, FOURIER2)
    assert est.value == pytest.approx(LOG2, abs=1e-3)
    assert est.gap == pytest.approx(0, abs=1e-3)
    assert est.value <= est.bound + 10 * TOL


def test_estimate_inclusion_gives_zero():
    est = estimate(DIAG2, full_algebra(2))
    assert abs(est.value) < 1e-6
    assert est.possible_inclusion and est.inclusion


def test_estimate_bell_against_qubit():
    est = estimate(bell_masa(), LEFT)
    assert est.value == pytest.approx(math.log(4), abs=1e-3)


def test_estimate_value_matches_its_decomposition():
    a, b = appendix_algebras(math.pi / 4)
    est = estimate(a, b, restarts=2)
    assert evaluate(a, b, est.decomposition) == pytest.approx(est.value, abs=10 * TOL)
    assert est.value >= evaluate(a, b, minimal_projection_seed(a)) - 10 * TOL
    assert est.value <= est.bound + 10 * TOL


def test_estimate_deterministic_and_thread_independent():
    a, b = appendix_algebras(0.9)
    one = estimate(a, b, restarts=4, seed=11, workers=1)
    two = estimate(a, b, restarts=4, seed=11)
    four = estimate(a, b, restarts=4, seed=11, workers=4)
    assert one.to_json() == two.to_json() == four.to_json()


def test_estimate_thread_env(monkeypatch):
    a, b = appendix_algebras(0.9)
    monkeypatch.setenv("QUASIORTH_THREADS", "3")
    assert estimate(a, b, restarts=3).to_json() == estimate(a, b, restarts=3, workers=1).to_json()


def test_estimate_errors():
    with pytest.raises(ValueError):
        estimate(DIAG2, diagonal_masa(3))
    with pytest.raises(ValueError):
        estimate(DIAG2, FOURIER2, m=0)


def test_estimate_non_homogeneous_has_no_bound():
    uneven = Subalgebra.from_generators(3, [np.diag([1, 0, 0])])
    est = estimate(uneven, masa_from_basis(quantum_fourier(3)), restarts=1)
    assert est.bound is None and est.gap is None
    assert est.to_json()["bound_nats"] is None


def test_estimate_json_fields():
    js = json.loads(json.dumps(estimate(DIAG2, FOURIER2, restarts=1).to_json()))
    for key in ("value_nats", "bound_nats", "gap", "seed", "decomposition"):
        assert key in js
    assert js["value_bits"] == pytest.approx(js["value_nats"] / LOG2)


# -- conjectured closed form ---------------------------------------------------------------


def _c_oracle(beta):
    c = math.cos(beta)
    return xlogx_eta((1 + c) / 2) + xlogx_eta((1 - c) / 2)


def _fprime_oracle(beta):
    return 0.5 * math.sin(beta) * math.log((1 - math.cos(beta)) / (1 + math.cos(beta)))


def test_appendix_probe_quarter_pi():
    probe = appendix_probe(math.pi / 4)
    assert probe.C == pytest.approx(0.4165, abs=1e-4)
    assert probe.C == pytest.approx(_c_oracle(math.pi / 4), abs=1e-12)
    assert abs(probe.f0 - probe.C) <= TOL
    assert probe.f_prime_0 == pytest.approx(-0.6232, abs=1e-4)
    assert abs(probe.f_prime_0 - _fprime_oracle(math.pi / 4)) < 1e-5
    assert probe.refuted and probe.margin > 0.01
    assert probe.f(probe.witness_t) - probe.C == pytest.approx(probe.margin)


def test_appendix_probe_half_pi_not_refuted_by_derivative():
    probe = appendix_probe(math.pi / 2)
    assert abs(probe.f_prime_0) < 1e-6
    assert not probe.refuted and probe.witness_t is None


@pytest.mark.parametrize("beta", np.random.default_rng(5).uniform(0.05, math.pi - 0.05, 50))
def test_appendix_f0_and_derivative(beta):
    probe = appendix_probe(beta)
    assert abs(probe.f0 - probe.C) <= 10 * TOL
    assert abs(probe.f_prime_0 - _fprime_oracle(beta)) < 1e-5


def test_appendix_f_is_the_value_of_an_actual_decomposition():
    beta = 0.8
    a, b = appendix_algebras(beta)
    probe = appendix_probe(beta)
    for t in (-1.0, -0.3, 0.0, 0.5, 2.0):
        assert evaluate(a, b, appendix_decomposition(t)) == pytest.approx(probe.f(t), abs=1e-12)


def test_optimizer_beats_conjectured_value():
    beta = math.pi / 4
    a, b = appendix_algebras(beta)
    probe = appendix_probe(beta)
    est = estimate(a, b)
    assert est.value >= probe.C + probe.margin - 1e-9
