import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairs import pw
from quasiorth.constructions import bell_masa, quantum_fourier
from quasiorth.linalg import TOL, random_unitary
from quasiorth.subalgebra import ABELIAN, FACTOR, Subalgebra, commutant, intersect, tensor_factor
from quasiorth.four_level import (
    EXHIBITED_FAMILIES,
    F_KIND,
    M_KIND,
    FactorizationError,
    TripletError,
    aligning_unitary,
    bell_factorize,
    classify_triplet,
    commutant_dichotomy_check,
    complementary_family_search,
    enumerate_pauli_subalgebras,
    family_from_json,
    family_from_labels,
    standard_bell_triplet,
)

LEFT = tensor_factor(2, 2, "left")
RIGHT = tensor_factor(2, 2, "right")


def _local(rng):
    return np.kron(random_unitary(2, rng), random_unitary(2, rng))


def _equal_up_to_sign(x, y, tol=1e-9):
    return np.max(np.abs(x - y)) < tol or np.max(np.abs(x + y)) < tol


# -- triplets ----------------------------------------------------------------------------


def test_classify_first_qubit_f_triplet():
    t = classify_triplet(pw(1, 0), pw(2, 0), pw(3, 0))
    assert t.kind == F_KIND and t.sign == -1
    assert np.allclose(t.s3, t.sign * 1j * t.s1 @ t.s2)


def test_classify_bell_triplet():
    t = classify_triplet(pw(1, 1), pw(2, 2), pw(3, 3))
    assert t.kind == M_KIND and t.sign == -1
    assert np.allclose(t.s3, t.sign * t.s1 @ t.s2)


def test_classify_rejections():
    with pytest.raises(TripletError):
        classify_triplet(pw(1, 0), pw(1, 0), pw(1, 0))
    with pytest.raises(TripletError):
        classify_triplet(np.eye(4), pw(1, 0), pw(1, 0))
    with pytest.raises(TripletError):
        classify_triplet(pw(1, 0), pw(0, 1), pw(2, 2))
    with pytest.raises(TripletError):
        classify_triplet(np.eye(2), np.eye(2), np.eye(2))


def test_car_second_triplet_and_fourier_triplets():
    assert classify_triplet(pw(3, 1), pw(3, 2), pw(0, 3)).kind == F_KIND
    assert classify_triplet(pw(0, 1), pw(0, 2), pw(0, 3)).kind == F_KIND
    # the moved qubit W (C I (x) M_2) W* is spanned by an F-triplet as well
    w = quantum_fourier(4)
    moved = [w @ pw(0, k) @ w.conj().T for k in (1, 2, 3)]
    t = classify_triplet(*moved)
    assert t.kind == F_KIND
    # and it contains -s10, one of its displayed members
    assert t.algebra.contains(-pw(1, 0))


def test_displayed_second_fourier_triplet_is_not_p_unitary():
    s1 = 0.5 * (-pw(2, 0) - pw(2, 3) + pw(3, 0))
    assert not np.allclose(s1 @ s1, np.eye(4))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_triplet_algebras_have_expected_structure(seed):
    r = np.random.default_rng(seed)
    u = random_unitary(4, r)
    for words, kind in (([(1, 0), (2, 0), (3, 0)], F_KIND), ([(1, 1), (2, 2), (3, 3)], M_KIND)):
        t = classify_triplet(*(u @ pw(*w) @ u.conj().T for w in words))
        assert t.kind == kind
        closed = Subalgebra.from_generators(4, list(t))
        assert closed.dim == 4
        assert closed.kind == (FACTOR if kind == F_KIND else ABELIAN)


# -- Bell factorization -------------------------------------------------------------------------


def test_bell_factorize_standard():
    fac = bell_factorize(LEFT, standard_bell_triplet())
    for k, (a, b) in enumerate(zip(fac.a_triplet, fac.b_triplet), start=1):
        assert _equal_up_to_sign(a, pw(k, 0))
        assert _equal_up_to_sign(b, pw(0, k))
    assert fac.residual < 1e-9


def test_bell_factorize_local_unitary():
    rng = np.random.default_rng(2)
    w = _local(rng)
    bell = [w @ s @ w.conj().T for s in standard_bell_triplet()]
    fac = bell_factorize(LEFT.conjugate(w), bell)
    assert fac.residual < 1e-9
    for k, (a, b) in enumerate(zip(fac.a_triplet, fac.b_triplet), start=1):
        assert _equal_up_to_sign(a, w @ pw(k, 0) @ w.conj().T)
        assert _equal_up_to_sign(b, w @ pw(0, k) @ w.conj().T)


@pytest.mark.parametrize("seed", range(10))
def test_bell_factorize_global_unitary(seed):
    r = np.random.default_rng(seed)
    u = random_unitary(4, r)
    a = LEFT.conjugate(u)
    t = [u @ s @ u.conj().T for s in standard_bell_triplet()]
    fac = bell_factorize(a, t)
    assert fac.residual < 1e-9
    a_comm = commutant(a)
    for x, y in zip(fac.a_triplet, fac.b_triplet):
        assert a.contains(x, 1e-9) and a_comm.contains(y, 1e-9)
    for trip in (fac.a_triplet, fac.b_triplet):
        for i, j in itertools.combinations(range(3), 2):
            x, y = list(trip)[i], list(trip)[j]
            assert np.max(np.abs(x @ y + y @ x)) <= 10 * TOL


def test_aligning_unitary_maps_algebra_to_first_qubit(rng):
    u = random_unitary(4, rng)
    v = aligning_unitary(LEFT.conjugate(u))
    assert LEFT.conjugate(u).conjugate(v).same_span(LEFT, 1e-9)


def test_bell_factorize_rejects_non_orthogonal_triplet():
    with pytest.raises(FactorizationError):
        bell_factorize(LEFT, classify_triplet(pw(0, 1), pw(1, 0), pw(1, 1)))


def test_bell_factorize_rejects_wrong_inputs():
    with pytest.raises(FactorizationError):
        bell_factorize(LEFT, classify_triplet(pw(1, 0), pw(2, 0), pw(3, 0)))
    with pytest.raises(FactorizationError):
        bell_factorize(bell_masa(), standard_bell_triplet())


def test_bell_factorization_json():
    js = json.loads(json.dumps(bell_factorize(LEFT, standard_bell_triplet()).to_json()))
    assert len(js["A"]) == 3 and len(js["B"]) == 3


# -- Pauli catalog and families ---------------------------------------------------------------------


def test_catalog_counts_and_members():
    cat = enumerate_pauli_subalgebras()
    assert len(cat.masas) == 15 and len(cat.factors) == 20 and len(cat.all) == 35
    assert cat.find(["s11", "s22", "s33"]).kind == M_KIND
    assert cat.find(["s01", "s02", "s03"]).kind == F_KIND
    assert cat.find(["s01", "s02", "s03"]).algebra.same_span(RIGHT)
    with pytest.raises(KeyError):
        cat.find(["s01", "s02", "s11"])


def test_catalog_count_oracle():
    # independent count over unordered word pairs {a, b}; the triple {a, b, ab} is keyed as a set
    words = [(i, j) for i in range(4) for j in range(4) if (i, j) != (0, 0)]
    triples = set()
    commuting = set()
    for a, b in itertools.combinations(words, 2):
        c = (a[0] ^ b[0], a[1] ^ b[1])  # index of sigma_i sigma_j up to phase is i xor j
        key = frozenset((a, b, c))
        triples.add(key)
        if np.allclose(pw(*a) @ pw(*b), pw(*b) @ pw(*a)):
            commuting.add(key)
    assert (len(triples), len(commuting)) == (35, 15)


def test_catalog_entries_are_triplet_spans():
    for entry in enumerate_pauli_subalgebras().all:
        labels = entry.signed_labels
        mats = [np.asarray(pw(int(l[-2]), int(l[-1]))) * (-1 if l.startswith("-") else 1) for l in labels]
        t = classify_triplet(*mats)
        assert t.kind == entry.kind and t.sign == 1


def test_family_search_reproduces_exhibited_families():
    fams = complementary_family_search()
    keys = {f.keys for f in fams}
    for ell, triples in EXHIBITED_FAMILIES.items():
        fam = family_from_labels(triples)
        assert fam.ell == ell and fam.pairwise_ok
        assert fam.keys in keys
        assert fam.traceless_total == 15


def test_family_search_ell_values_and_fifth_member():
    fams = complementary_family_search()
    assert {f.ell for f in fams} == {0, 2, 4}
    for fam in fams:
        assert fam.pairwise_ok and fam.traceless_total == 15
        if fam.ell == 4:
            (rest,) = [m for m in fam.members if m.kind == M_KIND]
            assert rest.algebra.is_masa


def test_family_search_is_exhaustive_partition_count():
    # brute-force oracle: count 5-subsets of the 35 triples that partition the 15 words
    words = [(i, j) for i in range(4) for j in range(4) if (i, j) != (0, 0)]
    triples = {frozenset((a, b, (a[0] ^ b[0], a[1] ^ b[1]))) for a, b in itertools.combinations(words, 2)}
    triples = sorted(triples, key=sorted)
    count = 0

    def extend(covered, start, depth):
        nonlocal count
        if depth == 5:
            count += len(covered) == 15
            return
        for k in range(start, len(triples)):
            if not (triples[k] & covered):
                extend(covered | triples[k], k + 1, depth + 1)

    extend(frozenset(), 0, 0)
    assert len(complementary_family_search()) == count


def test_family_search_sorted_and_deterministic():
    a = [f.to_json() for f in complementary_family_search()]
    b = [f.to_json() for f in complementary_family_search()]
    assert a == b
    first_keys = [sorted(m.key) for m in complementary_family_search()[0].members]
    assert first_keys == sorted(first_keys)


def test_family_search_rejects_other_sizes():
    with pytest.raises(ValueError):
        complementary_family_search(4)


def test_family_json_roundtrip():
    fam = family_from_labels(EXHIBITED_FAMILIES[4])
    js = json.loads(json.dumps(fam.to_json()))
    assert js["ell"] == 4
    assert family_from_json(js).keys == fam.keys
    js["members"][0]["kind"] = "M"
    with pytest.raises(ValueError):
        family_from_json(js)
    with pytest.raises(ValueError):
        family_from_json({"members": [{"triplet": []}]})


def test_local_unitary_conjugation_preserves_family_complementarity():
    rng = np.random.default_rng(9)
    from quasiorth.subalgebra import complementarity_report

    for ell, triples in EXHIBITED_FAMILIES.items():
        fam = family_from_labels(triples)
        w = _local(rng)
        moved = [m.algebra.conjugate(w) for m in fam.members]
        for x, y in itertools.combinations(moved, 2):
            assert complementarity_report(x, y, tol=1e-8).verdict


# -- commutant dichotomy -------------------------------------------------------------------


def test_dichotomy_bell_masa_branch_a():
    rep = commutant_dichotomy_check(LEFT, bell_masa())
    assert rep.precondition and rep.branch == "a" and rep.holds


def test_dichotomy_commutant_branch_b():
    rep = commutant_dichotomy_check(LEFT, RIGHT)
    assert rep.precondition and rep.branch == "b" and rep.holds and rep.equals_commutant


def test_dichotomy_fourier_branch_b_with_one_dimensional_meet():
    moved = RIGHT.conjugate(quantum_fourier(4))
    rep = commutant_dichotomy_check(RIGHT, moved)
    assert rep.branch == "b" and rep.holds
    assert rep.intersection_dim == 1 and not rep.equals_commutant
    assert intersect(commutant(RIGHT), moved).traceless_dim == 1


def test_dichotomy_precondition_and_errors():
    rep = commutant_dichotomy_check(LEFT, LEFT)
    assert not rep.precondition and rep.holds is None
    with pytest.raises(ValueError):
        commutant_dichotomy_check(bell_masa(), LEFT)


def test_dichotomy_over_catalog():
    cat = enumerate_pauli_subalgebras()
    for a0 in cat.factors:
        for b in cat.all:
            if a0.key & b.key:
                continue
            rep = commutant_dichotomy_check(a0.algebra, b.algebra)
            assert rep.precondition and rep.holds
