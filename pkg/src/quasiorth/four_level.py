"""Structure of M_4(C): P-unitaries, F/M-triplets and complementary decompositions."""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import (
    SIGMA,
    TOL,
    PauliWord,
    as_matrix,
    dagger,
    is_p_unitary,
    pauli_coefficients,
    pauli_words,
)
from .subalgebra import (
    FACTOR,
    Subalgebra,
    commutant,
    complementarity_report,
    intersect,
    minimal_projections,
)

F_KIND, M_KIND = "F", "M"


class TripletError(ValueError):
    """The three operators do not form an F- or M-triplet."""


class FactorizationError(ValueError):
    """Preconditions of the Bell factorization are violated."""


@dataclass(frozen=True, eq=False)
class Triplet:
    """Three P-unitaries with ``S3 = sign * i S1 S2`` (F) or ``S3 = sign * S1 S2`` (M)."""

    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray
    kind: str
    sign: int

    def __iter__(self):
        return iter((self.s1, self.s2, self.s3))

    @functools.cached_property
    def algebra(self) -> Subalgebra:
        return Subalgebra.from_span(4, [self.s1, self.s2, self.s3])


def classify_triplet(s1, s2, s3, tol: float = TOL) -> Triplet:
    """Classify ``(S1, S2, S3)`` as an F- or M-triplet, absorbing a sign on ``S3``."""
    mats = [as_matrix(s) for s in (s1, s2, s3)]
    for k, s in enumerate(mats, 1):
        if s.shape != (4, 4):
            raise TripletError(f"S{k} must be 4x4, got {s.shape}")
        if not is_p_unitary(s, tol):
            raise TripletError(f"S{k} is not a P-unitary (self-adjoint, traceless, unitary)")
    prod = mats[0] @ mats[1]
    for kind, base in ((F_KIND, 1j * prod), (M_KIND, prod)):
        for sign in (1, -1):
            if np.max(np.abs(mats[2] - sign * base)) <= tol:
                return Triplet(*mats, kind=kind, sign=sign)
    raise TripletError("S3 is not +-S1 S2 or +-i S1 S2")


# -- Bell factorization ------------------------------------------------------------------


def aligning_unitary(a: Subalgebra) -> np.ndarray:
    """Unitary ``U`` with ``U A U* = M_2 (x) C I`` for an F-subalgebra ``A`` of ``M_4``."""
    if not is_f_subalgebra(a):
        raise FactorizationError("aligning unitary needs an F-subalgebra of M_4")
    p1, p2 = minimal_projections(a)
    cand = [p2 @ b @ p1 for b in a.basis]
    x = max(cand, key=lambda m: np.linalg.norm(m))
    # x = c E21 (x) I in aligned coordinates, so x* x = |c|^2 P1
    x = x / math.sqrt(np.trace(dagger(x) @ x).real / 2)
    w, v = np.linalg.eigh(p1)
    v1 = v[:, w > 0.5]
    frame = np.hstack([v1, x @ v1])
    return dagger(frame)


@dataclass(frozen=True, eq=False)
class BellFactorization:
    a_triplet: Triplet
    b_triplet: Triplet
    residual: float
    schmidt_tail: float
    unitary: np.ndarray = field(repr=False)

    def to_json(self) -> dict:
        from .linalg import matrix_to_json

        return {
            "A": [matrix_to_json(s) for s in self.a_triplet],
            "A_sign": self.a_triplet.sign,
            "B": [matrix_to_json(s) for s in self.b_triplet],
            "B_sign": self.b_triplet.sign,
            "residual": self.residual,
            "schmidt_tail": self.schmidt_tail,
        }


def is_f_subalgebra(a: Subalgebra) -> bool:
    return a.ambient_dim == 4 and a.kind == FACTOR and a.traceless_dim == 3


def is_m_subalgebra(a: Subalgebra) -> bool:
    return a.ambient_dim == 4 and a.is_masa


def bell_factorize(a: Subalgebra, triplet, tol: float = 1e-8, rank_tol: float = 1e-7) -> BellFactorization:
    """Write an M-triplet ``(X, Y, Z)`` as ``X = A1 B1, Y = A2 B2, Z = A3 B3``.

    ``(A1, A2, A3)`` is an F-triplet inside the F-subalgebra ``a`` and
    ``(B1, B2, B3)`` an F-triplet in its commutant.  The M-triplet must be
    orthogonal to both ``a`` and its commutant.  After aligning ``a`` with
    ``M_2 (x) C I`` each ``X_k`` is a product ``(x_k.sigma) (x) (y_k.sigma)``,
    read off from the rank-one Pauli coefficient matrix.
    """
    if not is_f_subalgebra(a):
        raise FactorizationError("the first argument must be an F-subalgebra of M_4")
    t = triplet if isinstance(triplet, Triplet) else classify_triplet(*triplet)
    if t.kind != M_KIND:
        raise FactorizationError("the triplet must be an M-triplet")
    a_comm = commutant(a)
    for s in t:
        overlap = max(
            (abs(np.trace(s @ b)) / 4 for b in np.concatenate([a.basis, a_comm.basis])),
            default=0.0,
        )
        if overlap > tol:
            raise FactorizationError(f"triplet is not orthogonal to the algebra and its commutant ({overlap:.3g})")

    u = aligning_unitary(a)
    xs, ys, tail = [], [], 0.0
    for s in t:
        coef = pauli_coefficients(u @ s @ dagger(u)).real
        left, sv, right = np.linalg.svd(coef)
        tail = max(tail, float(sv[1]))
        if sv[1] > rank_tol:
            raise FactorizationError(f"Pauli coefficient matrix has rank > 1 (second singular value {sv[1]:.3g})")
        x, y = left[1:, 0], sv[0] * right[0, 1:]
        k = int(np.argmax(np.abs(x)))
        if x[k] < 0:
            x, y = -x, -y
        xs.append(x)
        ys.append(y)
    # orient so that A1 A2 = i A3, matching s1 s2 = i s3
    if np.dot(np.cross(xs[0], xs[1]), xs[2]) < 0:
        xs[2], ys[2] = -xs[2], -ys[2]

    eye = SIGMA[0]
    a_ops = [dagger(u) @ np.kron(np.einsum("k,kij->ij", x, SIGMA[1:]), eye) @ u for x in xs]
    b_ops = [dagger(u) @ np.kron(eye, np.einsum("k,kij->ij", y, SIGMA[1:])) @ u for y in ys]
    a_ops = [0.5 * (m + dagger(m)) for m in a_ops]
    b_ops = [0.5 * (m + dagger(m)) for m in b_ops]
    a_trip = classify_triplet(*a_ops, tol=tol)
    b_trip = classify_triplet(*b_ops, tol=tol)
    if a_trip.kind != F_KIND or b_trip.kind != F_KIND:
        raise FactorizationError("recovered triplets are not F-triplets")
    residual = max(float(np.max(np.abs(s - ai @ bi))) for s, ai, bi in zip(t, a_ops, b_ops))
    return BellFactorization(a_trip, b_trip, residual, tail, u)


def standard_bell_triplet() -> Triplet:
    return classify_triplet(*(np.kron(SIGMA[k], SIGMA[k]) for k in (1, 2, 3)))


# -- Pauli catalog and complementary decompositions -------------------------------------------


def _word_of(m: np.ndarray) -> PauliWord:
    coef = pauli_coefficients(m)
    i, j = np.unravel_index(int(np.argmax(np.abs(coef))), coef.shape)
    return PauliWord(int(i), int(j))


@dataclass(frozen=True, eq=False)
class PauliSubalgebra:
    """A subalgebra of ``M_4`` spanned by ``I`` and three Pauli words."""

    words: tuple[PauliWord, PauliWord, PauliWord]
    triplet: Triplet = field(repr=False)
    algebra: Subalgebra = field(repr=False)

    @property
    def kind(self) -> str:
        return self.triplet.kind

    @property
    def key(self) -> frozenset:
        return frozenset((w.i, w.j) for w in self.words)

    @property
    def signed_labels(self) -> list[str]:
        """Word labels with a sign on the third making the defining relation exact."""
        w1, w2, w3 = self.words
        return [w1.label, w2.label, (w3 if self.triplet.sign > 0 else -w3).label]

    def to_json(self) -> dict:
        return {"kind": self.kind, "triplet": self.signed_labels}


@dataclass(frozen=True)
class PauliCatalog:
    masas: list[PauliSubalgebra]
    factors: list[PauliSubalgebra]

    @property
    def all(self) -> list[PauliSubalgebra]:
        return self.masas + self.factors

    def find(self, labels: Sequence[str]) -> PauliSubalgebra:
        key = frozenset((w.i, w.j) for w in map(PauliWord.parse, labels))
        for entry in self.all:
            if entry.key == key:
                return entry
        raise KeyError(f"no catalog subalgebra spanned by {list(labels)}")


@functools.lru_cache(maxsize=1)
def enumerate_pauli_subalgebras() -> PauliCatalog:
    """All subalgebras spanned by ``I`` and three non-identity Pauli words ``{a, b, ab}``."""
    words = pauli_words()
    seen = {}
    for w1, w2 in itertools.combinations(words, 2):
        w3 = _word_of(w1.matrix @ w2.matrix)
        if (w3.i, w3.j) == (0, 0):
            continue
        triple = tuple(sorted((w1, w2, w3)))
        key = frozenset((w.i, w.j) for w in triple)
        if key in seen:
            continue
        trip = classify_triplet(*(w.matrix for w in triple))
        seen[key] = PauliSubalgebra(triple, trip, trip.algebra)
    entries = sorted(seen.values(), key=lambda e: [(w.i, w.j) for w in e.words])
    return PauliCatalog(
        masas=[e for e in entries if e.kind == M_KIND],
        factors=[e for e in entries if e.kind == F_KIND],
    )


@dataclass(frozen=True, eq=False)
class DecompositionFamily:
    members: tuple[PauliSubalgebra, ...]
    ell: int
    pairwise_ok: bool

    @property
    def keys(self) -> frozenset:
        return frozenset(m.key for m in self.members)

    @property
    def traceless_total(self) -> int:
        return sum(m.algebra.traceless_dim for m in self.members)

    def to_json(self) -> dict:
        return {
            "ell": self.ell,
            "pairwise_ok": self.pairwise_ok,
            "members": [m.to_json() for m in self.members],
        }


# decompositions exhibited for each admissible number of F-subalgebras
EXHIBITED_FAMILIES: dict[int, list[list[str]]] = {
    0: [
        ["s12", "s23", "s31"],
        ["s13", "s21", "s32"],
        ["s01", "s10", "s11"],
        ["s02", "s20", "s22"],
        ["s03", "s30", "s33"],
    ],
    2: [
        ["s01", "s02", "s03"],
        ["s10", "s20", "s30"],
        ["s11", "s22", "s33"],
        ["s12", "s23", "s31"],
        ["s13", "s21", "s32"],
    ],
    4: [
        ["s01", "s02", "s03"],
        ["s10", "s21", "s31"],
        ["s20", "s12", "s32"],
        ["s30", "s13", "s23"],
        ["s11", "s22", "s33"],
    ],
}


def family_from_labels(triples: Sequence[Sequence[str]]) -> DecompositionFamily:
    catalog = enumerate_pauli_subalgebras()
    members = tuple(catalog.find(t) for t in triples)
    return _make_family(members)


def family_from_json(obj: dict) -> DecompositionFamily:
    """Inverse of :meth:`DecompositionFamily.to_json`; kind tags are checked."""
    try:
        entries = [(m["kind"], m["triplet"]) for m in obj["members"]]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed family JSON: {exc}") from exc
    fam = family_from_labels([t for _, t in entries])
    for (kind, _), member in zip(entries, fam.members):
        if kind != member.kind:
            raise ValueError(f"member {member.signed_labels} is {member.kind!r}, tagged {kind!r}")
    return fam


def _make_family(members: Sequence[PauliSubalgebra]) -> DecompositionFamily:
    ok = all(_pair_complementary(x.key, y.key) for x, y in itertools.combinations(members, 2))
    ell = sum(m.kind == F_KIND for m in members)
    return DecompositionFamily(tuple(members), ell, ok)


@functools.lru_cache(maxsize=None)
def _pair_verdict(key_a: frozenset, key_b: frozenset) -> bool:
    catalog = enumerate_pauli_subalgebras()
    lookup = {e.key: e.algebra for e in catalog.all}
    report = complementarity_report(lookup[key_a], lookup[key_b])
    if not report.consistent:
        raise RuntimeError("complementarity conditions disagree on a Pauli pair")
    return report.verdict


def _pair_complementary(key_a: frozenset, key_b: frozenset) -> bool:
    a, b = sorted((key_a, key_b), key=sorted)
    return _pair_verdict(a, b)


def complementary_family_search(target_size: int = 5) -> list[DecompositionFamily]:
    """All partitions of the 15 non-identity Pauli words into catalog triples.

    Disjoint word triples span complementary algebras, so each partition is a
    family of ``target_size`` pairwise complementary subalgebras; pairwise
    complementarity is re-verified numerically.  Results are sorted
    lexicographically by word indices.
    """
    catalog = enumerate_pauli_subalgebras()
    entries = catalog.all
    universe = frozenset((w.i, w.j) for w in pauli_words())
    if 3 * target_size != len(universe):
        raise ValueError("Pauli-word partitions of M_4 have exactly 5 members")
    by_word: dict[tuple[int, int], list[PauliSubalgebra]] = {w: [] for w in universe}
    for e in entries:
        for w in e.key:
            by_word[w].append(e)

    found: list[list[PauliSubalgebra]] = []

    def extend(chosen: list[PauliSubalgebra], covered: frozenset) -> None:
        if covered == universe:
            found.append(list(chosen))
            return
        pivot = min(universe - covered)
        for e in by_word[pivot]:
            if not (e.key & covered):
                chosen.append(e)
                extend(chosen, covered | e.key)
                chosen.pop()

    extend([], frozenset())
    families = []
    for members in found:
        members.sort(key=lambda e: sorted(e.key))
        families.append(_make_family(members))
    families.sort(key=lambda f: [sorted(m.key) for m in f.members])
    return families


# -- commutant dichotomy for F-subalgebras ---------------------------------------------------------


@dataclass(frozen=True)
class DichotomyReport:
    """Outcome of checking a subalgebra ``B`` complementary to an F-subalgebra ``A0``.

    ``branch`` is ``"a"`` (``B`` an M-subalgebra, expected complementary to the
    commutant of ``A0``) or ``"b"`` (``B`` an F-subalgebra, expected to meet
    the commutant in one traceless dimension or to equal it).
    """

    precondition: bool
    branch: str | None
    holds: bool | None
    residual: float | None
    intersection_dim: int | None = None
    equals_commutant: bool | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def commutant_dichotomy_check(a0: Subalgebra, b: Subalgebra) -> DichotomyReport:
    if not is_f_subalgebra(a0):
        raise ValueError("A0 must be an F-subalgebra of M_4")
    pre = complementarity_report(a0, b)
    if not pre.verdict:
        return DichotomyReport(False, None, None, pre.cond_ii.residual)
    a0p = commutant(a0)
    if is_m_subalgebra(b):
        rep = complementarity_report(b, a0p)
        return DichotomyReport(True, "a", rep.verdict, rep.cond_ii.residual)
    if is_f_subalgebra(b):
        inter = intersect(a0p, b)
        equal = a0p.same_span(b)
        holds = inter.traceless_dim == 1 or equal
        return DichotomyReport(True, "b", holds, None, inter.traceless_dim, equal)
    raise ValueError("B must be an F- or M-subalgebra of M_4")
