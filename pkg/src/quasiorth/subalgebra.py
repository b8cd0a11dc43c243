"""Unital *-subalgebras of M_n(C) and the complementarity test.

A :class:`Subalgebra` is stored through an orthonormal basis of its traceless
part: Hermitian matrices ``b_k`` with ``tau(b_k) = 0`` and
``tau(b_j b_k) = delta_jk``.  Together with the identity they span the
algebra as a complex vector space.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .linalg import (
    TOL,
    as_matrix,
    dagger,
    herm_to_vec,
    hermitian_parts,
    is_unitary,
    orthonormal_rows,
    spectral_apply,
    vec_to_herm,
)

ABELIAN, FACTOR, GENERAL = "abelian", "factor", "general"
_KINDS = (ABELIAN, FACTOR, GENERAL)

# span/rank decisions on unit-norm coordinate vectors
_RANK_TOL = 1e-8
_SPLIT_TOL = 1e-7


class CheckResult(NamedTuple):
    holds: bool
    residual: float


class ClosureError(RuntimeError):
    """Raised when the *-closure of a generating set fails to stabilize."""


class MinimalProjectionError(RuntimeError):
    """Raised when minimal projections cannot be computed."""


def _identity_vec(n: int) -> np.ndarray:
    return herm_to_vec(np.eye(n, dtype=complex)) / math.sqrt(n)


def _span_rows(n: int, mats: Iterable[np.ndarray]) -> np.ndarray:
    """Orthonormal rows spanning ``{I} + mats`` (as a complex *-closed space)."""
    herm = hermitian_parts(mats)
    vecs = [_identity_vec(n)] + [herm_to_vec(h) for h in herm]
    return orthonormal_rows(np.array(vecs), _RANK_TOL)


def _close_rows(n: int, rows: np.ndarray, max_rounds: int | None = None) -> np.ndarray:
    """Close a *-closed span (orthonormal rows, containing I) under products.

    Semi-naive iteration: each round multiplies only the directions added in
    the previous round against the whole span.
    """
    max_rounds = 2 * n * n if max_rounds is None else max_rounds
    q = rows
    fresh = rows
    for _ in range(max_rounds):
        added = []
        new_mats = vec_to_herm(fresh, n)
        for start in range(0, len(new_mats), 16):
            mats = vec_to_herm(q, n)
            chunk = new_mats[start : start + 16]
            prod = np.matmul(chunk[:, None], mats[None]).reshape(-1, n, n)
            adj = dagger(prod)
            v = herm_to_vec(np.concatenate([0.5 * (prod + adj), -0.5j * (prod - adj)]))
            resid = v - (v @ q.T) @ q
            resid = resid[np.linalg.norm(resid, axis=1) > _RANK_TOL]
            if len(resid) == 0:
                continue
            # second projection pass guards against loss of orthogonality
            basis = orthonormal_rows(resid, _RANK_TOL)
            basis = orthonormal_rows(basis - (basis @ q.T) @ q, _RANK_TOL)
            if len(basis):
                q = np.concatenate([q, basis])
                added.append(basis)
        if not added:
            return q
        fresh = np.concatenate(added)
    raise ClosureError(f"closure did not stabilize within {max_rounds} rounds")


def _traceless_basis(n: int, rows: np.ndarray) -> np.ndarray:
    """Traceless Hermitian basis with ``tau(b_j b_k) = delta_jk`` from span rows."""
    ident = _identity_vec(n)
    v = rows - np.outer(rows @ ident, ident)
    v = orthonormal_rows(v, _RANK_TOL)
    if v.shape[0] == 0:
        return np.zeros((0, n, n), dtype=complex)
    return vec_to_herm(v, n) * math.sqrt(n)


def _basis_rows(n: int, basis: np.ndarray) -> np.ndarray:
    rows = [_identity_vec(n)]
    if len(basis):
        rows.extend(herm_to_vec(basis) / math.sqrt(n))
    return np.array(rows)


def _detect_kind(n: int, basis: np.ndarray) -> str:
    d = len(basis)
    if d == 0:
        return ABELIAN
    if d * d * n * n <= 4_000_000:
        probes = np.einsum("aij,bjk->abik", basis, basis)
        probes = probes - np.swapaxes(probes, 0, 1)
    else:
        # a few generic elements already generate the algebra
        mix = np.random.default_rng(0).standard_normal((4, d))
        elems = np.einsum("rk,kij->rij", mix, basis)
        probes = np.einsum("aij,rjk->arik", basis, elems) - np.einsum("rij,ajk->arik", elems, basis)
    if np.max(np.abs(probes)) <= _RANK_TOL:
        return ABELIAN
    # centre: traceless x = sum_a c_a b_a with [x, probe] = 0 for every probe
    mat = np.moveaxis(probes, 0, -1).reshape(-1, d)
    mat = np.concatenate([mat.real, mat.imag])
    s = np.linalg.svd(mat, compute_uv=False)
    null = int(np.sum(s <= _RANK_TOL * max(1.0, float(s[0]))))
    return FACTOR if null == 0 else GENERAL


@dataclass(frozen=True, eq=False)
class Subalgebra:
    """A unital *-subalgebra of ``M_n(C)``.

    Attributes:
        ambient_dim: ``n``.
        basis: array of shape ``(k, n, n)``; Hermitian, traceless, orthonormal
            for ``(a, b) -> tau(a b)``.
        kind: ``"abelian"``, ``"factor"`` or ``"general"``.  The trivial algebra
            ``C I`` is tagged abelian.
    """

    ambient_dim: int
    basis: np.ndarray = field(repr=False)
    kind: str = GENERAL

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        b = np.array(self.basis, dtype=complex).reshape(-1, self.ambient_dim, self.ambient_dim)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    # -- construction ----------------------------------------------------------

    @classmethod
    def from_generators(cls, ambient_dim: int, gens: Sequence) -> "Subalgebra":
        """Smallest unital *-subalgebra containing ``gens``."""
        n = int(ambient_dim)
        mats = [as_matrix(g) for g in gens]
        for g in mats:
            if g.shape != (n, n):
                raise ValueError(f"generator of shape {g.shape} in M_{n}")
        rows = _close_rows(n, _span_rows(n, mats))
        return cls._from_rows(n, rows)

    @classmethod
    def from_span(cls, ambient_dim: int, mats: Sequence, check: bool = True) -> "Subalgebra":
        """Subalgebra whose linear span (with I) is already an algebra.

        With ``check`` the span is verified to be closed under products.
        """
        n = int(ambient_dim)
        rows = _span_rows(n, [as_matrix(m) for m in mats])
        if check:
            try:
                _close_rows(n, rows, max_rounds=1)
            except ClosureError:
                raise ValueError("span is not closed under multiplication") from None
        return cls._from_rows(n, rows)

    @classmethod
    def _from_rows(cls, n: int, rows: np.ndarray) -> "Subalgebra":
        basis = _traceless_basis(n, rows)
        return cls(n, basis, _detect_kind(n, basis))

    @classmethod
    def _trusted(cls, n: int, basis: np.ndarray, kind: str | None = None) -> "Subalgebra":
        basis = np.asarray(basis, dtype=complex).reshape(-1, n, n)
        return cls(n, basis, kind if kind is not None else _detect_kind(n, basis))

    # -- basic structure ------------------------------------------------------------

    @property
    def traceless_dim(self) -> int:
        return int(self.basis.shape[0])

    @property
    def dim(self) -> int:
        return self.traceless_dim + 1

    @property
    def is_abelian(self) -> bool:
        return self.kind == ABELIAN

    @property
    def is_factor(self) -> bool:
        return self.kind == FACTOR or self.traceless_dim == 0

    @property
    def is_masa(self) -> bool:
        return self.kind == ABELIAN and self.dim == self.ambient_dim

    @property
    def span_rows(self) -> np.ndarray:
        """Orthonormal real coordinate rows of the span, identity first."""
        return _basis_rows(self.ambient_dim, self.basis)

    def conditional_expectation(self, x) -> np.ndarray:
        return conditional_expectation(self, x)

    def expect_stack(self, xs: np.ndarray) -> np.ndarray:
        """Conditional expectation applied to a stack ``(m, n, n)`` without checks."""
        n = self.ambient_dim
        tr = np.trace(xs, axis1=-2, axis2=-1) / n
        out = tr[..., None, None] * np.eye(n)
        if self.traceless_dim:
            coef = np.einsum("kji,...ij->...k", self.basis, xs) / n
            out = out + np.einsum("...k,kij->...ij", coef, self.basis)
        return out

    def contains(self, x, tol: float = TOL) -> bool:
        x = as_matrix(x)
        return bool(np.max(np.abs(x - self.conditional_expectation(x))) <= tol)

    def issubset(self, other: "Subalgebra", tol: float = TOL) -> bool:
        _check_dims(self, other)
        return all(other.contains(b, tol) for b in self.basis)

    def same_span(self, other: "Subalgebra", tol: float = TOL) -> bool:
        return self.traceless_dim == other.traceless_dim and self.issubset(other, tol)

    def conjugate(self, u) -> "Subalgebra":
        """The algebra ``u A u*`` for a unitary ``u``."""
        u = as_matrix(u)
        if not is_unitary(u):
            raise ValueError("conjugation requires a unitary")
        b = u @ self.basis @ dagger(u)
        return Subalgebra._trusted(self.ambient_dim, 0.5 * (b + dagger(b)), self.kind)

    # -- minimal projections --------------------------------------------------------

    @functools.cached_property
    def _minimal_family(self) -> tuple[np.ndarray, ...]:
        return tuple(_refine_projections(self))

    @property
    def minimal_projection_traces(self) -> list[float]:
        n = self.ambient_dim
        return [float(np.trace(p).real / n) for p in self._minimal_family]

    @property
    def homogeneity(self) -> float | None:
        """Common trace ``d`` of all minimal projections, or ``None``."""
        traces = self.minimal_projection_traces
        if max(traces) - min(traces) <= 1e-8:
            return float(np.mean(traces))
        return None

    def __repr__(self) -> str:
        return (
            f"Subalgebra(ambient_dim={self.ambient_dim}, traceless_dim={self.traceless_dim}, "
            f"kind={self.kind!r})"
        )

    # -- serialization ---------------------------------------------------------------

    def to_json(self) -> dict:
        from .linalg import matrix_to_json

        return {
            "ambient_dim": self.ambient_dim,
            "basis": [matrix_to_json(b) for b in self.basis],
            "kind": self.kind,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Subalgebra":
        """Parse the subalgebra JSON format.

        The basis is re-closed and re-orthonormalized, so any spanning family
        of the traceless part is accepted; a ``kind`` that disagrees with the
        computed one is rejected.
        """
        from .linalg import matrix_from_json

        try:
            n = int(obj["ambient_dim"])
            mats = [matrix_from_json(m) for m in obj["basis"]]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed subalgebra JSON: {exc}") from exc
        alg = cls.from_generators(n, mats)
        declared = obj.get("kind")
        if declared is not None and declared != alg.kind:
            raise ValueError(f"declared kind {declared!r} but the algebra is {alg.kind!r}")
        return alg


def _check_dims(a: Subalgebra, b: Subalgebra) -> None:
    if a.ambient_dim != b.ambient_dim:
        raise ValueError(f"ambient dimension mismatch: {a.ambient_dim} vs {b.ambient_dim}")


def _range_basis(p: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(p)
    return v[:, w > 0.5]


def _refine_projections(alg: Subalgebra) -> list[np.ndarray]:
    """A maximal orthogonal family of minimal projections of ``alg``.

    Starting from ``{I}``, each projection ``P`` is split along the spectral
    decomposition of ``P b P`` (taken inside the range of ``P``) for the basis
    elements ``b`` in order, until ``P A P = C P`` for every member.
    """
    n = alg.ambient_dim
    family = [np.eye(n, dtype=complex)]
    for _ in range(n + 1):
        changed = False
        for b in alg.basis:
            refined = []
            for p in family:
                v = _range_basis(p)
                c = dagger(v) @ b @ v
                w, u = np.linalg.eigh(0.5 * (c + dagger(c)))
                cuts = np.nonzero(np.diff(w) > _SPLIT_TOL)[0] + 1
                if len(cuts) == 0:
                    refined.append(p)
                    continue
                changed = True
                for block in np.split(np.arange(len(w)), cuts):
                    vv = v @ u[:, block]
                    refined.append(vv @ dagger(vv))
            family = refined
        if not changed:
            return family
    raise MinimalProjectionError("projection refinement did not terminate")


def minimal_projections(alg: Subalgebra) -> list[np.ndarray]:
    """Minimal projections summing to ``I`` for an abelian algebra or a factor.

    For an abelian algebra the family is unique.  For a factor it is one
    maximal orthogonal family (the diagonal matrix units of a computed
    isomorphism), seeded by the spectral decomposition of the first basis
    element.
    """
    if alg.kind == GENERAL:
        raise MinimalProjectionError("minimal projections are only computed for abelian algebras and factors")
    family = list(alg._minimal_family)
    n = alg.ambient_dim
    if alg.kind == ABELIAN:
        expected = alg.dim
        ranks = None
    else:
        k = math.isqrt(alg.dim)
        if k * k != alg.dim or n % k:
            raise MinimalProjectionError(f"factor of dimension {alg.dim} cannot sit in M_{n}")
        expected, ranks = k, n // k
    if len(family) != expected:
        raise MinimalProjectionError(f"found {len(family)} minimal projections, expected {expected}")
    if ranks is not None:
        got = [round(float(np.trace(p).real)) for p in family]
        if any(r != ranks for r in got):
            raise MinimalProjectionError(f"minimal projection ranks {got}, expected {ranks}")
    if np.max(np.abs(sum(family) - np.eye(n))) > TOL:
        raise MinimalProjectionError("minimal projections do not sum to the identity")
    return family


def conditional_expectation(alg: Subalgebra, x) -> np.ndarray:
    """Trace-preserving conditional expectation onto ``alg``.

    This is the Hilbert-Schmidt orthogonal projection onto the span of ``I``
    and the basis.
    """
    x = as_matrix(x)
    if x.shape[0] != alg.ambient_dim:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {alg.ambient_dim}")
    return alg.expect_stack(x[None])[0]


def traceless_dim(alg: Subalgebra) -> int:
    return alg.traceless_dim


def commutant(alg: Subalgebra) -> Subalgebra:
    """Relative commutant ``{x : x a = a x for all a in alg}``."""
    n = alg.ambient_dim
    eye = np.eye(n)
    gram = np.zeros((n * n, n * n), dtype=complex)
    for b in alg.basis:
        op = np.kron(eye, b.T) - np.kron(b, eye)
        gram += dagger(op) @ op
    w, v = np.linalg.eigh(gram)
    scale = max(1.0, float(w[-1])) if w.size else 1.0
    null = v[:, w <= 1e-10 * scale]
    mats = [null[:, k].reshape(n, n) for k in range(null.shape[1])]
    return Subalgebra._from_rows(n, _span_rows(n, mats))


def intersect(a: Subalgebra, b: Subalgebra) -> Subalgebra:
    """Intersection of two subalgebras.

    The common subspace is read off the principal angles between the two spans:
    directions where the composed orthogonal projections act as the identity.
    """
    _check_dims(a, b)
    n = a.ambient_dim
    qa, qb = a.span_rows, b.span_rows
    u, s, _ = np.linalg.svd(qa @ qb.T)
    common = (u[:, s > 1 - 1e-8]).T @ qa
    rows = orthonormal_rows(common, _RANK_TOL)
    rows = _close_rows(n, orthonormal_rows(np.vstack([_identity_vec(n), rows]), _RANK_TOL))
    return Subalgebra._from_rows(n, rows)


# -- complementarity ---------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionResult:
    holds: bool | None
    residual: float | None

    def to_json(self) -> dict:
        return {"holds": self.holds, "residual": self.residual}


@dataclass(frozen=True)
class ComplementarityReport:
    """The four equivalent complementarity conditions evaluated numerically.

    ``cond_i`` is ``None``-valued when minimal projections are not computed
    (algebras of kind ``"general"``).
    """

    cond_i: ConditionResult
    cond_ii: ConditionResult
    cond_iii: ConditionResult
    cond_iv: ConditionResult
    verdict: bool
    d_A: float | None = None
    d_B: float | None = None

    @property
    def conditions(self) -> tuple[ConditionResult, ...]:
        return (self.cond_i, self.cond_ii, self.cond_iii, self.cond_iv)

    @property
    def consistent(self) -> bool:
        """True when every evaluated condition agrees with the verdict."""
        return all(c.holds == self.verdict for c in self.conditions if c.holds is not None)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "cond_i": self.cond_i.to_json(),
            "cond_ii": self.cond_ii.to_json(),
            "cond_iii": self.cond_iii.to_json(),
            "cond_iv": self.cond_iv.to_json(),
            "d_A": self.d_A,
            "d_B": self.d_B,
            "consistent": self.consistent,
        }


def _rotated_families(alg: Subalgebra, family: list[np.ndarray], rng: np.random.Generator, count: int):
    yield family
    if alg.traceless_dim == 0:
        return
    for _ in range(count):
        h = np.einsum("k,kij->ij", rng.standard_normal(alg.traceless_dim), alg.basis)
        u = spectral_apply(0.5 * (h + dagger(h)), lambda w: np.exp(1j * w))
        yield [u @ p @ dagger(u) for p in family]


def complementarity_report(
    a: Subalgebra,
    b: Subalgebra,
    tol: float = TOL,
    rotations: int = 8,
    seed: int = 0,
) -> ComplementarityReport:
    """Evaluate conditions (i)-(iv) of complementarity for ``a`` and ``b``.

    (i)   ``tau(PQ) = tau(P) tau(Q)`` for minimal projections, on the computed
          families and ``rotations`` random inner-unitary rotations of each;
    (ii)  ``max |Tr(a_i b_j)|`` over the traceless bases;
    (iii) ``tau(xy) = tau(x) tau(y)`` over the bases augmented with ``I``;
    (iv)  ``E_a`` maps ``b``'s basis into ``C I``.

    The verdict is condition (ii).
    """
    _check_dims(a, b)
    n = a.ambient_dim
    ba, bb = a.basis, b.basis

    if len(ba) and len(bb):
        gram = np.einsum("aji,bji->ab", ba.conj(), bb)
        res_ii = float(np.max(np.abs(gram)))
    else:
        res_ii = 0.0

    eye = np.eye(n, dtype=complex)[None]
    xa = np.concatenate([eye, ba])
    xb = np.concatenate([eye, bb])
    tau_ab = np.einsum("aij,bji->ab", xa, xb) / n
    tau_a = np.trace(xa, axis1=1, axis2=2) / n
    tau_b = np.trace(xb, axis1=1, axis2=2) / n
    res_iii = float(np.max(np.abs(tau_ab - np.outer(tau_a, tau_b))))

    if len(bb):
        e = a.expect_stack(bb)
        tr = np.trace(e, axis1=1, axis2=2) / n
        dev = e - tr[:, None, None] * np.eye(n)
        res_iv = float(np.max(np.sqrt(np.einsum("kij,kij->k", dev.conj(), dev).real / n)))
    else:
        res_iv = 0.0

    cond_i = ConditionResult(None, None)
    if a.kind != GENERAL and b.kind != GENERAL:
        rng = np.random.default_rng(seed)
        fa, fb = minimal_projections(a), minimal_projections(b)
        worst = 0.0
        for pa in _rotated_families(a, fa, rng, rotations):
            for pb in _rotated_families(b, fb, rng, rotations):
                pa_s, pb_s = np.array(pa), np.array(pb)
                joint = np.einsum("aij,bji->ab", pa_s, pb_s).real / n
                ta = np.trace(pa_s, axis1=1, axis2=2).real / n
                tb = np.trace(pb_s, axis1=1, axis2=2).real / n
                worst = max(worst, float(np.max(np.abs(joint - np.outer(ta, tb)))))
        cond_i = ConditionResult(worst <= tol, worst)

    cond_ii = ConditionResult(res_ii <= tol, res_ii)
    return ComplementarityReport(
        cond_i=cond_i,
        cond_ii=cond_ii,
        cond_iii=ConditionResult(res_iii <= tol, res_iii),
        cond_iv=ConditionResult(res_iv <= tol, res_iv),
        verdict=bool(cond_ii.holds),
        d_A=a.homogeneity,
        d_B=b.homogeneity,
    )


def transition_is_hadamard(u, v, tol: float = TOL) -> CheckResult:
    """Whether the bases given by the columns of ``u`` and ``v`` are mutually unbiased.

    Equivalent to every entry of ``u* v`` having modulus ``1/sqrt(n)``.
    """
    u, v = as_matrix(u), as_matrix(v)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    if not (is_unitary(u) and is_unitary(v)):
        raise ValueError("transition test needs unitary basis matrices")
    n = u.shape[0]
    residual = float(np.max(np.abs(np.abs(dagger(u) @ v) - 1 / math.sqrt(n))))
    return CheckResult(residual <= tol, residual)


# -- standard algebras ---------------------------------------------------------------------


def gell_mann_basis(k: int) -> np.ndarray:
    """Traceless Hermitian basis of ``M_k`` with ``Tr(b_i b_j) = delta_ij``."""
    # diagonal elements first, so a factor's minimal projections come out as
    # the diagonal matrix units
    out = []
    for l in range(1, k):
        diag = np.zeros(k)
        diag[:l] = 1
        diag[l] = -l
        out.append(np.diag(diag / math.sqrt(l * (l + 1))).astype(complex))
    for r in range(k):
        for c in range(r + 1, k):
            m = np.zeros((k, k), dtype=complex)
            m[r, c] = m[c, r] = 1 / math.sqrt(2)
            out.append(m)
            m = np.zeros((k, k), dtype=complex)
            m[r, c], m[c, r] = -1j / math.sqrt(2), 1j / math.sqrt(2)
            out.append(m)
    return np.array(out).reshape(-1, k, k)


def trivial_algebra(n: int) -> Subalgebra:
    return Subalgebra(n, np.zeros((0, n, n)), ABELIAN)


def full_algebra(n: int) -> Subalgebra:
    return Subalgebra._trusted(n, gell_mann_basis(n) * math.sqrt(n), FACTOR if n > 1 else ABELIAN)


def tensor_factor(k: int, m: int, side: str) -> Subalgebra:
    """``M_k (x) C I_m`` (``side="left"``) or ``C I_k (x) M_m`` (``side="right"``)."""
    if side == "left":
        basis = np.array([np.kron(g, np.eye(m)) for g in gell_mann_basis(k)])
        dim = k
    elif side == "right":
        basis = np.array([np.kron(np.eye(k), g) for g in gell_mann_basis(m)])
        dim = m
    else:
        raise ValueError("side must be 'left' or 'right'")
    n = k * m
    kind = FACTOR if dim > 1 else ABELIAN
    # kron(g, I_m) has Tr(b^2) = m, kron(I_k, g) has k
    return Subalgebra._trusted(n, basis.reshape(-1, n, n) * math.sqrt(dim), kind)


def masa_from_basis(u) -> Subalgebra:
    """MASA of operators diagonal in the orthonormal basis given by the columns of ``u``."""
    u = as_matrix(u)
    if not is_unitary(u):
        raise ValueError("basis matrix must be unitary")
    n = u.shape[0]
    diag = np.array([g for g in gell_mann_basis(n) if np.allclose(g, np.diag(np.diag(g)))])
    diag = diag.reshape(-1, n, n)
    basis = u @ diag @ dagger(u) * math.sqrt(n)
    return Subalgebra._trusted(n, 0.5 * (basis + dagger(basis)), ABELIAN)


def diagonal_masa(n: int) -> Subalgebra:
    return masa_from_basis(np.eye(n))
