"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Everything here
is a pure function of its arguments.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

TOL = 1e-9

SIGMA = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def as_matrix(a) -> np.ndarray:
    """Coerce ``a`` to a square complex matrix, raising ``ValueError`` otherwise."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {m.shape}")
    return m


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def normalized_trace(a) -> complex:
    """Return ``Tr(a) / dim(a)``."""
    a = as_matrix(a)
    return complex(np.trace(a) / a.shape[0])


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product ``Tr(a* b)``, conjugate-linear in ``a``."""
    a, b = as_matrix(a), as_matrix(b)
    _check_same_dim(a, b)
    return complex(np.vdot(a, b))


def tensor(a, b) -> np.ndarray:
    """Kronecker product; block ``(r, c)`` of the result is ``a[r, c] * b``."""
    return np.kron(as_matrix(a), as_matrix(b))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


# -- predicates --------------------------------------------------------------


def is_hermitian(a, tol: float = TOL) -> bool:
    a = as_matrix(a)
    return bool(np.max(np.abs(a - dagger(a))) <= tol)


def is_unitary(a, tol: float = TOL) -> bool:
    a = as_matrix(a)
    return bool(np.max(np.abs(a @ dagger(a) - np.eye(a.shape[0]))) <= tol)


def is_projection(a, tol: float = TOL) -> bool:
    a = as_matrix(a)
    return is_hermitian(a, tol) and bool(np.max(np.abs(a @ a - a)) <= tol)


def is_traceless(a, tol: float = TOL) -> bool:
    return abs(normalized_trace(a)) <= tol


def is_p_unitary(a, tol: float = TOL) -> bool:
    """Self-adjoint, traceless and unitary."""
    return is_hermitian(a, tol) and is_traceless(a, tol) and is_unitary(a, tol)


# -- spectral functions --------------------------------------------------------


def eta(t):
    """``-t log t`` with ``eta(0) = 0``; natural logarithm."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = -t[pos] * np.log(t[pos])
    return out


def hermitian_eigvalsh(a: np.ndarray, tol: float = TOL) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix (or stack of them)."""
    dev = np.max(np.abs(a - dagger(a)))
    if dev > tol:
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.3g})")
    return np.linalg.eigvalsh(0.5 * (a + dagger(a)))


def spectral_eta(a, tol: float = TOL) -> float:
    """Return ``tau(eta(a))`` for a positive semidefinite Hermitian ``a``.

    Eigenvalues in ``(-tol, 0)`` are treated as zero; anything more negative is
    rejected.
    """
    a = as_matrix(a)
    w = hermitian_eigvalsh(a, tol)
    if w[0] < -tol:
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {w[0]:.3g})")
    return float(np.mean(eta(np.clip(w, 0.0, None))))


def spectral_eta_batch(stack: np.ndarray) -> np.ndarray:
    """``tau(eta(.))`` for every matrix of a Hermitian stack, no validation."""
    w = np.linalg.eigvalsh(stack)
    return eta(np.clip(w, 0.0, None)).mean(axis=-1)


def spectral_apply(a: np.ndarray, fn) -> np.ndarray:
    """Functional calculus ``fn(a)`` for a Hermitian matrix or stack."""
    w, v = np.linalg.eigh(a)
    return (v * fn(w)[..., None, :]) @ dagger(v)


# -- Pauli words ------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class PauliWord:
    """``sign * sigma_i (x) sigma_j`` acting on two qubits."""

    i: int
    j: int
    sign: int = 1

    def __post_init__(self):
        if not (0 <= self.i <= 3 and 0 <= self.j <= 3):
            raise ValueError(f"Pauli indices must lie in 0..3, got ({self.i}, {self.j})")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @property
    def matrix(self) -> np.ndarray:
        return self.sign * np.kron(SIGMA[self.i], SIGMA[self.j])

    @property
    def label(self) -> str:
        return ("-" if self.sign < 0 else "") + f"s{self.i}{self.j}"

    @classmethod
    def parse(cls, label: str) -> "PauliWord":
        """Inverse of :attr:`label`, e.g. ``"-s12"``."""
        sign = 1
        text = label.strip()
        if text.startswith("-"):
            sign, text = -1, text[1:]
        elif text.startswith("+"):
            text = text[1:]
        if len(text) != 3 or text[0] != "s" or not text[1:].isdigit():
            raise ValueError(f"malformed Pauli word label {label!r}")
        return cls(int(text[1]), int(text[2]), sign)

    def __neg__(self) -> "PauliWord":
        return PauliWord(self.i, self.j, -self.sign)


_PAULI4 = np.array([[np.kron(SIGMA[i], SIGMA[j]) for j in range(4)] for i in range(4)])


def pauli_words(include_identity: bool = False) -> list[PauliWord]:
    """The sixteen (or fifteen non-identity) unsigned two-qubit Pauli words."""
    return [
        PauliWord(i, j)
        for i in range(4)
        for j in range(4)
        if include_identity or (i, j) != (0, 0)
    ]


def pauli_coefficients(a) -> np.ndarray:
    """Coefficients ``c[i, j] = tau(sigma_ij a)`` of a 4x4 matrix in the Pauli basis."""
    a = as_matrix(a)
    if a.shape != (4, 4):
        raise ValueError("Pauli expansion needs a 4x4 matrix")
    return np.einsum("ijba,ab->ij", _PAULI4, a) / 4


# -- Hermitian <-> real vector maps ----------------------------------------------


def hermitian_parts(mats: Iterable[np.ndarray]) -> list[np.ndarray]:
    """Split each matrix into the two Hermitian matrices ``h, k`` with ``m = h + i k``."""
    out = []
    for m in mats:
        m = np.asarray(m, dtype=complex)
        out.append(0.5 * (m + dagger(m)))
        out.append(-0.5j * (m - dagger(m)))
    return out


def herm_to_vec(h: np.ndarray) -> np.ndarray:
    """Real coordinates of Hermitian matrices with ``<v(h), v(k)> = Tr(h k)``."""
    h = np.asarray(h)
    flat = h.reshape(*h.shape[:-2], -1)
    return np.concatenate([flat.real, flat.imag], axis=-1)


def vec_to_herm(v: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    half = n * n
    m = v[..., :half] + 1j * v[..., half:]
    return m.reshape(*v.shape[:-1], n, n)


def orthonormal_rows(vectors: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis (as rows) of the row space of ``vectors``."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    if vectors.size == 0 or vectors.shape[0] == 0:
        return np.zeros((0, vectors.shape[-1]))
    _, s, vt = np.linalg.svd(vectors, full_matrices=False)
    scale = max(1.0, float(s[0])) if s.size else 1.0
    rank = int(np.sum(s > tol * scale))
    return vt[:rank]


# -- random sampling ------------------------------------------------------------


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix with respect to ``tau`` (so ``tau(rho) = 1``)."""
    k = n if rank is None else rank
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    rho = g @ dagger(g)
    return rho * n / np.trace(rho).real


# -- JSON matrix format -----------------------------------------------------------


def matrix_to_json(a) -> dict:
    a = as_matrix(a)
    return {"dim": int(a.shape[0]), "re": a.real.tolist(), "im": a.imag.tolist()}


def matrix_from_json(obj: dict) -> np.ndarray:
    """Parse ``{"dim": n, "re": [[...]], "im": [[...]]}``; ``im`` may be omitted."""
    try:
        n = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from exc
    if re.shape != (n, n) or im.shape != (n, n):
        raise ValueError(f"matrix JSON declares dim {n} but carries shape {re.shape}/{im.shape}")
    return re + 1j * im


def matrices_close(a: Sequence, b: Sequence, tol: float = TOL) -> bool:
    return bool(np.max(np.abs(np.asarray(a) - np.asarray(b))) <= tol)
