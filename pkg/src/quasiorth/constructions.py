"""Constructions of complementary subalgebras and mutually unbiased bases."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linalg import SIGMA, TOL, PauliWord, anticommutator, as_matrix, dagger, is_unitary
from .subalgebra import (
    Subalgebra,
    complementarity_report,
    masa_from_basis,
    tensor_factor,
)


def quantum_fourier(n: int) -> np.ndarray:
    """Unitary with entries ``omega**(i*j) / sqrt(n)``, ``omega = exp(2 pi i / n)``."""
    if n < 1:
        raise ValueError("n must be positive")
    idx = np.arange(n)
    # reduce the exponent first so large n keeps full phase accuracy
    return np.exp(2j * np.pi * (np.outer(idx, idx) % n) / n) / math.sqrt(n)


def _is_odd_prime(p: int) -> bool:
    return p > 2 and all(p % k for k in range(2, math.isqrt(p) + 1))


@dataclass(frozen=True, eq=False)
class WeylSystem:
    """Clock and shift unitaries ``X``, ``Z`` in ``M_p`` with ``Z X = q X Z``."""

    p: int
    q: complex
    X: np.ndarray
    Z: np.ndarray
    warning: str | None = None

    def word(self, k: int, l: int) -> np.ndarray:
        """``X^k Z^l``."""
        return np.linalg.matrix_power(self.X, k % self.p) @ np.linalg.matrix_power(self.Z, l % self.p)


def weyl_system(p: int) -> WeylSystem:
    """Build the shift ``X e_i = e_{i+1 mod p}`` and clock ``Z e_i = q^i e_i``.

    ``p = 2`` (or any non-prime ``p >= 2``) is accepted with a warning, since
    the complementarity statements built on it need an odd prime.
    """
    p = int(p)
    if p < 2:
        raise ValueError("p must be at least 2")
    q = np.exp(2j * np.pi / p)
    x = np.roll(np.eye(p, dtype=complex), 1, axis=0)
    z = np.diag(np.exp(2j * np.pi * np.arange(p) / p))
    warning = None
    if not _is_odd_prime(p):
        warning = f"p = {p} is not an odd prime; complementarity of A(u, v) is not guaranteed"
        warnings.warn(warning, stacklevel=2)
    return WeylSystem(p, complex(q), x, z, warning)


class PhaseVector(NamedTuple):
    k1: int
    l1: int
    k2: int
    l2: int

    def reduce(self, p: int) -> "PhaseVector":
        return PhaseVector(*(c % p for c in self))


def symplectic(u, v, p: int) -> int:
    """``k1 l1' - k1' l1 + k2 l2' - k2' l2  (mod p)``."""
    k1, l1, k2, l2 = u
    k1_, l1_, k2_, l2_ = v
    return int((k1 * l1_ - k1_ * l1 + k2 * l2_ - k2_ * l2) % p)


def pi_op(u, p: int, system: WeylSystem | None = None) -> np.ndarray:
    """``X^k1 Z^l1 (x) X^k2 Z^l2`` for ``u = (k1, l1, k2, l2)``."""
    if system is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            system = weyl_system(p)
    k1, l1, k2, l2 = PhaseVector(*u).reduce(p)
    return np.kron(system.word(k1, l1), system.word(k2, l2))


def weyl_subalgebra(u, v, p: int) -> Subalgebra:
    """The copy of ``M_p`` inside ``M_p (x) M_p`` generated by ``pi(u)`` and ``pi(v)``."""
    if not _is_odd_prime(p):
        raise ValueError(f"p = {p}: the embedding needs an odd prime")
    if symplectic(u, v, p) == 0:
        raise ValueError("u and v have vanishing symplectic form; pi(u), pi(v) commute")
    alg = Subalgebra.from_generators(p * p, [pi_op(u, p), pi_op(v, p)])
    if alg.traceless_dim != p * p - 1:
        raise RuntimeError(f"generated algebra has traceless dimension {alg.traceless_dim}")
    return alg


# -- block-unitary criterion ------------------------------------------------------------


@dataclass(frozen=True)
class BlockCriterion:
    holds: bool
    residual: float
    complementary: bool
    m_less_than_n: bool = False

    def to_json(self) -> dict:
        return {
            "holds": self.holds,
            "residual": self.residual,
            "complementary": self.complementary,
            "m_less_than_n": self.m_less_than_n,
        }


def blocks(w: np.ndarray, n: int, m: int) -> np.ndarray:
    """The ``n*n`` blocks of size ``m``, row-major over block positions."""
    return w.reshape(n, m, n, m).transpose(0, 2, 1, 3).reshape(n * n, m, m)


def block_criterion(w, n: int, m: int, tol: float = TOL) -> BlockCriterion:
    """Test whether ``W (C I_n (x) M_m) W*`` is complementary to ``C I_n (x) M_m``.

    Writes ``W`` as an ``n x n`` array of ``m x m`` blocks ``W_k`` and checks that
    ``(m/n) sum_k |W_k><W_k|`` is the identity on ``M_m`` with the
    Hilbert-Schmidt inner product.  The complementarity report of the two
    algebras is evaluated alongside as a cross-check.
    """
    w = as_matrix(w)
    if w.shape[0] != n * m:
        raise ValueError(f"W has dimension {w.shape[0]}, expected n*m = {n * m}")
    if not is_unitary(w):
        raise ValueError("W must be unitary")
    vecs = blocks(w, n, m).reshape(n * n, m * m)
    op = (m / n) * (vecs.T @ vecs.conj())
    residual = float(np.max(np.abs(op - np.eye(m * m))))
    right = tensor_factor(n, m, "right")
    complementary = complementarity_report(right.conjugate(w), right, tol=max(tol, 1e-8)).verdict
    if m < n:
        return BlockCriterion(False, residual, complementary, m_less_than_n=True)
    return BlockCriterion(residual <= tol, residual, complementary)


def fourier_factor_pair(n: int = 2) -> tuple[Subalgebra, Subalgebra]:
    """``C I (x) M_n`` and its image under the Fourier transform of dimension ``n^2``."""
    right = tensor_factor(n, n, "right")
    return right, right.conjugate(quantum_fourier(n * n))


# -- two-qubit structures -------------------------------------------------------------------


def bell_basis() -> np.ndarray:
    """Columns ``(|00>+|11>)``, ``(|01>+|10>)``, ``(|00>-|11>)``, ``(|01>-|10>)``, over sqrt 2."""
    return np.array(
        [[1, 0, 1, 0], [0, 1, 0, 1], [0, 1, 0, -1], [1, 0, -1, 0]], dtype=complex
    ) / math.sqrt(2)


def bell_masa() -> Subalgebra:
    return masa_from_basis(bell_basis())


def bell_projectors() -> list[np.ndarray]:
    b = bell_basis()
    return [np.outer(b[:, k], b[:, k].conj()) for k in range(4)]


@dataclass(frozen=True, eq=False)
class CARModel:
    a1: np.ndarray
    a2: np.ndarray
    A1: Subalgebra
    A2: Subalgebra
    parity: np.ndarray
    even_bases: tuple[tuple[PauliWord, ...], tuple[PauliWord, ...]]

    def parity_map(self, x) -> np.ndarray:
        return self.parity @ as_matrix(x) @ self.parity

    def anticommutation_residuals(self) -> dict[str, float]:
        a = {"a1": self.a1, "a2": self.a2}
        eye = np.eye(4)
        out = {}
        for i in ("a1", "a2"):
            out[f"{{{i},{i}*}} - I"] = float(np.max(np.abs(anticommutator(a[i], dagger(a[i])) - eye)))
            out[f"{{{i},{i}}}"] = float(np.max(np.abs(anticommutator(a[i], a[i]))))
        out["{a1,a2}"] = float(np.max(np.abs(anticommutator(self.a1, self.a2))))
        out["{a1,a2*}"] = float(np.max(np.abs(anticommutator(self.a1, dagger(self.a2)))))
        return out


def car_model() -> CARModel:
    """Two fermionic modes on two qubits (Jordan-Wigner form)."""
    e12 = np.array([[0, 1], [0, 0]], dtype=complex)
    a1 = np.kron(e12, SIGMA[0])
    a2 = np.kron(SIGMA[3], e12)
    even = (
        tuple(PauliWord(i, i) for i in range(4)),
        (PauliWord(0, 3), PauliWord(1, 2), PauliWord(2, 1), PauliWord(3, 0)),
    )
    return CARModel(
        a1=a1,
        a2=a2,
        A1=Subalgebra.from_generators(4, [a1]),
        A2=Subalgebra.from_generators(4, [a2]),
        parity=np.kron(SIGMA[3], SIGMA[3]),
        even_bases=even,
    )
