"""Connes-Stormer conditional entropy ``H(A|B)`` with respect to the trace.

For a convex decomposition ``I = sum_i w_i rho_i`` into densities (w.r.t. the
normalized trace) the functional is

    sum_i w_i * (tau(eta(E_B rho_i)) - tau(eta(E_A rho_i)))

and ``H(A|B)`` is its supremum.  Values are in nats.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .linalg import (
    SIGMA,
    TOL,
    dagger,
    eta,
    herm_to_vec,
    matrix_to_json,
    spectral_apply,
    spectral_eta_batch,
)
from .subalgebra import Subalgebra

log = logging.getLogger(__name__)

THREADS_ENV = "QUASIORTH_THREADS"


class InvalidDecomposition(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConvexDecomposition:
    """Weights ``w_i > 0`` and densities ``rho_i`` with ``sum_i w_i rho_i = I``."""

    weights: np.ndarray
    rhos: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        r = np.asarray(self.rhos, dtype=complex)
        if r.ndim != 3 or r.shape[0] != w.shape[0] or r.shape[1] != r.shape[2]:
            raise InvalidDecomposition(f"weights {w.shape} and densities {r.shape} do not match")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "rhos", r)

    @classmethod
    def from_terms(cls, terms: Sequence[tuple[float, np.ndarray]]) -> "ConvexDecomposition":
        return cls(np.array([w for w, _ in terms]), np.array([r for _, r in terms]))

    @classmethod
    def from_effects(cls, effects: np.ndarray, floor: float = 1e-13) -> "ConvexDecomposition":
        """Decomposition from positive operators ``M_i`` summing to ``I``.

        ``w_i = tau(M_i)`` and ``rho_i = M_i / w_i``; terms with ``w_i <= floor``
        are dropped.
        """
        n = effects.shape[-1]
        w = np.trace(effects, axis1=1, axis2=2).real / n
        keep = w > floor
        return cls(w[keep], effects[keep] / w[keep, None, None])

    @property
    def dim(self) -> int:
        return int(self.rhos.shape[-1])

    def __len__(self) -> int:
        return int(self.weights.shape[0])

    def problems(self, tol: float = TOL) -> list[str]:
        """Violated invariants, empty when the decomposition is valid."""
        n = self.dim
        out = []
        if len(self) == 0:
            return ["decomposition has no terms"]
        if np.any(self.weights <= 0):
            out.append("weights must be positive")
        if np.max(np.abs(self.rhos - dagger(self.rhos))) > tol:
            out.append("densities must be Hermitian")
        else:
            w = np.linalg.eigvalsh(0.5 * (self.rhos + dagger(self.rhos)))
            if w.min() < -tol:
                out.append(f"densities must be positive semidefinite (eigenvalue {w.min():.3g})")
        tr = np.trace(self.rhos, axis1=1, axis2=2) / n
        if np.max(np.abs(tr - 1)) > tol:
            out.append("densities must have normalized trace 1")
        total = np.einsum("k,kij->ij", self.weights, self.rhos)
        if np.max(np.abs(total - np.eye(n))) > tol:
            out.append("weighted sum of densities must equal the identity")
        return out

    def validate(self, tol: float = TOL) -> "ConvexDecomposition":
        bad = self.problems(tol)
        if bad:
            raise InvalidDecomposition("; ".join(bad))
        return self

    def to_json(self) -> list[dict]:
        return [{"weight": float(w), "rho": matrix_to_json(r)} for w, r in zip(self.weights, self.rhos)]


def _check_dims(a: Subalgebra, b: Subalgebra, n: int | None = None) -> None:
    if a.ambient_dim != b.ambient_dim or (n is not None and n != a.ambient_dim):
        raise ValueError("dimension mismatch between algebras and decomposition")


def term_gains(a: Subalgebra, b: Subalgebra, rhos: np.ndarray) -> np.ndarray:
    """``tau(eta(E_B rho)) - tau(eta(E_A rho))`` for each density."""
    return spectral_eta_batch(b.expect_stack(rhos)) - spectral_eta_batch(a.expect_stack(rhos))


def evaluate(a: Subalgebra, b: Subalgebra, dec: ConvexDecomposition) -> float:
    """The entropy functional of ``dec`` for the pair ``(A, B)``."""
    _check_dims(a, b, dec.dim)
    dec.validate()
    return float(np.dot(dec.weights, term_gains(a, b, dec.rhos)))


def prune(dec: ConvexDecomposition, a: Subalgebra, b: Subalgebra, tol: float = TOL) -> ConvexDecomposition:
    """Remove real-linear dependences between densities without lowering the value.

    Along a dependence ``sum_i c_i rho_i = 0`` the weights ``w_i + t c_i`` keep
    the sum equal to ``I`` and the value is affine in ``t``; moving to the
    better end of the feasible interval zeroes at least one weight.
    """
    _check_dims(a, b, dec.dim)
    dec.validate(tol)
    weights = dec.weights.copy()
    rhos = dec.rhos.copy()
    gains = term_gains(a, b, rhos)
    while len(weights) > 1:
        vecs = herm_to_vec(0.5 * (rhos + dagger(rhos)))
        _, s, vt = np.linalg.svd(vecs.T, full_matrices=True)
        rank = int(np.sum(s > 1e-10 * max(1.0, float(s[0]))))
        if rank == len(weights):
            break
        c = vt[-1]
        pos, neg = c > 1e-14, c < -1e-14
        # c sums to zero (traces), so both sides are bounded
        hi = np.min(-weights[neg] / c[neg]) if np.any(neg) else np.inf
        lo = np.max(-weights[pos] / c[pos]) if np.any(pos) else -np.inf
        slope = float(np.dot(c, gains))
        t = hi if slope >= 0 else lo
        if not np.isfinite(t):
            raise RuntimeError("unbounded dependence direction; decomposition is degenerate")
        weights = weights + t * c
        keep = weights > 1e-13
        weights, rhos, gains = weights[keep], rhos[keep], gains[keep]
    return ConvexDecomposition(weights, rhos)


def upper_bound(a: Subalgebra) -> float:
    """``-log d`` for a homogeneous algebra whose minimal projections have trace ``d``."""
    d = a.homogeneity
    if d is None:
        raise ValueError(
            f"algebra is not homogeneous: minimal projection traces {sorted(set(np.round(a.minimal_projection_traces, 9)))}"
        )
    return -math.log(d)


# -- maximization ------------------------------------------------------------------------


def minimal_projection_seed(a: Subalgebra) -> ConvexDecomposition:
    """The decomposition ``I = sum_i tau(p_i) (p_i / tau(p_i))`` over minimal projections of ``A``."""
    family = np.array(a._minimal_family)
    n = a.ambient_dim
    d = np.trace(family, axis1=1, axis2=2).real / n
    return ConvexDecomposition(d, family / d[:, None, None])


def trivial_decomposition(n: int) -> ConvexDecomposition:
    return ConvexDecomposition(np.ones(1), np.eye(n, dtype=complex)[None])


def _effects_value(a: Subalgebra, b: Subalgebra, effects: np.ndarray) -> float:
    # sum_i w_i g(M_i / w_i) = sum_i g(M_i): the log w_i terms cancel between A and B
    return float(np.sum(term_gains(a, b, effects)))


def _log_clamped(w: np.ndarray) -> np.ndarray:
    return np.log(np.clip(w, 1e-12, None))


def _retract(effects: np.ndarray) -> np.ndarray | None:
    """Clip to PSD and renormalize so the effects sum to ``I``."""
    w, v = np.linalg.eigh(0.5 * (effects + dagger(effects)))
    w = np.clip(w, 0.0, None)
    clipped = (v * w[..., None, :]) @ dagger(v)
    total = clipped.sum(axis=0)
    tw, tv = np.linalg.eigh(total)
    if tw[0] <= 1e-12:
        return None
    root = (tv / np.sqrt(tw)) @ dagger(tv)
    return root @ clipped @ root


def _random_effects(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((m, n, n)) + 1j * rng.standard_normal((m, n, n))
    return _retract(dagger(g) @ g)


@dataclass
class _RunResult:
    value: float
    decomposition: ConvexDecomposition
    iterations: int


def _ascend(a: Subalgebra, b: Subalgebra, effects: np.ndarray, max_iters: int, rtol: float) -> tuple[np.ndarray, float, int]:
    """Projected gradient ascent over effects ``M_i >= 0`` with ``sum M_i = I``."""
    n = a.ambient_dim
    value = _effects_value(a, b, effects)
    step = 1.0
    it = 0
    for it in range(1, max_iters + 1):
        ea, eb = a.expect_stack(effects), b.expect_stack(effects)
        grad = (spectral_apply(ea, _log_clamped) - spectral_apply(eb, _log_clamped)) / n
        grad = grad - grad.mean(axis=0)
        gnorm = float(np.sqrt(np.sum(np.abs(grad) ** 2)))
        if gnorm < 1e-14:
            break
        direction = grad / gnorm
        improved = False
        while step > 1e-12:
            cand = _retract(effects + step * direction)
            if cand is not None:
                cand_value = _effects_value(a, b, cand)
                if cand_value > value:
                    improved = True
                    break
            step *= 0.5
        if not improved:
            break
        gain = cand_value - value
        effects, value = cand, cand_value
        step = min(step * 2.0, 4.0)
        if gain < rtol * max(1.0, abs(value)):
            break
    return effects, value, it


def _run_restart(a: Subalgebra, b: Subalgebra, seed: int, index: int, m: int, max_iters: int, rtol: float) -> _RunResult:
    rng = np.random.default_rng([seed, index])
    n = a.ambient_dim
    effects = None
    while effects is None:
        effects = _random_effects(n, m, rng)
    effects, _, iters = _ascend(a, b, effects, max_iters, rtol)
    dec = prune(ConvexDecomposition.from_effects(effects), a, b)
    return _RunResult(float(np.dot(dec.weights, term_gains(a, b, dec.rhos))), dec, iters)


@dataclass(frozen=True, eq=False)
class EntropyEstimate:
    """Best value of the entropy functional found, with its maximizer.

    ``value`` is a certified lower bound on ``H(A|B)``: it is the exact value
    of ``decomposition``.
    """

    value: float
    decomposition: ConvexDecomposition
    bound: float | None
    gap: float | None
    restarts_used: int
    iterations: int
    seed: int
    source: str
    possible_inclusion: bool
    inclusion: bool

    def to_json(self) -> dict:
        return {
            "value_nats": self.value,
            "value_bits": self.value / math.log(2),
            "bound_nats": self.bound,
            "gap": self.gap,
            "seed": self.seed,
            "restarts_used": self.restarts_used,
            "iterations": self.iterations,
            "source": self.source,
            "possible_inclusion": self.possible_inclusion,
            "inclusion": self.inclusion,
            "decomposition": self.decomposition.to_json(),
        }


def _worker_count(requested: int | None) -> int:
    if requested is not None:
        return max(1, int(requested))
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def estimate(
    a: Subalgebra,
    b: Subalgebra,
    restarts: int = 4,
    max_iters: int = 500,
    seed: int = 0,
    m: int | None = None,
    rtol: float = 1e-10,
    workers: int | None = None,
) -> EntropyEstimate:
    """Maximize the entropy functional over decompositions of the identity.

    Candidates are the minimal-projection decomposition of ``A``, the trivial
    decomposition, and ``restarts`` random decompositions with ``m`` terms
    (default ``n**2``) refined by projected ascent and pruned.  The best value
    wins; ties go to the earliest candidate, so the result does not depend on
    the order in which parallel restarts finish.
    """
    _check_dims(a, b)
    n = a.ambient_dim
    m = n * n if m is None else int(m)
    if m < 1:
        raise ValueError("decomposition size m must be at least 1")

    candidates: list[tuple[str, ConvexDecomposition, int]] = []
    seed_dec = minimal_projection_seed(a)
    candidates.append(("minimal-projections", seed_dec, 0))
    candidates.append(("trivial", trivial_decomposition(n), 0))

    run = lambda k: _run_restart(a, b, seed, k, m, max_iters, rtol)  # noqa: E731
    nworkers = min(_worker_count(workers), max(restarts, 1))
    if nworkers > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            results = list(pool.map(run, range(restarts)))
    else:
        results = [run(k) for k in range(restarts)]
    for k, res in enumerate(results):
        candidates.append((f"restart-{k}", res.decomposition, res.iterations))

    best = None
    for source, dec, _ in candidates:
        value = evaluate(a, b, dec)
        if best is None or value > best[0] + TOL:
            best = (value, source, dec)
    value, source, dec = best
    log.debug("entropy estimate %.12g from %s", value, source)

    bound = gap = None
    if a.homogeneity is not None:
        bound = upper_bound(a)
        gap = bound - value
    return EntropyEstimate(
        value=value,
        decomposition=dec,
        bound=bound,
        gap=gap,
        restarts_used=restarts,
        iterations=sum(r.iterations for r in results),
        seed=seed,
        source=source,
        possible_inclusion=value < 1e-6,
        inclusion=a.issubset(b, tol=1e-8),
    )


# -- conjectured closed form for MASAs of M_2 ---------------------------------------------


def _bloch_projection(angle: float) -> np.ndarray:
    return 0.5 * (SIGMA[0] + math.sin(angle) * SIGMA[1] + math.cos(angle) * SIGMA[3])


def _eta_scalar(x: float) -> float:
    return float(eta(np.array([x]))[0])


@dataclass(frozen=True)
class AppendixProbe:
    """Test of the conjectured formula ``H(A|B) = (1/n) sum eta(Tr p_i q_j)`` in ``M_2``.

    ``C`` is the conjectured value for ``A`` = diagonal algebra and ``B``
    generated by ``sin(beta) s1 + cos(beta) s3``.  ``f(t)`` is the value of the
    two-term decomposition built from the projection ``r(t)``; ``f(0) = C``
    and any ``t`` with ``f(t) > C`` refutes the formula.
    """

    beta: float
    C: float
    f: Callable[[float], float] = field(repr=False, compare=False)
    f0: float
    f_prime_0: float
    refuted: bool
    witness_t: float | None
    margin: float | None

    def to_json(self) -> dict:
        return {
            "beta": self.beta,
            "C": self.C,
            "f0": self.f0,
            "f_prime_0": self.f_prime_0,
            "refuted": self.refuted,
            "witness_t": self.witness_t,
            "margin": self.margin,
        }


def appendix_probe(beta: float, step: float = 1e-4, deriv_tol: float = 1e-6, grid: int = 256) -> AppendixProbe:
    """Evaluate the conjectured value ``C`` and search for a decomposition beating it."""
    p = _bloch_projection(0.0)
    q = _bloch_projection(beta)
    c = _eta_scalar((1 + math.cos(beta)) / 2) + _eta_scalar((1 - math.cos(beta)) / 2)

    def f(t: float) -> float:
        r = _bloch_projection(t)
        av = min(max(float(np.trace(r @ p).real), 0.0), 1.0)
        bv = min(max(float(np.trace(r @ q).real), 0.0), 1.0)
        return _eta_scalar(bv) + _eta_scalar(1 - bv) - _eta_scalar(av) - _eta_scalar(1 - av)

    f0 = f(0.0)
    fp = (f(step) - f(-step)) / (2 * step)
    witness = margin = None
    refuted = False
    if abs(fp) > deriv_tol:
        direction = 1.0 if fp > 0 else -1.0
        ts = direction * np.linspace(0.0, math.pi, grid + 1)
        vals = np.array([f(t) for t in ts])
        k = int(np.argmax(vals))
        k = min(max(k, 1), grid - 1)
        bracket = tuple(sorted((ts[k - 1], ts[k], ts[k + 1])))
        try:
            res = minimize_scalar(lambda t: -f(t), bracket=bracket, method="golden", tol=1e-10)
            t_star = float(res.x)
        except ValueError:
            t_star = float(ts[k])
        if f(t_star) < vals[k]:
            t_star = float(ts[k])
        witness = t_star
        margin = f(t_star) - c
        refuted = margin > 0
    return AppendixProbe(beta, c, f, f0, fp, refuted, witness, margin)


def appendix_decomposition(t: float) -> ConvexDecomposition:
    """``I = 1/2 (2 r(t)) + 1/2 (2 (I - r(t)))``."""
    r = _bloch_projection(t)
    return ConvexDecomposition(np.array([0.5, 0.5]), np.array([2 * r, 2 * (np.eye(2) - r)]))


def appendix_algebras(beta: float) -> tuple[Subalgebra, Subalgebra]:
    """Diagonal MASA of ``M_2`` and the MASA generated by ``sin(beta) s1 + cos(beta) s3``."""
    gen = math.sin(beta) * SIGMA[1] + math.cos(beta) * SIGMA[3]
    return Subalgebra.from_generators(2, [SIGMA[3]]), Subalgebra.from_generators(2, [gen])
