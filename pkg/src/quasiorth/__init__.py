"""Complementary matrix subalgebras, conditional entropy and two-qubit structure."""
from .constructions import (
    bell_basis,
    bell_masa,
    block_criterion,
    car_model,
    quantum_fourier,
    weyl_subalgebra,
    weyl_system,
)
from .entropy import (
    ConvexDecomposition,
    EntropyEstimate,
    appendix_probe,
    estimate,
    evaluate,
    prune,
    upper_bound,
)
from .four_level import (
    Triplet,
    bell_factorize,
    classify_triplet,
    complementary_family_search,
    enumerate_pauli_subalgebras,
    commutant_dichotomy_check,
)
from .linalg import TOL, PauliWord, hs_inner, normalized_trace, spectral_eta, tensor
from .subalgebra import (
    ComplementarityReport,
    Subalgebra,
    commutant,
    complementarity_report,
    conditional_expectation,
    intersect,
    minimal_projections,
    transition_is_hadamard,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
