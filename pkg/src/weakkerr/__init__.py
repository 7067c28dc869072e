"""Simulator for weak cross-Kerr GHZ entanglers and GHZ/Bell analyzers."""

from .hybrid_state import (
    Branch,
    GhzLabel,
    HybridState,
    from_amplitudes,
    ghz_state,
    normalize,
    product_plus_state,
    signal_fidelity,
    total_probability,
)
from .homodyne import HomodyneOutcome, PeakGeometry, Quadrature, peak_geometry
from .protocols import (
    CircuitSpec,
    bell_analyze,
    bell_state,
    bin_patterns,
    canonical_ghz,
    entangler_circuit,
    feed_forward,
    ghz_analyze,
    run_entangler,
)

__version__ = "0.1.0"
