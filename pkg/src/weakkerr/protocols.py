"""Entangler, GHZ analyzer and two-step nondestructive Bell analyzer.

The n-photon entangler couples photon 1 (H) with weight 1, photons
2..n-1 (H) with weights 2, 4, ..., 2**(n-2), and photon n (V) with weight
2**(n-1)-1, followed by the probe phase gate -(2**(n-1)-1).  The induced
kick of a pattern s is

    k(s) = sum_{i<n} 2**(i-1) [s_i = H] + (2**(n-1)-1) [s_n = V] - (2**(n-1)-1)

so H...H and V...V get no kick, complementary patterns get opposite kicks,
and the magnitudes 0..2**(n-1)-1 each label exactly one complementary pair.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import elements as el
from .elements import ElementSpec
from .homodyne import (
    HomodyneOutcome,
    PeakGeometry,
    make_outcome,
    peak_geometry,
    project,
    sample_x,
)
from .hybrid_state import GhzLabel, HybridState, all_patterns, complement, from_amplitudes

DEFAULT_CORRECTION_PHOTON = 1


@dataclass(frozen=True)
class CircuitSpec:
    n: int
    kerr_list: tuple[tuple[int, str, int], ...]  # (photon, coupled_pol, multiplier)
    gate: int

    @property
    def max_k(self) -> int:
        return 2 ** (self.n - 1) - 1

    def elements(self) -> list[ElementSpec]:
        out = [ElementSpec("kerr", j, pol, multiplier=m) for j, pol, m in self.kerr_list]
        out.append(ElementSpec("probe_gate", multiplier=self.gate))
        return out

    def dump(self) -> str:
        return "\n".join(str(e) for e in self.elements())

    def kick(self, pattern: str) -> int:
        return sum(m for j, pol, m in self.kerr_list if pattern[j - 1] == pol) + self.gate

    def kick_table(self) -> dict[str, int]:
        return {p: self.kick(p) for p in all_patterns(self.n)}

    def apply(self, state: HybridState) -> HybridState:
        if state.n != self.n:
            raise ValueError(f"circuit is for {self.n} photons, state has {state.n}")
        return el.apply_elements(state, self.elements())


@functools.lru_cache(maxsize=None)
def entangler_circuit(n: int) -> CircuitSpec:
    if n < 2:
        raise ValueError(f"the entangler needs n >= 2 photons, got {n}")
    top = 2 ** (n - 1) - 1
    kerr = [(1, "H", 1)]
    kerr += [(i, "H", 2 ** (i - 1)) for i in range(2, n)]
    kerr.append((n, "V", top))
    return CircuitSpec(n, tuple(kerr), -top)


@functools.lru_cache(maxsize=None)
def _pairs(n: int) -> dict[int, tuple[str, str]]:
    table = entangler_circuit(n).kick_table()
    pairs = {}
    for p, k in table.items():
        if k > 0:
            pairs[k] = (p, complement(p))
    pairs[0] = ("H" * n, "V" * n)
    return pairs


def bin_patterns(n: int, k: int) -> tuple[str, str]:
    """Pattern with kick +k (H...H for k = 0) and its complement."""
    if n < 2:
        raise ValueError(f"bins are defined for n >= 2, got {n}")
    if not 0 <= k <= 2 ** (n - 1) - 1:
        raise ValueError(f"bin {k} out of range 0..{2 ** (n - 1) - 1}")
    return _pairs(n)[k]


def entangler_geometry(n: int, alpha: float, theta: float) -> PeakGeometry:
    return peak_geometry(alpha, theta, 2 ** (n - 1) - 1)


def feed_forward(
    n: int,
    k: int,
    x,
    geometry: PeakGeometry,
    correction_photon: int = DEFAULT_CORRECTION_PHOTON,
    phase_only: bool = False,
) -> list[ElementSpec]:
    """Gates steering the bin-k output to ``(|H..H> + |V..V>)/sqrt(2)``.

    The conditional phase ``-2 phi_k(x)`` on ``correction_photon`` cancels the
    opposite measurement phases of the pair; NOT gates then map the
    representative pattern onto H...H.  ``phase_only`` omits the NOT gates.
    """
    from .homodyne import branch_phase

    s, _ = bin_patterns(n, k)
    gates = []
    if k != 0:
        phi = branch_phase(x, geometry.alpha, geometry.theta, k)
        gates.append(ElementSpec("cond_phase", correction_photon, s[correction_photon - 1], angle=-2 * phi))
    if not phase_only:
        gates += [ElementSpec("not", i + 1) for i, c in enumerate(s) if c == "V"]
    return gates


class Measurement(NamedTuple):
    outcome: HomodyneOutcome
    state: HybridState  # signal state after projection, probe removed


def measure_probe(
    state: HybridState,
    geometry: PeakGeometry,
    rng: np.random.Generator,
    force_correct_bins: bool = False,
    trace: list | None = None,
) -> Measurement:
    """Sample the X quadrature, classify it and project the signal.

    With ``force_correct_bins`` the oracle mode is used: the bin is taken to be
    the peak the sample came from and the projection keeps only that bin's
    pattern pair (no overlap between neighbouring curves).
    """
    x = sample_x(state, rng)
    if force_correct_bins:
        outcome = make_outcome(x, geometry, bin=x.center)
        projected = project(state, x, keep_bins=[outcome.bin])
    else:
        outcome = make_outcome(x, geometry)
        projected = project(state, x)
    if trace is not None:
        trace.append(
            {
                "op": "homodyne_x",
                "true_bin": outcome.true_bin,
                "bin": outcome.bin,
                "delta": outcome.delta,
                "x": outcome.value,
            }
        )
    return Measurement(outcome, projected)


def _run_elements(state: HybridState, elements, trace: list | None) -> HybridState:
    for e in elements:
        state = el.apply_element(state, e)
        if trace is not None:
            trace.append({"op": str(e)})
    return state


def canonical_ghz(n: int, alpha: float = 1.0, theta: float = 1.0) -> HybridState:
    """``(|H..H> + |V..V>)/sqrt(2)`` with the probe measured out."""
    r = 1 / math.sqrt(2)
    return from_amplitudes(n, {"H" * n: r, "V" * n: r}, alpha, theta).without_probe()


class EntanglerShot(NamedTuple):
    outcome: HomodyneOutcome
    state: HybridState


def run_entangler(
    n: int,
    alpha: float,
    theta: float,
    rng: np.random.Generator,
    *,
    input_state: HybridState | None = None,
    force_correct_bins: bool = False,
    correction_photon: int = DEFAULT_CORRECTION_PHOTON,
    trace: list | None = None,
) -> EntanglerShot:
    """One entangler shot: circuit, X measurement, projection, feed-forward.

    ``input_state`` defaults to the product of ``(|H>+|V>)/sqrt(2)``.  Any probe
    label it carries is replaced by a fresh ``|alpha>``.
    """
    from .hybrid_state import product_plus_state

    circuit = entangler_circuit(n)
    geometry = entangler_geometry(n, alpha, theta)
    if input_state is None:
        state = product_plus_state(n, alpha, theta)
    else:
        state = input_state.with_probe(alpha, theta)
    state = _run_elements(state, circuit.elements(), trace)
    return finish_entangler(state, geometry, rng, force_correct_bins, correction_photon, trace)


def finish_entangler(
    prepared: HybridState,
    geometry: PeakGeometry,
    rng: np.random.Generator,
    force_correct_bins: bool = False,
    correction_photon: int = DEFAULT_CORRECTION_PHOTON,
    trace: list | None = None,
) -> EntanglerShot:
    """Measurement and feed-forward half of :func:`run_entangler`.

    ``prepared`` is the state right after the Kerr couplings and phase gate;
    Monte Carlo loops reuse it across shots.
    """
    outcome, state = measure_probe(prepared, geometry, rng, force_correct_bins, trace)
    gates = feed_forward(prepared.n, outcome.bin, outcome.x, geometry, correction_photon)
    state = _run_elements(state, gates, trace)
    return EntanglerShot(outcome, state)


class GhzAnalysis(NamedTuple):
    label: GhzLabel
    outcome: HomodyneOutcome
    pattern: str


def ghz_analyze(
    state: HybridState,
    alpha: float,
    theta: float,
    rng: np.random.Generator,
    *,
    force_correct_bins: bool = False,
    correction_photon: int = DEFAULT_CORRECTION_PHOTON,
    trace: list | None = None,
) -> GhzAnalysis:
    """Identify which of the 2**n GHZ states ``state`` is.

    The homodyne bin gives the complementary pair.  After cancelling the
    measurement phases, a Hadamard on every photon maps the + member onto
    even-V patterns and the - member onto odd-V patterns.
    """
    n = state.n
    geometry = entangler_geometry(n, alpha, theta)
    prepared = _run_elements(state.with_probe(alpha, theta), entangler_circuit(n).elements(), trace)
    outcome, signal = measure_probe(prepared, geometry, rng, force_correct_bins, trace)
    gates = feed_forward(n, outcome.bin, outcome.x, geometry, correction_photon, phase_only=True)
    gates += [ElementSpec("hwp", j) for j in range(1, n + 1)]
    signal = _run_elements(signal, gates, trace)
    pattern = el.detect_all(signal, rng)
    if trace is not None:
        trace.append({"op": "detect", "pattern": pattern})
    sign = "+" if el.v_parity(pattern) == "even" else "-"
    return GhzAnalysis(GhzLabel(outcome.bin, sign), outcome, pattern)


# bit conventions: |0> = H, |1> = V
BELL_LABELS = ("Phi+", "Phi-", "Psi+", "Psi-")
_BELL_BY_BITS = {(0, 0): "Phi+", (0, 1): "Phi-", (1, 0): "Psi+", (1, 1): "Psi-"}


def bell_state(label: str, alpha: float = 1.0, theta: float = 1.0, probe: bool = False) -> HybridState:
    r = 1 / math.sqrt(2)
    amps = {
        "Phi+": {"HH": r, "VV": r},
        "Phi-": {"HH": r, "VV": -r},
        "Psi+": {"HV": r, "VH": r},
        "Psi-": {"HV": r, "VH": -r},
    }
    if label not in amps:
        raise ValueError(f"unknown Bell label {label!r}; expected one of {BELL_LABELS}")
    state = from_amplitudes(2, amps[label], alpha, theta)
    return state if probe else state.without_probe()


@dataclass(frozen=True)
class BellRecord:
    round1_bin: int
    round2_bin: int
    label: str
    intermediate_state: HybridState
    output_state: HybridState
    outcomes: tuple[HomodyneOutcome, HomodyneOutcome]


def bell_analyze(
    state: HybridState,
    alpha: float,
    theta: float,
    rng: np.random.Generator,
    *,
    force_correct_bins: bool = False,
    correction_photon: int = DEFAULT_CORRECTION_PHOTON,
    trace: list | None = None,
) -> BellRecord:
    """Two-step nondestructive Bell measurement.

    Each round runs the two-photon entangler and reads one bit (0 when the
    outcome falls in bin 0, i.e. above the midpoint), cancels the measurement
    phase and applies a Hadamard to both photons.  The second round's
    Hadamards restore the input state.
    """
    if state.n != 2:
        raise ValueError(f"Bell analysis needs a 2-photon state, got n={state.n}")
    circuit = entangler_circuit(2)
    geometry = entangler_geometry(2, alpha, theta)
    hwps = [ElementSpec("hwp", 1), ElementSpec("hwp", 2)]
    bits = []
    outcomes = []
    snapshots = []
    current = state
    for _ in range(2):
        prepared = _run_elements(current.with_probe(alpha, theta), circuit.elements(), trace)
        outcome, current = measure_probe(prepared, geometry, rng, force_correct_bins, trace)
        gates = feed_forward(2, outcome.bin, outcome.x, geometry, correction_photon, phase_only=True)
        current = _run_elements(current, gates + hwps, trace)
        bits.append(outcome.bin)
        outcomes.append(outcome)
        snapshots.append(current)
    return BellRecord(
        bits[0], bits[1], _BELL_BY_BITS[tuple(bits)], snapshots[0], snapshots[1], tuple(outcomes)
    )


_N3_NAMES = {0: "φ1", 1: "φ2", 2: "φ3", 3: "φ4"}


def label_names_n3(label: GhzLabel) -> str:
    if label.bin not in _N3_NAMES:
        raise ValueError(f"three-photon bins are 0..3, got {label.bin}")
    return f"{_N3_NAMES[label.bin]}{label.sign}"


def label_from_name_n3(name: str) -> GhzLabel:
    for b, stem in _N3_NAMES.items():
        if name[:-1] == stem and name[-1:] in ("+", "-"):
            return GhzLabel(b, name[-1])
    raise ValueError(f"unknown three-photon GHZ name {name!r}")
