"""X-quadrature homodyne measurement of the probe beam.

A branch with kick ``k`` carries the coherent state ``|alpha e^{ik theta}>``,
whose X-quadrature amplitude is

    f(x, alpha cos k theta) * exp(i phi_k(x)),
    f(x, beta) = (2 pi)^(-1/4) exp(-(x - 2 beta)^2 / 4),
    phi_k(x)   = alpha sin(k theta) (x - 2 alpha cos k theta)  (mod 2 pi).

The peaks sit at ``c_k = 2 alpha cos(k theta)``.  With ``alpha ~ 1e6`` the
values of x are ~4e6 while the physics lives in O(1) offsets from a peak, and
``phi_k`` multiplies that offset by ``alpha sin(k theta) ~ 4e3``.  Measured
values are therefore carried as :class:`Quadrature` (peak index plus offset)
and every difference of peak positions is evaluated with product-to-sum
identities instead of subtracting two large numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .hybrid_state import HybridState

TWO_PI = 2 * math.pi
_F_NORM = (2 * math.pi) ** -0.25


class GeometryError(ValueError):
    """Peak ordering or parameter validity violated."""


class ProjectionError(ArithmeticError):
    """Projection produced a state with no representable norm."""


def center_offset(alpha: float, theta: float, j: int, k: int) -> float:
    """``c_j - c_k = 2 alpha (cos j theta - cos k theta)`` without cancellation."""
    if j == k:
        return 0.0
    return -4 * alpha * math.sin((j + k) * theta / 2) * math.sin((j - k) * theta / 2)


@dataclass(frozen=True)
class Quadrature:
    """A quadrature value stored as ``c_center + delta``."""

    center: int
    delta: float
    alpha: float
    theta: float

    def offset(self, k: int) -> float:
        """``x - c_|k|``, exact to the precision of ``delta``."""
        return self.delta + center_offset(self.alpha, self.theta, self.center, abs(k))

    def __float__(self):
        return 2 * self.alpha * math.cos(self.center * self.theta) + self.delta

    @classmethod
    def from_value(cls, x: float, alpha: float, theta: float, max_k: int) -> "Quadrature":
        """Reference a raw value to its nearest peak (precision limited by ``x``)."""
        centers = [2 * alpha * math.cos(k * theta) for k in range(max_k + 1)]
        k = min(range(max_k + 1), key=lambda i: abs(x - centers[i]))
        return cls(k, x - centers[k], alpha, theta)


XValue = Union[float, np.ndarray, Quadrature]


def _offset(x: XValue, alpha: float, theta: float, k: int):
    if isinstance(x, Quadrature):
        if (x.alpha, x.theta) != (alpha, theta):
            raise ValueError("quadrature value was recorded with a different probe")
        return x.offset(k)
    return np.asarray(x, dtype=float) - 2 * alpha * math.cos(abs(k) * theta)


@dataclass(frozen=True)
class PeakGeometry:
    alpha: float
    theta: float
    max_k: int
    centers: tuple[float, ...]
    midpoints: tuple[float, ...]
    distances: tuple[float, ...]
    # midpoint_offsets[c][j] = x_m(j) - c_c, used to classify peak-relative values
    midpoint_offsets: tuple[tuple[float, ...], ...] = field(repr=False)

    @property
    def epsilons(self) -> tuple[float, ...]:
        return tuple(bin_error(self, k) for k in range(self.max_k))

    @property
    def epsilon_max(self) -> float:
        return max(self.epsilons)

    def center_offset(self, j: int, k: int) -> float:
        return center_offset(self.alpha, self.theta, j, k)

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "theta": self.theta,
            "alpha_theta2": self.alpha * self.theta**2,
            "max_k": self.max_k,
            "centers": list(self.centers),
            "midpoints": list(self.midpoints),
            # boundary k separates bins k and k+1; outer_index = max_k - k
            # counts from the outermost pair inward
            "boundaries": [
                {
                    "between_bins": [k, k + 1],
                    "outer_index": self.max_k - k,
                    "midpoint": self.midpoints[k],
                    "distance": self.distances[k],
                    "epsilon": bin_error(self, k),
                }
                for k in range(self.max_k)
            ],
            "epsilon_max": self.epsilon_max,
        }


def peak_geometry(alpha: float, theta: float, max_k: int) -> PeakGeometry:
    """Peak centers, midpoints and separations for kicks ``0..max_k``."""
    if not (alpha > 0 and math.isfinite(alpha)):
        raise GeometryError(f"alpha must be positive and finite, got {alpha}")
    if not (theta > 0 and math.isfinite(theta)):
        raise GeometryError(f"theta must be positive and finite, got {theta}")
    if max_k < 1:
        raise GeometryError(f"max_k must be >= 1, got {max_k}")
    if not max_k * theta < math.pi / 2:
        raise GeometryError(
            f"peak order violated: max_k*theta = {max_k * theta:.6g} must be < pi/2 "
            f"so that |k| theta < pi/2 for every branch"
        )
    ks = range(max_k + 1)
    centers = tuple(2 * alpha * math.cos(k * theta) for k in ks)
    half = theta / 2
    midpoints = tuple(2 * alpha * math.cos((2 * k + 1) * half) * math.cos(half) for k in range(max_k))
    distances = tuple(4 * alpha * math.sin((2 * k + 1) * half) * math.sin(half) for k in range(max_k))
    offsets = tuple(
        tuple(
            0.5 * (center_offset(alpha, theta, j, c) + center_offset(alpha, theta, j + 1, c))
            for j in range(max_k)
        )
        for c in ks
    )
    for k in range(max_k):
        if not (distances[k] > 0 and offsets[k][k] < 0 < offsets[k + 1][k]):
            raise GeometryError(f"midpoint {k} does not lie strictly between peaks {k + 1} and {k}")
    return PeakGeometry(alpha, theta, max_k, centers, midpoints, distances, offsets)


def gaussian_amp(x, beta):
    """``f(x, beta) = (2 pi)^(-1/4) exp(-(x - 2 beta)^2 / 4)``."""
    d = np.asarray(x, dtype=float) - 2 * np.asarray(beta, dtype=float)
    out = _F_NORM * np.exp(-(d**2) / 4)
    return float(out) if out.ndim == 0 else out


def _gauss(offset):
    return _F_NORM * np.exp(-np.square(offset) / 4)


def _phase_from_offset(alpha: float, theta: float, k: int, offset):
    raw = math.copysign(alpha * math.sin(abs(k) * theta), k) * offset if k else 0.0 * offset
    # symmetric reduction into [-pi, pi]; negating k negates the result bit for bit
    return raw - TWO_PI * np.round(raw / TWO_PI)


def branch_phase(x: XValue, alpha: float, theta: float, k: int):
    """``phi_k(x) = alpha sin(k theta) (x - 2 alpha cos k theta)`` reduced to [-pi, pi]."""
    out = _phase_from_offset(alpha, theta, k, _offset(x, alpha, theta, k))
    return float(out) if np.ndim(out) == 0 else out


def _require_probe(state: HybridState) -> None:
    if not state.probe_present:
        raise ValueError("homodyne measurement needs the probe beam attached")


def _branch_amplitudes(state: HybridState, x: XValue):
    """Per-branch ``c_j f(x, alpha cos k_j theta) e^{i phi_kj(x)}``."""
    out = []
    for b in state.branches:
        off = _offset(x, state.alpha, state.theta, b.k)
        amp = b.amplitude * _gauss(off) * np.exp(1j * _phase_from_offset(state.alpha, state.theta, b.k, off))
        out.append((b.pattern, b.k, amp))
    return out


def outcome_density(state: HybridState, x: XValue):
    """Exact probability density of the X outcome, including same-pattern interference."""
    _require_probe(state)
    per_pattern: dict[str, object] = {}
    for pattern, _, amp in _branch_amplitudes(state, x):
        per_pattern[pattern] = per_pattern.get(pattern, 0) + amp
    dens = sum(np.abs(a) ** 2 for a in per_pattern.values())
    return float(dens) if np.ndim(dens) == 0 else dens


def mixture_density(state: HybridState, x: XValue):
    """Density of the no-interference mixture: sum of ``|c_j|^2 f^2``."""
    _require_probe(state)
    dens = sum(
        abs(b.amplitude) ** 2 * _gauss(_offset(x, state.alpha, state.theta, b.k)) ** 2
        for b in state.branches
    )
    return float(dens) if np.ndim(dens) == 0 else dens


def sample_x(state: HybridState, rng: np.random.Generator) -> Quadrature:
    """Draw an outcome from the no-interference mixture.

    A branch is picked with probability ``|c_j|^2`` and a unit normal offset is
    added to its peak.  The result keeps the picked peak as its reference, so
    ``result.center`` is the bin the probe truly came from.
    """
    _require_probe(state)
    weights = np.array([abs(b.amplitude) ** 2 for b in state.branches])
    cumulative = np.cumsum(weights)
    idx = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    branch = state.branches[min(idx, len(weights) - 1)]
    return Quadrature(abs(branch.k), float(rng.standard_normal()), state.alpha, state.theta)


def sample_x_batch(state: HybridState, rng: np.random.Generator, size: int):
    """Vectorised :func:`sample_x`; returns ``(centers, deltas)`` arrays."""
    _require_probe(state)
    weights = np.array([abs(b.amplitude) ** 2 for b in state.branches])
    kicks = np.array([abs(b.k) for b in state.branches])
    idx = rng.choice(len(weights), size=size, p=weights / weights.sum())
    return kicks[idx], rng.standard_normal(size)


def project(state: HybridState, x: XValue, keep_bins=None) -> HybridState:
    """Condition the signal on the homodyne outcome and remove the probe.

    Each branch amplitude is multiplied by its X-quadrature wavefunction at
    ``x``; branches of equal pattern then interfere.  With ``keep_bins`` only
    branches whose ``|k|`` is listed survive, which is the idealised
    zero-overlap picture where each outcome interval maps to one pattern pair.
    """
    _require_probe(state)
    if isinstance(x, np.ndarray) and x.ndim:
        raise ValueError("project takes a single outcome")
    terms = _branch_amplitudes(state, x)
    if keep_bins is not None:
        keep = {abs(int(b)) for b in keep_bins}
        terms = [t for t in terms if abs(t[1]) in keep]
    terms = [(p, k, complex(a)) for p, k, a in terms if a != 0]
    if not terms:
        raise ProjectionError(f"projection at x = {float(x):.17g} underflowed on every branch")
    projected = HybridState.assemble(state.n, state.alpha, state.theta, False, terms)
    norm = math.fsum(abs(b.amplitude) ** 2 for b in projected.branches)
    if not (norm > 0 and math.isfinite(norm)):
        raise ProjectionError(f"projection at x = {float(x):.17g} has norm {norm}")
    return projected.scaled(1 / math.sqrt(norm))


def classify(x: XValue, geometry: PeakGeometry) -> int:
    """Bin index of an outcome: the number of midpoints lying strictly above x.

    A value exactly on a midpoint is assigned to the smaller adjacent bin.
    """
    if isinstance(x, Quadrature):
        if x.center > geometry.max_k:
            raise ValueError(f"outcome referenced to peak {x.center} beyond max_k={geometry.max_k}")
        return sum(1 for m in geometry.midpoint_offsets[x.center] if m > x.delta)
    x = float(x)
    return sum(1 for m in geometry.midpoints if m > x)


def classify_batch(geometry: PeakGeometry, centers: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    offsets = np.asarray(geometry.midpoint_offsets)
    return np.sum(offsets[centers] > deltas[:, None], axis=1)


def overlap_error(distance: float) -> float:
    """``erfc(d / 2 sqrt 2) / 2``: tail mass of a unit Gaussian beyond ``d/2``."""
    return math.erfc(distance / (2 * math.sqrt(2))) / 2


def bin_error(geometry: PeakGeometry, k: int) -> float:
    """Overlap error across the boundary between bins ``k`` and ``k+1``."""
    if not 0 <= k < geometry.max_k:
        raise IndexError(f"boundary {k} out of range 0..{geometry.max_k - 1}")
    return overlap_error(geometry.distances[k])


def misclassification_probability(state: HybridState, geometry: PeakGeometry) -> float:
    """Chance that the mixture sample lands outside its own bin."""
    eps = geometry.epsilons
    total = 0.0
    for b in state.branches:
        k = abs(b.k)
        if k > geometry.max_k:
            raise ValueError(f"branch kick {b.k} beyond max_k={geometry.max_k}")
        w = abs(b.amplitude) ** 2
        if k >= 1:
            total += w * eps[k - 1]
        if k < geometry.max_k:
            total += w * eps[k]
    return total


@dataclass(frozen=True)
class HomodyneOutcome:
    x: Quadrature
    bin: int
    delta: float  # x - c_bin
    phases: dict = field(compare=False)  # |k| -> phi_k(x)

    @property
    def true_bin(self) -> int:
        return self.x.center

    @property
    def value(self) -> float:
        return float(self.x)


def make_outcome(x: Quadrature, geometry: PeakGeometry, bin: int | None = None) -> HomodyneOutcome:
    """Bundle a sampled value with its bin and per-bin phases.

    ``bin`` overrides the classifier (used by the forced-correct oracle mode).
    """
    k = classify(x, geometry) if bin is None else bin
    phases = {j: branch_phase(x, geometry.alpha, geometry.theta, j) for j in range(geometry.max_k + 1)}
    return HomodyneOutcome(x, k, x.offset(k), phases)
