"""Joint state of n polarization qubits and one coherent probe beam.

The state is kept as a finite sum of branches.  Each branch is a
polarization pattern (a string over ``"H"``/``"V"``, photon 1 first and most
significant), a complex amplitude and an integer kick ``k``: the probe part of
the branch is the coherent state ``|alpha * exp(i k theta)>``.  Because every
gate in the protocols moves the probe phase by an integer multiple of theta,
storing ``k`` instead of the complex coherent amplitude keeps the
representation exact even for ``alpha`` of order 1e6.

States are immutable; every operation returns a new state.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

_POLS = ("H", "V")


def check_pattern(pattern: str, n: int | None = None) -> str:
    if not pattern or any(c not in _POLS for c in pattern):
        raise ValueError(f"invalid polarization pattern {pattern!r}")
    if n is not None and len(pattern) != n:
        raise ValueError(f"pattern {pattern!r} has length {len(pattern)}, expected {n}")
    return pattern


def complement(pattern: str) -> str:
    """Swap H and V on every photon."""
    return pattern.translate(str.maketrans("HV", "VH"))


def all_patterns(n: int) -> list[str]:
    """All 2**n patterns in bit order (H=0, V=1, photon 1 most significant)."""
    return ["".join(p) for p in itertools.product(_POLS, repeat=n)]


def pattern_index(pattern: str) -> int:
    return int(pattern.translate(str.maketrans("HV", "01")), 2)


@dataclass(frozen=True)
class Branch:
    pattern: str
    amplitude: complex
    k: int = 0


@dataclass(frozen=True)
class GhzLabel:
    """Identifies one of the 2**n GHZ states: a complementary-pair bin and a sign."""

    bin: int
    sign: str  # "+" or "-"

    def __post_init__(self):
        if self.sign not in ("+", "-"):
            raise ValueError(f"sign must be '+' or '-', got {self.sign!r}")
        if self.bin < 0:
            raise ValueError(f"bin must be non-negative, got {self.bin}")

    def __str__(self):
        return f"{self.bin}{self.sign}"


def _check_probe(alpha: float, theta: float) -> None:
    if not alpha > 0 or not math.isfinite(alpha):
        raise ValueError(f"alpha must be positive and finite, got {alpha}")
    if not theta > 0 or not math.isfinite(theta):
        raise ValueError(f"theta must be positive and finite, got {theta}")


@dataclass(frozen=True)
class HybridState:
    """Branch-resolved state of ``n`` photons tensored with one coherent probe.

    Use :meth:`assemble` (or the module-level constructors) instead of the
    raw constructor: it merges duplicate ``(pattern, k)`` keys and sorts the
    branches so that evolution is deterministic.
    """

    n: int
    alpha: float
    theta: float
    probe_present: bool
    branches: tuple[Branch, ...]

    @classmethod
    def assemble(
        cls,
        n: int,
        alpha: float,
        theta: float,
        probe_present: bool,
        terms: Iterable[tuple[str, int, complex]],
        prune: float = 0.0,
    ) -> "HybridState":
        """Merge ``(pattern, k, amplitude)`` terms into a sorted state.

        Entries whose merged magnitude is ``<= prune * max magnitude`` are
        dropped (exact zeros are always dropped).  Without a probe all kicks
        are forced to zero.
        """
        acc: dict[tuple[str, int], complex] = {}
        for pattern, k, amp in terms:
            key = (pattern, int(k) if probe_present else 0)
            acc[key] = acc.get(key, 0j) + complex(amp)
        if not acc:
            raise ValueError("state has no branches")
        cutoff = prune * max(abs(a) for a in acc.values())
        branches = tuple(
            Branch(p, a, k)
            for (p, k), a in sorted(acc.items())
            if a != 0 and abs(a) > cutoff
        )
        if not branches:
            raise ValueError("state has zero norm")
        return cls(n, float(alpha), float(theta), bool(probe_present), branches)

    def _replace_terms(self, terms, probe_present=None, prune=0.0) -> "HybridState":
        present = self.probe_present if probe_present is None else probe_present
        return HybridState.assemble(self.n, self.alpha, self.theta, present, terms, prune)

    def terms(self):
        return [(b.pattern, b.k, b.amplitude) for b in self.branches]

    def amplitude_map(self) -> dict[tuple[str, int], complex]:
        return {(b.pattern, b.k): b.amplitude for b in self.branches}

    def kicks(self) -> set[int]:
        return {b.k for b in self.branches}

    def probe_amplitude(self, k: int) -> complex:
        """Coherent amplitude ``alpha * exp(i k theta)`` of a branch with kick k."""
        return self.alpha * cmath.exp(1j * k * self.theta)

    def with_probe(self, alpha: float | None = None, theta: float | None = None) -> "HybridState":
        """Attach a fresh probe (all kicks reset to 0)."""
        alpha = self.alpha if alpha is None else alpha
        theta = self.theta if theta is None else theta
        _check_probe(alpha, theta)
        terms = [(b.pattern, 0, b.amplitude) for b in self.branches]
        return HybridState.assemble(self.n, alpha, theta, True, terms)

    def without_probe(self) -> "HybridState":
        """Drop the probe label.  Only meaningful when all kicks coincide."""
        return self._replace_terms(self.terms(), probe_present=False)

    def scaled(self, factor: complex) -> "HybridState":
        return self._replace_terms([(p, k, factor * a) for p, k, a in self.terms()])

    def to_dense(self) -> np.ndarray:
        """Dense 2**n signal vector.  Requires the probe to be measured out."""
        if self.probe_present:
            raise ValueError("dense signal vector is undefined while the probe is attached")
        vec = np.zeros(2**self.n, dtype=complex)
        for b in self.branches:
            vec[pattern_index(b.pattern)] += b.amplitude
        return vec

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "alpha": self.alpha,
            "theta": self.theta,
            "probe_present": self.probe_present,
            "branches": [
                {"pattern": b.pattern, "re": b.amplitude.real, "im": b.amplitude.imag, "k": b.k}
                for b in self.branches
            ],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "HybridState":
        n = int(doc["n"])
        terms = [
            (check_pattern(b["pattern"], n), int(b.get("k", 0)), complex(b["re"], b["im"]))
            for b in doc["branches"]
        ]
        _check_probe(doc["alpha"], doc["theta"])
        return cls.assemble(n, doc["alpha"], doc["theta"], doc["probe_present"], terms)

    def __str__(self):
        parts = []
        for b in self.branches:
            probe = f"|a e^({b.k}i th)>" if self.probe_present else ""
            parts.append(f"({b.amplitude:.6g})|{b.pattern}>{probe}")
        return " + ".join(parts)


def total_probability(state: HybridState) -> float:
    return math.fsum(abs(b.amplitude) ** 2 for b in state.branches)


def normalize(state: HybridState) -> HybridState:
    """Rescale to unit norm, merging duplicate ``(pattern, k)`` keys."""
    merged = state._replace_terms(state.terms())
    norm = total_probability(merged)
    if not norm > 0 or not math.isfinite(norm):
        raise ValueError(f"cannot normalize a state with total probability {norm}")
    return merged.scaled(1 / math.sqrt(norm))


def from_amplitudes(
    n: int, amplitude_map: Mapping[str, complex], alpha: float, theta: float
) -> HybridState:
    """Normalized state with probe attached and every kick zero."""
    if n < 1:
        raise ValueError(f"photon count must be >= 1, got {n}")
    if not amplitude_map:
        raise ValueError("amplitude map is empty")
    _check_probe(alpha, theta)
    terms = [(check_pattern(p, n), 0, a) for p, a in amplitude_map.items()]
    if not any(a != 0 for _, _, a in terms):
        raise ValueError("amplitude map has zero total weight")
    return normalize(HybridState.assemble(n, alpha, theta, True, terms))


def product_plus_state(n: int, alpha: float, theta: float) -> HybridState:
    """``(|H>+|V>)^n / 2**(n/2)`` with an untouched probe."""
    if n < 1:
        raise ValueError(f"photon count must be >= 1, got {n}")
    _check_probe(alpha, theta)
    amp = 2 ** (-n / 2)
    return HybridState.assemble(n, alpha, theta, True, [(p, 0, amp) for p in all_patterns(n)])


def ghz_state(n: int, label: GhzLabel, alpha: float, theta: float) -> HybridState:
    """``(|s> +/- |s_bar>)/sqrt(2)`` for the bin's representative pattern ``s``."""
    # the representative pattern comes from the entangler's kick function
    from .protocols import bin_patterns

    s, s_bar = bin_patterns(n, label.bin)
    sign = 1 if label.sign == "+" else -1
    r = 1 / math.sqrt(2)
    return from_amplitudes(n, {s: r, s_bar: sign * r}, alpha, theta)


def signal_fidelity(a: HybridState, b: HybridState) -> float:
    """``|<a|b>|**2`` between two signal states whose probes were measured out."""
    if a.probe_present or b.probe_present:
        raise ValueError("signal_fidelity requires both probes to be measured out")
    if a.n != b.n:
        raise ValueError(f"photon counts differ: {a.n} vs {b.n}")
    amps = {b_.pattern: b_.amplitude for b_ in b.branches}
    overlap = sum(br.amplitude.conjugate() * amps.get(br.pattern, 0) for br in a.branches)
    return min(1.0, abs(overlap) ** 2)
