"""Optical building blocks acting on :class:`HybridState`.

Each PBS / Kerr medium / PBS sandwich is collapsed into a single
polarization-conditioned kick on the probe (``cross_kerr``).  The 22.5 degree
half-wave plate acts as a Hadamard on polarization.

Elements also have a one-line text form used in circuit dumps::

    kerr q3 V x3
    pgate -3
    hwp q1
    x q2
    cphase q1 H -2.094395
    detect
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .hybrid_state import HybridState, complement

_SQRT1_2 = 1 / math.sqrt(2)
# relative magnitude below which amplitudes are treated as cancelled after a Hadamard
HADAMARD_PRUNE = 1e-13


def _check_photon(state: HybridState, photon: int) -> int:
    if not 1 <= photon <= state.n:
        raise IndexError(f"photon index {photon} out of range 1..{state.n}")
    return photon - 1


def _check_pol(pol: str) -> str:
    if pol not in ("H", "V"):
        raise ValueError(f"polarization must be 'H' or 'V', got {pol!r}")
    return pol


def _require_probe(state: HybridState, what: str) -> None:
    if not state.probe_present:
        raise ValueError(f"{what} needs the probe beam, but it was already measured")


def cross_kerr(state: HybridState, photon: int, coupled_pol: str, multiplier: int) -> HybridState:
    """Kick the probe by ``multiplier * theta`` on branches where ``photon`` is ``coupled_pol``."""
    _require_probe(state, "cross_kerr")
    j = _check_photon(state, photon)
    _check_pol(coupled_pol)
    if multiplier < 1:
        raise ValueError(f"Kerr multiplier must be >= 1, got {multiplier}")
    return state._replace_terms(
        (p, k + multiplier if p[j] == coupled_pol else k, a) for p, k, a in state.terms()
    )


def probe_phase_gate(state: HybridState, multiplier: int) -> HybridState:
    """Shift every branch's probe phase by ``multiplier * theta``."""
    _require_probe(state, "probe_phase_gate")
    return state._replace_terms((p, k + multiplier, a) for p, k, a in state.terms())


def hadamard(state: HybridState, photon: int) -> HybridState:
    j = _check_photon(state, photon)
    terms = []
    for p, k, a in state.terms():
        a = a * _SQRT1_2
        h = p[:j] + "H" + p[j + 1 :]
        v = p[:j] + "V" + p[j + 1 :]
        terms.append((h, k, a))
        terms.append((v, k, a if p[j] == "H" else -a))
    return state._replace_terms(terms, prune=HADAMARD_PRUNE)


def pauli_x(state: HybridState, photon: int) -> HybridState:
    j = _check_photon(state, photon)
    return state._replace_terms(
        (p[:j] + complement(p[j]) + p[j + 1 :], k, a) for p, k, a in state.terms()
    )


def cond_phase(state: HybridState, photon: int, pol: str, angle: float) -> HybridState:
    """Multiply branches where ``photon`` has polarization ``pol`` by ``exp(i angle)``."""
    j = _check_photon(state, photon)
    _check_pol(pol)
    if angle == 0:
        return state
    phase = cmath.exp(1j * angle)
    return state._replace_terms((p, k, a * phase if p[j] == pol else a) for p, k, a in state.terms())


def pattern_distribution(state: HybridState) -> dict[str, float]:
    """Probability of each H/V detection pattern."""
    if state.probe_present:
        raise ValueError("detection requires the probe to be measured out first")
    dist: dict[str, float] = {}
    for b in state.branches:
        dist[b.pattern] = dist.get(b.pattern, 0.0) + abs(b.amplitude) ** 2
    total = math.fsum(dist.values())
    return {p: w / total for p, w in dist.items()}


def detect_all(state: HybridState, rng: np.random.Generator) -> str:
    """Ideal polarization-resolving detection of every photon; returns the pattern."""
    dist = pattern_distribution(state)
    patterns = list(dist)
    cumulative = np.cumsum([dist[p] for p in patterns])
    idx = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    return patterns[min(idx, len(patterns) - 1)]


def v_parity(pattern: str) -> str:
    return "even" if pattern.count("V") % 2 == 0 else "odd"


@dataclass(frozen=True)
class ElementSpec:
    kind: str
    photon: int | None = None
    pol: str | None = None
    multiplier: int | None = None
    angle: float | None = None

    KINDS = ("kerr", "probe_gate", "hwp", "not", "cond_phase", "detect")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown element kind {self.kind!r}")
        if self.kind in ("kerr", "hwp", "not", "cond_phase"):
            if self.photon is None or self.photon < 1:
                raise ValueError(f"{self.kind} needs a photon index >= 1")
        if self.kind in ("kerr", "cond_phase"):
            _check_pol(self.pol)
        if self.kind == "kerr" and (self.multiplier is None or self.multiplier < 1):
            raise ValueError("kerr multiplier must be >= 1")
        if self.kind == "probe_gate" and self.multiplier is None:
            raise ValueError("probe_gate needs a multiplier")
        if self.kind == "cond_phase" and self.angle is None:
            raise ValueError("cond_phase needs an angle")

    def __str__(self):
        if self.kind == "kerr":
            return f"kerr q{self.photon} {self.pol} x{self.multiplier}"
        if self.kind == "probe_gate":
            return f"pgate {self.multiplier}"
        if self.kind == "hwp":
            return f"hwp q{self.photon}"
        if self.kind == "not":
            return f"x q{self.photon}"
        if self.kind == "cond_phase":
            return f"cphase q{self.photon} {self.pol} {self.angle:.6f}"
        return "detect"

    @classmethod
    def parse(cls, text: str) -> "ElementSpec":
        tok = text.split()
        if not tok:
            raise ValueError("empty element line")

        def photon(t: str) -> int:
            if not t.startswith("q"):
                raise ValueError(f"expected photon token like 'q1', got {t!r}")
            return int(t[1:])

        head = tok[0]
        try:
            if head == "kerr" and len(tok) == 4 and tok[3].startswith("x"):
                return cls("kerr", photon(tok[1]), tok[2], multiplier=int(tok[3][1:]))
            if head == "pgate" and len(tok) == 2:
                return cls("probe_gate", multiplier=int(tok[1]))
            if head == "hwp" and len(tok) == 2:
                return cls("hwp", photon(tok[1]))
            if head == "x" and len(tok) == 2:
                return cls("not", photon(tok[1]))
            if head == "cphase" and len(tok) == 4:
                return cls("cond_phase", photon(tok[1]), tok[2], angle=float(tok[3]))
            if head == "detect" and len(tok) == 1:
                return cls("detect")
        except ValueError as exc:
            raise ValueError(f"malformed element line {text!r}: {exc}") from None
        raise ValueError(f"malformed element line {text!r}")


def apply_element(state: HybridState, el: ElementSpec) -> HybridState:
    """Apply a unitary element.  ``detect`` is not unitary; use :func:`detect_all`."""
    if el.kind == "kerr":
        return cross_kerr(state, el.photon, el.pol, el.multiplier)
    if el.kind == "probe_gate":
        return probe_phase_gate(state, el.multiplier)
    if el.kind == "hwp":
        return hadamard(state, el.photon)
    if el.kind == "not":
        return pauli_x(state, el.photon)
    if el.kind == "cond_phase":
        return cond_phase(state, el.photon, el.pol, el.angle)
    raise ValueError("detect is a measurement; call detect_all")


def apply_elements(state: HybridState, elements: Sequence[ElementSpec]) -> HybridState:
    for el in elements:
        state = apply_element(state, el)
    return state
