"""Monte Carlo experiment runner and report/CSV writers."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .homodyne import (
    GeometryError,
    classify_batch,
    make_outcome,
    misclassification_probability,
    sample_x,
    sample_x_batch,
)
from .hybrid_state import GhzLabel, HybridState, from_amplitudes, ghz_state, product_plus_state, signal_fidelity
from .protocols import (
    BELL_LABELS,
    bell_analyze,
    bell_state,
    canonical_ghz,
    entangler_circuit,
    entangler_geometry,
    finish_entangler,
    ghz_analyze,
    label_names_n3,
)

MODES = ("entangle", "analyze-ghz", "analyze-bell", "geometry", "histogram", "sweep")
RNG_ALGORITHM = "numpy.random.PCG64 via SeedSequence(entropy=seed, spawn_key=(stream,))"
SCHEMA_VERSION = 1
Z_95 = 1.959963984540054


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    mode: str
    n: Optional[int] = None
    alpha: float = 32.0
    theta: float = 0.5
    shots: int = 1000
    seed: int = 0
    output_path: Optional[str] = None
    force_correct_bins: bool = False
    input: str = "plus"
    bucket_width: float = 0.25
    thetas: Optional[tuple] = None
    trace_path: Optional[str] = None

    def validate(self) -> "ExperimentConfig":
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.n is None:
            self.n = 2 if self.mode == "analyze-bell" else 3
        if self.mode == "analyze-bell" and self.n != 2:
            raise ConfigError(f"analyze-bell works on 2 photons, got n={self.n}")
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.shots < 1:
            raise ConfigError(f"shots must be >= 1, got {self.shots}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not self.bucket_width > 0:
            raise ConfigError(f"bucket_width must be positive, got {self.bucket_width}")
        if self.input != "plus":
            if len(self.input) != self.n or set(self.input) - {"H", "V"}:
                raise ConfigError(f"input must be 'plus' or an H/V pattern of length {self.n}")
        if self.mode == "sweep":
            if self.thetas is None:
                self.thetas = default_theta_grid(self.alpha)
            if not self.thetas:
                raise ConfigError("sweep needs a non-empty theta grid")
            self.thetas = tuple(sorted(float(t) for t in self.thetas))
            for t in self.thetas:
                entangler_geometry(self.n, self.alpha, t)
        else:
            entangler_geometry(self.n, self.alpha, self.theta)
        return self

    def echo(self) -> dict:
        d = asdict(self)
        d["thetas"] = list(self.thetas) if self.thetas is not None else None
        return d


def _to_int(raw) -> int:
    if isinstance(raw, int) and not isinstance(raw, bool):
        return raw
    text = str(raw).strip()
    try:
        return int(text)
    except ValueError:
        value = float(text)  # accepts "4e4"
        if not value.is_integer():
            raise ValueError("not an integer") from None
        return int(value)


_FIELD_TYPES = {
    "n": _to_int,
    "alpha": float,
    "theta": float,
    "shots": _to_int,
    "seed": _to_int,
    "bucket_width": float,
}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def coerce_value(key: str, raw) -> object:
    """Convert a config value (from a file or the command line) to its field type."""
    if raw is None:
        return None
    try:
        if key in _FIELD_TYPES:
            return _FIELD_TYPES[key](raw)
        if key == "force_correct_bins":
            return raw if isinstance(raw, bool) else _parse_bool(str(raw))
        if key == "thetas":
            if isinstance(raw, str):
                return tuple(float(t) for t in raw.replace(";", ",").split(",") if t.strip())
            return tuple(float(t) for t in raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    return raw


def read_config_file(path: str | Path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment, dashes equal underscores."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    names = {f.name for f in fields(ExperimentConfig)} | {"out"}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "out":
            key = "output_path"
        if key not in names:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = coerce_value(key, value)
    return out


def default_theta_grid(alpha: float) -> tuple:
    return tuple(math.sqrt(s / alpha) for s in (1, 2, 3, 4, 5, 6, 7, 8))


def shot_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def wilson_interval(k: int, n: int, z: float = Z_95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def _rate_block(count: int, shots: int, predicted: float | None = None) -> dict:
    lo, hi = wilson_interval(count, shots)
    block = {"count": count, "rate": count / shots, "ci_low": lo, "ci_high": hi, "ci_level": 0.95}
    if predicted is not None:
        block["predicted_rate"] = predicted
    return block


def _input_state(cfg: ExperimentConfig) -> HybridState:
    if cfg.input == "plus":
        return product_plus_state(cfg.n, cfg.alpha, cfg.theta)
    return from_amplitudes(cfg.n, {cfg.input: 1.0}, cfg.alpha, cfg.theta)


def _fidelity_block(fids: list[float]) -> dict:
    if not fids:
        return {"count": 0, "mean": None, "min": None, "below_1m1e-9": 0}
    return {
        "count": len(fids),
        "mean": math.fsum(fids) / len(fids),
        "min": min(fids),
        "below_1m1e-9": sum(1 for f in fids if f < 1 - 1e-9),
    }


def _run_entangle(cfg: ExperimentConfig) -> dict:
    geometry = entangler_geometry(cfg.n, cfg.alpha, cfg.theta)
    prepared = entangler_circuit(cfg.n).apply(_input_state(cfg))
    target = canonical_ghz(cfg.n) if cfg.input == "plus" else None
    counts = [0] * (geometry.max_k + 1)
    mis = 0
    fids = []
    for i in range(cfg.shots):
        shot = finish_entangler(prepared, geometry, shot_rng(cfg.seed, i), cfg.force_correct_bins)
        counts[shot.outcome.bin] += 1
        if shot.outcome.bin != shot.outcome.true_bin:
            mis += 1
        elif target is not None:
            fids.append(signal_fidelity(shot.state, target))
    predicted = 0.0 if cfg.force_correct_bins else misclassification_probability(prepared, geometry)
    return {
        "counts": {str(k): c for k, c in enumerate(counts)},
        "misclassification": _rate_block(mis, cfg.shots, predicted),
        "fidelity": _fidelity_block(fids) if target is not None else None,
    }


def _confusion_report(inputs, run_one, cfg: ExperimentConfig, predicted: dict) -> dict:
    """Round-robin the inputs over ``shots`` and tally decoded labels."""
    confusion = {name: {} for name in inputs}
    per_input = {name: 0 for name in inputs}
    mis = 0
    wrong = 0
    unexplained = 0
    names = list(inputs)
    for i in range(cfg.shots):
        name = names[i % len(names)]
        decoded, misclassified = run_one(inputs[name], shot_rng(cfg.seed, i))
        per_input[name] += 1
        row = confusion[name]
        row[decoded] = row.get(decoded, 0) + 1
        mis += misclassified
        if decoded != name:
            wrong += 1
            unexplained += not misclassified
    accuracy = {name: confusion[name].get(name, 0) / per_input[name] if per_input[name] else None for name in names}
    counts = {}
    for row in confusion.values():
        for label, c in row.items():
            counts[label] = counts.get(label, 0) + c
    mean_pred = math.fsum(predicted[nm] * per_input[nm] for nm in names) / cfg.shots
    return {
        "counts": dict(sorted(counts.items())),
        "confusion": confusion,
        "accuracy": accuracy,
        "misclassification": _rate_block(mis, cfg.shots, 0.0 if cfg.force_correct_bins else mean_pred),
        "label_errors": _rate_block(wrong, cfg.shots),
        "unexplained_label_errors": unexplained,
    }


def _run_analyze_ghz(cfg: ExperimentConfig) -> dict:
    n = cfg.n
    geometry = entangler_geometry(n, cfg.alpha, cfg.theta)
    labels = [GhzLabel(k, s) for k in range(geometry.max_k + 1) for s in "+-"]
    inputs = {str(lab): ghz_state(n, lab, cfg.alpha, cfg.theta) for lab in labels}
    eps = geometry.epsilons
    predicted = {
        str(lab): (eps[lab.bin - 1] if lab.bin else 0.0) + (eps[lab.bin] if lab.bin < geometry.max_k else 0.0)
        for lab in labels
    }

    def run_one(state, rng):
        res = ghz_analyze(state, cfg.alpha, cfg.theta, rng, force_correct_bins=cfg.force_correct_bins)
        return str(res.label), res.outcome.bin != res.outcome.true_bin

    report = _confusion_report(inputs, run_one, cfg, predicted)
    if n == 3:
        report["names"] = {str(lab): label_names_n3(lab) for lab in labels}
    return report


def _run_analyze_bell(cfg: ExperimentConfig) -> dict:
    inputs = {lab: bell_state(lab, cfg.alpha, cfg.theta) for lab in BELL_LABELS}
    eps = entangler_geometry(2, cfg.alpha, cfg.theta).epsilons[0]
    predicted = {lab: 1 - (1 - eps) ** 2 for lab in BELL_LABELS}

    def run_one(state, rng):
        rec = bell_analyze(state, cfg.alpha, cfg.theta, rng, force_correct_bins=cfg.force_correct_bins)
        return rec.label, any(o.bin != o.true_bin for o in rec.outcomes)

    return _confusion_report(inputs, run_one, cfg, predicted)


def _norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2))


def _bucket_mass(prepared: HybridState, geometry, b: int, lo: float, hi: float) -> float:
    """Mixture mass of outcomes in ``[c_b + lo, c_b + hi]`` intersected with bin b."""
    lower = geometry.midpoint_offsets[b][b] if b < geometry.max_k else -math.inf
    upper = geometry.midpoint_offsets[b][b - 1] if b > 0 else math.inf
    lo, hi = max(lo, lower), min(hi, upper)
    if lo >= hi:
        return 0.0
    total = 0.0
    for br in prepared.branches:
        shift = geometry.center_offset(b, abs(br.k))  # c_b - c_k
        total += abs(br.amplitude) ** 2 * (_norm_cdf(hi + shift) - _norm_cdf(lo + shift))
    return total


def _run_histogram(cfg: ExperimentConfig) -> tuple[dict, str]:
    geometry = entangler_geometry(cfg.n, cfg.alpha, cfg.theta)
    prepared = entangler_circuit(cfg.n).apply(_input_state(cfg))
    w = cfg.bucket_width
    buckets: dict[tuple[int, int], int] = {}
    per_bin = [[] for _ in range(geometry.max_k + 1)]
    for i in range(cfg.shots):
        x = sample_x(prepared, shot_rng(cfg.seed, i))
        out = make_outcome(x, geometry)
        per_bin[out.bin].append(out.delta)
        key = (out.bin, math.floor(out.delta / w))
        buckets[key] = buckets.get(key, 0) + 1
    lines = io.StringIO()
    writer = csv.writer(lines, lineterminator="\n")
    writer.writerow(["bin_center_index", "delta_lo", "delta_hi", "count", "expected"])
    for (b, j), count in sorted(buckets.items()):
        lo, hi = j * w, (j + 1) * w
        expected = cfg.shots * _bucket_mass(prepared, geometry, b, lo, hi)
        writer.writerow([b, repr(lo), repr(hi), count, repr(expected)])
    humps = []
    for b, deltas in enumerate(per_bin):
        d = np.asarray(deltas)
        humps.append(
            {
                "bin": b,
                "center": geometry.centers[b],
                "count": len(deltas),
                "mass": len(deltas) / cfg.shots,
                "expected_mass": _bucket_mass(prepared, geometry, b, -math.inf, math.inf),
                "mean_delta": float(d.mean()) if len(d) else None,
                "var_delta": float(d.var(ddof=1)) if len(d) > 1 else None,
            }
        )
    counts = {str(h["bin"]): h["count"] for h in humps}
    return {"counts": counts, "humps": humps}, lines.getvalue()


def _run_sweep(cfg: ExperimentConfig) -> tuple[dict, str]:
    rows = []
    for idx, theta in enumerate(cfg.thetas):
        geometry = entangler_geometry(cfg.n, cfg.alpha, theta)
        if cfg.input == "plus":
            state = product_plus_state(cfg.n, cfg.alpha, theta)
        else:
            state = from_amplitudes(cfg.n, {cfg.input: 1.0}, cfg.alpha, theta)
        prepared = entangler_circuit(cfg.n).apply(state)
        centers, deltas = sample_x_batch(prepared, shot_rng(cfg.seed, idx), cfg.shots)
        mis = int(np.count_nonzero(classify_batch(geometry, centers, deltas) != centers))
        lo, hi = wilson_interval(mis, cfg.shots)
        rows.append(
            {
                "alpha_theta2": cfg.alpha * theta**2,
                "theta": theta,
                "epsilon_max": geometry.epsilon_max,
                "predicted_rate": misclassification_probability(prepared, geometry),
                "empirical_rate": mis / cfg.shots,
                "ci_low": lo,
                "ci_high": hi,
            }
        )
    lines = io.StringIO()
    writer = csv.DictWriter(lines, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: repr(v) for k, v in r.items()})
    return {"sweep": rows}, lines.getvalue()


@dataclass
class RunResult:
    report: dict
    csv_text: Optional[str] = None
    trace: Optional[list] = field(default=None)


def _trace_first_shot(cfg: ExperimentConfig) -> list:
    trace: list = []
    rng = shot_rng(cfg.seed, 0)
    if cfg.mode == "analyze-ghz":
        ghz_analyze(ghz_state(cfg.n, GhzLabel(0, "+"), cfg.alpha, cfg.theta), cfg.alpha, cfg.theta, rng,
                    force_correct_bins=cfg.force_correct_bins, trace=trace)
    elif cfg.mode == "analyze-bell":
        bell_analyze(bell_state("Phi+", cfg.alpha, cfg.theta), cfg.alpha, cfg.theta, rng,
                     force_correct_bins=cfg.force_correct_bins, trace=trace)
    else:
        from .protocols import run_entangler

        run_entangler(cfg.n, cfg.alpha, cfg.theta, rng, input_state=_input_state(cfg),
                      force_correct_bins=cfg.force_correct_bins, trace=trace)
    return trace


def run(cfg: ExperimentConfig) -> RunResult:
    """Run one experiment; deterministic in ``(cfg, seed)`` apart from ``duration_s``."""
    cfg.validate()
    start = time.perf_counter()
    csv_text = None
    if cfg.mode == "geometry":
        body = {}
    elif cfg.mode == "entangle":
        body = _run_entangle(cfg)
    elif cfg.mode == "analyze-ghz":
        body = _run_analyze_ghz(cfg)
    elif cfg.mode == "analyze-bell":
        body = _run_analyze_bell(cfg)
    elif cfg.mode == "histogram":
        body, csv_text = _run_histogram(cfg)
    else:
        body, csv_text = _run_sweep(cfg)
    theta = cfg.theta if cfg.mode != "sweep" else cfg.thetas[-1]
    report = {
        "schema_version": SCHEMA_VERSION,
        "mode": cfg.mode,
        "config": cfg.echo(),
        "rng": RNG_ALGORITHM,
        "shots": 0 if cfg.mode == "geometry" else cfg.shots,
        "geometry": entangler_geometry(cfg.n, cfg.alpha, theta).to_json(),
        **body,
    }
    report["duration_s"] = time.perf_counter() - start
    trace = _trace_first_shot(cfg) if cfg.trace_path and cfg.mode in ("entangle", "analyze-ghz", "analyze-bell") else None
    return RunResult(report, csv_text, trace)


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def csv_path_for(output_path: str | Path) -> Path:
    return Path(output_path).with_suffix(".csv")


def write_outputs(cfg: ExperimentConfig, result: RunResult) -> list[Path]:
    written = []
    if cfg.output_path:
        p = Path(cfg.output_path)
        p.write_text(dumps_report(result.report))
        written.append(p)
        if result.csv_text is not None:
            c = csv_path_for(p)
            c.write_text(result.csv_text)
            written.append(c)
    if cfg.trace_path and result.trace is not None:
        t = Path(cfg.trace_path)
        t.write_text(json.dumps(result.trace, indent=1, ensure_ascii=False) + "\n")
        written.append(t)
    return written


__all__ = [
    "MODES",
    "ConfigError",
    "ExperimentConfig",
    "GeometryError",
    "RunResult",
    "run",
    "write_outputs",
    "read_config_file",
    "dumps_report",
]
