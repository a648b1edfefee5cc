"""Piecewise-constant pi-pulse catalog and the pulse angle psi(t).

Pulse shapes are stored as fractions of the duration tau_p with amplitudes in
units of 1/tau_p, so a single catalog entry serves every peak amplitude v via
tau_p = (v tau_p product) / v.  The rotation angle

    psi(t) = 2 * integral_0^t v(t') dt'

is piecewise linear; all integrals of sin(psi) / cos(psi) used here are
evaluated in closed form per segment.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import CatalogInvalid, OutOfRangeError
from .noise import TimeGrid

ANGLE_TOL = 1e-9
FIRST_ORDER_TOL = 1e-9

CATALOG_NAMES = ("RECT", "CORPSE", "SCORPSE", "CLASS2ND", "SYM2ND", "ASYM2ND")


@dataclass(frozen=True)
class PulseSegment:
    """One constant-amplitude stretch, in fractions of tau_p.

    ``amplitude_taup`` is the amplitude multiplied by tau_p (units 1/tau_p),
    so the segment's angle contribution 2 * amplitude_taup * (end - start)
    does not depend on the duration.
    """

    start: float
    end: float
    amplitude_taup: float


@dataclass(frozen=True)
class PiecewiseConstantPulse:
    name: str
    tau_p: float
    segments: tuple[PulseSegment, ...]
    order: int = 0

    def __post_init__(self):
        if self.tau_p <= 0.0:
            raise ValueError("tau_p must be positive")
        if not self.segments:
            raise ValueError("pulse needs at least one segment")
        prev = 0.0
        for seg in self.segments:
            if seg.start != prev:
                raise ValueError(f"{self.name}: segments do not tile [0, 1]")
            if seg.end <= seg.start:
                raise ValueError(f"{self.name}: empty or reversed segment")
            prev = seg.end
        if prev != 1.0:
            raise ValueError(f"{self.name}: segments do not end at 1")

    # -- geometry -----------------------------------------------------------

    @property
    def v_tau_product(self) -> float:
        """Peak amplitude times tau_p (the shape's v*tau_p invariant)."""
        return max(abs(s.amplitude_taup) for s in self.segments)

    @property
    def peak_amplitude(self) -> float:
        return self.v_tau_product / self.tau_p

    @property
    def switching_instants(self) -> np.ndarray:
        """Interior jump times, in time units."""
        return np.array([s.end * self.tau_p for s in self.segments[:-1]])

    @property
    def edge_angles(self) -> np.ndarray:
        """psi at the segment boundaries (duration-independent)."""
        steps = [2.0 * s.amplitude_taup * (s.end - s.start) for s in self.segments]
        return np.concatenate([[0.0], np.cumsum(steps)])

    @property
    def total_angle(self) -> float:
        return float(self.edge_angles[-1])

    def with_duration(self, tau_p: float) -> "PiecewiseConstantPulse":
        return PiecewiseConstantPulse(self.name, tau_p, self.segments, self.order)

    def for_inverse_amplitude(self, inv_v: float) -> "PiecewiseConstantPulse":
        """Same shape, rescaled so the peak amplitude is 1/inv_v."""
        if inv_v <= 0.0:
            raise ValueError("inv_v must be positive")
        return self.with_duration(self.v_tau_product * inv_v)

    # -- evaluation ---------------------------------------------------------

    def _segment_index(self, x: float, side: str = "left") -> int:
        ends = [s.end for s in self.segments]
        k = int(np.searchsorted(ends, x, side=side))
        return min(k, len(self.segments) - 1)

    def amplitude_at(self, t: float) -> float:
        """v(t) in real units (right-continuous at switching instants)."""
        if not 0.0 <= t <= self.tau_p:
            raise OutOfRangeError(f"t={t} outside [0, {self.tau_p}]")
        seg = self.segments[self._segment_index(t / self.tau_p, side="right")]
        return seg.amplitude_taup / self.tau_p

    def amplitudes_on(self, times: np.ndarray) -> np.ndarray:
        """Vectorized v(t) at an array of times inside [0, tau_p]."""
        x = np.asarray(times, dtype=float) / self.tau_p
        ends = np.array([s.end for s in self.segments])
        amps = np.array([s.amplitude_taup for s in self.segments])
        idx = np.minimum(np.searchsorted(ends, x, side="right"), len(amps) - 1)
        return amps[idx] / self.tau_p

    def angle_at(self, t: float) -> float:
        """psi(t) = 2 int_0^t v, piecewise linear and continuous."""
        if not 0.0 <= t <= self.tau_p:
            raise OutOfRangeError(f"t={t} outside [0, {self.tau_p}]")
        x = t / self.tau_p
        k = self._segment_index(x)
        seg = self.segments[k]
        return float(self.edge_angles[k] + 2.0 * seg.amplitude_taup * (x - seg.start))

    def angles_on(self, times: np.ndarray) -> np.ndarray:
        """Vectorized psi(t) at an array of times inside [0, tau_p]."""
        x = np.asarray(times, dtype=float) / self.tau_p
        ends = np.array([s.end for s in self.segments])
        starts = np.array([s.start for s in self.segments])
        amps = np.array([s.amplitude_taup for s in self.segments])
        idx = np.minimum(np.searchsorted(ends, x, side="left"), len(amps) - 1)
        return self.edge_angles[idx] + 2.0 * amps[idx] * (x - starts[idx])


def angle_at(pulse: PiecewiseConstantPulse, t: float) -> float:
    return pulse.angle_at(t)


def first_order_integrals(pulse: PiecewiseConstantPulse) -> tuple[float, float]:
    """Closed-form S = int_0^tau_p sin psi dt and C = int_0^tau_p cos psi dt.

    Both vanish for first-order pulses; a rectangular pi-pulse gives
    (2 tau_p / pi, 0).
    """
    psis = pulse.edge_angles
    s_total = 0.0
    c_total = 0.0
    for k, seg in enumerate(pulse.segments):
        p0, p1 = psis[k], psis[k + 1]
        dx = seg.end - seg.start
        if seg.amplitude_taup == 0.0:
            s_total += dx * math.sin(p0)
            c_total += dx * math.cos(p0)
        else:
            b = 2.0 * seg.amplitude_taup  # d(psi)/dx on this segment
            s_total += (math.cos(p0) - math.cos(p1)) / b
            c_total += (math.sin(p1) - math.sin(p0)) / b
    return s_total * pulse.tau_p, c_total * pulse.tau_p


# -- catalog ----------------------------------------------------------------


class PulseCatalog:
    """Named collection of unit-duration pulse shapes."""

    def __init__(self, pulses: dict[str, PiecewiseConstantPulse]):
        self.pulses = dict(pulses)

    def __getitem__(self, name: str) -> PiecewiseConstantPulse:
        key = name.upper()
        if key not in self.pulses:
            raise KeyError(f"unknown pulse {name!r}; have {sorted(self.pulses)}")
        return self.pulses[key]

    def __contains__(self, name: str) -> bool:
        return name.upper() in self.pulses

    def __iter__(self):
        return iter(self.pulses.values())

    @property
    def names(self) -> list[str]:
        return list(self.pulses)


def _pulse_from_record(rec: dict) -> PiecewiseConstantPulse:
    segments = tuple(
        PulseSegment(float(s["start"]), float(s["end"]), float(s["amplitude_taup"]))
        for s in rec["segments"]
    )
    return PiecewiseConstantPulse(rec["name"].upper(), 1.0, segments, int(rec.get("order", 0)))


def _pulse_to_record(pulse: PiecewiseConstantPulse) -> dict:
    return {
        "name": pulse.name,
        "order": pulse.order,
        "segments": [
            {"start": repr(s.start), "end": repr(s.end), "amplitude_taup": repr(s.amplitude_taup)}
            for s in pulse.segments
        ],
    }


def load_catalog(path=None) -> PulseCatalog:
    """Load a catalog JSON file; defaults to the shipped catalog.

    Numeric fields are decimal strings so the file preserves the full
    precision that the shipped shapes were specified with.
    """
    if path is None:
        text = resources.files("pulselab").joinpath("data/catalog.json").read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    records = json.loads(text)
    pulses = {}
    for rec in records:
        pulse = _pulse_from_record(rec)
        pulses[pulse.name] = pulse
    return PulseCatalog(pulses)


def save_catalog(pulses, path) -> None:
    """Write pulses (iterable or catalog) to a catalog JSON file."""
    records = [_pulse_to_record(p) for p in pulses]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records, fh, indent=2)
        fh.write("\n")


# -- validation -------------------------------------------------------------


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)  # (pulse, check, ok, detail)

    def add(self, pulse: str, check: str, ok: bool, detail: str):
        self.checks.append((pulse, check, bool(ok), detail))

    @property
    def ok(self) -> bool:
        return all(ok for _, _, ok, _ in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c[2]]

    def __str__(self) -> str:
        lines = []
        for pulse, check, ok, detail in self.checks:
            lines.append(f"{'PASS' if ok else 'FAIL'}  {pulse:9s} {check}: {detail}")
        return "\n".join(lines)


def validate_catalog(catalog: PulseCatalog) -> ValidationReport:
    """Check total angle = pi for every pulse and S = C = 0 for order >= 1."""
    report = ValidationReport()
    for pulse in catalog:
        angle_err = abs(pulse.total_angle - math.pi)
        report.add(pulse.name, "total-angle",
                   angle_err <= ANGLE_TOL,
                   f"|psi(tau_p) - pi| = {angle_err:.2e}")
        if pulse.order >= 1:
            s_val, c_val = first_order_integrals(pulse)
            tol = FIRST_ORDER_TOL * pulse.tau_p
            report.add(pulse.name, "first-order-sin",
                       abs(s_val) <= tol, f"|S| = {abs(s_val):.2e}")
            report.add(pulse.name, "first-order-cos",
                       abs(c_val) <= tol, f"|C| = {abs(c_val):.2e}")
    return report


def require_valid(catalog: PulseCatalog) -> PulseCatalog:
    report = validate_catalog(catalog)
    if not report.ok:
        raise CatalogInvalid(report)
    return catalog


# -- grids and perturbations -------------------------------------------------


def grid_is_aligned(pulse: PiecewiseConstantPulse, grid: TimeGrid) -> bool:
    """True when the grid spans the pulse and hits every switching instant exactly."""
    if grid.tau_p != pulse.tau_p:
        return False
    b = grid.boundaries
    return all(np.any(b == t) for t in pulse.switching_instants)


def build_time_grid(pulse: PiecewiseConstantPulse, n_steps: int) -> TimeGrid:
    """Uniform-per-segment grid with every switching instant on a boundary.

    Steps are distributed over segments proportionally to segment length
    (largest-remainder rounding, at least one step per segment), so the total
    step count equals n_steps whenever n_steps >= number of segments.
    """
    if n_steps < len(pulse.segments):
        raise ValueError(f"need at least {len(pulse.segments)} steps for {pulse.name}")
    fracs = np.array([s.end - s.start for s in pulse.segments])
    ideal = fracs * n_steps
    counts = np.maximum(1, np.floor(ideal).astype(int))
    short = n_steps - int(counts.sum())
    if short > 0:
        order = np.argsort(-(ideal - np.floor(ideal)))
        for i in range(short):
            counts[order[i % len(counts)]] += 1
    while counts.sum() > n_steps:
        # the minimum of one step per tiny segment can overshoot the total;
        # take steps back from the currently most over-represented segments
        excess = np.where(counts > 1, counts - ideal, -np.inf)
        counts[int(np.argmax(excess))] -= 1
    pieces = [np.array([0.0])]
    for seg, cnt in zip(pulse.segments, counts):
        sub = np.linspace(seg.start * pulse.tau_p, seg.end * pulse.tau_p, cnt + 1)
        pieces.append(sub[1:])
    return TimeGrid(np.concatenate(pieces))


def truncate_pulse(pulse: PiecewiseConstantPulse, decimals: int) -> PiecewiseConstantPulse:
    """Round segment fractions and amplitudes to a fixed number of decimals.

    Emulates a finite-accuracy realization of the shape; the result is
    generally no longer an exact pi-pulse, which is the point.
    """
    segs = []
    prev = 0.0
    for k, s in enumerate(pulse.segments):
        end = 1.0 if k == len(pulse.segments) - 1 else round(s.end, decimals)
        segs.append(PulseSegment(prev, end, round(s.amplitude_taup, decimals)))
        prev = end
    return PiecewiseConstantPulse(pulse.name + f"~{decimals}d", pulse.tau_p,
                                  tuple(segs), pulse.order)
