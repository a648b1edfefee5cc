"""Scaling experiments: amplitude sweeps, Monte-Carlo ensembles, log-log fits.

Results are rendered against the inverse peak amplitude 1/v (for a fixed
shape tau_p is proportional to 1/v), with g0 = 1 fixing the energy scale.
One covariance eigendecomposition is built per (pulse, 1/v) cell and shared
by all realizations; realizations are drawn in fixed-size chunks whose RNG
streams derive from (seed, cell, chunk), so results are bit-reproducible
for a given configuration regardless of worker count or scheduling.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientPoints
from .metrics import MonteCarloEstimate, accumulate_values, ensemble_frobenius
from .noise import (AutocorrelationModel, EXPONENTIAL, GAUSSIAN, NoiseSampler,
                    TimeGrid, build_sampler)
from .propagator import evolve_ensemble
from .pulses import PiecewiseConstantPulse, PulseCatalog, build_time_grid, load_catalog

#: points whose relative standard error of mean Delta_F exceeds this are excluded
REL_STDERR_MAX = 0.05

DEFAULT_FIT_WINDOWS = {
    GAUSSIAN: (1e-3, 1e-1),
    EXPONENTIAL: (1e-3, 3e-2),
}

PREFACTOR_COEFFS = {
    # leading mean DF^2 = coeff * g0^2 * gamma * (1/v)^3 under exponential noise
    "CORPSE": 4.0 * math.pi,
    "SCORPSE": 8.0 * math.pi / 3.0,
}


@dataclass(frozen=True)
class ScalingExperimentConfig:
    pulses: tuple[str, ...]
    model: AutocorrelationModel
    inv_v_grid: tuple[float, ...]
    realizations: int = 20000
    steps_per_pulse: int = 512
    seed: int = 0
    fit_window: Optional[tuple[float, float]] = None
    estimator: str = "mean_df2"          # "mean_df2" | "mean_df"
    track_polarization: bool = True
    workers: int = 1
    chunk_size: int = 4096

    def __post_init__(self):
        iv = tuple(float(v) for v in self.inv_v_grid)
        if any(v <= 0 for v in iv) or any(b <= a for a, b in zip(iv, iv[1:])):
            raise ValueError("inv_v_grid must be positive and strictly increasing")
        object.__setattr__(self, "inv_v_grid", iv)
        object.__setattr__(self, "pulses", tuple(p.upper() for p in self.pulses))
        if self.estimator not in ("mean_df2", "mean_df"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.realizations < 2:
            raise ValueError("need at least 2 realizations")

    @property
    def window(self) -> tuple[float, float]:
        if self.fit_window is not None:
            return self.fit_window
        return DEFAULT_FIT_WINDOWS[self.model.kind]


@dataclass(frozen=True)
class CellStats:
    """Monte-Carlo estimates for one (pulse, 1/v) cell."""

    pulse: str
    inv_v: float
    estimate: MonteCarloEstimate                       # of DF^2
    df_direct: tuple[float, float]                     # (mean, stderr) of DF itself
    partials: tuple[MonteCarloEstimate, MonteCarloEstimate, MonteCarloEstimate]
    poldev: Optional[MonteCarloEstimate] = None        # of |<sy>+1|, y-start


@dataclass(frozen=True)
class FitResult:
    slope: float
    slope_err: float
    intercept: float
    intercept_err: float
    n_used: int
    excluded: tuple = ()


@dataclass
class ScalingResult:
    config: ScalingExperimentConfig
    cells: list[CellStats] = field(default_factory=list)
    fits: dict[str, FitResult] = field(default_factory=dict)

    def cells_for(self, pulse: str) -> list[CellStats]:
        return [c for c in self.cells if c.pulse == pulse.upper()]

    # -- serialization ------------------------------------------------------

    CSV_HEADER = ("pulse,inv_v,mean_df2,stderr_df2,mean_df,partial_x,partial_y,"
                  "partial_z,polarization_dev,realizations")

    def csv_text(self) -> str:
        lines = [self.CSV_HEADER]
        for c in self.cells:
            pol = repr(c.poldev.mean_df2) if c.poldev is not None else ""
            lines.append(",".join([
                c.pulse, repr(c.inv_v),
                repr(c.estimate.mean_df2), repr(c.estimate.stderr_df2),
                repr(c.estimate.mean_df),
                repr(c.partials[0].mean_df2), repr(c.partials[1].mean_df2),
                repr(c.partials[2].mean_df2),
                pol, str(c.estimate.realizations),
            ]))
        return "\n".join(lines) + "\n"

    def summary_dict(self) -> dict:
        return {
            "model": asdict(self.config.model),
            "seed": self.config.seed,
            "realizations": self.config.realizations,
            "steps_per_pulse": self.config.steps_per_pulse,
            "estimator": self.config.estimator,
            "fit_window": list(self.config.window),
            "fits": {
                name: {
                    "slope": fit.slope,
                    "slope_err": fit.slope_err,
                    "intercept": fit.intercept,
                    "intercept_err": fit.intercept_err,
                    "n_used": fit.n_used,
                    "excluded": [list(e) for e in fit.excluded],
                }
                for name, fit in self.fits.items()
            },
        }

    def write(self, outdir: str) -> None:
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "scaling.csv"), "w", encoding="utf-8") as fh:
            fh.write(self.csv_text())
        with open(os.path.join(outdir, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(self.summary_dict(), fh, indent=2)
            fh.write("\n")
        for name in self.config.pulses:
            rows = self.cells_for(name)
            path = os.path.join(outdir, f"{name.lower()}.dat")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("# inv_v  mean_df  stderr_df\n")
                for c in rows:
                    df, sd = _df_and_sigma(c, self.config.estimator)
                    fh.write(f"{c.inv_v!r} {df!r} {sd!r}\n")
            fit = self.fits.get(name)
            if fit is not None and math.isfinite(fit.slope):
                lo, hi = self.config.window
                with open(os.path.join(outdir, f"{name.lower()}_fit.dat"), "w",
                          encoding="utf-8") as fh:
                    fh.write("# inv_v  fitted_df\n")
                    for x in (lo, hi):
                        fh.write(f"{x!r} {10 ** (fit.intercept + fit.slope * math.log10(x))!r}\n")


# -- fitting -----------------------------------------------------------------


def _wls_loglog(x: np.ndarray, y: np.ndarray, sigma_log: np.ndarray) -> FitResult:
    """Weighted least squares of log10(y) against log10(x)."""
    lx = np.log10(x)
    ly = np.log10(y)
    w = 1.0 / sigma_log**2
    xm = np.sum(w * lx) / np.sum(w)
    ym = np.sum(w * ly) / np.sum(w)
    sxx = np.sum(w * (lx - xm) ** 2)
    slope = float(np.sum(w * (lx - xm) * (ly - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = ly - (intercept + slope * lx)
    chi2_red = float(np.sum(w * resid**2) / (x.size - 2))
    slope_err = math.sqrt(chi2_red / sxx)
    intercept_err = math.sqrt(chi2_red * (1.0 / np.sum(w) + xm**2 / sxx))
    return FitResult(slope, slope_err, intercept, intercept_err, int(x.size))


def fit_exponent(points: Sequence[tuple[float, float, float]],
                 window: tuple[float, float],
                 rel_stderr_max: float = REL_STDERR_MAX) -> FitResult:
    """Fit log10(mean DF) vs log10(1/v) from (inv_v, mean_df2, stderr_df2) rows.

    The uncertainty of log10 DF follows from the delta method,
    sigma_log = stderr_df2 / (2 mean_df2 ln 10); points outside the window or
    with relative standard error of DF above ``rel_stderr_max`` are excluded.
    """
    lo, hi = window
    usable = []
    excluded = []
    for inv_v, mean_df2, stderr_df2 in points:
        if not lo <= inv_v <= hi:
            excluded.append((inv_v, "outside fit window"))
            continue
        if mean_df2 <= 0:
            excluded.append((inv_v, "non-positive mean"))
            continue
        rel_df = stderr_df2 / (2.0 * mean_df2)   # relative stderr of DF
        if rel_df > rel_stderr_max:
            excluded.append((inv_v, f"relative stderr {rel_df:.1%} > {rel_stderr_max:.0%}"))
            continue
        usable.append((inv_v, mean_df2, stderr_df2))
    if len(usable) < 3:
        raise InsufficientPoints(
            f"{len(usable)} usable points after exclusion; need >= 3"
        )
    arr = np.array(usable)
    sigma_log = arr[:, 2] / (2.0 * arr[:, 1] * math.log(10.0))
    fit = _wls_loglog(arr[:, 0], np.sqrt(arr[:, 1]), sigma_log)
    return FitResult(fit.slope, fit.slope_err, fit.intercept, fit.intercept_err,
                     fit.n_used, tuple(excluded))


def _df_and_sigma(cell: CellStats, estimator: str) -> tuple[float, float]:
    if estimator == "mean_df":
        return cell.df_direct
    est = cell.estimate
    if est.mean_df <= 0:
        return est.mean_df, math.inf
    return est.mean_df, est.stderr_df2 / (2.0 * est.mean_df)


# -- Monte-Carlo cells --------------------------------------------------------


def _chunk_sizes(total: int, chunk: int) -> list[int]:
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])


def _run_cell(pulse: PiecewiseConstantPulse, grid: TimeGrid, sampler: NoiseSampler,
              cell_index: int, realizations: int, chunk_size: int,
              workers: int, track_polarization: bool) -> dict[str, np.ndarray]:
    sizes = _chunk_sizes(realizations, chunk_size)

    def one_chunk(c: int) -> dict[str, np.ndarray]:
        eta = sampler.sample_block(sizes[c], stream=(cell_index, c))
        w, x, y, z = evolve_ensemble(pulse, grid, eta)
        out = ensemble_frobenius(w, x, y, z)
        out["df"] = np.sqrt(out["df2"])
        return out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one_chunk, range(len(sizes))))
    else:
        parts = [one_chunk(c) for c in range(len(sizes))]

    keys = ["df2", "df", "partial_x", "partial_y", "partial_z"]
    if track_polarization:
        keys.append("poldev_y")
    return {k: np.concatenate([p[k] for p in parts]) for k in keys}


def run_scaling(config: ScalingExperimentConfig,
                catalog: Optional[PulseCatalog] = None) -> ScalingResult:
    """Sweep 1/v for every configured pulse and fit the scaling exponents.

    For each cell: tau_p = (v tau_p product) * inv_v, one sampler build, M
    realizations evolved in chunks, means accumulated with exactly-rounded
    summation.  The exponent fit uses the configured estimator over the fit
    window with the standard exclusion rule.
    """
    catalog = catalog or load_catalog()
    result = ScalingResult(config)
    cell_index = 0
    for name in config.pulses:
        base = catalog[name]
        for inv_v in config.inv_v_grid:
            scaled = base.for_inverse_amplitude(inv_v)
            grid = build_time_grid(scaled, config.steps_per_pulse)
            sampler = build_sampler(config.model, grid, config.seed)
            arrays = _run_cell(scaled, grid, sampler, cell_index,
                               config.realizations, config.chunk_size,
                               config.workers, config.track_polarization)
            df_est = accumulate_values(arrays["df"])
            cell = CellStats(
                pulse=name,
                inv_v=inv_v,
                estimate=accumulate_values(arrays["df2"]),
                df_direct=(df_est.mean_df2, df_est.stderr_df2),
                partials=(accumulate_values(arrays["partial_x"]),
                          accumulate_values(arrays["partial_y"]),
                          accumulate_values(arrays["partial_z"])),
                poldev=(accumulate_values(arrays["poldev_y"])
                        if config.track_polarization else None),
            )
            result.cells.append(cell)
            cell_index += 1

        cells = result.cells_for(name)
        if config.estimator == "mean_df":
            # direct DF averaging: feed DF and its stderr straight to the WLS
            lo, hi = config.window
            usable = [(c.inv_v, c.df_direct[0], c.df_direct[1])
                      for c in cells
                      if lo <= c.inv_v <= hi
                      and c.df_direct[1] / c.df_direct[0] <= REL_STDERR_MAX]
            if len(usable) < 3:
                raise InsufficientPoints("too few usable points for mean_df fit")
            arr = np.array(usable)
            sigma_log = arr[:, 2] / (arr[:, 1] * math.log(10.0))
            result.fits[name] = _wls_loglog(arr[:, 0], arr[:, 1], sigma_log)
        else:
            pts = [(c.inv_v, c.estimate.mean_df2, c.estimate.stderr_df2)
                   for c in cells]
            result.fits[name] = fit_exponent(pts, config.window)
    return result


# -- prefactor and convergence checks -----------------------------------------


@dataclass(frozen=True)
class PrefactorRow:
    inv_v: float
    measured_df2: float
    stderr_df2: float
    predicted_df2: float

    @property
    def ratio(self) -> float:
        return self.measured_df2 / self.predicted_df2

    @property
    def ratio_err(self) -> float:
        return self.stderr_df2 / self.predicted_df2


def run_prefactor_check(pulse_name: str, model: AutocorrelationModel,
                        inv_v_list: Sequence[float], realizations: int,
                        steps_per_pulse: int = 512, seed: int = 0,
                        catalog: Optional[PulseCatalog] = None) -> list[PrefactorRow]:
    """Measured mean DF^2 against the leading cubic law for CORPSE/SCORPSE."""
    name = pulse_name.upper()
    if name not in PREFACTOR_COEFFS:
        raise ValueError("prefactor check supports CORPSE and SCORPSE only")
    if model.kind != EXPONENTIAL:
        raise ValueError("prefactor check requires the exponential model")
    catalog = catalog or load_catalog()
    base = catalog[name]
    coeff = PREFACTOR_COEFFS[name]
    rows = []
    for k, inv_v in enumerate(inv_v_list):
        scaled = base.for_inverse_amplitude(inv_v)
        grid = build_time_grid(scaled, steps_per_pulse)
        sampler = build_sampler(model, grid, seed)
        arrays = _run_cell(scaled, grid, sampler, k, realizations, 4096, 1, False)
        est = accumulate_values(arrays["df2"])
        predicted = coeff * model.g0**2 * model.gamma * inv_v**3
        rows.append(PrefactorRow(inv_v, est.mean_df2, est.stderr_df2, predicted))
    return rows


@dataclass(frozen=True)
class ConvergenceRow:
    n_steps: int
    mean_df2: float
    stderr_df2: float
    drift_vs_finest: float   # |mean - mean_finest| / mean_finest


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple[ConvergenceRow, ...]
    passed: bool             # drift between the two finest grids < 0.5%
    shared_draws: bool       # coarser grids subsample the finest realizations


def run_convergence_check(pulse_name: str, model: AutocorrelationModel,
                          inv_v: float, realizations: int, base_steps: int,
                          refine_factors: Sequence[int] = (3, 3), seed: int = 0,
                          catalog: Optional[PulseCatalog] = None,
                          drift_tol: float = 5e-3) -> ConvergenceReport:
    """Repeat one cell across grid refinements and report the mean-DF^2 drift.

    With odd refinement factors every coarse midpoint is also a midpoint of
    the finest grid, so coarse realizations are exact subsamples of the
    finest draws (common random numbers); the drift is then measured far
    below the Monte-Carlo noise of the individual means.  With any even
    factor each grid is sampled independently.
    """
    catalog = catalog or load_catalog()
    scaled = catalog[pulse_name].for_inverse_amplitude(inv_v)
    grids = [build_time_grid(scaled, base_steps)]
    for f in refine_factors:
        grids.append(grids[-1].refined(int(f)))
    shared = all(int(f) % 2 == 1 for f in refine_factors)

    means = []
    if shared:
        finest = grids[-1]
        sampler = build_sampler(model, finest, seed)
        sizes = _chunk_sizes(realizations, 4096)
        blocks = [sampler.sample_block(m, stream=(0, c)) for c, m in enumerate(sizes)]
        # strides[i] = finest steps per grid-i step = product of factors i..end
        strides = []
        for i in range(len(grids)):
            stride = 1
            for f in refine_factors[i:]:
                stride *= int(f)
            strides.append(stride)
        for grid, stride in zip(grids, strides):
            idx = np.arange(grid.n_steps) * stride + (stride - 1) // 2
            vals = []
            for block in blocks:
                eta = block[idx, :]
                w, x, y, z = evolve_ensemble(scaled, grid, eta)
                vals.append(ensemble_frobenius(w, x, y, z)["df2"])
            means.append(accumulate_values(np.concatenate(vals)))
    else:
        for gi, grid in enumerate(grids):
            sampler = build_sampler(model, grid, seed)
            arrays = _run_cell(scaled, grid, sampler, gi, realizations, 4096, 1, False)
            means.append(accumulate_values(arrays["df2"]))

    finest_mean = means[-1].mean_df2
    rows = tuple(
        ConvergenceRow(grid.n_steps, est.mean_df2, est.stderr_df2,
                       abs(est.mean_df2 - finest_mean) / finest_mean)
        for grid, est in zip(grids, means)
    )
    passed = rows[-2].drift_vs_finest < drift_tol if len(rows) >= 2 else True
    return ConvergenceReport(rows, passed, shared)
