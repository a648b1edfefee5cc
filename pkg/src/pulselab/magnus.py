"""Magnus-expansion quantities for shaped pulses under dephasing noise.

Leading contributions to the noise-averaged squared Frobenius norm:

    I_1   = g0^2 ([int cos psi]^2 + [int sin psi]^2)          ~ tau_p^2
    I_3/2 = -a int int |t1-t2| cos[psi(t1)-psi(t2)] dt1 dt2    ~ tau_p^3

where a is the |t|-cusp coefficient of the autocorrelation (zero for analytic
models).  I_1 vanishes for first-order pulses; I_3/2 cannot be nulled as well:
on the subspace where C|cos psi> = C|sin psi> = 0 the kernel identity
A = (tau_p C - B^dag B)/2 (A: |t1-t2|, B: sgn(t1-t2), C: constant kernel)
turns I_3/2 into the manifestly positive (a/2)(||B cos psi||^2 + ||B sin psi||^2),
and B annihilates no nonzero function.  verify_nogo checks all of this on a
discretized grid; minimize_i32 searches for the attainable minimum instead.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import least_squares

from .errors import GridMismatch, NoFeasiblePoint, NotFirstOrder, QuadratureNotConverged
from .noise import AutocorrelationModel, NoiseRealization
from .pulses import (PiecewiseConstantPulse, PulseSegment,
                     first_order_integrals, grid_is_aligned)

I32_REL_TOL = 1e-10
FIRST_ORDER_TOL = 1e-9
FEASIBILITY_TOL = 1e-8

DEFAULT_V_MAX_TAUP = 4.0 * math.pi


@dataclass(frozen=True)
class MagnusFirstOrder:
    """First-order Magnus components for one noise realization."""

    mu_y: float   # int eta(t) sin psi(t) dt
    mu_z: float   # int eta(t) cos psi(t) dt


@dataclass(frozen=True)
class AnomalousIntegrals:
    i1: float     # energy^2 time^2
    i32: float    # energy^2 time^3
    a: float      # cusp coefficient, energy^3


@dataclass(frozen=True)
class NoGoReport:
    grid_n: int
    dt: float
    quad_a_cos: float        # <cos psi|A|cos psi>
    quad_a_sin: float        # <sin psi|A|sin psi>
    b_norm_cos: float        # ||B cos psi||^2
    b_norm_sin: float        # ||B sin psi||^2
    identity_residual: float  # max |A - (tau C - B^dag B)/2| in kernel units
    i32_kernel: float        # I_3/2 / a via the B-norm route
    i32_discrete: Optional[float] = None  # with the model's cusp coefficient


# -- step-exact first-order integrals -----------------------------------------


def _step_trig_integrals(pulse: PiecewiseConstantPulse, grid) -> tuple[np.ndarray, np.ndarray]:
    """Exact per-step integrals of sin psi and cos psi (psi linear per step)."""
    psi_edges = pulse.angles_on(grid.boundaries)
    widths = grid.widths
    slopes = 2.0 * pulse.amplitudes_on(grid.midpoints)  # d(psi)/dt per step
    p0 = psi_edges[:-1]
    p1 = psi_edges[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        int_sin = np.where(slopes != 0.0,
                           (np.cos(p0) - np.cos(p1)) / np.where(slopes == 0, 1, slopes),
                           widths * np.sin(p0))
        int_cos = np.where(slopes != 0.0,
                           (np.sin(p1) - np.sin(p0)) / np.where(slopes == 0, 1, slopes),
                           widths * np.cos(p0))
    return int_sin, int_cos


def first_order_terms(pulse: PiecewiseConstantPulse,
                      noise: NoiseRealization) -> MagnusFirstOrder:
    """mu_y^(1), mu_z^(1) for a step-constant realization (exact per step)."""
    if not grid_is_aligned(pulse, noise.grid):
        raise GridMismatch("noise grid does not resolve the pulse's switching instants")
    int_sin, int_cos = _step_trig_integrals(pulse, noise.grid)
    return MagnusFirstOrder(
        mu_y=float(np.dot(noise.values, int_sin)),
        mu_z=float(np.dot(noise.values, int_cos)),
    )


# -- shape moments (closed forms, fraction units scaled by tau_p powers) -------


def first_moment_integrals(pulse: PiecewiseConstantPulse) -> tuple[float, float]:
    """(int t sin psi dt, int t cos psi dt); vanish for the time-dependent
    second-order condition set, but not for every advertised-order-2 shape."""
    psis = pulse.edge_angles
    ts = tc = 0.0
    for k, seg in enumerate(pulse.segments):
        x0, x1 = seg.start, seg.end
        p0, p1 = psis[k], psis[k + 1]
        if seg.amplitude_taup == 0.0:
            ts += 0.5 * (x1 * x1 - x0 * x0) * math.sin(p0)
            tc += 0.5 * (x1 * x1 - x0 * x0) * math.cos(p0)
            continue
        b = 2.0 * seg.amplitude_taup
        c0 = x0 - p0 / b
        ts += (c0 * (math.cos(p0) - math.cos(p1))
               + (math.sin(p1) - p1 * math.cos(p1)
                  - math.sin(p0) + p0 * math.cos(p0)) / b) / b
        tc += (c0 * (math.sin(p1) - math.sin(p0))
               + (math.cos(p1) + p1 * math.sin(p1)
                  - math.cos(p0) - p0 * math.sin(p0)) / b) / b
    return ts * pulse.tau_p**2, tc * pulse.tau_p**2


def ordered_sine_integral(pulse: PiecewiseConstantPulse) -> float:
    """Closed form of int_0^tau dt1 int_0^t1 dt2 sin[psi(t1) - psi(t2)].

    This is the static-noise coefficient of the second Magnus term; it
    vanishes for second-order shapes but not for first-order ones.
    """
    psis = pulse.edge_angles
    cum = 0.0 + 0.0j    # F(x) = int_0^x e^{i psi}
    total = 0.0 + 0.0j  # int e^{i psi(x1)} conj(F(x1)) dx1
    for k, seg in enumerate(pulse.segments):
        dx = seg.end - seg.start
        p0, p1 = psis[k], psis[k + 1]
        e0 = cmath.exp(1j * p0)
        e1 = cmath.exp(1j * p1)
        if seg.amplitude_taup == 0.0:
            seg_int = dx * e0
            total += cum.conjugate() * seg_int + dx * dx / 2.0
        else:
            b = 2.0 * seg.amplitude_taup
            seg_int = (e1 - e0) / (1j * b)
            total += cum.conjugate() * seg_int + (dx - e0.conjugate() * seg_int) / (-1j * b)
        cum += seg_int
    return total.imag * pulse.tau_p**2


# -- anomalous integrals -------------------------------------------------------


def evaluate_i1(pulse: PiecewiseConstantPulse, g0: float = 1.0) -> float:
    """I_1 = g0^2 (S^2 + C^2) from the closed-form segment integrals."""
    s_val, c_val = first_order_integrals(pulse)
    return g0 * g0 * (s_val * s_val + c_val * c_val)


@lru_cache(maxsize=256)
def _i32_shape_kernel(segments: tuple[PulseSegment, ...],
                      rel_tol: float) -> float:
    """K = -int int |x1-x2| cos[psi(x1)-psi(x2)] over the unit square.

    Nested adaptive quadrature; the diagonal kink and the switching instants
    bound the inner subintervals, so every piece is smooth.  I_3/2 of a
    concrete pulse is a * K * tau_p^3.
    """
    shape = PiecewiseConstantPulse("shape", 1.0, segments)
    bounds = [0.0] + [s.end for s in segments]
    psi = shape.angle_at

    def inner(x1: float) -> float:
        p1 = psi(x1)
        acc = 0.0
        for j in range(len(segments)):
            lo = bounds[j]
            hi = min(bounds[j + 1], x1)
            if hi <= lo:
                break
            val, err = quad(
                lambda x2: (x1 - x2) * math.cos(p1 - psi(x2)),
                lo, hi, epsabs=1e-13, epsrel=1e-12, limit=100,
            )
            if err > 1e-9:
                # bail out instead of letting the outer rule grind on garbage
                raise QuadratureNotConverged(
                    f"inner integral error {err:.2e} at x1={x1:.4f}"
                )
            acc += val
        return acc

    total = 0.0
    err_budget = 0.0
    for i in range(len(segments)):
        val, err = quad(inner, bounds[i], bounds[i + 1],
                        epsabs=1e-12, epsrel=1e-11, limit=200)
        total += val
        err_budget += err
    kernel = -2.0 * total  # symmetric integrand: full square = 2x the triangle
    if err_budget > max(rel_tol * abs(kernel), 1e-13):
        raise QuadratureNotConverged(
            f"I_3/2 kernel error estimate {err_budget:.2e} exceeds tolerance "
            f"for {abs(kernel):.3e}"
        )
    return kernel


def evaluate_i32(pulse: PiecewiseConstantPulse, model: AutocorrelationModel,
                 rel_tol: float = I32_REL_TOL) -> float:
    """I_3/2 = -a int int |t1-t2| cos[psi(t1)-psi(t2)]; zero when a = 0."""
    a = model.cusp_coefficient
    if a == 0.0:
        return 0.0
    kernel = _i32_shape_kernel(pulse.segments, rel_tol)
    return a * kernel * pulse.tau_p**3


def anomalous_integrals(pulse: PiecewiseConstantPulse,
                        model: AutocorrelationModel) -> AnomalousIntegrals:
    return AnomalousIntegrals(
        i1=evaluate_i1(pulse, model.g0),
        i32=evaluate_i32(pulse, model),
        a=model.cusp_coefficient,
    )


def evaluate_mu2x(pulse: PiecewiseConstantPulse, noise: NoiseRealization) -> float:
    """Midpoint double Riemann sum of eta(t1) eta(t2) sin[psi(t1)-psi(t2)]
    over t2 < t1, evaluated in O(N) with prefix sums."""
    if not grid_is_aligned(pulse, noise.grid):
        raise GridMismatch("noise grid does not resolve the pulse's switching instants")
    grid = noise.grid
    psi = pulse.angles_on(grid.midpoints)
    weights = noise.values * grid.widths
    phase = np.exp(1j * psi)
    prefix = np.concatenate([[0.0 + 0.0j], np.cumsum(weights * phase.conj())[:-1]])
    return float(np.imag(np.sum(weights * phase * prefix)))


# -- no-go verification --------------------------------------------------------


def verify_nogo(pulse: PiecewiseConstantPulse, grid_n: int,
                model: Optional[AutocorrelationModel] = None) -> NoGoReport:
    """Discretize the kernel operators and check the positivity argument.

    Uses kernel-unit matrices (A_ij = |t_i - t_j|, B_ij = sgn(t_i - t_j));
    operator composition carries one dt factor per intermediate sum.  The
    identity residual is dt/2 on exact arithmetic, i.e. O(dt).
    """
    s_val, c_val = first_order_integrals(pulse)
    tol = FIRST_ORDER_TOL * pulse.tau_p
    if abs(s_val) > tol or abs(c_val) > tol:
        raise NotFirstOrder(
            f"{pulse.name}: S={s_val:.2e}, C={c_val:.2e} exceed {tol:.1e}"
        )

    tau = pulse.tau_p
    dt = tau / grid_n
    mids = (np.arange(grid_n) + 0.5) * dt
    psi = pulse.angles_on(mids)
    cosv = np.cos(psi)
    sinv = np.sin(psi)

    gap = mids[:, None] - mids[None, :]
    a_kernel = np.abs(gap)
    b_kernel = np.sign(gap)

    b_cos = (b_kernel @ cosv) * dt
    b_sin = (b_kernel @ sinv) * dt
    b_norm_cos = float(b_cos @ b_cos) * dt
    b_norm_sin = float(b_sin @ b_sin) * dt

    quad_a_cos = float(cosv @ (a_kernel @ cosv)) * dt * dt
    quad_a_sin = float(sinv @ (a_kernel @ sinv)) * dt * dt

    btb = (b_kernel.T @ b_kernel) * dt   # discretized B^dag B in kernel units
    residual = np.abs(a_kernel - 0.5 * (tau - btb)).max()

    i32_kernel = 0.5 * (b_norm_cos + b_norm_sin)
    return NoGoReport(
        grid_n=grid_n,
        dt=dt,
        quad_a_cos=quad_a_cos,
        quad_a_sin=quad_a_sin,
        b_norm_cos=b_norm_cos,
        b_norm_sin=b_norm_sin,
        identity_residual=float(residual),
        i32_kernel=i32_kernel,
        i32_discrete=None if model is None else model.cusp_coefficient * i32_kernel,
    )


# -- constrained minimization of I_3/2 -----------------------------------------


def _pulse_from_params(bounds_interior: np.ndarray, amps: np.ndarray,
                       name: str = "designed") -> PiecewiseConstantPulse:
    edges = np.concatenate([[0.0], bounds_interior, [1.0]])
    segs = tuple(
        PulseSegment(float(edges[k]), float(edges[k + 1]), float(amps[k]))
        for k in range(len(amps))
    )
    return PiecewiseConstantPulse(name, 1.0, segs, order=1)


def _constraints_frac(bounds_interior: np.ndarray, amps: np.ndarray) -> np.ndarray:
    """(total angle - pi, S, C) in fraction units, closed form."""
    pulse = _pulse_from_params(bounds_interior, amps)
    s_val, c_val = first_order_integrals(pulse)
    return np.array([pulse.total_angle - math.pi, s_val, c_val])


def _project_boundaries(raw: np.ndarray, min_gap: float) -> np.ndarray:
    b = np.sort(np.clip(np.asarray(raw, dtype=float), min_gap, 1.0 - min_gap))
    for k in range(1, b.size):
        b[k] = max(b[k], b[k - 1] + min_gap)
    b[-1] = min(b[-1], 1.0 - min_gap)
    for k in range(b.size - 2, -1, -1):
        b[k] = min(b[k], b[k + 1] - min_gap)
    return b


def minimize_i32(n_segments: int, model: AutocorrelationModel,
                 budget: int = 15000, restarts: int = 10, seed: int = 0,
                 v_max_taup: float = DEFAULT_V_MAX_TAUP,
                 grid_n: int = 192, min_gap: float = 5e-3,
                 initial: Optional[PiecewiseConstantPulse] = None):
    """Minimize I_3/2 over n-segment pi-pulses with S = C = 0.

    Restarted compass pattern search on a penalized objective (penalty weight
    times 10 per restart), followed by a least-squares polish of the
    amplitudes onto the constraint manifold; candidates are scored with the
    adaptive-quadrature I_3/2.  Amplitudes are bounded by ``v_max_taup`` so
    that shrinking the support cannot shrink I_3/2 without limit.

    Returns (best_pulse, i32_min) with the pulse at tau_p = 1.

    Raises NoFeasiblePoint when no restart ends within the constraint
    tolerance 1e-8.
    """
    if n_segments < 3:
        raise ValueError("need at least 3 segments")
    if model.cusp_coefficient == 0.0:
        raise ValueError("I_3/2 vanishes identically for analytic models")

    dx = 1.0 / grid_n
    mids = (np.arange(grid_n) + 0.5) * dx
    a_kernel = np.abs(mids[:, None] - mids[None, :])

    def disc_kernel(bounds_interior, amps) -> float:
        pulse = _pulse_from_params(bounds_interior, amps)
        psi = pulse.angles_on(mids)
        cosv = np.cos(psi)
        sinv = np.sin(psi)
        return -(cosv @ (a_kernel @ cosv) + sinv @ (a_kernel @ sinv)) * dx * dx

    def objective(theta, weight) -> float:
        b = _project_boundaries(theta[: n_segments - 1], min_gap)
        amps = np.clip(theta[n_segments - 1:], -v_max_taup, v_max_taup)
        cons = _constraints_frac(b, amps)
        return disc_kernel(b, amps) + weight * float(cons @ cons)

    def polish(theta):
        """Pull the amplitudes onto (angle, S, C) = 0 with minimal motion."""
        b = _project_boundaries(theta[: n_segments - 1], min_gap)
        amps0 = np.clip(theta[n_segments - 1:], -v_max_taup, v_max_taup)
        sol = least_squares(
            lambda amps: _constraints_frac(b, amps), amps0,
            bounds=(-v_max_taup, v_max_taup), xtol=1e-15, ftol=1e-15, gtol=1e-15,
        )
        return b, sol.x, _constraints_frac(b, sol.x)

    def pattern_search(theta0, weight, evals_left) -> np.ndarray:
        theta = theta0.copy()
        best = objective(theta, weight)
        scale = np.concatenate([np.full(n_segments - 1, 0.05),
                                np.full(n_segments, 0.5)])
        step = 1.0
        used = 1
        while used < evals_left and step > 1e-9:
            improved = False
            for k in range(theta.size):
                for sign in (+1.0, -1.0):
                    trial = theta.copy()
                    trial[k] += sign * step * scale[k]
                    val = objective(trial, weight)
                    used += 1
                    if val < best - 1e-15:
                        theta, best = trial, val
                        improved = True
                        break
                if used >= evals_left:
                    break
            if not improved:
                step *= 0.5
        return theta

    candidates = []
    if initial is not None:
        if len(initial.segments) != n_segments:
            raise ValueError("initial pulse has wrong segment count")
        edges = np.array([s.end for s in initial.segments[:-1]])
        amps = np.array([s.amplitude_taup for s in initial.segments])
        b, amps_p, cons = polish(np.concatenate([edges, amps]))
        if np.abs(cons).max() <= FEASIBILITY_TOL:
            candidates.append((b, amps_p))

    for r in range(restarts):
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(entropy=seed, spawn_key=(r,))))
        if initial is not None and r == 0:
            theta0 = np.concatenate([
                np.array([s.end for s in initial.segments[:-1]]),
                np.array([s.amplitude_taup for s in initial.segments]),
            ])
        else:
            theta0 = np.concatenate([
                np.sort(rng.uniform(min_gap, 1 - min_gap, n_segments - 1)),
                rng.uniform(-v_max_taup, v_max_taup, n_segments),
            ])
        weight = 1e2 * 10.0**r
        theta = pattern_search(theta0, weight, budget)
        b, amps_p, cons = polish(theta)
        if np.abs(cons).max() <= FEASIBILITY_TOL:
            candidates.append((b, amps_p))

    if not candidates:
        raise NoFeasiblePoint(
            f"no feasible {n_segments}-segment pulse within {restarts} restarts"
        )

    best_pulse = None
    best_val = math.inf
    for b, amps in candidates:
        pulse = _pulse_from_params(b, amps, name=f"designed-{n_segments}seg")
        val = evaluate_i32(pulse, model)
        if val < best_val:
            best_pulse, best_val = pulse, val
    return best_pulse, best_val
