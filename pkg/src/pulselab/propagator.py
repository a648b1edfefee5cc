"""Exact unitary evolution of a driven two-level system under dephasing noise.

Per step the Hamiltonian eta sigma_z + v sigma_x is constant (midpoint-sampled
noise, piecewise-constant drive), so each step propagator is the closed-form
matrix exponential

    exp(-i dt (eta sz + v sx)) = cos(h dt) 1 - i sin(h dt) (v sx + eta sz)/h,

with h = sqrt(v^2 + eta^2); the full propagator is the time-ordered product
U_tot = U_N ... U_2 U_1 (latest step leftmost).  No further integration error
enters beyond the step-constant noise model itself.

For Monte-Carlo ensembles the same product is evaluated in SU(2) quaternion
components (w, x, y, z) with U = w 1 - i (x sx + y sy + z sz), which keeps
tiny deviations from the ideal pulse representable without cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GridMismatch
from .noise import NoiseRealization, TimeGrid
from .pulses import PiecewiseConstantPulse, grid_is_aligned

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)

#: below this phase the sin/cos of the step rotation switch to series
SMALL_PHASE = 1e-8


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Bloch vector of the evolved state after every step (and at t=0)."""

    times: np.ndarray          # (N+1,)
    bloch: np.ndarray          # (N+1, 3)

    def component(self, axis: str) -> np.ndarray:
        return self.bloch[:, "xyz".index(axis)]


@dataclass(frozen=True, eq=False)
class UnitaryResult:
    u_total: np.ndarray
    u_correcting: np.ndarray
    trajectory: Optional[Trajectory] = None


def ideal_pulse() -> np.ndarray:
    """Instantaneous pi rotation about x: exp(-i pi/2 sx) = -i sx."""
    return -1j * SIGMA_X.copy()


def step_propagator(eta: float, v: float, dt: float) -> np.ndarray:
    """Closed-form exp(-i dt (eta sz + v sx)); identity in the h -> 0 limit."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    h = float(np.hypot(eta, v))
    phase = h * dt
    if phase < SMALL_PHASE:
        # 3-term series for cos and sin(x)/x; exact enough below 1e-8
        c = 1.0 - phase * phase / 2.0 + phase**4 / 24.0
        s_over_h = dt * (1.0 - phase * phase / 6.0 + phase**4 / 120.0)
    else:
        c = np.cos(phase)
        s_over_h = np.sin(phase) / h
    return c * IDENTITY - 1j * s_over_h * (v * SIGMA_X + eta * SIGMA_Z)


def _check_alignment(pulse: PiecewiseConstantPulse, grid: TimeGrid) -> None:
    if not grid_is_aligned(pulse, grid):
        raise GridMismatch(
            f"grid (span {grid.tau_p}) does not resolve every switching "
            f"instant of {pulse.name} (tau_p {pulse.tau_p})"
        )


def bloch_of_state(u: np.ndarray, r0: np.ndarray) -> np.ndarray:
    """Bloch vector of U rho0 U^dag for rho0 = (1 + r0.sigma)/2."""
    rho0 = 0.5 * (IDENTITY + r0[0] * SIGMA_X + r0[1] * SIGMA_Y + r0[2] * SIGMA_Z)
    rho = u @ rho0 @ u.conj().T
    return np.array([np.trace(rho @ SIGMA_X).real,
                     np.trace(rho @ SIGMA_Y).real,
                     np.trace(rho @ SIGMA_Z).real])


def evolve(pulse: PiecewiseConstantPulse, noise: NoiseRealization,
           initial_bloch=None) -> UnitaryResult:
    """Evolve one noise realization through the pulse.

    Returns the total propagator, the correcting factor P^dag U_tot relative
    to the ideal instantaneous pulse, and (when ``initial_bloch`` is given)
    the Bloch-vector trajectory of that initial state after every step.
    """
    grid = noise.grid
    _check_alignment(pulse, grid)
    mids = grid.midpoints
    widths = grid.widths
    v_mid = pulse.amplitudes_on(mids)

    track = initial_bloch is not None
    if track:
        r0 = np.asarray(initial_bloch, dtype=float)
        bloch = np.empty((grid.n_steps + 1, 3))
        bloch[0] = r0

    u = IDENTITY.copy()
    for i in range(grid.n_steps):
        u = step_propagator(noise.values[i], v_mid[i], widths[i]) @ u
        if track:
            bloch[i + 1] = bloch_of_state(u, r0)

    trajectory = Trajectory(grid.boundaries.copy(), bloch) if track else None
    u_correcting = ideal_pulse().conj().T @ u
    return UnitaryResult(u, u_correcting, trajectory)


# -- vectorized ensemble evolution (quaternion components) --------------------


def evolve_ensemble(pulse: PiecewiseConstantPulse, grid: TimeGrid,
                    eta_block: np.ndarray) -> tuple[np.ndarray, ...]:
    """Evolve many realizations at once.

    ``eta_block`` has shape (n_steps, m): row i holds the step-i noise values
    of all m realizations.  Returns the quaternion components (w, x, y, z) of
    U_tot per realization, with U = w 1 - i (x sx + y sy + z sz).
    """
    _check_alignment(pulse, grid)
    if eta_block.shape[0] != grid.n_steps:
        raise GridMismatch(
            f"noise block has {eta_block.shape[0]} rows for {grid.n_steps} steps")
    m = eta_block.shape[1]
    v_mid = pulse.amplitudes_on(grid.midpoints)
    widths = grid.widths

    w = np.ones(m)
    x = np.zeros(m)
    y = np.zeros(m)
    z = np.zeros(m)
    for i in range(grid.n_steps):
        eta = eta_block[i]
        v = v_mid[i]
        dt = widths[i]
        h = np.hypot(eta, v)
        phase = h * dt
        c = np.cos(phase)
        small = phase < SMALL_PHASE
        if np.any(small):
            s_over_h = np.where(
                small,
                dt * (1.0 - phase * phase / 6.0),
                np.sin(phase) / np.where(h == 0.0, 1.0, h),
            )
        else:
            s_over_h = np.sin(phase) / h
        sx = v * s_over_h
        sz = eta * s_over_h
        # left-multiply by the step quaternion (c, sx, 0, sz)
        w, x, y, z = (c * w - sx * x - sz * z,
                      c * x + sx * w - sz * y,
                      c * y - sx * z + sz * x,
                      c * z + sx * y + sz * w)
    return w, x, y, z


def quaternion_of_unitary(u: np.ndarray) -> tuple[float, float, float, float]:
    """Components (w, x, y, z) with U = w 1 - i (x sx + y sy + z sz).

    Exact for special unitaries; a global phase leaks into imaginary parts
    that are discarded here.
    """
    w = 0.5 * (u[0, 0] + u[1, 1]).real
    z = 0.5 * (u[1, 1] - u[0, 0]).imag
    x = -0.5 * (u[0, 1] + u[1, 0]).imag
    y = 0.5 * (u[1, 0] - u[0, 1]).real
    return w, x, y, z


def unitary_of_quaternion(w, x, y, z) -> np.ndarray:
    return np.array([[w - 1j * z, -y - 1j * x],
                     [y - 1j * x, w + 1j * z]])
