"""Correlated Gaussian dephasing noise on a time grid.

The noise field eta(t) is a stationary Gaussian process defined by its
autocorrelation g(t) = mean[eta(t')eta(t'+t)].  Discretized realizations are
drawn by eigendecomposition of the covariance matrix G_ij = g(t_i - t_j)
evaluated at step midpoints: with G = O D O^T, the transform O sqrt(D)
maps i.i.d. standard normals onto the correlated samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EigenvalueTooNegative

GAUSSIAN = "gaussian"
EXPONENTIAL = "exponential"

#: Default relative band in which negative eigenvalues are treated as round-off.
EPS_CLIP = 1e-10


@dataclass(frozen=True)
class AutocorrelationModel:
    """Two-point function of the dephasing field.

    kind
        ``"gaussian"``: g(t) = g0^2 exp(-gamma^2 t^2)  (analytic at t=0)
        ``"exponential"``: g(t) = g0^2 exp(-gamma |t|)  (cusp at t=0)
    g0
        Noise amplitude; g(0) = g0^2 sets the energy scale.
    gamma
        Decay rate of the correlation (>= 0).
    eta0
        Constant mean of eta(t); acts like a static frequency offset.
    """

    kind: str
    g0: float = 1.0
    gamma: float = 0.0
    eta0: float = 0.0

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, EXPONENTIAL):
            raise ValueError(f"unknown autocorrelation kind: {self.kind!r}")
        if self.g0 <= 0.0:
            raise ValueError("g0 must be positive (g(0) = g0^2 > 0)")
        if self.gamma < 0.0:
            raise ValueError("gamma must be non-negative")

    def evaluate(self, t):
        """g(t); accepts scalars or arrays and is even in t by construction."""
        t = np.asarray(t, dtype=float)
        if self.kind == GAUSSIAN:
            out = self.g0**2 * np.exp(-(self.gamma**2) * t * t)
        else:
            out = self.g0**2 * np.exp(-self.gamma * np.abs(t))
        return out if out.ndim else float(out)

    @property
    def cusp_coefficient(self) -> float:
        """Coefficient a of the -a|t| term in the expansion of g around 0.

        Zero for any analytic autocorrelation; g0^2 * gamma for the
        exponential model (matching its Taylor expansion g0^2 - g0^2 gamma |t| + ...).
        """
        if self.kind == EXPONENTIAL:
            return self.g0**2 * self.gamma
        return 0.0


def evaluate_autocorrelation(model: AutocorrelationModel, t):
    """Evaluate g(t) for the given model."""
    return model.evaluate(t)


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing step boundaries 0 = t_0 < ... < t_N = tau_p.

    Noise samples live at step midpoints and are held constant per step;
    midpoint sampling keeps the quadrature bias of time integrals at O(dt^2).
    """

    boundaries: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        object.__setattr__(self, "boundaries", b)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("need at least two boundaries")
        if b[0] != 0.0:
            raise ValueError("grid must start at 0")
        if np.any(np.diff(b) <= 0.0):
            raise ValueError("boundaries must be strictly increasing")

    @property
    def tau_p(self) -> float:
        return float(self.boundaries[-1])

    @property
    def n_steps(self) -> int:
        return self.boundaries.size - 1

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.boundaries[1:] + self.boundaries[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    @classmethod
    def uniform(cls, tau_p: float, n_steps: int) -> "TimeGrid":
        if n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        return cls(np.linspace(0.0, tau_p, n_steps + 1))

    def refined(self, factor: int) -> "TimeGrid":
        """Split every step into `factor` uniform substeps (boundaries kept)."""
        if factor < 1:
            raise ValueError("factor must be >= 1")
        if factor == 1:
            return self
        b = self.boundaries
        pieces = [b[:1]]
        for k in range(self.n_steps):
            pieces.append(np.linspace(b[k], b[k + 1], factor + 1)[1:])
        return TimeGrid(np.concatenate(pieces))


@dataclass(frozen=True, eq=False)
class NoiseRealization:
    """One discretized sample path: eta(t) constant on step i, value values[i]."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape != (self.grid.n_steps,):
            raise ValueError(
                f"values shape {v.shape} does not match grid step count {self.grid.n_steps}"
            )

    @classmethod
    def constant(cls, grid: TimeGrid, value: float) -> "NoiseRealization":
        return cls(grid, np.full(grid.n_steps, float(value)))


class NoiseSampler:
    """Draws correlated Gaussian noise realizations on a fixed grid.

    The eigendecomposition is computed once at construction and shared by
    every draw; the sampler itself is immutable apart from its default RNG
    stream.  Independent reproducible streams for parallel workers come from
    ``sample_block(..., stream=(k, ...))``, which derives a counter-based
    generator from (seed, stream) and is therefore insensitive to scheduling.
    """

    def __init__(self, model: AutocorrelationModel, grid: TimeGrid, seed: int,
                 eps_clip: float = EPS_CLIP):
        self.model = model
        self.grid = grid
        self.seed = int(seed)
        self.eps_clip = float(eps_clip)

        mids = grid.midpoints
        gap = mids[:, None] - mids[None, :]
        cov = model.evaluate(gap)
        # evaluate() is even in the gap, so cov is symmetric entry-for-entry
        eigvals, eigvecs = np.linalg.eigh(cov)
        lam_max = float(eigvals[-1])
        floor = -self.eps_clip * lam_max
        if np.any(eigvals < floor):
            worst = float(eigvals.min())
            raise EigenvalueTooNegative(
                f"eigenvalue {worst:.3e} below clip band {floor:.3e}; "
                "covariance matrix is not numerically positive semidefinite"
            )
        eigvals = np.clip(eigvals, 0.0, None)
        self.covariance = cov
        self.transform = eigvecs * np.sqrt(eigvals)[None, :]
        self._rng = self._generator()

    def _generator(self, *stream: int) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(stream))
        return np.random.Generator(np.random.Philox(seq))

    def sample(self) -> NoiseRealization:
        """Draw the next realization from the sampler's own stream."""
        z = self._rng.standard_normal(self.grid.n_steps)
        return NoiseRealization(self.grid, self.transform @ z + self.model.eta0)

    def sample_block(self, count: int, stream: tuple[int, ...] = ()) -> np.ndarray:
        """Draw `count` realizations at once; shape (n_steps, count).

        A given (seed, stream) pair always yields the same block, so chunked
        parallel sampling reproduces bit-identically in any schedule.
        """
        rng = self._generator(*stream)
        z = rng.standard_normal((self.grid.n_steps, count))
        return self.transform @ z + self.model.eta0


def build_sampler(model: AutocorrelationModel, grid: TimeGrid, seed: int,
                  eps_clip: float = EPS_CLIP) -> NoiseSampler:
    """Construct a sampler (forms G, eigendecomposes, stores O sqrt(D))."""
    return NoiseSampler(model, grid, seed, eps_clip=eps_clip)
