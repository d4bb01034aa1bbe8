"""Isochoric strokes: stochastic Ginzburg-Landau relaxation toward Gibbs states.

The update is explicit Euler-Maruyama on the dealiased Fourier amplitudes,

    psi_k += dt * [-(hbar k^2/2m - mu/hbar) psi_k - (1/hbar) P[(g|psi|^2 + V) psi]_k]
             + noise_k

with independent complex Gaussian noise on every retained mode, of variance
2 dt T / (V hbar) in normalized amplitudes (T is k_B T in code energy units,
V the box volume).  The chemical potential follows dmu/dt = -gamma (rho_bar - rho_m).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import quick_energy
from . import _kernels as K
from .gpe import NumericalAbort, PhysicalParams, WaveFunction
from .spectral import SpectralGrid, continued_radius, fft, ifft

__all__ = [
    "BathParams",
    "StationarityCriterion",
    "StrokeLimit",
    "ThermalTrace",
    "Thermalizer",
    "sgle_step",
    "mu_update",
    "thermalize",
    "density_mean_in_trap",
    "thomas_fermi_state",
    "make_rng",
]

log = logging.getLogger(__name__)


def make_rng(seed: int, member: int = 0) -> np.random.Generator:
    """Independent, reproducible stream for ensemble member ``member``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(member,))))


@dataclass
class BathParams:
    """Bath temperature and chemical-potential controller settings.

    ``T`` is k_B T in code units (beta = 1/T).  ``volume`` defaults to the
    grid volume (2 pi L)^3 when left as None.
    """

    T: float
    mu0: float
    gamma: float = 2.0
    rho_target: float = 0.0125
    dt: float = 5e-3
    seed: int = 0
    volume: float | None = None

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("T must be >= 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.volume is not None and not self.volume > 0:
            raise ValueError("volume must be > 0")


@dataclass
class StationarityCriterion:
    """Relative linear trend of the total energy over a trailing window.

    The run is stationary once ``min_steps`` have elapsed and a straight-line
    fit over the last ``window`` samples changes by less than
    ``rel_slope_tol`` of the window mean across the window.
    """

    window: int = 2000
    rel_slope_tol: float = 1e-3
    min_steps: int = 20000
    max_steps: int = 400000
    stride: int = 10

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.stride < 1 or self.min_steps < 0 or self.max_steps < 1:
            raise ValueError("stride, min_steps and max_steps must be positive")

    def is_met(self, energies, steps_done: int) -> bool:
        if steps_done < self.min_steps or len(energies) < self.window:
            return False
        return relative_trend(np.asarray(energies[-self.window:])) < self.rel_slope_tol


def relative_trend(y: np.ndarray) -> float:
    """|slope| * len / |mean| of a least-squares line through ``y``."""
    n = y.size
    x = np.arange(n) - 0.5 * (n - 1)
    slope = float(x @ (y - y.mean()) / (x @ x))
    mean = abs(float(y.mean()))
    if mean == 0.0:
        return 0.0 if slope == 0.0 else math.inf
    return abs(slope) * n / mean


@dataclass
class ThermalTrace:
    step: list = field(default_factory=list)
    t: list = field(default_factory=list)
    E_total: list = field(default_factory=list)
    rho_bar: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    stationary: bool = False
    mu_final: float = 0.0

    COLUMNS = ("step", "t", "E_total", "rho_bar", "mu")

    def append(self, step, t, E, rho_bar, mu):
        self.step.append(step)
        self.t.append(t)
        self.E_total.append(E)
        self.rho_bar.append(rho_bar)
        self.mu.append(mu)

    def as_array(self) -> np.ndarray:
        return np.column_stack([np.asarray(getattr(self, c), dtype=float) for c in self.COLUMNS])


class Thermalizer:
    """Euler-Maruyama SGLE integrator holding the spectral state and mu.

    ``psi_hat`` uses the unnormalized FFT convention; the noise amplitude is
    scaled accordingly.
    """

    def __init__(self, wf: WaveFunction, omega: float, params: PhysicalParams, bath: BathParams,
                 rng: np.random.Generator | None = None, trap_r2: np.ndarray | None = None,
                 potential: np.ndarray | None = None, mu: float | None = None,
                 control_mu: bool = True, noise: bool = True, drift: bool = True):
        grid = wf.grid
        self.grid = grid
        self.params = params
        self.bath = bath
        self.rng = rng if rng is not None else make_rng(bath.seed)
        self.omega = omega
        if potential is None:
            trap_r2 = continued_radius(grid) ** 2 if trap_r2 is None else trap_r2
            potential = 0.5 * params.m * omega**2 * trap_r2
        self.V = potential
        self.mu = bath.mu0 if mu is None else mu
        self.control_mu = control_mu
        self.noise = noise
        self.drift = drift
        self.t = wf.t
        self.psi_hat = fft(wf.psi) * grid.dealias_mask
        self.psi = ifft(self.psi_hat)
        self._idx = np.flatnonzero(grid.dealias_mask)
        volume = bath.volume if bath.volume is not None else grid.volume
        # normalized variance 2 dt T/(V hbar); unnormalized amplitudes carry N^3
        self.noise_std = grid.n_points * math.sqrt(2.0 * bath.dt * bath.T / (volume * params.hbar))
        self._kin = np.ascontiguousarray(0.5 * params.hbar_over_m * grid.k2 * grid.dealias_mask)
        self._mask_over_hbar = np.ascontiguousarray(grid.dealias_mask / params.hbar, dtype=np.float64)
        self._Vflat = np.ascontiguousarray(np.broadcast_to(self.V, grid.shape), dtype=np.float64).reshape(-1)
        self._tmp = np.empty(grid.shape, np.complex128)

    @property
    def rho_bar(self) -> float:
        return self.params.m * float(np.sum(np.abs(self.psi_hat) ** 2)) / self.grid.n_points**2

    def state(self) -> WaveFunction:
        return WaveFunction(self.psi.copy(), self.grid, self.t)

    def step(self) -> None:
        dt = self.bath.dt
        rho_bar = None
        if self.drift:
            psi = self.psi
            K.cubic_term(psi.reshape(-1), self._Vflat, self.params.g, self._tmp.reshape(-1))
            nl = fft(self._tmp)
            ph = np.empty_like(self.psi_hat)
            acc = K.sgle_update(self.psi_hat.reshape(-1), nl.reshape(-1), self._kin.reshape(-1),
                                self._mask_over_hbar.reshape(-1), self.mu, dt, ph.reshape(-1))
            rho_bar = self.params.m * acc / self.grid.n_points**2
        else:
            ph = self.psi_hat.copy()
        if self.noise and self.noise_std > 0.0:
            xi = self.rng.standard_normal((self._idx.size, 2))
            flat = ph.reshape(-1)
            flat[self._idx] += (self.noise_std * math.sqrt(0.5)) * (xi[:, 0] + 1j * xi[:, 1])
        if self.control_mu:
            self.mu = mu_update(self.mu, self.rho_bar if rho_bar is None else rho_bar, self.bath)
        self.psi_hat = ph
        self.psi = ifft(ph)
        self.t += dt

    def energy(self) -> float:
        return quick_energy(self.psi_hat, self.psi, self.V, self.params, self.grid).E_total

    def run(self, criterion: StrokeLimit | StationarityCriterion, trace: ThermalTrace | None = None,
            callback=None) -> ThermalTrace:
        """Step until ``criterion`` is met or ``max_steps`` is reached."""
        trace = trace if trace is not None else ThermalTrace()
        n = 0
        trace.append(0, self.t, self.energy(), self.rho_bar, self.mu)
        while n < criterion.max_steps:
            self.step()
            n += 1
            if n % criterion.stride == 0:
                if not np.isfinite(self.psi_hat).all():
                    raise NumericalAbort(f"non-finite field in thermalization at step {n}")
                trace.append(n, self.t, self.energy(), self.rho_bar, self.mu)
                if callback is not None:
                    callback(self, n)
                if criterion.is_met(trace.E_total, n):
                    trace.stationary = True
                    break
        trace.mu_final = self.mu
        return trace


@dataclass
class StrokeLimit:
    """Fixed-length run: ``max_steps`` steps, never declared stationary."""

    max_steps: int
    stride: int = 10

    def is_met(self, energies, steps_done) -> bool:
        return False


def sgle_step(wf: WaveFunction, V: np.ndarray, params: PhysicalParams, bath: BathParams,
              rng: np.random.Generator, mu: float | None = None) -> WaveFunction:
    """One Euler-Maruyama step at fixed mu (defaults to ``bath.mu0``)."""
    th = Thermalizer(wf, 0.0, params, bath, rng=rng, potential=V, mu=mu, control_mu=False)
    th.step()
    if not np.isfinite(th.psi).all():
        raise NumericalAbort("non-finite field in SGLE step", state=wf)
    return th.state()


def mu_update(mu: float, rho_bar: float, bath: BathParams) -> float:
    """Explicit Euler step of dmu/dt = -gamma (rho_bar - rho_target)."""
    return mu - bath.gamma * (rho_bar - bath.rho_target) * bath.dt


def thermalize(wf: WaveFunction, omega: float, params: PhysicalParams, bath: BathParams,
               criterion: StationarityCriterion | None = None, rng: np.random.Generator | None = None,
               mu: float | None = None, trap_r2: np.ndarray | None = None,
               potential: np.ndarray | None = None) -> tuple[WaveFunction, ThermalTrace]:
    """Relax ``wf`` in the trap of frequency ``omega`` until stationary.

    Returns the final state and the trace of (E, rho_bar, mu).  If the step
    cap is hit first, the final state is returned with
    ``trace.stationary = False``.
    """
    criterion = criterion or StationarityCriterion()
    th = Thermalizer(wf, omega, params, bath, rng=rng, trap_r2=trap_r2, potential=potential, mu=mu)
    trace = th.run(criterion)
    if not trace.stationary:
        log.warning("thermalization hit max_steps=%d without stationarity", criterion.max_steps)
    return th.state(), trace


def density_mean_in_trap(psi, grid: SpectralGrid | None = None, r0: float = 0.5,
                         m: float = 1.0) -> float:
    """Mean of rho = m|psi|^2 over grid points with r < r0 (in units of L)."""
    if grid is None:
        grid, psi = psi.grid, psi.psi
    region = grid.radius() < r0 * grid.L
    if not region.any():
        raise ValueError(f"no grid points within r0={r0}")
    vals = psi[region]
    return m * float(np.mean(vals.real**2 + vals.imag**2))


def thomas_fermi_mu(rho_mean: float, omega: float, params: PhysicalParams, volume: float) -> float:
    """Chemical potential of the Thomas-Fermi profile holding mass rho_mean * volume."""
    M = rho_mean * volume / params.m
    # M = (8 pi / 15) mu R^3 / g with R = sqrt(2 mu / m) / omega
    c = (8.0 * math.pi / 15.0) * (2.0 / params.m) ** 1.5 / (params.g * omega**3)
    return (M / c) ** 0.4


def thomas_fermi_state(grid: SpectralGrid, omega: float, params: PhysicalParams,
                       rho_mean: float) -> tuple[WaveFunction, float]:
    """Dealiased Thomas-Fermi initial guess in the continued trap, with its mu."""
    mu = thomas_fermi_mu(rho_mean, omega, params, grid.volume)
    V = 0.5 * params.m * omega**2 * continued_radius(grid) ** 2
    psi = np.sqrt(np.maximum(mu - V, 0.0) / params.g).astype(np.complex128)
    psi = ifft(fft(psi) * grid.dealias_mask)
    # match the requested mean density exactly
    psi *= math.sqrt(rho_mean / (params.m * float(np.mean(np.abs(psi) ** 2))))
    return WaveFunction(psi, grid), mu
