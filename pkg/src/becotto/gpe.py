"""Gross-Pitaevskii evolution for the adiabatic strokes.

Code units: lengths in L, speeds in U (the sound speed at alpha = 1), the
reference density rho0 = 1 and the particle mass m = 1.  With c0 = 1 and
xi0 = 0.0707 the only remaining constant is hbar/m = sqrt(2) c0 xi0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import _kernels as K
from .spectral import SpectralGrid, continued_radius, fft, ifft

__all__ = [
    "PhysicalParams",
    "StrokeSchedule",
    "WaveFunction",
    "NumericalAbort",
    "gpe_rhs",
    "rk4_step",
    "run_adiabatic_stroke",
    "GPEStepper",
]


class NumericalAbort(RuntimeError):
    """Raised when a field develops non-finite values.

    ``state`` holds the last finite wave function so callers can dump it.
    """

    def __init__(self, message: str, state: "WaveFunction | None" = None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class PhysicalParams:
    """Interaction strength and the constants derived from it.

    ``g = alpha * g0`` with ``g0 = m c0^2 / rho0``.  ``hbar_over_m`` does not
    depend on alpha: it equals sqrt(2) c xi for every interaction strength.
    """

    alpha: float = 1.0
    c0: float = 1.0
    xi0: float = 0.0707
    rho0: float = 1.0
    m: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.c0 <= 0 or self.xi0 <= 0 or self.rho0 <= 0 or self.m <= 0:
            raise ValueError("c0, xi0, rho0 and m must be positive")

    @property
    def g0(self) -> float:
        return self.m * self.c0**2 / self.rho0

    @property
    def g(self) -> float:
        return self.alpha * self.g0

    @property
    def hbar_over_m(self) -> float:
        return math.sqrt(2.0) * self.c0 * self.xi0

    @property
    def hbar(self) -> float:
        return self.m * self.hbar_over_m

    @property
    def sound_speed(self) -> float:
        return math.sqrt(self.g * self.rho0 / self.m)

    @property
    def healing_length(self) -> float:
        return self.hbar / math.sqrt(2.0 * self.m * self.rho0 * self.g)

    def with_alpha(self, alpha: float) -> "PhysicalParams":
        return replace(self, alpha=alpha)


@dataclass(frozen=True)
class StrokeSchedule:
    """Linear trap-frequency ramp omega_start -> omega_end over tau."""

    omega_start: float
    omega_end: float
    tau: float
    dt: float = 2.5e-3

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.dt > self.tau:
            raise ValueError("dt must not exceed tau")
        if self.omega_start < 0 or self.omega_end < 0:
            raise ValueError("trap frequencies must be >= 0")

    @property
    def n_steps(self) -> int:
        # Round up so the effective step never exceeds dt and the ramp ends at tau.
        return max(1, math.ceil(self.tau / self.dt - 1e-9))

    @property
    def dt_effective(self) -> float:
        return self.tau / self.n_steps

    def omega(self, t: float) -> float:
        s = min(max(t / self.tau, 0.0), 1.0)
        return self.omega_start + (self.omega_end - self.omega_start) * s


@dataclass
class WaveFunction:
    """The condensate field on a grid, in physical space."""

    psi: np.ndarray
    grid: SpectralGrid
    t: float = 0.0

    def __post_init__(self):
        if self.psi.shape != self.grid.shape:
            raise ValueError(f"psi shape {self.psi.shape} does not match grid {self.grid.shape}")
        self.psi = np.asarray(self.psi, dtype=np.complex128)

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.psi.copy(), self.grid, self.t)

    def mass(self) -> float:
        """Volume-averaged |psi|^2."""
        return float(np.mean(self.psi.real**2 + self.psi.imag**2))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.psi).all())


class GPEStepper:
    """RK4 integrator working on dealiased spectral amplitudes.

    ``psi_hat`` is kept in the unnormalized FFT convention.  The trap enters
    as ``0.5 m omega(t)^2 R(r)^2`` with ``R`` the continued radius, so only
    the prefactor changes in time.
    """

    def __init__(self, grid: SpectralGrid, params: PhysicalParams, trap_r2: np.ndarray | None = None):
        self.grid = grid
        self.params = params
        self.mask = grid.dealias_mask
        if trap_r2 is None:
            trap_r2 = continued_radius(grid) ** 2
        self.trap_shape = np.ascontiguousarray(0.5 * params.m * trap_r2, dtype=np.float64)
        self._kin = np.ascontiguousarray(0.5 * params.hbar_over_m * grid.k2 * self.mask, dtype=np.float64)
        self._mask_over_hbar = np.ascontiguousarray(self.mask / params.hbar, dtype=np.float64)
        shape = grid.shape
        self._tmp = np.empty(shape, np.complex128)
        self._stage = np.empty(shape, np.complex128)
        self._k = [np.empty(shape, np.complex128) for _ in range(4)]
        self._V = [np.empty(shape, np.float64) for _ in range(3)]

    def potential(self, omega: float) -> np.ndarray:
        return omega * omega * self.trap_shape

    def rhs_hat(self, psi_hat: np.ndarray, V: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        out = np.empty(self.grid.shape, np.complex128) if out is None else out
        psi = ifft(psi_hat)
        V = np.ascontiguousarray(np.broadcast_to(V, psi.shape), dtype=np.float64)
        K.cubic_term(psi.reshape(-1), V.reshape(-1), self.params.g, self._tmp.reshape(-1))
        nl = fft(self._tmp)
        K.gpe_combine(np.ascontiguousarray(psi_hat).reshape(-1), nl.reshape(-1), self._kin.reshape(-1),
                      self._mask_over_hbar.reshape(-1), out.reshape(-1))
        return out

    def step(self, psi_hat: np.ndarray, t: float, dt: float,
             omega_of_t: Callable[[float], float]) -> np.ndarray:
        V0, Vh, V1 = self._V
        shape = self.trap_shape.reshape(-1)
        for Vbuf, tt in ((V0, t), (Vh, t + 0.5 * dt), (V1, t + dt)):
            om = omega_of_t(tt)
            K.scale_potential(shape, om * om, Vbuf.reshape(-1))
        k1, k2, k3, k4 = self._k
        x = psi_hat.reshape(-1)
        stage = self._stage.reshape(-1)
        self.rhs_hat(psi_hat, V0, k1)
        K.axpy(x, k1.reshape(-1), 0.5 * dt, stage)
        self.rhs_hat(self._stage, Vh, k2)
        K.axpy(x, k2.reshape(-1), 0.5 * dt, stage)
        self.rhs_hat(self._stage, Vh, k3)
        K.axpy(x, k3.reshape(-1), dt, stage)
        self.rhs_hat(self._stage, V1, k4)
        out = np.empty_like(psi_hat)
        K.rk4_finish(x, k1.reshape(-1), k2.reshape(-1), k3.reshape(-1), k4.reshape(-1),
                     dt / 6.0, out.reshape(-1))
        return out


def gpe_rhs(wf: WaveFunction, V: np.ndarray, params: PhysicalParams) -> np.ndarray:
    """Time derivative (1/i hbar)[-hbar^2 lap/2m + g|psi|^2 + V] psi, dealiased."""
    grid = wf.grid
    stepper = GPEStepper(grid, params, trap_r2=np.zeros(grid.shape))
    psi_hat = fft(wf.psi) * grid.dealias_mask
    return ifft(stepper.rhs_hat(psi_hat, V))


def _as_omega_fn(V_of_t, stepper: GPEStepper):
    """Accept either omega(t) or a potential V(t) and return a V(t) callable."""
    def V(t):
        val = V_of_t(t)
        return stepper.potential(val) if np.isscalar(val) else val
    return V


def rk4_step(wf: WaveFunction, V_of_t: Callable[[float], float | np.ndarray], dt: float,
             params: PhysicalParams) -> WaveFunction:
    """One classical RK4 step from ``wf.t`` to ``wf.t + dt``.

    ``V_of_t`` returns either a trap frequency (scalar) or a full potential
    array; it is sampled at t, t + dt/2 and t + dt.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    grid = wf.grid
    stepper = GPEStepper(grid, params)
    Vt = _as_omega_fn(V_of_t, stepper)
    V0, Vh, V1 = Vt(wf.t), Vt(wf.t + 0.5 * dt), Vt(wf.t + dt)
    psi_hat = fft(wf.psi) * grid.dealias_mask
    k1 = stepper.rhs_hat(psi_hat, V0)
    k2 = stepper.rhs_hat(psi_hat + 0.5 * dt * k1, Vh)
    k3 = stepper.rhs_hat(psi_hat + 0.5 * dt * k2, Vh)
    k4 = stepper.rhs_hat(psi_hat + dt * k3, V1)
    new_hat = psi_hat + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    psi = ifft(new_hat)
    if not np.isfinite(psi).all():
        raise NumericalAbort(f"non-finite field at t={wf.t + dt:.6g}", state=wf)
    return WaveFunction(psi, grid, wf.t + dt)


@dataclass
class Recorder:
    """Sampling cadence for energy series; ``stride`` counts RK4 steps."""

    stride: int = 10
    full_breakdown: bool = True

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass
class EnergySeries:
    """Time series of energy breakdowns along one stroke."""

    rows: list = field(default_factory=list)

    COLUMNS = ("t", "omega", "E_total", "E_kin_inc", "E_kin_comp",
               "E_quantum", "E_int", "E_trap", "mass")

    def append(self, breakdown) -> None:
        self.rows.append(breakdown)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def as_array(self) -> np.ndarray:
        return np.array([[getattr(r, c) for c in self.COLUMNS] for r in self.rows])


def run_adiabatic_stroke(wf: WaveFunction, schedule: StrokeSchedule, params: PhysicalParams,
                         recorder: Recorder | None = None) -> tuple[WaveFunction, EnergySeries]:
    """Integrate the GPE over one linear trap ramp.

    Time inside the stroke runs from 0 to ``schedule.tau``; the returned
    wave function carries ``wf.t + tau``.  The energy breakdown is recorded
    at t = 0, every ``recorder.stride`` steps, and at the end.

    Raises
    ------
    NumericalAbort
        If the field becomes non-finite; ``exc.state`` is the last good state.
    """
    from .diagnostics import energy_breakdown, quick_energy

    recorder = recorder or Recorder()
    grid = wf.grid
    stepper = GPEStepper(grid, params)
    n = schedule.n_steps
    dt = schedule.dt_effective
    t0 = wf.t
    series = EnergySeries()

    def record(psi_hat, step):
        t = step * dt
        om = schedule.omega(t)
        psi = ifft(psi_hat)
        V = stepper.potential(om)
        if recorder.full_breakdown:
            series.append(energy_breakdown(psi, V, params, grid, t=t, omega=om))
        else:
            series.append(quick_energy(psi_hat, psi, V, params, grid, t=t, omega=om))
        return psi

    psi_hat = fft(wf.psi) * grid.dealias_mask
    record(psi_hat, 0)
    good_psi, good_step = wf.psi, 0
    for step in range(1, n + 1):
        psi_hat = stepper.step(psi_hat, (step - 1) * dt, dt, schedule.omega)
        if step % recorder.stride == 0 or step == n:
            psi = record(psi_hat, step)
            if not np.isfinite(psi).all():
                last = WaveFunction(good_psi, grid, t0 + good_step * dt)
                raise NumericalAbort(f"non-finite field in stroke at step {step}", state=last)
            good_psi, good_step = psi, step
    return WaveFunction(good_psi, grid, t0 + schedule.tau), series
