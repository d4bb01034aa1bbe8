"""Measurements on a condensate state: Madelung fields, energies, PDFs, spectra."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .gpe import PhysicalParams
from .spectral import (SpectralGrid, fft, helmholtz_decompose, shell_spectrum,
                       spectral_gradient)

__all__ = [
    "EnergyBreakdown",
    "DensityPdf",
    "madelung",
    "momentum_density",
    "energy_breakdown",
    "total_energy",
    "quick_energy",
    "density_pdf",
    "compressible_spectrum",
    "spectrum_slope",
    "tail_exceedance",
    "REG_EPS",
]

#: Low-density regularization, in units of rho0.
REG_EPS = 1e-6


@dataclass
class EnergyBreakdown:
    """Volume-averaged energy components of one state.

    ``E_total`` is the direct quadrature of the Hamiltonian; the five
    components add up to it (the mean-flow kinetic term is folded into
    ``E_kin_inc``).
    """

    E_kin_inc: float
    E_kin_comp: float
    E_quantum: float
    E_int: float
    E_trap: float
    E_total: float
    mass: float
    t: float = 0.0
    omega: float = 0.0

    @property
    def E_kin(self) -> float:
        return self.E_kin_inc + self.E_kin_comp

    @property
    def component_sum(self) -> float:
        return self.E_kin_inc + self.E_kin_comp + self.E_quantum + self.E_int + self.E_trap

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class DensityPdf:
    bin_edges: np.ndarray
    counts: np.ndarray
    pdf: np.ndarray
    n_samples: int

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def integral(self) -> float:
        return float(np.sum(self.pdf * np.diff(self.bin_edges)))


def _grid_of(psi, grid):
    if grid is None:
        grid = psi.grid
        psi = psi.psi
    return psi, grid


def momentum_density(psi, grid: SpectralGrid | None = None,
                     params: PhysicalParams | None = None) -> np.ndarray:
    """j = -(i hbar/2)(psi* grad psi - psi grad psi*) = hbar Im(psi* grad psi)."""
    psi, grid = _grid_of(psi, grid)
    params = params or PhysicalParams()
    dpsi = spectral_gradient(psi, grid, masked=False)
    return params.hbar * np.imag(np.conj(psi)[None] * dpsi)


def madelung(psi, grid: SpectralGrid | None = None,
             params: PhysicalParams | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Mass density rho = m|psi|^2 and velocity v = j/rho.

    Where rho drops below ``REG_EPS * rho0`` the division uses that floor
    instead, so v stays bounded in near-vacuum regions.
    """
    psi, grid = _grid_of(psi, grid)
    params = params or PhysicalParams()
    rho = params.m * (psi.real**2 + psi.imag**2)
    j = momentum_density(psi, grid, params)
    floor = REG_EPS * params.rho0
    return rho, j / np.maximum(rho, floor)[None]


def total_energy(psi, V, params: PhysicalParams, grid: SpectralGrid | None = None) -> float:
    """Volume average of hbar^2/2m |grad psi|^2 + g/2 |psi|^4 + V |psi|^2."""
    psi, grid = _grid_of(psi, grid)
    psi_hat = fft(psi)
    return quick_energy(psi_hat, psi, V, params, grid).E_total


def _kinetic_from_hat(psi_hat, grid, params) -> float:
    # Parseval; the Nyquist planes are excluded to match spectral_gradient.
    k = np.where(np.arange(grid.N) == grid.N // 2, 0.0, grid.k) ** 2
    k2 = k[:, None, None] + k[None, :, None] + k[None, None, :]
    p = np.abs(psi_hat) ** 2
    return 0.5 * params.hbar * params.hbar_over_m * float(np.sum(k2 * p)) / grid.n_points**2


def quick_energy(psi_hat, psi, V, params: PhysicalParams, grid: SpectralGrid,
                 t: float = 0.0, omega: float = 0.0) -> EnergyBreakdown:
    """Total energy and coarse components without the Madelung split.

    Kinetic and quantum parts are lumped into ``E_kin_inc``; the other
    kinetic fields are zero.  Used where only the total matters.
    """
    dens = psi.real**2 + psi.imag**2
    kin = _kinetic_from_hat(psi_hat, grid, params)
    e_int = 0.5 * params.g * float(np.mean(dens * dens))
    e_trap = float(np.mean(V * dens)) if np.ndim(V) else float(V) * float(np.mean(dens))
    return EnergyBreakdown(E_kin_inc=kin, E_kin_comp=0.0, E_quantum=0.0, E_int=e_int,
                           E_trap=e_trap, E_total=kin + e_int + e_trap,
                           mass=float(np.mean(dens)), t=t, omega=omega)


def energy_breakdown(psi, V, params: PhysicalParams, grid: SpectralGrid | None = None,
                     t: float = 0.0, omega: float = 0.0) -> EnergyBreakdown:
    """Five-way energy decomposition of one state.

    The kinetic part uses w = sqrt(rho) v = j / sqrt(rho + eps), split by the
    Helmholtz projection.  The quantum part takes everything else in
    hbar^2/2m |grad psi|^2, i.e. pointwise

        hbar^2/2m (|Re(psi* grad psi)|^2 + eps'|grad psi|^2) / (|psi|^2 + eps')

    which is hbar^2/2m^2 |grad sqrt(rho)|^2 away from near-vacuum points, and
    makes the components add up to the Hamiltonian quadrature exactly.
    """
    psi, grid = _grid_of(psi, grid)
    hbar, m = params.hbar, params.m
    psi_hat = fft(psi)
    dpsi = spectral_gradient(psi, grid, masked=False)
    dens = psi.real**2 + psi.imag**2
    eps = REG_EPS * params.rho0 / m
    cross = np.conj(psi)[None] * dpsi
    denom = dens + eps
    grad2 = np.sum(dpsi.real**2 + dpsi.imag**2, axis=0)
    re2 = np.sum(cross.real**2, axis=0)

    # w = sqrt(rho) v with rho = m|psi|^2 and j = hbar Im(psi* grad psi)
    w = (hbar / np.sqrt(m)) * cross.imag / np.sqrt(denom)[None]
    w_c, w_i = helmholtz_decompose(w, grid)
    w_mean = w.mean(axis=(1, 2, 3))

    e_kc = 0.5 * float(np.mean(np.sum(w_c**2, axis=0)))
    e_ki = 0.5 * float(np.mean(np.sum(w_i**2, axis=0))) + 0.5 * float(w_mean @ w_mean)
    e_q = 0.5 * hbar * hbar / m * float(np.mean((re2 + eps * grad2) / denom))
    e_int = 0.5 * params.g * float(np.mean(dens * dens))
    e_trap = float(np.mean(V * dens)) if np.ndim(V) else float(V) * float(np.mean(dens))
    e_tot = _kinetic_from_hat(psi_hat, grid, params) + e_int + e_trap
    return EnergyBreakdown(E_kin_inc=e_ki, E_kin_comp=e_kc, E_quantum=e_q, E_int=e_int,
                           E_trap=e_trap, E_total=e_tot, mass=float(np.mean(dens)),
                           t=t, omega=omega)


def compressible_field(psi, params: PhysicalParams, grid: SpectralGrid | None = None) -> np.ndarray:
    """Compressible part of w = sqrt(rho) v."""
    psi, grid = _grid_of(psi, grid)
    dpsi = spectral_gradient(psi, grid, masked=False)
    dens = psi.real**2 + psi.imag**2
    eps = REG_EPS * params.rho0 / params.m
    w = (params.hbar / np.sqrt(params.m)) * np.imag(np.conj(psi)[None] * dpsi) / np.sqrt(dens + eps)[None]
    return helmholtz_decompose(w, grid)[0]


def compressible_spectrum(psi, params: PhysicalParams,
                          grid: SpectralGrid | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Shell spectrum E_c(k) of the compressible kinetic energy."""
    psi, grid = _grid_of(psi, grid)
    return shell_spectrum(compressible_field(psi, params, grid), grid)


def spectrum_slope(k: np.ndarray, E: np.ndarray, k_lo: float, k_hi: float) -> float:
    """Least-squares slope of log E against log k over shells k_lo..k_hi."""
    sel = (k >= k_lo) & (k <= k_hi) & (E > 0)
    if sel.sum() < 2:
        raise ValueError("need at least two non-empty shells in the fit range")
    return float(np.polyfit(np.log(k[sel]), np.log(E[sel]), 1)[0])


def trap_region(grid: SpectralGrid, radius: float | None = None) -> np.ndarray:
    """Boolean mask of grid points with r < radius (default: r_c = 0.8 pi L)."""
    radius = 0.8 * np.pi * grid.L if radius is None else radius
    return grid.radius() < radius


def density_pdf(rho: np.ndarray, grid: SpectralGrid, bins: int = 64, radius: float | None = None,
                full_domain: bool = False, value_range: tuple[float, float] | None = None) -> DensityPdf:
    """Histogram of the mass density, normalized to unit integral.

    By default only points inside the harmonic part of the trap (r < r_c)
    are counted; ``full_domain=True`` uses every grid point.  A field with
    a single value yields a one-bin PDF.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    vals = rho.ravel() if full_domain else rho[trap_region(grid, radius)]
    if vals.size == 0:
        raise ValueError("empty sampling region")
    lo, hi = value_range if value_range is not None else (float(vals.min()), float(vals.max()))
    if not hi > lo:
        half = 0.5 * max(abs(lo), 1.0) * 1e-9
        edges = np.array([lo - half, lo + half])
        counts = np.array([vals.size])
    else:
        counts, edges = np.histogram(vals, bins=bins, range=(lo, hi))
    pdf = counts / (vals.size * np.diff(edges))
    return DensityPdf(bin_edges=edges, counts=counts, pdf=pdf, n_samples=int(vals.size))


def tail_exceedance(rho: np.ndarray, grid: SpectralGrid, factor: float = 1.5,
                    radius: float | None = None, reference: float | None = None) -> float:
    """Fraction of in-trap points with rho above ``factor`` times the median.

    ``reference`` replaces the median when comparing two states on a common
    threshold.
    """
    vals = rho[trap_region(grid, radius)]
    ref = float(np.median(vals)) if reference is None else reference
    return float(np.mean(vals > factor * ref))
