"""Fourier machinery on the periodic cube [-pi, pi)^3 L.

FFT normalization: forward transforms are unnormalized, inverse transforms
carry the 1/N^3 factor (the ``scipy.fft`` default).  "Normalized" Fourier
amplitudes are ``fftn(f) / N**3``, so that ``mean(|f|^2) = sum(|f_hat|^2)``.
Every spectrum and Parseval statement in the package uses that convention.

Arrays are indexed ``[ix, iy, iz]``; vector fields carry a leading axis of
length 3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

__all__ = [
    "SpectralGrid",
    "make_grid",
    "fft",
    "ifft",
    "dealias",
    "gradient",
    "laplacian",
    "divergence",
    "curl",
    "helmholtz_decompose",
    "shell_spectrum",
    "continued_radius",
    "continued_potential",
]


def fft(f: np.ndarray) -> np.ndarray:
    """Forward 3D FFT over the last three axes (unnormalized)."""
    return sfft.fftn(f, axes=(-3, -2, -1))


def ifft(f_hat: np.ndarray) -> np.ndarray:
    """Inverse 3D FFT over the last three axes (scaled by 1/N^3)."""
    return sfft.ifftn(f_hat, axes=(-3, -2, -1))


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Geometry and wavenumber tables of a periodic N^3 grid.

    Use :func:`make_grid` rather than calling the constructor.
    """

    N: int
    L: float
    dx: float
    x: np.ndarray  # 1D coordinates, -pi*L .. pi*L - dx
    k: np.ndarray  # 1D wavenumbers m/L, FFT order
    k2: np.ndarray
    dealias_mask: np.ndarray
    k_max: float
    axis_mask: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.N, self.N, self.N)

    @property
    def volume(self) -> float:
        return (2.0 * np.pi * self.L) ** 3

    @property
    def n_points(self) -> int:
        return self.N**3

    def kvec(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable per-axis wavenumber arrays (kx, ky, kz)."""
        k = self.k
        return k[:, None, None], k[None, :, None], k[None, None, :]

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = self.x
        return x[:, None, None], x[None, :, None], x[None, None, :]

    def radius(self) -> np.ndarray:
        X, Y, Z = self.coords()
        return np.sqrt(X * X + Y * Y + Z * Z)

    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    def n_retained(self) -> int:
        return int(self.dealias_mask.sum())


def make_grid(N: int, L: float = 1.0) -> SpectralGrid:
    """Build a cubic grid of side 2*pi*L with N points per axis.

    The 2/3 rule keeps the integer mode m iff |m| < N/3 (strict); the mask
    is the tensor product of the per-axis masks.
    """
    if not isinstance(N, (int, np.integer)) or N < 8 or N % 2:
        raise ValueError(f"N must be an even integer >= 8, got {N!r}")
    if not L > 0:
        raise ValueError(f"L must be positive, got {L!r}")
    N = int(N)
    dx = 2.0 * np.pi * L / N
    x = (np.arange(N) - N // 2) * dx
    m = sfft.fftfreq(N, d=1.0 / N)
    k = m / L
    axis_mask = np.abs(m) < N / 3.0
    k2 = k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2
    mask = axis_mask[:, None, None] & axis_mask[None, :, None] & axis_mask[None, None, :]
    k_max = float(np.abs(m[axis_mask]).max()) / L
    for arr in (x, k, k2, mask, axis_mask):
        arr.setflags(write=False)
    return SpectralGrid(N=N, L=float(L), dx=dx, x=x, k=k, k2=k2,
                        dealias_mask=mask, k_max=k_max, axis_mask=axis_mask)


def dealias(field_hat: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """Zero every mode outside the 2/3-rule mask (idempotent)."""
    return np.where(grid.dealias_mask, field_hat, 0.0)


def _derivative_factors(grid: SpectralGrid, masked: bool):
    # Nyquist is dropped from first derivatives so real fields stay real.
    ik = 1j * np.where(np.arange(grid.N) == grid.N // 2, 0.0, grid.k)
    if masked:
        ik = ik * grid.axis_mask
    return ik[:, None, None], ik[None, :, None], ik[None, None, :]


def spectral_gradient(f: np.ndarray, grid: SpectralGrid, masked: bool = True) -> np.ndarray:
    """Gradient of a scalar field; ``masked=False`` skips dealiasing."""
    f_hat = fft(f)
    ikx, iky, ikz = _derivative_factors(grid, masked)
    if masked:
        f_hat = dealias(f_hat, grid)
    out = ifft(np.stack([ikx * f_hat, iky * f_hat, ikz * f_hat]))
    return out.real if np.isrealobj(f) else out


def gradient(f: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """Exact spectral gradient of the dealiased field, shape (3, N, N, N)."""
    return spectral_gradient(f, grid, masked=True)


def laplacian(f: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    out = ifft(-grid.k2 * dealias(fft(f), grid))
    return out.real if np.isrealobj(f) else out


def divergence(w: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    ikx, iky, ikz = _derivative_factors(grid, masked=False)
    w_hat = fft(w)
    out = ifft(ikx * w_hat[0] + iky * w_hat[1] + ikz * w_hat[2])
    return out.real if np.isrealobj(w) else out


def curl(w: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    ikx, iky, ikz = _derivative_factors(grid, masked=False)
    w_hat = fft(w)
    out = ifft(np.stack([
        iky * w_hat[2] - ikz * w_hat[1],
        ikz * w_hat[0] - ikx * w_hat[2],
        ikx * w_hat[1] - iky * w_hat[0],
    ]))
    return out.real if np.isrealobj(w) else out


def helmholtz_decompose(w: np.ndarray, grid: SpectralGrid) -> tuple[np.ndarray, np.ndarray]:
    """Split a vector field into curl-free and divergence-free parts.

    The projection acts on every Fourier mode of ``w`` (no truncation), so
    ``w = w_c + w_i + mean(w)`` holds to roundoff.  The k = 0 mode (the
    spatial mean) belongs to neither part; callers that need it take
    ``w.mean(axis=(1, 2, 3))``.

    Returns
    -------
    (w_c, w_i)
        Compressible (curl-free) and incompressible (divergence-free)
        components, same shape as ``w``.
    """
    # Nyquist components are zeroed so the projector commutes with the
    # real-field conjugate symmetry and matches `divergence`/`curl`.
    k = np.where(np.arange(grid.N) == grid.N // 2, 0.0, grid.k)
    kx, ky, kz = k[:, None, None], k[None, :, None], k[None, None, :]
    w_hat = fft(w)
    k2 = kx * kx + ky * ky + kz * kz
    k2 = np.where(k2 == 0.0, 1.0, k2)
    kdotw = (kx * w_hat[0] + ky * w_hat[1] + kz * w_hat[2]) / k2
    wc_hat = np.stack([kx * kdotw, ky * kdotw, kz * kdotw])
    wc_hat[:, 0, 0, 0] = 0.0
    wi_hat = w_hat - wc_hat
    wi_hat[:, 0, 0, 0] = 0.0
    wc, wi = ifft(wc_hat), ifft(wi_hat)
    if np.isrealobj(w):
        wc, wi = wc.real, wi.real
    return wc, wi


def shell_spectrum(w: np.ndarray, grid: SpectralGrid) -> tuple[np.ndarray, np.ndarray]:
    """Shell-summed energy spectrum of a vector (or scalar) field.

    Shells have width 1/L and are centred on integers: mode k' belongs to
    shell ``round(|k'| L)``.  With normalized amplitudes the result obeys
    ``E.sum() == 0.5 * mean(|w|^2)``.

    Returns
    -------
    k_shell, E
        Shell wavenumbers ``n / L`` for n = 0 .. max and shell energies.
    """
    w_hat = fft(w) / grid.n_points
    dens = np.abs(w_hat) ** 2
    if dens.ndim == 4:
        dens = dens.sum(axis=0)
    shell = np.rint(np.sqrt(grid.k2) * grid.L).astype(np.int64)
    E = 0.5 * np.bincount(shell.ravel(), weights=dens.ravel())
    return np.arange(E.size) / grid.L, E


def _smoothstep5(u):
    return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)


def _smoothstep5_integral(u):
    return u**4 * (2.5 - 3.0 * u + u * u)


def continued_radius(grid: SpectralGrid, r_c: float | None = None,
                     r_s: float | None = None) -> np.ndarray:
    """Effective radius R(r) that equals r for r <= r_c and is flat past r_s.

    dR/dr = 1 - S((r - r_c)/(r_s - r_c)) with S the quintic smoothstep, so R
    is C^3 and saturates at r_c + (r_s - r_c)/2.  Defaults: r_c = 0.8*pi*L,
    r_s = pi*L (the nearest domain face).
    """
    r_c = 0.8 * np.pi * grid.L if r_c is None else r_c
    r_s = np.pi * grid.L if r_s is None else r_s
    if not 0 < r_c < r_s:
        raise ValueError("need 0 < r_c < r_s")
    width = r_s - r_c
    r = grid.radius()
    u = np.clip((r - r_c) / width, 0.0, 1.0)
    R = r_c + width * (u - _smoothstep5_integral(u))
    return np.where(r <= r_c, r, R)


def continued_potential(grid: SpectralGrid, omega: float, m: float = 1.0,
                        r_c: float | None = None, r_s: float | None = None) -> np.ndarray:
    """Harmonic trap 0.5 m omega^2 R(r)^2 made periodic by continuation."""
    if omega < 0:
        raise ValueError("omega must be >= 0")
    R = continued_radius(grid, r_c, r_s)
    return 0.5 * m * omega**2 * R * R
