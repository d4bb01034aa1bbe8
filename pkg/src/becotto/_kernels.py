"""Fused elementwise loops for the time steppers (flat contiguous arrays)."""

import numba as nb


@nb.njit(cache=True, fastmath=False)
def cubic_term(psi, V, g, out):
    """out = (g |psi|^2 + V) psi"""
    for i in range(psi.size):
        p = psi[i]
        out[i] = (g * (p.real * p.real + p.imag * p.imag) + V[i]) * p


@nb.njit(cache=True)
def gpe_combine(psi_hat, nl_hat, kin, mask_over_hbar, out):
    """out = -i (kin psi_hat + mask/hbar nl_hat)"""
    for i in range(psi_hat.size):
        z = kin[i] * psi_hat[i] + mask_over_hbar[i] * nl_hat[i]
        out[i] = complex(z.imag, -z.real)


@nb.njit(cache=True)
def axpy(x, y, c, out):
    """out = x + c y"""
    for i in range(x.size):
        out[i] = x[i] + c * y[i]


@nb.njit(cache=True)
def rk4_finish(x, k1, k2, k3, k4, c, out):
    """out = x + c (k1 + 2 k2 + 2 k3 + k4)"""
    for i in range(x.size):
        out[i] = x[i] + c * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])


@nb.njit(cache=True)
def sgle_update(psi_hat, nl_hat, kin, mask_over_hbar, mu, dt, out):
    """out = psi_hat - dt (kin psi_hat + mask/hbar (nl_hat - mu psi_hat)); returns sum |psi_hat|^2"""
    acc = 0.0
    for i in range(psi_hat.size):
        p = psi_hat[i]
        acc += p.real * p.real + p.imag * p.imag
        out[i] = p - dt * (kin[i] * p + mask_over_hbar[i] * (nl_hat[i] - mu * p))
    return acc


@nb.njit(cache=True)
def scale_potential(shape, factor, out):
    for i in range(shape.size):
        out[i] = factor * shape[i]
