"""Slow direct evaluations used as independent references in the tests."""
import numpy as np


def galerkin_rhs_direct(a, u, nu, N):
    """Quartic double sum: -4 pi^2 nu |k|^2 a(k) - 2 pi i sum_j (k . u(k - j)) a(j)."""
    L = (u.shape[-1] - 1) // 2
    out = np.zeros_like(a)
    for k1 in range(-N, N + 1):
        for k2 in range(-N, N + 1):
            acc = -4 * np.pi**2 * nu * (k1 * k1 + k2 * k2) * a[k1 + N, k2 + N]
            for j1 in range(-N, N + 1):
                for j2 in range(-N, N + 1):
                    d1, d2 = k1 - j1, k2 - j2
                    if abs(d1) > L or abs(d2) > L:
                        continue
                    ku = k1 * u[0, d1 + L, d2 + L] + k2 * u[1, d1 + L, d2 + L]
                    acc -= 2j * np.pi * ku * a[j1 + N, j2 + N]
            out[k1 + N, k2 + N] = acc
    return out


def _pair_tables(N, L):
    m = np.arange(-N, N + 1)
    K1, K2 = np.meshgrid(m, m, indexing="ij")
    k1, k2 = K1.ravel(), K2.ravel()
    d1 = k1[:, None] - k1[None, :]
    d2 = k2[:, None] - k2[None, :]
    inside = (np.abs(d1) <= L) & (np.abs(d2) <= L)
    return k1, k2, d1, d2, inside


def galerkin_rhs_dense(a, u, nu, N):
    """Same double sum as :func:`galerkin_rhs_direct`, as one dense (2N+1)^2 x (2N+1)^2 matrix."""
    L = (u.shape[-1] - 1) // 2
    k1, k2, d1, d2, inside = _pair_tables(N, L)
    i1, i2 = np.clip(d1 + L, 0, 2 * L), np.clip(d2 + L, 0, 2 * L)
    ku = k1[:, None] * u[0][i1, i2] + k2[:, None] * u[1][i1, i2]
    A = np.where(inside, ku, 0)
    out = -2j * np.pi * (A @ a.ravel()) - 4 * np.pi**2 * nu * (k1**2 + k2**2) * a.ravel()
    return out.reshape(a.shape)


def bilinear_dense(a, u, N, r):
    """``4 pi r sum_{|k| >= r > |j|} |a(k)| |u(k - j)| |a(j)|`` over all lattice pairs."""
    L = (u.shape[-1] - 1) // 2
    k1, k2, d1, d2, inside = _pair_tables(N, L)
    umag = np.sqrt(np.sum(np.abs(u) ** 2, axis=0))
    U = np.where(inside, umag[np.clip(d1 + L, 0, 2 * L), np.clip(d2 + L, 0, 2 * L)], 0.0)
    mod = np.hypot(k1, k2)
    amp = np.abs(a.ravel())
    outer = (mod >= r)[:, None] & (mod < r)[None, :]
    return 4 * np.pi * r * float(amp @ np.where(outer, U, 0.0) @ amp)
