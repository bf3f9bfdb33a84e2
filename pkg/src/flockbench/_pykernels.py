"""Pure numpy implementation of the pairwise interaction kernels.

Mirrors ``_ckernels.pyx`` function for function; used when the compiled
extension is unavailable or ``FLOCKBENCH_PURE_PYTHON=1`` is set.

Every function takes the kernel as the tuple produced by ``Kernel.packed()``:
``(code, beta, c, table_r, table_psi, tail)``.
"""

import numpy as np

from .errors import CollisionError, SingularWeightError

BACKEND = "python"


def psi(r, code, beta, c, tr, tp, tail):
    r = np.asarray(r, dtype=float)
    if code == 0:
        return c * (1.0 + r) ** (-beta)
    if code == 1:
        return c * (1.0 + r * r) ** (-beta)
    if code == 2:
        return np.full_like(r, c)
    out = np.interp(r, tr, tp)
    if tail == tail:  # not NaN
        r_last = tr[-1]
        out = np.where(r > r_last, tp[-1] * ((1.0 + r) / (1.0 + r_last)) ** (-tail), out)
    return out


def _differences(x):
    diff = x[None, :, :] - x[:, None, :]  # [i, j] = x_j - x_i
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return diff, dist


def psi_matrix(x, code, beta, c, tr, tp, tail):
    """``W[i, j] = psi(|x_j - x_i|)``."""
    _, dist = _differences(np.asarray(x, dtype=float))
    return psi(dist, code, beta, c, tr, tp, tail)


def alignment(x, v, w, K, code, beta, c, tr, tp, tail):
    """``dv_i = K * sum_j w_j psi(|x_j - x_i|) (v_j - v_i)``."""
    W = psi_matrix(x, code, beta, c, tr, tp, tail) * w[None, :]
    return K * (W @ v - W.sum(axis=1)[:, None] * v)


def motsch_tadmor(x, v, K, code, beta, c, tr, tp, tail):
    """``dv_i = K * sum_j psi_ij (v_j - v_i) / sum_k psi_ik`` (self term included)."""
    W = psi_matrix(x, code, beta, c, tr, tp, tail)
    denom = W.sum(axis=1)
    bad = np.flatnonzero(denom <= 0.0)
    if bad.size:
        raise SingularWeightError(f"Motsch-Tadmor normalisation vanishes for agent {bad[0]}")
    return K * ((W @ v) / denom[:, None] - v)


def bonding(x, v, K0, K1, K2, R, literal, min_dist, code, beta, c, tr, tp, tail):
    """Alignment + velocity projection + spring force between all pairs."""
    n = x.shape[0]
    diff, dist = _differences(x)
    if K1 != 0.0 or K2 != 0.0:
        off = dist.copy()
        np.fill_diagonal(off, np.inf)
        if off.min() < min_dist:
            i, j = np.argwhere(off < min_dist)[0]
            raise CollisionError(min(i, j), max(i, j), dist[i, j])
    safe = dist + np.eye(n)
    vdiff = v[None, :, :] - v[:, None, :]
    W = psi(dist, code, beta, c, tr, tp, tail)
    out = (K0 / n) * np.einsum("ij,ijk->ik", W, vdiff)
    if K1 != 0.0:
        proj = np.einsum("ijk,ijk->ij", vdiff, diff) / safe
        out += (K1 / n) * np.einsum("ij,ijk->ik", proj, diff)
    if K2 != 0.0:
        stretch = dist - 2.0 * R
        if not literal:
            stretch = stretch / safe
        np.fill_diagonal(stretch, 0.0)
        out += (K2 / n) * np.einsum("ij,ijk->ik", stretch, diff)
    return out
