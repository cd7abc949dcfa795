"""Dense Hermitian-matrix kernel.

Every function accepts either a single matrix or a stack of matrices
(leading batch axes), because the net scans evaluate thousands of small
problems at once.
"""

from __future__ import annotations

import numpy as np

TOL_HERM = 1e-10
PSD_FLOOR = -1e-9
TRACE_TOL = 1e-9


class ParameterError(ValueError):
    """Raised when an argument is outside the documented domain."""


def hermitize(x):
    """Return (X + X^dagger) / 2."""
    x = np.asarray(x)
    return 0.5 * (x + np.conj(np.swapaxes(x, -1, -2)))


def is_hermitian(x, tol=TOL_HERM):
    x = np.asarray(x)
    if x.ndim < 2 or x.shape[-1] != x.shape[-2]:
        return False
    return bool(np.max(np.abs(x - np.conj(np.swapaxes(x, -1, -2))), initial=0.0) <= tol)


def is_psd(x, floor=PSD_FLOOR):
    return bool(np.all(np.linalg.eigvalsh(hermitize(x)) >= floor))


def is_density(x, floor=PSD_FLOOR, trace_tol=TRACE_TOL):
    x = hermitize(x)
    return is_psd(x, floor) and abs(np.trace(x).real - 1.0) <= trace_tol


def schatten_norm(x, alpha):
    """Schatten-alpha norm ``(sum_i sigma_i**alpha)**(1/alpha)``.

    ``alpha`` may be ``np.inf``.  Hermitian input is handled through
    ``eigvalsh``; anything else goes through singular values.  Leading batch
    axes are preserved.
    """
    if not alpha >= 1:
        raise ParameterError(f"schatten_norm needs alpha >= 1, got {alpha}")
    x = np.asarray(x)
    if is_hermitian(x, 1e-12):
        sv = np.abs(np.linalg.eigvalsh(hermitize(x)))
    else:
        sv = np.linalg.svd(x, compute_uv=False)
    return _pnorm_last(sv, alpha)


def _pnorm_last(v, alpha):
    v = np.abs(v)
    if np.isinf(alpha):
        return np.max(v, axis=-1)
    top = np.max(v, axis=-1, keepdims=True)
    safe = np.where(top > 0, top, 1.0)
    # rescale before the power to avoid overflow for large alpha
    return safe[..., 0] * np.sum((v / safe) ** alpha, axis=-1) ** (1.0 / alpha)


def vector_norm(v, q):
    """l_q norm over the last axis (``q`` may be ``np.inf``)."""
    if not q >= 1:
        raise ParameterError(f"vector_norm needs q >= 1, got {q}")
    return _pnorm_last(np.asarray(v), q)


def op_norm(x):
    """Largest singular value (largest |eigenvalue| for Hermitian input)."""
    return schatten_norm(x, np.inf)


def top_eigenpair(x):
    """Largest eigenvalue and a unit eigenvector of a Hermitian matrix.

    Works on stacks.  Eigenvalues come back ascending from ``eigh``, so the
    last column is taken; for a degenerate top eigenvalue that choice is
    whatever LAPACK returns for the fixed input, which keeps it
    deterministic.
    """
    w, v = np.linalg.eigh(hermitize(x))
    return w[..., -1], v[..., :, -1]


def projector(v):
    v = np.asarray(v)
    return v[..., :, None] * np.conj(v[..., None, :])


def simplex_project(v):
    """Euclidean projection onto the probability simplex (sort and threshold).

    Operates on the last axis, so a stack of vectors is projected row by row.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ParameterError("simplex_project needs finite entries")
    n = v.shape[-1]
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - css / ind > 0
    rho = np.count_nonzero(cond, axis=-1)
    theta = np.take_along_axis(css, (rho - 1)[..., None], axis=-1) / rho[..., None]
    return np.maximum(v - theta, 0.0)


def l1_ball_project(v, radius=1.0):
    """Euclidean projection of real vectors onto the l_1 ball."""
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    inside = np.sum(a, axis=-1, keepdims=True) <= radius
    w = simplex_project(a / radius) * radius
    return np.where(inside, v, np.sign(v) * w)


def project_to_density(x):
    """Frobenius-nearest density matrix: eigendecompose, project the spectrum."""
    w, v = np.linalg.eigh(hermitize(x))
    w = simplex_project(w)
    return (v * w[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def project_to_s1_ball(x):
    """Frobenius-nearest Hermitian matrix with trace norm at most one."""
    w, v = np.linalg.eigh(hermitize(x))
    w = l1_ball_project(w)
    return (v * w[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def partial_trace(m, side, d1, d2):
    """Trace out subsystem ``side`` ("A" or "B") of an operator on C^d1 (x) C^d2."""
    m = np.asarray(m)
    if m.shape[-2:] != (d1 * d2, d1 * d2):
        raise ParameterError(f"expected a {d1 * d2}x{d1 * d2} operator, got {m.shape[-2:]}")
    t = m.reshape(m.shape[:-2] + (d1, d2, d1, d2))
    if side == "B":
        return np.einsum("...ijkj->...ik", t)
    if side == "A":
        return np.einsum("...ijil->...jl", t)
    raise ParameterError(f"side must be 'A' or 'B', got {side!r}")


def kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def random_unitary(d, rng):
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_pure_state(d, rng):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_density(d, rng, rank=None):
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(d, rng, scale=1.0):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * hermitize(g)
