"""Sample-and-verify sparsification of decompositions.

Both routines draw terms i.i.d. with probabilities proportional to their
weight, reweight so the sample mean is unbiased, and then check the
concentration event directly.  A failed check triggers a fresh sample from
the next retry stream, so the outcome is a deterministic function of the
seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .feascheck import TargetNorm
from .matlib import ParameterError, hermitize, op_norm
from .model import ZERO_Y, BanachDescriptor, GeneralDecomposition, OneWayLOCC, normalize_locc


class SparsificationFailed(RuntimeError):
    def __init__(self, msg, deviations):
        self.deviations = deviations
        super().__init__(f"{msg}; observed deviations {deviations}")


@dataclass
class SparsifyInfo:
    """What a sparsification run did and what it verified."""

    samples: int
    distinct: int
    retries: int
    delta: float
    deviations: dict = field(default_factory=dict)
    certified: bool = True
    skipped: bool = False
    indices: tuple = ()  # original term index of each output term


def locc_sample_count(d1, d2, eps):
    delta = eps / 3
    return math.ceil(8 * d1**2 * d2**2 * math.log(2 * d1 * d2) / delta**2)


def sparsify_locc(m: OneWayLOCC, eps, seed=0, max_retries=64, return_info=False):
    """Replace ``m`` by a measurement with at most n' terms and ``||M - M'|| <= eps``.

    Every check here is an exact operator-norm computation.
    """
    if not 0 < eps < 1:
        raise ParameterError(f"eps must lie in (0, 1), got {eps}")
    orig = np.flatnonzero(op_norm(hermitize(m.Y)) >= ZERO_Y) if m.n else np.zeros(0, dtype=int)
    m = normalize_locc(m)
    d1, d2 = m.d1, m.d2
    delta = eps / 3
    n_samp = locc_sample_count(d1, d2, eps)
    W = _tr(m.X) * _tr(m.Y)  # tr(X_i (x) Y_i)
    trM = float(W.sum())
    if m.n == 0 or trM <= 0:
        empty = OneWayLOCC(d1, d2, np.zeros((0, d1, d1), complex), np.zeros((0, d2, d2), complex))
        info = SparsifyInfo(n_samp, 0, 0, delta)
        return (empty, info) if return_info else empty

    p = W / trM
    M = m.operator()
    sumX = np.sum(m.X, axis=0)
    last = {}
    for retry in range(max_retries):
        gen = _rng.stream(seed, "sparsify-locc", retry)
        counts = np.bincount(gen.choice(m.n, size=n_samp, p=p), minlength=m.n)
        used = np.flatnonzero(counts)
        w = counts[used] / (n_samp * p[used])
        X = m.X[used] * w[:, None, None]
        Y = m.Y[used]
        A = np.einsum("iab,icd->acbd", X, Y).reshape(d1 * d2, -1)
        B = np.sum(X, axis=0)
        # E[B] is sum_i X_i, which is the identity only for a complete POVM
        devA = float(op_norm(hermitize(A - M)))
        devB = float(op_norm(hermitize(B - sumX)))
        last = {"A": devA, "B": devB}
        if devA > delta or devB > delta:
            continue
        out = OneWayLOCC(d1, d2, X / (1 + delta), Y.copy())
        final = float(op_norm(hermitize(out.operator() - M)))
        last["final"] = final
        if final > eps:
            continue
        info = SparsifyInfo(n_samp, len(used), retry, delta, last, indices=tuple(int(i) for i in orig[used]))
        return (out, info) if return_info else out
    raise SparsificationFailed(f"no verified sample in {max_retries} retries", last)


def _tr(mats):
    return np.trace(mats, axis1=-2, axis2=-1).real


def general_sample_count(d, s, delta, c_const=1.0):
    k = math.ceil(c_const * d**2 * (d + s) / delta**2 - 1e-9)
    if k < 1:
        raise ParameterError(f"sample count {k} < 1 (c_const={c_const}, delta={delta})")
    return k


def channel_gap(X, coeff, Y, desc: BanachDescriptor, restarts=20, iters=50, seed=0):
    """Heuristic ``max_rho || sum_i coeff_i tr[X_i rho] Y_i ||_B``.

    The objective is convex in ``rho`` so the maximum sits at a pure state;
    each restart repeatedly moves to the top eigenvector of the linearized
    objective, which never decreases it.
    """
    from .oracle import maximize_convex_over_states

    target = TargetNorm(desc, np.asarray(Y))
    Xc = np.asarray(X) * np.asarray(coeff)[:, None, None]
    val, _ = maximize_convex_over_states(Xc, target, restarts=restarts, iters=iters, seed=seed)
    return val


def sparsify_general(g: GeneralDecomposition, desc: BanachDescriptor, delta, seed=0, c_const=1.0,
                     max_retries=64, restarts=20, return_info=False):
    """Sparsify ``rho -> sum_i tr[X_i rho] Y_i`` to about ``c d^2 (d+s) / delta^2`` terms.

    ``sum X'_j <= (1 + delta) I`` is checked exactly.  The channel distance is
    estimated by multi-start local search and is not certified.
    """
    if not delta > 0:
        raise ParameterError("delta must be positive")
    d = g.d1
    k = general_sample_count(d, desc.s, delta, c_const)
    g = normalize_general(g, desc)
    p = _tr(g.X) / d
    null = max(0.0, 1.0 - p.sum())
    probs = np.append(p, null)
    probs = probs / probs.sum()
    last = {}
    for retry in range(max_retries):
        gen = _rng.stream(seed, "sparsify-general", retry)
        counts = np.bincount(gen.choice(g.n + 1, size=k, p=probs), minlength=g.n + 1)[: g.n]
        used = np.flatnonzero(counts)
        w = np.zeros(g.n)
        w[used] = counts[used] / (k * p[used])
        Xs = g.X[used] * w[used][:, None, None]
        top = float(np.linalg.eigvalsh(hermitize(np.sum(Xs, axis=0)))[-1]) if used.size else 0.0
        last = {"sumX": top}
        if top > 1 + delta + 1e-12:
            continue
        gap = channel_gap(g.X, w - 1.0, g.Y, desc, restarts=restarts, seed=_mix(seed, retry))
        last["gap"] = gap
        if gap > delta:
            continue
        out = GeneralDecomposition(d, Xs / (1 + delta), g.Y[used].copy())
        info = SparsifyInfo(k, len(used), retry, delta, last, certified=False)
        return (out, info) if return_info else out
    raise SparsificationFailed(f"no verified sample in {max_retries} retries", last)


def normalize_general(g: GeneralDecomposition, desc: BanachDescriptor):
    """Rescale every term to ``(||Y_i|| X_i, Y_i / ||Y_i||)``, dropping zero ``Y_i``."""
    if g.n == 0:
        return g
    norms = np.asarray(desc.norm(g.Y), dtype=float)
    keep = norms >= 1e-12
    shape = (-1,) + (1,) * (g.Y.ndim - 1)
    return GeneralDecomposition(g.d1, g.X[keep] * norms[keep][:, None, None], g.Y[keep] / norms[keep].reshape(shape))


def _mix(seed, retry):
    return (int(seed) * 1_000_003 + retry) & 0xFFFFFFFFFFFFFFFF
