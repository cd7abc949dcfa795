"""Distance from a net point to the realizable set.

For a net point ``p`` we minimize

    f(a) = || sum_i (p_i - x_i(a)) Y_i ||_B

over ``a`` in a convex domain (density matrices for the S_X problems, a unit
ball for the injective-norm problem), where ``x_i`` are linear functionals.
The minimizer is found by projected subgradient descent.  Each subgradient
comes from a norming dual element ``W`` of the residual, and the same ``W``
gives the lower bound

    min_a f(a) >= sum_i p_i <W, Y_i> - sup_a sum_i <W, Y_i> x_i(a),

so infeasibility can usually be certified rather than guessed.

Everything is vectorized over a batch of net points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from . import rng as _rng
from .matlib import (
    ParameterError,
    hermitize,
    is_hermitian,
    l1_ball_project,
    project_to_density,
    project_to_s1_ball,
    projector,
    random_pure_state,
    schatten_norm,
    vector_norm,
)
from .model import BanachDescriptor


class Status(str, Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 2000
    tol: float = 1e-4
    step_scale: float = 1.0
    restarts: int = 3
    schedule: str = "polyak"

    def __post_init__(self):
        if self.max_iters < 1 or self.restarts < 1 or not self.tol > 0 or not self.step_scale > 0:
            raise ParameterError(f"invalid solver configuration {self}")
        if self.schedule not in ("polyak", "sqrt"):
            raise ParameterError(f"unknown step schedule {self.schedule!r}")


@dataclass
class FeasibilityResult:
    status: Status
    q: np.ndarray
    alpha: np.ndarray
    achieved: float
    iterations: int
    lower_bound: float = 0.0
    certified: bool = False


# -- target norms -------------------------------------------------------------


class TargetNorm:
    """``||.||_B`` evaluated on combinations of a fixed list ``Y``."""

    def __init__(self, desc: BanachDescriptor, Y):
        self.desc = desc
        Y = np.asarray(Y)
        self.matrix = desc.family == "schatten"
        if self.matrix and Y.ndim != 3:
            raise ParameterError("Schatten targets need Y of shape (n, d, d)")
        if not self.matrix and Y.ndim != 2:
            raise ParameterError("l_q targets need Y of shape (n, d)")
        self.hermitian = self.matrix and is_hermitian(Y, 1e-12)
        if self.hermitian:
            Y = hermitize(Y)
        self.Y = Y
        self.alpha = desc.param

    @property
    def n(self):
        return len(self.Y)

    def combine(self, c):
        """``sum_i c_i Y_i`` for every row of ``c``."""
        return np.tensordot(c, self.Y, axes=(-1, 0))

    def norm(self, R):
        if not self.matrix:
            return vector_norm(R, self.alpha)
        return schatten_norm(R, self.alpha)

    def norm_and_dual(self, R):
        """Norms of a batch of elements and norming dual elements ``W``.

        ``W`` has dual norm at most one and ``<W, R> = ||R||``; for ``R = 0``
        it is zero.
        """
        a = self.alpha
        if not self.matrix:
            absr = np.abs(R)
            if np.isinf(a):
                j = np.argmax(absr, axis=-1)
                nrm = np.take_along_axis(absr, j[:, None], axis=-1)[:, 0]
                W = np.zeros_like(R, dtype=float)
                np.put_along_axis(W, j[:, None], np.sign(np.take_along_axis(R, j[:, None], axis=-1)), axis=-1)
            else:
                nrm = vector_norm(R, a)
                safe = np.where(nrm > 0, nrm, 1.0)
                W = np.sign(R) * (absr / safe[:, None]) ** (a - 1)
            W = np.where(nrm[:, None] > 0, W, 0.0)
            return nrm, W
        if self.hermitian:
            lam, U = np.linalg.eigh(R)
            V = U
            sv = np.abs(lam)
            sgn = np.sign(lam)
        else:
            U, sv, Vh = np.linalg.svd(R)
            V = np.conj(np.swapaxes(Vh, -1, -2))
            sgn = np.ones_like(sv)
        if np.isinf(a):
            j = np.argmax(sv, axis=-1)
            nrm = np.take_along_axis(sv, j[:, None], axis=-1)[:, 0]
            coef = np.zeros_like(sv)
            np.put_along_axis(coef, j[:, None], 1.0, axis=-1)
        else:
            top = np.max(sv, axis=-1)
            safe = np.where(top > 0, top, 1.0)
            nrm = safe * np.sum((sv / safe[:, None]) ** a, axis=-1) ** (1 / a)
            nsafe = np.where(nrm > 0, nrm, 1.0)
            coef = (sv / nsafe[:, None]) ** (a - 1)
        coef = np.where(nrm[:, None] > 0, coef * sgn, 0.0)
        W = (U * coef[:, None, :]) @ np.conj(np.swapaxes(V, -1, -2))
        return nrm, W

    def pair(self, W):
        """``Re <W, Y_i>`` for every row of ``W`` and every ``i``."""
        if not self.matrix:
            return W @ self.Y.T
        return np.einsum("bjk,ijk->bi", np.conj(W), self.Y).real


def y_norm(a, Y, desc: BanachDescriptor):
    """``|| sum_i a_i Y_i ||_B``."""
    a = np.asarray(a, dtype=float)
    Y = np.asarray(Y)
    if a.shape[-1] != len(Y):
        raise ParameterError(f"{a.shape[-1]} coefficients for {len(Y)} elements")
    return desc.norm(np.tensordot(a, Y, axes=(-1, 0)))


# -- feasible domains ----------------------------------------------------------


class DensityDomain:
    """``a`` ranges over density matrices; ``x_i(a) = tr[X_i a]``."""

    name = "density"

    def __init__(self, X):
        self.X = hermitize(np.asarray(X, dtype=complex))
        self.d = self.X.shape[-1]

    def apply(self, a):
        return np.einsum("iab,Bba->Bi", self.X, a).real

    def adjoint(self, w):
        return np.tensordot(w, self.X, axes=(-1, 0))

    def support(self, G):
        return np.linalg.eigvalsh(hermitize(G))[..., -1]

    def project(self, a):
        return project_to_density(a)

    def start(self, m):
        return np.broadcast_to(np.eye(self.d, dtype=complex) / self.d, (m, self.d, self.d)).copy()

    def random(self, gen):
        return projector(random_pure_state(self.d, gen))

    def sqnorm(self, G):
        return np.sum(np.abs(G) ** 2, axis=(-2, -1))


class S1BallDomain(DensityDomain):
    """Hermitian matrices of trace norm at most one."""

    name = "S1"

    def support(self, G):
        return np.max(np.abs(np.linalg.eigvalsh(hermitize(G))), axis=-1)

    def project(self, a):
        return project_to_s1_ball(a)

    def start(self, m):
        return np.zeros((m, self.d, self.d), dtype=complex)

    def random(self, gen):
        return (1 if gen.random() < 0.5 else -1) * projector(random_pure_state(self.d, gen))


class L2BallDomain:
    """Real vectors of Euclidean norm at most one; ``x_i(a) = <x_i, a>``."""

    name = "l2"

    def __init__(self, X):
        self.X = np.asarray(X, dtype=float)
        self.d = self.X.shape[-1]

    def apply(self, a):
        return a @ self.X.T

    def adjoint(self, w):
        return w @ self.X

    def support(self, G):
        return np.linalg.norm(G, axis=-1)

    def project(self, a):
        nrm = np.linalg.norm(a, axis=-1, keepdims=True)
        return a / np.maximum(nrm, 1.0)

    def start(self, m):
        return np.zeros((m, self.d))

    def random(self, gen):
        v = gen.standard_normal(self.d)
        return v / np.linalg.norm(v)

    def sqnorm(self, G):
        return np.sum(G**2, axis=-1)


class L1BallDomain(L2BallDomain):
    name = "l1"

    def support(self, G):
        return np.max(np.abs(G), axis=-1)

    def project(self, a):
        return l1_ball_project(a)

    def random(self, gen):
        v = np.zeros(self.d)
        v[gen.integers(self.d)] = 1 if gen.random() < 0.5 else -1
        return v


DOMAINS = {"density": DensityDomain, "S1": S1BallDomain, "l2": L2BallDomain, "l1": L1BallDomain}


# -- batched solver -----------------------------------------------------------


def status_mask(status, which):
    """Boolean mask of rows with the given status.

    ``Status`` is a ``str`` enum, and numpy's ``==`` on object arrays does not
    compare those elementwise, so compare explicitly.
    """
    return np.fromiter((s is which for s in status), dtype=bool, count=len(status))


@dataclass
class BatchResult:
    status: np.ndarray  # object array of Status
    alpha: np.ndarray
    q: np.ndarray
    achieved: np.ndarray
    lower_bound: np.ndarray
    iterations: np.ndarray
    certified: np.ndarray

    def __len__(self):
        return len(self.status)

    def item(self, j):
        return FeasibilityResult(
            self.status[j], self.q[j], self.alpha[j], float(self.achieved[j]),
            int(self.iterations[j]), float(self.lower_bound[j]), bool(self.certified[j]),
        )


def solve_batch(P, domain, target: TargetNorm, eps, cfg: SolverConfig, seed=0, ids=None, stream="feas",
                start=None, window=128, minimize=False):
    """Decide feasibility for every row of ``P``.

    Rows are processed through a fixed-size active window that is refilled
    as rows finish, so a few slow rows do not hold up the rest.  Every row's
    trajectory depends only on its own data: restart ``r`` of row ``j``
    draws from the stream ``(seed, stream, ids[j], r)``.  Batched linear
    algebra can still differ in the last bit between batch shapes, so
    callers that need bit-identical output keep batch boundaries fixed.

    ``start`` gives optional initial points (used to polish a known
    witness).  With ``minimize`` a row keeps descending after infeasibility is certified and
    stops only once the duality gap closes or the iterations run out.
    """
    P = np.asarray(P, dtype=float)
    B = len(P)
    ids = np.arange(B) if ids is None else np.asarray(ids)
    thr_feas = eps + cfg.tol
    thr_cert = eps + 10 * cfg.tol
    stop_cert = math.inf if minimize else thr_cert

    best_f = np.full(B, np.inf)
    best_a = domain.start(B)
    lb = np.full(B, -np.inf)
    iters = np.zeros(B, dtype=np.int64)

    solver = _Window(P, domain, target, eps, cfg, seed, ids, stream, start, best_f, best_a, lb, iters,
                     thr_feas, stop_cert)
    solver.run(window)

    status = np.empty(B, dtype=object)
    certified = np.zeros(B, dtype=bool)
    for j in range(B):
        if best_f[j] <= thr_feas:
            status[j] = Status.FEASIBLE
        elif lb[j] > thr_cert:
            status[j] = Status.INFEASIBLE
            certified[j] = True
        elif best_f[j] - eps > 10 * cfg.tol:
            status[j] = Status.INFEASIBLE
        else:
            status[j] = Status.INDETERMINATE
    q = domain.apply(best_a)
    # independent re-check of the feasible verdicts
    feas = np.flatnonzero(status_mask(status, Status.FEASIBLE))
    if feas.size:
        recheck = target.norm(target.combine(P[feas] - q[feas]))
        for j, v in zip(feas, recheck):
            if not v <= thr_feas + 1e-12:
                status[j] = Status.INDETERMINATE
    return BatchResult(status, best_a, q, best_f, np.maximum(lb, 0.0), iters, certified)


def _lipschitz(domain, target):
    """Upper bound on the gradient Lipschitz constant of a -> ||R(a)||_F^2 / 2."""
    if target.matrix:
        Yf = target.Y.reshape(len(target.Y), -1)
        gy = (Yf.conj() @ Yf.T).real
    else:
        gy = target.Y @ target.Y.T
    Xf = domain.X.reshape(len(domain.X), -1)
    gx = (Xf.conj() @ Xf.T).real
    return float(np.linalg.eigvalsh(gy)[-1] * np.linalg.eigvalsh(gx)[-1]) or 1.0


class _Window:
    """Per-row projected descent with refilling.

    Each restart runs an accelerated warm-up on ``||R||_F^2 / 2`` (smooth, so
    it moves fast towards the nearest realizable point) and then projected
    subgradient steps on ``||R||_B`` itself.  With the Polyak schedule the
    step aims at the best known lower level, ``max(eps, lower bound)``.
    Every evaluated point also yields a dual lower bound.
    """

    def __init__(self, P, domain, target, eps, cfg, seed, ids, stream, start, best_f, best_a, lb, iters,
                 thr_feas, thr_cert):
        self.P, self.domain, self.target, self.eps, self.cfg = P, domain, target, eps, cfg
        self.seed, self.ids, self.stream, self.start = seed, ids, stream, start
        self.best_f, self.best_a, self.lb, self.iters = best_f, best_a, lb, iters
        self.thr_feas, self.thr_cert = thr_feas, thr_cert
        self.smooth = cfg.max_iters // 4 if cfg.schedule == "polyak" else 0
        self.L = _lipschitz(domain, target) if self.smooth else 1.0

    def _init_point(self, j, r):
        if r == 0:
            if self.start is not None:
                return np.asarray(self.start[j])
            return self.domain.start(1)[0]
        return self.domain.random(_rng.stream(self.seed, self.stream, self.ids[j], r))

    def run(self, window):
        B = len(self.P)
        if B == 0:
            return
        dom, tgt, cfg = self.domain, self.target, self.cfg
        nxt = 0
        # per-slot state
        rows = np.zeros(0, dtype=np.int64)
        restart = np.zeros(0, dtype=np.int64)
        t = np.zeros(0, dtype=np.int64)
        theta = np.zeros(0)
        scale = np.zeros(0)
        x = dom.start(0)  # gradient point (extrapolated in the warm-up)
        a_prev = dom.start(0)  # current iterate, always inside the domain
        wsum = np.zeros((0, self.P.shape[1]))
        count = np.zeros(0)

        def fresh(js, rs):
            pts = np.stack([self._init_point(j, r) for j, r in zip(js, rs)])
            return pts

        while True:
            # refill
            free = window - len(rows)
            if free > 0 and nxt < B:
                new = np.arange(nxt, min(B, nxt + free))
                nxt += len(new)
                r0 = np.zeros(len(new), dtype=np.int64)
                pts = fresh(new, r0)
                rows = np.concatenate([rows, new])
                restart = np.concatenate([restart, r0])
                t = np.concatenate([t, np.zeros(len(new), dtype=np.int64)])
                theta = np.concatenate([theta, np.ones(len(new))])
                scale = np.concatenate([scale, np.full(len(new), np.nan)])
                x = np.concatenate([x, pts])
                a_prev = np.concatenate([a_prev, pts])
                wsum = np.concatenate([wsum, np.zeros((len(new), self.P.shape[1]))])
                count = np.concatenate([count, np.zeros(len(new))])
            if len(rows) == 0:
                return
            P = self.P[rows]

            # evaluate, update incumbents and bounds
            q = dom.apply(a_prev)
            f, W = tgt.norm_and_dual(tgt.combine(P - q))
            w = tgt.pair(W)
            G = dom.adjoint(w)
            lower = np.einsum("bi,bi->b", P, w) - dom.support(G)
            count += 1
            wsum += w
            wbar = wsum / count[:, None]
            lower = np.maximum(lower, np.einsum("bi,bi->b", P, wbar) - dom.support(dom.adjoint(wbar)))
            better = f < self.best_f[rows]
            if np.any(better):
                self.best_f[rows[better]] = f[better]
                self.best_a[rows[better]] = a_prev[better]
            self.lb[rows] = np.maximum(self.lb[rows], lower)
            self.iters[rows] += 1
            t += 1

            bf, lbr = self.best_f[rows], self.lb[rows]
            done = (bf <= self.thr_feas) | (lbr > self.thr_cert) | (bf - lbr <= cfg.tol)
            # restarts
            end = ~done & (t >= cfg.max_iters)
            if np.any(end):
                restart[end] += 1
                out = end & (restart >= cfg.restarts)
                done |= out
                again = end & ~out
                if np.any(again):
                    idx = np.flatnonzero(again)
                    pts = fresh(rows[idx], restart[idx])
                    x[idx] = pts
                    a_prev[idx] = pts
                    t[idx] = 0
                    theta[idx] = 1.0
                    scale[idx] = np.nan
                    wsum[idx] = 0.0
                    count[idx] = 0.0
            keep = ~done
            moving = keep & (t > 0)
            if not np.all(keep):
                rows, restart, t, theta, scale = rows[keep], restart[keep], t[keep], theta[keep], scale[keep]
                x, a_prev, wsum, count = x[keep], a_prev[keep], wsum[keep], count[keep]
                P, f, G, moving = P[keep], f[keep], G[keep], moving[keep]
            if len(rows) == 0:
                continue

            # one step for every row that did not just restart
            smooth = moving & (t <= self.smooth)
            switch = moving & (t == self.smooth)
            sub = moving & (t > self.smooth)
            shape = (-1,) + (1,) * (x.ndim - 1)
            pre = x.copy()
            if np.any(smooth):
                si = np.flatnonzero(smooth)
                R = tgt.combine(P[si] - dom.apply(x[si]))
                grad = -dom.adjoint(tgt.pair(R))
                pre[si] = x[si] - grad / self.L
            if np.any(sub):
                si = np.flatnonzero(sub)
                gn = dom.sqnorm(G[si])
                gsafe = np.where(gn > 0, gn, 1.0)
                if cfg.schedule == "polyak":
                    level = np.maximum(self.eps, self.lb[rows[si]])
                    step = cfg.step_scale * np.maximum(f[si] - level, cfg.tol) / gsafe
                else:
                    sc = scale[si]
                    unset = np.isnan(sc)
                    sc = np.where(unset, cfg.step_scale * f[si] / gsafe, sc)
                    scale[si] = sc
                    step = sc / np.sqrt(t[si] - self.smooth)
                # the subgradient of f in a is -G
                pre[si] = a_prev[si] + step.reshape(shape) * G[si]
            proj = dom.project(pre)
            if np.any(smooth):
                si = np.flatnonzero(smooth)
                th = theta[si]
                th_new = 0.5 * (1 + np.sqrt(1 + 4 * th**2))
                mom = ((th - 1) / th_new).reshape(shape)
                x[si] = proj[si] + mom * (proj[si] - a_prev[si])
                a_prev[si] = proj[si]
                theta[si] = th_new
            if np.any(switch):
                # leave the warm-up from the best point seen so far
                si = np.flatnonzero(switch)
                x[si] = self.best_a[rows[si]]
                a_prev[si] = x[si]
            if np.any(sub):
                si = np.flatnonzero(sub)
                x[si] = proj[si]
                a_prev[si] = proj[si]


def check_feasible(p, X, Y, desc: BanachDescriptor, eps, cfg: Optional[SolverConfig] = None, seed=0, domain="density"):
    """Is there ``a`` in the domain with ``||p - x(a)||_{B,Y} <= eps``?"""
    cfg = cfg or SolverConfig()
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or len(p) != len(X):
        raise ParameterError(f"p has shape {p.shape}, expected ({len(X)},)")
    if not eps >= 0:
        raise ParameterError("eps must be nonnegative")
    if domain == "density" and (np.any(p < -1e-9) or abs(p.sum() - 1) > 1e-9):
        raise ParameterError("p must lie in the probability simplex")
    dom = DOMAINS[domain](X)
    res = solve_batch(p[None], dom, TargetNorm(desc, Y), eps, cfg, seed=seed)
    return res.item(0)
