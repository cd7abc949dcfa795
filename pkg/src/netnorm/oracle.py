"""Independent reference values and empirical lemma checks.

Nothing here uses nets or the feasibility solver.  The maximizers are
local searches over pure states or unit vectors: each objective is convex,
so "jump to the maximizer of the linearization" never decreases it and
many random starts find the global maximum at desk scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .feascheck import TargetNorm
from .matlib import hermitize, projector, top_eigenpair
from .model import BanachDescriptor
from .nets import counts_block, net_size

# -- maximizers ---------------------------------------------------------------


def _random_states(gen, m, d):
    v = gen.standard_normal((m, d)) + 1j * gen.standard_normal((m, d))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def hsep_alternating(M, d1, d2, restarts=50, iters=200, seed=0, tol=1e-13):
    """Max of ``tr[M (alpha (x) beta)]`` over product pure states by alternating ascent.

    Returns ``(value, alpha, beta)``.  Each half-step solves its subproblem
    exactly, so the objective never decreases; this is asserted.
    """
    M = hermitize(np.asarray(M, dtype=complex))
    T = M.reshape(d1, d2, d1, d2)
    gen = _rng.stream(seed, "oracle-hsep")
    b = _random_states(gen, restarts, d2)
    a = _random_states(gen, restarts, d1)
    prev = np.full(restarts, -np.inf)
    for _ in range(iters):
        # alpha <- top eigenvector of tr_B[M (I (x) beta)]
        Ma = np.einsum("ijkl,rj,rl->rik", T, b.conj(), b)
        _, a = top_eigenpair(Ma)
        Mb = np.einsum("ijkl,ri,rk->rjl", T, a.conj(), a)
        val, b = top_eigenpair(Mb)
        assert np.all(val >= prev - 1e-10), "alternating ascent decreased"
        if np.all(val - prev <= tol):
            prev = val
            break
        prev = val
    j = int(np.argmax(prev))
    return float(prev[j]), projector(a[j]), projector(b[j])


def hsep_multi_alternating(M, dims, restarts=50, iters=200, seed=0, tol=1e-13):
    """Max of ``<psi_1 ... psi_l| M |psi_1 ... psi_l>`` by cycling over the parties.

    Each step replaces one party's state by the top eigenvector of the
    operator left after contracting the others, so the value never
    decreases.  Returns ``(value, states)``.
    """
    M = hermitize(np.asarray(M, dtype=complex))
    l = len(dims)
    T = M.reshape(tuple(dims) * 2)
    gen = _rng.stream(seed, "oracle-multi")
    vecs = [_random_states(gen, restarts, d) for d in dims]
    prev = np.full(restarts, -np.inf)
    for _ in range(iters):
        for j in range(l):
            E = T
            # contract every party except j, bra side first then ket side
            for m in reversed(range(l)):
                if m == j:
                    continue
                E = _contract(E, vecs[m], m, l)
            val, vecs[j] = top_eigenpair(E)
        if np.all(val - prev <= tol):
            prev = np.maximum(prev, val)
            break
        prev = np.maximum(prev, val)
    i = int(np.argmax(prev))
    return float(prev[i]), [projector(v[i]) for v in vecs]


def _contract(E, v, m, l):
    """Contract axis ``m`` (bra) and ``m + l'`` (ket) of ``E`` with ``v`` per restart."""
    batched = E.ndim % 2 == 1
    if not batched:
        E = np.broadcast_to(E, (len(v),) + E.shape)
    half = (E.ndim - 1) // 2
    E = np.moveaxis(E, (1 + m, 1 + m + half), (-2, -1))
    E = np.einsum("r...ab,ra,rb->r...", E, v.conj(), v)
    return E


def maximize_convex_over_states(X, target: TargetNorm, restarts=50, iters=100, seed=0, starts=None):
    """Max over density matrices of ``|| sum_i tr[X_i rho] Y_i ||_B`` (local search).

    Returns ``(value, rho)``.
    """
    X = np.asarray(X, dtype=complex)
    d = X.shape[-1]
    gen = _rng.stream(seed, "oracle-states")
    psi = _random_states(gen, restarts, d)
    if starts is not None:
        psi = np.concatenate([np.asarray(starts, dtype=complex).reshape(-1, d), psi])
    best = np.full(len(psi), -np.inf)
    for _ in range(iters):
        q = np.einsum("ra,iab,rb->ri", psi.conj(), X, psi).real
        val, W = target.norm_and_dual(target.combine(q))
        if np.all(val - best <= 1e-14):
            best = np.maximum(best, val)
            break
        best = np.maximum(best, val)
        G = np.tensordot(target.pair(W), X, axes=(-1, 0))
        _, psi_new = top_eigenpair(G)
        psi = psi_new
    q = np.einsum("ra,iab,rb->ri", psi.conj(), X, psi).real
    val = target.norm(target.combine(q))
    j = int(np.argmax(val))
    return float(val[j]), projector(psi[j])


def channel_output_oracle(X, Y, desc: BanachDescriptor, restarts=200, iters=100, seed=0, grid=0):
    """``max_rho || sum_i tr[X_i rho] Y_i ||_B``.

    For qubit inputs ``grid`` > 0 adds a Bloch-sphere grid of starting
    points (grid x 2*grid angles).
    """
    X = np.asarray(X, dtype=complex)
    starts = None
    if grid and X.shape[-1] == 2:
        th, ph = np.meshgrid(np.linspace(0, np.pi, grid), np.linspace(0, 2 * np.pi, 2 * grid, endpoint=False))
        starts = np.stack([np.cos(th / 2).ravel(), (np.exp(1j * ph) * np.sin(th / 2)).ravel()], axis=-1)
    return maximize_convex_over_states(X, TargetNorm(desc, Y), restarts, iters, seed, starts)


def two_to_q_gradient(A, q, restarts=500, iters=300, seed=0):
    """``max ||A x||_q`` over complex unit vectors ``x``.

    Each step replaces ``x`` by the normalized gradient of ``||A x||_q^q``,
    ``A^dagger (|Ax|^{q-2} Ax)``; for convex objectives on the sphere this
    is monotone.  At q = 2 it is the power method.
    """
    A = np.asarray(A, dtype=complex)
    gen = _rng.stream(seed, "oracle-2q")
    x = _random_states(gen, restarts, A.shape[1])
    x = np.concatenate([np.eye(A.shape[1], dtype=complex), x])
    prev = np.full(len(x), -np.inf)
    for _ in range(iters):
        y = x @ A.T
        val = _lq(y, q)
        if np.all(val - prev <= 1e-15 * np.maximum(1.0, val)):
            prev = np.maximum(prev, val)
            break
        prev = np.maximum(prev, val)
        g = (np.abs(y) ** (q - 2) * y) @ A.conj()
        nrm = np.linalg.norm(g, axis=-1, keepdims=True)
        x = np.where(nrm > 0, g / np.where(nrm > 0, nrm, 1.0), x)
    return float(np.max(np.maximum(prev, _lq(x @ A.T, q))))


def _lq(y, q):
    return np.sum(np.abs(y) ** q, axis=-1) ** (1 / q)


def product_grid_oracle(M, l, grid=20):
    """Max of ``<psi|M|psi>`` over real product qubit states on an angle grid.

    Each party is ``cos t |0> + sin t |1>`` with ``t`` on ``grid`` points of
    [0, pi/2]; exact for diagonal ``M`` up to the grid resolution.
    """
    M = hermitize(np.asarray(M, dtype=complex))
    t = np.linspace(0, np.pi / 2, grid)
    single = np.stack([np.cos(t), np.sin(t)], axis=-1)
    vecs = single
    for _ in range(l - 1):
        vecs = np.einsum("ai,bj->abij", vecs, single).reshape(-1, vecs.shape[-1] * 2)
    vals = np.einsum("ri,ij,rj->r", vecs, M, vecs).real
    j = int(np.argmax(vals))
    return float(vals[j]), vecs[j]


def injective_oracle(xstar, y, A_family, desc: BanachDescriptor, restarts=200, iters=200, seed=0):
    """``max_{a in B(A)} || sum_i x_i^*(a) y_i ||_B`` by linearized ascent."""
    from .feascheck import DOMAINS

    dom = DOMAINS[{"S1": "S1", "l1": "l1", "l2": "l2"}[A_family]](xstar)
    target = TargetNorm(desc, y)
    gen = _rng.stream(seed, "oracle-inj")
    a = np.stack([dom.random(gen) for _ in range(restarts)])
    best = np.full(restarts, -np.inf)
    for _ in range(iters):
        val, W = target.norm_and_dual(target.combine(dom.apply(a)))
        if np.all(val - best <= 1e-14):
            best = np.maximum(best, val)
            break
        best = np.maximum(best, val)
        a = _ball_argmax(dom, dom.adjoint(target.pair(W)))
    return float(np.max(best))


def _ball_argmax(dom, G):
    """Maximizer of ``<G, a>`` over the domain's unit ball."""
    if dom.name == "l2":
        nrm = np.linalg.norm(G, axis=-1, keepdims=True)
        return G / np.where(nrm > 0, nrm, 1.0)
    if dom.name == "l1":
        j = np.argmax(np.abs(G), axis=-1)
        out = np.zeros_like(G)
        np.put_along_axis(out, j[:, None], np.sign(np.take_along_axis(G, j[:, None], axis=-1)), axis=-1)
        return out
    w, v = np.linalg.eigh(hermitize(G))
    j = np.argmax(np.abs(w), axis=-1)
    vec = np.take_along_axis(v, j[:, None, None], axis=-1)[..., 0]
    sgn = np.sign(np.take_along_axis(w, j[:, None], axis=-1))
    return sgn[:, :, None] * projector(vec)


# -- lemma checks ---------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    rows: list = field(default_factory=list)
    info: dict = field(default_factory=dict)


def _random_projectors(gen, m, d):
    """Random projectors of uniformly random rank in [0, d]."""
    z = gen.standard_normal((m, d, d)) + 1j * gen.standard_normal((m, d, d))
    U, _ = np.linalg.qr(z)
    ranks = gen.integers(0, d + 1, size=m)
    mask = (np.arange(d)[None, :] < ranks[:, None]).astype(float)
    return (U * mask[:, None, :]) @ np.conj(np.swapaxes(U, -1, -2))


def hoeffding_tail_check(d, k, lam, trials, deltas, seed=0):
    """Empirical ``Pr[||(1/k) sum Z_i|| >= delta]`` against ``d exp(-k delta^2 / 8 lam^2)``.

    ``Z_i = s_i lam (2P_i - I)`` with Rademacher ``s_i`` and random projectors
    ``P_i``: zero mean, norm exactly ``lam``.
    """
    gen = _rng.stream(seed, "hoeffding", d, k)
    norms = np.empty(trials)
    for t in range(trials):
        P = _random_projectors(gen, k, d)
        s = gen.choice([-1.0, 1.0], size=k)
        Z = lam * (2 * P - np.eye(d))
        S = np.tensordot(s, Z, axes=1) / k
        norms[t] = np.max(np.abs(np.linalg.eigvalsh(hermitize(S))))
    rows = []
    for delta in deltas:
        emp = float(np.mean(norms >= delta))
        bound = d * math.exp(-k * delta**2 / (8 * lam**2))
        rows.append((delta, emp, bound))
    return CheckResult("hoeffding", all(e <= b for _, e, b in rows), rows, {"d": d, "k": k, "lambda": lam})


def random_unit_elements(desc: BanachDescriptor, m, gen, radius="uniform"):
    """``m`` random elements of the unit ball of ``B`` (norms uniform in (0, 1])."""
    dim = desc.dim
    if desc.family == "schatten":
        g = gen.standard_normal((m, dim, dim)) + 1j * gen.standard_normal((m, dim, dim))
        Z = hermitize(g)
    else:
        Z = gen.standard_normal((m, dim))
    nrm = desc.norm(Z)
    r = gen.uniform(0.05, 1.0, size=m) if radius == "uniform" else np.ones(m)
    shape = (-1,) + (1,) * (Z.ndim - 1)
    return Z * (r / nrm).reshape(shape)


def _signs(k):
    return np.array(list(itertools.product([-1.0, 1.0], repeat=k)))


def type_constant_check(desc: BanachDescriptor, k, trials, seed=0, exact_limit=12, samples=4096):
    """Worst observed ``E_s ||sum s_i Z_i||^g / sum ||Z_i||^g`` against ``C^g``.

    The sign average is exact (all 2^k patterns) for ``k <= exact_limit``;
    otherwise it is sampled and the pass threshold widens by 3 sigma.
    """
    g = desc.gamma
    gen = _rng.stream(seed, "type", k)
    exact = k <= exact_limit
    S = _signs(k) if exact else None
    worst, worst_sigma = 0.0, 0.0
    for _ in range(trials):
        Z = random_unit_elements(desc, k, gen)
        signs = S if exact else gen.choice([-1.0, 1.0], size=(samples, k))
        vals = np.asarray(desc.norm(np.tensordot(signs, Z, axes=1))) ** g
        denom = float(np.sum(np.asarray(desc.norm(Z)) ** g))
        ratio = float(np.mean(vals)) / denom
        sigma = 0.0 if exact else float(np.std(vals) / np.sqrt(len(vals))) / denom
        if ratio > worst:
            worst, worst_sigma = ratio, sigma
    bound = desc.C**g
    passed = worst <= bound * (1 + 1e-12) + 3 * worst_sigma
    return CheckResult("type", passed, [(k, worst, bound)], {"exact": exact, "sigma": worst_sigma})


def symmetrization_check(desc: BanachDescriptor, k, trials, seed=0, support=6):
    """``E||mean(Z) - EZ||^g <= 2 E||mean(s Z)||^g`` on random finite distributions."""
    g = desc.gamma
    gen = _rng.stream(seed, "symm", k)
    Z = random_unit_elements(desc, support, gen)
    p = gen.dirichlet(np.ones(support))
    EZ = np.tensordot(p, Z, axes=1)
    idx = gen.choice(support, size=(trials, k), p=p)
    s = gen.choice([-1.0, 1.0], size=(trials, k))
    Zi = Z[idx]
    lhs = np.asarray(desc.norm(Zi.mean(axis=1) - EZ)) ** g
    rhs = 2 * np.asarray(desc.norm(np.einsum("tk,tk...->t...", s, Zi) / k)) ** g
    diff = lhs - rhs
    # one-sided test on the paired difference
    mean, sigma = float(diff.mean()), float(diff.std() / np.sqrt(trials))
    return CheckResult("symmetrization", mean <= 3 * sigma,
                       [(k, float(lhs.mean()), float(rhs.mean()))], {"sigma": sigma})


def azuma_tail_check(desc: BanachDescriptor, ks, deltas, trials, seed=0, c_ref=0.125):
    """Empirical tails of ``||(1/k) sum X_i||`` for zero-mean ``X_i`` in the unit ball.

    Fits the largest ``c`` with every tail below ``exp(s + 2 - c k delta^2)``
    and passes when that calibrated ``c`` is at least ``c_ref``.
    """
    gen = _rng.stream(seed, "azuma")
    rows = []
    c_fit = math.inf
    for k in ks:
        Z = random_unit_elements(desc, trials * k, gen).reshape((trials, k) + _elem_shape(desc))
        s = gen.choice([-1.0, 1.0], size=(trials, k))
        norms = np.asarray(desc.norm(np.einsum("tk,tk...->t...", s, Z) / k))
        for delta in deltas:
            emp = float(np.mean(norms >= delta))
            if emp > 0:
                c_fit = min(c_fit, (desc.s + 2 - math.log(emp)) / (k * delta**2))
            rows.append((k, delta, emp, math.exp(desc.s + 2 - c_ref * k * delta**2)))
    passed = c_fit >= c_ref and all(e <= b for _, _, e, b in rows)
    return CheckResult("azuma", passed, rows, {"c_fit": c_fit, "c_ref": c_ref})


def _elem_shape(desc):
    return (desc.dim, desc.dim) if desc.family == "schatten" else (desc.dim,)


def random_effects(gen, n, d):
    """``n`` random Hermitian ``Y`` with ``0 <= Y <= I``."""
    z = gen.standard_normal((n, d, d)) + 1j * gen.standard_normal((n, d, d))
    U, _ = np.linalg.qr(z)
    lam = gen.random((n, d))
    return (U * lam[:, None, :]) @ np.conj(np.swapaxes(U, -1, -2))


def net_covering_check(instances=100, seed=0, max_n=5, max_d2=4, k_range=(4, 20)):
    """Exact distance from a random ``p`` to the net, against ``sqrt(9 ln d2 / k)``."""
    gen = _rng.stream(seed, "net-cover")
    rows = []
    for _ in range(instances):
        n = int(gen.integers(1, max_n + 1))
        d2 = int(gen.integers(2, max_d2 + 1))
        k = int(gen.integers(k_range[0], k_range[1] + 1))
        Y = random_effects(gen, n, d2)
        p = gen.dirichlet(np.ones(n))
        Q = counts_block(n, k, 0, net_size(n, k)) / k
        R = np.tensordot(p[None, :] - Q, Y, axes=1)
        dist = float(np.min(np.max(np.abs(np.linalg.eigvalsh(R)), axis=-1)))
        rows.append((n, d2, k, dist, math.sqrt(9 * math.log(d2) / k)))
    return CheckResult("net-covering", all(r[3] <= r[4] for r in rows), rows)


def run_lemma_suite(seed=0, quick=False):
    """Every lemma check, as a list of :class:`CheckResult`."""
    from .model import banach_constants

    trials = 500 if quick else 2000
    out = [net_covering_check(30 if quick else 100, seed)]
    for d in (2, 4):
        for k in (50, 200):
            out.append(hoeffding_tail_check(d, k, 1.0, trials, (0.25, 0.5, 1.0), seed))
    l2 = banach_constants("ell", 2, 4)
    s4 = banach_constants("schatten", 4, 3)
    s2 = banach_constants("schatten", 2, 3)
    out.append(type_constant_check(l2, 8, 20, seed))
    out.append(type_constant_check(s4, 8, 20, seed))
    for desc in (s2, s4):
        out.append(symmetrization_check(desc, 10, trials, seed))
    out.append(azuma_tail_check(s4, (10, 40), (0.2, 0.4), trials // 2, seed))
    return out


# -- random instances -----------------------------------------------------------


def random_povm(gen, n, d, complete=True):
    """``n`` random PSD operators summing to I (or to a random ``S <= I``)."""
    G = gen.standard_normal((n, d, d)) + 1j * gen.standard_normal((n, d, d))
    E = G @ np.conj(np.swapaxes(G, -1, -2))
    w, V = np.linalg.eigh(E.sum(0))
    inv = (V * w ** -0.5) @ V.conj().T
    X = hermitize(inv @ E @ inv)
    if not complete:
        X = X * gen.uniform(0.5, 1.0)
    return X


def random_locc(gen, n, d1, d2, complete=True):
    from .model import OneWayLOCC

    return OneWayLOCC(d1, d2, random_povm(gen, n, d1, complete), random_effects(gen, n, d2))
