"""Net-enumeration estimators.

Every estimator follows the same pattern: list a covering net of candidate
coefficient vectors ``p``, ask the feasibility solver whether each one is
within ``eps`` of the realizable set, and keep the best value reached at a
realizable witness.  The reported value is always recomputed from the
witness states, never taken from the scan bookkeeping.

The scan visits points in decreasing order of an upper bound on what they
can contribute and stops once no remaining point can beat the incumbent.
Work is cut into fixed-size batches and the incumbent only changes between
waves of batches, so results do not depend on the number of threads.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import __version__
from .feascheck import DOMAINS, DensityDomain, SolverConfig, Status, TargetNorm, solve_batch, status_mask
from .matlib import ParameterError, hermitize, kron_all, op_norm, projector, top_eigenpair
from .model import (
    BanachDescriptor,
    GeneralDecomposition,
    MultipartiteLOCC,
    Node,
    OneWayLOCC,
    banach_constants,
    complete_povm,
    require_valid,
)
from .nets import (
    DEFAULT_BUDGET,
    BudgetExceeded,
    NetSpec,
    _spec,
    attained_delta_basic,
    attained_delta_general,
    attained_delta_injective,
    attained_delta_multipartite,
    choose_k_basic,
    choose_k_general,
    choose_k_injective,
    choose_k_multipartite,
    counts_block,
    largest_affordable_k,
    net_size,
)

MAX_ASSEMBLY_DIM = 256
WITNESS_TOL = 1e-8

# -- reports ------------------------------------------------------------------


@dataclass
class ScanStats:
    net_size: int = 0
    scanned: int = 0
    pruned: int = 0
    feasible: int = 0
    infeasible: int = 0
    certified_infeasible: int = 0
    indeterminate: int = 0
    iterations: int = 0

    def add(self, other):
        for f in self.__dataclass_fields__:
            setattr(self, f, getattr(self, f) + getattr(other, f))


@dataclass
class EstimateReport:
    algorithm: str
    value: float
    requested_delta: Optional[float]
    attained_delta: float
    k: int
    n: int
    eps: float
    capped: bool
    stats: ScanStats
    witnesses: dict
    seed: int
    scan_value: float = float("nan")
    wall_time: float = 0.0
    stages: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def net_size(self):
        return self.stats.net_size

    def to_dict(self):
        return {
            "algorithm": self.algorithm,
            "version": __version__,
            "value": self.value,
            "scan_value": self.scan_value,
            "requested_delta": self.requested_delta,
            "attained_delta": self.attained_delta,
            "k": self.k,
            "n": self.n,
            "eps": self.eps,
            "capped": self.capped,
            "stats": asdict(self.stats),
            "witnesses": {k: _encode(v) for k, v in self.witnesses.items()},
            "seed": self.seed,
            "stages": [s if isinstance(s, dict) else s.to_dict() for s in self.stages],
            "notes": list(self.notes),
            "config": self.config,
            "wall_time": self.wall_time,
        }


def _encode(v):
    if isinstance(v, (list, tuple)):
        return [_encode(x) for x in v]
    a = np.asarray(v)
    if np.iscomplexobj(a):
        return {"shape": list(a.shape), "re": a.real.ravel().tolist(), "im": a.imag.ravel().tolist()}
    return {"shape": list(a.shape), "re": a.ravel().tolist()}


# -- the scan engine ------------------------------------------------------------


@dataclass(frozen=True)
class ScanOptions:
    budget: int = DEFAULT_BUDGET
    threads: Optional[int] = None
    batch: int = 1024
    wave: int = 2048
    seed: int = 0
    polish: int = 32

    def workers(self):
        return max(1, self.threads if self.threads is not None else (os.cpu_count() or 1))


@dataclass
class Best:
    value: float = -math.inf
    rank: int = -1
    coords: Optional[np.ndarray] = None
    alpha: Optional[np.ndarray] = None
    q: Optional[np.ndarray] = None
    extra: object = None

    def better(self, value, rank):
        return value > self.value or (value == self.value and rank < self.rank)


def _compact(arr, k):
    dt = np.uint8 if k < 2**8 else np.uint16 if k < 2**16 else np.uint32
    return arr.astype(dt)


def simplex_points(n, k, budget):
    """All count vectors of Delta_n(k) in colex order (compact integer dtype)."""
    size = net_size(n, k)
    if size > budget:
        raise BudgetExceeded(n, k, size, budget, largest_affordable_k(n, budget, k))
    chunk = 1 << 16
    return np.concatenate([_compact(counts_block(n, k, s, s + chunk), k) for s in range(0, size, chunk)])


def scan(points, k, domain, target, eps, cfg: SolverConfig, opts: ScanOptions, ub: Callable,
         evaluate: Optional[Callable] = None, stream="scan", lazy=False, floor=-math.inf):
    """Best value over the net ``points / k`` (rows), with bookkeeping.

    ``ub(P)`` bounds the value any witness for the rows ``P`` can reach;
    ``evaluate(P, q, alpha, ranks)`` returns ``(values, extras)`` for
    feasible rows (default: ``||q||_{B,Y}``).

    With ``lazy`` every feasible witness is polished right away and then
    evaluated one point at a time, skipping points whose bound has fallen
    below the incumbent, or whose witness has ``||q||_{B,Y}`` below it (so the
    value must not exceed ``||q||_{B,Y}``).  This is for expensive
    ``evaluate`` calls, which then receive the value to beat as ``floor``.  Points whose bound is below
    ``floor`` are never visited.
    """
    total = len(points)
    stats = ScanStats(net_size=total)
    best = Best()
    if total == 0:
        return best, stats
    chunk = 1 << 15
    ubs = np.concatenate([ub(points[s : s + chunk] / k) for s in range(0, total, chunk)])
    order = np.argsort(-ubs, kind="stable")

    if evaluate is None:
        def evaluate(P, q, alpha, ranks):
            return target.norm(target.combine(q)), [None] * len(q)

    def job(ranks):
        P = points[ranks] / k
        res = solve_batch(P, domain, target, eps, cfg, seed=opts.seed, ids=ranks, stream=stream)
        st = ScanStats(scanned=len(ranks), iterations=int(res.iterations.sum()))
        feas = np.flatnonzero(status_mask(res.status, Status.FEASIBLE))
        st.feasible = feas.size
        st.indeterminate = int(status_mask(res.status, Status.INDETERMINATE).sum())
        st.infeasible = len(ranks) - st.feasible - st.indeterminate
        st.certified_infeasible = int(res.certified.sum())
        if lazy:
            fr, fa = ranks[feas], res.alpha[feas]
            if feas.size:
                fa = _polished(fr, fa, points, k, domain, target, eps, cfg, opts, stream)
            return st, None, fr, fa
        local = Best()
        if feas.size:
            vals, extras = evaluate(P[feas], res.q[feas], res.alpha[feas], ranks[feas])
            for j, v, ex in zip(feas, vals, extras):
                if local.better(float(v), int(ranks[j])):
                    local = Best(float(v), int(ranks[j]), P[j], res.alpha[j], res.q[j], ex)
        return st, local, ranks[feas[: opts.polish]], res.alpha[feas[: opts.polish]]

    cand_r, cand_a = [], []
    workers = opts.workers()
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        pos = 0
        while pos < total:
            # everything left is dominated by the incumbent
            if ubs[order[pos]] < max(best.value, floor):
                stats.pruned += total - pos
                break
            wave = order[pos : pos + opts.wave]
            pos += len(wave)
            live = wave[ubs[wave] >= max(best.value, floor)]
            stats.pruned += len(wave) - len(live)
            batches = [live[s : s + opts.batch] for s in range(0, len(live), opts.batch)]
            results = pool.map(job, batches) if pool else map(job, batches)
            for st, local, fr, fa in results:
                stats.add(st)
                if lazy:
                    best = _evaluate_lazy(best, fr, fa, ubs, points, k, domain, target, evaluate, floor)
                    continue
                if local.rank >= 0 and best.better(local.value, local.rank):
                    best = local
                room = opts.polish - len(cand_r)
                if room > 0:
                    cand_r.extend(int(r) for r in fr[:room])
                    cand_a.extend(fa[:room])
    finally:
        if pool:
            pool.shutdown()
    stats.net_size = total
    if cand_r and not lazy:
        best = _polish(best, cand_r, cand_a, points, k, domain, target, eps, cfg, opts, evaluate, stream)
    return best, stats


def _polished(ranks, alphas, points, k, domain, target, eps, cfg, opts, stream):
    """Witnesses re-solved towards ``p`` itself, keeping the old one where that fails."""
    res = solve_batch(points[ranks] / k, domain, target, 0.0, replace(cfg, restarts=1), seed=opts.seed,
                      ids=ranks, stream=stream + "/polish", start=alphas, minimize=True)
    ok = res.achieved <= eps + cfg.tol
    return np.where(ok.reshape((-1,) + (1,) * (alphas.ndim - 1)), res.alpha, alphas)


def _evaluate_lazy(best, ranks, alphas, ubs, points, k, domain, target, evaluate, floor):
    for r, a in zip(ranks, alphas):
        bar = max(best.value, floor)
        if ubs[r] < bar:
            continue
        P = points[r : r + 1] / k
        q = domain.apply(a[None])
        if target.norm(target.combine(q))[0] < bar:
            continue
        vals, extras = evaluate(P, q, a[None], np.asarray([r]), floor=bar)
        if best.better(float(vals[0]), int(r)):
            best = Best(float(vals[0]), int(r), P[0], a, q[0], extras[0])
    return best


def _polish(best, ranks, alphas, points, k, domain, target, eps, cfg, opts, evaluate, stream):
    """Re-solve the first feasible points (highest bounds) towards ``p`` itself.

    The first witness found is only within ``eps`` of ``p``; pushing it
    closer raises ``||q||`` for the points that matter most.
    """
    if best.rank >= 0 and best.rank not in ranks:
        ranks = ranks + [best.rank]
        alphas = alphas + [best.alpha]
    ranks = np.asarray(ranks)
    P = points[ranks] / k
    res = solve_batch(P, domain, target, 0.0, replace(cfg, restarts=1), seed=opts.seed, ids=ranks,
                      stream=stream + "/polish", start=np.stack(alphas), minimize=True)
    ok = np.flatnonzero(res.achieved <= eps + cfg.tol)
    if ok.size:
        vals, extras = evaluate(P[ok], res.q[ok], res.alpha[ok], ranks[ok])
        for j, v, ex in zip(ok, vals, extras):
            if best.better(float(v), int(ranks[j])):
                best = Best(float(v), int(ranks[j]), P[j], res.alpha[j], res.q[j], ex)
    return best


# -- shared helpers -------------------------------------------------------------


def _resolve(n, delta, k, k_of, delta_of, budget, name):
    """Net size and working delta; the budget caps k and weakens the guarantee."""
    if delta is None and k is None:
        raise ParameterError(f"{name} needs delta or k")
    if delta is not None and not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    spec: NetSpec = _spec(n, delta, k_of, delta_of, budget, k)
    work = spec.attained_delta if (spec.capped or delta is None) else delta
    return spec, work


def _inflation(stats: ScanStats, max_y):
    if stats.scanned == 0:
        return 0.0
    return stats.indeterminate / stats.scanned * max_y


def _config(cfg: SolverConfig, opts: ScanOptions, **extra):
    out = {"solver": asdict(cfg), "budget": opts.budget, "batch": opts.batch, "wave": opts.wave}
    out.update(extra)
    return out


def _opts(budget, seed, threads):
    return ScanOptions(budget=int(budget), threads=threads, seed=int(seed))


def _extend_zero(Y, extra):
    if not extra:
        return Y
    return np.concatenate([Y, np.zeros((1,) + Y.shape[1:], dtype=Y.dtype)], axis=0)


# -- h_Sep for one-way LOCC ------------------------------------------------------


def hsep_basic(m: OneWayLOCC, delta=None, budget=DEFAULT_BUDGET, cfg: Optional[SolverConfig] = None, *,
               seed=0, threads=None, k=None, eps=None) -> EstimateReport:
    """Estimate ``h_Sep(M)`` for ``M = sum_i X_i (x) Y_i`` by scanning the net over ``p``.

    Feasibility tolerance is ``delta / 2``; the returned pair ``(alpha, beta)``
    satisfies ``h_Sep >= tr[M (alpha (x) beta)] >= h_Sep - attained_delta``.
    """
    t0 = time.perf_counter()
    cfg = cfg or SolverConfig()
    opts = _opts(budget, seed, threads)
    require_valid(m)
    X, added = complete_povm(m.X)
    Y = _extend_zero(hermitize(m.Y), added)
    n = len(X)
    spec, work = _resolve(n, delta, k, lambda dd: choose_k_basic(m.d2, dd),
                          lambda kk: attained_delta_basic(m.d2, kk), opts.budget, "hsep_basic")
    eps = work / 2 if eps is None else eps
    desc = banach_constants("schatten", math.inf, m.d2)
    target = TargetNorm(desc, Y)
    domain = DensityDomain(X)
    points = simplex_points(n, spec.k, opts.budget)

    def ub(P):
        return np.linalg.eigvalsh(target.combine(P))[..., -1] + eps + cfg.tol

    best, stats = scan(points, spec.k, domain, target, eps, cfg, opts, ub, stream="hsep")
    notes = []
    if added:
        notes.append("X completed to a POVM with a zero-Y outcome")
    M = m.operator()
    if best.rank < 0:
        notes.append("no feasible net point; witness is the maximally mixed alpha")
        alpha = np.eye(m.d1, dtype=complex) / m.d1
        q = domain.apply(alpha[None])[0]
    else:
        alpha, q = best.alpha, best.q
    _, b = top_eigenpair(target.combine(q))
    beta = projector(b)
    value = float(np.trace(M @ np.kron(alpha, beta)).real)
    if best.rank >= 0 and abs(value - best.value) > WITNESS_TOL:
        notes.append(f"witness value differs from scan value by {abs(value - best.value):.3g}")
    max_y = float(np.max(op_norm(Y))) if n else 0.0
    att = spec.attained_delta + 2 * cfg.tol + _inflation(stats, max_y)
    return EstimateReport(
        "hsep", value, delta, att, spec.k, n, eps, spec.capped, stats,
        {"alpha": alpha, "beta": beta, "p": best.coords if best.coords is not None else np.zeros(n), "q": q},
        opts.seed, best.value, time.perf_counter() - t0, notes=notes,
        config=_config(cfg, opts, d1=m.d1, d2=m.d2),
    )


def hsep_sparse(m: OneWayLOCC, delta, seed=0, budget=DEFAULT_BUDGET, cfg: Optional[SolverConfig] = None, *,
                threads=None, k=None, max_retries=64) -> EstimateReport:
    """Sparsify to ``||M - M'|| <= delta/2``, then run :func:`hsep_basic` at ``delta/2``."""
    from .sparsify import locc_sample_count, sparsify_locc

    t0 = time.perf_counter()
    require_valid(m)
    if not 0 < delta < 2:
        raise ParameterError(f"hsep_sparse needs 0 < delta < 2, got {delta}")
    n_prime = locc_sample_count(m.d1, m.d2, delta / 2)
    stage = {"stage": "sparsify", "n": m.n, "n_prime": n_prime}
    if m.n <= n_prime:
        m2, slack = m, 0.0
        stage["skipped"] = True
    else:
        m2, info = sparsify_locc(m, delta / 2, seed=seed, max_retries=max_retries, return_info=True)
        slack = float(op_norm(hermitize(m.operator() - m2.operator())))
        stage.update(skipped=False, distinct=info.distinct, retries=info.retries, deviation=slack)
    inner = hsep_basic(m2, delta / 2, budget, cfg, seed=seed, threads=threads, k=k)
    alpha, beta = inner.witnesses["alpha"], inner.witnesses["beta"]
    value = float(np.trace(m.operator() @ np.kron(alpha, beta)).real)
    out = EstimateReport(
        "hsep-sparse", value, delta, inner.attained_delta + slack, inner.k, inner.n, inner.eps, inner.capped,
        inner.stats, dict(inner.witnesses), seed, inner.scan_value, time.perf_counter() - t0,
        stages=[stage, inner.to_dict()], notes=list(inner.notes), config=inner.config,
    )
    return out


# -- multipartite ---------------------------------------------------------------


def _merge_children(root: Node, q):
    """``sum_i q_i M_i`` as a tree on the remaining parties."""
    terms = []
    for qi, (_, child) in zip(q, root.terms):
        if qi != 0:
            terms.extend(child.scaled(qi).terms)
    return _coalesce(terms)


def _coalesce(terms):
    """Combine terms whose ``X`` are multiples of each other.

    ``sum_a c_a X (x) M_a = (sum_a c_a) X (x) sum_a (c_a / sum c) M_a``: the
    operator is unchanged, the merged subtree is a convex combination of
    valid ones, and the outcome count on the next party does not grow with
    the number of branches that share a measurement.
    """
    groups = {}
    for X, child in terms:
        X = np.asarray(X, dtype=complex)
        tr = float(np.trace(X).real)
        if tr <= 0:
            continue
        key = np.round(X / tr, 12).tobytes()
        groups.setdefault(key, (X / tr, []))[1].append((tr, child))
    out = []
    for unit, members in groups.values():
        w = sum(c for c, _ in members)
        if members[0][1] is None:
            out.append((w * unit, None))
            continue
        sub = []
        for c, child in members:
            sub.extend(child.scaled(c / w).terms)
        out.append((w * unit, _coalesce(sub)))
    return Node(tuple(out))


def _leaf_operator(node: Node):
    return sum(np.asarray(X, dtype=complex) for X, _ in node.terms)


class _MultiScan:
    def __init__(self, dims, k, eps, cfg, opts):
        self.dims, self.k, self.eps, self.cfg, self.opts = dims, k, eps, cfg, opts
        self.stats = ScanStats()
        self.k_min = k

    def run(self, node: Node, depth, path, floor=-math.inf):
        """Best ``(value, states)`` for the subtree ``node`` on parties ``depth..``.

        Only values above ``floor`` matter to the caller; ``(-inf, None)``
        means none was found.
        """
        d = self.dims[depth]
        if depth == len(self.dims) - 1:
            val, v = top_eigenpair(_leaf_operator(node) if node.n else np.zeros((d, d), complex))
            return float(val), [projector(v)]
        X = np.asarray([t[0] for t in node.terms], dtype=complex).reshape(-1, d, d)
        ops = np.asarray([c.operator() for _, c in node.terms]) if node.n else np.zeros((0, 1, 1))
        X, added = complete_povm(X) if node.n else (np.eye(d, dtype=complex)[None], True)
        D = int(np.prod(self.dims[depth + 1 :]))
        Y = _extend_zero(hermitize(ops.reshape(-1, D, D)), added)
        n = len(X)
        desc = banach_constants("schatten", math.inf, max(D, 2))
        target = TargetNorm(desc, Y)
        domain = DensityDomain(X)
        k = self.k
        if net_size(n, k) > self.opts.budget:
            k = largest_affordable_k(n, self.opts.budget, k)
            if k < 1:
                raise BudgetExceeded(n, self.k, net_size(n, self.k), self.opts.budget, 0)
        self.k_min = min(self.k_min, k)
        points = simplex_points(n, k, self.opts.budget)
        eps, tol = self.eps, self.cfg.tol

        def ub(P):
            return np.linalg.eigvalsh(target.combine(P))[..., -1] + eps + tol

        last = depth + 1 == len(self.dims) - 1

        def evaluate(P, q, alpha, ranks, floor=-math.inf):
            if last:
                # one party left: the value is the top eigenvalue, already a norm
                return target.norm(target.combine(q)), [None] * len(q)
            vals, extras = [], []
            for qi, r in zip(q, ranks):
                sub = _merge_children(node, qi[: node.n])
                v, states = self.run(sub, depth + 1, path + (int(r),), floor)
                vals.append(v)
                extras.append(states)
            return np.asarray(vals), extras

        stream = "multi/" + "/".join(map(str, path))
        best, stats = scan(points, k, domain, target, eps, self.cfg, self.opts, ub, evaluate, stream,
                           lazy=not last, floor=floor)
        self.stats.add(stats)
        if best.rank < 0 and floor > -math.inf:
            return -math.inf, None
        if best.rank < 0:
            alpha = np.eye(d, dtype=complex) / d
            q = domain.apply(alpha[None])[0]
        else:
            alpha, q = best.alpha, best.q
        if last:
            _, b = top_eigenpair(target.combine(q))
            rest = [projector(b)]
        elif best.rank >= 0:
            rest = best.extra
        else:
            _, rest = self.run(_merge_children(node, q[: node.n]), depth + 1, path + (-1,))
        return best.value, [alpha] + rest


def hsep_multipartite(t: MultipartiteLOCC, delta=None, budget=DEFAULT_BUDGET, cfg: Optional[SolverConfig] = None, *,
                      seed=0, threads=None, k=None, eps=None, max_dim=MAX_ASSEMBLY_DIM,
                      sparsify=True) -> EstimateReport:
    """``h_Sep`` over l-party product states for a fully one-way LOCC tree.

    Each level scans a net over its outcome distribution with tolerance
    ``delta / 2l``, contracts the first party into the remaining tree with
    the witness ``q`` and recurses.  The two-party case reproduces
    :func:`hsep_basic` at ``delta / 2``.
    """
    t0 = time.perf_counter()
    cfg = cfg or SolverConfig()
    opts = _opts(budget, seed, threads)
    require_valid(t)
    l = t.parties
    if l < 2:
        raise ParameterError("hsep_multipartite needs at least two parties")
    total_dim = int(np.prod(t.dims))
    if total_dim > max_dim:
        raise ParameterError(f"assembled dimension {total_dim} exceeds {max_dim}; reduce the party dimensions")
    d = max(t.dims)
    root, stages, slack = t.root, [], 0.0
    n_top = root.n + 1
    spec, work = _resolve(n_top, delta, k, lambda dd: choose_k_multipartite(max(d, 2), l, dd),
                          lambda kk: attained_delta_multipartite(max(d, 2), l, kk), opts.budget, "hsep_multipartite")
    eps = work / (2 * l) if eps is None else eps
    if sparsify and delta is not None:
        root, stage, slack = _sparsify_tree(t, delta / (2 * l), seed)
        stages.append(stage)

    if l == 2:
        # two parties: the tree is a one-way LOCC measurement, scan it directly
        flat = OneWayLOCC(t.dims[0], t.dims[1], np.asarray([x for x, _ in root.terms], dtype=complex),
                          np.asarray([c.operator() for _, c in root.terms], dtype=complex))
        inner = hsep_basic(flat, budget=opts.budget, cfg=cfg, seed=opts.seed, threads=opts.threads,
                           k=spec.k, eps=eps)
        M = t.operator()
        states = [inner.witnesses["alpha"], inner.witnesses["beta"]]
        value = float(np.trace(M @ kron_all(states)).real)
        att = spec.attained_delta + 2 * cfg.tol + slack + _inflation(inner.stats, 1.0)
        return EstimateReport(
            "hsep-multi", value, delta, att, spec.k, n_top, eps, spec.capped, inner.stats,
            {"states": states}, opts.seed, inner.scan_value, time.perf_counter() - t0,
            stages=stages, notes=inner.notes, config=_config(cfg, opts, dims=list(t.dims)),
        )
    runner = _MultiScan(t.dims, spec.k, eps, cfg, opts)
    scan_value, states = runner.run(root, 0, ())
    M = t.operator()
    value = float(np.trace(M @ kron_all(states)).real)
    notes = []
    capped = spec.capped or runner.k_min < spec.k
    if runner.k_min < spec.k:
        notes.append(f"some levels ran with k = {runner.k_min} to stay within the budget")
    base_att = attained_delta_multipartite(max(d, 2), l, runner.k_min) if capped else spec.attained_delta
    if abs(value - scan_value) > WITNESS_TOL + slack:
        notes.append(f"witness value differs from scan value by {abs(value - scan_value):.3g}")
    att = base_att + 2 * cfg.tol + slack + _inflation(runner.stats, 1.0)
    return EstimateReport(
        "hsep-multi", value, delta, att, spec.k, n_top, eps, capped, runner.stats,
        {"states": states}, opts.seed, scan_value, time.perf_counter() - t0, stages=stages, notes=notes,
        config=_config(cfg, opts, dims=list(t.dims)),
    )


def _sparsify_tree(t: MultipartiteLOCC, eps, seed):
    """Sparsify the first level, treating each subtree as one ``Y`` operator."""
    from .sparsify import locc_sample_count, sparsify_locc

    root = t.root
    d1 = t.dims[0]
    D = int(np.prod(t.dims[1:]))
    n_prime = locc_sample_count(d1, D, eps)
    stage = {"stage": "sparsify", "n": root.n, "n_prime": n_prime}
    if root.n <= n_prime or not 0 < eps < 1:
        stage["skipped"] = True
        return root, stage, 0.0
    X = np.asarray([x for x, _ in root.terms], dtype=complex)
    ops = np.asarray([c.operator() for _, c in root.terms])
    m = OneWayLOCC(d1, D, X, ops)
    m2, info = sparsify_locc(m, eps, seed=seed, return_info=True)
    norms = op_norm(hermitize(ops))
    terms = tuple((x, root.terms[i][1].scaled(1.0 / norms[i])) for x, i in zip(m2.X, info.indices))
    new = Node(terms)
    slack = float(op_norm(hermitize(t.operator() - MultipartiteLOCC(t.dims, new).operator())))
    stage.update(skipped=False, distinct=info.distinct, deviation=slack)
    return new, stage, slack


# -- S_1 -> B norms ---------------------------------------------------------------


def s1_to_banach(g: GeneralDecomposition, desc: BanachDescriptor, delta=None, budget=DEFAULT_BUDGET, seed=0,
                 cfg: Optional[SolverConfig] = None, *, threads=None, k=None, eps=None, sparsify=False,
                 c_const=1.0, net_desc: Optional[BanachDescriptor] = None, max_y=None) -> EstimateReport:
    """``max_rho || sum_i tr[X_i rho] Y_i ||_B`` by a net scan with tolerance ``delta``.

    ``net_desc``/``max_y`` choose the net from a different space than the
    objective (for example an S_2 net for an S_inf objective, valid because
    the S_2 norm dominates).
    """
    t0 = time.perf_counter()
    cfg = cfg or SolverConfig()
    opts = _opts(budget, seed, threads)
    require_valid(g, desc)
    stages, slack, notes = [], 0.0, []
    if sparsify:
        from .sparsify import sparsify_general

        if delta is None:
            raise ParameterError("sparsification needs delta")
        g, info = sparsify_general(g, desc, delta / 2, seed=seed, c_const=c_const, return_info=True)
        stages.append({"stage": "sparsify", "samples": info.samples, "distinct": info.distinct,
                       "retries": info.retries, "gap_estimate": info.deviations.get("gap"), "certified": False})
        slack = delta / 2
        delta = delta / 2
        notes.append("sparsification distance is a heuristic estimate")
    X, added = complete_povm(g.X)
    Y = _extend_zero(np.asarray(g.Y), added)
    n = len(X)
    ndesc = net_desc or desc
    if max_y is None:
        max_y = float(np.max(ndesc.norm(g.Y))) if g.n else 1.0
    max_y = max(max_y, 1e-12)
    spec, work = _resolve(n, delta, k, lambda dd: choose_k_general(ndesc, dd, max_y),
                          lambda kk: attained_delta_general(ndesc, max_y, kk), opts.budget, "s1_to_banach")
    eps = work if eps is None else eps
    target = TargetNorm(desc, Y)
    domain = DensityDomain(X)
    points = simplex_points(n, spec.k, opts.budget)

    def ub(P):
        return target.norm(target.combine(P)) + eps + cfg.tol

    best, stats = scan(points, spec.k, domain, target, eps, cfg, opts, ub, stream="s1b")
    if added:
        notes.append("X completed to a POVM with a zero-Y outcome")
    if best.rank < 0:
        notes.append("no feasible net point; witness is the maximally mixed state")
        alpha = np.eye(g.d1, dtype=complex) / g.d1
    else:
        alpha = best.alpha
    value = float(desc.norm(g.apply(alpha)))
    if best.rank >= 0 and abs(value - best.value) > WITNESS_TOL:
        notes.append(f"witness value differs from scan value by {abs(value - best.value):.3g}")
    y_max = float(np.max(desc.norm(g.Y))) if g.n else 0.0
    att = spec.attained_delta + 2 * cfg.tol + slack + _inflation(stats, y_max)
    q = domain.apply(alpha[None])[0]
    return EstimateReport(
        "s1-to-banach", value, delta if not sparsify else 2 * delta, att, spec.k, n, eps, spec.capped, stats,
        {"alpha": alpha, "p": best.coords if best.coords is not None else np.zeros(n), "q": q},
        opts.seed, best.value, time.perf_counter() - t0, stages=stages, notes=notes,
        config=_config(cfg, opts, family=desc.family, param=_num(desc.param), dim=desc.dim,
                       net_family=ndesc.family, net_param=_num(ndesc.param), max_y=max_y),
    )


def _num(x):
    return "inf" if math.isinf(x) else float(x)


# -- injective norms --------------------------------------------------------------

A_FAMILIES = ("S1", "l1", "l2")


def signed_points(n, k):
    """Integer vectors ``z`` with ``||z||_1 <= k``: the distinct points ``(a - b)``
    for ``(a, b, slack)`` in Delta_{2n+1}(k).

    Ordered by sign pattern, then by the colex rank of ``(|z|, slack)``;
    coordinates with ``z_j = 0`` only appear under the ``+`` sign.
    """
    base = simplex_points(n + 1, k, net_size(n + 1, k)).astype(np.int64)[:, :n]
    out = []
    for pattern in range(2**n):
        s = np.array([-1 if (pattern >> j) & 1 else 1 for j in range(n)])
        ok = np.all((base > 0) | (s > 0), axis=1)
        out.append(base[ok] * s)
    pts = np.concatenate(out)
    dt = np.int8 if k < 2**7 else np.int16 if k < 2**15 else np.int32
    return pts.astype(dt)


def signed_size(n, k):
    return sum(2**j * math.comb(n, j) * math.comb(k, j) for j in range(0, min(n, k) + 1))


def _largest_signed_k(n, budget, k_max):
    lo = 0
    while lo < k_max and signed_size(n, lo + 1) <= budget:
        lo += 1
    return lo


def factorization_bound(xstar, A_family, restarts=100, seed=0):
    """Heuristic ``sup_{a in B(A)} sum_i |x_i^*(a)|`` (multi-start local search)."""
    from .oracle import injective_oracle

    n = len(xstar)
    l1 = BanachDescriptor("ell", 1.0, n, 1.0, 1.0, 0.5)
    return injective_oracle(xstar, np.eye(n), A_family, l1, restarts=restarts, seed=seed)


def injective_norm(xstar, y, A_family, desc_B: BanachDescriptor, delta=None, budget=DEFAULT_BUDGET,
                   cfg: Optional[SolverConfig] = None, *, seed=0, threads=None, k=None, eps=None) -> EstimateReport:
    """``||Lambda||_{A -> B}`` for ``Lambda(a) = sum_i x_i^*(a) y_i``.

    Requires ``sup_a sum_i |x_i^*(a)| <= 1`` (checked heuristically and
    recorded) and ``||y_i||_B <= 1``.  For ``A = S1`` with PSD functionals the
    sign of ``a`` is irrelevant, so the density-matrix scan is used.
    """
    t0 = time.perf_counter()
    if A_family not in A_FAMILIES:
        raise ParameterError(f"unsupported A family {A_family!r}; expected one of {A_FAMILIES}")
    cfg = cfg or SolverConfig()
    opts = _opts(budget, seed, threads)
    xstar = np.asarray(xstar)
    y = np.asarray(y)
    n = len(xstar)
    notes = []
    fb = factorization_bound(xstar, A_family, seed=seed)
    y_max = float(np.max(desc_B.norm(y))) if n else 0.0
    if fb > 1 + 1e-6:
        notes.append(f"factorization bound estimate {fb:.6g} exceeds 1")
    if y_max > 1 + 1e-9:
        notes.append(f"max ||y_i||_B = {y_max:.6g} exceeds 1")
    k_of = lambda dd: choose_k_injective(desc_B.C, desc_B.gamma, dd)
    delta_of = lambda kk: attained_delta_injective(desc_B.C, desc_B.gamma, kk)

    if A_family == "S1" and _psd_functionals(xstar):
        g = GeneralDecomposition(xstar.shape[-1], xstar.astype(complex), y)
        X, added = complete_povm(g.X)
        npts = len(X)
        spec, work = _resolve(npts, delta, k, k_of, delta_of, opts.budget, "injective_norm")
        eps = work if eps is None else eps
        target = TargetNorm(desc_B, _extend_zero(y, added))
        domain = DensityDomain(X)
        points, kk = simplex_points(npts, spec.k, opts.budget), spec.k
        capped = spec.capped
        att0 = spec.attained_delta
        notes.append("PSD functionals on S1: scanned over density matrices")
    else:
        domain = DOMAINS[A_family](xstar)
        target = TargetNorm(desc_B, y)
        if delta is None and k is None:
            raise ParameterError("injective_norm needs delta or k")
        kk = k if k is not None else k_of(delta)
        capped = False
        if signed_size(n, kk) > opts.budget:
            kk = _largest_signed_k(n, opts.budget, kk)
            if kk < 1:
                raise BudgetExceeded(2 * n + 1, k or 0, signed_size(n, k or 1), opts.budget, 0)
            capped = True
        att0 = delta_of(kk)
        work = att0 if (capped or delta is None) else delta
        eps = work if eps is None else eps
        points = signed_points(n, kk)
        npts = n

    def ub(P):
        return target.norm(target.combine(P)) + eps + cfg.tol

    best, stats = scan(points, kk, domain, target, eps, cfg, opts, ub, stream="inj")
    if best.rank < 0:
        notes.append("no feasible net point")
        a = domain.start(1)[0]
    else:
        a = best.alpha
    coeff = domain.apply(a[None])[0][:n]
    value = float(desc_B.norm(np.tensordot(coeff, y, axes=1)))
    if best.rank >= 0 and abs(value - best.value) > WITNESS_TOL:
        notes.append(f"witness value differs from scan value by {abs(value - best.value):.3g}")
    att = att0 + 2 * cfg.tol + _inflation(stats, y_max)
    return EstimateReport(
        "injective", value, delta, att, kk, npts, eps, capped, stats,
        {"a": a, "p": best.coords if best.coords is not None else np.zeros(npts), "q": coeff},
        opts.seed, best.value, time.perf_counter() - t0, notes=notes,
        config=_config(cfg, opts, A_family=A_family, family=desc_B.family, param=_num(desc_B.param),
                       factorization_bound=fb),
    )


def _psd_functionals(xstar):
    if xstar.ndim != 3:
        return False
    h = hermitize(xstar)
    if np.max(np.abs(h - xstar)) > 1e-10:
        return False
    ev = np.linalg.eigvalsh(h)
    return bool(np.all(ev >= -1e-9) and np.linalg.eigvalsh(h.sum(0))[-1] <= 1 + 1e-8)
