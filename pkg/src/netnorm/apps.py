"""Channel output norms and 2 -> q matrix norms via the net estimators."""

from __future__ import annotations

import math
import time
from typing import Optional

import numpy as np

from .algorithms import EstimateReport, ScanStats, hsep_multipartite, s1_to_banach
from .feascheck import SolverConfig
from .matlib import ParameterError, hermitize
from .model import (
    EBChannel,
    GeneralDecomposition,
    MultipartiteLOCC,
    Node,
    UnsupportedParameter,
    banach_constants,
    require_valid,
)
from .nets import DEFAULT_BUDGET


def eb_channel_max_output_norm(ch: EBChannel, alpha, delta=None, budget=DEFAULT_BUDGET, seed=0,
                               cfg: Optional[SolverConfig] = None, **kw) -> EstimateReport:
    """``max_rho ||Lambda(rho)||_{S_alpha}`` for an entanglement-breaking channel."""
    require_valid(ch)
    desc = banach_constants("schatten", alpha, ch.d2)
    rep = s1_to_banach(ch.as_general(), desc, delta, budget, seed, cfg, **kw)
    rep.algorithm = "channel-norm"
    rep.config["alpha"] = "inf" if math.isinf(desc.param) else float(desc.param)
    return rep


def two_to_q_setup(A):
    """``X_i = A^dagger |i><i| A / ||A||^2`` and ``||A||_{2->2}^2``."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or not np.any(A):
        raise ParameterError("A must be a nonzero matrix")
    s2 = float(np.linalg.svd(A, compute_uv=False)[0] ** 2)
    X = np.einsum("ia,ib->iab", A.conj(), A) / s2
    return hermitize(X), s2


def _lq(v, q):
    return float(np.sum(np.abs(v) ** q) ** (1 / q))


def two_to_q_norm(A, q, delta=None, budget=DEFAULT_BUDGET, seed=0, cfg: Optional[SolverConfig] = None,
                  **kw) -> EstimateReport:
    """Estimate ``x ~ ||A||_{2->q}^2`` with ``||A||^2_{2->q} >= x >= ||A||^2_{2->q} - delta ||A||^2``.

    ``||Ax||_q^2 = ||A||^2 ||p||_{q/2}`` with ``p_i = tr[X_i x x^dagger]``, so the
    problem is an S_1 -> l_{q/2} norm.  At q = 2 the l_1 norm of ``p`` is
    ``tr[rho sum X_i]`` and the maximum is exactly 1.
    """
    t0 = time.perf_counter()
    if not q >= 2:
        raise UnsupportedParameter(f"two_to_q_norm needs q >= 2, got {q}")
    X, s2 = two_to_q_setup(A)
    A = np.asarray(A, dtype=complex)
    d1, d2 = A.shape
    if q == 2:
        _, V = np.linalg.eigh(np.sum(X, axis=0))
        x = V[:, -1]
        value = float(np.linalg.norm(A @ x) ** 2)
        return EstimateReport(
            "two-to-q", value, delta, 0.0, 0, d1, 0.0, False, ScanStats(), {"x": x}, seed, value,
            time.perf_counter() - t0, notes=["q = 2: the l_1 objective is tr[rho sum X_i], maximized exactly"],
            config={"q": 2.0, "scale": s2},
        )
    desc = banach_constants("ell", q / 2, d1)
    g = GeneralDecomposition(d2, X, np.eye(d1))
    rep = s1_to_banach(g, desc, delta, budget, seed, cfg, **kw)
    scan_x = s2 * rep.value
    # the objective is convex in rho, so some eigenvector of the witness does at least as well
    w, V = np.linalg.eigh(hermitize(rep.witnesses["alpha"]))
    vals = [_lq(A @ V[:, j], q) ** 2 for j in range(d2)]
    j = int(np.argmax(vals))
    value = max(vals[j], scan_x)
    rep.algorithm = "two-to-q"
    rep.value = float(value)
    rep.witnesses["x"] = V[:, j]
    rep.attained_delta = rep.attained_delta * s2
    rep.scan_value = rep.scan_value * s2
    rep.config.update(q=float(q), scale=s2)
    rep.notes.append("value and delta are in units of ||A x||_q^2")
    return rep


def two_to_q_even(A, q, delta=None, budget=DEFAULT_BUDGET, seed=0, cfg: Optional[SolverConfig] = None,
                  max_dim=256, **kw) -> EstimateReport:
    """``x ~ ||A||_{2->q}^q`` for even q via an (q/2)-party product-state problem.

    ``M = sum_i X_i (x) Z_i^{(x) (q/2 - 1)}`` with ``Z_i = A^dagger |i><i| A / ||A||_{2->inf}^2``;
    ``x = ||A||^2 ||A||_{2->inf}^{q-2} h_Sep(M)``.  Odd q goes to :func:`two_to_q_norm`.
    """
    if q % 2 == 1:
        return two_to_q_norm(A, q, delta, budget, seed, cfg, **kw)
    if q < 4 or q != int(q):
        raise UnsupportedParameter(f"two_to_q_even needs an even q >= 4, got {q}")
    q = int(q)
    A = np.asarray(A, dtype=complex)
    X, s2 = two_to_q_setup(A)
    d1, d2 = A.shape
    rows = np.sum(np.abs(A) ** 2, axis=1)
    sinf = float(np.max(rows))
    Z = X * (s2 / sinf)
    parties = q // 2
    if d2**parties > max_dim:
        raise ParameterError(f"assembled dimension {d2 ** parties} exceeds {max_dim}")

    def chain(Zi, depth):
        return Node(((Zi, None if depth == 1 else chain(Zi, depth - 1)),))

    root = Node(tuple((X[i], chain(Z[i], parties - 1)) for i in range(d1)))
    tree = MultipartiteLOCC((d2,) * parties, root)
    rep = hsep_multipartite(tree, delta, budget, cfg, seed=seed, max_dim=max_dim, **kw)
    scale = s2 * sinf ** (parties - 1)
    states = rep.witnesses["states"]
    # best vector among the witness states' eigenvectors, checked directly
    cands = [np.linalg.eigh(hermitize(s))[1][:, -1] for s in states]
    direct = [_lq(A @ v, q) ** q for v in cands]
    j = int(np.argmax(direct))
    rep.algorithm = "two-to-q-even"
    rep.scan_value = rep.value * scale
    rep.value = float(max(rep.value * scale, direct[j]))
    rep.witnesses["x"] = cands[j]
    rep.attained_delta *= scale
    rep.config.update(q=float(q), scale=scale)
    rep.notes.append("value and delta are in units of ||A x||_q^q")
    return rep
