"""The covering net Delta_n(k) of k-sample empirical distributions.

Points are size-k multisets of ``{0, ..., n-1}``, listed in colexicographic
order (compare the largest element first).  A multiset with sorted entries
``i_0 <= ... <= i_{k-1}`` maps to the combination ``b_j = i_j + j`` of
``{0, ..., n+k-2}``, whose colex rank is ``sum_j C(b_j, j+1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .matlib import ParameterError

DEFAULT_BUDGET = 10**7
_SLACK = 1e-9


class BudgetExceeded(RuntimeError):
    def __init__(self, n, k, count, budget, max_k, attained_delta=None):
        self.n, self.k, self.count, self.budget = n, k, count, budget
        self.max_k = max_k
        self.attained_delta = attained_delta
        msg = f"|Delta_{n}({k})| = {count} exceeds budget {budget}; largest affordable k = {max_k}"
        if attained_delta is not None:
            msg += f" (guarantee {attained_delta:.4g})"
        super().__init__(msg)


@dataclass(frozen=True)
class NetPoint:
    indices: tuple
    n: int

    @property
    def k(self):
        return len(self.indices)

    def counts(self):
        return np.bincount(np.asarray(self.indices, dtype=np.int64), minlength=self.n)

    def probabilities(self):
        return self.counts() / self.k

    def rank(self):
        return rank(self.indices)


@dataclass(frozen=True)
class NetSpec:
    n: int
    k: int
    requested_delta: float
    attained_delta: float
    capped: bool

    @property
    def size(self):
        return net_size(self.n, self.k)


def net_size(n, k):
    return comb(n + k - 1, k)


def _ceil(x):
    # k formulas land on integers often (e.g. 2/0.1**2); don't let rounding bump them
    return max(1, math.ceil(x - _SLACK * max(1.0, abs(x))))


def choose_k_basic(d2, delta):
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    if d2 < 2:
        raise ParameterError("choose_k_basic needs d2 >= 2")
    return _ceil(9 * math.log(d2) / delta**2)


def choose_k_general(desc, delta, max_y):
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    if not max_y > 0:
        raise ParameterError(f"max_y must be positive, got {max_y}")
    g = desc.gamma
    if not g > 1:
        raise ParameterError(f"gamma must exceed 1, got {g}")
    return _ceil((2 * desc.C**g * max_y**g / delta**g) ** (1 / (g - 1)))


def choose_k_multipartite(d, l, delta):
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    if l < 2:
        raise ParameterError("choose_k_multipartite needs l >= 2; use choose_k_basic for one cut")
    if d < 2:
        raise ParameterError("choose_k_multipartite needs d >= 2")
    return _ceil(9 * l**2 * math.log(d) / delta**2)


def choose_k_injective(type_constant, gamma, delta):
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    if not gamma > 1:
        raise ParameterError(f"gamma must exceed 1, got {gamma}")
    return _ceil((2 * type_constant / delta) ** (gamma / (gamma - 1)))


def attained_delta_basic(d2, k):
    return math.sqrt(9 * math.log(d2) / k)


def attained_delta_general(desc, max_y, k):
    g = desc.gamma
    return (2 * desc.C**g * max_y**g / k ** (g - 1)) ** (1 / g)


def attained_delta_multipartite(d, l, k):
    return math.sqrt(9 * l**2 * math.log(d) / k)


def attained_delta_injective(type_constant, gamma, k):
    return 2 * type_constant / k ** ((gamma - 1) / gamma)


def largest_affordable_k(n, budget, k_max=None):
    """Largest k with ``|Delta_n(k)| <= budget`` (capped at ``k_max``)."""
    if net_size(n, 1) > budget:
        return 0
    if n == 1:
        # a single point for every k
        if k_max is None:
            raise ParameterError("with one outcome every k is affordable; pass k_max")
        return k_max
    lo, hi = 1, 2
    while net_size(n, hi) <= budget and (k_max is None or hi < k_max):
        lo, hi = hi, hi * 2
    if k_max is not None:
        hi = min(hi, k_max + 1)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if net_size(n, mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo if k_max is None else min(lo, k_max)


def rank(indices):
    """Colex rank of a sorted multiset."""
    return sum(comb(i + j, j + 1) for j, i in enumerate(indices))


def unrank(r, n, k):
    """Inverse of :func:`rank`: the multiset of size k with colex rank r."""
    total = net_size(n, k)
    if not 0 <= r < total:
        raise ParameterError(f"rank {r} outside [0, {total})")
    out = [0] * k
    top = n + k - 2
    for j in range(k - 1, -1, -1):
        # largest b <= top with C(b, j+1) <= r
        b = top
        while comb(b, j + 1) > r:
            b -= 1
        r -= comb(b, j + 1)
        out[j] = b - j
        top = b - 1
    return tuple(out)


def enumerate_net(n, k, budget=DEFAULT_BUDGET, attained=None):
    """Yield every point of Delta_n(k) once, in colex order.

    ``attained``, if given, maps a k to the guarantee it delivers; it is only
    used to annotate :class:`BudgetExceeded`.
    """
    if n < 1 or k < 1:
        raise ParameterError("enumerate_net needs n >= 1 and k >= 1")
    count = net_size(n, k)
    if count > budget:
        mk = largest_affordable_k(n, budget, k)
        raise BudgetExceeded(n, k, count, budget, mk, attained(mk) if (attained and mk) else None)
    cur = [0] * k
    while True:
        yield NetPoint(tuple(cur), n)
        # colex successor: bump the first entry that can grow, reset the prefix
        j = 0
        while j < k - 1 and cur[j] == cur[j + 1]:
            j += 1
        if j == k - 1 and cur[j] == n - 1:
            return
        cur[j] += 1
        for t in range(j):
            cur[t] = 0


def counts_block(n, k, start=0, stop=None):
    """Count vectors of the points with colex ranks in ``[start, stop)``.

    Returns an ``(m, n)`` int array.  Colex order groups points by the
    multiplicity of the largest value, which gives a recursion of depth n.
    """
    total = net_size(n, k)
    stop = total if stop is None else min(stop, total)
    if start >= stop:
        return np.zeros((0, n), dtype=np.int64)
    out = np.zeros((stop - start, n), dtype=np.int64)
    _fill(out, n, k, start, stop, 0)
    return out


def _fill(out, n, k, start, stop, row0):
    if n == 1:
        out[row0 : row0 + stop - start, 0] = k
        return
    offset = 0
    for c in range(k + 1):
        size = net_size(n - 1, k - c) if k - c > 0 else 1
        lo, hi = max(start, offset), min(stop, offset + size)
        if lo < hi:
            rows = slice(row0 + lo - start, row0 + hi - start)
            out[rows, n - 1] = c
            if k - c > 0:
                _fill(out[rows], n - 1, k - c, lo - offset, hi - offset, 0)
        offset += size
        if offset >= stop:
            break


def net_spec_basic(n, d2, delta, budget=DEFAULT_BUDGET, k=None):
    return _spec(n, delta, lambda dd: choose_k_basic(d2, dd), lambda kk: attained_delta_basic(d2, kk), budget, k)


def _spec(n, delta, k_of, delta_of, budget, k=None):
    k_req = k if k is not None else k_of(delta)
    capped = False
    if net_size(n, k_req) > budget:
        k_cap = largest_affordable_k(n, budget, k_req)
        if k_cap < 1:
            raise BudgetExceeded(n, k_req, net_size(n, k_req), budget, 0)
        capped = True
        k_req = k_cap
    requested = delta if delta is not None else delta_of(k_req)
    return NetSpec(n, k_req, requested, delta_of(k_req), capped)
