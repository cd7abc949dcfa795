"""Input objects and Banach-space descriptors.

Decompositions are stored as stacked arrays: ``X`` has shape ``(n, d1, d1)``
and ``Y`` has shape ``(n, d2, d2)`` (matrices) or ``(n, d2)`` (vectors in an
l_q space).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .matlib import (
    PSD_FLOOR,
    TOL_HERM,
    ParameterError,
    hermitize,
    op_norm,
    schatten_norm,
    vector_norm,
)

SUM_TOL = 1e-8
ZERO_Y = 1e-12


class UnsupportedParameter(ParameterError):
    pass


class ValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class Violation:
    rule: str
    index: Optional[tuple]
    magnitude: float

    def __str__(self):
        where = "" if self.index is None else f" at {self.index}"
        return f"{self.rule}{where} (by {self.magnitude:.3g})"


def _stack(mats, dim=None):
    arr = np.asarray([np.asarray(m, dtype=complex) for m in mats], dtype=complex)
    if arr.size == 0:
        shape = (0,) if dim is None else (0, dim, dim)
        return np.zeros(shape, dtype=complex)
    return arr


@dataclass(frozen=True, eq=False)
class OneWayLOCC:
    """``M = sum_i X_i (x) Y_i`` with ``X_i >= 0``, ``sum X_i <= I``, ``0 <= Y_i <= I``."""

    d1: int
    d2: int
    X: np.ndarray
    Y: np.ndarray

    @classmethod
    def from_terms(cls, terms, d1=None, d2=None):
        terms = list(terms)
        if d1 is None:
            d1 = np.asarray(terms[0][0]).shape[0]
        if d2 is None:
            d2 = np.asarray(terms[0][1]).shape[0]
        return cls(d1, d2, _stack([t[0] for t in terms], d1), _stack([t[1] for t in terms], d2))

    @property
    def n(self):
        return len(self.X)

    @property
    def terms(self):
        return list(zip(self.X, self.Y))

    def operator(self):
        if self.n == 0:
            return np.zeros((self.d1 * self.d2,) * 2, dtype=complex)
        return np.einsum("iab,icd->acbd", self.X, self.Y).reshape(self.d1 * self.d2, -1)


@dataclass(frozen=True, eq=False)
class GeneralDecomposition:
    """``Lambda(rho) = sum_i tr[X_i rho] Y_i`` with ``Y_i`` in a Banach space."""

    d1: int
    X: np.ndarray
    Y: np.ndarray

    @classmethod
    def from_terms(cls, terms, d1=None):
        terms = list(terms)
        if d1 is None:
            d1 = np.asarray(terms[0][0]).shape[0]
        Y = np.asarray([np.asarray(t[1]) for t in terms])
        if not np.iscomplexobj(Y) or np.allclose(Y.imag, 0):
            Y = Y.real if np.iscomplexobj(Y) else Y.astype(float)
        return cls(d1, _stack([t[0] for t in terms], d1), Y)

    @property
    def n(self):
        return len(self.X)

    def apply(self, rho):
        q = np.einsum("iab,ba->i", self.X, rho).real
        return np.tensordot(q, self.Y, axes=1)


@dataclass(frozen=True, eq=False)
class EBChannel:
    """Measure-and-prepare channel ``rho -> sum_i tr[X_i rho] Y_i``."""

    d1: int
    d2: int
    X: np.ndarray
    Y: np.ndarray

    @classmethod
    def from_terms(cls, terms, d1=None, d2=None):
        terms = list(terms)
        if d1 is None:
            d1 = np.asarray(terms[0][0]).shape[0]
        if d2 is None:
            d2 = np.asarray(terms[0][1]).shape[0]
        return cls(d1, d2, _stack([t[0] for t in terms], d1), _stack([t[1] for t in terms], d2))

    @property
    def n(self):
        return len(self.X)

    def apply(self, rho):
        q = np.einsum("iab,ba->i", self.X, rho).real
        return np.tensordot(q, self.Y, axes=1)

    def as_general(self):
        return GeneralDecomposition(self.d1, self.X, self.Y)


@dataclass(frozen=True, eq=False)
class Node:
    """One level of a fully one-way LOCC tree.

    ``terms`` holds pairs ``(X, child)``; ``child`` is ``None`` on the last
    party.
    """

    terms: tuple

    @property
    def n(self):
        return len(self.terms)

    def operator(self):
        """The operator this subtree represents on its parties."""
        total = None
        for X, child in self.terms:
            piece = np.asarray(X, dtype=complex)
            if child is not None:
                piece = np.kron(piece, child.operator())
            total = piece if total is None else total + piece
        return total

    def scaled(self, c):
        return Node(tuple((c * np.asarray(X), child) for X, child in self.terms))


@dataclass(frozen=True, eq=False)
class MultipartiteLOCC:
    dims: tuple
    root: Node

    @property
    def parties(self):
        return len(self.dims)

    def operator(self):
        return self.root.operator()

    @classmethod
    def from_locc(cls, m: OneWayLOCC):
        leaf = lambda Y: Node(((Y, None),))
        return cls((m.d1, m.d2), Node(tuple((X, leaf(Y)) for X, Y in m.terms)))


@dataclass(frozen=True)
class BanachDescriptor:
    """A Schatten-alpha or l_q space with its type and smoothness constants."""

    family: str
    param: float
    dim: int
    gamma: float
    C: float
    s: float

    def norm(self, x):
        if self.family == "schatten":
            return schatten_norm(x, self.param)
        return vector_norm(x, self.param)

    @property
    def element_ndim(self):
        return 2 if self.family == "schatten" else 1


def banach_constants(family, param, dim):
    """Type-gamma constant and quadratic smoothness coefficient for ``family``.

    Schatten-alpha with alpha >= 2 is type 2 with constant sqrt(alpha - 1)
    and smoothness (alpha - 1)/2.  For 1 < alpha < 2 the space is type alpha
    with constant 1; the quadratic smoothness coefficient is set to 1/2 by
    convention.  l_q spaces embed diagonally and reuse the Schatten values.
    """
    if family not in ("schatten", "ell"):
        raise ParameterError(f"unknown family {family!r}")
    alpha = float(param)
    if not alpha > 1:
        raise UnsupportedParameter(
            f"alpha={param} not supported: the net size blows up as alpha -> 1 "
            "(estimating near-trace-norm quantities needs O(d) samples)"
        )
    if dim < 1:
        raise ParameterError("dim must be positive")
    if math.isinf(alpha):
        logd = math.log(dim) if dim > 1 else 0.0
        return BanachDescriptor(family, math.inf, dim, 2.0, max(1.0, math.sqrt(2 * logd)), max(logd, 0.5))
    if alpha >= 2:
        return BanachDescriptor(family, alpha, dim, 2.0, math.sqrt(alpha - 1), (alpha - 1) / 2)
    return BanachDescriptor(family, alpha, dim, alpha, 1.0, 0.5)


# -- validation -------------------------------------------------------------


def _herm_dev(x):
    x = np.asarray(x)
    return float(np.max(np.abs(x - np.conj(np.swapaxes(x, -1, -2))), initial=0.0))


def _check_x_side(X, out, prefix="", need_sum_eq=False):
    for i, Xi in enumerate(X):
        dev = _herm_dev(Xi)
        if dev > TOL_HERM:
            out.append(Violation(f"{prefix}X hermitian", (i,), dev))
        lo = float(np.linalg.eigvalsh(hermitize(Xi))[0])
        if lo < PSD_FLOOR:
            out.append(Violation(f"{prefix}X >= 0", (i,), -lo))
    if len(X) == 0:
        return
    S = hermitize(np.sum(X, axis=0))
    ev = np.linalg.eigvalsh(S)
    if ev[-1] > 1 + SUM_TOL:
        out.append(Violation(f"{prefix}sum X <= I", None, float(ev[-1] - 1)))
    if need_sum_eq and ev[0] < 1 - SUM_TOL:
        out.append(Violation(f"{prefix}sum X >= I", None, float(1 - ev[0])))


def _check_effect(Y, out, label, index):
    dev = _herm_dev(Y)
    if dev > TOL_HERM:
        out.append(Violation(f"{label} hermitian", index, dev))
    ev = np.linalg.eigvalsh(hermitize(Y))
    if ev[0] < PSD_FLOOR:
        out.append(Violation(f"{label} >= 0", index, float(-ev[0])))
    if ev[-1] > 1 + SUM_TOL:
        out.append(Violation(f"{label} <= I", index, float(ev[-1] - 1)))


def _check_shapes(X, d, label, out):
    X = np.asarray(X)
    if X.ndim != 3 or X.shape[1:] != (d, d):
        out.append(Violation(f"{label} shape {X.shape} != (n, {d}, {d})", None, float("nan")))
        return False
    if not np.all(np.isfinite(X)):
        out.append(Violation(f"{label} finite", None, float("nan")))
        return False
    return True


def _validate_node(node, dims, depth, path, out):
    d = dims[depth]
    last = depth == len(dims) - 1
    Xs = []
    for i, (X, child) in enumerate(node.terms):
        X = np.asarray(X)
        if X.shape != (d, d):
            out.append(Violation(f"party {depth + 1} X shape {X.shape} != ({d}, {d})", path + (i,), float("nan")))
            return
        Xs.append(X)
        if last and child is not None:
            out.append(Violation("tree deeper than number of parties", path + (i,), float("nan")))
        if not last and child is None:
            out.append(Violation("tree shallower than number of parties", path + (i,), float("nan")))
    prefix = f"party {depth + 1} "
    for i, X in enumerate(Xs):
        dev = _herm_dev(X)
        if dev > TOL_HERM:
            out.append(Violation(prefix + "X hermitian", path + (i,), dev))
        lo = float(np.linalg.eigvalsh(hermitize(X))[0])
        if lo < PSD_FLOOR:
            out.append(Violation(prefix + "X >= 0", path + (i,), -lo))
    if Xs:
        top = float(np.linalg.eigvalsh(hermitize(np.sum(Xs, axis=0)))[-1])
        if top > 1 + SUM_TOL:
            out.append(Violation(prefix + "sum X <= I", path or None, top - 1))
    if not last:
        for i, (_, child) in enumerate(node.terms):
            if child is not None:
                _validate_node(child, dims, depth + 1, path + (i,), out)


def validate(obj, desc: Optional[BanachDescriptor] = None):
    """List every violated invariant of ``obj``; an empty list means valid."""
    out = []
    if isinstance(obj, OneWayLOCC):
        if _check_shapes(obj.X, obj.d1, "X", out) & _check_shapes(obj.Y, obj.d2, "Y", out):
            _check_x_side(obj.X, out)
            for i, Y in enumerate(obj.Y):
                _check_effect(Y, out, "Y", (i,))
    elif isinstance(obj, EBChannel):
        if _check_shapes(obj.X, obj.d1, "X", out) & _check_shapes(obj.Y, obj.d2, "Y", out):
            _check_x_side(obj.X, out, need_sum_eq=True)
            for i, Y in enumerate(obj.Y):
                dev = _herm_dev(Y)
                if dev > TOL_HERM:
                    out.append(Violation("Y hermitian", (i,), dev))
                lo = float(np.linalg.eigvalsh(hermitize(Y))[0])
                if lo < PSD_FLOOR:
                    out.append(Violation("Y >= 0", (i,), -lo))
                tr = float(np.trace(Y).real)
                if abs(tr - 1) > 1e-9:
                    out.append(Violation("tr Y = 1", (i,), abs(tr - 1)))
    elif isinstance(obj, GeneralDecomposition):
        if _check_shapes(obj.X, obj.d1, "X", out):
            _check_x_side(obj.X, out)
        Y = np.asarray(obj.Y)
        if not np.all(np.isfinite(Y)):
            out.append(Violation("Y finite", None, float("nan")))
        elif desc is not None:
            if Y.ndim - 1 != desc.element_ndim:
                out.append(Violation(f"Y elements must have {desc.element_ndim} axes for {desc.family}", None, float("nan")))
    elif isinstance(obj, MultipartiteLOCC):
        if len(obj.dims) < 1:
            out.append(Violation("at least one party", None, float("nan")))
        else:
            _validate_node(obj.root, tuple(obj.dims), 0, (), out)
    elif isinstance(obj, BanachDescriptor):
        if not 1 < obj.gamma <= 2:
            out.append(Violation("gamma in (1, 2]", None, float(obj.gamma)))
        if obj.C < 1:
            out.append(Violation("C >= 1", None, float(1 - obj.C)))
        if obj.s <= 0:
            out.append(Violation("s > 0", None, float(-obj.s)))
    else:
        raise TypeError(f"cannot validate {type(obj).__name__}")
    return out


def require_valid(obj, desc=None):
    v = validate(obj, desc)
    if v:
        raise ValidationError(v)
    return obj


def normalize_locc(m: OneWayLOCC) -> OneWayLOCC:
    """Rescale every term to ``(||Y_i|| X_i, Y_i / ||Y_i||)``, dropping zero ``Y_i``."""
    if m.n == 0:
        return m
    norms = op_norm(hermitize(m.Y))
    keep = norms >= ZERO_Y
    X = m.X[keep] * norms[keep][:, None, None]
    Y = m.Y[keep] / norms[keep][:, None, None]
    return OneWayLOCC(m.d1, m.d2, X, Y)


def complete_povm(X, tol=1e-12):
    """Append ``I - sum X_i`` when the X's do not already sum to the identity.

    Returns the extended stack and whether an extra outcome was added.
    """
    d = X.shape[-1]
    rest = hermitize(np.eye(d) - np.sum(X, axis=0))
    if np.max(np.abs(np.linalg.eigvalsh(rest))) <= tol:
        return X, False
    w, v = np.linalg.eigh(rest)
    rest = (v * np.clip(w, 0, None)) @ v.conj().T
    return np.concatenate([X, rest[None]], axis=0), True
