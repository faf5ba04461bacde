"""Finite spans of kernel sections as a model of H_c, H_o and their disk twins.

An element of a span is stored by its coefficients: with nodes ``lam_j`` and
coefficient blocks ``c_j`` it is the function ``mu -> sum_j K(mu, lam_j) c_j``.
Coefficients are not unique when sections are linearly dependent, so equality
of elements is measured in the Gram seminorm.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, PositivityError
from .kernels import (GramMatrix, KernelKind, gram, kernel_matrix, positivity_check,
                      spectral_pinv)
from .schur import SchurFunction, decode_point, encode_point

SPAN_TAGS = ("Ko", "Kc", "DiskKo", "DiskKc")
NODE_MATCH_TOL = 1e-12


class SpanBasis:
    """Kernel sections at a list of nodes, with their Gram matrix.

    Parameters
    ----------
    kind
        One of ``"Ko"``, ``"Kc"``, ``"DiskKo"``, ``"DiskKc"``.
    f
        The Schur function defining the kernel.
    nodes
        Pairwise distinct nodes in the kernel's domain.
    pinv_cutoff
        Relative eigenvalue cutoff used by the pseudo-inverse in projections.
    tol_psd
        Tolerance of the positivity check run at construction.
    """

    def __init__(self, kind, f: SchurFunction, nodes: Sequence[complex] = (),
                 pinv_cutoff: float = 1e-10, tol_psd: float = 1e-10):
        kind = kind if isinstance(kind, KernelKind) else KernelKind(kind)
        if kind.tag not in SPAN_TAGS:
            raise ValueError(f"spans are built from {SPAN_TAGS}, not {kind.tag}")
        self.kind = kind
        self.f = f
        self.pinv_cutoff = pinv_cutoff
        self.gram: GramMatrix = gram(kind, f, list(nodes))
        self.nodes = self.gram.nodes
        self.block_dim = kind.block_dim(f)
        report = positivity_check(self.gram, tol_psd)
        if not report.passed:
            raise PositivityError(f"Gram matrix fails positivity: eig_min={report.eig_min:.3e}, "
                                  f"eig_max={report.eig_max:.3e}")
        self.positivity = report

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return f"SpanBasis({self.kind.tag}, nodes={len(self)}, block_dim={self.block_dim})"

    @property
    def dim(self) -> int:
        """Length of a coefficient vector."""
        return len(self.nodes) * self.block_dim

    @property
    def G(self) -> np.ndarray:
        return self.gram.entries

    @cached_property
    def _pinv(self) -> tuple[np.ndarray, int]:
        return spectral_pinv(self.G, self.pinv_cutoff)

    @property
    def numerical_rank(self) -> int:
        return self._pinv[1]

    # -- vectors ------------------------------------------------------------

    def vector(self, coeffs) -> "ModelVector":
        coeffs = np.asarray(coeffs, dtype=complex).ravel()
        if coeffs.shape != (self.dim,):
            raise DimensionError(f"expected {self.dim} coefficients, got {coeffs.shape[0]}")
        return ModelVector(self, coeffs)

    def zeros(self) -> "ModelVector":
        return ModelVector(self, np.zeros(self.dim, complex))

    def section(self, j: int, v=None) -> "ModelVector":
        """The section ``K(., lam_j) v`` (``v`` defaults to the first unit vector)."""
        d = self.block_dim
        c = np.zeros(self.dim, complex)
        c[j * d:(j + 1) * d] = _unit(d) if v is None else np.asarray(v, complex).ravel()
        return ModelVector(self, c)

    def random_vector(self, rng: np.random.Generator) -> "ModelVector":
        c = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        return ModelVector(self, c / np.sqrt(2))

    def _own(self, x: "ModelVector") -> np.ndarray:
        if x.basis is not self:
            if x.coeffs.shape != (self.dim,):
                raise DimensionError("coefficient length does not match the basis")
        return x.coeffs

    # -- geometry -----------------------------------------------------------

    def inner(self, x: "ModelVector", y: "ModelVector") -> complex:
        """``<x, y>``: linear in ``x``, conjugate linear in ``y``."""
        return complex(np.vdot(self._own(y), self.G @ self._own(x)))

    def norm(self, x: "ModelVector") -> float:
        return float(np.sqrt(max(self.inner(x, x).real, 0.0)))

    def same_element(self, x: "ModelVector", y: "ModelVector", tol: float = 1e-10) -> bool:
        diff = x - y
        scale = max(self.norm(x), self.norm(y), 1.0)
        return self.norm(diff) <= tol * scale

    def sections_at(self, mus) -> np.ndarray:
        """Matrix mapping coefficients to the stacked values at ``mus``."""
        mus = np.atleast_1d(np.asarray(mus, complex))
        if self.dim == 0:
            return np.zeros((len(mus) * self.block_dim, 0), complex)
        return kernel_matrix(self.kind, self.f, mus, self.nodes)

    def point_eval(self, x: "ModelVector", mu: complex) -> np.ndarray:
        """``x(mu)`` as a vector of length ``block_dim``."""
        return self.sections_at([mu]) @ self._own(x)

    def point_eval_many(self, x: "ModelVector", mus) -> np.ndarray:
        vals = self.sections_at(mus) @ self._own(x)
        return vals.reshape(-1, self.block_dim)

    def evaluator(self, x: "ModelVector") -> Callable[[complex], np.ndarray]:
        coeffs = self._own(x).copy()
        return lambda mu: self.sections_at([mu]) @ coeffs

    def project(self, func: Callable | None = None, values=None, test_nodes=()) -> "Projection":
        """Orthogonal projection of a function known through point values.

        The right-hand side ``b_j = f(lam_j)`` is the vector of inner products
        of ``f`` with the sections, so only values at the nodes are needed.
        Residuals are reported at ``test_nodes`` when ``func`` is given.
        """
        if values is None:
            if func is None:
                raise ValueError("pass either func or values")
            values = np.array([np.asarray(func(lam), complex).ravel() for lam in self.nodes])
        b = np.asarray(values, complex).ravel()
        if b.shape != (self.dim,):
            raise DimensionError(f"expected {self.dim} sample entries, got {b.size}")
        P, rank = self._pinv
        x = ModelVector(self, P @ b)
        test_nodes = np.atleast_1d(np.asarray(test_nodes, complex))
        residuals = np.zeros(len(test_nodes))
        if func is not None and len(test_nodes):
            approx = self.point_eval_many(x, test_nodes)
            exact = np.array([np.asarray(func(nu), complex).ravel() for nu in test_nodes])
            residuals = np.linalg.norm(approx - exact, axis=1)
        return Projection(x, residuals, rank, test_nodes)

    def decay_bound_check(self, x: "ModelVector", probes, slack: float = 1e-8) -> "DecayReport":
        """Check ``|x(mu)| <= |x| / sqrt(2 Re mu)`` at each probe."""
        probes = np.atleast_1d(np.asarray(probes, complex))
        nx = self.norm(x)
        vals = np.linalg.norm(self.point_eval_many(x, probes), axis=1)
        bound = nx / np.sqrt(2 * probes.real)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(bound > 0, vals / bound, np.where(vals > 0, np.inf, 0.0))
        worst = float(ratio.max()) if len(ratio) else 0.0
        return DecayReport(worst <= 1 + slack, worst)

    # -- node bookkeeping ---------------------------------------------------

    def index_of(self, node: complex) -> int | None:
        if len(self.nodes) == 0:
            return None
        k = int(np.argmin(np.abs(self.nodes - node)))
        return k if abs(self.nodes[k] - node) <= NODE_MATCH_TOL * (1 + abs(node)) else None

    def augment(self, new_nodes: Sequence[complex]) -> "SpanBasis":
        """Basis with ``new_nodes`` appended (nodes already present are kept once)."""
        extra = []
        for nu in new_nodes:
            nu = complex(nu)
            if self.index_of(nu) is None and all(abs(nu - e) > NODE_MATCH_TOL * (1 + abs(nu)) for e in extra):
                extra.append(nu)
        if not extra:
            return self
        return SpanBasis(self.kind, self.f, list(self.nodes) + extra, self.pinv_cutoff)

    def embed(self, x: "ModelVector") -> "ModelVector":
        """Re-express ``x`` (from a basis whose nodes are a subset) in this basis."""
        if x.basis is self:
            return x
        d = self.block_dim
        c = np.zeros(self.dim, complex)
        for j, node in enumerate(x.basis.nodes):
            k = self.index_of(node)
            if k is None:
                raise DimensionError(f"node {node} is not part of the target basis")
            c[k * d:(k + 1) * d] += x.coeffs[j * d:(j + 1) * d]
        return ModelVector(self, c)

    def combine(self, terms: Sequence[tuple[complex, np.ndarray]]) -> "ModelVector":
        """Vector ``sum K(., node) v`` for ``(node, v)`` pairs; nodes must be in the basis."""
        d = self.block_dim
        c = np.zeros(self.dim, complex)
        for node, v in terms:
            k = self.index_of(node)
            if k is None:
                raise DimensionError(f"node {node} is not part of the basis")
            c[k * d:(k + 1) * d] += np.asarray(v, complex).ravel()
        return ModelVector(self, c)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.to_dict(),
            "function": self.f.to_dict(),
            "nodes": [encode_point(x) for x in self.nodes],
            "pinv_cutoff": self.pinv_cutoff,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "SpanBasis":
        from .schur import from_dict as schur_from_dict
        kind = obj["kind"]
        kk = KernelKind(kind["tag"], decode_point(kind["beta"]) if "beta" in kind else None)
        return cls(kk, schur_from_dict(obj["function"]), [decode_point(x) for x in obj["nodes"]],
                   obj.get("pinv_cutoff", 1e-10))


def _unit(d: int) -> np.ndarray:
    e = np.zeros(d, complex)
    if d:
        e[0] = 1
    return e


@dataclass(frozen=True, eq=False)
class ModelVector:
    """Coefficients of an element of a span, tied to its basis."""

    basis: SpanBasis
    coeffs: np.ndarray

    def _check(self, other: "ModelVector") -> None:
        if other.basis is not self.basis:
            raise DimensionError("vectors live on different bases; embed them first")

    def __add__(self, other: "ModelVector") -> "ModelVector":
        self._check(other)
        return ModelVector(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other: "ModelVector") -> "ModelVector":
        self._check(other)
        return ModelVector(self.basis, self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "ModelVector":
        return ModelVector(self.basis, complex(scalar) * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "ModelVector":
        return ModelVector(self.basis, -self.coeffs)

    def __call__(self, mu: complex) -> np.ndarray:
        return self.basis.point_eval(self, mu)

    def blocks(self) -> np.ndarray:
        """Coefficients reshaped to ``(len(basis), block_dim)``."""
        return self.coeffs.reshape(-1, self.basis.block_dim)

    def to_json(self) -> str:
        return json.dumps([encode_point(v) for v in self.coeffs])


@dataclass(frozen=True)
class Projection:
    vector: ModelVector
    residuals: np.ndarray
    numerical_rank: int
    test_nodes: np.ndarray


@dataclass(frozen=True)
class DecayReport:
    passed: bool
    worst_ratio: float


def build_span(kind, f: SchurFunction, nodes: Sequence[complex], **kwargs) -> SpanBasis:
    """Assemble and positivity-check a span basis."""
    return SpanBasis(kind, f, nodes, **kwargs)


def inner(basis: SpanBasis, x: ModelVector, y: ModelVector) -> complex:
    return basis.inner(x, y)


def point_eval(basis: SpanBasis, x: ModelVector, mu: complex) -> np.ndarray:
    return basis.point_eval(x, mu)
