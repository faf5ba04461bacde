"""Schur functions on the right half-plane and on the unit disk.

Three finitely described variants are supported: constants, scalar Blaschke
factors and state-space rational functions.  All of them are immutable and
exactly closed under the adjoint flip ``phi~(mu) = phi(conj(mu))^*`` and under
the Moebius pull-back to the disk, so neither operation ever needs numerical
conjugation of sampled values.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import DomainError, SingularError

HALFPLANE = "halfplane"
DISK = "disk"

# largest condition number accepted for mu - A before evaluation is refused
_COND_MAX = 1.0 / (np.finfo(float).eps * 1e3)


def _as_matrix(M: Any, shape: tuple[int, int] | None = None) -> np.ndarray:
    arr = np.array(M, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {arr.shape}")
    if shape is not None and arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


def encode_matrix(M: np.ndarray) -> list:
    """Nested list of ``[re, im]`` pairs, row-major."""
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    return [[[float(v.real), float(v.imag)] for v in row] for row in M]


def decode_matrix(data: Sequence, shape: tuple[int, int] | None = None) -> np.ndarray:
    rows = [[complex(re, im) for re, im in row] for row in data]
    if len(rows) == 0:
        if shape is None:
            raise ValueError("cannot infer the shape of an empty matrix")
        return np.zeros(shape, dtype=complex)
    return np.array(rows, dtype=complex).reshape(len(rows), len(rows[0]))


def encode_point(x: complex) -> list[float]:
    x = complex(x)
    return [x.real, x.imag]


def decode_point(data: Sequence[float]) -> complex:
    re, im = data
    return complex(re, im)


def in_domain(domain: str, x: complex, allow_boundary: bool = False) -> bool:
    x = complex(x)
    if domain == HALFPLANE:
        return x.real >= 0 if allow_boundary else x.real > 0
    if domain == DISK:
        return abs(x) <= 1 if allow_boundary else abs(x) < 1
    raise ValueError(f"unknown domain tag {domain!r}")


def _check_points(domain: str, pts: np.ndarray) -> None:
    if domain == HALFPLANE:
        bad = ~(pts.real > 0)
    else:
        bad = ~(np.abs(pts) < 1)
    if np.any(bad):
        raise DomainError(f"point {pts[bad][0]} lies outside the {domain} domain")


# ---------------------------------------------------------------------------
# Moebius maps between C+ and D

def z_alpha(alpha: complex, mu):
    """``(alpha - mu) / (conj(alpha) + mu)``, unchecked and vectorised."""
    return (alpha - mu) / (np.conj(alpha) + mu)


def mu_alpha(alpha: complex, z):
    """``(alpha - conj(alpha) z) / (1 + z)``, the inverse of :func:`z_alpha`."""
    return (alpha - np.conj(alpha) * z) / (1 + z)


def mobius(alpha: complex, x: complex, direction: str, allow_boundary: bool = False) -> complex:
    """Map a point between the right half-plane and the unit disk.

    Parameters
    ----------
    alpha
        Parameter with positive real part; it is sent to ``0``.
    x
        Point to map.
    direction
        ``"to_disk"`` or ``"to_halfplane"``.
    allow_boundary
        Accept points on the imaginary axis (resp. unit circle), for
        diagnostics on boundary values.
    """
    alpha = complex(alpha)
    x = complex(x)
    if not alpha.real > 0:
        raise DomainError("alpha must have positive real part")
    if direction == "to_disk":
        if not in_domain(HALFPLANE, x, allow_boundary):
            raise DomainError(f"{x} is not in the right half-plane")
        return complex(z_alpha(alpha, x))
    if direction == "to_halfplane":
        if not in_domain(DISK, x, allow_boundary) or x == -1:
            raise DomainError(f"{x} is not in the unit disk")
        return complex(mu_alpha(alpha, x))
    raise ValueError(f"unknown direction {direction!r}")


# ---------------------------------------------------------------------------
# function variants

class SchurFunction:
    """Common interface of the three variants."""

    kind: str
    domain: str

    @property
    def shape(self) -> tuple[int, int]:
        """``(p, m)``: output and input dimensions."""
        raise NotImplementedError

    @property
    def p(self) -> int:
        return self.shape[0]

    @property
    def m(self) -> int:
        return self.shape[1]

    def _values(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate_many(self, points) -> np.ndarray:
        """Values at an array of points, shape ``(N, p, m)``."""
        pts = np.atleast_1d(np.asarray(points, dtype=complex)).ravel()
        _check_points(self.domain, pts)
        return self._values(pts)

    def __call__(self, x: complex) -> np.ndarray:
        return self.evaluate_many([x])[0]

    def flip(self) -> "SchurFunction":
        raise NotImplementedError

    def realization(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """State-space data ``(A, B, C, D)`` reproducing the function."""
        raise NotImplementedError

    def at_infinity(self) -> np.ndarray:
        """Limit of ``phi(eta)`` as ``eta -> +inf`` (half-plane functions only)."""
        if self.domain != HALFPLANE:
            raise DomainError("the point at infinity belongs to the half-plane picture")
        return self.realization()[3]

    def _data(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, "domain": self.domain, "data": self._data()}


@dataclass(frozen=True, eq=False)
class Constant(SchurFunction):
    """The constant function ``phi = D``."""

    D: np.ndarray
    domain: str = HALFPLANE
    kind = "constant"

    def __post_init__(self):
        object.__setattr__(self, "D", _as_matrix(self.D))
        if self.domain not in (HALFPLANE, DISK):
            raise ValueError(f"unknown domain tag {self.domain!r}")

    @property
    def shape(self):
        return self.D.shape

    def _values(self, pts):
        return np.broadcast_to(self.D, (len(pts),) + self.D.shape).copy()

    def flip(self):
        return Constant(self.D.conj().T, self.domain)

    def realization(self):
        p, m = self.shape
        return (np.zeros((0, 0), complex), np.zeros((0, m), complex),
                np.zeros((p, 0), complex), self.D)

    def _data(self):
        return {"D": encode_matrix(self.D)}


@dataclass(frozen=True, eq=False)
class BlaschkeScalar(SchurFunction):
    """Scalar Blaschke factor ``(mu - a) / (mu + conj(a))`` with ``Re a > 0``."""

    a: complex
    kind = "blaschke"
    domain = HALFPLANE

    def __post_init__(self):
        a = complex(self.a)
        if not a.real > 0:
            raise DomainError("the zero of a Blaschke factor must lie in C+")
        object.__setattr__(self, "a", a)

    @property
    def shape(self):
        return (1, 1)

    def _values(self, pts):
        vals = (pts - self.a) / (pts + np.conj(self.a))
        return vals.reshape(-1, 1, 1)

    def flip(self):
        return BlaschkeScalar(np.conj(self.a))

    def realization(self):
        # energy preserving in both time directions
        s = np.sqrt(2 * self.a.real)
        return (np.array([[-np.conj(self.a)]]), np.array([[-s]], dtype=complex),
                np.array([[s]], dtype=complex), np.array([[1.0]], dtype=complex))

    def _data(self):
        return {"a": encode_point(self.a)}


@dataclass(frozen=True, eq=False)
class RationalStateSpace(SchurFunction):
    """Rational function given by a state-space realization.

    On the half-plane the value is ``D + C (mu - A)^{-1} B`` and ``A`` must be
    Hurwitz.  On the disk the value is ``D + z C (1 - z A)^{-1} B`` and ``A``
    must have spectral radius below one.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    domain: str = HALFPLANE
    kind = "rational"

    def __post_init__(self):
        A = _as_matrix(self.A) if np.size(self.A) else np.zeros((0, 0), complex)
        D = _as_matrix(self.D)
        p, m = D.shape
        n = A.shape[0]
        B = _as_matrix(self.B, (n, m)) if n else np.zeros((0, m), complex)
        C = _as_matrix(self.C, (p, n)) if n else np.zeros((p, 0), complex)
        if A.shape != (n, n):
            raise ValueError("A must be square")
        for name, val in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, val)
        if self.domain not in (HALFPLANE, DISK):
            raise ValueError(f"unknown domain tag {self.domain!r}")
        if n:
            eig = np.linalg.eigvals(A)
            if self.domain == HALFPLANE and np.any(eig.real >= 0):
                raise DomainError("A must be Hurwitz for a half-plane function")
            if self.domain == DISK and np.any(np.abs(eig) >= 1):
                raise DomainError("A must be Schur stable for a disk function")

    @property
    def shape(self):
        return self.D.shape

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def _values(self, pts):
        N = len(pts)
        if self.order == 0:
            return np.broadcast_to(self.D, (N,) + self.D.shape).copy()
        eye = np.eye(self.order)
        if self.domain == HALFPLANE:
            M = pts[:, None, None] * eye - self.A
        else:
            M = eye - pts[:, None, None] * self.A
        cond = np.linalg.cond(M)
        if np.any(~np.isfinite(cond) | (cond > _COND_MAX)):
            raise SingularError("resolvent of the state matrix is numerically singular")
        X = np.linalg.solve(M, np.broadcast_to(self.B, (N,) + self.B.shape))
        out = self.C @ X
        if self.domain == DISK:
            out = pts[:, None, None] * out
        return self.D + out

    def flip(self):
        return RationalStateSpace(self.A.conj().T, self.C.conj().T, self.B.conj().T,
                                  self.D.conj().T, self.domain)

    def realization(self):
        return self.A, self.B, self.C, self.D

    def _data(self):
        return {k: encode_matrix(getattr(self, k)) for k in "ABCD"}


def evaluate(f: SchurFunction, x: complex) -> np.ndarray:
    """Value of ``f`` at ``x`` as a ``p x m`` matrix."""
    return f(x)


def adjoint_flip(f: SchurFunction) -> SchurFunction:
    """The function ``x -> f(conj(x))^*``."""
    return f.flip()


def to_disk(f: SchurFunction, alpha: complex) -> SchurFunction:
    """Pull ``f`` back to the disk: ``g(z) = f(mu_alpha(z))``.

    Non-constant functions go through their realization, whose internal Cayley
    transform is a disk realization of ``g``.
    """
    alpha = complex(alpha)
    if f.domain != HALFPLANE:
        raise DomainError("to_disk expects a half-plane function")
    if not alpha.real > 0:
        raise DomainError("alpha must have positive real part")
    if isinstance(f, Constant):
        return Constant(f.D, DISK)
    A, B, C, _ = f.realization()
    n = A.shape[0]
    if n == 0:
        return Constant(f.at_infinity(), DISK)
    R = np.linalg.inv(alpha * np.eye(n) - A)
    s = np.sqrt(2 * alpha.real)
    Ad = (np.conj(alpha) * np.eye(n) + A) @ R
    return RationalStateSpace(Ad, s * R @ B, s * C @ R, f(alpha), DISK)


def from_dict(obj: dict) -> SchurFunction:
    """Inverse of :meth:`SchurFunction.to_dict`."""
    try:
        kind = obj["kind"]
        domain = obj.get("domain", HALFPLANE)
        data = obj["data"]
        if kind == "constant":
            return Constant(decode_matrix(data["D"]), domain)
        if kind == "blaschke":
            if domain != HALFPLANE:
                raise ValueError("Blaschke factors are half-plane functions")
            return BlaschkeScalar(decode_point(data["a"]))
        if kind == "rational":
            D = decode_matrix(data["D"])
            A = decode_matrix(data["A"], (0, 0))
            n = A.shape[0]
            B = decode_matrix(data["B"], (n, D.shape[1])) if n else np.zeros((0, D.shape[1]))
            C = decode_matrix(data["C"], (D.shape[0], n)) if n else np.zeros((D.shape[0], 0))
            return RationalStateSpace(A, B, C, D, domain)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed Schur function description: {exc}") from exc
    raise ValueError(f"unknown function kind {kind!r}")


# ---------------------------------------------------------------------------
# contractivity scan

@dataclass(frozen=True)
class ContractivityReport:
    max_singular_value: float
    argmax_point: complex
    flagged: bool


def scan_points(domain: str, n_boundary: int, n_interior: int) -> np.ndarray:
    """Boundary grid followed by quasi-random interior points."""
    if n_boundary < 1:
        raise ValueError("n_boundary must be at least 1")
    if domain == HALFPLANE:
        omega = np.logspace(-3, 3, n_boundary)
        boundary = 1e-9 + 1j * np.concatenate([-omega[::-1], omega])
    else:
        theta = 2 * np.pi * np.arange(n_boundary) / n_boundary
        boundary = (1 - 1e-9) * np.exp(1j * theta)
    if n_interior <= 0:
        return boundary
    u = qmc.Halton(d=2, scramble=False).random(n_interior + 1)[1:]
    z = 0.999 * np.sqrt(u[:, 0]) * np.exp(2j * np.pi * u[:, 1])
    interior = mu_alpha(1.0, z) if domain == HALFPLANE else z
    return np.concatenate([boundary, interior])


def contractivity_scan(f: SchurFunction, n_boundary: int = 200, n_interior: int = 64) -> ContractivityReport:
    """Largest singular value of ``f`` over a boundary grid and interior samples.

    Flags the function when the maximum exceeds ``1 + 1e-8``.
    """
    pts = scan_points(f.domain, n_boundary, n_interior)
    sv = np.linalg.svd(f.evaluate_many(pts), compute_uv=False)
    smax = sv.max(axis=1) if sv.shape[1] else np.zeros(len(pts))
    k = int(np.argmax(smax))
    top = float(smax[k])
    return ContractivityReport(top, complex(pts[k]), top > 1 + 1e-8)
