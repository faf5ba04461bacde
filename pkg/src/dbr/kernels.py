"""Reproducing kernels, Gram matrices and positivity checks.

Block conventions: a kernel value ``K(mu, lam)`` is a square matrix of size
``p`` for observable kernels (``Ko``, ``DiskKo`` and the ``Ko*`` riggings) and
``m`` for controllable kernels.  The Gram matrix of nodes ``lam_1..lam_N`` has
block ``(j, k)`` equal to ``K(lam_j, lam_k)``, so that for coefficient vectors
``x`` and ``y`` the inner product of the corresponding section combinations is
``y^* G x``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConvergenceError, DegenerateNodeError, DomainError
from .schur import (DISK, HALFPLANE, SchurFunction, encode_matrix, encode_point,
                    to_disk, z_alpha)

BASE_TAGS = ("H2", "Ko", "Kc", "DiskKo", "DiskKc")
RIGGED_TAGS = ("Kc1d", "Kcm1d", "Kcm1", "Kc1", "Ko1", "Kom1", "Kom1d", "Ko1d")
APPROX_TAGS = ("Kc1", "Ko1d")
EXACT_RIGGED_TAGS = tuple(t for t in RIGGED_TAGS if t not in APPROX_TAGS)

# denominators below this trigger the removable-singularity policy
SINGULAR_TOL = 1e-8
CONTINUATION_STEP = 1e-5
_CIRCLE = np.exp(2j * np.pi * np.arange(64) / 64)


@dataclass(frozen=True)
class KernelKind:
    """Selects a kernel formula; rigged tags carry the parameter ``beta``."""

    tag: str
    beta: complex | None = None

    def __post_init__(self):
        if self.tag not in BASE_TAGS + RIGGED_TAGS:
            raise ValueError(f"unknown kernel tag {self.tag!r}")
        if self.tag in RIGGED_TAGS:
            if self.beta is None or not complex(self.beta).real > 0:
                raise DomainError(f"{self.tag} needs a rigging parameter with positive real part")
            object.__setattr__(self, "beta", complex(self.beta))
        elif self.beta is not None:
            raise ValueError(f"{self.tag} takes no rigging parameter")

    @property
    def approx(self) -> bool:
        return self.tag in APPROX_TAGS

    @property
    def domain(self) -> str:
        return DISK if self.tag.startswith("Disk") else HALFPLANE

    @property
    def observable(self) -> bool:
        return self.tag in ("H2", "DiskKo") or self.tag.startswith("Ko")

    def block_dim(self, f: SchurFunction | None) -> int:
        if f is None:
            return 1
        return f.p if self.observable else f.m

    def to_dict(self) -> dict:
        out = {"tag": self.tag}
        if self.beta is not None:
            out["beta"] = encode_point(self.beta)
        return out


def _kind(kind) -> KernelKind:
    return kind if isinstance(kind, KernelKind) else KernelKind(kind)


def _pts(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=complex)).ravel()


def _herm(M: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(M, -1, -2))


# ---------------------------------------------------------------------------
# base kernels, returned as arrays of shape (len(mus), len(lams), d, d)

def _observable_base(f, mus, lams, denom):
    Pm = f.evaluate_many(mus)
    Pl = f.evaluate_many(lams)
    eye = np.eye(f.p)
    num = eye - Pm[:, None] @ _herm(Pl)[None, :]
    return num / denom[..., None, None]


def _controllable_base(f, mus, lams, denom):
    Pm = _herm(f.evaluate_many(np.conj(mus)))
    Pl = f.evaluate_many(np.conj(lams))
    eye = np.eye(f.m)
    num = eye - Pm[:, None] @ Pl[None, :]
    return num / denom[..., None, None]


def _hp_denom(mus, lams):
    return mus[:, None] + np.conj(lams)[None, :]


def _disk_denom(mus, lams):
    return 1 - mus[:, None] * np.conj(lams)[None, :]


def _check_domain(f, domain):
    if f is not None and f.domain != domain:
        raise DomainError(f"kernel expects a {domain} function, got a {f.domain} one")


def _ko(f, mus, lams):
    return _observable_base(f, mus, lams, _hp_denom(mus, lams))


def _kc(f, mus, lams):
    return _controllable_base(f, mus, lams, _hp_denom(mus, lams))


def _contour(s: complex) -> tuple[np.ndarray, float]:
    """Trapezoid nodes on the circle of radius ``Re(s)/4`` around ``s``."""
    r = 0.25 * s.real
    return s + r * _CIRCLE, r


def _cauchy_weights(ring: np.ndarray, s: complex, pts: np.ndarray) -> np.ndarray:
    """Weights ``w[j, k]`` with ``g(pts[j]) ~ sum_k w[j, k] g(ring[k])`` for analytic ``g``."""
    return (ring - s)[None, :] / (ring[None, :] - pts[:, None]) / len(ring)


def _continued(fn, mus, lams, s_row, s_col):
    """Evaluate ``fn`` with removable singularities at ``mu = s_row`` and
    ``lam = s_col`` filled in by the Cauchy integral formula.

    ``fn`` is analytic in ``mu`` and anti-analytic in ``lam`` on the right
    half-plane.  Points closer than an eighth of ``Re(s)`` to the singular
    point are recomputed from values on a circle of radius ``Re(s)/4``; the
    trapezoid rule converges geometrically there, so no cancellation near
    ``s`` enters the result.
    """
    def cols_fixed(m):
        out = fn(m, lams)
        if s_col is None:
            return out
        ring, r = _contour(complex(s_col))
        bad = np.abs(lams - s_col) < 0.5 * r
        if np.any(bad):
            w = np.conj(_cauchy_weights(ring, complex(s_col), lams[bad]))
            out[:, bad] = np.einsum("jk,mkab->mjab", w, fn(m, ring))
        return out

    # rows or columns hit exactly at the singular point are 0/0 until replaced
    with np.errstate(divide="ignore", invalid="ignore"):
        out = cols_fixed(mus)
        if s_row is not None:
            ring, r = _contour(complex(s_row))
            bad = np.abs(mus - s_row) < 0.5 * r
            if np.any(bad):
                w = _cauchy_weights(ring, complex(s_row), mus[bad])
                out[bad] = np.einsum("jk,klab->jlab", w, cols_fixed(ring))
    return out


def _double_quotient(base, s):
    """``[K(mu,l) - K(mu,s) - K(s,l) + K(s,s)] / ((s - mu) conj(s - l))``."""
    sv = np.array([s])

    def fn(mus, lams):
        num = base(mus, lams) - base(mus, sv) - base(sv, lams) + base(sv, sv)
        den = (s - mus)[:, None] * np.conj(s - lams)[None, :]
        return num / den[..., None, None]
    return fn


def _single_quotient(base, s):
    """``[K(mu,l) - K(s,l)] / (s - mu)``."""
    sv = np.array([s])

    def fn(mus, lams):
        num = base(mus, lams) - base(sv, lams)
        return num / (s - mus)[:, None, None, None]
    return fn


def default_aux_nodes(n: int = 40, rmin: float = 0.1, rmax: float = 50.0) -> np.ndarray:
    """Two rays at ``arg = +-pi/6`` with log-spaced radii."""
    radii = np.logspace(np.log10(rmin), np.log10(rmax), n // 2)
    ray = np.exp(1j * np.pi / 6)
    return np.concatenate([radii * ray, radii * np.conj(ray)])


def spectral_pinv(G: np.ndarray, cutoff: float = 1e-10) -> tuple[np.ndarray, int]:
    """Pseudo-inverse of a Hermitian PSD matrix with a relative eigenvalue cutoff."""
    if G.size == 0:
        return G.copy(), 0
    w, V = np.linalg.eigh(0.5 * (G + G.conj().T))
    keep = w > cutoff * max(w.max(), 0.0)
    if not np.any(keep):
        return np.zeros_like(G), 0
    Vk = V[:, keep]
    return (Vk / w[keep]) @ Vk.conj().T, int(keep.sum())


def _blocks_to_matrix(K: np.ndarray) -> np.ndarray:
    nm, nl, d, _ = K.shape
    return K.transpose(0, 2, 1, 3).reshape(nm * d, nl * d)


def _matrix_to_blocks(M: np.ndarray, d: int) -> np.ndarray:
    n = M.shape[0] // d
    k = M.shape[1] // d
    return M.reshape(n, d, k, d).transpose(0, 2, 1, 3)


def _aux_nodes(aux, avoid: complex) -> np.ndarray:
    nodes = default_aux_nodes() if aux is None else _pts(getattr(aux, "nodes", aux))
    return nodes[np.abs(nodes - avoid) > 1e-6]


def _tau_projected(f, beta, lams, aux, cutoff, observable):
    """tau applied to the single difference quotient sections, via projection.

    Controllable side: ``tau_{c,beta}`` of ``kappa_c(., lam)``; observable side:
    ``tau_{o,conj(beta)}`` of ``kappa_o(., lam)``.  Returns an array of shape
    ``(len(lams), p, m)`` resp. ``(len(lams), m, p)``.
    """
    if observable:
        s = beta
        base = lambda a, b: _ko(f, a, b)
    else:
        s = np.conj(beta)
        base = lambda a, b: _kc(f, a, b)
    nodes = _aux_nodes(aux, s)
    kappa = _single_quotient(base, s)
    G = _blocks_to_matrix(base(nodes, nodes))
    P, _ = spectral_pinv(0.5 * (G + G.conj().T), cutoff)
    samples = _continued(kappa, nodes, lams, s, None)      # (Na, Nl, d, d)
    d = samples.shape[-1]
    coeffs = P @ samples.transpose(0, 2, 1, 3).reshape(len(nodes) * d, len(lams) * d)
    coeffs = coeffs.reshape(len(nodes), d, len(lams), d).transpose(2, 0, 1, 3)
    if observable:
        # sections K_o(., nu) y  ->  (phi(nu)^* - phi(beta)^*) y / (conj(beta) - conj(nu))
        w = _herm(f.evaluate_many(nodes) - f(beta)[None]) / np.conj(beta - nodes)[:, None, None]
    else:
        # sections K_c(., nu) u  ->  (phi(conj nu) - phi(beta)) u / (beta - conj(nu))
        w = (f.evaluate_many(np.conj(nodes)) - f(beta)[None]) / (beta - np.conj(nodes))[:, None, None]
    return np.einsum("jab,ljbc->lac", w, coeffs)


def kernel_blocks(kind, f: SchurFunction | None, mus, lams, aux=None,
                  pinv_cutoff: float = 1e-10) -> np.ndarray:
    """Kernel values for every pair, as an array ``(len(mus), len(lams), d, d)``.

    ``aux`` is only used by the projected tags ``Kc1`` and ``Ko1d``: a list of
    auxiliary nodes (or any object with a ``nodes`` attribute) spanning the
    space onto which the non-span difference quotients are projected.
    """
    kind = _kind(kind)
    mus, lams = _pts(mus), _pts(lams)
    tag, beta = kind.tag, kind.beta
    if tag == "H2":
        d = kind.block_dim(f)
        for x in (mus, lams):
            if np.any(~(x.real > 0)):
                raise DomainError("H2 kernel nodes must lie in C+")
        return np.eye(d) / _hp_denom(mus, lams)[..., None, None]
    if f is None:
        raise ValueError(f"{tag} needs a Schur function")
    _check_domain(f, kind.domain)
    if tag == "Ko":
        return _ko(f, mus, lams)
    if tag == "Kc":
        return _kc(f, mus, lams)
    if tag == "DiskKo":
        return _observable_base(f, mus, lams, _disk_denom(mus, lams))
    if tag == "DiskKc":
        return _controllable_base(f, mus, lams, _disk_denom(mus, lams))

    bb = np.conj(beta)
    if tag == "Kcm1d":
        w = (bb - mus)[:, None] * (beta - np.conj(lams))[None, :]
        return w[..., None, None] * _kc(f, mus, lams)
    if tag == "Kcm1":
        w = (beta + mus)[:, None] * (bb + np.conj(lams))[None, :]
        return w[..., None, None] * _kc(f, mus, lams)
    if tag == "Kom1d":
        w = (bb + mus)[:, None] * (beta + np.conj(lams))[None, :]
        return w[..., None, None] * _ko(f, mus, lams)
    if tag == "Kom1":
        w = (beta - mus)[:, None] * (bb - np.conj(lams))[None, :]
        return w[..., None, None] * _ko(f, mus, lams)
    if tag == "Kc1d":
        fn = _double_quotient(lambda a, b: _kc(f, a, b), bb)
        return _continued(fn, mus, lams, bb, bb)
    if tag == "Ko1":
        fn = _double_quotient(lambda a, b: _ko(f, a, b), beta)
        return _continued(fn, mus, lams, beta, beta)
    if tag == "Kc1":
        kappa = _continued(_single_quotient(lambda a, b: _kc(f, a, b), bb), mus, lams, bb, None)
        tau = _tau_projected(f, beta, lams, aux, pinv_cutoff, observable=False)
        corr = _herm(f.evaluate_many(np.conj(mus)))[:, None] @ tau[None, :]
        return (kappa - corr) / (beta + mus)[:, None, None, None]
    if tag == "Ko1d":
        kappa = _continued(_single_quotient(lambda a, b: _ko(f, a, b), beta), mus, lams, beta, None)
        tau = _tau_projected(f, beta, lams, aux, pinv_cutoff, observable=True)
        corr = f.evaluate_many(mus)[:, None] @ tau[None, :]
        return (kappa - corr) / (bb + mus)[:, None, None, None]
    raise AssertionError(tag)


def eval_kernel(kind, f: SchurFunction | None, mu: complex, lam: complex, aux=None) -> np.ndarray:
    """Kernel value ``K(mu, lam)`` as a square matrix."""
    return kernel_blocks(kind, f, [mu], [lam], aux)[0, 0]


def kernel_matrix(kind, f, mus, lams, aux=None) -> np.ndarray:
    """Block matrix with block ``(i, j)`` equal to ``K(mus_i, lams_j)``."""
    return _blocks_to_matrix(kernel_blocks(kind, f, mus, lams, aux))


# ---------------------------------------------------------------------------
# Gram matrices

@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Hermitian Gram matrix of kernel sections together with its nodes."""

    entries: np.ndarray
    nodes: np.ndarray
    block_dim: int
    kind: KernelKind = field(default_factory=lambda: KernelKind("H2"))

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def eig_floor(self) -> float:
        if self.size == 0:
            return 0.0
        return float(np.linalg.eigvalsh(self.entries)[0])

    def block(self, j: int, k: int) -> np.ndarray:
        d = self.block_dim
        return self.entries[j * d:(j + 1) * d, k * d:(k + 1) * d]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.to_dict(),
            "nodes": [encode_point(x) for x in self.nodes],
            "block_dim": self.block_dim,
            "entries": encode_matrix(self.entries) if self.size else [],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        """Row-major CSV; each cell is written as the pair ``re,im``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in self.entries:
            cells = []
            for v in row:
                cells.extend([repr(float(v.real)), repr(float(v.imag))])
            writer.writerow(cells)
        return buf.getvalue()


def check_distinct(nodes: np.ndarray, tol: float = 1e-8) -> None:
    if len(nodes) < 2:
        return
    gaps = np.abs(nodes[:, None] - nodes[None, :])
    np.fill_diagonal(gaps, np.inf)
    if gaps.min() < tol:
        raise DegenerateNodeError("nodes must be pairwise distinct")


def gram(kind, f: SchurFunction | None, nodes: Sequence[complex], aux=None) -> GramMatrix:
    """Gram matrix of the kernel sections at ``nodes``."""
    kind = _kind(kind)
    nodes = _pts(nodes) if len(nodes) else np.zeros(0, complex)
    check_distinct(nodes)
    d = kind.block_dim(f)
    if len(nodes) == 0:
        return GramMatrix(np.zeros((0, 0), complex), nodes, d, kind)
    G = kernel_matrix(kind, f, nodes, nodes, aux)
    G = 0.5 * (G + G.conj().T)
    G.setflags(write=False)
    nodes.setflags(write=False)
    return GramMatrix(G, nodes, d, kind)


@dataclass(frozen=True)
class PositivityReport:
    passed: bool
    eig_min: float
    eig_max: float
    numerical_rank: int

    @property
    def residual(self) -> float:
        """Negative part of the spectrum relative to its top, zero when PSD."""
        if self.eig_min >= 0:
            return 0.0
        return -self.eig_min / max(abs(self.eig_max), np.finfo(float).tiny)


def positivity_check(G, tol_psd: float = 1e-10, tol_rank: float = 1e-10) -> PositivityReport:
    """Eigenvalue test ``eig_min >= -tol_psd * eig_max``."""
    M = G.entries if isinstance(G, GramMatrix) else np.asarray(G)
    if M.size == 0:
        return PositivityReport(True, 0.0, 0.0, 0)
    w = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    lo, hi = float(w[0]), float(w[-1])
    rank = int(np.sum(w > tol_rank * hi)) if hi > 0 else 0
    return PositivityReport(lo >= -tol_psd * hi, lo, hi, rank)


# ---------------------------------------------------------------------------
# quadrature on the imaginary axis

H2_OMEGA = 1e8  # tail of (1/2pi) int 1/(1+w^2) beyond this is below 1e-8


def _h2_rule(g, h, n):
    x, w = leggauss(n)
    tmax = np.arctan(H2_OMEGA)
    theta = tmax * x
    omega = np.tan(theta)
    jac = tmax * (1 + omega ** 2)
    total = 0j
    for om, wt, jc in zip(omega, w, jac):
        gv = np.atleast_1d(np.asarray(g(1j * om), dtype=complex))
        hv = np.atleast_1d(np.asarray(h(1j * om), dtype=complex))
        total += wt * jc * np.vdot(hv, gv)
    return total / (2 * np.pi)


def h2_inner_quadrature(g: Callable, h: Callable, n_quad: int = 512) -> complex:
    """``(1/2pi) int <g(i w), h(i w)> dw`` by Gauss-Legendre in ``theta = arctan w``.

    The rule is run with ``n_quad`` and ``2 n_quad`` nodes; a relative change
    above 1e-6 raises :class:`ConvergenceError`.
    """
    coarse = _h2_rule(g, h, n_quad)
    fine = _h2_rule(g, h, 2 * n_quad)
    if abs(fine - coarse) > 1e-6 * abs(fine):
        raise ConvergenceError(f"quadrature not converged: {coarse} vs {fine}")
    return complex(fine)


def h2_section(lam: complex, u=1.0) -> Callable:
    """Evaluator of the Szego-type section ``mu -> u / (mu + conj(lam))``."""
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    return lambda mu: u / (mu + np.conj(lam))


# ---------------------------------------------------------------------------
# identities

def cayley_kernel_check(f: SchurFunction, alpha: complex, pairs) -> float:
    """Largest relative deviation in the Cayley kernel relations.

    Observable side: ``K_o^disk(z_a(mu), z_a(lam))`` against
    ``(conj(a) + mu)(a + conj(lam)) / (2 Re a) K_o(mu, lam)``.  Controllable
    side: ``K_c^disk(z_conj(a)(mu), z_conj(a)(lam))`` against
    ``(a + mu)(conj(a) + conj(lam)) / (2 Re a) K_c(mu, lam)``.  Both disk
    kernels use the pull-back ``f o mu_a``.
    """
    alpha = complex(alpha)
    pairs = list(pairs)
    if not pairs or f.m == 0 or f.p == 0:
        return 0.0
    g = to_disk(f, alpha)
    a2 = 2 * alpha.real
    worst = 0.0
    for mu, lam in pairs:
        mu, lam = complex(mu), complex(lam)
        lhs_o = eval_kernel("DiskKo", g, z_alpha(alpha, mu), z_alpha(alpha, lam))
        rhs_o = (np.conj(alpha) + mu) * (alpha + np.conj(lam)) / a2 * eval_kernel("Ko", f, mu, lam)
        ab = np.conj(alpha)
        lhs_c = eval_kernel("DiskKc", g, z_alpha(ab, mu), z_alpha(ab, lam))
        rhs_c = (alpha + mu) * (ab + np.conj(lam)) / a2 * eval_kernel("Kc", f, mu, lam)
        for lhs, rhs in ((lhs_o, rhs_o), (lhs_c, rhs_c)):
            scale = max(np.abs(rhs).max(), np.abs(lhs).max(), 1e-300)
            worst = max(worst, float(np.abs(lhs - rhs).max() / scale))
    return worst


def kernel_grid_csv(kind, f, lam: complex, re_values, im_values, entry=(0, 0), aux=None) -> str:
    """CSV table of ``K(mu, lam)[entry]`` over a rectangular grid of ``mu``."""
    re_values = np.asarray(re_values, float)
    im_values = np.asarray(im_values, float)
    mus = (re_values[:, None] + 1j * im_values[None, :]).ravel()
    vals = kernel_blocks(kind, f, mus, [lam], aux)[:, 0, entry[0], entry[1]]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["mu_re", "mu_im", "value_re", "value_im"])
    for mu, v in zip(mus, vals):
        writer.writerow([repr(mu.real), repr(mu.imag), repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()
