"""Internal Cayley transforms of the canonical models and the bridge to the disk.

The controllable model is transformed with parameter ``alpha`` into the bounded
block ``[A B; C D]`` with

    A = (conj a + A_c)(a - A_c)^{-1},   B = sqrt(2 Re a) (a - A_c)^{-1} B_c,
    C = sqrt(2 Re a) C_c (a - A_c)^{-1},   D = phi(a).

On kernel sections all four have closed forms, and the image of a span lies in
the same span augmented with the node ``conj(a)``.  The observable block is the
adjoint of the controllable block of ``phi~`` with parameter ``conj(a)``.

``Xi`` is the weighted composition ``(Xi_a xi)(mu) = sqrt(2 Re a)/(conj a + mu)
xi(z_a(mu))``, unitary from the disk model space of ``phi o mu_alpha`` onto the
half-plane model space.  The observable side uses ``a = alpha``, the
controllable side ``a = conj(alpha)``; both use the same disk function
``phi_alpha = phi o mu_alpha``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateNodeError, DimensionError, DomainError
from .kernels import CONTINUATION_STEP, SINGULAR_TOL, GramMatrix, eval_kernel, KernelKind
from .model_c import ControllableModel
from .schur import (DISK, SchurFunction, encode_matrix, encode_point, mu_alpha,
                    to_disk, z_alpha)
from .span import ModelVector, SpanBasis

DEGENERATE_TOL = 1e-8


def _alpha(alpha) -> complex:
    alpha = complex(alpha)
    if not alpha.real > 0:
        raise DomainError("alpha must have positive real part")
    return alpha


# ---------------------------------------------------------------------------
# controllable block

@dataclass(frozen=True, eq=False)
class DiscreteBlock:
    """Cayley block of the controllable model restricted to a span.

    ``A`` and ``C`` act on coefficients over ``domain``; ``A`` and ``B``
    produce coefficients over ``codomain``, which is ``domain`` with the node
    ``conj(alpha)`` appended.  ``A`` is therefore rectangular.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    domain: SpanBasis
    codomain: SpanBasis
    alpha: complex

    @property
    def gram(self) -> GramMatrix:
        return self.codomain.gram

    def apply(self, x: ModelVector, u) -> tuple[ModelVector, np.ndarray]:
        """``(A x + B u, C x + D u)``."""
        if x.basis is not self.domain:
            x = self.domain.embed(x)
        u = np.atleast_1d(np.asarray(u, complex))
        return (self.codomain.vector(self.A @ x.coeffs + self.B @ u),
                self.C @ x.coeffs + self.D @ u)

    def with_B(self, B: np.ndarray) -> "DiscreteBlock":
        return DiscreteBlock(self.A, np.asarray(B, complex), self.C, self.D, self.domain,
                             self.codomain, self.alpha)

    def to_dict(self) -> dict:
        return {
            "alpha": encode_point(self.alpha),
            "A": encode_matrix(self.A), "B": encode_matrix(self.B),
            "C": encode_matrix(self.C), "D": encode_matrix(self.D),
            "domain_nodes": [encode_point(x) for x in self.domain.nodes],
            "gram": self.gram.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _c_column(f: SchurFunction, alpha: complex, node: complex) -> np.ndarray:
    """``C`` applied to the section at ``node``: ``sqrt(2Re a)(phi(conj node) - phi(a))/(a - conj node)``."""
    lb = np.conj(node)
    return np.sqrt(2 * alpha.real) * (f(lb) - f(alpha)) / (alpha - lb)


def cayley_block_c(f: SchurFunction, alpha: complex, basis: SpanBasis) -> DiscreteBlock:
    """Cayley block with parameter ``alpha`` of the controllable model on ``basis``."""
    alpha = _alpha(alpha)
    if basis.kind.tag != "Kc":
        raise DimensionError("the controllable Cayley block acts on K_c spans")
    ab = np.conj(alpha)
    if len(basis.nodes) and np.min(np.abs(basis.nodes - ab)) <= DEGENERATE_TOL:
        raise DegenerateNodeError("conj(alpha) coincides with a basis node")
    m = basis.block_dim
    out = basis.augment([ab])
    N, M = basis.dim, out.dim
    k_ab = out.index_of(ab)
    s = np.sqrt(2 * alpha.real)
    A = np.zeros((M, N), complex)
    C = np.zeros((f.p, N), complex)
    eye = np.eye(m)
    for j, node in enumerate(basis.nodes):
        d = alpha - np.conj(node)
        cols = slice(j * m, (j + 1) * m)
        A[j * m:(j + 1) * m, cols] = (ab + np.conj(node)) / d * eye
        A[k_ab * m:(k_ab + 1) * m, cols] = -2 * alpha.real / d * eye
        C[:, cols] = _c_column(f, alpha, node)
    B = np.zeros((M, m), complex)
    B[k_ab * m:(k_ab + 1) * m] = s * eye
    return DiscreteBlock(A, B, C, f(alpha), basis, out, alpha)


def isometry_check(block: DiscreteBlock, n_samples: int = 50, rng: np.random.Generator | None = None) -> float:
    """Largest relative defect of ``|Ax+Bu|^2 + |Cx+Du|^2 = |x|^2 + |u|^2`` on random samples."""
    rng = np.random.default_rng(0) if rng is None else rng
    N, m = block.A.shape[1], block.B.shape[1]
    Gi, Go = block.domain.G, block.codomain.G
    worst = 0.0
    for _ in range(n_samples):
        x = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        u = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        xo = block.A @ x + block.B @ u
        y = block.C @ x + block.D @ u
        lhs = np.vdot(xo, Go @ xo).real + np.vdot(y, y).real
        rhs = np.vdot(x, Gi @ x).real + np.vdot(u, u).real
        worst = max(worst, abs(lhs - rhs) / max(rhs, 1e-300))
    return float(worst)


def discrete_transfer(f: SchurFunction, alpha: complex, z: complex) -> np.ndarray:
    """``z C (1 - z A)^{-1} B + D`` of the controllable Cayley block.

    The resolvent is not inverted: ``(1 - zA)^{-1} B u`` is the section at
    ``conj(mu_alpha(z))`` with coefficient ``sqrt(2 Re a)/(1 + z) u``, so only
    the ``C`` column of that node is needed.
    """
    alpha = _alpha(alpha)
    z = complex(z)
    if not abs(z) < 1:
        raise DomainError("z must lie in the open unit disk")
    D = f(alpha)
    if z == 0:
        return D
    node = np.conj(mu_alpha(alpha, z))
    coeff = np.sqrt(2 * alpha.real) / (1 + z)
    return D + z * coeff * _c_column(f, alpha, node)


# ---------------------------------------------------------------------------
# observable block, through duality

@dataclass(frozen=True, eq=False)
class ObservableBlock:
    """Cayley block of the observable model, stored as the adjoint of ``dual``.

    ``dual`` is the controllable block of ``phi~`` with parameter
    ``conj(alpha)`` on the same nodes; the ``K_c`` sections of ``phi~`` are the
    ``K_o`` sections of ``phi``.  Pointwise actions use the closed forms.
    """

    f: SchurFunction
    alpha: complex
    dual: DiscreteBlock

    def A_at(self, x: Callable, mu: complex) -> np.ndarray:
        a = self.alpha
        return ((np.conj(a) + mu) * x(mu) - 2 * a.real * x(a)) / (a - mu)

    def B_at(self, u, mu: complex) -> np.ndarray:
        a = self.alpha
        u = np.atleast_1d(np.asarray(u, complex))
        return np.sqrt(2 * a.real) * (self.f(mu) - self.f(a)) @ u / (a - mu)

    def C(self, x: Callable) -> np.ndarray:
        return np.sqrt(2 * self.alpha.real) * x(self.alpha)

    @property
    def D(self) -> np.ndarray:
        return self.f(self.alpha)


def cayley_block_o(f: SchurFunction, alpha: complex, nodes: Sequence[complex]) -> ObservableBlock:
    alpha = _alpha(alpha)
    ft = f.flip()
    dual = cayley_block_c(ft, np.conj(alpha), SpanBasis("Kc", ft, nodes))
    return ObservableBlock(f, alpha, dual)


def coisometry_check(block: ObservableBlock, n_samples: int = 50, rng=None) -> float:
    """Co-isometry defect of the observable block: isometry defect of its adjoint."""
    return isometry_check(block.dual, n_samples, rng)


def adjoint_relation_check(block: ObservableBlock, n_samples: int = 10, rng=None) -> float:
    """Compare the pointwise observable actions with the adjoint of ``dual``.

    Tests ``<A_o x, x'> = <x, A' x'>``, ``<B_o u, x'> = <u, C' x'>`` and
    ``<C_o x, y> = <x, B' y>`` on random span elements, where the left inner
    products use the reproducing property on the sections of ``x'``.
    """
    rng = np.random.default_rng(1) if rng is None else rng
    dual = block.dual
    dom, cod = dual.domain, dual.codomain
    m = block.f.m
    worst = 0.0
    for _ in range(n_samples):
        x = cod.random_vector(rng)
        xp = dom.random_vector(rng)
        u = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        y = rng.standard_normal(dom.block_dim) + 1j * rng.standard_normal(dom.block_dim)
        Ax, Cxp = dual.apply(xp, np.zeros(dual.B.shape[1]))
        By, _ = dual.apply(dom.zeros(), y)
        # <g, sum K(., nu) v> = sum v^* g(nu)
        def pair(g):
            return sum(np.vdot(v, g(nu)) for nu, v in zip(dom.nodes, xp.blocks()))
        lhs = [pair(lambda mu: block.A_at(x, mu)), pair(lambda mu: block.B_at(u, mu)),
               np.vdot(y, block.C(x))]
        rhs = [cod.inner(x, Ax), np.vdot(Cxp, u), cod.inner(x, By)]
        scale = 1 + max(abs(v) for v in rhs)
        worst = max(worst, max(abs(a - b) for a, b in zip(lhs, rhs)) / scale)
    return float(worst)


# ---------------------------------------------------------------------------
# Xi and its inverse

def _side_parameter(alpha: complex, side: str) -> complex:
    if side == "o":
        return alpha
    if side == "c":
        return np.conj(alpha)
    raise ValueError(f"side must be 'o' or 'c', not {side!r}")


def xi_pointwise(xi: Callable, a: complex, mu: complex) -> np.ndarray:
    """``(Xi_a xi)(mu) = sqrt(2 Re a)/(conj a + mu) xi(z_a(mu))``."""
    a = _alpha(a)
    if not complex(mu).real > 0:
        raise DomainError("mu must lie in the right half-plane")
    return np.sqrt(2 * a.real) / (np.conj(a) + mu) * np.asarray(xi(z_alpha(a, mu)))


def xi_inverse_pointwise(zeta: Callable, a: complex, z: complex) -> np.ndarray:
    """``(Xi_a^{-1} zeta)(z) = sqrt(2 Re a)/(1 + z) zeta(mu_a(z))``."""
    a = _alpha(a)
    if not abs(complex(z)) < 1:
        raise DomainError("z must lie in the open unit disk")
    return np.sqrt(2 * a.real) / (1 + z) * np.asarray(zeta(mu_alpha(a, z)))


def _xi_scales(a: complex, lams: np.ndarray) -> np.ndarray:
    return (a + np.conj(lams)) / np.sqrt(2 * a.real)


def disk_span(f: SchurFunction, alpha: complex, hp_nodes: Sequence[complex], side: str = "o") -> SpanBasis:
    """Disk span whose sections ``Xi`` carries onto the sections at ``hp_nodes``."""
    alpha = _alpha(alpha)
    a = _side_parameter(alpha, side)
    tag = "DiskKo" if side == "o" else "DiskKc"
    return SpanBasis(tag, to_disk(f, alpha), z_alpha(a, np.asarray(hp_nodes, complex)))


def xi_apply(xi: ModelVector, f: SchurFunction, alpha: complex, side: str = "o") -> ModelVector:
    """Transport a disk span element to the half-plane span of ``f``.

    The section at ``z_a(lam)`` goes to ``(a + conj lam)/sqrt(2 Re a)``
    times the section at ``lam``.
    """
    alpha = _alpha(alpha)
    a = _side_parameter(alpha, side)
    tag = {"o": "DiskKo", "c": "DiskKc"}[side]
    if xi.basis.kind.tag != tag:
        raise DimensionError(f"side {side!r} transports {tag} spans")
    lams = mu_alpha(a, xi.basis.nodes)
    target = SpanBasis("Ko" if side == "o" else "Kc", f, lams, xi.basis.pinv_cutoff)
    d = target.block_dim
    return target.vector(xi.coeffs * np.repeat(_xi_scales(a, lams), d))


def xi_inverse_apply(x: ModelVector, alpha: complex, side: str = "o") -> ModelVector:
    """Inverse of :func:`xi_apply` on half-plane span elements."""
    alpha = _alpha(alpha)
    a = _side_parameter(alpha, side)
    tag = {"o": "Ko", "c": "Kc"}[side]
    if x.basis.kind.tag != tag:
        raise DimensionError(f"side {side!r} transports {tag} spans")
    lams = x.basis.nodes
    source = disk_span(x.basis.f, alpha, lams, side)
    d = source.block_dim
    return source.vector(x.coeffs / np.repeat(_xi_scales(a, lams), d))


def gram_transport_residual(f: SchurFunction, alpha: complex, hp_nodes: Sequence[complex],
                            side: str = "o") -> float:
    """Largest relative entry of ``S^* G_halfplane S - G_disk`` with ``S`` the section scales."""
    alpha = _alpha(alpha)
    a = _side_parameter(alpha, side)
    lams = np.asarray(hp_nodes, complex)
    disk = disk_span(f, alpha, lams, side)
    hp = SpanBasis("Ko" if side == "o" else "Kc", f, lams)
    S = np.diag(np.repeat(_xi_scales(a, lams), hp.block_dim))
    moved = S.conj().T @ hp.G @ S
    if moved.size == 0:
        return 0.0
    return float(np.abs(moved - disk.G).max() / max(np.abs(disk.G).max(), 1e-300))


# ---------------------------------------------------------------------------
# classical disk models

def _quotient_at(g: Callable, z: complex) -> np.ndarray:
    """``(g(z) - g(0))/z``, continued to ``z = 0`` by a Richardson central difference."""
    if abs(z) > SINGULAR_TOL:
        return (np.asarray(g(z)) - np.asarray(g(0.0))) / z
    h = CONTINUATION_STEP
    d1 = (np.asarray(g(h)) - np.asarray(g(-h))) / (2 * h)
    d2 = (np.asarray(g(h / 2)) - np.asarray(g(-h / 2))) / h
    return (4 * d2 - d1) / 3


def disk_model_obs(phi: SchurFunction, g: Callable, u, z: complex) -> dict:
    """Pointwise actions of the co-isometric disk model of ``phi`` at ``z``."""
    if phi.domain != DISK:
        raise DomainError("disk models need a disk function")
    u = np.atleast_1d(np.asarray(u, complex))
    return {
        "Ag": _quotient_at(g, z),
        "Bu": _quotient_at(phi, z) @ u,
        "Cg": np.asarray(g(0.0)),
        "Du": phi(0.0) @ u,
    }


def disk_model_contr(phi: SchurFunction, g: Callable, g_tilde0, u, z: complex) -> dict:
    """Pointwise actions of the isometric disk model of ``phi`` at ``z``.

    ``g_tilde0`` is the output ``C_c g``, supplied by the caller.
    """
    if phi.domain != DISK:
        raise DomainError("disk models need a disk function")
    u = np.atleast_1d(np.asarray(u, complex))
    g_tilde0 = np.atleast_1d(np.asarray(g_tilde0, complex))
    pt = phi(np.conj(z)).conj().T
    return {
        "Ag": z * np.asarray(g(z)) - pt @ g_tilde0,
        "Bu": (np.eye(phi.m) - pt @ phi(0.0)) @ u,
        "Cg": g_tilde0,
        "Du": phi(0.0) @ u,
    }


def disk_output_direct(xi: ModelVector) -> np.ndarray:
    """``C_c`` of a disk ``K_c`` span element from the reproducing property.

    For the section at ``w`` with vector ``u`` this is
    ``(phi(conj w) - phi(0)) u / conj w``.
    """
    if xi.basis.kind.tag != "DiskKc":
        raise DimensionError("expects a DiskKc span element")
    phi = xi.basis.f
    out = np.zeros(phi.p, complex)
    for w, v in zip(xi.basis.nodes, xi.blocks()):
        out += _quotient_at(phi, np.conj(w)) @ v
    return out


def disk_output_by_transport(xi: ModelVector, f: SchurFunction, alpha: complex) -> np.ndarray:
    """``C_c xi`` defined as the Cayley output ``sqrt(2 Re a) tau_a`` of ``Xi_{conj a} xi``."""
    alpha = _alpha(alpha)
    x = xi_apply(xi, f, alpha, "c")
    return np.sqrt(2 * alpha.real) * ControllableModel(f).tau(alpha, x)


# ---------------------------------------------------------------------------
# intertwinings

def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.abs(a - b).max() / (1 + np.abs(b).max())) if b.size else 0.0


def intertwine_check_obs(f: SchurFunction, alpha: complex, hp_nodes: Sequence[complex], probes,
                         n_vectors: int = 3, rng=None, disk_alpha: complex | None = None) -> float:
    """Pointwise residual of the observable intertwining through ``Xi_alpha``.

    ``disk_alpha`` builds the disk model from ``phi o mu_{disk_alpha}``
    instead, which breaks the relation (a negative control).
    """
    alpha = _alpha(alpha)
    rng = np.random.default_rng(2) if rng is None else rng
    da = alpha if disk_alpha is None else _alpha(disk_alpha)
    phi_d = to_disk(f, da)
    disk = SpanBasis("DiskKo", phi_d, z_alpha(alpha, np.asarray(hp_nodes, complex)))
    block = cayley_block_o(f, alpha, mu_alpha(alpha, disk.nodes))
    worst = 0.0
    for _ in range(n_vectors):
        xi = disk.random_vector(rng)
        x = xi_apply(xi, f, alpha, "o")
        u = rng.standard_normal(f.m) + 1j * rng.standard_normal(f.m)
        for mu in probes:
            Ag = lambda w: disk_model_obs(phi_d, xi, u, w)["Ag"]
            Bu = lambda w: disk_model_obs(phi_d, xi, u, w)["Bu"]
            worst = max(worst,
                        _rel(block.A_at(x, mu), xi_pointwise(Ag, alpha, mu)),
                        _rel(block.B_at(u, mu), xi_pointwise(Bu, alpha, mu)))
        dm = disk_model_obs(phi_d, xi, u, 0.0)
        worst = max(worst, _rel(block.C(x), dm["Cg"]), _rel(block.D @ u, dm["Du"]))
    return worst


def intertwine_check_contr(f: SchurFunction, alpha: complex, hp_nodes: Sequence[complex], probes,
                           n_vectors: int = 3, rng=None) -> float:
    """Pointwise residual of the controllable intertwining through ``Xi_{conj alpha}``.

    The disk output ``C_c`` is taken by transport; it is compared with the
    reproducing-property value as part of the residual.
    """
    alpha = _alpha(alpha)
    rng = np.random.default_rng(3) if rng is None else rng
    phi_d = to_disk(f, alpha)
    ab = np.conj(alpha)
    disk = SpanBasis("DiskKc", phi_d, z_alpha(ab, np.asarray(hp_nodes, complex)))
    worst = 0.0
    for _ in range(n_vectors):
        xi = disk.random_vector(rng)
        x = xi_apply(xi, f, alpha, "c")
        block = cayley_block_c(f, alpha, x.basis)
        u = rng.standard_normal(f.m) + 1j * rng.standard_normal(f.m)
        gt0 = disk_output_by_transport(xi, f, alpha)
        Ax, y = block.apply(x, np.zeros(f.m))
        Bu, _ = block.apply(x.basis.zeros(), u)
        for mu in probes:
            Ag = lambda w: disk_model_contr(phi_d, xi, gt0, u, w)["Ag"]
            Bd = lambda w: disk_model_contr(phi_d, xi, gt0, u, w)["Bu"]
            worst = max(worst,
                        _rel(Ax(mu), xi_pointwise(Ag, ab, mu)),
                        _rel(Bu(mu), xi_pointwise(Bd, ab, mu)))
        worst = max(worst, _rel(y, disk_output_direct(xi)),
                    _rel(block.D @ u, disk_model_contr(phi_d, xi, gt0, u, 0.0)["Du"]))
    return worst


def output_alpha_independence(f: SchurFunction, hp_nodes: Sequence[complex], beta: complex,
                              alphas: Sequence[complex] = (1.0, 2 + 1j), rng=None) -> float:
    """Check that ``C_c x`` read off the disk side does not depend on ``alpha``.

    For ``x = (beta - A_c)^{-1} s`` with ``s`` a random span element,
    ``(alpha - A_c) x = s + (alpha - beta) x`` is carried to the disk by
    ``Xi_{conj alpha}^{-1}``; its disk output divided by ``sqrt(2 Re alpha)``
    must equal ``C_c x = tau_beta s`` for every ``alpha``.  Disk outputs are
    computed from the reproducing property, independently of ``tau``.
    """
    rng = np.random.default_rng(4) if rng is None else rng
    model = ControllableModel(f)
    s = model.basis(hp_nodes).random_vector(rng)
    x = model.resolvent_on_span(beta, s)
    target = model.tau(beta, s)
    worst = 0.0
    for a in alphas:
        a = _alpha(a)
        w = x.basis.embed(s) + x * (a - beta)
        xi = xi_inverse_apply(w, a, "c")
        read = disk_output_direct(xi) / np.sqrt(2 * a.real)
        worst = max(worst, _rel(read, target))
    return worst


def coincidence_check(f: SchurFunction, beta: complex, pairs) -> float:
    """Relative residual of ``K^d_{o,-1}(mu, lam) = 2 Re b K_o^disk(z_b(mu), z_b(lam))``."""
    beta = _alpha(beta)
    g = to_disk(f, beta)
    kind = KernelKind("Kom1d", beta)
    worst = 0.0
    for mu, lam in pairs:
        lhs = eval_kernel(kind, f, mu, lam)
        rhs = 2 * beta.real * eval_kernel("DiskKo", g, z_alpha(beta, mu), z_alpha(beta, lam))
        worst = max(worst, _rel(lhs, rhs))
    return worst
