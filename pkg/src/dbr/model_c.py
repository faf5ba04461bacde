"""Canonical controllable and observable models on kernel spans.

The controllable model lives in ``H_c``, the space with kernel
``K_c(mu, lam) = (1 - phi~(mu) phi(conj lam)) / (mu + conj lam)`` where
``phi~(mu) = phi(conj mu)^*``.  Its system node is generated by the pairs

    (e_c(conj lam)^* u, u)  ->  (lam e_c(conj lam)^* u, phi(lam) u),

with ``e_c(lam)^* u = K_c(., lam) u``.  Everything here acts on finite
combinations of such sections, where the resolvent, ``tau`` and output maps have
closed forms.  The observable model is obtained from the controllable model of
``phi~`` by duality.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, DegenerateNodeError, DimensionError, StabilityError
from .kernels import default_aux_nodes
from .schur import BlaschkeScalar, Constant, SchurFunction
from .span import ModelVector, SpanBasis

DEGENERATE_TOL = 1e-8
ETA_SCHEDULE = (1e2, 1e3, 1e4, 1e5, 1e6)


@dataclass(frozen=True)
class NodePair:
    """Generator pair ``(e_c(conj lam)^* u, u)``."""

    lam: complex
    u: np.ndarray

    def __post_init__(self):
        lam = complex(self.lam)
        if not lam.real > 0:
            raise ValueError("generator nodes must lie in C+")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "u", np.atleast_1d(np.asarray(self.u, complex)))


@dataclass(frozen=True, eq=False)
class ExtRealization:
    """Finite-dimensional realization ``(A, B, C, D)`` of a transfer function."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    energy_preserving: bool = False

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, complex))
        p, m = D.shape
        A = np.asarray(self.A, complex)
        n = int(round(np.sqrt(A.size)))
        object.__setattr__(self, "A", A.reshape(n, n))
        object.__setattr__(self, "B", np.asarray(self.B, complex).reshape(n, m))
        object.__setattr__(self, "C", np.asarray(self.C, complex).reshape(p, n))
        object.__setattr__(self, "D", D)
        if n and np.any(np.linalg.eigvals(self.A).real >= 0):
            raise StabilityError("A must have its spectrum in the open left half-plane")
        if self.energy_preserving and self.energy_residual() > 1e-10:
            raise ValueError("realization is tagged energy preserving but violates the conditions")

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def energy_residual(self) -> float:
        """Largest violation of ``A + A^* + C^*C = 0``, ``B + C^*D = 0``, ``D^*D = I``."""
        A, B, C, D = self.A, self.B, self.C, self.D
        terms = [A + A.conj().T + C.conj().T @ C, B + C.conj().T @ D,
                 D.conj().T @ D - np.eye(D.shape[1])]
        return max(float(np.abs(t).max()) if t.size else 0.0 for t in terms)

    def transfer(self, mu: complex) -> np.ndarray:
        n = self.order
        if n == 0:
            return self.D.copy()
        return self.D + self.C @ np.linalg.solve(mu * np.eye(n) - self.A, self.B)

    def scaled(self, b_factor: float) -> "ExtRealization":
        """Copy with ``B`` multiplied by ``b_factor`` (no energy claim)."""
        return ExtRealization(self.A, b_factor * self.B, self.C, self.D, False)


def energy_preserving_realization(f: SchurFunction) -> ExtRealization | None:
    """A known finite energy-preserving realization of ``f``, if one is available.

    Blaschke factors have a one-dimensional one; constants have the trivial
    realization exactly when they are isometric.
    """
    if isinstance(f, BlaschkeScalar):
        return ExtRealization(*f.realization(), energy_preserving=True)
    if isinstance(f, Constant):
        D = f.D
        if np.abs(D.conj().T @ D - np.eye(D.shape[1])).max() <= 1e-10:
            return ExtRealization(*f.realization(), energy_preserving=True)
    return None


# ---------------------------------------------------------------------------
# reports

@dataclass(frozen=True)
class GeneratorImage:
    state: ModelVector
    output: np.ndarray


@dataclass(frozen=True)
class DualResult:
    u: np.ndarray
    z: Callable[[complex], np.ndarray]
    estimates: np.ndarray
    extrapolated: np.ndarray
    residual: float


@dataclass(frozen=True)
class DeltaReport:
    Delta: np.ndarray
    isometry_residual: float
    intertwine_residual: float


@dataclass(frozen=True)
class ConservativityReport:
    """Heuristic membership test of ``mu -> phi~(mu) y / (alpha + mu)`` in ``H_c``.

    ``member[i]`` says the i-th test function is reproduced by its projection
    onto the dense span.  The conservativity condition asks for the opposite
    (no such function in ``H_c``) together with a trivial common kernel of
    ``phi~``; ``condition_holds`` combines both.
    """

    relative_residuals: np.ndarray
    norm_ratios: np.ndarray
    member: np.ndarray
    kernel_min_singular_value: float
    condition_holds: bool
    threshold: float
    heuristic: bool = field(default=True)


# ---------------------------------------------------------------------------

def _node_blocks(x: ModelVector):
    return zip(x.basis.nodes, x.blocks())


class ControllableModel:
    """Energy-preserving controllable model of ``f`` on spans of ``K_c`` sections."""

    kernel_tag = "Kc"

    def __init__(self, f: SchurFunction):
        self.f = f

    def phi_tilde(self, mu: complex) -> np.ndarray:
        return self.f(np.conj(mu)).conj().T

    def basis(self, nodes: Sequence[complex], **kwargs) -> SpanBasis:
        return SpanBasis(self.kernel_tag, self.f, nodes, **kwargs)

    def _check_basis(self, x: ModelVector) -> None:
        if x.basis.kind.tag != self.kernel_tag or x.basis.f is not self.f:
            raise DimensionError(f"vector does not live in a {self.kernel_tag} span of this function")

    def _check_alpha(self, alpha: complex, x: ModelVector) -> complex:
        alpha = complex(alpha)
        if not alpha.real > 0:
            raise ValueError("alpha must have positive real part")
        nodes = x.basis.nodes
        if len(nodes) and np.min(np.abs(alpha - np.conj(nodes))) <= DEGENERATE_TOL:
            raise DegenerateNodeError("alpha coincides with a conjugated basis node")
        return alpha

    # -- generators and energy ----------------------------------------------

    def apply_generator(self, pair: NodePair, basis: SpanBasis | None = None) -> GeneratorImage:
        """Image of the generator pair: state ``lam e_c(conj lam)^* u``, output ``phi(lam) u``."""
        node = np.conj(pair.lam)
        if basis is None:
            basis = self.basis([node])
        state = basis.combine([(node, pair.lam * pair.u)])
        return GeneratorImage(state, self._output(pair))

    def _output(self, pair: NodePair) -> np.ndarray:
        return self.f(pair.lam) @ pair.u

    def energy_identity_check(self, pairs: Sequence[NodePair]) -> float:
        """Largest residual of
        ``<u1,u2> - <phi(l1)u1, phi(l2)u2> = (conj l2 + l1) <s1, s2>``
        over all pairs of generator pairs, the right side taken from the Gram.
        """
        pairs = list(pairs)
        if not pairs:
            raise ValueError("need at least one generator pair")
        basis = self.basis([])
        basis = basis.augment([np.conj(p.lam) for p in pairs])
        states = [basis.combine([(np.conj(p.lam), p.u)]) for p in pairs]
        outs = [self._output(p) for p in pairs]
        worst = 0.0
        for p1, s1, y1 in zip(pairs, states, outs):
            for p2, s2, y2 in zip(pairs, states, outs):
                lhs = np.vdot(p2.u, p1.u) - np.vdot(y2, y1)
                rhs = (np.conj(p2.lam) + p1.lam) * basis.inner(s1, s2)
                worst = max(worst, abs(lhs - rhs))
        return float(worst)

    # -- resolvents on spans --------------------------------------------------

    def resolvent_on_span(self, alpha: complex, x: ModelVector) -> ModelVector:
        """``(alpha - A)^{-1} x`` on the basis augmented with ``conj(alpha)``."""
        self._check_basis(x)
        alpha = self._check_alpha(alpha, x)
        ab = np.conj(alpha)
        out = x.basis.augment([ab])
        terms = []
        for node, v in _node_blocks(x):
            w = v / (alpha - np.conj(node))
            terms += [(node, w), (ab, -w)]
        return out.combine(terms)

    def apply_A_regularized(self, alpha: complex, x: ModelVector) -> ModelVector:
        """``A (alpha - A)^{-1} x`` on the basis augmented with ``conj(alpha)``."""
        self._check_basis(x)
        alpha = self._check_alpha(alpha, x)
        ab = np.conj(alpha)
        out = x.basis.augment([ab])
        terms = []
        for node, v in _node_blocks(x):
            d = alpha - np.conj(node)
            terms += [(node, np.conj(node) * v / d), (ab, -alpha * v / d)]
        return out.combine(terms)

    def tau(self, alpha: complex, x: ModelVector) -> np.ndarray:
        """``tau_{c,alpha} x = C (alpha - A)^{-1} x``, a vector of length ``p``."""
        self._check_basis(x)
        alpha = self._check_alpha(alpha, x)
        fa = self.f(alpha)
        out = np.zeros(self.f.p, complex)
        for node, v in _node_blocks(x):
            lb = np.conj(node)
            out += (self.f(lb) - fa) @ v / (alpha - lb)
        return out

    def tau_adjoint(self, alpha: complex, y) -> Callable[[complex], np.ndarray]:
        """Evaluator of ``tau_{c,alpha}^* y``: ``mu -> (phi~(mu) - phi~(conj a)) y / (conj a - mu)``."""
        alpha = complex(alpha)
        ab = np.conj(alpha)
        y = np.atleast_1d(np.asarray(y, complex))
        edge = self.phi_tilde(ab) @ y
        return lambda mu: (self.phi_tilde(mu) @ y - edge) / (ab - mu)

    def tau_projected(self, alpha: complex, g: Callable, dense: SpanBasis | None = None) -> np.ndarray:
        """``tau`` of a function outside the span, through its projection on ``dense``."""
        if dense is None:
            dense = self.basis(default_aux_nodes())
        return self.tau(alpha, dense.project(g).vector)

    def resolvent_generic(self, alpha: complex, g: Callable, tau_g) -> Callable[[complex], np.ndarray]:
        """Evaluator of ``(alpha - A)^{-1} g``: ``mu -> (g(mu) - phi~(mu) tau_g) / (alpha + mu)``."""
        alpha = complex(alpha)
        tau_g = np.atleast_1d(np.asarray(tau_g, complex))
        return lambda mu: (np.asarray(g(mu), complex) - self.phi_tilde(mu) @ tau_g) / (alpha + mu)

    def semi_explicit_output(self, x: ModelVector, u, lam: complex, alpha: complex) -> np.ndarray:
        """Output ``y = C(x - e_c(lam)^* u) + phi(conj lam) u`` for ``(x, u)`` in the domain.

        ``x`` must be a span element whose coefficient blocks sum to ``u``;
        then ``x - e_c(lam)^* u`` lies in the domain of ``A`` and ``C`` is
        applied as ``tau_{c,alpha} (alpha - A)``.
        """
        self._check_basis(x)
        u = np.atleast_1d(np.asarray(u, complex))
        if np.abs(x.blocks().sum(axis=0) - u).max() > 1e-12 * (1 + np.abs(u).max()):
            raise ValueError("(x, u) is not in the domain: coefficient blocks must sum to u")
        basis = x.basis.augment([lam])
        terms = [(node, (alpha - np.conj(node)) * v) for node, v in _node_blocks(x)]
        terms.append((lam, -(alpha - np.conj(lam)) * u))
        w = basis.combine(terms)          # (alpha - A)(x - e_c(lam)^* u)
        gamma = self.tau(alpha, w)
        return gamma + self.f(np.conj(lam)) @ u

    # -- dual node ----------------------------------------------------------------

    def dual_apply(self, x: ModelVector, y, eta_schedule: Sequence[float] = ETA_SCHEDULE) -> DualResult:
        """Dual system node applied to ``(x, y)``.

        ``u = lim eta x(eta) + phi~(eta) y`` is estimated by first-order
        Richardson extrapolation in ``1/eta`` along the schedule, and
        ``z(mu) = mu x(mu) + phi~(mu) y - u``.
        """
        self._check_basis(x)
        etas = np.asarray(eta_schedule, float)
        if len(etas) < 3 or np.any(np.diff(etas) <= 0) or etas[-1] < 1e6:
            raise ValueError("eta schedule must increase, have 3+ entries and reach 1e6")
        y = np.atleast_1d(np.asarray(y, complex))
        s = np.array([eta * x(eta) + self.phi_tilde(eta) @ y for eta in etas])
        rich = (etas[1:, None] * s[1:] - etas[:-1, None] * s[:-1]) / (etas[1:] - etas[:-1])[:, None]
        u = rich[-1]
        residual = float(np.linalg.norm(rich[-1] - rich[-2]))
        if residual > 1e-6 * (1 + np.linalg.norm(u)):
            raise ConvergenceError(f"limit did not settle: residual {residual:.3e}")

        def z(mu):
            return mu * x(mu) + self.phi_tilde(mu) @ y - u
        return DualResult(u, z, s, rich, residual)

    def dual_limit_closed_form(self, x: ModelVector, y) -> np.ndarray:
        """Exact ``lim eta x(eta) + phi~(eta) y`` for span ``x`` (half-plane ``f``)."""
        self._check_basis(x)
        y = np.atleast_1d(np.asarray(y, complex))
        t_inf = self.f.at_infinity().conj().T
        out = t_inf @ y
        eye = np.eye(self.f.m)
        for node, v in _node_blocks(x):
            out = out + (eye - t_inf @ self.f(np.conj(node))) @ v
        return out

    def dual_resolvent(self, alpha: complex, x: ModelVector) -> Callable[[complex], np.ndarray]:
        """Evaluator of ``(conj(alpha) - A^*)^{-1} x``: ``mu -> (x(mu) - x(conj a)) / (conj a - mu)``."""
        ab = np.conj(complex(alpha))
        edge = x(ab)
        return lambda mu: (x(mu) - edge) / (ab - mu)

    def dual_resolvent_by_adjoint(self, alpha: complex, x: ModelVector, mu: complex) -> np.ndarray:
        """Value at ``mu`` of ``(conj a - A^*)^{-1} x`` from the Gram adjoint of the span resolvent."""
        basis = x.basis.augment([mu])
        xb = basis.embed(x)
        d = basis.block_dim
        out = np.zeros(d, complex)
        for i in range(d):
            e = np.zeros(d, complex)
            e[i] = 1
            r = self.resolvent_on_span(alpha, basis.combine([(mu, e)]))
            xr = r.basis.embed(xb)
            out[i] = r.basis.inner(xr, r)
        return out

    # -- similarity with an external realization ----------------------------------

    def intertwiner_delta(self, ext: ExtRealization, basis: SpanBasis) -> DeltaReport:
        """``Delta e_c(conj lam)^* u = (lam - A)^{-1} B u`` on the basis sections.

        The isometry residual compares ``Delta^* Delta`` with the Gram; the
        intertwining residual checks ``A Delta s + B u = lam Delta s`` and
        ``C Delta s + D u = phi(lam) u`` for every basis node and unit ``u``.
        """
        if basis.kind.tag != self.kernel_tag:
            raise DimensionError("Delta acts on controllable spans")
        n, m = ext.order, self.f.m
        cols = []
        inter = 0.0
        for node in basis.nodes:
            lam = np.conj(node)
            block = np.linalg.solve(lam * np.eye(n) - ext.A, ext.B) if n else np.zeros((0, m))
            cols.append(block)
            r1 = ext.A @ block + ext.B - lam * block
            r2 = ext.C @ block + ext.D - self.f(lam)
            inter = max(inter, float(np.abs(r1).max()) if r1.size else 0.0, float(np.abs(r2).max()))
        Delta = np.hstack(cols) if cols else np.zeros((n, 0), complex)
        iso = Delta.conj().T @ Delta - basis.G
        return DeltaReport(Delta, float(np.abs(iso).max()) if iso.size else 0.0, inter)

    # -- conservativity diagnostic ------------------------------------------------

    def conservativity_probe(self, alpha: complex = 1.0, y_samples=None, dense_basis: SpanBasis | None = None,
                             probes=None, threshold: float = 1e-3, kernel_points=None) -> ConservativityReport:
        """Project ``mu -> phi~(mu) y / (alpha + mu)`` on a dense span and look at the fit.

        A small relative residual at held-out probes means the function is
        (numerically) in ``H_c``.  Heuristic: the verdict depends on the span
        and the threshold.
        """
        alpha = complex(alpha)
        if dense_basis is None:
            dense_basis = self.basis(default_aux_nodes())
        if probes is None:
            probes = np.concatenate([np.logspace(-0.5, 1.0, 6) + 0j,
                                     np.logspace(-0.3, 0.8, 6) * np.exp(0.35j * np.pi)])
        if y_samples is None:
            y_samples = list(np.eye(self.f.p))
        rel, ratios, member = [], [], []
        for y in y_samples:
            y = np.atleast_1d(np.asarray(y, complex))
            func = lambda mu, y=y: self.phi_tilde(mu) @ y / (alpha + mu)
            scale = max(float(np.linalg.norm(func(nu))) for nu in probes)
            if scale == 0:
                rel.append(0.0)
                ratios.append(0.0)
                member.append(False)     # zero function: nothing to test
                continue
            proj = dense_basis.project(func, test_nodes=probes)
            rel.append(float(proj.residuals.max() / scale))
            ratios.append(dense_basis.norm(proj.vector) / scale)
            member.append(rel[-1] <= threshold)
        if kernel_points is None:
            kernel_points = np.array([0.5, 1.0, 2.0 + 1j, 3.0 - 2j, 7.0])
        stacked = np.vstack([self.phi_tilde(mu) for mu in kernel_points])
        kmin = float(np.linalg.svd(stacked, compute_uv=False).min()) if stacked.size else 0.0
        member = np.array(member, bool)
        holds = bool(not member.any() and kmin > 1e-8)
        return ConservativityReport(np.array(rel), np.array(ratios), member, kmin, holds, threshold)


class ObservableModel:
    """Co-energy-preserving observable model on spans of ``K_o`` sections.

    Its adjoint is the controllable model of ``phi~``, available as ``dual``;
    the sections of ``K_o`` for ``f`` and of ``K_c`` for ``phi~`` are the same
    functions.
    """

    kernel_tag = "Ko"

    def __init__(self, f: SchurFunction):
        self.f = f
        self.dual = ControllableModel(f.flip())

    def basis(self, nodes: Sequence[complex], **kwargs) -> SpanBasis:
        return SpanBasis(self.kernel_tag, self.f, nodes, **kwargs)

    def gram_duality_residual(self, nodes: Sequence[complex]) -> float:
        """Largest entry of ``G_o(f) - G_c(phi~)`` on the same nodes."""
        Go = self.basis(nodes).G
        Gc = self.dual.basis(nodes).G
        return float(np.abs(Go - Gc).max()) if Go.size else 0.0

    def apply_generator(self, pair: NodePair, basis: SpanBasis | None = None) -> GeneratorImage:
        """``(e_o(conj lam)^* y, y) -> (lam e_o(conj lam)^* y, phi~(lam) y)``."""
        node = np.conj(pair.lam)
        if basis is None:
            basis = self.basis([node])
        state = basis.combine([(node, pair.lam * pair.u)])
        return GeneratorImage(state, self.f(node).conj().T @ pair.u)

    def resolvent(self, alpha: complex, x: ModelVector) -> Callable[[complex], np.ndarray]:
        """Evaluator of ``(alpha - A_o)^{-1} x``: ``mu -> (x(mu) - x(alpha)) / (alpha - mu)``."""
        alpha = complex(alpha)
        edge = x(alpha)
        return lambda mu: (x(mu) - edge) / (alpha - mu)

    def resolvent_by_adjoint(self, alpha: complex, x: ModelVector, mu: complex) -> np.ndarray:
        """Value at ``mu`` of ``(alpha - A_o)^{-1} x`` as the adjoint of the dual span resolvent."""
        return self.dual.dual_resolvent_by_adjoint(np.conj(complex(alpha)), _retag(x, self.dual), mu)

    def C_resolvent(self, alpha: complex, x: ModelVector) -> np.ndarray:
        """``C_o (alpha - A_o)^{-1} x = x(alpha)``."""
        return x(complex(alpha))

    def A_resolvent(self, alpha: complex, x: ModelVector) -> Callable[[complex], np.ndarray]:
        """Evaluator of ``A_o (alpha - A_o)^{-1} x``."""
        alpha = complex(alpha)
        edge = alpha * x(alpha)
        return lambda mu: (mu * x(mu) - edge) / (alpha - mu)

    def Bo_section(self, alpha: complex, u) -> Callable[[complex], np.ndarray]:
        """Evaluator of ``(alpha - A_o)^{-1} B_o u = (phi(mu) - phi(alpha)) u / (alpha - mu)``."""
        alpha = complex(alpha)
        u = np.atleast_1d(np.asarray(u, complex))
        edge = self.f(alpha) @ u
        return lambda mu: (self.f(mu) @ u - edge) / (alpha - mu)

    # names matching the controllable side
    obs_resolvent = resolvent
    obs_Bo_section = Bo_section


def _retag(x: ModelVector, model: ControllableModel) -> ModelVector:
    """The same coefficients seen in the dual controllable span (same functions)."""
    return model.basis(x.basis.nodes, pinv_cutoff=x.basis.pinv_cutoff).vector(x.coeffs)


def observable_model(f: SchurFunction) -> ObservableModel:
    return ObservableModel(f)


def controllable_model(f: SchurFunction) -> ControllableModel:
    return ControllableModel(f)
