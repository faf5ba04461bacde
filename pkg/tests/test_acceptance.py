"""Acceptance criteria, one test each, every test printing a single PASS/FAIL line."""
import numpy as np
import pytest

from dbr.cayley import (cayley_block_c, discrete_transfer, disk_span, gram_transport_residual,
                        intertwine_check_contr, intertwine_check_obs, isometry_check,
                        output_alpha_independence, xi_apply)
from dbr.kernels import (EXACT_RIGGED_TAGS, KernelKind, eval_kernel, gram, h2_inner_quadrature,
                         h2_section, positivity_check)
from dbr.model_c import ExtRealization, NodePair, controllable_model
from dbr.schur import BlaschkeScalar, Constant, to_disk, z_alpha
from dbr.span import SpanBasis

from conftest import CORPUS, random_disk, random_halfplane

ALPHAS = (1.0, 2 + 1j)
CONSTANTS = [n for n, f in CORPUS.items() if isinstance(f, Constant)]


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {detail}")
        assert ok, detail
    return emit


def _rng(k):
    return np.random.default_rng(1000 + k)


def test_01_kernel_positivity(verdict):
    rng = _rng(1)
    worst = np.inf
    for f in CORPUS.values():
        nodes, dnodes = random_halfplane(rng, 20), random_disk(rng, 20)
        g = to_disk(f, 1.0)
        grams = [gram("Ko", f, nodes), gram("Kc", f, nodes),
                 gram("DiskKo", g, dnodes), gram("DiskKc", g, dnodes)]
        grams += [gram(KernelKind(t, 0.9 + 0.4j), f, nodes) for t in EXACT_RIGGED_TAGS]
        for G in grams:
            rep = positivity_check(G, 1e-10)
            ratio = rep.eig_min / rep.eig_max if rep.eig_max > 0 else 0.0
            worst = min(worst, ratio)
    verdict(1, "kernel positivity", worst >= -1e-10, f"min eig_min/eig_max = {worst:.2e} (need >= -1e-10)")


def test_02_energy_identity(verdict):
    rng = _rng(2)
    worst = 0.0
    for f in CORPUS.values():
        pairs = [NodePair(lam, rng.standard_normal(f.m) + 1j * rng.standard_normal(f.m))
                 for lam in random_halfplane(rng, 10)]
        worst = max(worst, controllable_model(f).energy_identity_check(pairs))
    M = controllable_model(BlaschkeScalar(1.0))
    b = M.basis([2.0])
    lhs = 1 - abs(M.f(2.0)[0, 0]) ** 2
    rhs = 4 * b.inner(b.section(0), b.section(0)).real
    hand = max(abs(lhs - 8 / 9), abs(rhs - 8 / 9))
    verdict(2, "energy identity", worst <= 1e-12 and hand <= 1e-12,
            f"max residual {worst:.2e}, hand check |side - 8/9| {hand:.1e} (tol 1e-12)")


def test_03_cayley_isometry(verdict):
    worst, weakest_control = 0.0, np.inf
    nodes = [1.5, 2 + 0.5j, 3 - 0.5j, 0.7 + 2j, 4.0]
    for f in CORPUS.values():
        for a in ALPHAS:
            blk = cayley_block_c(f, a, SpanBasis("Kc", f, nodes))
            worst = max(worst, isometry_check(blk, 50, _rng(3)))
            weakest_control = min(weakest_control, isometry_check(blk.with_B(1.1 * blk.B), 50, _rng(3)))
    verdict(3, "Cayley isometry", worst <= 1e-8 and weakest_control > 1e-3,
            f"residual {worst:.2e} (tol 1e-8), negative control {weakest_control:.2e} (need > 1e-3)")


def test_04_transfer_recovery(verdict):
    rng = _rng(4)
    worst = 0.0
    for f in CORPUS.values():
        for a in ALPHAS:
            for mu in random_halfplane(rng, 50):
                d = discrete_transfer(f, a, z_alpha(complex(a), mu)) - f(mu)
                worst = max(worst, float(np.linalg.norm(d, 2)))
    b = BlaschkeScalar(1.0)
    hand = max(abs(discrete_transfer(b, 1.0, z)[0, 0] + z) for z in (0.5, -0.3 + 0.4j, 0.9j))
    verdict(4, "transfer recovery", worst <= 1e-10 and hand <= 1e-10,
            f"max |D(z_a(mu)) - phi(mu)| = {worst:.2e}, Blaschke D(z) + z = {hand:.1e} (tol 1e-10)")


def test_05_xi_unitarity(verdict):
    rng = _rng(5)
    worst = 0.0
    for f in CORPUS.values():
        for a in ALPHAS:
            nodes = random_halfplane(rng, 5)
            for side in ("o", "c"):
                worst = max(worst, gram_transport_residual(f, a, nodes, side))
    f0 = Constant(0.0)
    disk = disk_span(f0, 1.0, [1.0], "o")
    x = xi_apply(disk.section(0), f0, 1.0, "o")
    hp_side, disk_side = x.basis.inner(x, x).real, disk.G[0, 0].real
    hand = max(abs(hp_side - 1), abs(disk_side - 1))
    verdict(5, "Xi unitarity", worst <= 1e-10 and hand <= 1e-10,
            f"transported Gram residual {worst:.2e}, hand check sides {hp_side:.12f}, {disk_side:.12f}")


def test_06_intertwinings(verdict):
    rng = _rng(6)
    obs = contr = indep = 0.0
    for f in CORPUS.values():
        nodes = random_halfplane(rng, 5)
        probes = random_halfplane(rng, 20)
        for a in ALPHAS:
            obs = max(obs, intertwine_check_obs(f, a, nodes, probes, rng=rng))
            contr = max(contr, intertwine_check_contr(f, a, nodes, probes, rng=rng))
        indep = max(indep, output_alpha_independence(f, nodes, 0.8 + 0.3j, ALPHAS, rng=rng))
    ok = max(obs, contr, indep) <= 1e-9
    verdict(6, "intertwinings", ok,
            f"observable {obs:.2e}, controllable {contr:.2e}, alpha independence {indep:.2e} (tol 1e-9)")


def test_07_similarity(verdict):
    r2 = np.sqrt(2)
    ext = ExtRealization(-1.0, -r2, r2, 1.0, energy_preserving=True)
    M = controllable_model(BlaschkeScalar(1.0))
    rep = M.intertwiner_delta(ext, M.basis([0.5, 1.0, 2 + 1j, 3 - 2j, 6.0]))
    ok = rep.isometry_residual <= 1e-10 and rep.intertwine_residual <= 1e-10
    verdict(7, "unitary similarity", ok,
            f"isometry {rep.isometry_residual:.2e}, intertwining {rep.intertwine_residual:.2e} (tol 1e-10)")


def test_08_resolvent_laws(verdict):
    rng = _rng(8)
    two_route = ident = 0.0
    a1, a2 = 0.8 + 0.3j, 2.5 - 1j
    for f in CORPUS.values():
        M = controllable_model(f)
        b = M.basis(random_halfplane(rng, 4))
        x = b.random_vector(rng)
        probes = random_halfplane(rng, 20)
        for a in ALPHAS:
            r = M.resolvent_on_span(a, x)
            g = M.resolvent_generic(a, x, M.tau(a, x))
            two_route = max(two_route, max(float(np.abs(r(mu) - g(mu)).max()) for mu in probes))
        r1, r2 = M.resolvent_on_span(a1, x), M.resolvent_on_span(a2, x)
        r12 = M.resolvent_on_span(a1, r2)
        ident = max(ident, max(float(np.abs(r1(mu) - r2(mu) - (a2 - a1) * r12(mu)).max()) for mu in probes))
    verdict(8, "resolvent laws", max(two_route, ident) <= 1e-9,
            f"two-route {two_route:.2e}, resolvent identity {ident:.2e} (tol 1e-9)")


def test_09_dual_limit(verdict):
    rng = _rng(9)
    worst = 0.0
    for f in CORPUS.values():
        M = controllable_model(f)
        x = M.basis(random_halfplane(rng, 4)).random_vector(rng)
        y = rng.standard_normal(f.p) + 1j * rng.standard_normal(f.p)
        u = M.dual_apply(x, y).u
        exact = M.dual_limit_closed_form(x, y)
        worst = max(worst, float(np.linalg.norm(u - exact) / np.linalg.norm(exact)))
    B = controllable_model(BlaschkeScalar(1.0))
    u1 = B.dual_apply(B.basis([1.0]).section(0), [0.0]).u[0]
    hand = abs(u1 - 1)
    verdict(9, "dual-node limit", worst <= 1e-6 and hand <= 1e-6,
            f"relative error {worst:.2e} (tol 1e-6), Blaschke section u = {u1.real:.10f}")


def test_10_decay_bound(verdict):
    rng = _rng(10)
    worst = 0.0
    for f in CORPUS.values():
        for tag in ("Kc", "Ko"):
            b = SpanBasis(tag, f, random_halfplane(rng, 6))
            probes = random_halfplane(rng, 50, 0.05, 50)
            for _ in range(5):
                worst = max(worst, b.decay_bound_check(b.random_vector(rng), probes).worst_ratio)
    b = SpanBasis("Kc", Constant(0.0), [1.0])
    sat = b.decay_bound_check(b.section(0), [1.0])
    ok = worst <= 1 + 1e-8 and sat.passed and abs(sat.worst_ratio - 1) <= 1e-12
    verdict(10, "decay bound", ok, f"worst ratio {worst:.10f}, saturation ratio {sat.worst_ratio:.15f}")


def test_11_constant_model(verdict):
    rng = _rng(11)
    worst = 0.0
    for name in CONSTANTS:
        M = controllable_model(CORPUS[name])
        x = M.basis(random_halfplane(rng, 6)).random_vector(rng)
        for a in ALPHAS:
            worst = max(worst, float(np.abs(M.tau(a, x)).max()))
    half = controllable_model(Constant(0.5)).conservativity_probe()
    inner = controllable_model(BlaschkeScalar(1.0)).conservativity_probe()
    ok = worst <= 1e-12 and not half.condition_holds and inner.condition_holds
    verdict(11, "constant-function model", ok,
            f"max |tau x| {worst:.1e}; Constant(0.5) conservative={half.condition_holds}, "
            f"Blaschke(1) conservative={inner.condition_holds}")


def test_12_quadrature(verdict):
    rng = _rng(12)
    worst = 0.0
    for mu, lam in zip(random_halfplane(rng, 10, 0.3, 5), random_halfplane(rng, 10, 0.3, 5)):
        q = h2_inner_quadrature(h2_section(lam), h2_section(mu))
        exact = eval_kernel("H2", None, mu, lam)[0, 0]
        worst = max(worst, abs(q - exact) / abs(exact))
    verdict(12, "quadrature cross-check", worst <= 1e-6, f"max relative error {worst:.2e} (tol 1e-6)")
