import json

import numpy as np
import pytest

from dbr.errors import ConvergenceError, DomainError
from dbr.kernels import (EXACT_RIGGED_TAGS, KernelKind, cayley_kernel_check, default_aux_nodes,
                         eval_kernel, gram, h2_inner_quadrature, h2_section, kernel_blocks,
                         kernel_grid_csv, positivity_check, spectral_pinv)
from dbr.schur import BlaschkeScalar, Constant, to_disk

from conftest import CORPUS, random_disk, random_halfplane


def k(tag, f, mu, lam, beta=None, aux=None):
    kind = KernelKind(tag, beta) if beta is not None else tag
    return eval_kernel(kind, f, mu, lam, aux)[0, 0]


def test_kernel_examples():
    assert k("H2", None, 1, 1) == pytest.approx(0.5)
    assert k("Ko", BlaschkeScalar(1.0), 1, 1) == pytest.approx(0.5)
    assert k("Kc", Constant(0.0), 2, 1) == pytest.approx(1 / 3)
    assert k("Kcm1", Constant(0.0), 1, 1, beta=1.0) == pytest.approx(2.0)


def test_gram_examples():
    G = gram("Ko", BlaschkeScalar(1.0), [1, 2]).entries
    assert np.allclose(G, [[1 / 2, 1 / 3], [1 / 3, 2 / 9]], atol=1e-15)
    assert np.allclose(gram("H2", None, [1]).entries, [[0.5]])
    assert np.allclose(gram("Kc", Constant(0.5), [1]).entries, [[0.375]])


def test_positivity_examples():
    rep = positivity_check(gram("Ko", BlaschkeScalar(1.0), [1, 2]))
    assert rep.passed and abs(rep.eig_min) < 1e-15 and rep.numerical_rank == 1
    G5 = gram("H2", None, [0.5, 1, 2 + 1j, 3 - 2j, 7])
    rep = positivity_check(G5)
    assert rep.passed and rep.numerical_rank == 5
    assert not positivity_check(-G5.entries).passed


def test_rigged_kernels_need_beta():
    with pytest.raises(DomainError):
        KernelKind("Kc1d")
    with pytest.raises(DomainError):
        KernelKind("Ko1", -1.0)
    with pytest.raises(ValueError):
        KernelKind("Ko", 1.0)


def test_domain_errors():
    with pytest.raises(DomainError):
        eval_kernel("Ko", BlaschkeScalar(1.0), -1, 1)
    with pytest.raises(DomainError):
        eval_kernel("DiskKo", BlaschkeScalar(1.0), 0.1, 0.2)


SYMMETRIC = ("H2", "Ko", "Kc", "Kcm1", "Kcm1d", "Kom1", "Kom1d")


@pytest.mark.parametrize("name", sorted(CORPUS))
@pytest.mark.parametrize("tag", SYMMETRIC + ("DiskKo", "DiskKc"))
def test_hermitian_symmetry(name, tag):
    f = CORPUS[name]
    rng = np.random.default_rng(3)
    if tag.startswith("Disk"):
        f, pts = to_disk(f, 1.0), random_disk(rng, 6)
    else:
        pts = random_halfplane(rng, 6)
    kind = KernelKind(tag, 0.8 + 0.3j) if tag.endswith(("1", "1d")) else KernelKind(tag)
    K = kernel_blocks(kind, None if tag == "H2" else f, pts, pts)
    assert np.allclose(K, K.transpose(1, 0, 3, 2).conj(), rtol=0, atol=1e-12 * np.abs(K).max())


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_positivity_on_random_nodes(name):
    f = CORPUS[name]
    rng = np.random.default_rng(4)
    nodes = random_halfplane(rng, 20)
    dnodes = random_disk(rng, 20)
    g = to_disk(f, 1.0)
    cases = [("H2", None, nodes), ("Ko", f, nodes), ("Kc", f, nodes), ("DiskKo", g, dnodes), ("DiskKc", g, dnodes)]
    cases += [(KernelKind(t, 0.9 + 0.4j), f, nodes) for t in EXACT_RIGGED_TAGS]
    for kind, fn, pts in cases:
        rep = positivity_check(gram(kind, fn, pts))
        assert rep.passed, (kind, rep)


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_factorization_identity(name):
    f = CORPUS[name]
    rng = np.random.default_rng(5)
    for mu, lam in zip(random_halfplane(rng, 10), random_halfplane(rng, 10)):
        kk = 1 / (mu + np.conj(lam))
        rhs = kk * np.eye(f.p) - f(mu) @ (kk * f(lam).conj().T)
        assert np.allclose(eval_kernel("Ko", f, mu, lam), rhs, atol=1e-12)


# state-space expressions for the rigged kernels of a function with an
# energy-preserving realization (A, B, C, D); independent of the quotient code
def _rigged_oracle(tag, f, beta, mu, lam):
    A, B, C, _ = f.realization()
    n = A.shape[0]
    R = lambda x: np.linalg.inv(x * np.eye(n) - A)
    Rs = lambda x: np.linalg.inv(x * np.eye(n) - A.conj().T)
    bb, lb = np.conj(beta), np.conj(lam)
    Bs, Cs = B.conj().T, C.conj().T
    return {
        "Kc1d": lambda: Bs @ Rs(mu) @ Rs(bb) @ R(beta) @ R(lb) @ B,
        "Kc1": lambda: Bs @ Rs(mu) @ R(beta) @ Rs(bb) @ R(lb) @ B,
        "Ko1": lambda: C @ R(mu) @ R(beta) @ Rs(bb) @ Rs(lb) @ Cs,
        "Ko1d": lambda: C @ R(mu) @ Rs(bb) @ R(beta) @ Rs(lb) @ Cs,
    }[tag]()


@pytest.mark.parametrize("tag", ["Kc1d", "Kc1", "Ko1", "Ko1d"])
@pytest.mark.parametrize("a", [1.0, 2 + 1j, 0.4 - 0.7j])
def test_rigged_kernels_match_state_space(tag, a):
    f = BlaschkeScalar(a)
    beta = 0.9 + 0.5j
    pts = [beta, np.conj(beta), beta + 1e-9, np.conj(beta) + 3e-7j, 2 + 1j, 0.5, beta + 0.05]
    K = kernel_blocks(KernelKind(tag, beta), f, pts, pts, aux=default_aux_nodes())
    for i, mu in enumerate(pts):
        for j, lam in enumerate(pts):
            assert K[i, j] == pytest.approx(_rigged_oracle(tag, f, beta, mu, lam), abs=1e-12)


def test_rigged_frozen_values():
    # Blaschke(1), beta = 1: both double quotients equal 1/(2(mu+1)(conj(lam)+1))
    f = BlaschkeScalar(1.0)
    assert k("Kc1d", f, 2, 2, beta=1.0) == pytest.approx(1 / 18, abs=1e-15)
    assert k("Ko1", f, 2, 2, beta=1.0) == pytest.approx(1 / 18, abs=1e-15)
    # removable singularity at mu = lam = beta
    assert k("Kc1d", f, 1, 1, beta=1.0) == pytest.approx(1 / 8, abs=1e-14)
    assert k("Ko1", f, 1, 1, beta=1.0) == pytest.approx(1 / 8, abs=1e-14)


def test_rigged_scaled_kernels():
    f = CORPUS["rational_3"]
    b, mu, lam = 0.7 + 0.2j, 1.3 - 0.4j, 0.6 + 2j
    kc, ko = k("Kc", f, mu, lam), k("Ko", f, mu, lam)
    assert k("Kcm1d", f, mu, lam, b) == pytest.approx((np.conj(b) - mu) * (b - np.conj(lam)) * kc)
    assert k("Kom1", f, mu, lam, b) == pytest.approx((b - mu) * (np.conj(b) - np.conj(lam)) * ko)


def test_h2_quadrature_examples():
    assert h2_inner_quadrature(h2_section(1), h2_section(1)) == pytest.approx(0.5, abs=1e-6)
    assert h2_inner_quadrature(h2_section(1), h2_section(2)) == pytest.approx(1 / 3, abs=1e-6)
    assert h2_inner_quadrature(lambda w: np.zeros(1), h2_section(2)) == 0


def test_h2_quadrature_matches_kernel(rng):
    for mu, lam in zip(random_halfplane(rng, 10, 0.3, 5), random_halfplane(rng, 10, 0.3, 5)):
        q = h2_inner_quadrature(h2_section(lam), h2_section(mu))
        assert q == pytest.approx(k("H2", None, mu, lam), rel=1e-6)


def test_h2_quadrature_convergence_error():
    # a section concentrated next to the axis cannot be resolved by a small rule
    with pytest.raises(ConvergenceError):
        h2_inner_quadrature(h2_section(1e-6), h2_section(1e-6), n_quad=8)


def test_cayley_kernel_examples():
    assert cayley_kernel_check(Constant(0.0), 1.0, [(1, 1)]) <= 1e-12
    assert cayley_kernel_check(BlaschkeScalar(1.0), 1.0, [(2, 2)]) <= 1e-12
    assert cayley_kernel_check(Constant(np.zeros((1, 0))), 1.0, [(1, 1)]) == 0.0


@pytest.mark.parametrize("name", sorted(CORPUS))
@pytest.mark.parametrize("alpha", [1.0, 2 + 1j])
def test_cayley_kernel_relation(name, alpha):
    rng = np.random.default_rng(6)
    pairs = list(zip(random_halfplane(rng, 50), random_halfplane(rng, 50)))
    assert cayley_kernel_check(CORPUS[name], alpha, pairs) <= 1e-10


def test_spectral_pinv_cutoff():
    G = gram("Ko", BlaschkeScalar(1.0), [1, 2, 3]).entries
    P, rank = spectral_pinv(G)
    assert rank == 1
    assert np.allclose(G @ P @ G, G, atol=1e-14)


def test_gram_exports():
    G = gram("Kc", Constant(0.0), [1, 2])
    rows = G.to_csv().strip().split("\n")
    assert len(rows) == 2 and rows[0].split(",")[:2] == ["0.5", "0.0"]
    obj = json.loads(G.to_json())
    assert obj["kind"] == {"tag": "Kc"} and len(obj["nodes"]) == 2


def test_gram_rejects_repeated_nodes():
    with pytest.raises(ValueError):
        gram("H2", None, [1.0, 1.0 + 1e-10])


def test_kernel_grid_csv():
    text = kernel_grid_csv("Ko", BlaschkeScalar(1.0), 1.0, [1, 2], [0, 1])
    lines = text.strip().split("\n")
    assert lines[0] == "mu_re,mu_im,value_re,value_im"
    assert len(lines) == 5
    assert float(lines[1].split(",")[2]) == pytest.approx(0.5)
