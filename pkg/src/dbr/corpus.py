"""Reference set of Schur functions used by the checks and the test-suite."""
from __future__ import annotations

import numpy as np

from .schur import BlaschkeScalar, Constant, RationalStateSpace, SchurFunction


def _unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def constant_with_singular_values(sv, seed: int = 7) -> Constant:
    """Square constant ``U diag(sv) V^*`` with seeded random unitaries."""
    rng = np.random.default_rng(seed)
    n = len(sv)
    return Constant(_unitary(rng, n) @ np.diag(sv) @ _unitary(rng, n).conj().T)


def peak_gain(f: SchurFunction, n: int = 4000) -> float:
    """Grid estimate of the supremum norm along the imaginary axis."""
    omega = np.logspace(-4, 4, n)
    pts = 1e-9 + 1j * np.concatenate([-omega[::-1], [0.0], omega])
    vals = f.evaluate_many(pts)
    top = np.linalg.svd(vals, compute_uv=False).max()
    return float(max(top, np.linalg.norm(f.at_infinity(), 2)))


def random_contractive_rational(order: int = 3, p: int = 1, m: int = 1, gain: float = 0.9,
                                seed: int = 0) -> RationalStateSpace:
    """Random stable realization rescaled so its peak gain is ``gain``.

    The poles are kept at distance at least 0.5 from the imaginary axis, which
    makes the boundary response smooth enough for the grid estimate of the
    peak to be reliable.
    """
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((order, order)) + 1j * rng.standard_normal((order, order))
    shift = np.linalg.eigvals(A).real.max() + 0.5 + rng.uniform(0, 1)
    A = A - shift * np.eye(order)
    B = rng.standard_normal((order, m)) + 1j * rng.standard_normal((order, m))
    C = rng.standard_normal((p, order)) + 1j * rng.standard_normal((p, order))
    D = 0.3 * (rng.standard_normal((p, m)) + 1j * rng.standard_normal((p, m)))
    s = gain / peak_gain(RationalStateSpace(A, B, C, D))
    return RationalStateSpace(A, B, s * C, s * D)


def default_corpus() -> dict[str, SchurFunction]:
    """Named test functions covering every variant and both extreme norms."""
    return {
        "constant_0": Constant(0.0),
        "constant_half": Constant(0.5),
        "constant_2x2": constant_with_singular_values([1.0, 0.3]),
        "blaschke_1": BlaschkeScalar(1.0),
        "blaschke_2+i": BlaschkeScalar(2 + 1j),
        "rational_3": random_contractive_rational(3, seed=11),
        "rational_2x2": random_contractive_rational(2, p=2, m=2, seed=5),
    }
