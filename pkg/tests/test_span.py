import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dbr.errors import DimensionError, PositivityError
from dbr.span import SPAN_TAGS, SpanBasis, build_span, inner, point_eval
from dbr.schur import BlaschkeScalar, Constant, to_disk

from conftest import CORPUS, random_disk, random_halfplane


def _span(tag, f, rng, n=6):
    if tag.startswith("Disk"):
        return build_span(tag, to_disk(f, 1.0), random_disk(rng, n)), random_disk(rng, 20)
    return build_span(tag, f, random_halfplane(rng, n)), random_halfplane(rng, 20)


def test_build_examples():
    b = build_span("Kc", Constant(0.0), [1, 2])
    assert np.allclose(b.G, [[1 / 2, 1 / 3], [1 / 3, 1 / 4]])
    b = build_span("Ko", BlaschkeScalar(1.0), [1, 2])
    assert b.numerical_rank == 1
    empty = build_span("Ko", BlaschkeScalar(1.0), [])
    assert empty.dim == 0 and len(empty) == 0


def test_build_rejects_other_tags():
    with pytest.raises(ValueError):
        build_span("H2", Constant(0.0), [1])


def test_build_rejects_indefinite_gram():
    # a non-contractive constant makes the kernel indefinite
    with pytest.raises(PositivityError):
        build_span("Kc", Constant(2.0), [1, 2])


def test_inner_and_eval_examples():
    b = build_span("Kc", Constant(0.0), [1, 2])
    e1, e2 = b.section(0), b.section(1)
    assert inner(b, e1, e1) == pytest.approx(0.5)
    assert inner(b, e1, e2) == pytest.approx(1 / 3)
    assert inner(b, b.zeros(), e2) == 0
    assert point_eval(b, e1, 1)[0] == pytest.approx(0.5)
    assert point_eval(b, b.zeros(), 3)[0] == 0
    bo = build_span("Ko", BlaschkeScalar(1.0), [1])
    assert point_eval(bo, bo.section(0), 2)[0] == pytest.approx(1 / 3)


def test_inner_is_sesquilinear():
    b = build_span("Kc", CORPUS["rational_3"], [1, 2 + 1j, 0.5 - 0.3j])
    rng = np.random.default_rng(0)
    x, y = b.random_vector(rng), b.random_vector(rng)
    c = 0.3 - 1.2j
    assert b.inner(x * c, y) == pytest.approx(c * b.inner(x, y))
    assert b.inner(x, y * c) == pytest.approx(np.conj(c) * b.inner(x, y))
    assert b.inner(y, x) == pytest.approx(np.conj(b.inner(x, y)))


def test_dimension_errors():
    b = build_span("Kc", Constant(0.0), [1, 2])
    with pytest.raises(DimensionError):
        b.vector([1, 2, 3])
    other = build_span("Kc", Constant(0.0), [1, 3])
    with pytest.raises(DimensionError):
        b.section(0) + other.section(0)
    with pytest.raises(DimensionError):
        b.inner(b.section(0), build_span("Kc", Constant(0.0), [1]).section(0))


@pytest.mark.parametrize("name", sorted(CORPUS))
@pytest.mark.parametrize("tag", SPAN_TAGS)
def test_reproducing_consistency(name, tag):
    rng = np.random.default_rng(11)
    b, probes = _span(tag, CORPUS[name], rng)
    x = b.random_vector(rng)
    nx = b.norm(x)
    aug = b.augment(probes)
    xa = aug.embed(x)
    for mu in probes:
        v = rng.standard_normal(b.block_dim) + 1j * rng.standard_normal(b.block_dim)
        lhs = aug.inner(xa, aug.combine([(mu, v)]))
        rhs = np.vdot(v, b.point_eval(x, mu))
        assert abs(lhs - rhs) <= 1e-10 * (1 + nx)


@pytest.mark.parametrize("name", sorted(CORPUS))
@pytest.mark.parametrize("tag", SPAN_TAGS)
def test_projection_idempotence(name, tag):
    rng = np.random.default_rng(12)
    b, _ = _span(tag, CORPUS[name], rng)
    x = b.random_vector(rng)
    vals = b.point_eval_many(x, b.nodes)
    y = b.project(values=vals).vector
    # the Gram-range component of a vector is G c, i.e. its values at the nodes
    assert np.abs(b.point_eval_many(y, b.nodes) - vals).max() <= 1e-9 * max(1.0, np.abs(vals).max())
    z = b.project(values=b.point_eval_many(y, b.nodes)).vector
    assert np.allclose(y.coeffs, z.coeffs, atol=1e-9 * max(1.0, np.abs(y.coeffs).max()))


def test_projection_examples():
    b = build_span("Kc", CORPUS["rational_2x2"], [1, 2, 3 + 1j])
    sec = b.section(1)
    proj = b.project(func=b.evaluator(sec), test_nodes=[0.5, 4 - 1j])
    assert np.allclose(proj.vector.coeffs, sec.coeffs, atol=1e-10)
    assert proj.residuals.max() <= 1e-10
    zero = b.project(values=np.zeros(b.dim))
    assert not zero.vector.coeffs.any()

    bo = build_span("Ko", BlaschkeScalar(1.0), [1, 2])
    proj = bo.project(func=bo.evaluator(bo.section(1)), test_nodes=[0.3, 1.5 + 2j, 7])
    assert proj.numerical_rank == 1
    assert proj.residuals.max() <= 1e-10


def test_projection_needs_input():
    b = build_span("Kc", Constant(0.0), [1])
    with pytest.raises(ValueError):
        b.project()
    with pytest.raises(DimensionError):
        b.project(values=[1, 2])


def test_decay_examples():
    b = build_span("Kc", Constant(0.0), [1])
    rep = b.decay_bound_check(b.section(0), [1])
    assert rep.passed and rep.worst_ratio == pytest.approx(1.0, abs=1e-14)
    far = b.decay_bound_check(b.section(0), [100])
    assert far.passed and far.worst_ratio == pytest.approx((1 / 101) / (1 / 20))
    assert b.decay_bound_check(b.zeros(), [1, 2]).passed


@pytest.mark.parametrize("name", sorted(CORPUS))
@pytest.mark.parametrize("tag", ["Ko", "Kc"])
def test_decay_bound_random(name, tag):
    rng = np.random.default_rng(13)
    b = build_span(tag, CORPUS[name], random_halfplane(rng, 8))
    probes = random_halfplane(rng, 50, 0.05, 50)
    for _ in range(5):
        assert b.decay_bound_check(b.random_vector(rng), probes).passed


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.2, 5), min_size=1, max_size=4, unique=True),
       st.floats(0.05, 20), st.floats(-20, 20))
def test_decay_bound_property(radii, re, im):
    nodes = [r * np.exp(0.4j * k) for k, r in enumerate(radii)]
    b = build_span("Kc", CORPUS["blaschke_2+i"], nodes)
    x = b.vector(np.ones(b.dim))
    assert b.decay_bound_check(x, [complex(re, im)]).passed


def test_same_element_uses_gram_seminorm():
    b = build_span("Ko", BlaschkeScalar(1.0), [1, 2])
    # the two sections are parallel: K(., 2) = (2/3) K(., 1)
    x = b.section(1)
    y = b.section(0) * (2 / 3)
    assert b.same_element(x, y)
    assert not np.allclose(x.coeffs, y.coeffs)


def test_augment_and_embed():
    b = build_span("Kc", CORPUS["rational_2x2"], [1, 2])
    aug = b.augment([2, 3 + 1j])
    assert len(aug) == 3 and b.augment([1]) is b
    x = b.random_vector(np.random.default_rng(1))
    xa = aug.embed(x)
    assert np.allclose(aug.point_eval(xa, 0.7), b.point_eval(x, 0.7))
    with pytest.raises(DimensionError):
        b.embed(xa)


def test_serialization_round_trip():
    b = build_span("Kc", CORPUS["rational_2x2"], [1, 2 + 1j])
    back = SpanBasis.from_dict(json.loads(b.to_json()))
    assert back.kind == b.kind and np.allclose(back.G, b.G)
    assert back.to_json() == b.to_json()
    x = b.section(1, [1, 1j])
    assert len(json.loads(x.to_json())) == b.dim
