import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsens import divergences as dv

ALL = [dv.get(n) for n in dv.CATALOG_NAMES] + [dv.get("alpha:-0.3"), dv.get("vajda:1.5")]
SYMMETRIC = ["tv", "hellinger", "jeffreys", "triangular"]

probs = st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8)


def _normalize(w):
    w = np.asarray(w, dtype=float)
    return w / w.sum()


@pytest.mark.parametrize("gf", ALL, ids=lambda g: g.name)
def test_normalized_at_one(gf):
    assert gf(1.0) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("gf", ALL, ids=lambda g: g.name)
def test_zero_ratio_uses_f0(gf):
    assert gf(0.0) == gf.f0


@pytest.mark.parametrize("gf", ALL, ids=lambda g: g.name)
def test_limit_f0_matches_function(gf):
    # a deep interior point, since t^(1/4) and sqrt(t) converge slowly
    val = float(gf.func(np.array([1e-200]))[0])
    if math.isinf(gf.f0):
        assert abs(val) > 100 and math.copysign(1, val) == math.copysign(1, gf.f0)
    else:
        assert val == pytest.approx(gf.f0, abs=1e-12)


@pytest.mark.parametrize("gf", ALL, ids=lambda g: g.name)
def test_limit_fstar0_matches_function(gf):
    t = 1e100
    val = float(gf.func(np.array([t]))[0]) / t
    if math.isinf(gf.fstar0):
        # at least logarithmic divergence in the right direction
        nearer = float(gf.func(np.array([1e50]))[0]) / 1e50
        assert abs(val) > 100 and abs(val) > abs(nearer)
        assert math.copysign(1, val) == math.copysign(1, gf.fstar0)
    else:
        assert val == pytest.approx(gf.fstar0, abs=1e-12)


@pytest.mark.parametrize("gf", ALL, ids=lambda g: g.name)
def test_convex_on_grid(gf):
    t = np.linspace(0.05, 20, 400)
    v = gf(t)
    second = v[2:] - 2 * v[1:-1] + v[:-2]
    assert np.all(second >= -1e-9)


def test_negative_and_nan_rejected():
    tv = dv.get("tv")
    with pytest.raises(dv.DivergenceError):
        tv(-1.0)
    with pytest.raises(dv.DivergenceError):
        tv(np.array([1.0, np.nan]))


def test_infinite_ratio():
    assert dv.get("kl")(math.inf) == math.inf
    assert dv.get("neyman")(math.inf) == -math.inf
    assert dv.get("rkl")(math.inf) == -math.inf


@given(probs, probs)
@settings(max_examples=60, deadline=None)
def test_nonnegativity(p, q):
    n = min(len(p), len(q))
    p, q = _normalize(p[:n]), _normalize(q[:n])
    for gf in ALL:
        assert dv.divergence(gf, p, q) >= -1e-10


@given(probs, probs)
@settings(max_examples=60, deadline=None)
def test_duality(p, q):
    n = min(len(p), len(q))
    p, q = _normalize(p[:n]), _normalize(q[:n])
    for gf in ALL:
        a = dv.divergence(gf, p, q)
        b = dv.divergence(dv.conjugate(gf), q, p)
        assert a == pytest.approx(b, rel=1e-10, abs=1e-10)


@given(probs, probs)
@settings(max_examples=60, deadline=None)
def test_symmetric_entries(p, q):
    n = min(len(p), len(q))
    p, q = _normalize(p[:n]), _normalize(q[:n])
    for name in SYMMETRIC:
        gf = dv.get(name)
        assert dv.divergence(gf, p, q) == pytest.approx(dv.divergence(gf, q, p), rel=1e-10, abs=1e-10)


def test_disjoint_supports_reach_range_bound():
    p, q = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    for name in ["tv", "hellinger", "triangular"]:
        gf = dv.get(name)
        assert dv.divergence(gf, p, q) == pytest.approx(dv.range_upper_bound(gf))


def test_range_upper_bounds():
    assert dv.range_upper_bound(dv.get("tv")) == 2.0
    assert dv.range_upper_bound(dv.get("hellinger")) == 2.0
    assert dv.range_upper_bound(dv.get("triangular")) == 2.0
    for name in ["kl", "rkl", "pearson", "neyman", "jeffreys"]:
        assert math.isinf(dv.range_upper_bound(dv.get(name)))


def test_conjugate_pairs():
    kl, rkl = dv.get("kl"), dv.get("rkl")
    t = np.array([0.3, 1.7, 5.0])
    np.testing.assert_allclose(dv.conjugate(kl)(t), rkl(t), rtol=1e-14)
    np.testing.assert_allclose(dv.conjugate(dv.get("pearson"))(t), dv.get("neyman")(t), rtol=1e-14)
    assert dv.conjugate(dv.conjugate(kl)).name == "kl"


def test_name_parsing():
    assert dv.get("alpha:0.3").param == pytest.approx(0.3)
    assert dv.get("alpha").param == 0.5
    assert dv.get("vajda").param == 2.0
    assert dv.get("vajda:1").is_metric
    assert not dv.get("hellinger").is_metric
    assert dv.get(" TV ").name == "tv"
    for bad in ["bogus", "alpha:x", "alpha:1", "vajda:0.5"]:
        with pytest.raises(dv.DivergenceError):
            dv.get(bad)


def test_catalog_has_ten_entries():
    assert len(dv.catalog()) == 10
