import math

import numpy as np
import pytest
from scipy import stats

from fsens import divergences as dv
from fsens import inputs
from fsens import oracle as orc
from fsens.functions import LINEAR6_COEFFS


def _norm_logpdf(m, v):
    return lambda x: stats.norm(m, math.sqrt(v)).logpdf(x)


@pytest.mark.parametrize("name", ["kl", "rkl", "hellinger", "tv"])
@pytest.mark.parametrize("m1, v1, m2, v2", [(0, 1, 0.5, 1), (0.2, 0.5, -0.3, 2.0), (1, 3, 0, 1)])
def test_closed_forms_match_quadrature(name, m1, v1, m2, v2):
    exact = orc.gaussian_divergence_closed_form(name, m1, v1, m2, v2)
    tight = orc.GridConfig(rtol=1e-7, atol=1e-12)  # |p - q| has kinks: O(h^2) at best
    quad = orc.divergence_by_quadrature(name, _norm_logpdf(m1, v1), _norm_logpdf(m2, v2),
                                        centre=0.0, scale=2.0, grid_config=tight)
    assert quad == pytest.approx(exact, rel=1e-5, abs=1e-9)


def test_closed_form_errors():
    with pytest.raises(orc.OracleError):
        orc.gaussian_divergence_closed_form("neyman", 0, 1, 0, 1)
    with pytest.raises(orc.OracleError):
        orc.gaussian_divergence_closed_form("kl", 0, 0, 0, 1)


def test_rkl_index_is_mutual_information(gaussian6):
    o = orc.GaussianLinearOracle.from_inputs(LINEAR6_COEFFS, gaussian6)
    rho = o.correlation(1)
    assert rho == pytest.approx(1 / math.sqrt(9.55))
    h = orc.index_by_quadrature(o.exact_densities(), gaussian6, [1], "rkl")
    assert h == pytest.approx(orc.mutual_information_gaussian(rho), abs=1e-7)
    assert h == pytest.approx(0.0553049, abs=1e-6)


def test_index_vanishes_for_unrelated_variable():
    model = inputs.IndependentInputs([inputs.Gaussian(0, 1)] * 3)
    o = orc.GaussianLinearOracle([1.0, 2.0, 0.0])
    assert orc.index_by_quadrature(o.exact_densities(), model, [3], "tv") == pytest.approx(0, abs=1e-9)


def test_tv_bounds_for_pairs(gaussian6):
    # H_1 <= H_{1,2} <= H_1 + H_2 for a metric divergence
    dens = orc.GaussianLinearOracle.from_inputs(LINEAR6_COEFFS, gaussian6).exact_densities()
    h1 = orc.index_by_quadrature(dens, gaussian6, [1], "tv")
    h2 = orc.index_by_quadrature(dens, gaussian6, [2], "tv")
    h12 = orc.index_by_quadrature(dens, gaussian6, [1, 2], "tv")
    assert h1 - 1e-3 <= h12 <= h1 + h2 + 1e-3


def test_joint_moments_and_singularity():
    o = orc.GaussianLinearOracle([1.0, 1.0])
    mean, cov = o.joint_moments([1])
    np.testing.assert_allclose(cov, [[1, 1], [1, 2]])
    with pytest.raises(orc.OracleError):
        o.joint_moments([1, 2])
    with pytest.raises(orc.OracleError):
        orc.GaussianLinearOracle([0.0, 0.0])
    with pytest.raises(orc.OracleError):
        orc.GaussianLinearOracle.from_inputs([1.0], inputs.IndependentInputs([inputs.Uniform(0, 1)]))


def test_densities_are_normalized_logpdfs():
    model = inputs.CorrelatedGaussian.exponential(6)
    dens = orc.GaussianLinearOracle.from_inputs(LINEAR6_COEFFS, model).exact_densities()
    mean, cov = dens.oracle.joint_moments([2])
    pts = np.array([[0.3, -1.0], [1.0, 2.0]])
    ref = stats.multivariate_normal(mean, cov).logpdf(pts)
    np.testing.assert_allclose(dens.logpdf_joint((2,), pts[:, :1], pts[:, 1]), ref, rtol=1e-12)


def test_quadrature_respects_conventions_for_unbounded_divergence(gaussian6):
    dens = orc.GaussianLinearOracle.from_inputs(LINEAR6_COEFFS, gaussian6).exact_densities()
    val = orc.index_by_quadrature(dens, gaussian6, [6], dv.get("neyman"))
    assert math.isfinite(val) and val > 0
