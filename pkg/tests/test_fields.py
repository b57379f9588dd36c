import math

import numpy as np
import pytest

from vortexlab.algebra import CentralParameter, parse_representation
from vortexlab.fields import (
    GaugeTransformation,
    Pair,
    TwistData,
    band_limited,
    constant_curvature_pair,
    curvature,
    gauge_act,
    random_smooth_pair,
    vortex_residuals,
    ymh_density,
)
from vortexlab.lattice import KaehlerTorus


def test_twist_validation():
    with pytest.raises(ValueError):
        TwistData(((0, 1, 0, 0), (1, 0, 0, 0), (0,) * 4, (0,) * 4))
    t = TwistData.from_planes(m01=2, m23=-1)
    assert t.matrix[1, 0] == -2 and t.matrix[3, 2] == 1
    assert TwistData().trivial


def test_constant_curvature_pair_flux():
    torus = KaehlerTorus(6)
    rep = parse_representation("u1:1")
    tw = TwistData.from_planes(m01=1, m23=2)
    p = constant_curvature_pair(torus, rep, tw)
    F = curvature(p).data[..., 0]
    assert np.allclose(F, tw.flux(torus)[:, None, None, None, None])
    assert tw.flux(torus)[0] == pytest.approx(-2 * math.pi)


@pytest.mark.parametrize("desc,twist", [("u1:1", {"m01": 1}), ("un:2:fund", {}), ("un:2:fund", {"m01": 1})])
def test_gauge_invariance(desc, twist):
    torus = KaehlerTorus(4)
    rep = parse_representation(desc)
    tau = CentralParameter.scalar(rep, 2.0)
    p = random_smooth_pair(torus, rep, TwistData.from_planes(**twist), seed=1, amplitude=0.4)
    g = GaugeTransformation.random(torus, rep.group, np.random.default_rng(2), 0.5)
    q = gauge_act(g, p)
    assert np.max(np.abs(ymh_density(q, tau) - ymh_density(p, tau))) < 1e-10
    r0, r1 = vortex_residuals(p, tau), vortex_residuals(q, tau)
    assert r0.max_norm == pytest.approx(r1.max_norm, rel=1e-10)
    back = gauge_act(g.inverse(), q)
    assert np.max(np.abs(back.phi - p.phi)) < 1e-10


def test_gauge_composition():
    torus = KaehlerTorus(4)
    rep = parse_representation("un:2:fund")
    rng = np.random.default_rng(3)
    p = random_smooth_pair(torus, rep, None, seed=2, amplitude=0.3)
    a = GaugeTransformation.random(torus, rep.group, rng, 0.4)
    b = GaugeTransformation.random(torus, rep.group, rng, 0.4)
    # right action: a @ b applies a first
    lhs = gauge_act(a @ b, p)
    rhs = gauge_act(b, gauge_act(a, p))
    assert np.allclose(lhs.phi, rhs.phi, atol=1e-12)
    assert np.allclose(ymh_density(lhs, CentralParameter.scalar(rep, 1.0)), ymh_density(rhs, CentralParameter.scalar(rep, 1.0)))


def test_band_limited_is_resolution_independent():
    fine, coarse = KaehlerTorus(8), KaehlerTorus(4)
    a = band_limited(fine, (2,), 1, np.random.default_rng(0))
    b = band_limited(coarse, (2,), 1, np.random.default_rng(0))
    assert np.allclose(a[::2, ::2, ::2, ::2], b)


def test_pair_shape_checks():
    torus = KaehlerTorus(4)
    rep = parse_representation("u1:1")
    with pytest.raises(ValueError):
        Pair(torus, rep, np.zeros((4, 4, 4, 4, 4, 2)), np.zeros(torus.shape + (1,)))


def test_zero_pair_residuals():
    torus = KaehlerTorus(4)
    rep = parse_representation("u1:1")
    p = Pair.zero(torus, rep)
    res = vortex_residuals(p, CentralParameter.scalar(rep, 0.0))
    assert res.is_vortex(1e-12)
    assert set(res.as_dict()) == {"r1", "r2", "r3"}
