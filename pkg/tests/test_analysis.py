import math

import numpy as np
import pytest

from vortexlab.algebra import CentralParameter, parse_representation
from vortexlab.analysis import (
    HypothesisError,
    NotAVortexError,
    SobolevIndex,
    box_mask,
    embedding_check,
    existence_threshold,
    interior_regularity_probe,
    multiplication_check,
    phi_l2_identity,
    phi_pointwise_bound_check,
    sobolev_norm,
)
from vortexlab.fields import Pair, TwistData, random_smooth_pair
from vortexlab.lattice import KaehlerTorus


def test_sobolev_weight():
    assert SobolevIndex(1, 2).weight == pytest.approx(-1.0)
    assert SobolevIndex(0, 4).weight == pytest.approx(-1.0)
    assert str(SobolevIndex(1, 2)) == "L^2_1"


def test_sobolev_norm_of_plane_wave():
    torus = KaehlerTorus(32)
    x0 = torus.coords()[0]
    f = np.sin(2 * math.pi * x0)
    l2 = sobolev_norm(f, SobolevIndex(0, 2), torus)
    assert l2 == pytest.approx(math.sqrt(0.5))
    h1 = sobolev_norm(f, SobolevIndex(1, 2), torus)
    # forward difference symbol: |e^{ikh} - 1| / h
    k = 2 * math.pi
    dk = 2 * math.sin(k * torus.h / 2) / torus.h
    assert h1 == pytest.approx(math.sqrt(0.5 * (1 + dk**2)))


def test_order_cap():
    torus = KaehlerTorus(4)
    with pytest.raises(ValueError):
        sobolev_norm(np.zeros(torus.shape), SobolevIndex(4, 2), torus)


def test_hypotheses_rejected():
    with pytest.raises(HypothesisError):
        embedding_check(SobolevIndex(0, 4), SobolevIndex(1, 2), trials=10)
    with pytest.raises(HypothesisError):
        multiplication_check(SobolevIndex(1, 2), SobolevIndex(1, 2), SobolevIndex(1, 2), trials=10)


def test_embedding_small_run():
    rep = embedding_check(SobolevIndex(1, 2), SobolevIndex(0, 4), trials=100, torus=KaehlerTorus(6))
    assert rep.violations == 0 and rep.constant == pytest.approx(1.25 * rep.estimated_sup)


def test_identity_requires_vortex():
    rep = parse_representation("u1:1")
    p = random_smooth_pair(KaehlerTorus(4), rep, TwistData.from_planes(m01=1), seed=0)
    tau = CentralParameter.scalar(rep, 6 * math.pi)
    with pytest.raises(NotAVortexError):
        phi_l2_identity(p, tau)
    with pytest.raises(NotAVortexError):
        phi_pointwise_bound_check(p, tau)
    assert existence_threshold(p, tau) == pytest.approx(4 * math.pi)
    assert existence_threshold(p, CentralParameter.scalar(rep, math.pi)) < 0


def test_identity_on_zero_vortex():
    # trivial bundle, tau = 0: the zero pair is a vortex and both sides vanish
    rep = parse_representation("u1:1")
    p = Pair.zero(KaehlerTorus(4), rep)
    r = phi_l2_identity(p, CentralParameter.scalar(rep, 0.0))
    assert r.lhs == pytest.approx(0.0) and r.rhs == pytest.approx(0.0)


def test_pointwise_bound_without_vortex_requirement():
    rep = parse_representation("u1:1")
    p = Pair.zero(KaehlerTorus(4), rep)
    r = phi_pointwise_bound_check(p, CentralParameter.scalar(rep, 2.0), require_vortex=False)
    assert r.holds and r.bound == pytest.approx(2.0)


def test_regularity_probe_warns_when_not_contained():
    rep = parse_representation("u1:1")
    p = random_smooth_pair(KaehlerTorus(8), rep, None, seed=1)
    U = ((0, 8),) * 4
    r = interior_regularity_probe(p, U, ((2, 6),) * 4, p=2)
    assert r.contained and r.ratio > 0
    with pytest.warns(UserWarning):
        interior_regularity_probe(p, ((2, 6),) * 4, ((2, 6),) * 4, p=2)
    assert box_mask(p.torus, ((2, 6),) * 4).sum() == 4**4
