import numpy as np
import pytest

from vortexlab.algebra import CentralParameter, parse_representation
from vortexlab.fields import GaugeTransformation, Pair, TwistData, gauge_act, random_smooth_pair, ymh_density
from vortexlab.gaugefix import (
    GaugeFixingError,
    coulomb_gauge,
    divergence,
    estimate_coulomb_constant,
    local_energy_bound_check,
    random_small_connection,
)
from vortexlab.lattice import KaehlerTorus


def test_abelian_single_solve():
    torus = KaehlerTorus(6)
    rep = parse_representation("u1:1")
    p = random_smooth_pair(torus, rep, TwistData.from_planes(m01=1), seed=1, amplitude=0.3)
    res = coulomb_gauge(p)
    assert res.iterations == 1 and res.divergence_norm < 1e-10
    assert divergence(res.pair).norm() < 1e-10
    tau = CentralParameter.scalar(rep, 1.0)
    assert np.max(np.abs(ymh_density(res.pair, tau) - ymh_density(p, tau))) < 1e-10


def test_nonabelian_converges_and_is_idempotent():
    torus = KaehlerTorus(4)
    rep = parse_representation("un:2:fund")
    p = random_smooth_pair(torus, rep, None, seed=2, amplitude=0.3)
    q = gauge_act(GaugeTransformation.random(torus, rep.group, np.random.default_rng(0), 0.3), p)
    res = coulomb_gauge(q)
    assert res.divergence_norm < 1e-10 and res.iterations < 100
    again = coulomb_gauge(res.pair)
    assert again.iterations == 0


def test_stall_raises_with_partial_result():
    torus = KaehlerTorus(4)
    rep = parse_representation("un:2:fund")
    p = random_smooth_pair(torus, rep, None, seed=2, amplitude=0.3)
    with pytest.raises(GaugeFixingError) as info:
        coulomb_gauge(p, tol=1e-14, max_iter=1)
    assert info.value.result is not None


def test_small_connection_amplitude():
    torus = KaehlerTorus(4)
    A = random_small_connection(torus, parse_representation("u1:1").group, 0.2, seed=3)
    assert np.abs(A).max() == pytest.approx(0.2)
    assert np.allclose(A.mean(axis=(1, 2, 3, 4)), 0.0)


def test_constant_estimate_and_local_bound():
    torus = KaehlerTorus(4)
    rep = parse_representation("u1:1")
    est = estimate_coulomb_constant(torus, rep, trials=5, seed=1)
    assert est["constant"] == pytest.approx(1.25 * est["max_ratio"])
    tau = CentralParameter.scalar(rep, -1.0)
    fixed = coulomb_gauge(random_smooth_pair(torus, rep, None, seed=4, amplitude=0.2)).pair
    rep_ = local_energy_bound_check(fixed, tau, est["constant"])
    assert rep_.coulomb_ok and rep_.lhs > 0
    # outside Coulomb gauge the precondition is reported
    raw = random_smooth_pair(torus, rep, None, seed=4, amplitude=0.2)
    assert not local_energy_bound_check(raw, tau, est["constant"]).coulomb_ok
