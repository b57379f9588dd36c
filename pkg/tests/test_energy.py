import json
import math

import numpy as np
import pytest

from vortexlab.algebra import CentralParameter, parse_representation
from vortexlab.energy import (
    MinimizeOptions,
    NonConvergenceError,
    ch2,
    degree_tau,
    minimize,
    tangent_inner,
    ymh_gradient,
    ymh_total,
)
from vortexlab.fields import Pair, TwistData, constant_curvature_pair, random_smooth_pair
from vortexlab.lattice import KaehlerTorus


def slab_start(N=16):
    rep = parse_representation("u1:1")
    torus = KaehlerTorus(N, 1.0, (N, N, 1, 1))
    x0, x1, _, _ = torus.coords()
    phi = 1 + 0.25 * np.cos(2 * math.pi * x0) + 0.25j * np.sin(2 * math.pi * x1)
    return Pair(torus, rep, np.zeros((4,) + torus.shape + (1,)), phi[..., None], TwistData.from_planes(m01=1))


def test_topological_terms_of_constant_pair():
    rep = parse_representation("u1:1")
    p = constant_curvature_pair(KaehlerTorus(4), rep, TwistData.from_planes(m01=1))
    t = 3.0
    assert degree_tau(p, CentralParameter.scalar(rep, t)) == pytest.approx(t)
    assert ch2(p) == pytest.approx(0.0, abs=1e-12)


def test_report_terms_add_up():
    rep = parse_representation("un:2:fund")
    tau = CentralParameter.scalar(rep, 1.0)
    r = ymh_total(random_smooth_pair(KaehlerTorus(4), rep, None, seed=1, amplitude=0.3), tau)
    assert r.total == pytest.approx(r.curvature_norm2 + r.moment_norm2 + r.derivative_term)
    assert r.defect == pytest.approx(r.alternate - (r.total - r.four_pi_deg + r.eight_pi2_ch2))
    assert set(r.as_dict()) >= {"total", "defect", "topological_bound"}


def test_gradient_directional_derivative():
    rep = parse_representation("u1:1")
    tau = CentralParameter.scalar(rep, 2.0)
    p = random_smooth_pair(KaehlerTorus(4), rep, TwistData.from_planes(m01=1), seed=2, amplitude=0.3)
    g = ymh_gradient(p, tau, "action")
    rng = np.random.default_rng(0)
    v = (rng.standard_normal(p.A.shape), rng.standard_normal(p.phi.shape) + 1j * rng.standard_normal(p.phi.shape))
    e = 1e-4

    def f(s):
        return float(p.model.action(p.A + s * v[0], p.phi + s * v[1], tau.coeffs))

    fd = (f(e) - f(-e)) / (2 * e)
    assert fd == pytest.approx(tangent_inner(g, v), rel=1e-6)


def test_minimize_finds_slab_vortex():
    t = 6 * math.pi
    p0 = slab_start()
    tau = CentralParameter.scalar(p0.rep, t)
    res = minimize(p0, tau, MinimizeOptions(eps=1e-8, check_every=20))
    assert res.status == "vortex" and res.converged
    phi2 = p0.torus.integrate(np.sum(np.abs(res.pair.phi) ** 2, axis=-1)) / p0.torus.lengths[2] / p0.torus.lengths[3]
    assert phi2 == pytest.approx(t - 2 * math.pi, rel=1e-6)
    obj = [r["objective"] for r in res.trace]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(obj, obj[1:]))
    lines = [json.loads(s) for s in res.trace_jsonl().splitlines()]
    assert lines[0].keys() == {"iteration", "objective", "ymh", "r1", "r2", "r3", "grad", "step"}


def test_minimize_reports_nonconvergence():
    p0 = slab_start(8)
    tau = CentralParameter.scalar(p0.rep, 6 * math.pi)
    with pytest.raises(NonConvergenceError) as info:
        minimize(p0, tau, MinimizeOptions(max_iter=3, check_every=1))
    assert info.value.result.status == "max_iter"
    res = minimize(p0, tau, MinimizeOptions(max_iter=3, check_every=1, raise_on_failure=False))
    assert not res.converged


def test_action_objective_is_monotone():
    p0 = slab_start(8)
    tau = CentralParameter.scalar(p0.rep, 6 * math.pi)
    res = minimize(p0, tau, MinimizeOptions(objective="action", max_iter=40, check_every=1, raise_on_failure=False))
    ymh = [r["ymh"] for r in res.trace]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(ymh, ymh[1:]))


@pytest.mark.parametrize("desc", ["u1:1", "un:2:fund"])
def test_f20_and_f02_norms_agree(desc):
    rep = parse_representation(desc)
    r = ymh_total(random_smooth_pair(KaehlerTorus(4), rep, TwistData.from_planes(m01=1), seed=5, amplitude=0.5), CentralParameter.scalar(rep, 1.0))
    assert r.f20_norm2 > 0
    assert abs(r.f20_norm2 - r.f02_norm2) <= 1e-10 * max(1.0, r.f20_norm2)
