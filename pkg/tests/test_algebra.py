import numpy as np
import pytest

from vortexlab.algebra import (
    AdmissibilityError,
    CentralParameter,
    DimensionError,
    StructureGroup,
    admissibility_check,
    bound_violations,
    estimate_bound_constant,
    infinitesimal_action,
    moment_coeffs,
    parse_representation,
)


@pytest.mark.parametrize("desc,dim,gdim", [("u1:1", 1, 1), ("u1:3", 1, 1), ("un:2:fund", 2, 4), ("un:3:fund", 3, 9), ("un:2:sym2", 3, 4)])
def test_parse_dimensions(desc, dim, gdim):
    rep = parse_representation(desc)
    assert rep.dim == dim
    assert rep.group.dim == gdim


@pytest.mark.parametrize("bad", ["su3", "un:2:foo", "u1:x", "un:2"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse_representation(bad)


def test_group_exp_log_roundtrip():
    g = StructureGroup.un(3)
    rng = np.random.default_rng(0)
    c = 0.3 * rng.standard_normal((5, g.dim))
    u = g.exp(c)
    assert np.allclose(np.conj(np.swapaxes(u, -1, -2)) @ u, np.eye(3))
    assert np.allclose(g.log(u), c, atol=1e-12)


def test_moment_map_pairing():
    # <mu(phi), X> = <phi, rho(X) phi> up to the convention factor i
    rep = parse_representation("un:2:fund")
    rng = np.random.default_rng(1)
    phi = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    mu = moment_coeffs(rep, phi)
    for a in range(rep.group.dim):
        x = np.zeros(rep.group.dim)
        x[a] = 1.0
        lhs = rep.group.inner(mu, x)
        rhs = np.vdot(phi, infinitesimal_action(rep, x, phi))
        assert abs(abs(lhs) - abs(rhs)) < 1e-12


@pytest.mark.parametrize("desc,weight,norm_sq", [("u1:1", 3.0, 9.0), ("u1:2", 6.0, 9.0), ("un:2:fund", 3.0, 18.0)])
def test_centre_weight(desc, weight, norm_sq):
    tau = CentralParameter.scalar(parse_representation(desc), 3.0)
    assert tau.weight == pytest.approx(weight)
    assert tau.norm_sq == pytest.approx(norm_sq)


def test_admissibility():
    assert admissibility_check(parse_representation("u1:1")).passed
    assert admissibility_check(parse_representation("un:2:fund")).passed
    assert not admissibility_check(parse_representation("un:2:fund+un:2:triv")).passed


def test_bound_constant_fresh_samples():
    rep = parse_representation("un:2:fund")
    tau = CentralParameter.scalar(rep, -1.0)
    c = estimate_bound_constant(rep, tau, samples=10_000, seed=3)
    assert c > 0
    assert bound_violations(rep, tau, c, samples=10_000, seed=4) == 0


def test_bound_constant_absent_for_aligned_abelian_tau():
    rep = parse_representation("u1:1")
    with pytest.raises(AdmissibilityError):
        estimate_bound_constant(rep, CentralParameter.scalar(rep, 2.0), samples=10_000)


def test_central_parameter_dimension():
    rep = parse_representation("u1:1")
    with pytest.raises((DimensionError, ValueError)):
        CentralParameter(rep, (1.0, 2.0))
