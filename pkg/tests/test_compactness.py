import math

import numpy as np
import pytest

from vortexlab.algebra import CentralParameter, parse_representation
from vortexlab.compactness import (
    QUANTUM,
    SectorMismatchError,
    ball_masses,
    bubbling_family,
    cutoff_extend,
    cutoff_profile,
    density_measure,
    detect_concentration,
    dyadic_radii,
    mass_quantization,
    periodic_components,
    sequence_limit,
    smooth_step,
)
from vortexlab.fields import Pair, TwistData, constant_curvature_pair, random_smooth_pair
from vortexlab.lattice import KaehlerTorus


def test_quantum():
    assert QUANTUM == pytest.approx(8 * math.pi**2)


def test_mass_quantization():
    q = mass_quantization([QUANTUM * 1.01, 2 * QUANTUM, 1.5 * QUANTUM, 0.5 * QUANTUM - 1])
    assert [x.n for x in q[:2]] == [1, 2]
    assert not q[0].flagged and not q[1].flagged
    assert q[2].flagged and q[3].flagged


def test_periodic_components_wrap():
    mask = np.zeros((6, 6), bool)
    mask[0, 2] = mask[5, 2] = True
    mask[3, 3] = True
    comps = periodic_components(mask)
    assert sorted(int(c.sum()) for c in comps) == [1, 2]


def test_smooth_step_and_profile():
    s = np.linspace(-1, 2, 301)
    v = smooth_step(s)
    assert v[0] == 0.0 and v[-1] == 1.0
    assert np.all(np.diff(v) >= 0)
    assert smooth_step(0.5) == pytest.approx(0.5)
    assert cutoff_profile(1.0, 0.5) == 0.0 and cutoff_profile(1.5, 0.5) == 1.0


def test_ball_masses_of_uniform_density():
    torus = KaehlerTorus(8)
    rep = parse_representation("u1:1")
    m = density_measure(constant_curvature_pair(torus, rep, TwistData.from_planes(m01=1)), CentralParameter.scalar(rep, 0.0))
    masses, count = ball_masses(m, 2 * torus.h)
    dens = float(m.density.mean())
    assert np.allclose(masses, dens * count * torus.cell_volume)
    assert dyadic_radii(torus) == [0.25]


def test_detects_single_bump_on_small_lattice():
    torus = KaehlerTorus(16)
    rep = parse_representation("u1:1")
    tau = CentralParameter.scalar(rep, 0.0)
    seq = [density_measure(p, tau) for p in bubbling_family(torus, [((0.5,) * 4, 1)], widths=(0.2, 0.12, 0.08))]
    atoms = detect_concentration(seq, 1.0)
    assert len(atoms) == 1
    assert atoms[0].mass == pytest.approx(QUANTUM, rel=0.1)


def test_no_atoms_for_smooth_sequence():
    torus = KaehlerTorus(8)
    rep = parse_representation("u1:1")
    tau = CentralParameter.scalar(rep, 0.0)
    seq = [density_measure(random_smooth_pair(torus, rep, None, seed=s, amplitude=0.1), tau) for s in range(3)]
    assert detect_concentration(seq, 1.0) == []


def test_sector_mismatch():
    torus = KaehlerTorus(4)
    rep = parse_representation("u1:1")
    a = constant_curvature_pair(torus, rep, TwistData.from_planes(m01=1))
    b = constant_curvature_pair(torus, rep, TwistData.from_planes(m01=1, m23=1))
    with pytest.raises(SectorMismatchError):
        sequence_limit([a, b], CentralParameter.scalar(rep, 1.0))


def test_cutoff_requires_resolved_radius():
    N = 16
    rep = parse_representation("u1:1")
    torus = KaehlerTorus(N, 1.0, (N, N, 1, 1))
    p = Pair.zero(torus, rep, TwistData.from_planes(m01=1))
    with pytest.raises(ValueError):
        cutoff_extend(p, CentralParameter.scalar(rep, 1.0), (8.0, 8.0), 2 * torus.h)
    with pytest.raises(ValueError):
        cutoff_extend(Pair.zero(KaehlerTorus(8), rep), CentralParameter.scalar(rep, 1.0), (4.0, 4.0), 4 / 8)
