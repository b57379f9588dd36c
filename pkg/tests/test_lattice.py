import numpy as np
import pytest

from vortexlab.lattice import (
    KaehlerTorus,
    codifferential,
    contract,
    exterior_d,
    laplace_solve,
    laplacian,
    read_form,
    type_split,
    write_csv,
    write_form,
)


@pytest.fixture
def torus():
    return KaehlerTorus(6)


def rand_form(torus, k, seed=0, values=()):
    ncomp = {0: 1, 1: 4, 2: 6, 3: 4, 4: 1}[k]
    rng = np.random.default_rng(seed)
    return torus.form(k, rng.standard_normal((ncomp,) + torus.shape + tuple(values)))


def test_geometry():
    t = KaehlerTorus(8, 2.0)
    assert t.h == 0.25
    assert t.volume == pytest.approx(16.0)
    slab = KaehlerTorus(8, 1.0, (8, 8, 1, 1))
    assert slab.shape == (8, 8, 1, 1)
    assert slab.lengths == (1.0, 1.0, 0.125, 0.125)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_dd_zero(torus, k):
    assert exterior_d(exterior_d(rand_form(torus, k))).norm() < 1e-10


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_codifferential_is_adjoint(torus, k):
    f = rand_form(torus, k, 1)
    g = rand_form(torus, k + 1, 2)
    assert exterior_d(f).inner(g) == pytest.approx(f.inner(codifferential(g)), abs=1e-10)


def test_laplace_solve_inverts(torus):
    s = rand_form(torus, 0, 3)
    s = s - torus.scalar(np.full(torus.shape, s.data.mean()))
    assert (laplace_solve(laplacian(s)) - s).norm() < 1e-10


def test_laplace_solve_rejects_mean(torus):
    with pytest.raises(ValueError):
        laplace_solve(torus.scalar(np.ones(torus.shape)))


def test_type_split_reassembles(torus):
    F = rand_form(torus, 2, 4)
    f20, f11, f02, tr = type_split(F)
    assert np.allclose((f20 + f11 + f02).data, F.data)
    assert np.allclose(tr.data, contract(F).data)
    # dz1^dz2 is pure (2,0)
    u = np.array([0, 1, 1j, 1j, -1, 0])
    G = torus.form(2, u[:, None, None, None, None] * np.ones((6,) + torus.shape))
    assert type_split(G)[0].norm() == pytest.approx(G.norm())


def test_dump_roundtrip(tmp_path, torus):
    f = rand_form(torus, 1, 5, (4,))
    write_form(tmp_path / "f.vxlf", f)
    g = read_form(tmp_path / "f.vxlf")
    assert g.degree == 1 and g.torus == torus
    assert np.array_equal(f.data, g.data)
    c = torus.form(0, (rand_form(torus, 0, 6).data + 1j)[..., None])
    write_form(tmp_path / "c.vxlf", c)
    assert np.array_equal(read_form(tmp_path / "c.vxlf").data, c.data)


def test_csv(tmp_path):
    t = KaehlerTorus(2)
    write_csv(tmp_path / "d.csv", t.scalar(np.arange(16.0).reshape(t.shape)))
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "x0,x1,x2,x3,component,value"
    assert len(lines) == 17
