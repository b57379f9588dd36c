"""Pairs (A, phi), twisted backgrounds, gauge action, curvature and residuals.

Storage
-------
``A`` is a real array (4, n0, n1, n2, n3, dim_k) of algebra coefficients on
links and ``phi`` a complex array (n0, n1, n2, n3, dim_V) on sites.  The link
from x to x + e_mu carries the parallel transport

    U_mu(x) = B_mu(x) exp(h A_mu(x)),

where B is a fixed central background realising the twist.  Covariant
differences use these exponentiated links, so every gauge-invariant quantity
below is exactly invariant on the lattice.  Abelian curvature is the
noncompact F = F_bg + dA (exactly topological); nonabelian curvature is the
anti-Hermitian part of the plaquette.

Residual stencil
----------------
The three vortex equations are evaluated on a plaquette/hypercube-centred
stencil: dbar-phi per complex line on its own plaquette, and Lambda F, mu(phi)
and F^{2,0} averaged to the hypercube centre (with parallel transport in the
nonabelian case).  This stencil admits exact discrete solutions, which the
forward-difference stencil does not.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

import jax

jax.config.update("jax_enable_x64", True)
import jax.numpy as jnp  # noqa: E402

from .algebra import CentralParameter, Representation, expm_antiherm, logm_unitary  # noqa: E402
from .lattice import DIM, PLANES, DiscreteForm, KaehlerTorus  # noqa: E402

TWO_PI = 2.0 * math.pi

# complementary plane pairs with the sign of the permutation (mu nu rho sigma)
_CUP_TERMS = ((0, 5, 1.0), (5, 0, 1.0), (1, 4, -1.0), (4, 1, -1.0), (2, 3, 1.0), (3, 2, 1.0))
# hypercube averaging axes for each 2-form component (the complementary axes)
_COMPLEMENT = {0: (2, 3), 1: (1, 3), 2: (1, 2), 3: (0, 3), 4: (0, 2), 5: (0, 1)}
_COMPLEX_LINES = ((0, 1), (2, 3))


# ---------------------------------------------------------------------------
# twist data


@dataclass(frozen=True)
class TwistData:
    """Integer antisymmetric flux matrix m; the U(1)-factor flux through face (mu,nu) is -2 pi m."""

    m: tuple = ((0,) * 4,) * 4

    def __post_init__(self):
        arr = np.asarray(self.m, dtype=np.int64)
        if arr.shape != (4, 4) or np.any(arr != -arr.T):
            raise ValueError("twist must be an antisymmetric 4x4 integer matrix")
        object.__setattr__(self, "m", tuple(tuple(int(v) for v in row) for row in arr))

    @classmethod
    def from_planes(cls, **entries) -> "TwistData":
        """TwistData.from_planes(m01=1, m23=2); keys name 0-based coordinate planes."""
        arr = np.zeros((4, 4), np.int64)
        for key, val in entries.items():
            mu, nu = int(key[1]), int(key[2])
            arr[mu, nu], arr[nu, mu] = val, -val
        return cls(tuple(map(tuple, arr)))

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.m, dtype=np.int64)

    @property
    def trivial(self) -> bool:
        return not np.any(self.matrix)

    def plane_values(self) -> np.ndarray:
        return np.array([self.m[mu][nu] for mu, nu in PLANES], float)

    def flux(self, torus: KaehlerTorus) -> np.ndarray:
        """Constant background field strength f_p per plane (F_bg = i f_p 1_n)."""
        lengths = torus.lengths
        return np.array([-TWO_PI * self.m[mu][nu] / (lengths[mu] * lengths[nu]) for mu, nu in PLANES])

    def chern_numbers(self, rank: int = 1) -> np.ndarray:
        """First Chern numbers per face of the determinant bundle."""
        return rank * self.plane_values()

    def background_angles(self, torus: KaehlerTorus) -> np.ndarray:
        """Link angles theta_mu(x) with uniform plaquette phase h^2 f_p (mod 2 pi)."""
        ext = torus.shape
        idx = np.meshgrid(*[np.arange(n, dtype=float) for n in ext], indexing="ij")
        theta = np.zeros((DIM,) + ext)
        for p, (mu, nu) in enumerate(PLANES):
            mval = self.m[mu][nu]
            if mval == 0:
                continue
            phi_p = -TWO_PI * mval / (ext[mu] * ext[nu])
            theta[nu] += phi_p * idx[mu]
            last = idx[mu] == ext[mu] - 1
            theta[mu] -= np.where(last, phi_p * ext[mu] * idx[nu], 0.0)
        return theta


# ---------------------------------------------------------------------------
# the lattice model (jax kernels)


def _S(x, mu):
    """Value at x + e_mu."""
    return jnp.roll(x, -1, axis=mu)


def _mv(m, v):
    return jnp.einsum("...ij,...j->...i", m, v)


def _real_combo(c, basis):
    """sum_a c_a basis_a for real c, built from real parts to keep gradients real."""
    re = jnp.tensordot(c, basis.real, axes=([-1], [0]))
    im = jnp.tensordot(c, basis.imag, axes=([-1], [0]))
    return jax.lax.complex(re, im)


def _dag(m):
    return jnp.conj(jnp.swapaxes(m, -1, -2))


class LatticeModel:
    """Compiled lattice functionals for one (torus, representation, twist)."""

    def __init__(self, torus: KaehlerTorus, rep: Representation, twist: TwistData):
        self.torus, self.rep, self.twist = torus, rep, twist
        g = rep.group
        self.h = torus.h
        self.abelian = g.abelian
        self.dimk, self.V, self.n = g.dim, rep.dim, g.n
        self.fbg = twist.flux(torus)
        self.cbg = np.asarray(g.center[0], float)
        theta = twist.background_angles(torus)
        gens = np.asarray(rep.generators)
        if self.abelian:
            self.weights = np.diagonal(gens[0]).imag.copy()  # charges per component
            bg = self.weights if not twist.trivial else np.zeros(self.V)
            self.bg_phase = jnp.asarray(np.exp(1j * theta[..., None] * bg))  # (4, *S, V)
        else:
            if twist.trivial:
                k = 0.0
            else:
                k = rep.background_charge  # raises if the centre is not scalar on V
            self.bg_phase = jnp.asarray(np.exp(1j * k * theta))  # (4, *S)
        self.R = jnp.asarray(gens)
        self.T = jnp.asarray(g.basis)
        self.same_links = (not self.abelian) and gens.shape == g.basis.shape and np.allclose(gens, g.basis)
        self.cell = torus.cell_volume

        self.action = jax.jit(self._action)
        self.alternate = jax.jit(self._alternate)
        self.density = jax.jit(self._density)
        self.residual_fields = jax.jit(self._residual_fields)
        self.topology = jax.jit(self._topology)
        self.curvature = jax.jit(self._curvature_coeffs)
        self.covariant = jax.jit(self._covariant)
        self.action_grad = jax.jit(jax.value_and_grad(self._action_split, argnums=(0, 1, 2)))
        self.alternate_grad = jax.jit(jax.value_and_grad(self._alternate_split, argnums=(0, 1, 2)))

    # --- links -----------------------------------------------------------
    def _rep_links(self, A):
        h = self.h
        if self.abelian:
            arg = h * A[..., :1] * self.weights
            return self.bg_phase * jax.lax.complex(jnp.cos(arg), jnp.sin(arg))  # (4,*S,V) diagonal
        X = _real_combo(h * A, self.R)
        U = jax.scipy.linalg.expm(X.reshape((-1, self.V, self.V))).reshape(X.shape)
        return U * self.bg_phase[..., None, None]

    def _group_links(self, A, Urep=None):
        if self.same_links and Urep is not None and self.twist.trivial:
            return Urep
        X = _real_combo(self.h * A, self.T)
        return jax.scipy.linalg.expm(X.reshape((-1, self.n, self.n))).reshape(X.shape)

    def _transport_mv(self, U, v):
        return U * v if self.abelian else _mv(U, v)

    # --- algebra helpers -------------------------------------------------
    def _to_coeffs(self, X):
        return jnp.einsum("aij,...ij->...a", jnp.conj(self.T), X).real

    def _to_mat(self, c):
        return _real_combo(c, self.T)

    def _moment(self, phi):
        return jnp.einsum("...i,aij,...j->...a", jnp.conj(phi), self.R, phi).imag

    # --- curvature -------------------------------------------------------
    def _plaquette_matrices(self, Ug):
        """Anti-Hermitian plaquette parts (P - P^dagger)/(2h^2) per plane, without background."""
        out = []
        for mu, nu in PLANES:
            P = Ug[mu] @ _S(Ug[nu], mu) @ _dag(_S(Ug[mu], nu)) @ _dag(Ug[nu])
            out.append((P - _dag(P)) / (2.0 * self.h**2))
        return out

    def _curvature_coeffs(self, A):
        """(6, *S, dim_k) coefficients of F including the background."""
        h = self.h
        if self.abelian:
            F = [(_S(A[nu], mu) - A[nu] - _S(A[mu], nu) + A[mu]) / h for mu, nu in PLANES]
        else:
            F = [self._to_coeffs(X) for X in self._plaquette_matrices(self._group_links(A))]
        return jnp.stack([F[p] + self.fbg[p] * self.cbg for p in range(6)])

    # --- covariant derivative ------------------------------------------
    def _covariant(self, A, phi):
        U = self._rep_links(A)
        return jnp.stack([(self._transport_mv(U[mu], _S(phi, mu)) - phi) / self.h for mu in range(DIM)])

    # --- action density ---------------------------------------------------
    def _density(self, A, phi, tau):
        F = self._curvature_coeffs(A)
        D = self._covariant(A, phi)
        mu = self._moment(phi)
        return (
            jnp.sum(F**2, axis=(0, -1))
            + jnp.sum((mu - tau) ** 2, axis=-1)
            + 2.0 * jnp.sum(jnp.abs(D) ** 2, axis=(0, -1))
        )

    def _action(self, A, phi, tau):
        return self.cell * jnp.sum(self._density(A, phi, tau))

    def _action_split(self, A, pr, pi, tau):
        return self._action(A, pr + 1j * pi, tau)

    # --- residual stencil ------------------------------------------------
    def _avg(self, Y, axes, Ug):
        for a in sorted(axes, reverse=True):
            if self.abelian:
                Y = 0.5 * (Y + _S(Y, a))
            else:
                Y = 0.5 * (Y + Ug[a] @ _S(Y, a) @ _dag(Ug[a]))
        return Y

    def _residual_fields(self, A, phi, tau):
        """r1 (coeffs), c20 (complex coeffs of F^{2,0}), dbar coefficients (2, *S, V)."""
        h = self.h
        U = self._rep_links(A)
        dbar = []
        for j, k in _COMPLEX_LINES:
            pj, pk = _S(phi, j), _S(phi, k)
            pjk = _S(pj, k)
            if self.abelian:
                t11 = 0.5 * (U[j] * _S(U[k], j) + U[k] * _S(U[j], k))
            else:
                t11 = 0.5 * (U[j] @ _S(U[k], j) + U[k] @ _S(U[j], k))
            p10 = self._transport_mv(U[j], pj)
            p01 = self._transport_mv(U[k], pk)
            p11 = self._transport_mv(t11, pjk)
            Dj = 0.5 * ((p10 - phi) + (p11 - p01)) / h
            Dk = 0.5 * ((p01 - phi) + (p11 - p10)) / h
            dbar.append(0.5 * (Dj + 1j * Dk))
        mu = self._moment(phi)
        if self.abelian:
            F = self._curvature_coeffs(A)
            Fc = [self._avg(F[p], _COMPLEMENT[p], None) for p in range(6)]
            mu_c = self._avg(mu, (0, 1, 2, 3), None)
            r1 = Fc[0] + Fc[5] - mu_c + tau
        else:
            Ug = self._group_links(A, U)
            X = self._plaquette_matrices(Ug)
            Fc = [self._to_coeffs(self._avg(X[p], _COMPLEMENT[p], Ug)) + self.fbg[p] * self.cbg for p in range(6)]
            mu_c = self._to_coeffs(self._avg(self._to_mat(mu), (0, 1, 2, 3), Ug))
            r1 = Fc[0] + Fc[5] - mu_c + tau
        c20 = (Fc[1] - 1j * Fc[2] - 1j * Fc[3] - Fc[4]) / 4.0
        return r1, c20, jnp.stack(dbar)

    def _alt_density(self, A, phi, tau):
        r1, c20, dbar = self._residual_fields(A, phi, tau)
        return (
            jnp.sum(r1**2, axis=-1)
            + 16.0 * jnp.sum(jnp.abs(c20) ** 2, axis=-1)
            + 8.0 * jnp.sum(jnp.abs(dbar) ** 2, axis=(0, -1))
        )

    def _alternate(self, A, phi, tau):
        return self.cell * jnp.sum(self._alt_density(A, phi, tau))

    def _alternate_split(self, A, pr, pi, tau):
        return self._alternate(A, pr + 1j * pi, tau)

    # --- Chern-Weil --------------------------------------------------------
    def _topology(self, A, tau):
        """(deg_tau, Ch2) as lattice sums (exactly topological in the abelian case)."""
        F = self._curvature_coeffs(A)
        lam = F[0] + F[5]
        deg = -self.cell * jnp.sum(lam * tau) / TWO_PI
        if self.abelian:
            dens = 0.0
            for p, q, sgn in _CUP_TERMS:
                mu, nu = PLANES[p]
                dens = dens + sgn * jnp.sum(F[p] * _S(_S(F[q], mu), nu), axis=-1)
        else:
            Ug = self._group_links(A)
            X = [self._to_mat(F[p]) for p in range(6)]
            dens = 0.0
            for p, q, sgn in _CUP_TERMS:
                mu, nu = PLANES[p]
                W = Ug[mu] @ _S(Ug[nu], mu)
                Y = W @ _S(_S(X[q], mu), nu) @ _dag(W)
                dens = dens + sgn * (-jnp.einsum("...ij,...ji->...", X[p], Y).real)
        ch2 = self.cell * jnp.sum(dens) / (8.0 * math.pi**2)
        return deg, ch2


_MODELS: dict = {}


def get_model(torus: KaehlerTorus, rep: Representation, twist: TwistData) -> LatticeModel:
    key = (torus, rep.descriptor, id(rep), twist)
    model = _MODELS.get(key)
    if model is None:
        model = _MODELS[key] = LatticeModel(torus, rep, twist)
    return model


# ---------------------------------------------------------------------------
# public types


@dataclass(frozen=True, eq=False)
class Pair:
    """Connection coefficients on links and a section on sites."""

    torus: KaehlerTorus
    rep: Representation
    A: np.ndarray
    phi: np.ndarray
    twist: TwistData = field(default_factory=TwistData)

    def __post_init__(self):
        A = np.asarray(self.A, float)
        phi = np.asarray(self.phi, complex)
        if A.shape != (DIM,) + self.torus.shape + (self.rep.group.dim,):
            raise ValueError(f"A has shape {A.shape}")
        if phi.shape != self.torus.shape + (self.rep.dim,):
            raise ValueError(f"phi has shape {phi.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def zero(cls, torus, rep, twist=None) -> "Pair":
        twist = twist or TwistData()
        return cls(
            torus,
            rep,
            np.zeros((DIM,) + torus.shape + (rep.group.dim,)),
            np.zeros(torus.shape + (rep.dim,), complex),
            twist,
        )

    def replace(self, A=None, phi=None) -> "Pair":
        return Pair(self.torus, self.rep, self.A if A is None else A, self.phi if phi is None else phi, self.twist)

    @property
    def model(self) -> LatticeModel:
        return get_model(self.torus, self.rep, self.twist)

    @property
    def A_form(self) -> DiscreteForm:
        return DiscreteForm(self.torus, 1, self.A)

    @property
    def phi_form(self) -> DiscreteForm:
        return DiscreteForm(self.torus, 0, self.phi[None])

    def A_matrices(self) -> np.ndarray:
        """Anti-Hermitian link matrices (4, *S, n, n)."""
        return self.rep.group.to_matrix(self.A)


@dataclass(frozen=True, eq=False)
class GaugeTransformation:
    """Unitary group element per site; abelian ones may keep a real lift chi (s = e^{i chi})."""

    values: np.ndarray
    generator: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, complex)
        err = np.abs(v @ np.conj(np.swapaxes(v, -1, -2)) - np.eye(v.shape[-1])).max()
        if err > 1e-12:
            raise ValueError(f"gauge transformation not unitary (error {err:.2e})")
        object.__setattr__(self, "values", v)

    @classmethod
    def identity(cls, torus: KaehlerTorus, n: int) -> "GaugeTransformation":
        vals = np.broadcast_to(np.eye(n, dtype=complex), torus.shape + (n, n)).copy()
        gen = np.zeros(torus.shape + (n * n,)) if n == 1 else None
        return cls(vals, gen)

    @classmethod
    def from_generator(cls, group, chi) -> "GaugeTransformation":
        """s = exp(chi) for algebra coefficients chi (*S, dim_k)."""
        chi = np.asarray(chi, float)
        vals = group.exp(chi)
        return cls(vals, chi if group.abelian else None)

    @classmethod
    def random(cls, torus, group, rng, scale=1.0) -> "GaugeTransformation":
        chi = scale * rng.standard_normal(torus.shape + (group.dim,))
        return cls.from_generator(group, chi)

    def __matmul__(self, other: "GaugeTransformation") -> "GaugeTransformation":
        gen = None
        if self.generator is not None and other.generator is not None:
            gen = self.generator + other.generator
        return GaugeTransformation(self.values @ other.values, gen)

    def inverse(self) -> "GaugeTransformation":
        gen = None if self.generator is None else -self.generator
        return GaugeTransformation(np.conj(np.swapaxes(self.values, -1, -2)), gen)


def gauge_act(s: GaugeTransformation, pair: Pair) -> Pair:
    """s(A, phi): links U -> s(x)^-1 U s(x+mu), phi -> rho(s)^-1 phi."""
    group = pair.rep.group
    h = pair.torus.h
    if group.abelian:
        chi = s.generator[..., 0] if s.generator is not None else np.angle(s.values[..., 0, 0])
        A = pair.A.copy()
        for mu in range(DIM):
            A[mu, ..., 0] += (np.roll(chi, -1, axis=mu) - chi) / h
    else:
        g = s.values
        gi = np.conj(np.swapaxes(g, -1, -2))
        U = expm_antiherm(h * pair.A_matrices())
        A = np.empty_like(pair.A)
        for mu in range(DIM):
            Um = gi @ U[mu] @ np.roll(g, -1, axis=mu)
            A[mu] = group.from_matrix(logm_unitary(Um)) / h
    rinv = pair.rep.rho(np.conj(np.swapaxes(s.values, -1, -2)))
    phi = np.einsum("...ij,...j->...i", rinv, pair.phi)
    return pair.replace(A=A, phi=phi)


def curvature(pair: Pair) -> DiscreteForm:
    """Algebra-valued curvature 2-form (coefficients), background included."""
    return DiscreteForm(pair.torus, 2, np.asarray(pair.model.curvature(pair.A)))


def covariant_derivative(pair: Pair) -> DiscreteForm:
    """D_mu phi = (U_mu(x) phi(x+mu) - phi(x))/h as a V-valued 1-form."""
    return DiscreteForm(pair.torus, 1, np.asarray(pair.model.covariant(pair.A, pair.phi)))


def dbar_part(pair: Pair) -> np.ndarray:
    """Coefficients c_k of dbar phi = sum_k c_k dzbar_k, shape (2, *S, V), plaquette-centred."""
    tau = np.zeros(pair.rep.group.dim)
    return np.asarray(pair.model.residual_fields(pair.A, pair.phi, tau)[2])


@dataclass
class Residuals:
    """Residual fields of the three vortex equations and their L^2 norms."""

    r1: np.ndarray
    f20: np.ndarray
    f02: np.ndarray
    dbar: np.ndarray
    norm_r1: float
    norm_r2: float
    norm_r3: float
    norm_f20: float
    norm_f02: float

    @property
    def max_norm(self) -> float:
        return max(self.norm_r1, self.norm_r2, self.norm_r3)

    def is_vortex(self, eps: float = 1e-6) -> bool:
        return self.max_norm < eps

    def as_dict(self) -> dict:
        return {"r1": self.norm_r1, "r2": self.norm_r2, "r3": self.norm_r3}


def vortex_residuals(pair: Pair, tau: CentralParameter) -> Residuals:
    """r1 = Lambda F - mu(phi) + tau, r2 = (F^{2,0}, F^{0,2}), r3 = dbar_A phi."""
    r1, c20, dbar = (np.asarray(x) for x in pair.model.residual_fields(pair.A, pair.phi, tau.coeffs))
    c02 = np.conj(c20)  # real curvature coefficients: the (0,2) part is the conjugate
    cell = pair.torus.cell_volume
    n_r1 = math.sqrt(cell * float(np.sum(r1**2)))
    n20 = math.sqrt(cell * 4.0 * float(np.sum(np.abs(c20) ** 2)))
    n02 = math.sqrt(cell * 4.0 * float(np.sum(np.abs(c02) ** 2)))
    n_r3 = math.sqrt(cell * 2.0 * float(np.sum(np.abs(dbar) ** 2)))
    return Residuals(r1, c20, c02, dbar, n_r1, math.hypot(n20, n02), n_r3, n20, n02)


def ymh_density(pair: Pair, tau: CentralParameter) -> np.ndarray:
    """Pointwise action integrand |F|^2 + |mu - tau|^2 + 2|D phi|^2 at each site."""
    return np.asarray(pair.model.density(pair.A, pair.phi, tau.coeffs))


def constant_curvature_pair(torus, rep, twist) -> Pair:
    """The twisted background with A = 0 and phi = 0 (constant curvature F_bg)."""
    return Pair.zero(torus, rep, twist)


def band_limited(torus: KaehlerTorus, values: tuple, kmax: int, rng, offset=None) -> np.ndarray:
    """Real random trigonometric polynomial of degree kmax per axis, sampled on sites.

    The coefficients depend only on the generator state, so the same continuum
    field is obtained on every resolution.  ``offset`` (4,) shifts the sample
    points in units of h, e.g. to link midpoints.
    """
    ks = np.array(list(itertools.product(range(-kmax, kmax + 1), repeat=DIM)))
    nv = int(np.prod(values, dtype=int))
    coef = rng.standard_normal((len(ks), nv)) + 1j * rng.standard_normal((len(ks), nv))
    coef /= (1.0 + np.sum(ks**2, axis=1))[:, None]
    off = np.zeros(DIM) if offset is None else np.asarray(offset, float)
    m = 2 * kmax + 1
    # separable phases exp(2 pi i k x / L) per axis, contracted with the coefficient tensor
    E = [
        np.exp(2j * np.pi * np.outer(np.arange(-kmax, kmax + 1), (np.arange(n) + o) * torus.h) / torus.L)
        for n, o in zip(torus.shape, off)
    ]
    C = coef.reshape((m,) * DIM + (nv,))
    out = np.einsum("abcdv,ai,bj,ck,dl->ijklv", C, *E, optimize=True).real
    return out.reshape(torus.shape + tuple(values))


def random_smooth_pair(torus, rep, twist=None, kmax=1, seed=0, amplitude=1.0, phi_amplitude=None) -> Pair:
    """Band-limited pair: A sampled at link midpoints, phi at sites."""
    rng = np.random.default_rng(seed)
    k = rep.group.dim
    A = np.stack(
        [band_limited(torus, (k,), kmax, rng, offset=np.eye(DIM)[mu] / 2) for mu in range(DIM)]
    )
    re = band_limited(torus, (rep.dim,), kmax, rng)
    im = band_limited(torus, (rep.dim,), kmax, rng)
    pa = amplitude if phi_amplitude is None else phi_amplitude
    return Pair(torus, rep, amplitude * A, pa * (re + 1j * im), twist or TwistData())
