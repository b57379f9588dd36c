"""Discrete Sobolev norms, sampled embedding/multiplication constants and the
identities and bounds satisfied by the section at a vortex."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .algebra import CentralParameter, estimate_bound_constant
from .energy import degree_tau
from .fields import Pair, vortex_residuals
from .lattice import DIM, DiscreteForm, KaehlerTorus

MAX_ORDER = 3


class HypothesisError(ValueError):
    """The requested inclusion or product violates the Sobolev weight conditions."""


class NotAVortexError(ValueError):
    """An identity that only holds at solutions was asked of a non-solution."""


@dataclass(frozen=True)
class SobolevIndex:
    """L^p_k on a manifold of dimension n."""

    k: int
    p: float
    n: int = DIM

    def __post_init__(self):
        if self.k < 0 or self.p < 1:
            raise ValueError("need k >= 0 and p >= 1")

    @property
    def weight(self) -> float:
        return self.k - self.n / self.p

    def __str__(self):
        return f"L^{self.p:g}_{self.k}"


def multi_indices(k: int, dim: int = DIM):
    """All multi-indices alpha with |alpha| <= k, as tuples of axis repeats."""
    out = []
    for order in range(k + 1):
        out.extend(itertools.combinations_with_replacement(range(dim), order))
    return out


def _derivative(x, axes, h, offset=0):
    for mu in axes:
        x = (np.roll(x, -1, axis=mu + offset) - x) / h
    return x


def _norm_p(values, p, cell, region=None, batch=False):
    """(h^4 sum |v|^p)^(1/p); values (..., *S) with pointwise magnitudes already taken."""
    if region is not None:
        values = values[..., region] if batch else values[region]
    axes = tuple(range(1, values.ndim)) if batch else None
    return (np.sum(values**p, axis=axes) * cell) ** (1.0 / p)


def sobolev_norm(f, idx: SobolevIndex, torus: KaehlerTorus | None = None, region=None) -> float:
    """(sum_{|alpha| <= k} ||D^alpha f||_p^p)^{1/p} with forward differences.

    ``f`` is a DiscreteForm (all components enter the pointwise magnitude) or
    a site array with ``torus`` given.  ``region`` restricts the sum to a
    boolean site mask; differences still read neighbours outside it.
    """
    if idx.k > MAX_ORDER:
        raise ValueError(f"order {idx.k} exceeds the stencil budget {MAX_ORDER}")
    if isinstance(f, DiscreteForm):
        torus = f.torus
        data = np.moveaxis(f.data, 0, -1)
    else:
        data = np.asarray(f)
    if torus is None:
        raise ValueError("torus required for raw arrays")
    data = data.reshape(torus.shape + (-1,))
    total = 0.0
    for alpha in multi_indices(idx.k):
        d = _derivative(data, alpha, torus.h)
        mag = np.sqrt(np.sum(np.abs(d) ** 2, axis=-1))
        total += _norm_p(mag, idx.p, torus.cell_volume, region) ** idx.p
    return float(total ** (1.0 / idx.p))


def _batch_norms(F, idx: SobolevIndex, h, cell):
    """Norms of a batch of real scalar fields F (B, *S)."""
    total = np.zeros(F.shape[0])
    for alpha in multi_indices(idx.k):
        d = np.abs(_derivative(F, alpha, h, offset=1))
        total += _norm_p(d, idx.p, cell, batch=True) ** idx.p
    return total ** (1.0 / idx.p)


def band_limited_batch(rng, count: int, torus: KaehlerTorus, kmax: int = 2) -> np.ndarray:
    """Random real trigonometric polynomials (count, *S), |k_i| <= kmax.

    Each sample draws its own spectral slope and constant offset so the
    ensemble spans smooth, oscillating and nearly constant fields.
    """
    shape = torus.shape
    freqs = np.meshgrid(*[np.fft.fftfreq(n, 1.0 / n) for n in shape], indexing="ij")
    inside = np.all([np.abs(k) <= kmax for k in freqs], axis=0)
    ksq = sum(k**2 for k in freqs)
    out = np.empty((count,) + shape)
    for b in range(count):
        slope = rng.uniform(0.0, 3.0)
        spec = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        spec *= inside / (1.0 + ksq) ** (slope / 2)
        f = np.fft.ifftn(spec).real
        f /= max(np.abs(f).max(), 1e-300)
        f += rng.standard_normal() * rng.uniform(0.0, 2.0)
        out[b] = f
    return out


@dataclass
class SamplingReport:
    source: str
    target: str
    estimated_sup: float
    constant: float
    violations: int
    trials: int
    fresh_sup: float
    seeds: tuple

    def as_dict(self) -> dict:
        return asdict(self)


def check_embedding_hypothesis(src: SobolevIndex, dst: SobolevIndex):
    if dst.k > src.k or dst.weight > src.weight + 1e-12:
        raise HypothesisError(f"{src} -> {dst} violates j <= k, w(q,j) <= w(p,k)")


def check_multiplication_hypothesis(a: SobolevIndex, b: SobolevIndex, out: SobolevIndex):
    if out.k > min(a.k, b.k):
        raise HypothesisError("need i <= min(k, j)")
    if out.weight > min(a.weight, b.weight) + 1e-12:
        raise HypothesisError("need w(r,i) <= min(w(p,k), w(q,j))")
    if out.weight > a.weight + b.weight + 1e-12:
        raise HypothesisError("need w(r,i) <= w(p,k) + w(q,j)")


def embedding_check(
    src: SobolevIndex,
    dst: SobolevIndex,
    trials: int = 1000,
    seeds=(1, 2),
    torus: KaehlerTorus | None = None,
    kmax: int = 2,
    safety: float = 1.25,
) -> SamplingReport:
    """Estimate sup ||f||_dst / ||f||_src on seed s1, count violations of
    ``safety`` times it on fresh seed s2."""
    check_embedding_hypothesis(src, dst)
    torus = torus or KaehlerTorus(8)
    h, cell = torus.h, torus.cell_volume

    def ratios(seed):
        F = band_limited_batch(np.random.default_rng(seed), trials, torus, kmax)
        return _batch_norms(F, dst, h, cell) / _batch_norms(F, src, h, cell)

    est = float(np.max(ratios(seeds[0])))
    fresh = ratios(seeds[1])
    c = safety * est
    return SamplingReport(str(src), str(dst), est, c, int(np.sum(fresh > c)), trials, float(fresh.max()), tuple(seeds))


def multiplication_check(
    a: SobolevIndex,
    b: SobolevIndex,
    out: SobolevIndex,
    trials: int = 1000,
    seeds=(1, 2),
    torus: KaehlerTorus | None = None,
    kmax: int = 2,
    safety: float = 1.25,
) -> SamplingReport:
    """As embedding_check for ||f g||_out <= C ||f||_a ||g||_b."""
    check_multiplication_hypothesis(a, b, out)
    torus = torus or KaehlerTorus(8)
    h, cell = torus.h, torus.cell_volume

    def ratios(seed):
        rng = np.random.default_rng(seed)
        F = band_limited_batch(rng, trials, torus, kmax)
        G = band_limited_batch(rng, trials, torus, kmax)
        num = _batch_norms(F * G, out, h, cell)
        return num / (_batch_norms(F, a, h, cell) * _batch_norms(G, b, h, cell))

    est = float(np.max(ratios(seeds[0])))
    fresh = ratios(seeds[1])
    c = safety * est
    return SamplingReport(
        f"{a} x {b}", str(out), est, c, int(np.sum(fresh > c)), trials, float(fresh.max()), tuple(seeds)
    )


# ---------------------------------------------------------------------------
# bounds on the section


def _require_vortex(pair, tau, eps):
    res = vortex_residuals(pair, tau)
    if not res.is_vortex(eps):
        raise NotAVortexError(f"residual {res.max_norm:.3e} exceeds {eps:g}; identity holds only at vortices")
    return res


@dataclass
class IdentityReport:
    lhs: float
    rhs: float
    gap: float
    lam: float
    degree: float
    restriction_only: bool

    def as_dict(self) -> dict:
        return asdict(self)


def _identity_lhs(pair, tau, xi=None):
    group = pair.rep.group
    xv = np.atleast_1d(np.asarray([1.0] if xi is None else xi, float))
    xi_c = CentralParameter(pair.rep, tuple(xv))
    deg = degree_tau(pair, xi_c)
    lhs = -2.0 * math.pi * deg + float(group.inner(tau.coeffs, xi_c.coeffs)) * pair.torus.volume
    return lhs, xi_c.weight, deg


def existence_threshold(pair: Pair, tau: CentralParameter, xi=None) -> float:
    """(-2 pi deg_xi + <tau, xi> vol) / lambda(xi): the value ||phi||^2 must take at a vortex.

    Depends only on the bundle.  A value <= 0 leaves only phi = 0, which is a
    vortex only when it vanishes exactly.
    """
    lhs, lam, _ = _identity_lhs(pair, tau, xi)
    return lhs / lam if abs(lam) > 1e-14 else lhs


def phi_l2_identity(pair: Pair, tau: CentralParameter, xi=None, eps: float = 1e-6) -> IdentityReport:
    """lhs = -2 pi deg_xi + <tau, xi> vol(X) against rhs = lambda(xi) ||phi||^2.

    ``xi`` is a centre element given by centre coordinates (default: the
    first centre basis vector).  With lambda(xi) = 0 only the linear
    restriction lhs = 0 is checked.
    """
    _require_vortex(pair, tau, eps)
    lhs, lam, deg = _identity_lhs(pair, tau, xi)
    phi2 = pair.torus.integrate(np.sum(np.abs(pair.phi) ** 2, axis=-1))
    if abs(lam) < 1e-14:
        return IdentityReport(lhs, 0.0, abs(lhs), lam, deg, True)
    rhs = lam * phi2
    scale = max(abs(lhs), abs(rhs))
    gap = abs(lhs - rhs) / scale if scale > 1e-12 else abs(lhs - rhs)
    return IdentityReport(lhs, rhs, gap, lam, deg, False)


@dataclass
class PointwiseReport:
    max_phi2: float
    bound: float
    lam: float
    margin: float
    holds: bool
    kind: str

    def as_dict(self) -> dict:
        return asdict(self)


def phi_pointwise_bound_check(
    pair: Pair,
    tau: CentralParameter,
    eps: float = 1e-6,
    slack: float = 0.01,
    c_hat: float | None = None,
    require_vortex: bool = True,
) -> PointwiseReport:
    """max |phi|^2 against |tau|^2/lambda(tau) (lambda > 0) or C max(|tau|, 1 - lambda)."""
    if require_vortex:
        _require_vortex(pair, tau, eps)
    lam = tau.weight
    m = float(np.max(np.sum(np.abs(pair.phi) ** 2, axis=-1)))
    if lam > 0:
        bound = tau.norm_sq / lam
        kind = "maximum principle"
    else:
        c = c_hat if c_hat is not None else estimate_bound_constant(pair.rep, tau)
        bound = c * max(math.sqrt(tau.norm_sq), 1.0 - lam)
        kind = "moment bound"
    limit = bound * (1.0 + slack)
    return PointwiseReport(m, bound, lam, limit - m, m <= limit, kind)


# ---------------------------------------------------------------------------
# interior regularity


def box_mask(torus: KaehlerTorus, box) -> np.ndarray:
    """Boolean mask for a box given as ((start, stop),) * 4 in site indices."""
    mask = np.zeros(torus.shape, bool)
    mask[tuple(slice(a, b) for a, b in box)] = True
    return mask


def _compactly_contained(inner, outer, margin) -> bool:
    return all(oa + margin <= ia and ib + margin <= ob for (ia, ib), (oa, ob) in zip(inner, outer))


@dataclass
class RegularityReport:
    lhs: float
    rhs: float
    ratio: float
    order: int
    contained: bool

    def as_dict(self) -> dict:
        return asdict(self)


def interior_regularity_probe(pair: Pair, U, V, p: int = 2) -> RegularityReport:
    """||A||_{L^2_p(V)} + ||phi||_{L^2_p(V)} over ||A||_{L^2_1(U)} + ||phi||_{L^4(U)} + vol(U).

    U and V are boxes of site indices; V should sit inside U with at least p
    sites to spare so the difference stencils on V stay within U.
    """
    if p > MAX_ORDER:
        raise ValueError(f"order {p} exceeds the stencil budget {MAX_ORDER}")
    torus = pair.torus
    contained = _compactly_contained(V, U, p)
    if not contained:
        warnings.warn("V is not compactly contained in U")
    mu_ = box_mask(torus, U)
    mv = box_mask(torus, V)
    A = pair.A_form
    phi = pair.phi_form
    lhs = sobolev_norm(A, SobolevIndex(p, 2), region=mv) + sobolev_norm(phi, SobolevIndex(p, 2), region=mv)
    vol_u = float(np.sum(mu_)) * torus.cell_volume
    rhs = sobolev_norm(A, SobolevIndex(1, 2), region=mu_) + sobolev_norm(phi, SobolevIndex(0, 4), region=mu_) + vol_u
    return RegularityReport(lhs, rhs, lhs / rhs, p, contained)
