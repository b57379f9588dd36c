"""Coulomb gauge fixing on the torus and the local energy bound.

The fixed field is d*A = 0 for the lattice codifferential of the link
coefficients.  Constant 1-forms are harmonic on the torus and untouched by
any gauge transformation; they are reported separately and excluded from the
ratio ||A||_{L^2_1} / ||F||.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebra import CentralParameter, StructureGroup, estimate_bound_constant, AdmissibilityError
from .analysis import SobolevIndex, sobolev_norm
from .fields import GaugeTransformation, Pair, band_limited, gauge_act, ymh_density
from .lattice import DIM, DiscreteForm, KaehlerTorus, codifferential, laplace_solve


class GaugeFixingError(RuntimeError):
    """Raised when the nonabelian iteration does not reach the tolerance."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass
class CoulombResult:
    gauge: GaugeTransformation
    pair: Pair
    divergence_norm: float
    ratio: float
    iterations: int
    history: list
    harmonic_norm: float

    @property
    def A(self) -> np.ndarray:
        return self.pair.A

    def as_dict(self) -> dict:
        return {
            "divergence_norm": self.divergence_norm,
            "ratio": self.ratio,
            "iterations": self.iterations,
            "harmonic_norm": self.harmonic_norm,
            "history": list(self.history),
        }


def divergence(pair: Pair) -> DiscreteForm:
    """d*A as a k-valued 0-form."""
    return codifferential(pair.A_form)


def _mask_sum(x, region):
    return float(np.sum(x if region is None else x[region]))


def sobolev1_norm(torus: KaehlerTorus, field, region=None) -> float:
    """L^2_1 norm of a field with leading component axis (ncomp, *S, ...)."""
    return sobolev_norm(np.moveaxis(np.asarray(field), 0, -1), SobolevIndex(1, 2), torus, region)


def fluctuation_curvature(pair: Pair) -> np.ndarray:
    """F_A minus the constant twist background."""
    F = np.asarray(pair.model.curvature(pair.A))
    bg = pair.twist.flux(pair.torus)
    center = pair.rep.group.center[0]
    return F - bg[:, None, None, None, None, None] * center


def _norm(torus, x, region=None) -> float:
    dens = np.sum(np.abs(x) ** 2, axis=(0, -1)) if x.ndim == DIM + 2 else np.abs(x) ** 2
    return math.sqrt(_mask_sum(dens, region) * torus.cell_volume)


def _ratio(pair: Pair):
    A = pair.A
    mean = A.mean(axis=tuple(range(1, DIM + 1)), keepdims=True)
    harm = math.sqrt(float(np.sum(np.broadcast_to(mean, A.shape) ** 2)) * pair.torus.cell_volume)
    fn = _norm(pair.torus, fluctuation_curvature(pair))
    osc = sobolev1_norm(pair.torus, A - mean)
    return (osc / fn if fn > 0 else (0.0 if osc == 0 else math.inf)), harm


def coulomb_gauge(pair: Pair, tol: float = 1e-10, max_iter: int = 100) -> CoulombResult:
    """Gauge-equivalent pair with ||d*A|| < tol.

    Abelian: one FFT Poisson solve, s = exp(i chi) with Delta chi = d*A.
    Nonabelian: iterate s_k = exp(chi_k), Delta chi_k = d*A_k and compose.
    """
    group = pair.rep.group
    torus = pair.torus
    s = GaugeTransformation.identity(torus, group.n)
    cur = pair
    div = divergence(cur)
    history = [div.norm()]
    it = 0
    while history[-1] >= tol:
        if it >= max_iter:
            ratio, harm = _ratio(cur)
            res = CoulombResult(s, cur, history[-1], ratio, it, history, harm)
            raise GaugeFixingError(
                f"Coulomb iteration stalled at ||d*A|| = {history[-1]:.3e} after {it} steps; curvature too large?",
                res,
            )
        # d*A has zero mean up to roundoff on the scale of A, not of d*A
        rhs = div.data - div.data.mean(axis=tuple(range(1, DIM + 1)), keepdims=True)
        chi = laplace_solve(DiscreteForm(torus, 0, rhs)).data[0]
        chi = chi - chi.mean(axis=tuple(range(DIM)))
        sk = GaugeTransformation.from_generator(group, chi)
        cur = gauge_act(sk, cur)
        s = s @ sk
        div = divergence(cur)
        it += 1
        history.append(div.norm())
        if not math.isfinite(history[-1]) or (it > 5 and history[-1] > 1e3 * history[0]):
            ratio, harm = _ratio(cur)
            res = CoulombResult(s, cur, history[-1], ratio, it, history, harm)
            raise GaugeFixingError("Coulomb iteration diverged; curvature too large", res)
    ratio, harm = _ratio(cur)
    return CoulombResult(s, cur, history[-1], ratio, it, history, harm)


def random_small_connection(torus: KaehlerTorus, group: StructureGroup, amplitude: float, seed: int, kmax: int = 1):
    """Band-limited zero-mean link coefficients of the given amplitude."""
    rng = np.random.default_rng(seed)
    A = np.stack([band_limited(torus, (group.dim,), kmax, rng) for _ in range(DIM)])
    A -= A.mean(axis=tuple(range(1, DIM + 1)), keepdims=True)
    return amplitude * A / max(np.abs(A).max(), 1e-300)


def estimate_coulomb_constant(
    torus: KaehlerTorus,
    rep,
    trials: int = 50,
    amplitude: float = 0.5,
    seed: int = 0,
    safety: float = 1.25,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> dict:
    """Empirical C with ||A~||_{L^2_1} <= C ||F|| over random small connections.

    Each trial applies a random gauge transformation to a small connection and
    fixes it back; the maximal ratio is inflated by ``safety``.
    """
    group = rep.group
    rng = np.random.default_rng(seed)
    ratios, iters = [], []
    for k in range(trials):
        A = random_small_connection(torus, group, amplitude, int(rng.integers(2**31)))
        p = Pair(torus, rep, A, np.zeros(torus.shape + (rep.dim,), complex))
        g = GaugeTransformation.random(torus, group, rng, scale=0.3)
        res = coulomb_gauge(gauge_act(g, p), tol=tol, max_iter=max_iter)
        ratios.append(res.ratio)
        iters.append(res.iterations)
    return {
        "constant": safety * max(ratios),
        "max_ratio": max(ratios),
        "ratios": ratios,
        "iterations": iters,
        "seed": seed,
    }


@dataclass
class LocalBoundReport:
    lhs: float
    connection_term: float
    section_term: float
    action: float
    envelope: float
    ratio: float
    coulomb_ok: bool
    divergence_norm: float
    violated: bool
    notes: list

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def local_energy_bound_check(
    pair: Pair,
    tau: CentralParameter,
    c_coulomb: float,
    c_bound: float | None = None,
    region=None,
    coulomb_tol: float = 1e-8,
    safety: float = 1.25,
) -> LocalBoundReport:
    """Compare ||A||_{L^2_1(U)} + ||phi||_{L^4(U)} with the estimated envelope.

    Envelope: C_g ||F_A||_{L^2(U)} + ||A_harm|| + (C_b ||mu - tau||_{L^2(U)})^{1/2},
    with C_g from Coulomb trials and C_b the pointwise constant of
    |phi|^2 <= C_b |mu(phi) - tau|.  When that constant does not exist (abelian
    with lambda(tau) > 0) the pointwise bound |phi|^2 <= |tau|^2 / lambda(tau)
    replaces it.  Both sides are also compared with the action on U.
    """
    torus = pair.torus
    notes = []
    div = divergence(pair).norm()
    ok = div < coulomb_tol
    if not ok:
        notes.append(f"precondition: not in Coulomb gauge (||d*A|| = {div:.3e})")
    A = pair.A
    mean = A.mean(axis=tuple(range(1, DIM + 1)), keepdims=True)
    a_term = sobolev1_norm(torus, A, region)
    phi4 = np.sum(np.abs(pair.phi) ** 2, axis=-1) ** 2
    p_term = (_mask_sum(phi4, region) * torus.cell_volume) ** 0.25
    action = _mask_sum(ymh_density(pair, tau), region) * torus.cell_volume
    vol = torus.volume if region is None else float(np.sum(region)) * torus.cell_volume
    harm = math.sqrt(float(np.sum(mean**2)) * vol)
    f_norm = _norm(torus, fluctuation_curvature(pair), region)
    mu = np.asarray(pair.model._moment(pair.phi))
    gram = pair.rep.group.gram
    d = mu - tau.coeffs
    m_norm = math.sqrt(_mask_sum(np.einsum("...a,ab,...b->...", d, gram, d), region) * torus.cell_volume)
    if c_bound is None:
        try:
            c_bound = estimate_bound_constant(pair.rep, tau)
        except AdmissibilityError:
            c_bound = None
    if c_bound is not None:
        phi_env = math.sqrt(c_bound * m_norm)
    else:
        lam = tau.weight
        if lam <= 0:
            phi_env = math.inf
            notes.append("no pointwise constant available")
        else:
            phi_env = math.sqrt(tau.norm_sq / lam) * vol**0.25
            notes.append("section term bounded by |tau|^2/lambda(tau)")
    envelope = c_coulomb * f_norm + harm + phi_env
    lhs = a_term + p_term
    ratio = lhs / envelope if envelope > 0 else (0.0 if lhs == 0 else math.inf)
    violated = (not ok) or lhs > safety * envelope
    return LocalBoundReport(lhs, a_term, p_term, action, envelope, ratio, ok, div, violated, notes)


__all__ = [
    "CoulombResult",
    "GaugeFixingError",
    "LocalBoundReport",
    "coulomb_gauge",
    "divergence",
    "estimate_coulomb_constant",
    "fluctuation_curvature",
    "local_energy_bound_check",
    "random_small_connection",
    "sobolev1_norm",
]
