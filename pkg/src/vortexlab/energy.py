"""YMH energy, its topological decomposition, gradients and the minimiser.

Sign conventions: deg_tau = -(1/2pi) int <Lambda F, tau> dvol, the geometric
degree for c1 = (i/2pi) F.  With it the alternate (residual) form satisfies

    alt = |F|^2 + |mu - tau|^2 + 2|D phi|^2 - 4 pi deg_tau + 8 pi^2 Ch2

in the continuum; on the lattice the difference is the decomposition defect.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

import jax
import jax.numpy as jnp

from .algebra import CentralParameter
from .fields import Pair, vortex_residuals

FOUR_PI = 4.0 * math.pi
EIGHT_PI2 = 8.0 * math.pi**2


class NonConvergenceError(RuntimeError):
    """Raised when the minimiser exhausts its iterations; carries the best iterate."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


class StepControllerError(RuntimeError):
    """Raised when backtracking cannot find a non-increasing step."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


@dataclass
class EnergyReport:
    total: float
    curvature_norm2: float
    moment_norm2: float
    derivative_term: float  # 2 |D phi|^2
    four_pi_deg: float
    eight_pi2_ch2: float
    alternate: float
    defect: float
    deg_tau: float
    ch2: float
    f20_norm2: float
    f02_norm2: float

    @property
    def topological_bound(self) -> float:
        """4 pi deg_tau - 8 pi^2 Ch2: the action of an exact vortex."""
        return self.four_pi_deg - self.eight_pi2_ch2

    def as_dict(self) -> dict:
        d = asdict(self)
        d["topological_bound"] = self.topological_bound
        return d


def degree_tau(pair: Pair, tau: CentralParameter) -> float:
    return float(pair.model.topology(pair.A, tau.coeffs)[0])


def ch2(pair: Pair) -> float:
    zero = np.zeros(pair.rep.group.dim)
    return float(pair.model.topology(pair.A, zero)[1])


def ymh_total(pair: Pair, tau: CentralParameter) -> EnergyReport:
    """Both forms of the functional and the five decomposition terms."""
    m = pair.model
    t = tau.coeffs
    cell = pair.torus.cell_volume
    F = np.asarray(m.curvature(pair.A))
    D = np.asarray(m.covariant(pair.A, pair.phi))
    mu = np.asarray(m._moment(pair.phi))
    f2 = cell * float(np.sum(F**2))
    mom = cell * float(np.sum((mu - t) ** 2))
    der = 2.0 * cell * float(np.sum(np.abs(D) ** 2))
    deg, c2 = (float(x) for x in m.topology(pair.A, t))
    alt = float(m.alternate(pair.A, pair.phi, t))
    res = vortex_residuals(pair, tau)
    total = f2 + mom + der
    defect = alt - (total - FOUR_PI * deg + EIGHT_PI2 * c2)
    return EnergyReport(
        total=total,
        curvature_norm2=f2,
        moment_norm2=mom,
        derivative_term=der,
        four_pi_deg=FOUR_PI * deg,
        eight_pi2_ch2=EIGHT_PI2 * c2,
        alternate=alt,
        defect=defect,
        deg_tau=deg,
        ch2=c2,
        f20_norm2=res.norm_f20**2,
        f02_norm2=res.norm_f02**2,
    )


def _split(pair):
    return jnp.asarray(pair.A), jnp.asarray(pair.phi.real), jnp.asarray(pair.phi.imag)


def ymh_gradient(pair: Pair, tau: CentralParameter, objective: str = "action"):
    """Exact gradient of the lattice sum in coordinates.

    Returns (dA, dphi) with dphi = d/dRe + i d/dIm, so that the directional
    derivative along (vA, vphi) is sum(dA * vA) + Re sum(conj(dphi) * vphi).
    """
    m = pair.model
    fn = m.action_grad if objective == "action" else m.alternate_grad
    _, (gA, gr, gi) = fn(*_split(pair), jnp.asarray(tau.coeffs))
    return np.asarray(gA), np.asarray(gr) + 1j * np.asarray(gi)


def tangent_inner(u, v) -> float:
    """Coordinate pairing of two tangents (dA, dphi)."""
    return float(np.sum(u[0] * v[0]) + np.sum((np.conj(u[1]) * v[1]).real))


# ---------------------------------------------------------------------------
# minimiser


@dataclass
class MinimizeOptions:
    max_iter: int = 20000
    eps: float = 1e-6
    objective: str = "alternate"
    check_every: int = 10
    grad_tol: float = 1e-9
    momentum: float = 0.0
    initial_step: float | None = None
    raise_on_failure: bool = True


@dataclass
class MinimizeResult:
    pair: Pair
    trace: list
    report: EnergyReport
    status: str
    iterations: int
    residuals: dict
    gradient_norm: float
    warnings: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status in ("vortex", "stationary")

    def trace_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.trace)


def _dot(a, b):
    return sum(jnp.vdot(x, y).real for x, y in zip(a, b))


@jax.jit
def _axpy(x, g, step):
    return tuple(a - step * b for a, b in zip(x, g))


@jax.jit
def _bb(x, xp, g, gp):
    s = tuple(a - b for a, b in zip(x, xp))
    y = tuple(a - b for a, b in zip(g, gp))
    return _dot(s, s), _dot(s, y)


def minimize(pair0: Pair, tau: CentralParameter, options: MinimizeOptions | None = None) -> MinimizeResult:
    """Barzilai-Borwein descent with monotone backtracking.

    The default objective is the alternate (residual) form, whose zeros are
    exactly the discrete vortices; ``objective="action"`` descends the
    lattice action instead.  The chosen objective is nonincreasing along the
    trace.  Terminates when all residual norms are below ``eps`` ("vortex") or
    the L^2 gradient norm is below ``grad_tol`` ("stationary").
    """
    opts = options or MinimizeOptions()
    m = pair0.model
    t = jnp.asarray(tau.coeffs)
    cell = pair0.torus.cell_volume
    notes = []
    if tau.degenerate:
        notes.append("lambda(tau) = 0: expect phi -> 0 or no solutions")
        warnings.warn(notes[-1])
    if opts.objective == "alternate":
        vg = m.alternate_grad
    elif opts.objective == "action":
        vg = m.action_grad
    else:
        raise ValueError("objective must be 'alternate' or 'action'")

    def to_pair(x):
        return pair0.replace(A=np.asarray(x[0]), phi=np.asarray(x[1]) + 1j * np.asarray(x[2]))

    x = _split(pair0)
    f, g = vg(*x, t)
    f = float(f)
    step = opts.initial_step if opts.initial_step is not None else 1e-3 / cell
    xp = gp = None
    trace = []
    status = "max_iter"
    it = 0
    gnorm = math.sqrt(float(_dot(g, g)) / cell)

    def record(it, step):
        p = to_pair(x)
        res = vortex_residuals(p, tau)
        rep = {
            "iteration": it,
            "objective": f,
            "ymh": float(m.action(p.A, p.phi, t)),
            "r1": res.norm_r1,
            "r2": res.norm_r2,
            "r3": res.norm_r3,
            "grad": gnorm,
            "step": float(step),
        }
        trace.append(rep)
        return res

    while True:
        if it % opts.check_every == 0 or it >= opts.max_iter:
            res = record(it, step)
            if res.max_norm < opts.eps:
                status = "vortex"
                break
            if gnorm < opts.grad_tol:
                status = "stationary"
                break
            if it >= opts.max_iter:
                break
        if xp is not None:
            ss, sy = (float(v) for v in _bb(x, xp, g, gp))
            if sy > 0.0 and ss > 0.0:
                step = ss / sy
        beta = opts.momentum
        for _ in range(200):
            xn = _axpy(x, g, step)
            if beta and xp is not None:
                xn = tuple(a + beta * (b - c) for a, b, c in zip(xn, x, xp))
            fn, gn = vg(*xn, t)
            fn = float(fn)
            if fn <= f + 1e-12 * max(1.0, abs(f)) and math.isfinite(fn):
                break
            if beta:
                beta = 0.0
            else:
                step *= 0.5
        else:
            status = "step_failure"
            record(it, step)
            break
        xp, gp = x, g
        x, f, g = xn, fn, gn
        gnorm = math.sqrt(float(_dot(g, g)) / cell)
        it += 1

    pair = to_pair(x)
    res = vortex_residuals(pair, tau)
    result = MinimizeResult(pair, trace, ymh_total(pair, tau), status, it, res.as_dict(), gnorm, notes)
    if opts.raise_on_failure and status == "max_iter":
        raise NonConvergenceError(f"no convergence in {opts.max_iter} iterations", result)
    if opts.raise_on_failure and status == "step_failure":
        raise StepControllerError("backtracking failed", result)
    return result


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0
