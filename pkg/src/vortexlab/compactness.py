"""Density measures of pair sequences, concentration points, 8 pi^2 quantization,
the cutoff extension across a puncture and ideal-pair bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .algebra import CentralParameter
from .energy import ch2, degree_tau
from .fields import Pair, TwistData, band_limited, get_model, ymh_density
from .gaugefix import coulomb_gauge
from .lattice import DIM, KaehlerTorus

QUANTUM = 8.0 * math.pi**2


# ---------------------------------------------------------------------------
# measures


@dataclass
class DensityMeasure:
    """Lattice density (sites) plus point atoms [(site, mass)]."""

    torus: KaehlerTorus
    density: np.ndarray
    atoms: list = field(default_factory=list)

    def __post_init__(self):
        d = np.asarray(self.density, float)
        if d.shape != self.torus.shape:
            raise ValueError("density must live on sites")
        if np.any(d < -1e-12) or any(m < 0 for _, m in self.atoms):
            raise ValueError("masses must be nonnegative")
        self.density = d

    @property
    def smooth_total(self) -> float:
        return self.torus.integrate(self.density)

    @property
    def total(self) -> float:
        return self.smooth_total + sum(m for _, m in self.atoms)

    def shifted(self, shift) -> "DensityMeasure":
        """Translate by an integer site vector."""
        ext = self.torus.shape
        atoms = [(tuple((a + s) % n for a, s, n in zip(x, shift, ext)), m) for x, m in self.atoms]
        return DensityMeasure(self.torus, np.roll(self.density, shift, axis=tuple(range(DIM))), atoms)


def density_measure(pair: Pair, tau: CentralParameter) -> DensityMeasure:
    return DensityMeasure(pair.torus, ymh_density(pair, tau))


def _periodic_r2(torus: KaehlerTorus, center=None):
    """Squared periodic distance from ``center`` (site units, default origin), physical units."""
    h = torus.h
    c = np.zeros(DIM) if center is None else np.asarray(center, float)
    r2 = np.zeros(torus.shape)
    for mu, n in enumerate(torus.shape):
        d = (np.arange(n) - c[mu]) % n
        d = np.minimum(d, n - d) * h
        shape = [1] * DIM
        shape[mu] = n
        r2 = r2 + d.reshape(shape) ** 2
    return r2


def ball_masses(measure: DensityMeasure, radius: float):
    """Mass of the closed periodic ball B(x, radius) around every site, and the site count of the ball."""
    t = measure.torus
    ball = (_periodic_r2(t) <= radius**2 + 1e-12).astype(float)
    axes = tuple(range(DIM))
    conv = np.fft.ifftn(np.fft.fftn(measure.density * t.cell_volume, axes=axes) * np.conj(np.fft.fftn(ball, axes=axes)), axes=axes).real
    # correlation: sum_y density(x + y) ball(y); the ball is symmetric
    for x, m in measure.atoms:
        d2 = _periodic_r2(t, x)
        conv = conv + m * (d2 <= radius**2 + 1e-12)
    return conv, int(ball.sum())


def periodic_components(mask: np.ndarray):
    """Connected components (face adjacency) of a boolean site mask on the torus."""
    labels, count = ndimage.label(mask)
    parent = list(range(count + 1))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for ax in range(mask.ndim):
        a = np.take(labels, 0, axis=ax)
        b = np.take(labels, -1, axis=ax)
        for i, j in zip(a[(a > 0) & (b > 0)], b[(a > 0) & (b > 0)]):
            ri, rj = find(int(i)), find(int(j))
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(count + 1)])
    merged = roots[labels]
    return [merged == k for k in sorted(set(roots[1:].tolist()))]


def dyadic_radii(torus: KaehlerTorus):
    """2h, 4h, ... up to L/4."""
    out, r = [], 2.0 * torus.h
    while r <= torus.L / 4 + 1e-12:
        out.append(r)
        r *= 2.0
    return out


@dataclass
class Concentration:
    site: tuple
    point: tuple
    mass: float
    radius: float
    smooth_density: float

    def as_dict(self) -> dict:
        return {"site": list(self.site), "point": list(self.point), "mass": self.mass, "radius": self.radius}


def _site_distance(torus, a, b) -> float:
    d2 = 0.0
    for x, y, n in zip(a, b, torus.shape):
        d = abs(x - y) % n
        d2 += (min(d, n - d) * torus.h) ** 2
    return math.sqrt(d2)


def detect_concentration(seq, epsilon: float = 1.0, tail: int = 2, growth_limit: float = 10.0):
    """Concentration points of a sequence of density measures.

    A site is flagged when its smallest-ball mass stays >= epsilon over the
    last ``tail`` measures.  Flagged sites are reduced to local maxima and each
    atom's mass is the excess over the smooth part in the last measure: ball
    mass minus the shell-averaged density B(2r) minus B(r) times the ball volume,
    at the largest dyadic r whose shell avoids the other atoms.
    """
    seq = list(seq)
    if len(seq) < 2:
        raise ValueError("need at least two measures")
    totals = np.array([m.total for m in seq])
    if not np.all(np.isfinite(totals)) or totals.max() > growth_limit * max(totals[0], 1e-300) and totals.max() > epsilon:
        raise ValueError("totals are unbounded along the sequence")
    torus = seq[-1].torus
    radii = dyadic_radii(torus)
    if not radii:
        raise ValueError("torus too small for the dyadic radius grid")
    rmin = radii[0]
    k = min(tail, len(seq))
    small = [ball_masses(m, rmin)[0] for m in seq[-k:]]
    flagged = np.all([s >= epsilon for s in small], axis=0)
    atoms = []
    for comp in periodic_components(flagged):
        vals = np.where(comp, small[-1], -np.inf)
        atoms.append(tuple(int(i) for i in np.unravel_index(int(np.argmax(vals)), torus.shape)))
    last = seq[-1]
    cache = {}

    def masses(r):
        if r not in cache:
            cache[r] = ball_masses(last, r)
        return cache[r]

    out = []
    for a in atoms:
        others = [_site_distance(torus, a, b) for b in atoms if b != a]
        dmin = min(others) if others else math.inf
        choice = [r for r in radii if 2 * r < dmin - rmin and 2 * r <= torus.L / 2 + 1e-12] or [rmin]
        r = choice[-1]
        m1, n1 = masses(r)
        m2, n2 = masses(2 * r)
        shell = (m2[a] - m1[a]) / ((n2 - n1) * torus.cell_volume)
        excess = float(m1[a] - shell * n1 * torus.cell_volume)
        if excess >= epsilon:
            point = tuple(i * torus.h for i in a)
            out.append(Concentration(a, point, excess, r, float(shell)))
    cap = int(math.floor(totals.max() / epsilon)) + 1
    if len(out) > cap:
        out = sorted(out, key=lambda c: -c.mass)[:cap]
    return out


@dataclass
class Quantum:
    mass: float
    n: int
    defect: float
    flagged: bool


def mass_quantization(masses, tolerance: float = 0.05 * QUANTUM):
    """n = nearest integer to mass / 8 pi^2, defect = |mass - 8 pi^2 n|; flags n <= 0 or large defects."""
    out = []
    for m in masses:
        n = int(np.rint(m / QUANTUM))
        d = abs(m - QUANTUM * n)
        out.append(Quantum(float(m), n, float(d), n <= 0 or d > tolerance))
    return out


# ---------------------------------------------------------------------------
# synthetic concentration


def periodic_gaussian(torus: KaehlerTorus, center, width: float, images: int = 2) -> np.ndarray:
    """Product of 1-d periodised Gaussians exp(-d^2 / 2 width^2); ``center`` in physical units."""
    g = np.ones(torus.shape)
    for mu, n in enumerate(torus.shape):
        x = np.arange(n) * torus.h
        period = n * torus.h
        prof = sum(np.exp(-((x - center[mu] + j * period) ** 2) / (2 * width**2)) for j in range(-images, images + 1))
        shape = [1] * DIM
        shape[mu] = n
        g = g * prof.reshape(shape)
    return g


def bump_connection(torus: KaehlerTorus, center, width: float) -> np.ndarray:
    """U(1) link coefficients A = (d1 g, -d0 g, d3 g, -d2 g) for a Gaussian g (unit amplitude)."""
    g = periodic_gaussian(torus, center, width)
    h = torus.h
    d = [(np.roll(g, -1, axis=mu) - g) / h for mu in range(DIM)]
    A = np.stack([d[1], -d[0], d[3], -d[2]])
    return A[..., None]


def bubbling_family(
    torus: KaehlerTorus,
    bumps,
    widths=(0.2, 0.1, 0.05),
    background_amplitude: float = 0.2,
    seed: int = 0,
    rep=None,
):
    """Sequence of U(1) pairs: smooth background plus curvature bumps.

    ``bumps`` lists (center, n); each bump is scaled so that its own lattice
    action is 8 pi^2 n, with widths given as fractions of L.  The section is
    zero and the background is a fixed band-limited connection.
    """
    from .algebra import parse_representation

    rep = rep or parse_representation("u1:1")
    rng = np.random.default_rng(seed)
    bg = np.stack([band_limited(torus, (1,), 1, rng) for _ in range(DIM)])
    bg = background_amplitude * bg / max(np.abs(bg).max(), 1e-300)
    tau0 = CentralParameter.scalar(rep, 0.0)
    zero_phi = np.zeros(torus.shape + (rep.dim,), complex)
    frames = []
    for w in widths:
        A = bg.copy()
        for center, n in bumps:
            b = bump_connection(torus, center, w * torus.L)
            e1 = float(get_model(torus, rep, TwistData()).action(b, zero_phi, tau0.coeffs))
            A = A + math.sqrt(QUANTUM * n / e1) * b
        frames.append(Pair(torus, rep, A, zero_phi))
    return frames


# ---------------------------------------------------------------------------
# ideal pairs


@dataclass
class IdealPair:
    pair: Pair
    atoms: list  # [(point, n)]
    labels: tuple  # (deg_tau, Ch2) of the sequence
    limit_total: float
    sequence_total: float
    ledger_defect: float
    masses: list

    @property
    def recorded_total(self) -> float:
        return self.limit_total + QUANTUM * sum(n for _, n in self.atoms)

    def as_dict(self) -> dict:
        return {
            "atoms": [{"point": list(p), "n": n} for p, n in self.atoms],
            "masses": list(self.masses),
            "labels": {"deg_tau": self.labels[0], "ch2": self.labels[1]},
            "limit_sector": {"deg_tau": self.labels[0], "ch2": self.labels[1] - sum(n for _, n in self.atoms)},
            "limit_total": self.limit_total,
            "sequence_total": self.sequence_total,
            "recorded_total": self.recorded_total,
            "ledger_defect": self.ledger_defect,
        }


class SectorMismatchError(ValueError):
    pass


class QuantizationError(ValueError):
    pass


def sequence_limit(seq, tau: CentralParameter, epsilon: float = 1.0, tolerance: float = 0.05 * QUANTUM, fix_gauge=True):
    """Ideal-pair limit of a sequence: Coulomb-fixed frames, quantized atoms and the action ledger.

    The last frame represents the limit away from the atoms; its total is the
    last frame's action minus the atoms' excess masses.
    """
    seq = list(seq)
    sectors = [(degree_tau(p, tau), ch2(p)) for p in seq]
    d0, c0 = sectors[0]
    for d, c in sectors[1:]:
        if abs(d - d0) > 1e-6 * max(1.0, abs(d0)) or abs(c - c0) > 1e-3:
            raise SectorMismatchError(f"sector ({d:.6g}, {c:.6g}) differs from ({d0:.6g}, {c0:.6g})")
    if fix_gauge:
        seq = [coulomb_gauge(p, tol=1e-8, max_iter=200).pair for p in seq]
    measures = [density_measure(p, tau) for p in seq]
    conc = detect_concentration(measures, epsilon)
    quanta = mass_quantization([c.mass for c in conc], tolerance)
    bad = [q for q in quanta if q.flagged]
    if bad:
        raise QuantizationError(f"unquantized masses {[q.mass for q in bad]}")
    seq_total = measures[-1].total
    limit_total = seq_total - sum(c.mass for c in conc)
    atoms = [(c.point, q.n) for c, q in zip(conc, quanta)]
    recorded = limit_total + QUANTUM * sum(q.n for q in quanta)
    return IdealPair(seq[-1], atoms, (float(d0), float(c0)), limit_total, seq_total, seq_total - recorded, [c.mass for c in conc])


# ---------------------------------------------------------------------------
# cutoff extension across a puncture


def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(np.asarray(s, float), 0.0, 1.0)
    a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
    b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def cutoff_profile(radius, r):
    """0 on D(2r), 1 outside D(3r)."""
    return smooth_step((np.asarray(radius) - 2.0 * r) / r)


@dataclass
class LocalPatch:
    """A slab pair lifted to the universal cover around a puncture, in a gauge with a(p) = 0.

    ``theta`` (2, P, P) are real link angles along x0, x1 and ``phi`` (P, P, V)
    the section; sites sit at physical offsets ``offsets`` from the puncture.
    """

    base: Pair
    center: tuple
    theta: np.ndarray
    phi: np.ndarray
    offsets: tuple
    P: int


def lift_patch(pair: Pair, center, half_width: int) -> LocalPatch:
    """Sites within ``half_width`` of ``center`` (site coordinates on the slab) on the cover.

    The slab's background is the Landau-type gauge of TwistData.background_angles
    with its seam on the last x0 link; on the cover the seam is undone by the
    transition function chi = Phi n0 floor(i0 / n0) i1, then a linear gauge
    moves the background origin to the puncture and removes A(p).
    """
    t = pair.torus
    if not pair.rep.group.abelian:
        raise ValueError("cutoff extension is implemented for abelian slabs")
    n0, n1, n2, n3 = t.shape
    if (n2, n3) != (1, 1):
        raise ValueError("cutoff extension expects a slab constant along z2")
    m = pair.twist.matrix
    if np.any(m[np.ix_([0, 1], [2, 3])]) or m[2, 3] != 0:
        raise ValueError("only the (0,1) twist is supported on slabs")
    h = t.h
    Phi = -2.0 * math.pi * m[0, 1] / (n0 * n1)
    c = np.asarray(center, float)
    base = np.floor(c).astype(int)
    idx = [np.arange(b - half_width, b + half_width + 2) for b in base[:2]]
    I0, I1 = np.meshgrid(idx[0], idx[1], indexing="ij")
    j0, j1 = I0 % n0, I1 % n1
    A = pair.A[:, :, :, 0, 0, 0]
    phi = pair.phi[:, :, 0, 0, :]
    w = pair.model.weights
    th0 = h * A[0][j0, j1]
    th1 = Phi * I0 + h * A[1][j0, j1]
    chi = Phi * n0 * np.floor_divide(I0, n0) * I1
    # remove the connection at the puncture (nearest site) and recentre the background
    k0, k1 = int(round(c[0])) % n0, int(round(c[1])) % n1
    a0p, a1p = h * A[0][k0, k1], h * A[1][k0, k1]
    lin = -Phi * c[0] * I1 - a0p * (I0 - c[0]) - a1p * (I1 - c[1])
    chi_tot = chi + lin
    # th0, th1 are already seamless; only the linear part acts on them
    th0 = th0 + np.roll(lin, -1, axis=0) - lin
    th1 = th1 + np.roll(lin, -1, axis=1) - lin
    phase = np.exp(-1j * chi_tot[..., None] * w)
    phi_c = phase * phi[j0, j1]
    # the last row/column used rolled values; drop it
    P = I0.shape[0] - 1
    theta = np.stack([th0[:P, :P], th1[:P, :P]])
    offs = ((idx[0][:P] - c[0]) * h, (idx[1][:P] - c[1]) * h)
    return LocalPatch(pair, tuple(c), theta, phi_c[:P, :P], offs, P)


def _block_pair(patch: LocalPatch, psi_site, psi_link, rep):
    """Pair on a (P, P, 2, 2) block torus from cutoff values."""
    base = patch.base.torus
    torus = KaehlerTorus(base.N, base.L, (patch.P, patch.P, 2, 2))
    A = np.zeros((DIM,) + torus.shape + (1,))
    for mu in range(2):
        A[mu, ..., 0] = psi_link[mu] * patch.theta[mu][:, :, None, None] / base.h
    phi = psi_site[..., None] * patch.phi[:, :, None, None, :]
    return Pair(torus, rep, A, phi)


@dataclass
class CutoffReport:
    r: float
    excess: float
    inner_term: float
    samples: int
    radial_profile: list

    def as_dict(self) -> dict:
        return {"r": self.r, "excess": self.excess, "inner_term": self.inner_term, "samples": self.samples}


def cutoff_extend(pair: Pair, tau: CentralParameter, center, r: float):
    """Extend (psi_r A, psi_r phi) across a puncture at ``center`` and report the excess action.

    The slab pair is read as a field on R^2 x R^2 constant along z2; the
    puncture sits at (center, 0, 0).  The excess is the residual action of
    the extended pair minus that of the original, integrated over the 4-ball
    D(3r + 2h) outside of which both agree.  Each transverse slice is an
    exact lattice evaluation on a (P, P, 2, 2) block; slices at transverse
    radius k h are computed and the transverse lattice sum interpolates them
    radially.  Returns (patch, report).
    """
    t = pair.torus
    h = t.h
    if r < 4 * h - 1e-12:
        raise ValueError(f"annulus too thin for the stencil: r = {r:g} < 4h = {4 * h:g}")
    reach = 3.0 * r + 2.0 * h
    half = int(math.ceil(reach / h)) + 3
    patch = lift_patch(pair, center, half)
    rep = pair.rep
    X0, X1 = np.meshgrid(*patch.offsets, indexing="ij")
    tc = tau.coeffs
    ones = np.ones((patch.P, patch.P, 2, 2))
    orig = _block_pair(patch, ones, [ones, ones], rep)
    model = orig.model
    dens0 = np.asarray(model._alt_density(orig.A, orig.phi, tc))[:, :, 0, 0]
    inside = (X0**2 + X1**2) <= (reach + 1e-12) ** 2
    K = int(math.ceil(reach / h)) + 1
    prof = []
    for k in range(K + 1):
        w2 = (k + np.array([0, 1])) * h
        w3 = np.array([0.0, h])
        R2 = X0[:, :, None, None] ** 2 + X1[:, :, None, None] ** 2 + w2[None, None, :, None] ** 2 + w3[None, None, None, :] ** 2
        psi = cutoff_profile(np.sqrt(R2), r)
        links = []
        for mu in range(2):
            Xm = [X0, X1]
            Xm[mu] = Xm[mu] + h / 2
            R2m = Xm[0][:, :, None, None] ** 2 + Xm[1][:, :, None, None] ** 2 + w2[None, None, :, None] ** 2 + w3[None, None, None, :] ** 2
            links.append(cutoff_profile(np.sqrt(R2m), r))
        ext = _block_pair(patch, psi, links, rep)
        dens = np.asarray(model._alt_density(ext.A, ext.phi, tc))[:, :, 0, 0]
        prof.append(float(np.sum((dens - dens0)[inside]) * h**2))
    prof = np.array(prof)
    j = np.arange(-K, K + 1)
    J2, J3 = np.meshgrid(j, j, indexing="ij")
    rho = np.sqrt(J2**2 + J3**2)
    vals = np.interp(rho, np.arange(K + 1), prof, right=0.0)
    excess = float(np.sum(vals) * h**2)
    tau2 = tau.norm_sq
    inner = tau2 * math.pi**2 / 2.0 * (2.0 * r) ** 4
    return patch, CutoffReport(r, excess, inner, K + 1, prof.tolist())


def annulus_action(pair: Pair, tau: CentralParameter, center, r: float) -> float:
    """YMH action of the lifted slab pair on N(r) = D(4r) minus D(r) around the puncture."""
    t = pair.torus
    h = t.h
    dens = ymh_density(pair, tau)[:, :, 0, 0]
    n0, n1 = dens.shape
    half = int(math.ceil(4 * r / h)) + 2
    c = np.asarray(center, float)
    base = np.floor(c).astype(int)
    i0 = np.arange(base[0] - half, base[0] + half + 2)
    i1 = np.arange(base[1] - half, base[1] + half + 2)
    I0, I1 = np.meshgrid(i0, i1, indexing="ij")
    rho2 = ((I0 - c[0]) * h) ** 2 + ((I1 - c[1]) * h) ** 2
    # transverse area of {w : r^2 <= rho^2 + |w|^2 <= 16 r^2}
    area = math.pi * (np.clip(16 * r**2 - rho2, 0, None) - np.clip(r**2 - rho2, 0, None))
    return float(np.sum(dens[I0 % n0, I1 % n1] * area) * h**2)
