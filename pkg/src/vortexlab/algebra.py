"""Structure groups, representations and the moment map.

The compact algebra of U(n) is realised as anti-Hermitian n x n matrices with
the invariant inner product ``<X, Y> = -tr(XY)``.  Elements are mostly handled
as real coefficient vectors on a fixed orthonormal basis, which makes the
inner-product table the identity and keeps lattice kernels cheap.

For u(n) the form ``-tr(XY)`` restricted to the centre equals
``-(1/n) tr(X) tr(Y)``, so it is simultaneously the trace form on the
semisimple part and the normalised extension to the centre.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize


class DimensionError(ValueError):
    """Vector or matrix has the wrong size for the representation."""


class AdmissibilityError(RuntimeError):
    """The representation violates the non-degeneracy hypothesis of the bounds."""


def _herm(x):
    return np.conj(np.swapaxes(x, -1, -2))


# ---------------------------------------------------------------------------
# groups


@dataclass(frozen=True, eq=False)
class StructureGroup:
    """U(1) or U(n) with an orthonormal basis of its compact algebra.

    ``basis`` has shape (dim, n, n); ``center`` holds coefficient vectors of
    the centre basis (a single element ``i * 1_n``).
    """

    kind: str
    n: int
    basis: np.ndarray
    center: np.ndarray
    gram: np.ndarray

    @classmethod
    def u1(cls) -> "StructureGroup":
        return cls._build("U1", 1)

    @classmethod
    def un(cls, n: int) -> "StructureGroup":
        if n < 1:
            raise ValueError("rank must be >= 1")
        return cls._build("UN", n)

    @classmethod
    def _build(cls, kind, n):
        mats = []
        for j in range(n):
            m = np.zeros((n, n), complex)
            m[j, j] = 1j
            mats.append(m)
        s = 1.0 / math.sqrt(2.0)
        for j, k in itertools.combinations(range(n), 2):
            m = np.zeros((n, n), complex)
            m[j, k], m[k, j] = s, -s
            mats.append(m)
            m = np.zeros((n, n), complex)
            m[j, k] = m[k, j] = 1j * s
            mats.append(m)
        basis = np.array(mats)
        gram = -np.einsum("aij,bji->ab", basis, basis).real
        center = np.zeros((1, len(mats)))
        center[0, :n] = 1.0  # coefficients of i * 1_n
        for a in (basis, gram, center):
            a.setflags(write=False)
        return cls(kind, n, basis, center, gram)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def abelian(self) -> bool:
        return self.n == 1

    @property
    def center_elements(self) -> np.ndarray:
        return self.to_matrix(self.center)

    def to_matrix(self, coeffs):
        """Coefficients (..., dim) -> matrices (..., n, n)."""
        return np.tensordot(np.asarray(coeffs), self.basis, axes=([-1], [0]))

    def from_matrix(self, x):
        """Orthogonal projection of matrices (..., n, n) onto the compact algebra."""
        pair = np.einsum("aij,...ij->...a", np.conj(self.basis), np.asarray(x)).real
        return pair @ np.linalg.inv(self.gram).T

    def inner(self, x, y) -> float:
        """Invariant inner product of two coefficient vectors (or stacks)."""
        return np.einsum("...a,ab,...b->...", x, self.gram, y)

    def semisimple_projector(self) -> np.ndarray:
        """Orthogonal projector on coefficient space killing the centre."""
        c = self.center / np.sqrt(np.einsum("ka,ab,kb->k", self.center, self.gram, self.center))[:, None]
        return np.eye(self.dim) - c.T @ c @ self.gram

    def exp(self, coeffs):
        """Group elements exp(X) for algebra coefficients (..., dim)."""
        x = self.to_matrix(coeffs)
        return expm_antiherm(x)

    def log(self, g):
        """Principal logarithm of unitary matrices, as algebra coefficients."""
        return self.from_matrix(logm_unitary(g))

    def random_element(self, rng, shape=(), scale=1.0):
        return self.exp(scale * rng.standard_normal(tuple(shape) + (self.dim,)))


def expm_antiherm(x):
    """exp of a stack of anti-Hermitian matrices via the Hermitian eigenproblem."""
    x = np.asarray(x, complex)
    w, v = np.linalg.eigh(1j * x)
    return np.einsum("...ij,...j,...kj->...ik", v, np.exp(-1j * w), np.conj(v))


def logm_unitary(g):
    """Principal log of a stack of unitary matrices (anti-Hermitian output)."""
    g = np.asarray(g, complex)
    w, v = np.linalg.eig(g)
    lw = 1j * np.angle(w)
    x = v @ (lw[..., :, None] * np.linalg.inv(v))
    return 0.5 * (x - _herm(x))


# ---------------------------------------------------------------------------
# algebra elements


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """A single matrix in the (possibly complexified) algebra."""

    matrix: np.ndarray
    compact: bool = True

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, complex))
        object.__setattr__(self, "matrix", m)
        if self.compact and np.max(np.abs(m + _herm(m)), initial=0.0) > 1e-12 * max(1.0, np.abs(m).max()):
            raise ValueError("compact algebra element must be anti-Hermitian")

    @classmethod
    def from_coeffs(cls, group: StructureGroup, coeffs) -> "AlgebraElement":
        return cls(group.to_matrix(coeffs), True)

    def coeffs(self, group: StructureGroup) -> np.ndarray:
        return group.from_matrix(self.matrix)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.matrix) ** 2)))


# ---------------------------------------------------------------------------
# representations


def _sym_isometry(n, k):
    """Isometry from Sym^k(C^n) into (C^n)^{(x)k}, columns ordered by multiset."""
    multisets = list(itertools.combinations_with_replacement(range(n), k))
    p = np.zeros((n**k, len(multisets)), complex)
    for col, ms in enumerate(multisets):
        perms = set(itertools.permutations(ms))
        for perm in perms:
            idx = 0
            for j in perm:
                idx = idx * n + j
            p[idx, col] = 1.0
        p[:, col] /= math.sqrt(len(perms))
    return p


def _kron_stack(a, b):
    s = a.shape[:-2]
    out = np.einsum("...ij,...kl->...ikjl", a, b)
    return out.reshape(s + (a.shape[-2] * b.shape[-2], a.shape[-1] * b.shape[-1]))


@dataclass(frozen=True, eq=False)
class Representation:
    """A unitary representation of a structure group.

    ``generators[a]`` is rho_*(T_a) for the orthonormal algebra basis T_a.
    Summands are (kind, size) pairs with kind in {"charge:q", "fund", "sym:k",
    "triv"}; the group action is assembled block-diagonally from them.
    """

    group: StructureGroup
    dim: int
    generators: np.ndarray
    descriptor: str
    summands: tuple = field(default=())

    # --- construction -----------------------------------------------------
    @classmethod
    def u1(cls, q: int) -> "Representation":
        g = StructureGroup.u1()
        gens = np.array([[[1j * q]]])
        return cls._make(g, [("charge", q, gens)], f"u1:{q}")

    @classmethod
    def fundamental(cls, n: int) -> "Representation":
        g = StructureGroup.un(n)
        return cls._make(g, [("fund", 1, g.basis.copy())], f"un:{n}:fund")

    @classmethod
    def symmetric(cls, n: int, k: int) -> "Representation":
        if k < 1:
            raise ValueError("symmetric power must be >= 1")
        g = StructureGroup.un(n)
        p = _sym_isometry(n, k)
        gens = []
        eye = np.eye(n)
        for t in g.basis:
            tot = np.zeros((n**k, n**k), complex)
            for slot in range(k):
                m = np.ones((1, 1))
                for j in range(k):
                    m = np.kron(m, t if j == slot else eye)
                tot += m
            gens.append(_herm(p) @ tot @ p)
        return cls._make(g, [("sym", k, np.array(gens))], f"un:{n}:sym{k}")

    @classmethod
    def trivial(cls, group: StructureGroup, size: int = 1) -> "Representation":
        gens = np.zeros((group.dim, size, size), complex)
        name = "u1:0" if group.kind == "U1" else f"un:{group.n}:triv"
        if size != 1:
            name += f"^{size}"
        return cls._make(group, [("triv", size, gens)], name)

    @classmethod
    def direct_sum(cls, *reps: "Representation") -> "Representation":
        group = reps[0].group
        if any(r.group.kind != group.kind or r.group.n != group.n for r in reps):
            raise ValueError("direct sum needs a common structure group")
        parts = []
        for r in reps:
            parts.extend(r.summands)
        return cls._make(group, parts, "+".join(r.descriptor for r in reps))

    @classmethod
    def _make(cls, group, parts, descriptor):
        dim = sum(p[2].shape[-1] for p in parts)
        gens = np.zeros((group.dim, dim, dim), complex)
        off = 0
        summands = []
        for kind, arg, g in parts:
            d = g.shape[-1]
            gens[:, off : off + d, off : off + d] = g
            summands.append((kind, arg, g))
            off += d
        gens.setflags(write=False)
        return cls(group, dim, gens, descriptor, tuple(summands))

    # --- evaluators ----------------------------------------------------------
    def infinitesimal(self, coeffs):
        """rho_*(X) as (..., V, V) matrices for coefficients (..., dim)."""
        return np.tensordot(np.asarray(coeffs, float), self.generators, axes=([-1], [0]))

    def rho(self, g):
        """Group action matrices rho(g) for g of shape (..., n, n)."""
        g = np.asarray(g, complex)
        blocks = []
        for kind, arg, gens in self.summands:
            d = gens.shape[-1]
            if kind == "charge":
                blocks.append(g[..., :1, :1] ** arg)
            elif kind == "fund":
                blocks.append(g)
            elif kind == "sym":
                m = g
                for _ in range(arg - 1):
                    m = _kron_stack(m, g)
                p = _sym_isometry(self.group.n, arg)
                blocks.append(_herm(p) @ m @ p)
            else:
                blocks.append(np.broadcast_to(np.eye(d, dtype=complex), g.shape[:-2] + (d, d)))
        out = np.zeros(g.shape[:-2] + (self.dim, self.dim), complex)
        off = 0
        for b in blocks:
            d = b.shape[-1]
            out[..., off : off + d, off : off + d] = b
            off += d
        return out

    def act(self, g, phi):
        """rho(g) phi, broadcasting over leading axes."""
        return np.einsum("...ij,...j->...i", self.rho(g), phi)

    def weight(self, xi) -> float:
        """Real centre weight: <mu(phi), xi> / |phi|^2 for a centre element xi.

        Equivalently rho_*(xi) = i * weight * Id.  Raises if xi does not act
        by a scalar.
        """
        s = self.scalar_action(xi)
        return float(s.imag)

    def scalar_action(self, xi) -> complex:
        """The complex scalar by which the centre element ``xi`` acts on V."""
        m = self.infinitesimal(np.asarray(xi, float))
        lam = np.trace(m) / self.dim
        if np.max(np.abs(m - lam * np.eye(self.dim))) > 1e-10 * max(1.0, abs(lam)):
            raise ValueError("element does not act by a scalar on V")
        return complex(lam)

    @property
    def background_charge(self) -> float:
        """Scalar k with rho(e^{i theta} 1_n) = e^{i k theta}: the centre weight of i*1_n."""
        return self.weight(self.group.center[0])

    def check_vector(self, phi):
        phi = np.asarray(phi)
        if phi.shape[-1] != self.dim:
            raise DimensionError(f"expected vectors of size {self.dim}, got {phi.shape[-1]}")
        return phi


_REP_CACHE: dict = {}


def parse_representation(descriptor: str) -> Representation:
    """Parse ``u1:q``, ``un:<n>:fund``, ``un:<n>:sym<k>``, ``un:<n>:triv`` and '+' sums."""
    if descriptor in _REP_CACHE:
        return _REP_CACHE[descriptor]
    parts = [p.strip() for p in descriptor.split("+")]
    reps = []
    for p in parts:
        tok = p.split(":")
        try:
            if tok[0] == "u1" and len(tok) == 2:
                reps.append(Representation.u1(int(tok[1])))
            elif tok[0] == "un" and len(tok) == 3:
                n = int(tok[1])
                if tok[2] == "fund":
                    reps.append(Representation.fundamental(n))
                elif tok[2].startswith("sym"):
                    reps.append(Representation.symmetric(n, int(tok[2][3:])))
                elif tok[2] == "triv":
                    reps.append(Representation.trivial(StructureGroup.un(n)))
                else:
                    raise ValueError
            else:
                raise ValueError
        except ValueError:
            raise ValueError(f"bad representation descriptor {p!r}") from None
    rep = reps[0] if len(reps) == 1 else Representation.direct_sum(*reps)
    object.__setattr__(rep, "descriptor", descriptor)
    _REP_CACHE[descriptor] = rep
    return rep


# ---------------------------------------------------------------------------
# central parameter


@dataclass(frozen=True, eq=False)
class CentralParameter:
    """tau = sum_k t_k * c_k over the centre basis c_k (c_0 = i * 1_n)."""

    rep: Representation
    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in np.atleast_1d(self.values))
        if len(vals) != self.rep.group.center.shape[0]:
            raise ValueError("one value per centre basis element expected")
        object.__setattr__(self, "values", vals)
        m = self.rep.group.to_matrix(self.coeffs)
        comm = np.einsum("ij,ajk->aik", m, self.rep.group.basis) - np.einsum("aij,jk->aik", self.rep.group.basis, m)
        if np.abs(comm).max(initial=0.0) > 1e-12:
            raise ValueError("tau must be central")

    @classmethod
    def scalar(cls, rep: Representation, t: float) -> "CentralParameter":
        return cls(rep, (t,))

    @property
    def coeffs(self) -> np.ndarray:
        return np.asarray(self.values) @ self.rep.group.center

    @property
    def norm_sq(self) -> float:
        return float(self.rep.group.inner(self.coeffs, self.coeffs))

    @property
    def weight(self) -> float:
        """lambda(tau), the real centre weight."""
        return self.rep.weight(self.coeffs)

    @property
    def degenerate(self) -> bool:
        return abs(self.weight) < 1e-14


# ---------------------------------------------------------------------------
# moment map


def moment_coeffs(rep: Representation, phi):
    """Moment map coefficients mu^a = Im(phi^dagger rho_*(T_a) phi), batched."""
    phi = rep.check_vector(phi)
    pair = np.einsum("...i,aij,...j->...a", np.conj(phi), rep.generators, phi).imag
    return pair @ np.linalg.inv(rep.group.gram).T


def moment_map(rep: Representation, phi) -> AlgebraElement:
    """mu(phi) in the compact algebra, defined by <mu, X> = Im <phi, rho_*(X) phi>."""
    phi = rep.check_vector(np.asarray(phi, complex))
    if phi.ndim != 1:
        raise DimensionError("moment_map takes a single vector; use moment_coeffs for stacks")
    pair = np.einsum("i,aij,j->a", np.conj(phi), rep.generators, phi).imag
    try:
        c = np.linalg.solve(rep.group.gram, pair)
    except np.linalg.LinAlgError:
        raise ValueError("singular inner-product table") from None
    return AlgebraElement.from_coeffs(rep.group, c)


def infinitesimal_action(rep: Representation, x, phi):
    """rho_*(X) phi for an AlgebraElement or coefficient vector X."""
    phi = rep.check_vector(np.asarray(phi, complex))
    if isinstance(x, AlgebraElement):
        if x.matrix.shape[-1] != rep.group.n:
            raise DimensionError("algebra element has the wrong size")
        c = x.coeffs(rep.group)
    else:
        c = np.asarray(x, float)
        if c.shape[-1] != rep.group.dim:
            raise DimensionError("coefficient vector has the wrong size")
    return np.einsum("...ij,...j->...i", rep.infinitesimal(c), phi)


# ---------------------------------------------------------------------------
# admissibility and the a-priori constant


@dataclass
class AdmissibilityReport:
    passed: bool
    min_semisimple_moment: float
    lambda_consistent: bool
    message: str


def _random_unit(rng, dim, count):
    z = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def admissibility_check(rep: Representation, seed: int = 0, starts: int = 32) -> AdmissibilityReport:
    """Search the unit sphere for vectors on which the semisimple part acts trivially."""
    group = rep.group
    lam_ok = True
    for c in group.center:
        try:
            rep.scalar_action(c)
        except ValueError:
            lam_ok = False
    proj = group.semisimple_projector()
    if np.allclose(proj, 0.0):
        lam = rep.weight(group.center[0]) if lam_ok else 0.0
        ok = lam_ok and abs(lam) > 1e-12
        msg = "abelian: centre weight governs" if ok else "abelian with zero centre weight"
        return AdmissibilityReport(ok, float("nan"), lam_ok, msg)

    def obj(v):
        phi = v[: rep.dim] + 1j * v[rep.dim :]
        nrm = np.vdot(phi, phi).real
        m = moment_coeffs(rep, phi) @ proj.T
        return float(group.inner(m, m)) / nrm**2

    rng = np.random.default_rng(seed)
    best = np.inf
    for phi0 in _random_unit(rng, rep.dim, starts):
        v0 = np.concatenate([phi0.real, phi0.imag])
        res = optimize.minimize(obj, v0, method="BFGS", options={"gtol": 1e-12})
        best = min(best, res.fun)
    best = math.sqrt(max(best, 0.0))
    ok = lam_ok and best >= 1e-8
    msg = "ok" if ok else ("trivial semisimple action on a subspace" if best < 1e-8 else "centre not scalar")
    return AdmissibilityReport(ok, best, lam_ok, msg)


def bound_ratio_sup(rep: Representation, tau: CentralParameter, phi):
    """Exact sup over s > 0 of s/|s mu(u) - tau| for unit vectors u (closed form).

    With a = |mu(u)|^2, b = <mu(u), tau>, c = |tau|^2 the supremum is
    sqrt(c/(ac - b^2)) when b > 0 and 1/sqrt(a) otherwise; inf when it diverges.
    """
    phi = np.asarray(phi, complex)
    u = phi / np.linalg.norm(phi, axis=-1, keepdims=True)
    m = moment_coeffs(rep, u)
    t = tau.coeffs
    a = rep.group.inner(m, m)
    b = rep.group.inner(m, np.broadcast_to(t, m.shape))
    c = tau.norm_sq
    disc = a * c - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.where(disc > 1e-13 * np.maximum(a * c, 1e-300), np.sqrt(c / disc), np.inf)
        neg = np.where(a > 1e-26, 1.0 / np.sqrt(a), np.inf)
    return np.where(b > 0, pos, neg)


def estimate_bound_constant(
    rep: Representation,
    tau: CentralParameter,
    samples: int = 10_000,
    seed: int = 0,
    safety: float = 1.25,
    grid: int = 241,
) -> float:
    """Sampled constant C with |phi|^2 <= C |mu(phi) - tau| for all phi.

    Unit directions are sampled uniformly and the radial scale s = r^2 runs over
    a log grid; the maximum of s / |s mu(u) - tau| is inflated by ``safety``.
    A divergent direction (a zero of mu - tau off the origin, or a direction
    where mu vanishes) raises AdmissibilityError.
    """
    if samples < 10_000:
        raise ValueError("at least 1e4 samples required")
    report = admissibility_check(rep, seed=seed)
    if not report.passed:
        raise AdmissibilityError(report.message)
    rng = np.random.default_rng(seed)
    u = _random_unit(rng, rep.dim, samples)
    if np.any(~np.isfinite(bound_ratio_sup(rep, tau, u))):
        raise AdmissibilityError("bound ratio diverges along a sampled direction")
    m = moment_coeffs(rep, u)
    t = tau.coeffs
    scale = max(math.sqrt(tau.norm_sq), 1.0)
    s = scale * np.logspace(-4, 4, grid)
    best = 0.0
    for chunk in np.array_split(np.arange(samples), max(1, samples // 4096)):
        diff = s[None, :, None] * m[chunk, None, :] - t
        nrm = np.sqrt(np.einsum("...a,ab,...b->...", diff, rep.group.gram, diff))
        with np.errstate(divide="ignore"):
            r = s[None, :] / nrm
        best = max(best, float(np.max(r)))
    if not np.isfinite(best):
        raise AdmissibilityError("bound ratio diverges")
    return safety * best


def bound_violations(rep: Representation, tau: CentralParameter, c_hat: float, samples: int, seed: int) -> int:
    """Count fresh samples with |phi|^2 > c_hat |mu(phi) - tau| (log-uniform radii)."""
    rng = np.random.default_rng(seed)
    u = _random_unit(rng, rep.dim, samples)
    scale = max(math.sqrt(tau.norm_sq), 1.0)
    s = scale * 10.0 ** rng.uniform(-4, 4, samples)
    m = moment_coeffs(rep, u) * s[:, None]
    diff = m - tau.coeffs
    nrm = np.sqrt(np.einsum("...a,ab,...b->...", diff, rep.group.gram, diff))
    return int(np.count_nonzero(s > c_hat * nrm))
