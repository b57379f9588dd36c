"""Flat Kaehler 4-torus: discrete forms, exterior calculus and the (p,q) split.

Complex coordinates are z1 = x0 + i x1 and z2 = x2 + i x3, the Kaehler form is
omega = dx0^dx1 + dx2^dx3.  A k-form is stored as an array of shape
(ncomp, n0, n1, n2, n3, *values) where the components follow the sorted index
tuples ``itertools.combinations(range(4), k)``; a component with index set I
lives on the k-cell spanned by the axes in I at its lower corner.
"""

from __future__ import annotations

import csv
import itertools
import math
import struct
from dataclasses import dataclass

import numpy as np

DIM = 4
PLANES = tuple(itertools.combinations(range(DIM), 2))  # 01 02 03 12 13 23
PLANE_INDEX = {p: i for i, p in enumerate(PLANES)}

# dz1 ^ dz2 in the real 2-form basis, and the Kaehler form
DZ12 = np.array([0, 1, 1j, 1j, -1, 0], complex)
OMEGA = np.array([1, 0, 0, 0, 0, 1], float)


def cells(k: int):
    return tuple(itertools.combinations(range(DIM), k))


@dataclass(frozen=True)
class KaehlerTorus:
    """T^4 = (R/L)^4 with N sites per side and spacing h = L/N.

    ``extent`` optionally overrides the per-axis site counts (spacing stays
    L/N), e.g. (N, N, 1, 1) for a slab that is constant along z2.
    """

    N: int
    L: float = 1.0
    extent: tuple | None = None

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("need at least 2 sites per side")
        ext = tuple(self.extent) if self.extent is not None else (self.N,) * DIM
        if len(ext) != DIM or min(ext) < 1:
            raise ValueError("extent must be four positive integers")
        object.__setattr__(self, "extent", ext)

    @property
    def shape(self) -> tuple:
        return self.extent

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def cell_volume(self) -> float:
        return self.h**DIM

    @property
    def volume(self) -> float:
        return self.cell_volume * math.prod(self.extent)

    @property
    def lengths(self) -> tuple:
        return tuple(n * self.h for n in self.extent)

    def coords(self):
        """Site coordinates as four broadcastable arrays."""
        return np.meshgrid(*[np.arange(n) * self.h for n in self.extent], indexing="ij")

    def integrate(self, density) -> float:
        return float(np.sum(density) * self.cell_volume)

    def form(self, degree, data) -> "DiscreteForm":
        return DiscreteForm(self, degree, np.asarray(data))

    def zeros(self, degree, values=(), dtype=float) -> "DiscreteForm":
        return DiscreteForm(self, degree, np.zeros((len(cells(degree)),) + self.shape + tuple(values), dtype))

    def scalar(self, values) -> "DiscreteForm":
        return DiscreteForm(self, 0, np.asarray(values)[None])


@dataclass(frozen=True, eq=False)
class DiscreteForm:
    """A k-form with real, complex or vector values on the torus."""

    torus: KaehlerTorus
    degree: int
    data: np.ndarray

    def __post_init__(self):
        if not 0 <= self.degree <= DIM:
            raise ValueError("degree out of range")
        ncomp = len(cells(self.degree))
        if self.data.shape[: 1 + DIM] != (ncomp,) + self.torus.shape:
            raise ValueError(f"expected leading shape {(ncomp,) + self.torus.shape}, got {self.data.shape}")

    @property
    def value_shape(self) -> tuple:
        return self.data.shape[1 + DIM :]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.data)

    def inner(self, other: "DiscreteForm") -> float:
        """Discrete L^2 inner product h^4 sum Re(conj(f) g)."""
        return float(np.sum((np.conj(self.data) * other.data).real) * self.torus.cell_volume)

    def norm(self) -> float:
        return math.sqrt(max(self.inner(self), 0.0))

    def __add__(self, other):
        return DiscreteForm(self.torus, self.degree, self.data + other.data)

    def __sub__(self, other):
        return DiscreteForm(self.torus, self.degree, self.data - other.data)

    def __mul__(self, c):
        return DiscreteForm(self.torus, self.degree, self.data * c)

    __rmul__ = __mul__


def fwd(x, axis, h):
    """Forward difference along a lattice axis (axis counted from the first lattice axis)."""
    return (np.roll(x, -1, axis=axis) - x) / h


def bwd(x, axis, h):
    return (x - np.roll(x, 1, axis=axis)) / h


def exterior_d(f: DiscreteForm) -> DiscreteForm:
    """Forward-difference exterior derivative."""
    k = f.degree
    if k >= DIM:
        raise ValueError("exterior_d of a top-degree form")
    src = {c: i for i, c in enumerate(cells(k))}
    h = f.torus.h
    out = np.zeros((len(cells(k + 1)),) + f.data.shape[1:], f.data.dtype)
    for j, J in enumerate(cells(k + 1)):
        for p, mu in enumerate(J):
            rest = J[:p] + J[p + 1 :]
            out[j] += (-1) ** p * fwd(f.data[src[rest]], mu, h)
    return DiscreteForm(f.torus, k + 1, out)


def codifferential(f: DiscreteForm) -> DiscreteForm:
    """Exact adjoint of exterior_d for the discrete L^2 product (backward differences)."""
    k = f.degree
    if k == 0:
        raise ValueError("codifferential of a 0-form")
    dst = {c: i for i, c in enumerate(cells(k - 1))}
    h = f.torus.h
    out = np.zeros((len(cells(k - 1)),) + f.data.shape[1:], f.data.dtype)
    for j, J in enumerate(cells(k)):
        for p, mu in enumerate(J):
            rest = J[:p] + J[p + 1 :]
            # adjoint of forward difference is minus the backward difference
            out[dst[rest]] -= (-1) ** p * bwd(f.data[j], mu, h)
    return DiscreteForm(f.torus, k - 1, out)


def contract(f: DiscreteForm) -> DiscreteForm:
    """Kaehler contraction of a 2-form: Lambda F = F01 + F23."""
    if f.degree != 2:
        raise ValueError("Lambda acts on 2-forms here")
    return DiscreteForm(f.torus, 0, (f.data[0] + f.data[5])[None])


def type_split(f: DiscreteForm):
    """(F20, F11, F02, Lambda F) for a 2-form, pointwise in the constant complex structure."""
    if f.degree != 2:
        raise ValueError("type_split needs a 2-form")
    data = f.data
    shape = (6,) + (1,) * (data.ndim - 1)
    u = DZ12.reshape(shape)
    c20 = np.sum(np.conj(u) * data, axis=0) / 4.0
    c02 = np.sum(u * data, axis=0) / 4.0
    f20 = u * c20[None]
    f02 = np.conj(u) * c02[None]
    f11 = data - f20 - f02
    tr = (data[0] + data[5])[None]
    t = f.torus
    return DiscreteForm(t, 2, f20), DiscreteForm(t, 2, f11), DiscreteForm(t, 2, f02), DiscreteForm(t, 0, tr)


def laplacian(f: DiscreteForm) -> DiscreteForm:
    """Analyst's Laplacian -d*d on 0-forms."""
    return codifferential(exterior_d(f)) * -1.0


def _symbol(torus: KaehlerTorus):
    h = torus.h
    ks = [2.0 * np.pi * np.fft.fftfreq(n) for n in torus.shape]
    grids = np.meshgrid(*ks, indexing="ij")
    return sum((2.0 * np.cos(k) - 2.0) / h**2 for k in grids)


def laplace_solve(rhs: DiscreteForm, mean_tol: float = 1e-12) -> DiscreteForm:
    """Solve Delta u = rhs for a zero-mean 0-form by FFT with the discrete symbol."""
    if rhs.degree != 0:
        raise ValueError("laplace_solve takes a 0-form")
    data = rhs.data[0]
    scale = max(float(np.max(np.abs(data), initial=0.0)), 1e-300)
    mean = np.mean(data, axis=tuple(range(DIM)))
    if np.max(np.abs(mean), initial=0.0) > mean_tol * scale:
        raise ValueError("right-hand side has nonzero mean")
    sym = _symbol(rhs.torus)
    sym = sym.reshape(sym.shape + (1,) * (data.ndim - DIM))
    axes = tuple(range(DIM))
    fh = np.fft.fftn(data, axes=axes)
    with np.errstate(divide="ignore", invalid="ignore"):
        uh = np.where(sym == 0.0, 0.0, fh / np.where(sym == 0.0, 1.0, sym))
    u = np.fft.ifftn(uh, axes=axes)
    if not np.iscomplexobj(data):
        u = u.real
    return DiscreteForm(rhs.torus, 0, u[None])


# ---------------------------------------------------------------------------
# field dumps

MAGIC = b"VXLF"
_HEADER = struct.Struct("<4sHIdBBI4IB")
_VALUE_TYPES = {np.dtype("<f8"): 0, np.dtype("<c16"): 1}


def write_form(path, f: DiscreteForm) -> None:
    """Little-endian binary dump: header then row-major cell data."""
    data = np.ascontiguousarray(f.data, dtype=np.complex128 if f.is_complex else np.float64)
    vshape = f.value_shape
    if len(vshape) > 4:
        raise ValueError("too many value axes")
    header = _HEADER.pack(
        MAGIC,
        1,
        f.torus.N,
        f.torus.L,
        f.degree,
        1 if f.is_complex else 0,
        data.shape[0],
        *f.torus.shape,
        len(vshape),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(struct.pack(f"<{len(vshape)}I", *vshape))
        fh.write(data.astype(data.dtype.newbyteorder("<"), copy=False).tobytes())


def read_form(path) -> DiscreteForm:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, n, L, degree, vtype, ncomp, e0, e1, e2, e3, nv = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != 1:
        raise ValueError("not a field dump")
    off = _HEADER.size
    vshape = struct.unpack_from(f"<{nv}I", raw, off)
    off += 4 * nv
    dtype = np.dtype("<c16") if vtype else np.dtype("<f8")
    ext = (e0, e1, e2, e3)
    torus = KaehlerTorus(n, L, ext)
    data = np.frombuffer(raw, dtype=dtype, offset=off).reshape((ncomp,) + ext + tuple(vshape)).copy()
    return DiscreteForm(torus, degree, data)


def write_csv(path, f: DiscreteForm) -> None:
    """CSV export of a scalar form: site coordinates, component, value (real/imag)."""
    if f.value_shape not in ((), (1,)):
        raise ValueError("CSV export is for scalar forms")
    data = f.data.reshape(f.data.shape[: 1 + DIM])
    h = f.torus.h
    names = ["".join(map(str, c)) or "0" for c in cells(f.degree)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["x0", "x1", "x2", "x3", "component", "value"]
        if f.is_complex:
            cols.append("imag")
        w.writerow(cols)
        for c, name in enumerate(names):
            for idx in np.ndindex(*f.torus.shape):
                v = data[(c,) + idx]
                row = [repr(i * h) for i in idx] + [name, repr(float(np.real(v)))]
                if f.is_complex:
                    row.append(repr(float(np.imag(v))))
                w.writerow(row)
