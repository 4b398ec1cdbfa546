"""Uniform tensor grids and complex fields with Dirichlet zero boundary.

Nodes along axis j are center_j - L + k*h, k = 0..m-1, h = 2L/(m-1); the
outermost layer is pinned to zero and every operation preserves that.  The
center defaults to the origin but sweeps re-center boxes at the current
concentration seed, so it is part of the grid identity.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, GridMismatch, TooLarge

NODE_BUDGET = 2**25  # max m^n


@dataclass(frozen=True)
class Grid:
    n: int
    L: float
    m: int
    center: tuple = None

    def __post_init__(self):
        if self.center is None:
            object.__setattr__(self, "center", (0.0,) * self.n)
        else:
            object.__setattr__(self, "center",
                               tuple(float(c) for c in self.center))
        if len(self.center) != self.n:
            raise DomainError("grid center dimension mismatch")

    @property
    def h(self):
        return 2.0 * self.L / (self.m - 1)

    @property
    def shape(self):
        return (self.m,) * self.n

    def axis(self, j):
        return self.center[j] - self.L + self.h * np.arange(self.m)

    @cached_property
    def coords(self):
        """n arrays of shape (m,)*n with the node coordinates."""
        return tuple(np.meshgrid(*[self.axis(j) for j in range(self.n)],
                                 indexing="ij"))

    def interior(self):
        return (slice(1, -1),) * self.n

    def zero_field(self):
        return ComplexField(self, np.zeros(self.shape, dtype=complex))

    def contains(self, point, margin=0.0):
        point = np.asarray(point, dtype=float)
        return bool(np.all(np.abs(point - np.asarray(self.center))
                           <= self.L - margin))


def build_grid(n, L, m, center=None):
    """Grid constructor with the contract checks (m >= 16, node budget)."""
    if n not in (1, 2, 3):
        raise DomainError(f"dimension must be 1, 2 or 3, got {n}")
    if L <= 0:
        raise DomainError("half-width must be positive")
    if m < 16:
        raise DomainError(f"points_per_axis must be >= 16, got {m}")
    if m**n > NODE_BUDGET:
        raise TooLarge(f"grid with {m}^{n} nodes exceeds the budget "
                       f"of {NODE_BUDGET}")
    return Grid(n=int(n), L=float(L), m=int(m), center=center)


def _zero_boundary(values):
    m = values.shape[0]
    for ax in range(values.ndim):
        sl = [slice(None)] * values.ndim
        sl[ax] = 0
        values[tuple(sl)] = 0.0
        sl[ax] = m - 1
        values[tuple(sl)] = 0.0
    return values


@dataclass
class ComplexField:
    """A complex-valued function sampled on a grid, zero on the boundary."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise GridMismatch(
                f"values shape {self.values.shape} does not match grid "
                f"{self.grid.shape}")
        self.values = np.ascontiguousarray(self.values, dtype=complex)
        _zero_boundary(self.values)

    def copy(self):
        return ComplexField(self.grid, self.values.copy())

    def __add__(self, other):
        self._check(other)
        return ComplexField(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return ComplexField(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return ComplexField(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return ComplexField(self.grid, -self.values)

    def _check(self, other):
        if other.grid != self.grid:
            raise GridMismatch("fields live on different grids")


def field_from_values(grid, values):
    """Wrap raw node values (boundary layer is zeroed)."""
    return ComplexField(grid, np.array(values, dtype=complex))


def field_from_function(grid, fn):
    """Sample fn(*coords) on the nodes."""
    return ComplexField(grid, np.asarray(fn(*grid.coords), dtype=complex))


# --- flat binary snapshots -----------------------------------------------------
# header: magic 'MGNL', uint32 version, uint32 n, uint32 m, float64 L,
#         n float64 center; payload: interleaved re/im float64, row-major.

_MAGIC = b"MGNL"
_VERSION = 1


def save_field(path, field_):
    g = field_.grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, g.n, g.m))
        fh.write(struct.pack("<d", g.L))
        fh.write(struct.pack(f"<{g.n}d", *g.center))
        inter = np.empty(field_.values.size * 2, dtype="<f8")
        inter[0::2] = field_.values.real.ravel()
        inter[1::2] = field_.values.imag.ravel()
        fh.write(inter.tobytes())


def load_field(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise DomainError(f"{path} is not a field snapshot")
        version, n, m = struct.unpack("<III", fh.read(12))
        if version != _VERSION:
            raise DomainError(f"unsupported snapshot version {version}")
        (L,) = struct.unpack("<d", fh.read(8))
        center = struct.unpack(f"<{n}d", fh.read(8 * n))
        raw = np.frombuffer(fh.read(), dtype="<f8")
    values = (raw[0::2] + 1j * raw[1::2]).reshape((m,) * n)
    return ComplexField(Grid(n=n, L=L, m=m, center=center), values.copy())


def modulus_slices_csv(path, field_):
    """Axis-aligned |u| slices through the max node; gnuplot-friendly CSV
    with columns: axis, coordinate, abs_u."""
    vals = np.abs(field_.values)
    peak = np.unravel_index(np.argmax(vals), vals.shape)
    rows = []
    for ax in range(field_.grid.n):
        idx = list(peak)
        coords = field_.grid.axis(ax)
        for k in range(field_.grid.m):
            idx[ax] = k
            rows.append((ax, coords[k], vals[tuple(idx)]))
        idx[ax] = peak[ax]
    with open(path, "w") as fh:
        fh.write("axis,coordinate,abs_u\n")
        for ax, c, v in rows:
            fh.write(f"{ax},{c:.17g},{v:.17g}\n")
