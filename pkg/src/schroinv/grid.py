"""Discrete space-time cylinder, fields, traces, stencils and quadrature.

The domain is the box cylinder (0,T) x Omega with Omega an axis-aligned
rectangle in R^n.  All fields are stored densely, node-centered,
time-major.  Everything downstream (solvers, probes, reconstruction)
builds on the operators defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

# (axis, side); side 0 is the low face x_axis = 0, side 1 the high face.
Face = tuple[int, int]


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform node-centered grid on (0,T) x prod_k (0, box[k]).

    m[k] spatial nodes per axis (so h[k] = box[k]/(m[k]-1)), nt time steps
    (nt+1 time levels, dt = T/nt).
    """

    m: tuple[int, ...]
    nt: int
    box: tuple[float, ...] | None = None
    T: float = 1.0

    def __post_init__(self):
        m = tuple(int(v) for v in self.m)
        object.__setattr__(self, "m", m)
        if len(m) < 2:
            raise ValueError("spatial dimension must be >= 2")
        if any(v < 5 for v in m):
            raise ValueError("need m[k] >= 5 on every axis")
        if self.nt < 2:
            raise ValueError("need nt >= 2")
        box = self.box if self.box is not None else (1.0,) * len(m)
        box = tuple(float(b) for b in box)
        if len(box) != len(m):
            raise ValueError("box and m must have equal length")
        if any(b <= 0 for b in box) or self.T <= 0:
            raise ValueError("box extents and T must be positive")
        object.__setattr__(self, "box", box)

    @property
    def n(self) -> int:
        return len(self.m)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(b / (mm - 1) for b, mm in zip(self.box, self.m))

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of a full space-time array: (nt+1, *m)."""
        return (self.nt + 1,) + self.m

    @property
    def n_space(self) -> int:
        return int(np.prod(self.m))

    def axis_coords(self, k: int) -> np.ndarray:
        return np.linspace(0.0, self.box[k], self.m[k])

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt + 1)

    def space_mesh(self) -> list[np.ndarray]:
        """Sparse broadcastable coordinate arrays x_1..x_n over shape m."""
        axes = [self.axis_coords(k) for k in range(self.n)]
        return list(np.meshgrid(*axes, indexing="ij", sparse=True))

    def spacetime_mesh(self) -> list[np.ndarray]:
        """Sparse broadcastable (t, x_1..x_n) arrays over shape (nt+1, *m)."""
        t = self.times().reshape((-1,) + (1,) * self.n)
        xs = [x[np.newaxis, ...] for x in self.space_mesh()]
        return [t] + xs

    def interior_slices(self) -> tuple[slice, ...]:
        return tuple(slice(1, -1) for _ in range(self.n))

    def faces(self) -> list[Face]:
        return [(axis, side) for axis in range(self.n) for side in (0, 1)]

    def face_shape(self, face: Face) -> tuple[int, ...]:
        axis, _ = face
        return tuple(mm for k, mm in enumerate(self.m) if k != axis)


def boundary_mask(grid: SpaceTimeGrid) -> np.ndarray:
    """Boolean (*m) mask of nodes with at least one coordinate on a face."""
    mask = np.zeros(grid.m, dtype=bool)
    for axis in range(grid.n):
        idx_lo = [slice(None)] * grid.n
        idx_lo[axis] = 0
        mask[tuple(idx_lo)] = True
        idx_hi = [slice(None)] * grid.n
        idx_hi[axis] = -1
        mask[tuple(idx_hi)] = True
    return mask


def _face_index(grid: SpaceTimeGrid, face: Face, depth: int = 0):
    """Index tuple selecting the plane `depth` nodes in from `face`."""
    axis, side = face
    idx = [slice(None)] * grid.n
    idx[axis] = depth if side == 0 else -(depth + 1)
    return tuple(idx)


@dataclass
class ComplexField:
    """Complex scalar sampled on every (time, space) node of a grid."""

    grid: SpaceTimeGrid
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != self.grid.shape:
            raise ValueError(
                f"data shape {self.data.shape} != grid shape {self.grid.shape}"
            )

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid) -> "ComplexField":
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @classmethod
    def from_function(cls, grid: SpaceTimeGrid, fn) -> "ComplexField":
        """Sample fn(t, x_1, ..., x_n) on all nodes (broadcasting)."""
        mesh = grid.spacetime_mesh()
        data = np.broadcast_to(np.asarray(fn(*mesh), dtype=complex), grid.shape)
        return cls(grid, data.copy())

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.data.copy())

    def check_finite(self):
        if not np.all(np.isfinite(self.data.view(float))):
            raise FloatingPointError("field contains NaN/Inf values")

    def __add__(self, other):
        return ComplexField(self.grid, self.data + other.data)

    def __sub__(self, other):
        return ComplexField(self.grid, self.data - other.data)

    def __mul__(self, scalar):
        return ComplexField(self.grid, self.data * scalar)

    __rmul__ = __mul__


@dataclass
class VectorField:
    """n complex (or real-valued) components sharing one grid.

    data has shape (n, nt+1, *m).
    """

    grid: SpaceTimeGrid
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data)
        want = (self.grid.n,) + self.grid.shape
        if self.data.shape != want:
            raise ValueError(f"data shape {self.data.shape} != {want}")

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid, dtype=complex) -> "VectorField":
        return cls(grid, np.zeros((grid.n,) + grid.shape, dtype=dtype))

    @classmethod
    def from_functions(cls, grid: SpaceTimeGrid, fns, dtype=complex) -> "VectorField":
        mesh = grid.spacetime_mesh()
        comps = [
            np.broadcast_to(np.asarray(fn(*mesh), dtype=dtype), grid.shape)
            for fn in fns
        ]
        return cls(grid, np.stack(comps))

    def component(self, k: int) -> ComplexField:
        return ComplexField(self.grid, self.data[k].astype(complex))


@dataclass
class BoundaryTrace:
    """Complex data on the lateral boundary Sigma plus a final-time slice.

    faces maps (axis, side) to an array of shape (nt+1, *m-without-axis).
    Corner nodes belong to every face containing them; consistent traces
    carry equal values there.  `final` is the t=T slice over all of Omega.
    """

    grid: SpaceTimeGrid
    faces: dict[Face, np.ndarray] = dc_field(default_factory=dict)
    final: np.ndarray | None = None

    def __post_init__(self):
        for face in self.grid.faces():
            want = (self.grid.nt + 1,) + self.grid.face_shape(face)
            if face not in self.faces:
                self.faces[face] = np.zeros(want, dtype=complex)
            else:
                arr = np.asarray(self.faces[face], dtype=complex)
                if arr.shape != want:
                    raise ValueError(f"face {face}: shape {arr.shape} != {want}")
                self.faces[face] = arr
        if self.final is not None:
            self.final = np.asarray(self.final, dtype=complex)
            if self.final.shape != self.grid.m:
                raise ValueError("final slice shape mismatch")

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid, with_final: bool = False) -> "BoundaryTrace":
        final = np.zeros(grid.m, dtype=complex) if with_final else None
        return cls(grid, {}, final)

    @classmethod
    def from_function(cls, grid: SpaceTimeGrid, fn) -> "BoundaryTrace":
        """Sample fn(t, x_1..x_n) on all boundary nodes for all time levels."""
        full = ComplexField.from_function(grid, fn)
        return cls.from_field(full, with_final=False)

    @classmethod
    def from_field(cls, field: ComplexField, with_final: bool = True) -> "BoundaryTrace":
        grid = field.grid
        faces = {}
        for face in grid.faces():
            idx = (slice(None),) + _face_index(grid, face)
            faces[face] = field.data[idx].copy()
        final = field.data[-1].copy() if with_final else None
        return cls(grid, faces, final)

    def at_time(self, k: int) -> dict[Face, np.ndarray]:
        return {face: arr[k] for face, arr in self.faces.items()}

    def apply_to_slice(self, arr: np.ndarray, k: int):
        """Overwrite the boundary nodes of a spatial slice with face values."""
        for face, vals in self.faces.items():
            arr[_face_index(self.grid, face)] = vals[k]

    def max_abs(self) -> float:
        vals = [np.max(np.abs(a)) if a.size else 0.0 for a in self.faces.values()]
        if self.final is not None:
            vals.append(np.max(np.abs(self.final)))
        return max(vals)

    def _combine(self, other, f):
        faces = {face: f(self.faces[face], other.faces[face]) for face in self.faces}
        final = None
        if self.final is not None and other.final is not None:
            final = f(self.final, other.final)
        elif self.final is not None or other.final is not None:
            raise ValueError("cannot combine traces with and without final slice")
        return BoundaryTrace(self.grid, faces, final)

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __mul__(self, scalar):
        faces = {face: arr * scalar for face, arr in self.faces.items()}
        final = None if self.final is None else self.final * scalar
        return BoundaryTrace(self.grid, faces, final)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# differential stencils


def gradient_slice(field: ComplexField, t_index: int) -> np.ndarray:
    """Spatial gradient of one time slice: (n, *m).

    Second-order central differences in the interior, second-order
    one-sided at boundary nodes (np.gradient with edge_order=2).
    """
    if not 0 <= t_index <= field.grid.nt:
        raise IndexError(f"t_index {t_index} out of range 0..{field.grid.nt}")
    sl = field.data[t_index]
    grads = np.gradient(sl, *field.grid.h, edge_order=2)
    if field.grid.n == 1:  # np.gradient returns a bare array for 1-D input
        grads = [grads]
    return np.stack(grads)


def gradient_all(field: ComplexField) -> VectorField:
    """Spatial gradient at every time level."""
    g = field.grid
    grads = np.gradient(field.data, *g.h, axis=tuple(range(1, g.n + 1)), edge_order=2)
    if g.n == 1:
        grads = [grads]
    return VectorField(g, np.stack(grads))


def laplacian_slice(field: ComplexField, t_index: int) -> np.ndarray:
    """5-point (n=2) / 7-point (n=3) Laplacian on interior nodes, 0 elsewhere."""
    if not 0 <= t_index <= field.grid.nt:
        raise IndexError(f"t_index {t_index} out of range 0..{field.grid.nt}")
    return laplacian_array(field.data[t_index], field.grid)


def laplacian_array(sl: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    out = np.zeros_like(sl, dtype=complex)
    core = grid.interior_slices()
    acc = np.zeros(tuple(mm - 2 for mm in grid.m), dtype=complex)
    for axis in range(grid.n):
        lo = list(core)
        hi = list(core)
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        acc += (sl[tuple(lo)] - 2.0 * sl[core] + sl[tuple(hi)]) / grid.h[axis] ** 2
    out[core] = acc
    return out


def normal_derivative(field: ComplexField) -> BoundaryTrace:
    """Outward normal derivative on every face, 3-point one-sided, O(h^2)."""
    g = field.grid
    faces = {}
    for face in g.faces():
        axis, side = face
        h = g.h[axis]
        u0 = field.data[(slice(None),) + _face_index(g, face, 0)]
        u1 = field.data[(slice(None),) + _face_index(g, face, 1)]
        u2 = field.data[(slice(None),) + _face_index(g, face, 2)]
        # derivative along the inward direction; nu points the other way
        d_in = (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * h)
        faces[face] = -d_in
    return BoundaryTrace(g, faces, None)


# ---------------------------------------------------------------------------
# quadrature


def _trapz_weights(npts: int, spacing: float) -> np.ndarray:
    w = np.full(npts, spacing)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def quadrature_spacetime(field: ComplexField | np.ndarray,
                         grid: SpaceTimeGrid | None = None) -> complex:
    """Composite trapezoid over (0,T) x Omega; exact on multilinear fields."""
    if isinstance(field, ComplexField):
        data, grid = field.data, field.grid
    else:
        data = np.asarray(field)
        if grid is None:
            raise ValueError("grid required for raw arrays")
    out = np.asarray(data, dtype=complex)
    out = np.tensordot(_trapz_weights(grid.nt + 1, grid.dt), out, axes=(0, 0))
    for k in range(grid.n):
        out = np.tensordot(_trapz_weights(grid.m[k], grid.h[k]), out, axes=(0, 0))
    return complex(out)


def quadrature_space(sl: np.ndarray, grid: SpaceTimeGrid) -> complex:
    """Trapezoid over Omega for a single spatial slice."""
    out = np.asarray(sl, dtype=complex)
    for k in range(grid.n):
        out = np.tensordot(_trapz_weights(grid.m[k], grid.h[k]), out, axes=(0, 0))
    return complex(out)


def quadrature_lateral(trace: BoundaryTrace) -> complex:
    """Trapezoid over Sigma = (0,T) x dOmega, face by face.

    Each face integral carries the tensor-product trapezoid weights of its
    own (time x tangential-axes) grid; faces are then summed.
    """
    g = trace.grid
    total = 0.0 + 0.0j
    wt = _trapz_weights(g.nt + 1, g.dt)
    for face, arr in trace.faces.items():
        axis, _ = face
        out = np.tensordot(wt, np.asarray(arr, dtype=complex), axes=(0, 0))
        for k in range(g.n):
            if k == axis:
                continue
            out = np.tensordot(_trapz_weights(g.m[k], g.h[k]), out, axes=(0, 0))
        total += complex(out)
    return total


def inner_spacetime(f: ComplexField | np.ndarray, gfield: ComplexField | np.ndarray,
                    grid: SpaceTimeGrid | None = None) -> complex:
    """Trapezoid-weighted L^2(Omega_T) inner product <f, g> = int f conj(g)."""
    fd = f.data if isinstance(f, ComplexField) else np.asarray(f)
    gd = gfield.data if isinstance(gfield, ComplexField) else np.asarray(gfield)
    if grid is None:
        grid = f.grid if isinstance(f, ComplexField) else gfield.grid
    return quadrature_spacetime(fd * np.conj(gd), grid)


def norm_l2_space(sl: np.ndarray, grid: SpaceTimeGrid) -> float:
    return math.sqrt(abs(quadrature_space(np.abs(sl) ** 2, grid)))


def norm_l2_spacetime(field: ComplexField | np.ndarray,
                      grid: SpaceTimeGrid | None = None) -> float:
    data = field.data if isinstance(field, ComplexField) else np.asarray(field)
    if grid is None:
        grid = field.grid
    return math.sqrt(abs(quadrature_spacetime(np.abs(data) ** 2, grid)))


def sup_t_l2(field: ComplexField | np.ndarray, grid: SpaceTimeGrid | None = None) -> float:
    """sup over time levels of the spatial L^2(Omega) norm."""
    data = field.data if isinstance(field, ComplexField) else np.asarray(field)
    if grid is None:
        grid = field.grid
    return max(norm_l2_space(data[k], grid) for k in range(grid.nt + 1))
