"""Finite-difference assembly of non-symmetric second-order elliptic operators.

Discretizes  A v = -( sum_ij d_i(a_ij d_j v) + sum_j b_j d_j v + c v )  on a
1D interval or 2D rectangle with homogeneous Dirichlet conditions, second-order
centered stencils, and midpoint averages of the diffusion coefficients.  The
sign convention matches the evolution problem d_t^alpha(u - a - bt) = -A u:
for vanishing advection and c the assembled matrix is the (positive) Dirichlet
Laplacian-type operator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EllipticityError

__all__ = [
    "Mesh",
    "CoefficientField",
    "DiscreteOperator",
    "assemble",
    "check_ellipticity",
    "subdomain_indices",
    "export_operator",
    "as_matrix",
]


@dataclass(frozen=True)
class Mesh:
    """Uniform grid on an interval or rectangle; unknowns live on interior nodes.

    ``interior`` counts nodes per axis (boundary nodes carry the Dirichlet
    condition and are eliminated).  Interior nodes are ordered x-fastest:
    in 2D the flat index of (ix, iy) is iy * nx + ix.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    interior: tuple[int, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or len(self.lo) != len(self.interior):
            raise ValueError("lo, hi and interior must have matching lengths")
        if self.dimension not in (1, 2):
            raise ValueError(f"only 1D and 2D meshes are supported, got {self.dimension}D")
        for lo, hi in zip(self.lo, self.hi):
            if not hi > lo:
                raise ValueError(f"degenerate axis [{lo}, {hi}]")
        for n in self.interior:
            if n < 2:
                raise ValueError(f"need at least 2 interior nodes per axis, got {n}")

    @property
    def dimension(self) -> int:
        return len(self.interior)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(
            (hi - lo) / (n + 1) for lo, hi, n in zip(self.lo, self.hi, self.interior)
        )

    @property
    def size(self) -> int:
        return int(np.prod(self.interior))

    def axis_nodes(self, axis: int, with_boundary: bool = False) -> np.ndarray:
        n = self.interior[axis]
        full = np.linspace(self.lo[axis], self.hi[axis], n + 2)
        return full if with_boundary else full[1:-1]

    def interior_coordinates(self) -> tuple[np.ndarray, ...]:
        """Per-axis coordinate arrays of the N interior nodes, in flat ordering."""
        if self.dimension == 1:
            return (self.axis_nodes(0),)
        x = self.axis_nodes(0)
        y = self.axis_nodes(1)
        xx, yy = np.meshgrid(x, y)  # shape (ny, nx), x fastest in flat order
        return xx.ravel(), yy.ravel()


def _full_grids(mesh: Mesh) -> tuple[np.ndarray, ...]:
    if mesh.dimension == 1:
        return (mesh.axis_nodes(0, with_boundary=True),)
    x = mesh.axis_nodes(0, with_boundary=True)
    y = mesh.axis_nodes(1, with_boundary=True)
    return np.meshgrid(x, y)  # (ny+2, nx+2)


def _sample(fn, grids) -> np.ndarray:
    if callable(fn):
        vals = np.asarray(fn(*grids), dtype=float)
        return np.broadcast_to(vals, grids[0].shape).copy()
    return np.full(grids[0].shape, float(fn))


@dataclass
class CoefficientField:
    """Coefficient samples on the full grid (boundary nodes included).

    Diffusion samples are needed at boundary-adjacent midpoints, hence the full
    grid.  ``a12`` is stored once (the matrix is symmetric by construction).
    """

    mesh: Mesh
    a11: np.ndarray
    a22: np.ndarray | None = None
    a12: np.ndarray | None = None
    b1: np.ndarray | None = None
    b2: np.ndarray | None = None
    c: np.ndarray | None = None
    description: str = "samples"

    def __post_init__(self):
        grids = _full_grids(self.mesh)
        shape = grids[0].shape
        d = self.mesh.dimension

        def fix(arr, default):
            if arr is None:
                return np.full(shape, float(default))
            arr = np.asarray(arr, dtype=float)
            if arr.shape != shape:
                raise ValueError(
                    f"coefficient samples must have full-grid shape {shape}, got {arr.shape}"
                )
            return arr

        self.a11 = fix(self.a11, 1.0)
        self.b1 = fix(self.b1, 0.0)
        self.c = fix(self.c, 0.0)
        if d == 2:
            self.a22 = fix(self.a22, 1.0)
            self.a12 = fix(self.a12, 0.0)
            self.b2 = fix(self.b2, 0.0)
        else:
            for name in ("a22", "a12", "b2"):
                if getattr(self, name) is not None:
                    raise ValueError(f"{name} is meaningless on a 1D mesh")

    @classmethod
    def from_callables(
        cls,
        mesh: Mesh,
        a11=1.0,
        a22=1.0,
        a12=0.0,
        b1=0.0,
        b2=0.0,
        c=0.0,
        description: str = "callables",
    ) -> "CoefficientField":
        """Sample scalar constants or callables fn(x) / fn(x, y) on the full grid."""
        grids = _full_grids(mesh)
        kw = dict(a11=_sample(a11, grids), b1=_sample(b1, grids), c=_sample(c, grids))
        if mesh.dimension == 2:
            kw.update(
                a22=_sample(a22, grids), a12=_sample(a12, grids), b2=_sample(b2, grids)
            )
        return cls(mesh, description=description, **kw)

    def has_advection(self) -> bool:
        vals = [self.b1] + ([self.b2] if self.b2 is not None else [])
        return any(np.any(v != 0.0) for v in vals)


def check_ellipticity(coeffs: CoefficientField) -> float:
    """Minimum over nodes of the smallest eigenvalue of the diffusion matrix.

    Closed form for d <= 2: in 1D this is min a11; in 2D the smaller root of
    the 2x2 symmetric eigenproblem at each node.
    """
    if coeffs.mesh.dimension == 1:
        return float(np.min(coeffs.a11))
    tr = 0.5 * (coeffs.a11 + coeffs.a22)
    disc = np.sqrt((0.5 * (coeffs.a11 - coeffs.a22)) ** 2 + coeffs.a12**2)
    return float(np.min(tr - disc))


@dataclass
class DiscreteOperator:
    """Dense matrix form of A acting on interior-node vectors."""

    matrix: np.ndarray = field(repr=False)
    mesh: Mesh
    coefficients: CoefficientField = field(repr=False)

    def __post_init__(self):
        n = self.mesh.size
        if self.matrix.shape != (n, n):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match mesh size {n}"
            )

    @property
    def size(self) -> int:
        return self.mesh.size


def as_matrix(A) -> np.ndarray:
    """Accept a DiscreteOperator or a plain square array."""
    mat = A.matrix if isinstance(A, DiscreteOperator) else np.asarray(A)
    mat = np.atleast_2d(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    return mat


def _assemble_1d(mesh: Mesh, coeffs: CoefficientField) -> np.ndarray:
    n = mesh.interior[0]
    h = mesh.spacing[0]
    a = coeffs.a11  # full grid, length n+2
    amid = 0.5 * (a[:-1] + a[1:])  # a at midpoints, length n+1
    b = coeffs.b1[1:-1]
    c = coeffs.c[1:-1]
    R = np.zeros((n, n))
    idx = np.arange(n)
    R[idx, idx] = -(amid[1:] + amid[:-1]) / h**2 + c
    R[idx[:-1], idx[:-1] + 1] = amid[1:-1] / h**2 + b[:-1] / (2 * h)
    R[idx[1:], idx[1:] - 1] = amid[1:-1] / h**2 - b[1:] / (2 * h)
    return -R


def _diff_matrices_2d(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Centered first-difference matrices (Dirichlet) on the flat ordering."""
    nx, ny = mesh.interior
    hx, hy = mesh.spacing
    N = nx * ny
    Dx = np.zeros((N, N))
    Dy = np.zeros((N, N))
    for iy in range(ny):
        for ix in range(nx):
            row = iy * nx + ix
            if ix + 1 < nx:
                Dx[row, row + 1] = 1.0 / (2 * hx)
            if ix - 1 >= 0:
                Dx[row, row - 1] = -1.0 / (2 * hx)
            if iy + 1 < ny:
                Dy[row, row + nx] = 1.0 / (2 * hy)
            if iy - 1 >= 0:
                Dy[row, row - nx] = -1.0 / (2 * hy)
    return Dx, Dy


def _assemble_2d(mesh: Mesh, coeffs: CoefficientField) -> np.ndarray:
    nx, ny = mesh.interior
    hx, hy = mesh.spacing
    N = nx * ny
    R = np.zeros((N, N))

    a11, a22, a12 = coeffs.a11, coeffs.a22, coeffs.a12  # (ny+2, nx+2)
    # divergence-form principal part, midpoint coefficient averages
    for iy in range(ny):
        for ix in range(nx):
            row = iy * nx + ix
            gx, gy = ix + 1, iy + 1  # full-grid indices
            axp = 0.5 * (a11[gy, gx] + a11[gy, gx + 1])
            axm = 0.5 * (a11[gy, gx] + a11[gy, gx - 1])
            ayp = 0.5 * (a22[gy, gx] + a22[gy + 1, gx])
            aym = 0.5 * (a22[gy, gx] + a22[gy - 1, gx])
            R[row, row] += -(axp + axm) / hx**2 - (ayp + aym) / hy**2
            if ix + 1 < nx:
                R[row, row + 1] += axp / hx**2
            if ix - 1 >= 0:
                R[row, row - 1] += axm / hx**2
            if iy + 1 < ny:
                R[row, row + nx] += ayp / hy**2
            if iy - 1 >= 0:
                R[row, row - nx] += aym / hy**2

    interior_slice = (slice(1, -1), slice(1, -1))
    if np.any(a12[interior_slice] != 0.0):
        # mixed terms d_x(a12 d_y v) + d_y(a12 d_x v) as Dx L Dy + Dy L Dx with
        # L = diag(a12 at interior nodes); Dx, Dy are antisymmetric, so the
        # mixed block is exactly symmetric
        Dx, Dy = _diff_matrices_2d(mesh)
        lam = a12[interior_slice].ravel()
        R += Dx @ (lam[:, None] * Dy) + Dy @ (lam[:, None] * Dx)

    b1 = coeffs.b1[interior_slice].ravel()
    b2 = coeffs.b2[interior_slice].ravel()
    if np.any(b1 != 0.0) or np.any(b2 != 0.0):
        Dx, Dy = _diff_matrices_2d(mesh)
        R += b1[:, None] * Dx + b2[:, None] * Dy

    R[np.diag_indices(N)] += coeffs.c[interior_slice].ravel()
    return -R


def assemble(mesh: Mesh, coeffs: CoefficientField) -> DiscreteOperator:
    """Assemble the dense interior-node matrix of A.

    Raises :class:`EllipticityError` if the diffusion matrix is not uniformly
    positive definite over the sampled nodes.
    """
    if coeffs.mesh != mesh:
        raise ValueError("coefficient field was sampled on a different mesh")
    eps0 = check_ellipticity(coeffs)
    if not eps0 > 0.0:
        raise EllipticityError(
            f"diffusion matrix is not uniformly elliptic: min eigenvalue {eps0:.6g}"
        )
    mat = _assemble_1d(mesh, coeffs) if mesh.dimension == 1 else _assemble_2d(mesh, coeffs)
    return DiscreteOperator(mat, mesh, coeffs)


def subdomain_indices(mesh: Mesh, box) -> np.ndarray:
    """Indices (ascending) of interior nodes inside a sub-box.

    ``box`` is (lo, hi) in 1D or ((lox, hix), (loy, hiy)) in 2D; membership is
    by closed-interval coordinate test with a small relative tolerance.
    Raises ValueError when the box misses every interior node.
    """
    if mesh.dimension == 1:
        boxes = (tuple(box),) if np.ndim(box[0]) == 0 else tuple(box)
    else:
        boxes = tuple(tuple(b) for b in box)
    if len(boxes) != mesh.dimension:
        raise ValueError(f"box spec has {len(boxes)} axes, mesh has {mesh.dimension}")
    coords = mesh.interior_coordinates()
    mask = np.ones(mesh.size, dtype=bool)
    for axis, ((blo, bhi), xs) in enumerate(zip(boxes, coords)):
        if not bhi > blo:
            raise ValueError(f"degenerate box on axis {axis}: [{blo}, {bhi}]")
        tol = 1e-12 * max(1.0, abs(mesh.hi[axis] - mesh.lo[axis]))
        mask &= (xs >= blo - tol) & (xs <= bhi + tol)
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        raise ValueError(f"sub-box {boxes} contains no interior node")
    return idx


def export_operator(op: DiscreteOperator, basepath: str) -> tuple[str, str]:
    """Write a JSON header and a (row, col, value) coordinate-list text file."""
    header = {
        "dimension": op.mesh.dimension,
        "size": op.size,
        "spacing": list(op.mesh.spacing),
        "domain_lo": list(op.mesh.lo),
        "domain_hi": list(op.mesh.hi),
        "interior": list(op.mesh.interior),
        "coefficients": op.coefficients.description,
    }
    json_path = f"{basepath}.json"
    coo_path = f"{basepath}.coo"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(coo_path, "w", encoding="utf-8") as fh:
        rows, cols = np.nonzero(op.matrix)
        for r, c in zip(rows, cols):
            fh.write(f"{r} {c} {op.matrix[r, c]:.17g}\n")
    return json_path, coo_path
