"""Evaluation of solved fields and export to VTK / CSV."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .assembly import SaddleSystem
from .discretization import U_FIELDS, X_FIELDS
from .errors import InvalidArgumentError, SingularGeometryError
from .geometry import surface_frame
from .linsolve import SolutionVector
from .shell_model import sym_curl
from .splines import eval_basis, nurbs_points


@dataclass(frozen=True)
class SolutionFields:
    system: SaddleSystem
    solution: SolutionVector

    @property
    def surface(self):
        return self.system.problem.surface

    def _coeffs(self, patch: int, fld: str, active: np.ndarray, block: str, fields: tuple[str, ...]) -> np.ndarray:
        dofs = self.system.dofs
        off = dofs.block_offsets(fields)[fld]
        g = dofs.gid[fld][patch][active]
        vec = self.solution.block(block)
        return np.where(g >= 0, vec[np.maximum(g, 0) + off], 0.0)

    def scalar(self, patch: int, fld: str, xi: Sequence[float], deriv: int = 0) -> np.ndarray:
        """Value (and first partials if ``deriv``) of one scalar field."""
        block, fields = ("u", U_FIELDS) if fld in U_FIELDS else ("x", X_FIELDS)
        be = eval_basis(self.system.dofs.spaces[patch], xi, deriv)
        c = self._coeffs(patch, fld, be.active_indices, block, fields)
        val = be.values @ c
        if deriv == 0:
            return np.asarray(val)
        return np.concatenate([[val], be.d1 @ c])

    def frame(self, patch: int, xi: Sequence[float]):
        _check_xi(xi)
        try:
            return surface_frame(self.surface.patches[patch], xi, third=False)
        except SingularGeometryError as exc:
            raise SingularGeometryError("cannot evaluate at a degenerate point", xi) from exc


def _check_xi(xi: Sequence[float]) -> None:
    if len(xi) != 2 or not all(0.0 <= float(x) <= 1.0 for x in xi):
        raise InvalidArgumentError(f"parametric point {xi} outside the unit square")


def displacement_at(sol: SolutionFields, patch: int, xi: Sequence[float]) -> np.ndarray:
    """Cartesian displacement ``u_i A^i``."""
    fr = sol.frame(patch, xi)
    comps = np.array([float(sol.scalar(patch, f, xi)) for f in U_FIELDS])
    return comps @ fr.contravariant


@dataclass(frozen=True)
class MomentValue:
    M: np.ndarray
    Mxx: float


def moment_at(sol: SolutionFields, patch: int, xi: Sequence[float]) -> MomentValue:
    """Bending moment ``M = p I + symCurl phi`` and its local Cartesian
    ``xx`` component with the area factor removed."""
    fr = sol.frame(patch, xi)
    p = sol.scalar(patch, "p", xi, 1)
    f1 = sol.scalar(patch, "phi1", xi, 1)
    f2 = sol.scalar(patch, "phi2", xi, 1)
    M = p[0] * np.eye(2) + sym_curl(np.array([f1[1:], f2[1:]]))
    ex = fr.A1 / np.linalg.norm(fr.A1)
    cart = np.einsum("ab,ai,bj->ij", M, np.array([fr.A1, fr.A2]), np.array([fr.A1, fr.A2]))
    return MomentValue(M, float(ex @ cart @ ex / fr.sqrtA))


def export_vtk(sol: SolutionFields, path: str | Path, resolution: int = 11) -> Path:
    """Legacy ASCII VTK unstructured grid of the undeformed midsurface with
    displacement components and the local moment ``Mxx`` as point data."""
    if resolution < 2:
        raise InvalidArgumentError("resolution must be at least 2")
    ts = np.linspace(0.0, 1.0, resolution)
    pts, data, cells = [], [], []
    for k, patch in enumerate(sol.surface.patches):
        base = len(pts)
        grid = np.array([(u, v) for v in ts for u in ts])
        xyz = nurbs_points(patch, grid)
        for xi, x in zip(grid, xyz):
            xi_eval = np.clip(xi, 1e-9, 1 - 1e-9)  # keep degenerate edges away
            d = displacement_at(sol, k, xi_eval)
            m = moment_at(sol, k, xi_eval).Mxx
            pts.append(x)
            data.append((*d, m))
        n = resolution
        for j in range(n - 1):
            for i in range(n - 1):
                a = base + i + n * j
                cells.append((a, a + 1, a + 1 + n, a + n))
    path = Path(path)
    data = np.array(data)
    lines = ["# vtk DataFile Version 3.0", "shell solution", "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {len(pts)} double")
    lines += [f"{x:.10e} {y:.10e} {z:.10e}" for x, y, z in pts]
    lines.append(f"CELLS {len(cells)} {5 * len(cells)}")
    lines += ["4 " + " ".join(map(str, c)) for c in cells]
    lines.append(f"CELL_TYPES {len(cells)}")
    lines += ["9"] * len(cells)
    lines.append(f"POINT_DATA {len(pts)}")
    for col, name in enumerate(("ux", "uy", "uz", "Mxx")):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [f"{v:.10e}" for v in data[:, col]]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc
    return path


def write_probe_csv(path: str | Path, rows: list[dict]) -> Path:
    """CSV with a header row; the probed quantity is the last column."""
    path = Path(path)
    if not rows:
        raise InvalidArgumentError("no rows to write")
    keys = [k for k in rows[0] if k != "probe"] + ["probe"]
    try:
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            for r in rows:
                w.writerow({k: r.get(k) for k in keys})
    except OSError as exc:
        raise OSError(f"cannot write CSV file {path}: {exc}") from exc
    return path
