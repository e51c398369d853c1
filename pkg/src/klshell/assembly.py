"""Quadrature-driven assembly of the mixed saddle-point systems.

Unknown blocks, in order: ``x = (p, phi1, phi2)``, optionally the membrane
force ``N = (N11, N22, N12)``, the displacements ``u = (u1, u2, u3)`` and the
multipliers (edge coupling rows followed by point constraints).

M-mixed::

    [ A   B^T  D^T ] [x]   [ 0 ]
    [ B  -C    G^T ] [u] = [-F ]
    [ D   G    0   ] [l]   [ 0 ]

M-N-mixed replaces ``-C`` by a mixed membrane part with blocks ``A_N`` and
``E`` (see :func:`assemble_mn_mixed`).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields
from enum import Enum

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import (
    U_FIELDS,
    X_FIELDS,
    BoundarySpec,
    DofMap,
    MultiplierSpace,
    build_dof_map,
    build_multiplier_space,
    edge_normal_tangent,
)
from .errors import InvalidArgumentError, InvalidSetupError, SingularGeometryError
from .geometry import GeometryFrame, MultiPatchSurface, edge_param_points, grid_frames, surface_frame
from .shell_model import MaterialParams, material_tensor, moment_rows, strain_operators
from .splines import KnotVector, TensorSpace, eval_1d, eval_basis, open_knot_vector, uniform_space


class Formulation(str, Enum):
    M_MIXED = "m"
    MN_MIXED = "mn"


class LoadKind(str, Enum):
    AREA = "area"
    EDGE_LINE = "edge_line"
    POINT = "point"


@dataclass(frozen=True)
class LoadSpec:
    """Cartesian load ``magnitude * direction``.

    ``direction`` may also be the string ``"normal"`` (along ``A3``) for
    point loads.  ``location`` is the parametric point of a point load;
    ``edge`` selects the loaded edge of an edge line load.  Area loads on
    ``patch=None`` act on every patch.
    """

    kind: LoadKind
    direction: tuple[float, float, float] | str
    magnitude: float
    patch: int | None = None
    location: tuple[float, float] | None = None
    edge: int | None = None

    def __post_init__(self) -> None:
        kind = LoadKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is LoadKind.POINT and (self.location is None or self.patch is None):
            raise InvalidSetupError("point loads need a patch and a parametric location")
        if kind is LoadKind.EDGE_LINE and (self.edge is None or self.patch is None):
            raise InvalidSetupError("edge line loads need a patch and an edge")


@dataclass
class ShellProblem:
    surface: MultiPatchSurface
    mat: MaterialParams
    bc: BoundarySpec
    loads: list[LoadSpec]
    formulation: Formulation = Formulation.M_MIXED
    degree: int = 2
    n_elements: int = 4
    n_elements_v: int | None = None

    def __post_init__(self) -> None:
        self.formulation = Formulation(self.formulation)
        if self.degree < 1 or self.n_elements < 1:
            raise InvalidArgumentError("degree and element count must be positive")
        for ld in self.loads:
            if ld.patch is not None and not 0 <= ld.patch < len(self.surface.patches):
                raise InvalidSetupError(f"load references missing patch {ld.patch}")

    def space(self) -> TensorSpace:
        p = self.degree
        ku = open_knot_vector(p, self.n_elements)
        kv = open_knot_vector(p, self.n_elements_v or self.n_elements)
        return TensorSpace(ku, kv)

    def membrane_spaces(self) -> tuple[TensorSpace, TensorSpace, TensorSpace]:
        """Spaces of (N11, N22, N12): one degree and one continuity lower in
        the first, second and both directions."""
        p = self.degree
        nu, nv = self.n_elements, self.n_elements_v or self.n_elements
        hi_u, hi_v = open_knot_vector(p, nu), open_knot_vector(p, nv)
        lo_u, lo_v = open_knot_vector(p - 1, nu, p - 2), open_knot_vector(p - 1, nv, p - 2)
        return TensorSpace(lo_u, hi_v), TensorSpace(hi_u, lo_v), TensorSpace(lo_u, lo_v)


@dataclass
class SaddleSystem:
    K: sp.csr_matrix
    rhs: np.ndarray
    blocks: dict[str, slice]
    parts: dict[str, sp.csr_matrix]
    dofs: DofMap
    mult: MultiplierSpace
    problem: ShellProblem
    n_membrane: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.K.shape[0]


# ---------------------------------------------------------------- quadrature


def gauss_rule(p: int) -> tuple[np.ndarray, np.ndarray]:
    """``p + 1`` Gauss-Legendre points and weights on [0, 1]."""
    if p < 1:
        raise InvalidArgumentError("gauss_rule needs p >= 1")
    x, w = np.polynomial.legendre.leggauss(p + 1)
    return 0.5 * (x + 1.0), 0.5 * w


def _axis_rule(breaks: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_rule(p)
    h = np.diff(breaks)
    return breaks[:-1, None] + h[:, None] * x, h[:, None] * w


@dataclass
class PatchQuadrature:
    """Tensor Gauss rule on the integration cells of one patch.

    Leading axes of all arrays are ``(cell, qp)`` with cells numbered
    ``cv * ncu + cu`` and points ``qv * nq + qu``.
    """

    xs_u: np.ndarray
    xs_v: np.ndarray
    weights: np.ndarray
    frame: GeometryFrame
    points: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape


def _regroup(a: np.ndarray, ncv: int, nqv: int, ncu: int, nqu: int) -> np.ndarray:
    tail = a.shape[2:]
    a = a.reshape((ncv, nqv, ncu, nqu) + tail)
    a = np.moveaxis(a, 2, 1)
    return a.reshape((ncv * ncu, nqv * nqu) + tail)


def patch_quadrature(surface: MultiPatchSurface, k: int, space: TensorSpace, p: int) -> PatchQuadrature:
    geom = surface.patches[k]
    bu = np.union1d(space.space_u.breaks, geom.space.space_u.breaks)
    bv = np.union1d(space.space_v.breaks, geom.space.space_v.breaks)
    xu, wu = _axis_rule(bu, p)
    xv, wv = _axis_rule(bv, p)
    ncu, nqu = xu.shape
    ncv, nqv = xv.shape
    pts, fr = grid_frames(geom, xu.ravel(), xv.ravel(), third=True)
    vals = {}
    for f in dc_fields(GeometryFrame):
        v = getattr(fr, f.name)
        vals[f.name] = None if v is None else _regroup(v, ncv, nqv, ncu, nqu)
    w = np.einsum("cq,dr->drcq", wu, wv)
    w = np.moveaxis(w, 2, 1).reshape(ncv * ncu, nqv * nqu)
    return PatchQuadrature(xu, xv, w, GeometryFrame(**vals), _regroup(pts, ncv, nqv, ncu, nqu))


@dataclass
class CellBasis:
    """Active functions per cell: ``ders[(du, dv)]`` has shape
    ``(cell, qp, n_local)``; ``ctrl`` maps ``(cell, n_local)`` to patch
    control indices."""

    ders: dict[tuple[int, int], np.ndarray]
    ctrl: np.ndarray

    @property
    def n_local(self) -> int:
        return self.ctrl.shape[1]

    def value(self) -> np.ndarray:
        return self.ders[(0, 0)]

    def grad(self) -> np.ndarray:
        return np.stack([self.ders[(1, 0)], self.ders[(0, 1)]], axis=-2)

    def hessian(self) -> np.ndarray:
        uu, uv, vv = self.ders[(2, 0)], self.ders[(1, 1)], self.ders[(0, 2)]
        return np.stack([np.stack([uu, uv], -2), np.stack([uv, vv], -2)], -3)


def _axis_basis(kv: KnotVector, xs: np.ndarray, n_ders: int) -> tuple[np.ndarray, np.ndarray]:
    nc, nq = xs.shape
    first, ders = eval_1d(kv, xs.ravel(), n_ders)
    first = first.reshape(nc, nq)
    if np.any(first != first[:, :1]):
        raise InvalidSetupError("integration cell straddles a knot span")
    return first[:, 0], ders.reshape(nc, nq, n_ders + 1, kv.degree + 1)


def cell_basis(space: TensorSpace, quad: PatchQuadrature, n_ders: int = 2) -> CellBasis:
    fu, Bu = _axis_basis(space.space_u, quad.xs_u, n_ders)
    fv, Bv = _axis_basis(space.space_v, quad.xs_v, n_ders)
    ncu, nqu, _, mu = Bu.shape
    ncv, nqv, _, mv = Bv.shape
    ders = {}
    for du in range(n_ders + 1):
        for dv in range(n_ders + 1 - du):
            t = np.einsum("cqj,drk->dcrqkj", Bu[:, :, du], Bv[:, :, dv])
            ders[(du, dv)] = t.reshape(ncv * ncu, nqv * nqu, mv * mu)
    iu = fu[:, None] + np.arange(mu)
    iv = fv[:, None] + np.arange(mv)
    ctrl = iu[None, :, None, :] + space.space_u.dim * iv[:, None, :, None]
    return CellBasis(ders, ctrl.reshape(ncv * ncu, mv * mu))


# ------------------------------------------------------------------ scatter


class _Triplets:
    def __init__(self) -> None:
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []

    def add(self, local: np.ndarray, rdofs: np.ndarray, cdofs: np.ndarray) -> None:
        """Scatter element matrices ``local[e, i, j]`` to ``(rdofs[e, i], cdofs[e, j])``,
        dropping eliminated (negative) indices."""
        ne, nr, nc = local.shape
        R = np.broadcast_to(rdofs[:, :, None], (ne, nr, nc)).ravel()
        C = np.broadcast_to(cdofs[:, None, :], (ne, nr, nc)).ravel()
        V = local.ravel()
        keep = (R >= 0) & (C >= 0) & (V != 0.0)
        self.rows.append(R[keep])
        self.cols.append(C[keep])
        self.vals.append(V[keep])

    def matrix(self, shape: tuple[int, int]) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix(shape)
        r = np.concatenate(self.rows)
        c = np.concatenate(self.cols)
        v = np.concatenate(self.vals)
        # ordered reduction: duplicates are summed in insertion order
        keys, inv = np.unique(r * np.int64(shape[1]) + c, return_inverse=True)
        data = np.bincount(inv, weights=v, minlength=keys.size)
        return sp.csr_matrix((data, (keys // shape[1], keys % shape[1])), shape=shape)


def _field_dofs(dofs: DofMap, k: int, fields: tuple[str, ...], ctrl: np.ndarray) -> np.ndarray:
    """Block indices of local functions (field-major) per cell."""
    off = dofs.block_offsets(fields)
    parts = []
    for f in fields:
        g = dofs.gid[f][k][ctrl]
        parts.append(np.where(g >= 0, g + off[f], -1))
    return np.concatenate(parts, axis=1)


# ------------------------------------------------------------------- blocks


def _sym(a: np.ndarray) -> np.ndarray:
    # bitwise symmetric element matrices keep the global matrix exactly symmetric
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _bending_blocks(problem: ShellProblem, dofs: DofMap, with_membrane: bool):
    """A (x-x), B (u-x) and optionally C (u-u) over all patches."""
    p = problem.degree
    nx, nu = dofs.n_x, dofs.n_u
    tA, tB, tC = _Triplets(), _Triplets(), _Triplets()
    for k in range(len(problem.surface.patches)):
        space = dofs.spaces[k]
        quad = patch_quadrature(problem.surface, k, space, p)
        cb = cell_basis(space, quad, 2)
        N, dN, d2N = cb.value(), cb.grad(), cb.hessian()
        fr = quad.frame
        mat = material_tensor(fr, problem.mat)
        ops = strain_operators(fr, N, dN, d2N)
        Mr = moment_rows(N, dN)
        xd = _field_dofs(dofs, k, X_FIELDS, cb.ctrl)
        if dofs.extras:
            # ring fields ride along as extra columns of every element
            xi = np.stack(np.meshgrid(quad.xs_u.ravel(), quad.xs_v.ravel()), -1)
            ncu, ncv = quad.xs_u.shape[0], quad.xs_v.shape[0]
            xi = _regroup(xi, ncv, quad.xs_v.shape[1], ncu, quad.xs_u.shape[1])
            ext = np.stack([f.values(xi) for f in dofs.extras], axis=-1)
            Mr = np.concatenate([Mr, ext], axis=-1)
            ids = dofs.extra_offset + np.arange(len(dofs.extras))
            xd = np.concatenate([xd, np.broadcast_to(ids, (xd.shape[0], ids.size))], axis=1)
        w = quad.weights
        n = cb.n_local
        A_e = np.einsum("eqIa,eqIJ,eqJb,eq->eab", Mr, mat.CM_inv, Mr, w, optimize=True)
        B_e = -np.einsum("eqIa,eqIb,eq->eab", ops.Bk1, Mr, w, optimize=True)
        B_e[:, 2 * n :, :n] += np.einsum("eqda,eqdb,eq->eab", dN, dN, w, optimize=True)
        ud = _field_dofs(dofs, k, U_FIELDS, cb.ctrl)
        tA.add(_sym(A_e), xd, xd)
        tB.add(B_e, ud, xd)
        if with_membrane:
            tw = (problem.mat.t * fr.sqrtA) * w
            C_e = np.einsum("eqIa,eqIJ,eqJb,eq->eab", ops.Bm, mat.C, ops.Bm, tw, optimize=True)
            tC.add(_sym(C_e), ud, ud)
    A = tA.matrix((nx, nx))
    B = tB.matrix((nu, nx))
    C = tC.matrix((nu, nu)) if with_membrane else None
    return A, B, C


def select_ring_fields(A: sp.csr_matrix, B: sp.csr_matrix, dofs: DofMap, rtol: float = 1e-8):
    """Drop ring fields already contained in the discrete moment range.

    Greedy Schur-complement test on the moment Gram matrix ``A``: a
    candidate is kept when its distance to the span of the potentials and
    the previously kept candidates is not negligible.
    """
    if not dofs.extras:
        return A, B
    n0 = dofs.extra_offset
    A = sp.csr_matrix(A)
    Axx = sp.csc_matrix(A[:n0, :n0])
    lu = spla.splu(Axx)
    cand = A[:n0, n0:].toarray()
    Acc = A[n0:, n0:].toarray()
    Y = lu.solve(cand)
    S = Acc - cand.T @ Y
    kept: list[int] = []
    for j in range(len(dofs.extras)):
        idx = kept + [j]
        Sj = S[np.ix_(idx, idx)]
        if kept:
            Skk = S[np.ix_(kept, kept)]
            dist = Sj[-1, -1] - Sj[-1, :-1] @ np.linalg.solve(Skk, Sj[:-1, -1])
        else:
            dist = Sj[-1, -1]
        if dist > rtol * Acc[j, j]:
            kept.append(j)
    keep_cols = np.concatenate([np.arange(n0), n0 + np.array(kept, dtype=int)])
    dofs.extras = [dofs.extras[j] for j in kept]
    return sp.csr_matrix(A[keep_cols][:, keep_cols]), sp.csr_matrix(B[:, keep_cols])


def _membrane_mixed_blocks(problem: ShellProblem, dofs: DofMap):
    """``A_N`` (N-N) and ``E`` (N-u) with the membrane-force unknowns numbered
    patch by patch, component-major."""
    p = problem.degree
    nspaces = problem.membrane_spaces()
    sizes = [s.dof_count for s in nspaces]
    per_patch = sum(sizes)
    npatch = len(problem.surface.patches)
    nN = per_patch * npatch
    tAN, tE = _Triplets(), _Triplets()
    for k in range(npatch):
        space = dofs.spaces[k]
        quad = patch_quadrature(problem.surface, k, space, p)
        cb = cell_basis(space, quad, 2)
        fr = quad.frame
        mat = material_tensor(fr, problem.mat)
        ops = strain_operators(fr, cb.value(), cb.grad(), cb.hessian())
        w = quad.weights
        ncell, nq = w.shape
        comps = [cell_basis(s, quad, 0) for s in nspaces]
        nloc = [c.n_local for c in comps]
        # rows of the Voigt vector N = (N11, N22, N12) per local coefficient
        P = np.zeros((ncell, nq, 3, sum(nloc)))
        cols = []
        start = 0
        for I, c in enumerate(comps):
            P[:, :, I, start : start + nloc[I]] = c.value()
            cols.append(c.ctrl + k * per_patch + sum(sizes[:I]))
            start += nloc[I]
        nd = np.concatenate(cols, axis=1)
        AN_e = np.einsum("eqIa,eqIJ,eqJb,eq->eab", P, mat.CN_inv, P, w, optimize=True)
        E_e = np.einsum("eqIa,eqIb,eq->eab", P, ops.Bm, w, optimize=True)
        tAN.add(_sym(AN_e), nd, nd)
        tE.add(E_e, nd, _field_dofs(dofs, k, U_FIELDS, cb.ctrl))
    return tAN.matrix((nN, nN)), tE.matrix((nN, dofs.n_u)), sizes


def coupling_matrix(problem: ShellProblem, dofs: DofMap, mult: MultiplierSpace) -> sp.csr_matrix:
    """Edge coupling rows ``D`` (multiplier test functions x ``x`` unknowns)."""
    p = problem.degree
    nx = dofs.n_x
    if mult.n_raw == 0:
        return sp.csr_matrix((0, nx))
    t = _Triplets()
    xg, wg = gauss_rule(p)
    for m in mult.edges:
        space = dofs.spaces[m.patch]
        kv_t = space.edge_knots(m.edge)
        n_vec, tau = edge_normal_tangent(m.edge)
        e_t = np.array([1.0, 0.0]) if m.edge in (0, 2) else np.array([0.0, 1.0])
        s_t = float(tau @ e_t)
        breaks = kv_t.breaks
        ts = (breaks[:-1, None] + np.diff(breaks)[:, None] * xg).ravel()
        ws = (np.diff(breaks)[:, None] * wg).ravel()
        fx, Bx = eval_1d(kv_t, ts, 1)
        fm, Bm = eval_1d(m.knots, ts, 0)
        edge_ctrl = space.edge_dofs(m.edge)
        for q in range(ts.size):
            ctrl = edge_ctrl[fx[q] : fx[q] + kv_t.degree + 1]
            val, dtau = Bx[q, 0], s_t * Bx[q, 1]
            mu = Bm[q, 0] * ws[q]
            mu_rows = fm[q] + np.arange(m.knots.degree + 1)
            blocks = [
                (m.off_n, {"p": val, "phi1": dtau * n_vec[0], "phi2": dtau * n_vec[1]}),
            ]
            if m.off_tau is not None:
                blocks.append((m.off_tau, {"phi1": dtau * tau[0], "phi2": dtau * tau[1]}))
            off = dofs.block_offsets(X_FIELDS)
            for j, rf in enumerate(dofs.extras):
                coef = rf.edge_normal_value(m.edge, np.array([ts[q]]))
                t.add(np.outer(mu, coef)[None], (m.off_n + mu_rows)[None], np.array([[dofs.extra_offset + j]]))
            for base, terms in blocks:
                for f, coef in terms.items():
                    g = dofs.gid[f][m.patch][ctrl]
                    cols = np.where(g >= 0, g + off[f], -1)
                    local = np.outer(mu, coef)[None]
                    t.add(local, (base + mu_rows)[None], cols[None])
    D_raw = t.matrix((mult.n_raw, nx))
    return sp.csr_matrix(mult.Z.T @ D_raw)


def prune_rows(D: sp.csr_matrix, rtol: float = 1e-10) -> sp.csr_matrix:
    """Keep a deterministic maximal independent subset of rows."""
    if D.shape[0] == 0:
        return D
    cols = np.unique(D.tocoo().col)
    dense = D[:, cols].toarray()
    _, R, piv = sla.qr(dense.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        return sp.csr_matrix((0, D.shape[1]))
    rank = int(np.sum(diag > rtol * diag[0]))
    keep = np.sort(piv[:rank])
    return sp.csr_matrix(D[keep])


def point_constraint_rows(problem: ShellProblem, dofs: DofMap) -> sp.csr_matrix:
    rows = []
    off = dofs.block_offsets(U_FIELDS)
    for pc in problem.bc.point_constraints:
        space = dofs.spaces[pc.patch]
        be = eval_basis(space, pc.xi, 0)
        f = U_FIELDS[pc.component]
        g = dofs.gid[f][pc.patch][be.active_indices]
        row = np.zeros(dofs.n_u)
        keep = g >= 0
        np.add.at(row, g[keep] + off[f], be.values[keep])
        if np.abs(row).max() > 0:
            rows.append(row)
    if not rows:
        return sp.csr_matrix((0, dofs.n_u))
    return sp.csr_matrix(np.array(rows))


# -------------------------------------------------------------------- loads


def _direction_vectors(load: LoadSpec, frame: GeometryFrame) -> np.ndarray:
    if isinstance(load.direction, str):
        if load.direction != "normal":
            raise InvalidSetupError(f"unknown load direction {load.direction!r}")
        return load.magnitude * frame.A3
    d = np.asarray(load.direction, dtype=float)
    return load.magnitude * np.broadcast_to(d, frame.A3.shape)


def assemble_load(problem: ShellProblem, dofs: DofMap) -> np.ndarray:
    """Load functional ``<F, v>`` on the displacement block."""
    F = np.zeros(dofs.n_u)
    p = problem.degree
    npatch = len(problem.surface.patches)
    for load in problem.loads:
        targets = range(npatch) if load.patch is None else [load.patch]
        for k in targets:
            space = dofs.spaces[k]
            if load.kind is LoadKind.AREA:
                quad = patch_quadrature(problem.surface, k, space, p)
                cb = cell_basis(space, quad, 0)
                fr = quad.frame
                f = _direction_vectors(load, fr)
                comp = np.einsum("eqd,eqid->eqi", f, fr.contravariant)
                local = np.einsum("eqi,eqj,eq->eij", comp, cb.value(), quad.weights * fr.sqrtA)
                _scatter_vec(F, local.reshape(local.shape[0], -1), _field_dofs(dofs, k, U_FIELDS, cb.ctrl))
            elif load.kind is LoadKind.EDGE_LINE:
                _edge_load(F, problem, dofs, k, load)
            else:
                try:
                    fr = surface_frame(problem.surface.patches[k], load.location, third=False)
                except SingularGeometryError as exc:
                    raise SingularGeometryError("point load at a degenerate point", load.location) from exc
                f = _direction_vectors(load, fr)
                comp = fr.contravariant @ f
                be = eval_basis(space, load.location, 0)
                local = np.outer(comp, be.values).reshape(1, -1)
                _scatter_vec(F, local, _field_dofs(dofs, k, U_FIELDS, be.active_indices[None]))
    return F


def _scatter_vec(F: np.ndarray, local: np.ndarray, idx: np.ndarray) -> None:
    keep = idx >= 0
    np.add.at(F, idx[keep], local[keep])


def _edge_load(F: np.ndarray, problem: ShellProblem, dofs: DofMap, k: int, load: LoadSpec) -> None:
    space = dofs.spaces[k]
    geom = problem.surface.patches[k]
    kv = space.edge_knots(load.edge)
    breaks = np.union1d(kv.breaks, geom.space.edge_knots(load.edge).breaks)
    xs, ws = _axis_rule(breaks, problem.degree)
    ts, ws = xs.ravel(), ws.ravel()
    pts = edge_param_points(load.edge, ts)
    for t, w, xi in zip(ts, ws, pts):
        fr = surface_frame(geom, xi, third=False)
        tangent = fr.A1 if load.edge in (0, 2) else fr.A2
        f = _direction_vectors(load, fr)
        comp = fr.contravariant @ f
        be = eval_basis(space, xi, 0)
        local = (w * np.linalg.norm(tangent)) * np.outer(comp, be.values).reshape(1, -1)
        _scatter_vec(F, local, _field_dofs(dofs, k, U_FIELDS, be.active_indices[None]))


# ------------------------------------------------------------------- system


def prepare(problem: ShellProblem) -> tuple[DofMap, MultiplierSpace]:
    space = problem.space()
    spaces = [space] * len(problem.surface.patches)
    dofs = build_dof_map(problem.surface, spaces, problem.bc)
    mult = build_multiplier_space(problem.surface, problem.bc, spaces)
    return dofs, mult


def _check_symmetric(K: sp.csr_matrix) -> None:
    diff = K - K.T
    if diff.nnz and np.abs(diff.data).max() != 0.0:
        raise AssertionError("assembled saddle matrix is not symmetric")


def _finish(problem, dofs, mult, A, B, Cuu, AN, E, rhs_u, n_sizes) -> SaddleSystem:
    D = prune_rows(coupling_matrix(problem, dofs, mult))
    G = point_constraint_rows(problem, dofs)
    nx, nu = dofs.n_x, dofs.n_u
    nN = 0 if AN is None else AN.shape[0]
    nd, ng = D.shape[0], G.shape[0]
    Z = None
    if AN is None:
        K = sp.bmat(
            [
                [A, B.T, D.T, None],
                [B, -Cuu, None, G.T],
                [D, None, sp.csr_matrix((nd, nd)), None],
                [None, G, None, sp.csr_matrix((ng, ng))],
            ],
            format="csr",
        )
    else:
        K = sp.bmat(
            [
                [A, None, B.T, D.T, None],
                [None, AN, -E, None, None],
                [B, -E.T, sp.csr_matrix((nu, nu)), None, G.T],
                [D, None, None, sp.csr_matrix((nd, nd)), None],
                [None, None, G, None, sp.csr_matrix((ng, ng))],
            ],
            format="csr",
        )
    K.sum_duplicates()
    K.eliminate_zeros()
    _check_symmetric(K)
    blocks = {}
    off = 0
    for name, size in (("x", nx), ("N", nN), ("u", nu), ("lambda", nd), ("pin", ng)):
        blocks[name] = slice(off, off + size)
        off += size
    rhs = np.zeros(off)
    rhs[blocks["u"]] = -rhs_u
    parts = {"A": A, "B": B, "D": D, "G": G}
    if Cuu is not None:
        parts["C"] = Cuu
    if AN is not None:
        parts["A_N"] = AN
        parts["E"] = E
    return SaddleSystem(K, rhs, blocks, parts, dofs, mult, problem, n_sizes or [])


def assemble_m_mixed(problem: ShellProblem, dofs: DofMap | None = None, mult: MultiplierSpace | None = None) -> SaddleSystem:
    if problem.formulation is not Formulation.M_MIXED:
        raise InvalidSetupError("problem is not set up for the M-mixed formulation")
    if dofs is None or mult is None:
        dofs, mult = prepare(problem)
    A, B, C = _bending_blocks(problem, dofs, with_membrane=True)
    A, B = select_ring_fields(A, B, dofs)
    F = assemble_load(problem, dofs)
    return _finish(problem, dofs, mult, A, B, C, None, None, F, None)


def assemble_mn_mixed(problem: ShellProblem, dofs: DofMap | None = None, mult: MultiplierSpace | None = None) -> SaddleSystem:
    """Membrane part mixed: ``(N, K)_{C_N^-1} - (K, eps(u)) = 0`` and
    ``-(N, eps(v))`` in the displacement rows; no displacement stiffness."""
    if problem.formulation is not Formulation.MN_MIXED:
        raise InvalidSetupError("problem is not set up for the M-N-mixed formulation")
    if problem.degree < 1:
        raise InvalidArgumentError("M-N-mixed needs p >= 1")
    if dofs is None or mult is None:
        dofs, mult = prepare(problem)
    A, B, _ = _bending_blocks(problem, dofs, with_membrane=False)
    A, B = select_ring_fields(A, B, dofs)
    AN, E, sizes = _membrane_mixed_blocks(problem, dofs)
    F = assemble_load(problem, dofs)
    return _finish(problem, dofs, mult, A, B, None, AN, E, F, [tuple(sizes)])


def assemble(problem: ShellProblem) -> SaddleSystem:
    dofs, mult = prepare(problem)
    if problem.formulation is Formulation.M_MIXED:
        return assemble_m_mixed(problem, dofs, mult)
    return assemble_mn_mixed(problem, dofs, mult)
