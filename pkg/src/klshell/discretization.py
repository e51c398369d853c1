"""Degrees of freedom: C0 gluing, essential conditions and the boundary
multiplier space that enforces the coupling between ``p`` and ``phi``.

Fields are ``u1, u2, u3`` (covariant displacement components) and
``p, phi1, phi2`` (bending-moment potentials), all discretized in the same
tensor space per patch.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import InvalidArgumentError, InvalidSetupError, UnsupportedError
from .geometry import MultiPatchSurface, edge_normal_tangent, edge_param_points, edge_vertex
from .splines import KnotVector, TensorSpace, nurbs_points, open_knot_vector

U_FIELDS = ("u1", "u2", "u3")
X_FIELDS = ("p", "phi1", "phi2")
FIELDS = X_FIELDS + U_FIELDS


class EdgeCondition(str, Enum):
    CLAMPED = "clamped"
    SIMPLY_SUPPORTED = "simply_supported"
    FREE = "free"
    INTERFACE = "interface"


@dataclass(frozen=True)
class PointConstraint:
    """Homogeneous constraint ``u_component(xi) = 0`` on one patch.

    Used to remove rigid-body modes that the edge conditions leave open
    (e.g. torsion of the pole-fixed hemisphere); placed on symmetry points
    so the constrained value vanishes in the exact solution anyway.
    """

    patch: int
    xi: tuple[float, float]
    component: int


@dataclass
class BoundarySpec:
    conditions: dict[tuple[int, int], EdgeCondition]
    point_constraints: list[PointConstraint] = field(default_factory=list)

    @classmethod
    def uniform(cls, surface: MultiPatchSurface, condition: EdgeCondition | str) -> "BoundarySpec":
        cond = EdgeCondition(condition)
        return cls({key: cond for key in surface.boundary_edges()})

    def with_overrides(self, overrides: list[dict]) -> "BoundarySpec":
        conds = dict(self.conditions)
        for o in overrides:
            conds[(int(o["patch"]), int(o["edge"]))] = EdgeCondition(o["condition"])
        return BoundarySpec(conds, list(self.point_constraints))

    def validate(self, surface: MultiPatchSurface) -> None:
        expected = set(surface.boundary_edges())
        given = {k for k, v in self.conditions.items() if v is not EdgeCondition.INTERFACE}
        if given != expected:
            missing = sorted(expected - given)
            extra = sorted(given - expected)
            raise InvalidSetupError(f"boundary spec mismatch: missing {missing}, not on boundary {extra}")

    def of(self, patch: int, edge: int) -> EdgeCondition:
        return self.conditions.get((patch, edge), EdgeCondition.INTERFACE)


def edge_ctrl_indices(space: TensorSpace, edge: int, layers: int = 1) -> np.ndarray:
    """Control indices of the first ``layers`` rows adjacent to an edge."""
    nu, nv = space.shape
    out = []
    for k in range(layers):
        if edge == 0:
            out.append(space.index(np.arange(nu), k))
        elif edge == 1:
            out.append(space.index(nu - 1 - k, np.arange(nv)))
        elif edge == 2:
            out.append(space.index(np.arange(nu), nv - 1 - k))
        else:
            out.append(space.index(k, np.arange(nv)))
    return np.concatenate(out)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


@dataclass
class DofMap:
    """Global numbering of all scalar fields.

    ``raw[k]`` maps patch ``k`` control indices to glued ids (shared across
    fields); ``gid[f][k]`` maps them to the free index of field ``f`` or -1.
    """

    spaces: list[TensorSpace]
    raw: list[np.ndarray]
    n_raw: int
    gid: dict[str, list[np.ndarray]]
    n_free: dict[str, int]
    eliminated: dict[str, set[int]]
    extras: list["RingField"] = field(default_factory=list)

    def block_offsets(self, fields: tuple[str, ...]) -> dict[str, int]:
        off, out = 0, {}
        for f in fields:
            out[f] = off
            off += self.n_free[f]
        return out

    @property
    def n_x(self) -> int:
        return sum(self.n_free[f] for f in X_FIELDS) + len(self.extras)

    @property
    def extra_offset(self) -> int:
        """Position of the first ring field inside the x block."""
        return sum(self.n_free[f] for f in X_FIELDS)

    @property
    def n_u(self) -> int:
        return sum(self.n_free[f] for f in U_FIELDS)

    def local_to_block(self, patch: int, fields: tuple[str, ...]) -> np.ndarray:
        """Block index (or -1) for every (field, control) pair of one patch,
        ordered field-major."""
        off = self.block_offsets(fields)
        parts = []
        for f in fields:
            g = self.gid[f][patch]
            parts.append(np.where(g >= 0, g + off[f], -1))
        return np.concatenate(parts)


def glue(surface: MultiPatchSurface, spaces: list[TensorSpace]) -> tuple[list[np.ndarray], int]:
    """Identify control points shared across interfaces (C0 gluing)."""
    sizes = [s.dof_count for s in spaces]
    starts = np.concatenate([[0], np.cumsum(sizes)])
    uf = _UnionFind(int(starts[-1]))
    for itf in surface.interfaces:
        sa, sb = spaces[itf.patch_a], spaces[itf.patch_b]
        ka, kb = sa.edge_knots(itf.edge_a), sb.edge_knots(itf.edge_b)
        if ka.degree != kb.degree or not np.allclose(ka.array, kb.array if not itf.reversed else 1 - kb.array[::-1]):
            raise UnsupportedError(f"nonconforming interface {itf}")
        da = sa.edge_dofs(itf.edge_a)
        db = sb.edge_dofs(itf.edge_b)
        if itf.reversed:
            db = db[::-1]
        for a, b in zip(da, db):
            uf.union(int(starts[itf.patch_a] + a), int(starts[itf.patch_b] + b))
    roots = np.array([uf.find(i) for i in range(int(starts[-1]))])
    _, ids = np.unique(roots, return_inverse=True)
    raw = [ids[starts[k] : starts[k + 1]] for k in range(len(spaces))]
    return raw, int(ids.max()) + 1


def _tangential_component(edge: int) -> int:
    """Displacement component tangential to an edge (0 -> u1, 1 -> u2)."""
    return 0 if edge in (0, 2) else 1


def symcurl_kernel(surface: MultiPatchSurface, spaces: list[TensorSpace], raw: list[np.ndarray], n_raw: int) -> np.ndarray:
    """Basis of glued ``phi`` coefficient vectors with vanishing symCurl.

    Per patch the kernel is spanned by constants and ``(xi1, xi2)``; the
    glued kernel keeps the combinations that agree on shared controls.
    Returns shape ``(k, 2, n_raw)``.
    """
    npatch = len(spaces)
    local = []
    for s in spaces:
        gu, gv = s.space_u.greville(), s.space_v.greville()
        G1 = np.tile(gu, s.shape[1])
        G2 = np.repeat(gv, s.shape[0])
        # columns: (c1, c2, k) ; rows: comp-major phi values
        m = np.zeros((2, s.dof_count, 3))
        m[0, :, 0] = 1.0
        m[1, :, 1] = 1.0
        m[0, :, 2] = G1
        m[1, :, 2] = G2
        local.append(m)
    owners = defaultdict(list)
    for k in range(npatch):
        for i, r in enumerate(raw[k]):
            owners[int(r)].append((k, i))
    rows = []
    for r, own in owners.items():
        (k0, i0) = own[0]
        for k1, i1 in own[1:]:
            for c in range(2):
                row = np.zeros(3 * npatch)
                row[3 * k0 : 3 * k0 + 3] += local[k0][c, i0]
                row[3 * k1 : 3 * k1 + 3] -= local[k1][c, i1]
                rows.append(row)
    if rows:
        null = sla.null_space(np.array(rows), rcond=1e-10)
    else:
        null = np.eye(3 * npatch)
    out = np.zeros((null.shape[1], 2, n_raw))
    for j in range(null.shape[1]):
        for k in range(npatch):
            vals = local[k] @ null[3 * k : 3 * k + 3, j]
            out[j, :, raw[k]] = vals.T
    return out


def _choose_gauge(kernel: np.ndarray) -> list[tuple[int, int]]:
    """Pick (component, raw id) pairs that fix the symCurl kernel."""
    k = kernel.shape[0]
    if k == 0:
        return []
    chosen: list[tuple[int, int]] = []
    rows = []
    n_raw = kernel.shape[2]
    scale = np.abs(kernel).max()
    for r in range(n_raw):
        for c in range(2):
            cand = rows + [kernel[:, c, r]]
            if np.linalg.matrix_rank(np.array(cand), tol=1e-8 * scale) == len(cand):
                rows = cand
                chosen.append((c, r))
                if len(chosen) == k:
                    return chosen
    raise InvalidSetupError("could not fix the symCurl kernel")


def build_dof_map(
    surface: MultiPatchSurface,
    spaces: list[TensorSpace] | TensorSpace,
    bc: BoundarySpec,
    gauge: bool = True,
    ring_fields: bool = True,
) -> DofMap:
    """Glue, eliminate essential conditions and fix the symCurl gauge.

    With ``ring_fields`` the candidate moment fields of a closed patch ring
    are attached; assembly later keeps only those that are not already in
    the discrete range (see :func:`ring_candidates`).
    """
    if isinstance(spaces, TensorSpace):
        spaces = [spaces] * len(surface.patches)
    bc.validate(surface)
    raw, n_raw = glue(surface, spaces)
    elim: dict[str, set[int]] = {f: set() for f in FIELDS}
    for (k, e), cond in bc.conditions.items():
        if cond is EdgeCondition.INTERFACE:
            continue
        ids = set(raw[k][spaces[k].edge_dofs(e)].tolist())
        if cond is EdgeCondition.CLAMPED:
            for f in U_FIELDS + ("p",):
                elim[f] |= ids
        elif cond is EdgeCondition.SIMPLY_SUPPORTED:
            elim[U_FIELDS[_tangential_component(e)]] |= ids
            elim["u3"] |= ids
            elim["p"] |= ids
    if gauge:
        kern = symcurl_kernel(surface, spaces, raw, n_raw)
        for c, r in _choose_gauge(kern):
            elim[("phi1", "phi2")[c]].add(r)
    gid, n_free = {}, {}
    for f in FIELDS:
        mask = np.ones(n_raw, dtype=bool)
        mask[list(elim[f])] = False
        num = np.full(n_raw, -1)
        num[mask] = np.arange(mask.sum())
        gid[f] = [num[r] for r in raw]
        n_free[f] = int(mask.sum())
    extras = ring_candidates(surface, bc) if ring_fields else []
    return DofMap(spaces, raw, n_raw, gid, n_free, elim, extras)


# ------------------------------------------------------------- patch rings


@dataclass(frozen=True)
class RingField:
    """Moment field on a closed ring of patches.

    On a parametric annulus ``p I + symCurl phi`` with single-valued ``phi``
    misses the fields generated by a ``phi`` that jumps by an element of the
    symCurl kernel around the ring.  Modulo that range they are the constant
    and the linear profile of the moment component along the ring
    direction: ``M22 = 1`` and ``M22 = xi2`` when the ring closes in ``xi1``
    (``M11`` with ``xi1`` when it closes in ``xi2``).
    """

    axis: int
    linear: bool

    @property
    def voigt_index(self) -> int:
        return 1 if self.axis == 0 else 0

    def values(self, xi: np.ndarray) -> np.ndarray:
        """Voigt moment vectors at parameter points ``xi[..., 2]``."""
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape[:-1] + (3,))
        across = xi[..., 1 - self.axis]
        out[..., self.voigt_index] = across if self.linear else 1.0
        return out

    def edge_normal_value(self, edge: int, t: np.ndarray) -> np.ndarray:
        """``n . M n`` along a boundary edge parallel to the ring."""
        if (edge in (0, 2)) != (self.axis == 0):
            return np.zeros_like(np.asarray(t, dtype=float))
        return self.values(edge_param_points(edge, t))[..., self.voigt_index]


def find_ring(surface: MultiPatchSurface) -> int | None:
    """Parametric direction in which all patches close into one ring."""
    n = len(surface.patches)
    for axis, (lo, hi) in enumerate(((3, 1), (0, 2))):
        succ = {}
        for itf in surface.interfaces:
            if itf.reversed:
                continue
            if (itf.edge_a, itf.edge_b) == (hi, lo):
                succ[itf.patch_a] = itf.patch_b
            elif (itf.edge_a, itf.edge_b) == (lo, hi):
                succ[itf.patch_b] = itf.patch_a
        k, seen = 0, []
        while k in succ and k not in seen:
            seen.append(k)
            k = succ[k]
        if k == 0 and len(seen) == n:
            return axis
    return None


def ring_candidates(surface: MultiPatchSurface, bc: BoundarySpec) -> list[RingField]:
    axis = find_ring(surface)
    if axis is None:
        return []
    along = (0, 2) if axis == 0 else (1, 3)
    free_along = any(
        bc.of(k, e) is EdgeCondition.FREE for k, e in surface.boundary_edges() if e in along
    )
    out = [RingField(axis, False)]
    # the linear field has a multivalued tangential trace on free edges
    if not free_along:
        out.append(RingField(axis, True))
    return out


# ---------------------------------------------------------------- multipliers


def multiplier_knots(space_1d: KnotVector) -> KnotVector:
    """Degree p-1 space on the element partition of a degree p space,
    with maximal smoothness."""
    p = space_1d.degree
    if p < 1:
        raise InvalidArgumentError("multipliers need degree >= 1")
    return open_knot_vector(p - 1, space_1d.n_elements, p - 2)


@dataclass
class MultiplierEdge:
    patch: int
    edge: int
    condition: EdgeCondition
    knots: KnotVector
    off_n: int
    off_tau: int | None

    def ccw_end_t(self, which: str) -> float:
        """Edge parameter of the counterclockwise start or end vertex."""
        forward = self.edge in (0, 1)
        if which == "start":
            return 0.0 if forward else 1.0
        return 1.0 if forward else 0.0

    def coef_at(self, t: float) -> int:
        return 0 if t == 0.0 else self.knots.dim - 1


@dataclass
class MultiplierSpace:
    """Test functions ``(mu_tau, mu_n)`` on simply supported / free edges.

    Raw coefficients live per edge; ``Z`` maps reduced multiplier
    coordinates to raw coefficients, encoding corner coupling, continuity at
    patch junctions and the integrability of ``mu_tau`` along free chains.
    """

    edges: list[MultiplierEdge]
    n_raw: int
    Z: sp.csr_matrix

    @property
    def size(self) -> int:
        return self.Z.shape[1]


def _vertex_point(surface: MultiPatchSurface, patch: int, edge: int, t: float) -> np.ndarray:
    xi = np.array([edge_vertex(edge, int(t))])
    return nurbs_points(surface.patches[patch], xi)[0]


def build_multiplier_space(surface: MultiPatchSurface, bc: BoundarySpec, spaces: list[TensorSpace] | TensorSpace) -> MultiplierSpace:
    if isinstance(spaces, TensorSpace):
        spaces = [spaces] * len(surface.patches)
    bnd = surface.boundary_edges()
    edges: list[MultiplierEdge] = []
    off = 0
    for k, e in bnd:
        cond = bc.of(k, e)
        if cond not in (EdgeCondition.SIMPLY_SUPPORTED, EdgeCondition.FREE):
            continue
        kv = multiplier_knots(spaces[k].edge_knots(e))
        off_n = off
        off += kv.dim
        off_tau = None
        if cond is EdgeCondition.FREE:
            off_tau = off
            off += kv.dim
        edges.append(MultiplierEdge(k, e, cond, kv, off_n, off_tau))
    n_raw = off
    if n_raw == 0:
        return MultiplierSpace(edges, 0, sp.csr_matrix((0, 0)))
    by_key = {(m.patch, m.edge): m for m in edges}
    scale = surface.scale

    # successor of every boundary edge along the counterclockwise traversal
    def ccw(k: int, e: int, which: str) -> np.ndarray:
        forward = e in (0, 1)
        t = (0.0 if forward else 1.0) if which == "start" else (1.0 if forward else 0.0)
        return _vertex_point(surface, k, e, t)

    starts = {(k, e): ccw(k, e, "start") for k, e in bnd}
    successor = {}
    for k, e in bnd:
        end = ccw(k, e, "end")
        cands = [key for key, s in starts.items() if key != (k, e) and np.linalg.norm(s - end) < 1e-9 * scale]
        same = [c for c in cands if c[0] == k]
        if same:
            successor[(k, e)] = (same[0], True)
        elif cands:
            successor[(k, e)] = (cands[0], False)

    # signed identifications between raw coefficients; None marks "zero"
    links: list[tuple[int, int | None, float]] = []

    def tie(group: list[tuple[int, float]], zero: bool) -> None:
        if not group:
            return
        if zero:
            for a, _ in group:
                links.append((a, None, 1.0))
            return
        a0, s0 = group[0]
        for a, s in group[1:]:
            links.append((a, a0, s * s0))

    chain_links: list[tuple[MultiplierEdge, MultiplierEdge]] = []
    clamped = EdgeCondition.CLAMPED
    ss = EdgeCondition.SIMPLY_SUPPORTED
    free = EdgeCondition.FREE
    for (k, e), (nxt, corner) in successor.items():
        ce, cf = bc.of(k, e), bc.of(*nxt)
        me, mf = by_key.get((k, e)), by_key.get(nxt)
        if me is None and mf is None:
            continue
        if ce is free and cf is free and me is not None and mf is not None:
            chain_links.append((me, mf))
        if edges[0].knots.degree < 1:
            continue  # piecewise constant multipliers carry no point values
        ie = me.coef_at(me.ccw_end_t("end")) if me else None
        if_ = mf.coef_at(mf.ccw_end_t("start")) if mf else None
        if corner:
            ne, te = edge_normal_tangent(e)
            nf, tf = edge_normal_tangent(nxt[1])
            # X = g.n_e, Y = g.t_e
            X, Y = [], []
            if me is not None:
                X.append((me.off_n + ie, 1.0))
                if me.off_tau is not None:
                    Y.append((me.off_tau + ie, 1.0))
            if mf is not None:
                Y.append((mf.off_n + if_, float(nf @ te)))
                if mf.off_tau is not None:
                    X.append((mf.off_tau + if_, float(tf @ ne)))
            x_zero = ce is clamped or cf in (clamped, ss)
            y_zero = cf is clamped or ce in (clamped, ss)
        else:
            # smooth continuation into the neighbouring patch
            X, Y = [], []
            for m, i in ((me, ie), (mf, if_)):
                if m is None:
                    continue
                X.append((m.off_n + i, 1.0))
                if m.off_tau is not None:
                    Y.append((m.off_tau + i, 1.0))
            x_zero = clamped in (ce, cf)
            y_zero = ce is not free or cf is not free
        tie(X, x_zero)
        tie(Y, y_zero)

    T = _signed_reduction(n_raw, links)

    # integrability of mu_tau along chains of free edges
    free_edges = [m for m in edges if m.off_tau is not None]
    uf = _UnionFind(len(free_edges))
    pos = {id(m): i for i, m in enumerate(free_edges)}
    for a, b in chain_links:
        uf.union(pos[id(a)], pos[id(b)])
    chains = defaultdict(list)
    for i, m in enumerate(free_edges):
        chains[uf.find(i)].append(m)
    zrows = []
    for members in chains.values():
        row = np.zeros(n_raw)
        for m in members:
            row[m.off_tau : m.off_tau + m.knots.dim] = m.knots.integrals()
        zrows.append(row)
    Z = T
    if zrows:
        Rz = np.array(zrows) @ T.toarray()
        Z = T @ sp.csr_matrix(_null_space_sparse(Rz))
    return MultiplierSpace(edges, n_raw, sp.csr_matrix(Z))


def _signed_reduction(n: int, links: list[tuple[int, int | None, float]]) -> sp.csr_matrix:
    """Matrix ``T`` (n x m) with ``raw = T @ reduced`` honouring ``a = s b``
    identifications and forced zeros."""
    adj = defaultdict(list)
    zero = set()
    for a, b, s in links:
        if b is None:
            zero.add(a)
        else:
            adj[a].append((b, s))
            adj[b].append((a, s))
    sign = {}
    comp = {}
    comps = []
    for start in range(n):
        if start in comp:
            continue
        cid = len(comps)
        members = [start]
        comp[start] = cid
        sign[start] = 1.0
        ok = start not in zero
        stack = [start]
        while stack:
            a = stack.pop()
            for b, s in adj[a]:
                if b not in comp:
                    comp[b] = cid
                    sign[b] = sign[a] * s
                    members.append(b)
                    stack.append(b)
                    ok = ok and b not in zero
                elif sign[b] != sign[a] * s:
                    ok = False
        comps.append((members, ok))
    col = {}
    rows, cols, vals = [], [], []
    for cid, (members, ok) in enumerate(comps):
        if not ok:
            continue
        col[cid] = len(col)
        for a in members:
            rows.append(a)
            cols.append(col[cid])
            vals.append(sign[a])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, len(col)))


def _null_space_sparse(R: np.ndarray) -> np.ndarray:
    """Null space of a few dense rows by eliminating one pivot per row;
    keeps the remaining coordinates as identity columns (sparse result)."""
    m, n = R.shape
    R = R.copy()
    pivots = []
    for i in range(m):
        row = R[i]
        if np.abs(row).max() < 1e-12:
            continue
        j = int(np.argmax(np.abs(row)))
        R[i] = row / row[j]
        for k in range(m):
            if k != i and R[k, j] != 0:
                R[k] -= R[k, j] * R[i]
        pivots.append((i, j))
    piv_cols = {j for _, j in pivots}
    free_cols = [j for j in range(n) if j not in piv_cols]
    N = np.zeros((n, len(free_cols)))
    for c, j in enumerate(free_cols):
        N[j, c] = 1.0
        for i, pj in pivots:
            N[pj, c] = -R[i, j]
    return N
