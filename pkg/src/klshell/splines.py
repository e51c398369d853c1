"""B-spline and NURBS machinery on the unit parameter square.

Univariate bases are evaluated with the Cox-de Boor recursion (derivatives
up to order three); bivariate quantities are tensor products with
lexicographic numbering, first parametric direction running fastest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError, UnsupportedError

MAX_DERIV = 3


@dataclass(frozen=True)
class KnotVector:
    """Open (clamped) knot vector on [0, 1]."""

    degree: int
    knots: tuple[float, ...]

    def __post_init__(self) -> None:
        kn = np.asarray(self.knots, dtype=float)
        p = self.degree
        if p < 0:
            raise InvalidArgumentError("degree must be non-negative")
        if kn.size < 2 * p + 2:
            raise InvalidArgumentError("knot vector too short for its degree")
        if np.any(np.diff(kn) < 0):
            raise InvalidArgumentError("knots must be nondecreasing")
        if not (np.all(kn[: p + 1] == kn[0]) and np.all(kn[-p - 1 :] == kn[-1])):
            raise InvalidArgumentError("knot vector must be open (clamped)")
        interior = kn[p + 1 : kn.size - p - 1]
        if interior.size:
            _, counts = np.unique(interior, return_counts=True)
            if counts.max() > p + 1:
                raise InvalidArgumentError("interior knot multiplicity exceeds degree + 1")
        object.__setattr__(self, "knots", tuple(float(k) for k in kn))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.knots)

    @property
    def dim(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def breaks(self) -> np.ndarray:
        """Distinct knot values (element boundaries)."""
        return np.unique(self.array)

    @property
    def n_elements(self) -> int:
        return self.breaks.size - 1

    def greville(self) -> np.ndarray:
        kn = self.array
        p = self.degree
        if p == 0:
            return 0.5 * (kn[:-1] + kn[1:])
        return np.array([kn[i + 1 : i + p + 1].mean() for i in range(self.dim)])

    def find_span(self, x: float) -> int:
        """Index ``i`` with ``knots[i] <= x < knots[i+1]`` (last span closed)."""
        kn = self.array
        n = self.dim
        if x >= kn[n]:
            return n - 1
        if x <= kn[self.degree]:
            return self.degree
        return int(np.searchsorted(kn, x, side="right") - 1)

    def integrals(self) -> np.ndarray:
        """Integral of every basis function over [0, 1]."""
        kn = self.array
        p = self.degree
        return np.array([(kn[i + p + 1] - kn[i]) / (p + 1) for i in range(self.dim)])


def open_knot_vector(degree: int, n_elements: int, continuity: int | None = None) -> KnotVector:
    """Uniform open knot vector with prescribed interior continuity.

    ``continuity`` defaults to ``degree - 1``; ``-1`` gives discontinuous
    functions across the interior breakpoints.
    """
    if continuity is None:
        continuity = degree - 1
    if degree < 0 or n_elements < 1:
        raise InvalidArgumentError("need degree >= 0 and n_elements >= 1")
    if not -1 <= continuity <= degree - 1:
        raise InvalidArgumentError(
            f"continuity {continuity} outside [-1, {degree - 1}] for degree {degree}"
        )
    mult = degree - continuity
    interior = np.repeat(np.arange(1, n_elements) / n_elements, mult)
    knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
    return KnotVector(degree, tuple(knots))


def basis_ders_1d(kv: KnotVector, span: int, x: float, n_ders: int) -> np.ndarray:
    """Nonzero basis functions and derivatives at ``x`` (Piegl-Tiller A2.3).

    Returns an array of shape ``(n_ders + 1, degree + 1)``; row ``k`` holds the
    ``k``-th derivatives of functions ``span - degree .. span``.
    """
    p = kv.degree
    U = kv.knots
    ndu = np.zeros((p + 1, p + 1))
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = x - U[span + 1 - j]
        right[j] = U[span + j] - x
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((n_ders + 1, p + 1))
    ders[0] = ndu[:, p]
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, n_ders + 1):
            d = 0.0
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, n_ders + 1):
        ders[k] *= fac
        fac *= p - k
    return ders


def eval_1d(kv: KnotVector, xs: Sequence[float], n_ders: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Local basis evaluation at many points.

    Returns ``(first, ders)`` where ``first[k]`` is the global index of the
    first active function at point ``k`` and ``ders`` has shape
    ``(npts, n_ders + 1, degree + 1)``.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    first = np.empty(xs.size, dtype=int)
    ders = np.empty((xs.size, n_ders + 1, kv.degree + 1))
    for k, x in enumerate(xs):
        span = kv.find_span(x)
        first[k] = span - kv.degree
        ders[k] = basis_ders_1d(kv, span, x, n_ders)
    return first, ders


def collocation_1d(kv: KnotVector, xs: Sequence[float], n_ders: int = 0) -> np.ndarray:
    """Dense matrices of all basis functions, shape ``(n_ders+1, npts, dim)``."""
    first, ders = eval_1d(kv, xs, n_ders)
    out = np.zeros((n_ders + 1, first.size, kv.dim))
    for k in range(first.size):
        out[:, k, first[k] : first[k] + kv.degree + 1] = ders[k]
    return out


@dataclass(frozen=True)
class TensorSpace:
    """Bivariate tensor-product spline space."""

    space_u: KnotVector
    space_v: KnotVector

    @property
    def shape(self) -> tuple[int, int]:
        return self.space_u.dim, self.space_v.dim

    @property
    def dof_count(self) -> int:
        return self.space_u.dim * self.space_v.dim

    @property
    def degrees(self) -> tuple[int, int]:
        return self.space_u.degree, self.space_v.degree

    def index(self, i, j):
        return np.asarray(i) + self.space_u.dim * np.asarray(j)

    def edge_dofs(self, edge: int) -> np.ndarray:
        """Indices of functions whose trace on ``edge`` is nonzero.

        Edges: 0 -> v=0, 1 -> u=1, 2 -> v=1, 3 -> u=0, ordered with the
        increasing free parameter.
        """
        nu, nv = self.shape
        if edge == 0:
            return self.index(np.arange(nu), 0)
        if edge == 1:
            return self.index(nu - 1, np.arange(nv))
        if edge == 2:
            return self.index(np.arange(nu), nv - 1)
        if edge == 3:
            return self.index(0, np.arange(nv))
        raise InvalidArgumentError(f"edge must be 0..3, got {edge}")

    def edge_knots(self, edge: int) -> KnotVector:
        return self.space_u if edge in (0, 2) else self.space_v


def uniform_space(degree: int, n_elements: int, continuity: int | None = None) -> TensorSpace:
    kv = open_knot_vector(degree, n_elements, continuity)
    return TensorSpace(kv, kv)


@dataclass(frozen=True)
class BasisEval:
    """Active tensor-product functions at one point.

    ``d1`` rows are (d/du, d/dv); ``d2`` rows (uu, uv, vv); ``d3`` rows
    (uuu, uuv, uvv, vvv).
    """

    active_indices: np.ndarray
    values: np.ndarray
    d1: np.ndarray | None = None
    d2: np.ndarray | None = None
    d3: np.ndarray | None = None


# (order in u, order in v) for each derivative row, grouped by total order
DERIV_PAIRS = {
    0: [(0, 0)],
    1: [(1, 0), (0, 1)],
    2: [(2, 0), (1, 1), (0, 2)],
    3: [(3, 0), (2, 1), (1, 2), (0, 3)],
}


def eval_basis(space: TensorSpace, xi: Sequence[float], max_deriv: int = 0) -> BasisEval:
    """Evaluate the active basis functions (and partials) of ``space`` at ``xi``."""
    if max_deriv > MAX_DERIV or max_deriv < 0:
        raise UnsupportedError(f"derivatives up to order {MAX_DERIV} only, got {max_deriv}")
    u, v = float(xi[0]), float(xi[1])
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        raise InvalidArgumentError(f"point {xi} outside the unit square")
    fu, du = eval_1d(space.space_u, [u], max_deriv)
    fv, dv = eval_1d(space.space_v, [v], max_deriv)
    pu, pv = space.degrees
    iu = fu[0] + np.arange(pu + 1)
    jv = fv[0] + np.arange(pv + 1)
    idx = space.index(iu[:, None], jv[None, :]).T.ravel()

    def prod(a: int, b: int) -> np.ndarray:
        return np.outer(dv[0, b], du[0, a]).ravel()

    out = {}
    for order in range(max_deriv + 1):
        out[order] = np.array([prod(a, b) for a, b in DERIV_PAIRS[order]])
    return BasisEval(
        active_indices=idx,
        values=out[0][0],
        d1=out.get(1),
        d2=out.get(2),
        d3=out.get(3),
    )


@dataclass(frozen=True)
class NurbsPatch:
    """Rational tensor-product surface patch.

    ``control_points`` is ``(n, 3)`` and ``weights`` ``(n,)``, lexicographic
    with the first parameter direction fastest.
    """

    space: TensorSpace
    control_points: np.ndarray
    weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        cp = np.asarray(self.control_points, dtype=float).reshape(-1, 3)
        w = np.ones(cp.shape[0]) if self.weights is None else np.asarray(self.weights, float)
        if cp.shape[0] != self.space.dof_count or w.shape != (cp.shape[0],):
            raise InvalidArgumentError("control point / weight count does not match the space")
        if np.any(w <= 0):
            raise InvalidArgumentError("weights must be positive")
        cp.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "weights", w)

    @property
    def homogeneous(self) -> np.ndarray:
        """Weighted control points ``(w x, w y, w z, w)`` on the ``(nv, nu)`` grid."""
        nu, nv = self.space.shape
        pw = np.hstack([self.control_points * self.weights[:, None], self.weights[:, None]])
        return pw.reshape(nv, nu, 4)

    def to_json(self) -> dict:
        return {
            "degree_u": self.space.space_u.degree,
            "degree_v": self.space.space_v.degree,
            "knots_u": list(self.space.space_u.knots),
            "knots_v": list(self.space.space_v.knots),
            "control_points": [
                [*map(float, p), float(w)] for p, w in zip(self.control_points, self.weights)
            ],
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "NurbsPatch":
        if isinstance(data, str):
            data = json.loads(data)
        space = TensorSpace(
            KnotVector(int(data["degree_u"]), tuple(data["knots_u"])),
            KnotVector(int(data["degree_v"]), tuple(data["knots_v"])),
        )
        cpw = np.asarray(data["control_points"], dtype=float)
        return cls(space, cpw[:, :3], cpw[:, 3])


def _rational_ders(Aw: np.ndarray, n: int) -> np.ndarray:
    """Quotient-rule derivatives of a rational map.

    ``Aw[k, l, ..., 0:d]`` hold the partials of the weighted numerator and
    ``Aw[k, l, ..., d]`` those of the weight function.
    """
    Ad = Aw[..., :-1]
    wd = Aw[..., -1:]
    S = np.zeros_like(Ad)
    for k in range(n + 1):
        for l in range(n + 1 - k):
            v = Ad[k, l].copy()
            for j in range(1, l + 1):
                v -= comb(l, j) * wd[0, j] * S[k, l - j]
            for i in range(1, k + 1):
                v -= comb(k, i) * wd[i, 0] * S[k - i, l]
                v2 = np.zeros_like(v)
                for j in range(1, l + 1):
                    v2 += comb(l, j) * wd[i, j] * S[k - i, l - j]
                v -= comb(k, i) * v2
            S[k, l] = v / wd[0, 0]
    return S


def nurbs_grid_ders(patch: NurbsPatch, us: np.ndarray, vs: np.ndarray, max_deriv: int = 2) -> np.ndarray:
    """Partials of the surface map on the tensor grid ``us x vs``.

    Returns ``S`` with ``S[k, l, j, i]`` = d^(k+l) R / du^k dv^l at
    ``(us[i], vs[j])``; entries with ``k + l > max_deriv`` are zero.
    """
    if max_deriv > MAX_DERIV:
        raise UnsupportedError(f"derivatives up to order {MAX_DERIV} only")
    n = max_deriv
    Nu = collocation_1d(patch.space.space_u, us, n)  # (n+1, nus, nu)
    Nv = collocation_1d(patch.space.space_v, vs, n)
    Pw = patch.homogeneous  # (nv, nu, 4)
    Aw = np.einsum("kia,ljb,bad->kljid", Nu, Nv, Pw)
    return _rational_ders(Aw, n)


def nurbs_eval(patch: NurbsPatch, xi: Sequence[float], max_deriv: int = 0) -> dict[tuple[int, int], np.ndarray]:
    """Surface point and partials at one parameter point.

    Returns a mapping ``(k, l) -> d^(k+l)R/du^k dv^l`` for ``k + l <= max_deriv``.
    """
    u, v = float(xi[0]), float(xi[1])
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        raise InvalidArgumentError(f"point {xi} outside the unit square")
    S = nurbs_grid_ders(patch, np.array([u]), np.array([v]), max_deriv)
    return {
        (k, l): S[k, l, 0, 0].copy()
        for k in range(max_deriv + 1)
        for l in range(max_deriv + 1 - k)
    }


def nurbs_points(patch: NurbsPatch, xis: np.ndarray) -> np.ndarray:
    """Surface points at scattered parameter points ``(m, 2)``."""
    xis = np.atleast_2d(xis)
    Nu = collocation_1d(patch.space.space_u, xis[:, 0], 0)[0]
    Nv = collocation_1d(patch.space.space_v, xis[:, 1], 0)[0]
    Pw = patch.homogeneous
    Aw = np.einsum("ma,mb,bad->md", Nu, Nv, Pw)
    return Aw[:, :3] / Aw[:, 3:]


# ---------------------------------------------------------------- refinement


def insert_knot_1d(kv: KnotVector, ctrl: np.ndarray, x: float) -> tuple[KnotVector, np.ndarray]:
    """Boehm insertion of one knot; ``ctrl`` is ``(dim, ...)`` homogeneous."""
    p = kv.degree
    U = kv.array
    k = kv.find_span(x)
    if x == U[-1]:
        raise InvalidArgumentError("cannot insert the end knot")
    new = np.empty((ctrl.shape[0] + 1,) + ctrl.shape[1:])
    for i in range(ctrl.shape[0] + 1):
        if i <= k - p:
            new[i] = ctrl[i]
        elif i > k:
            new[i] = ctrl[i - 1]
        else:
            a = (x - U[i]) / (U[i + p] - U[i])
            new[i] = a * ctrl[i] + (1 - a) * ctrl[i - 1]
    knots = np.insert(U, k + 1, x)
    return KnotVector(p, tuple(knots)), new


def insert_knots(patch: NurbsPatch, knots_u: Sequence[float] = (), knots_v: Sequence[float] = ()) -> NurbsPatch:
    """Exact knot insertion in either direction."""
    Pw = patch.homogeneous  # (nv, nu, 4)
    ku, kvv = patch.space.space_u, patch.space.space_v
    grid = np.transpose(Pw, (1, 0, 2))  # (nu, nv, 4)
    for x in knots_u:
        ku, grid = insert_knot_1d(ku, grid, x)
    grid = np.transpose(grid, (1, 0, 2))  # (nv, nu, 4)
    for x in knots_v:
        kvv, grid = insert_knot_1d(kvv, grid, x)
    flat = grid.reshape(-1, 4)
    return NurbsPatch(TensorSpace(ku, kvv), flat[:, :3] / flat[:, 3:], flat[:, 3])


def split_patch(patch: NurbsPatch, direction: int, x: float = 0.5) -> tuple[NurbsPatch, NurbsPatch]:
    """Split into two patches at parameter ``x``; each is reparametrized
    linearly onto [0, 1] so parametric speed is halved/scaled uniformly."""
    kv = patch.space.space_u if direction == 0 else patch.space.space_v
    have = int(np.sum(np.isclose(kv.array, x)))
    extra = [x] * (kv.degree + 1 - have)
    if direction == 0:
        ref = insert_knots(patch, knots_u=extra)
        kv = ref.space.space_u
    else:
        ref = insert_knots(patch, knots_v=extra)
        kv = ref.space.space_v
    U = kv.array
    p = kv.degree
    cut = int(np.searchsorted(U, x, side="left"))  # first index of the repeated x
    Pw = ref.homogeneous
    if direction == 1:
        Pw = np.transpose(Pw, (1, 0, 2))  # put split direction on axis 1
    # split direction is axis 1 of Pw (columns)
    left = Pw[:, :cut]
    right = Pw[:, cut:]
    kl_vec = KnotVector(p, tuple(U[: cut + p + 1] / x))
    kr_vec = KnotVector(p, tuple((U[cut:] - x) / (1 - x)))
    out = []
    for half, kk in ((left, kl_vec), (right, kr_vec)):
        if direction == 1:
            half = np.transpose(half, (1, 0, 2))
            space = TensorSpace(ref.space.space_u, kk)
        else:
            space = TensorSpace(kk, ref.space.space_v)
        flat = half.reshape(-1, 4)
        out.append(NurbsPatch(space, flat[:, :3] / flat[:, 3:], flat[:, 3]))
    return out[0], out[1]
