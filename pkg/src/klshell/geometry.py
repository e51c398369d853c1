"""Surface differential geometry of the undeformed midsurface.

All quantities are evaluated in batches: every array carries arbitrary
leading point dimensions followed by its tensor indices.  Index conventions
(Greek indices 0/1 stand for the parametric directions 1/2):

* ``Gamma[..., s, a, b]``   Christoffel symbols Gamma^s_ab
* ``Bab[..., a, b]``        covariant curvature B_ab
* ``Bmixed[..., s, a]``     mixed curvature B^s_a = A^{sm} B_ma
* ``BmixedCd[..., t, b, a]`` covariant derivative B^t_b|_a
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError, SingularGeometryError
from .splines import (
    KnotVector,
    NurbsPatch,
    TensorSpace,
    nurbs_grid_ders,
    nurbs_points,
    split_patch,
)

_DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class GeometryFrame:
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    Aab: np.ndarray
    Aab_inv: np.ndarray
    Acontr1: np.ndarray
    Acontr2: np.ndarray
    Acontr3: np.ndarray
    sqrtA: np.ndarray
    Gamma: np.ndarray
    Bab: np.ndarray
    Bmixed: np.ndarray
    BmixedCd: np.ndarray | None = None

    @property
    def covariant(self) -> np.ndarray:
        """Stacked ``A_i`` with shape ``(..., 3, 3)`` (row i = A_i)."""
        return np.stack([self.A1, self.A2, self.A3], axis=-2)

    @property
    def contravariant(self) -> np.ndarray:
        """Stacked ``A^i`` with shape ``(..., 3, 3)`` (row i = A^i)."""
        return np.stack([self.Acontr1, self.Acontr2, self.Acontr3], axis=-2)

    def take(self, idx) -> "GeometryFrame":
        """Sub-frame at the leading index ``idx``."""
        vals = {}
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            vals[name] = None if v is None else v[idx]
        return GeometryFrame(**vals)


def frames_from_derivatives(d1: np.ndarray, d2: np.ndarray, d3: np.ndarray | None = None, xi=None) -> GeometryFrame:
    """Build frames from map partials.

    ``d1[..., a, :]`` = dR/dxi^a, ``d2[..., a, b, :]`` second partials and
    ``d3[..., a, b, g, :]`` third partials (optional; needed for B^t_b|_a).
    """
    A1 = d1[..., 0, :]
    A2 = d1[..., 1, :]
    n = np.cross(A1, A2)
    nn = np.linalg.norm(n, axis=-1)
    scale = np.maximum(np.linalg.norm(A1, axis=-1) * np.linalg.norm(A2, axis=-1), 1e-300)
    if np.any(nn <= _DEGENERATE_TOL * scale) or np.any(nn == 0):
        bad = np.argwhere(np.atleast_1d(nn <= _DEGENERATE_TOL * scale))
        loc = None
        if xi is not None and bad.size:
            loc = np.asarray(xi).reshape(-1, 2)[bad[0][0]] if np.ndim(xi) > 1 else xi
        raise SingularGeometryError("degenerate tangent plane", loc)
    A3 = n / nn[..., None]
    Aab = np.einsum("...ai,...bi->...ab", d1, d1)
    Ainv = np.linalg.inv(Aab)
    contra = np.einsum("...ab,...bi->...ai", Ainv, d1)
    sqrtA = np.sqrt(np.linalg.det(Aab))
    Gamma = np.einsum("...si,...abi->...sab", contra, d2)
    Bab = np.einsum("...i,...abi->...ab", A3, d2)
    Bmixed = np.einsum("...sm,...ma->...sa", Ainv, Bab)
    BmixedCd = None
    if d3 is not None:
        # d_g A3 = -B_gl A^l  (Weingarten)
        dA3 = -np.einsum("...gl,...li->...gi", Bab, contra)
        dB = np.einsum("...gi,...abi->...abg", dA3, d2) + np.einsum("...i,...abgi->...abg", A3, d3)
        dA = np.einsum("...sgi,...ti->...stg", d2, d1)
        dA = dA + np.swapaxes(dA, -3, -2)
        dAinv = -np.einsum("...as,...stg,...tb->...abg", Ainv, dA, Ainv)
        dBm = np.einsum("...smg,...ma->...sag", dAinv, Bab) + np.einsum("...sm,...mag->...sag", Ainv, dB)
        BmixedCd = (
            dBm
            + np.einsum("...tas,...sb->...tba", Gamma, Bmixed)
            - np.einsum("...sab,...ts->...tba", Gamma, Bmixed)
        )
    return GeometryFrame(
        A1=A1,
        A2=A2,
        A3=A3,
        Aab=Aab,
        Aab_inv=Ainv,
        Acontr1=contra[..., 0, :],
        Acontr2=contra[..., 1, :],
        Acontr3=A3,
        sqrtA=sqrtA,
        Gamma=Gamma,
        Bab=Bab,
        Bmixed=Bmixed,
        BmixedCd=BmixedCd,
    )


def _stack_partials(S: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Rearrange ``S[k, l, ...]`` into symmetric index arrays."""
    d1 = np.stack([S[1, 0], S[0, 1]], axis=-2)
    d2 = np.stack(
        [np.stack([S[2, 0], S[1, 1]], axis=-2), np.stack([S[1, 1], S[0, 2]], axis=-2)], axis=-3
    )
    d3 = None
    if order >= 3:
        d3 = np.empty(S.shape[2:-1] + (2, 2, 2, 3))
        for a in range(2):
            for b in range(2):
                for g in range(2):
                    k = (a == 0) + (b == 0) + (g == 0)
                    d3[..., a, b, g, :] = S[k, 3 - k]
    return d1, d2, d3


def grid_frames(patch: NurbsPatch, us: np.ndarray, vs: np.ndarray, third: bool = True) -> tuple[np.ndarray, GeometryFrame]:
    """Frames on the tensor grid ``us x vs``; leading shape ``(len(vs), len(us))``.

    Also returns the surface points with the same leading shape.
    """
    order = 3 if third else 2
    S = nurbs_grid_ders(patch, np.asarray(us, float), np.asarray(vs, float), order)
    d1, d2, d3 = _stack_partials(S, order)
    xi = np.stack(np.meshgrid(us, vs), axis=-1)
    return S[0, 0], frames_from_derivatives(d1, d2, d3, xi=xi)


def surface_frame(patch: NurbsPatch, xi: Sequence[float], third: bool = True) -> GeometryFrame:
    """All pointwise geometric quantities at one parameter point."""
    u, v = float(xi[0]), float(xi[1])
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        raise InvalidArgumentError(f"point {xi} outside the unit square")
    _, fr = grid_frames(patch, np.array([u]), np.array([v]), third)
    try:
        return fr.take((0, 0))
    except SingularGeometryError as exc:  # pragma: no cover - raised above
        raise SingularGeometryError(str(exc), xi) from exc


def point_frame(patch: NurbsPatch, xi: Sequence[float], third: bool = True) -> GeometryFrame:
    try:
        return surface_frame(patch, xi, third)
    except SingularGeometryError as exc:
        raise SingularGeometryError("degenerate tangent plane", xi) from exc


# ----------------------------------------------------------- multi-patch


@dataclass(frozen=True)
class Interface:
    """Shared edge ``edge_a`` of ``patch_a`` and ``edge_b`` of ``patch_b``.

    ``reversed`` is set when the free edge parameters run in opposite
    directions.
    """

    patch_a: int
    edge_a: int
    patch_b: int
    edge_b: int
    reversed: bool = False


EDGE_NAMES = ("v0", "u1", "v1", "u0")


def edge_param_points(edge: int, t: np.ndarray) -> np.ndarray:
    """Parameter points along an edge for edge parameter ``t`` in [0, 1]."""
    t = np.asarray(t, float)
    z, o = np.zeros_like(t), np.ones_like(t)
    return {
        0: np.stack([t, z], -1),
        1: np.stack([o, t], -1),
        2: np.stack([t, o], -1),
        3: np.stack([z, t], -1),
    }[edge]


def edge_vertex(edge: int, end: int) -> tuple[float, float]:
    """Parameter coordinates of the start (0) or end (1) of an edge."""
    return tuple(edge_param_points(edge, np.array([float(end)]))[0])


def edge_normal_tangent(edge: int) -> tuple[np.ndarray, np.ndarray]:
    """Parametric unit outer normal and counterclockwise tangent of an edge."""
    n = {0: (0.0, -1.0), 1: (1.0, 0.0), 2: (0.0, 1.0), 3: (-1.0, 0.0)}[edge]
    n = np.array(n)
    return n, np.array([-n[1], n[0]])


def _edge_is_degenerate(patch: NurbsPatch, edge: int, scale: float) -> bool:
    pts = nurbs_points(patch, edge_param_points(edge, np.linspace(0, 1, 7)))
    return float(np.ptp(pts, axis=0).max()) < 1e-10 * scale


@dataclass
class MultiPatchSurface:
    patches: list[NurbsPatch]
    interfaces: list[Interface] = field(default_factory=list)

    @property
    def scale(self) -> float:
        pts = np.vstack([p.control_points for p in self.patches])
        return float(np.ptp(pts, axis=0).max())

    def degenerate_edges(self) -> set[tuple[int, int]]:
        s = self.scale
        return {
            (k, e) for k, p in enumerate(self.patches) for e in range(4) if _edge_is_degenerate(p, e, s)
        }

    def boundary_edges(self) -> list[tuple[int, int]]:
        shared = {(i.patch_a, i.edge_a) for i in self.interfaces}
        shared |= {(i.patch_b, i.edge_b) for i in self.interfaces}
        return [(k, e) for k in range(len(self.patches)) for e in range(4) if (k, e) not in shared]

    @classmethod
    def detect(cls, patches: list[NurbsPatch], tol: float = 1e-10) -> "MultiPatchSurface":
        """Find shared edges by sampling edge points."""
        surf = cls(list(patches))
        scale = surf.scale
        degenerate = surf.degenerate_edges()
        t = np.linspace(0, 1, 9)
        samples = {
            (k, e): nurbs_points(p, edge_param_points(e, t))
            for k, p in enumerate(patches)
            for e in range(4)
            if (k, e) not in degenerate
        }
        keys = sorted(samples)
        for ia, a in enumerate(keys):
            for b in keys[ia + 1 :]:
                if a[0] == b[0]:
                    continue
                pa, pb = samples[a], samples[b]
                if np.abs(pa - pb).max() < tol * scale:
                    surf.interfaces.append(Interface(a[0], a[1], b[0], b[1], False))
                elif np.abs(pa - pb[::-1]).max() < tol * scale:
                    surf.interfaces.append(Interface(a[0], a[1], b[0], b[1], True))
        return surf


# --------------------------------------------------------------- catalog


class BenchmarkCase(str, Enum):
    SCORDELIS_LO = "scordelis-lo"
    HEMISPHERE = "hemisphere"
    PINCHED_CYLINDER = "pinched-cylinder"
    CYLINDER_STRIP = "strip"


class PatchLayout(str, Enum):
    SINGLE = "single"
    FOUR = "four"


# benchmark constants (lengths, material, loads) shared with the bench presets
ROOF = dict(radius=25.0, length=50.0, half_angle_deg=40.0, thickness=0.25, E=4.32e8, nu=0.0, load=90.0)
HEMI = dict(radius=10.0, thickness=0.04, E=6.825e7, nu=0.3, load=2.0)
PCYL = dict(radius=300.0, length=600.0, thickness=3.0, E=3e6, nu=0.3, load=1.0)
STRIP = dict(radius=10.0, width=1.0, E=1000.0, nu=0.0)


def arc_xz(radius: float, theta0: float, theta1: float) -> tuple[np.ndarray, np.ndarray]:
    """Rational quadratic arc ``(R sin t, R cos t)`` for ``t`` in [theta0, theta1]."""
    h = 0.5 * (theta1 - theta0)
    tm = 0.5 * (theta0 + theta1)
    pts = np.array(
        [
            [np.sin(theta0), np.cos(theta0)],
            [np.sin(tm) / np.cos(h), np.cos(tm) / np.cos(h)],
            [np.sin(theta1), np.cos(theta1)],
        ]
    ) * radius
    return pts, np.array([1.0, np.cos(h), 1.0])


def _quad_linear_kv() -> tuple[KnotVector, KnotVector]:
    return KnotVector(2, (0, 0, 0, 1, 1, 1)), KnotVector(1, (0, 0, 1, 1))


def cylinder_sector(radius: float, length: float, theta0: float, theta1: float) -> NurbsPatch:
    """Cylindrical patch: arc in the x-z plane along u, axis +y along v."""
    arc, w = arc_xz(radius, theta0, theta1)
    ku, kv = _quad_linear_kv()
    cps, ws = [], []
    for y in (0.0, length):
        for (x, z), wi in zip(arc, w):
            cps.append([x, y, z])
            ws.append(wi)
    return NurbsPatch(TensorSpace(ku, kv), np.array(cps), np.array(ws))


def sphere_sector(radius: float, phi0: float, phi1: float) -> NurbsPatch:
    """Quarter-meridian sector of a sphere: u = azimuth, v = equator -> pole."""
    h = 0.5 * (phi1 - phi0)
    pm = 0.5 * (phi0 + phi1)
    circ = np.array(
        [
            [np.cos(phi0), np.sin(phi0)],
            [np.cos(pm) / np.cos(h), np.sin(pm) / np.cos(h)],
            [np.cos(phi1), np.sin(phi1)],
        ]
    )
    cw = np.array([1.0, np.cos(h), 1.0])
    mer = np.array([[radius, 0.0], [radius, radius], [0.0, radius]])
    mw = np.array([1.0, np.sqrt(0.5), 1.0])
    cps, ws = [], []
    for (rho, z), wj in zip(mer, mw):
        for (cx, cy), wi in zip(circ, cw):
            cps.append([rho * cx, rho * cy, z])
            ws.append(wi * wj)
    kv = KnotVector(2, (0, 0, 0, 1, 1, 1))
    return NurbsPatch(TensorSpace(kv, kv), np.array(cps), np.array(ws))


def benchmark_geometry(case: BenchmarkCase | str, layout: PatchLayout | str = PatchLayout.SINGLE) -> MultiPatchSurface:
    """Exact NURBS midsurface of a benchmark.

    Normals point away from the curvature center in every case.
    """
    case = BenchmarkCase(case)
    layout = PatchLayout(layout)
    if case is BenchmarkCase.SCORDELIS_LO:
        a = np.deg2rad(ROOF["half_angle_deg"])
        patch = cylinder_sector(ROOF["radius"], ROOF["length"], -a, a)
        if layout is PatchLayout.SINGLE:
            return MultiPatchSurface.detect([patch])
        left, right = split_patch(patch, 0, 0.5)
        quads = []
        for half in (left, right):
            lo, hi = split_patch(half, 1, 0.5)
            quads.append((lo, hi))
        # order: (u-lo, v-lo), (u-hi, v-lo), (u-lo, v-hi), (u-hi, v-hi)
        return MultiPatchSurface.detect([quads[0][0], quads[1][0], quads[0][1], quads[1][1]])
    if case is BenchmarkCase.HEMISPHERE:
        if layout is not PatchLayout.FOUR:
            raise InvalidArgumentError("hemisphere is only available as four patches")
        q = np.pi / 2
        return MultiPatchSurface.detect([sphere_sector(HEMI["radius"], k * q, (k + 1) * q) for k in range(4)])
    if case is BenchmarkCase.PINCHED_CYLINDER:
        if layout is not PatchLayout.FOUR:
            raise InvalidArgumentError("pinched cylinder is only available as four patches")
        q = np.pi / 2
        return MultiPatchSurface.detect(
            [cylinder_sector(PCYL["radius"], PCYL["length"], k * q, (k + 1) * q) for k in range(4)]
        )
    if layout is not PatchLayout.SINGLE:
        raise InvalidArgumentError("cylindrical strip is only available as a single patch")
    return MultiPatchSurface.detect([cylinder_sector(STRIP["radius"], STRIP["width"], 0.0, np.pi / 2)])
