"""Pointwise kinematics and constitutive law of the linear Kirchhoff-Love shell.

Voigt ordering is (11, 22, 12).  Strain-like vectors carry the engineering
shear ``2 e_12``; stress-like vectors (bending moment, membrane force) carry
the plain contravariant component ``M^12``.  With this pairing
``M : kappa = M_voigt . kappa_voigt``.

Operator rows act on coefficient vectors laid out component-major: the
coefficient of local function ``j`` in component ``c`` sits at ``c * n + j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .geometry import GeometryFrame

VOIGT_PAIRS = ((0, 0), (1, 1), (0, 1))


@dataclass(frozen=True)
class MaterialParams:
    E: float
    nu: float
    t: float

    def __post_init__(self) -> None:
        if not (self.E > 0 and 0.0 <= self.nu < 0.5 and self.t > 0):
            raise InvalidArgumentError(f"invalid material {self}")

    @property
    def bending_stiffness(self) -> float:
        return self.E * self.t**3 / (12.0 * (1.0 - self.nu**2))


@dataclass(frozen=True)
class MaterialOperator:
    """Voigt stiffness ``C`` and compliance ``Cinv`` plus the scalings that
    turn them into the bending / membrane constitutive maps."""

    C: np.ndarray
    Cinv: np.ndarray
    scaleM: np.ndarray
    scaleN: np.ndarray

    @property
    def CM_inv(self) -> np.ndarray:
        return self.Cinv / self.scaleM[..., None, None]

    @property
    def CN_inv(self) -> np.ndarray:
        return self.Cinv / self.scaleN[..., None, None]


def material_tensor_full(Ainv: np.ndarray, E: float, nu: float) -> np.ndarray:
    """Contravariant components ``C[..., a, b, s, t]``."""
    g = Ainv
    return (E / (2.0 * (1.0 + nu))) * (
        np.einsum("...as,...bt->...abst", g, g)
        + np.einsum("...at,...bs->...abst", g, g)
        + (2.0 * nu / (1.0 - nu)) * np.einsum("...ab,...st->...abst", g, g)
    )


def voigt_stiffness(C4: np.ndarray) -> np.ndarray:
    out = np.empty(C4.shape[:-4] + (3, 3))
    for I, (a, b) in enumerate(VOIGT_PAIRS):
        for J, (s, t) in enumerate(VOIGT_PAIRS):
            out[..., I, J] = C4[..., a, b, s, t]
    return out


def compliance_apply(M: np.ndarray, Aab: np.ndarray, E: float, nu: float) -> np.ndarray:
    """Lower-index strain ``kappa_ab`` of a contravariant tensor ``M^st``."""
    low = np.einsum("...as,...bt,...st->...ab", Aab, Aab, M)
    tr = np.einsum("...st,...st->...", Aab, M)
    return (1.0 + nu) / E * low - nu / E * tr[..., None, None] * Aab


def voigt_compliance(Aab: np.ndarray, E: float, nu: float) -> np.ndarray:
    """Closed-form compliance mapping (M11, M22, M12) -> (k11, k22, 2 k12)."""
    out = np.empty(Aab.shape[:-2] + (3, 3))
    for J, (s, t) in enumerate(VOIGT_PAIRS):
        unit = np.zeros(Aab.shape[:-2] + (2, 2))
        unit[..., s, t] = 1.0
        unit[..., t, s] = 1.0
        k = compliance_apply(unit, Aab, E, nu)
        out[..., 0, J] = k[..., 0, 0]
        out[..., 1, J] = k[..., 1, 1]
        out[..., 2, J] = 2.0 * k[..., 0, 1]
    return out


def material_tensor(frame: GeometryFrame, mat: MaterialParams) -> MaterialOperator:
    C = voigt_stiffness(material_tensor_full(frame.Aab_inv, mat.E, mat.nu))
    Cinv = voigt_compliance(frame.Aab, mat.E, mat.nu)
    return MaterialOperator(
        C=C,
        Cinv=Cinv,
        scaleM=frame.sqrtA * mat.t**3 / 12.0,
        scaleN=frame.sqrtA * mat.t,
    )


def sym_curl(psi_d1: np.ndarray) -> np.ndarray:
    """Symmetric Curl of a 2-vector field from ``psi_d1[..., c, a] = d_a psi_c``."""
    out = np.empty(psi_d1.shape[:-2] + (2, 2))
    out[..., 0, 0] = psi_d1[..., 0, 1]
    out[..., 1, 1] = -psi_d1[..., 1, 0]
    out[..., 0, 1] = out[..., 1, 0] = 0.5 * (psi_d1[..., 1, 1] - psi_d1[..., 0, 0])
    return out


def to_voigt_strain(T: np.ndarray) -> np.ndarray:
    """Symmetric 2x2 (trailing axes -3, -2 of a row array) -> Voigt strain rows."""
    return np.stack([T[..., 0, 0, :], T[..., 1, 1, :], 2.0 * T[..., 0, 1, :]], axis=-2)


@dataclass(frozen=True)
class StrainOperators:
    Bm: np.ndarray
    Bk1: np.ndarray
    Hess: np.ndarray
    Grad3: np.ndarray

    @property
    def bending(self) -> np.ndarray:
        """Full bending-strain rows: Hessian of u3 plus the first-order part."""
        n = self.Hess.shape[-1]
        full = self.Bk1.copy()
        full[..., 2 * n :] += self.Hess
        return full


def strain_operators(frame: GeometryFrame, N: np.ndarray, dN: np.ndarray, d2N: np.ndarray | None) -> StrainOperators:
    """Membrane / bending strain rows for covariant displacement components.

    ``N`` has shape ``(..., n)``, ``dN`` ``(..., 2, n)`` and ``d2N``
    ``(..., 2, 2, n)``.
    """
    if d2N is None or frame.BmixedCd is None:
        raise InvalidArgumentError("strain operators need second basis and third map derivatives")
    G = frame.Gamma
    B = frame.Bab
    Bm = frame.Bmixed
    Bcd = frame.BmixedCd
    n = N.shape[-1]
    eye = np.eye(2)
    lead = N.shape[:-1]

    eps = np.zeros(lead + (2, 2, 3, n))
    k1 = np.zeros(lead + (2, 2, 3, n))
    for c in range(2):
        sym = 0.5 * (eye[:, c][:, None, None] * dN[..., None, :, :] + eye[:, c][None, :, None] * dN[..., :, None, :])
        # sym[..., a, b, j] = 1/2 (delta_ac dN_b + delta_bc dN_a)
        eps[..., c, :] = sym - G[..., c, :, :, None] * N[..., None, None, :]
        # B^c_a dN_b + B^c_b dN_a
        t1 = Bm[..., c, :, None, None] * dN[..., None, :, :] + Bm[..., c, None, :, None] * dN[..., :, None, :]
        # -(B^s_a Gamma^c_sb + B^s_b Gamma^c_sa) N
        bg = np.einsum("...sa,...sb->...ab", Bm, G[..., c, :, :])
        t2 = -(bg + np.swapaxes(bg, -1, -2))[..., None] * N[..., None, None, :]
        t3 = np.swapaxes(Bcd[..., c, :, :], -1, -2)[..., None] * N[..., None, None, :]
        k1[..., c, :] = t1 + t2 + t3
    eps[..., 2, :] = -B[..., None] * N[..., None, None, :]
    BB = np.einsum("...sa,...sb->...ab", Bm, B)
    k1[..., 2, :] = -np.einsum("...sab,...sj->...abj", G, dN) - BB[..., None] * N[..., None, None, :]

    def rows(T: np.ndarray) -> np.ndarray:
        # (..., 2, 2, 3, n) -> (..., 3 voigt, 3n)
        flat = T.reshape(lead + (2, 2, 3 * n))
        return to_voigt_strain(flat)

    hess = to_voigt_strain(d2N)
    return StrainOperators(Bm=rows(eps), Bk1=rows(k1), Hess=hess, Grad3=dN)


def moment_rows(N: np.ndarray, dN: np.ndarray) -> np.ndarray:
    """Rows of ``M = p I + symCurl phi`` (Voigt, stress-like) for fields (p, phi1, phi2)."""
    n = N.shape[-1]
    out = np.zeros(N.shape[:-1] + (3, 3 * n))
    out[..., 0, :n] = N
    out[..., 1, :n] = N
    out[..., 0, n : 2 * n] = dN[..., 1, :]
    out[..., 2, n : 2 * n] = -0.5 * dN[..., 0, :]
    out[..., 1, 2 * n :] = -dN[..., 0, :]
    out[..., 2, 2 * n :] = 0.5 * dN[..., 1, :]
    return out


def bending_strain_direct(frame: GeometryFrame, u: np.ndarray, du: np.ndarray, d2u3: np.ndarray) -> np.ndarray:
    """Bending strain tensor from pointwise field data (independent code path).

    ``u[..., i]`` covariant components, ``du[..., i, a]`` their partials and
    ``d2u3[..., a, b]`` the Hessian of ``u3``.
    """
    G = frame.Gamma
    cov = du[..., :2, :] - np.einsum("...sab,...s->...ab", G, u[..., :2])  # u_{a|b}
    u3_ab = d2u3 - np.einsum("...sab,...s->...ab", G, du[..., 2, :])
    Bm = frame.Bmixed
    BB = np.einsum("...sa,...sb->...ab", Bm, frame.Bab)
    t = np.einsum("...sa,...sb->...ab", Bm, cov)
    cd = np.einsum("...tba,...t->...ab", frame.BmixedCd, u[..., :2])
    return u3_ab - BB * u[..., 2, None, None] + t + np.swapaxes(t, -1, -2) + cd


def membrane_strain_direct(frame: GeometryFrame, u: np.ndarray, du: np.ndarray) -> np.ndarray:
    cov = du[..., :2, :] - np.einsum("...sab,...s->...ab", frame.Gamma, u[..., :2])
    return 0.5 * (cov + np.swapaxes(cov, -1, -2)) - frame.Bab * u[..., 2, None, None]
