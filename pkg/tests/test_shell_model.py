import numpy as np
import pytest
import sympy as sy

from klshell.errors import InvalidArgumentError
from klshell.geometry import benchmark_geometry, frames_from_derivatives, surface_frame
from klshell.shell_model import (
    MaterialParams,
    bending_strain_direct,
    compliance_apply,
    material_tensor,
    material_tensor_full,
    membrane_strain_direct,
    moment_rows,
    strain_operators,
    sym_curl,
    voigt_compliance,
    voigt_stiffness,
)
from klshell.splines import eval_basis, open_knot_vector, TensorSpace

from conftest import flat_patch

x1, x2 = sy.symbols("x1 x2")


def _analytic_frames(expr):
    """Exact partials up to third order of a symbolic map, as callables."""
    R = sy.Matrix(expr)
    X = (x1, x2)
    d1 = [R.diff(a) for a in X]
    d2 = [[R.diff(a, b) for b in X] for a in X]
    d3 = [[[R.diff(a, b, c) for c in X] for b in X] for a in X]
    f = sy.lambdify(X, [d1, d2, d3], "numpy")

    def at(u, v):
        a, b, c = f(u, v)
        return (
            np.array(a, float).reshape(2, 3),
            np.array(b, float).reshape(2, 2, 3),
            np.array(c, float).reshape(2, 2, 2, 3),
        )

    return at


CYL = _analytic_frames([25 * sy.cos(x1), 25 * sy.sin(x1), x2])
SPH = _analytic_frames([10 * sy.cos(x1) * sy.cos(x2), 10 * sy.sin(x1) * sy.cos(x2), 10 * sy.sin(x2)])


def _translation_data(d1, d2, fr, tbar):
    """Covariant components of a constant Cartesian field and their partials.

    Uses dA_a/dx^b = d2[a, b] and the Weingarten formula for A3; the Hessian
    of u3 is built from exact third map derivatives by the caller.
    """
    u = np.array([tbar @ d1[0], tbar @ d1[1], tbar @ fr.A3])
    du = np.zeros((3, 2))
    for a in range(2):
        for b in range(2):
            du[a, b] = tbar @ d2[a, b]
    dA3 = -np.einsum("gl,li->gi", fr.Bab, np.array([fr.Acontr1, fr.Acontr2]))
    du[2] = dA3 @ tbar
    return u, du


def _hess_u3(at, u, v, tbar, h=1e-4):
    # dA3 is known exactly from (d1, d2); one central difference of it gives the
    # Hessian with O(h^2) truncation only
    def grad(uu, vv):
        d1, d2, d3 = at(uu, vv)
        fr = frames_from_derivatives(d1, d2, d3)
        return (-np.einsum("gl,li->gi", fr.Bab, np.array([fr.Acontr1, fr.Acontr2]))) @ tbar

    H = np.zeros((2, 2))
    H[:, 0] = (grad(u + h, v) - grad(u - h, v)) / (2 * h)
    H[:, 1] = (grad(u, v + h) - grad(u, v - h)) / (2 * h)
    return 0.5 * (H + H.T)


@pytest.mark.parametrize("at", [CYL, SPH], ids=["cylinder", "sphere"])
def test_rigid_translation_no_strain(at, rng):
    for _ in range(100):
        u0, v0 = rng.uniform(0.1, 1.2, 2)
        d1, d2, d3 = at(u0, v0)
        fr = frames_from_derivatives(d1, d2, d3)
        for tbar in np.eye(3):
            u, du = _translation_data(d1, d2, fr, tbar)
            eps = membrane_strain_direct(fr, u, du)
            assert np.abs(eps).max() <= 1e-10 * (1.0 + np.abs(du).max())
            # three one-function 'bases', one per component, carry the field exactly
            N = u.copy()
            dN = du.T.copy()
            d2N = np.zeros((2, 2, 3))
            d2N[:, :, 2] = _hess_u3(at, u0, v0, tbar)
            ops = strain_operators(fr, N, dN, d2N)
            coef = np.zeros(9)
            coef[[0, 4, 8]] = 1.0
            scale = 1.0 + np.abs(d2N).max() + np.abs(du).max()
            assert np.abs(ops.Bm @ coef).max() < 1e-9 * scale
            assert np.abs(ops.bending @ coef).max() < 1e-7 * scale


def test_trig_cylinder_translation_exact():
    # on the trig cylinder the Hessian of u3 is available in closed form
    for th in np.linspace(0.1, 1.0, 7):
        d1, d2, d3 = CYL(th, 0.4)
        fr = frames_from_derivatives(d1, d2, d3)
        c, s = np.cos(th), np.sin(th)
        for tbar in np.eye(3):
            u, du = _translation_data(d1, d2, fr, tbar)
            d2u3 = np.zeros((2, 2))
            d2u3[0, 0] = tbar @ [-c, -s, 0.0]
            kap = bending_strain_direct(fr, u, du, d2u3)
            assert np.abs(kap).max() < 1e-12 * 25
            assert np.abs(membrane_strain_direct(fr, u, du)).max() < 1e-12 * 25


def test_split_identity_random_dofs(rng):
    patch = benchmark_geometry("hemisphere", "four").patches[1]
    space = TensorSpace(open_knot_vector(3, 4), open_knot_vector(3, 4))
    for xi in rng.uniform(0.05, 0.9, (20, 2)):
        fr = surface_frame(patch, xi)
        b = eval_basis(space, xi, 2)
        n = b.values.size
        d2N = np.empty((2, 2, n))
        d2N[0, 0], d2N[0, 1], d2N[1, 1] = b.d2
        d2N[1, 0] = d2N[0, 1]
        ops = strain_operators(fr, b.values, b.d1, d2N)
        c = rng.standard_normal(3 * n)
        cc = c.reshape(3, n)
        u = cc @ b.values
        du = cc @ b.d1.T
        d2u3 = d2N @ cc[2]
        kap = bending_strain_direct(fr, u, du, d2u3)
        kv = np.array([kap[0, 0], kap[1, 1], 2 * kap[0, 1]])
        assert np.abs(ops.bending @ c - kv).max() < 1e-13 * max(1.0, np.abs(kv).max())
        eps = membrane_strain_direct(fr, u, du)
        ev = np.array([eps[0, 0], eps[1, 1], 2 * eps[0, 1]])
        assert np.abs(ops.Bm @ c - ev).max() < 1e-13 * max(1.0, np.abs(ev).max())


def test_flat_frame_operators():
    fr = surface_frame(flat_patch(), (0.4, 0.4))
    b = eval_basis(TensorSpace(open_knot_vector(2, 2), open_knot_vector(2, 2)), (0.4, 0.4), 2)
    n = b.values.size
    d2N = np.zeros((2, 2, n))
    ops = strain_operators(fr, b.values, b.d1, d2N)
    assert np.allclose(ops.Bk1, 0.0)
    # membrane rows: (d1 u1, d2 u2, d2 u1 + d1 u2)
    assert np.allclose(ops.Bm[0, :n], b.d1[0])
    assert np.allclose(ops.Bm[1, n : 2 * n], b.d1[1])
    assert np.allclose(ops.Bm[2, :n], b.d1[1])
    assert np.allclose(ops.Bm[2, n : 2 * n], b.d1[0])
    assert np.allclose(ops.Bm[:, 2 * n :], 0.0)


def test_pure_hessian_on_flat_frame():
    fr = surface_frame(flat_patch(), (0.5, 0.5))
    # u3 = x1^2: value 0.25, gradient (1, 0), Hessian [[2, 0], [0, 0]]
    kap = bending_strain_direct(fr, np.array([0, 0, 0.25]), np.array([[0, 0], [0, 0], [1.0, 0]]), np.array([[2.0, 0], [0, 0]]))
    assert np.allclose(kap, [[2, 0], [0, 0]])


def test_missing_derivatives_rejected():
    fr = surface_frame(flat_patch(), (0.5, 0.5))
    with pytest.raises(InvalidArgumentError):
        strain_operators(fr, np.ones(1), np.zeros((2, 1)), None)


def test_material_identity_metric():
    C = voigt_stiffness(material_tensor_full(np.eye(2), 1.0, 0.3))
    assert np.isclose(C[0, 0], 1.0 / 0.91, atol=1e-6)
    assert np.isclose(C[0, 0], 1.098901, atol=1e-6)
    assert np.isclose(C[0, 1], 0.329670, atol=1e-6)
    assert np.isclose(C[2, 2], 0.384615, atol=1e-6)
    C0 = voigt_stiffness(material_tensor_full(np.eye(2), 7.0, 0.0))
    assert np.allclose(C0, np.diag([7.0, 7.0, 3.5]))


def _random_spd(rng):
    a = rng.standard_normal((2, 2))
    return a @ a.T + 0.5 * np.eye(2)


def test_material_symmetries(rng):
    C = material_tensor_full(np.linalg.inv(_random_spd(rng)), 2.0, 0.25)
    assert np.array_equal(C, np.transpose(C, (2, 3, 0, 1)))
    assert np.array_equal(C, np.transpose(C, (1, 0, 2, 3)))
    assert np.array_equal(C, np.transpose(C, (0, 1, 3, 2)))


def test_compliance_roundtrip(rng):
    for _ in range(50):
        A = _random_spd(rng)
        E, nu = rng.uniform(1, 100), rng.uniform(0, 0.49)
        C = material_tensor_full(np.linalg.inv(A), E, nu)
        S = rng.standard_normal((2, 2))
        S = S + S.T
        # lower-index strain S_ab -> stress C^{abst} S_st -> back
        stress = np.einsum("abst,st->ab", C, S)
        back = compliance_apply(stress, A, E, nu)
        assert np.abs(back - S).max() < 1e-12 * np.abs(S).max()
        # Voigt forms are inverse to each other; cross-check with a numeric inverse
        Cv = voigt_stiffness(C)
        Kv = voigt_compliance(A, E, nu)
        assert np.allclose(Kv @ Cv, np.eye(3), atol=1e-12)
        assert np.allclose(Kv, np.linalg.inv(Cv), rtol=1e-10)


def test_material_operator_scaling():
    fr = surface_frame(flat_patch(2.0, 3.0), (0.5, 0.5))
    op = material_tensor(fr, MaterialParams(10.0, 0.2, 0.5))
    assert np.isclose(op.scaleM, 6.0 * 0.5**3 / 12)
    assert np.isclose(op.scaleN, 6.0 * 0.5)
    assert np.allclose(op.CM_inv, op.Cinv / op.scaleM)


@pytest.mark.parametrize("bad", [(-1.0, 0.3, 1.0), (1.0, 0.5, 1.0), (1.0, 0.3, 0.0)])
def test_material_validation(bad):
    with pytest.raises(InvalidArgumentError):
        MaterialParams(*bad)


def test_sym_curl_examples():
    # psi_d1[c, a] = d_a psi_c
    assert np.allclose(sym_curl(np.array([[0, 1.0], [0, 0]])), [[1, 0], [0, 0]])
    # psi = (0, x1) under the defining formula
    assert np.allclose(sym_curl(np.array([[0, 0], [1.0, 0]])), [[0, 0], [0, -1]])
    # psi = (x1, 0): the pure off-diagonal case
    assert np.allclose(sym_curl(np.array([[1.0, 0], [0, 0]])), [[0, -0.5], [-0.5, 0]])
    assert np.allclose(sym_curl(np.zeros((2, 2))), 0.0)


def test_moment_rows_match_sym_curl(rng):
    N = rng.random(4)
    dN = rng.standard_normal((2, 4))
    c = rng.standard_normal(12)
    Mv = moment_rows(N, dN) @ c
    p = N @ c[:4]
    M = p * np.eye(2) + sym_curl(np.array([dN @ c[4:8], dN @ c[8:]]))
    assert np.allclose(Mv, [M[0, 0], M[1, 1], M[0, 1]])


def test_div_div_of_sym_curl_vanishes():
    # integrate symCurl(psi) : Hess(v) for polynomial psi and v with v, grad v = 0 on the boundary
    space = TensorSpace(open_knot_vector(3, 5), open_knot_vector(3, 5))
    nu, nv = space.shape
    g, w = np.polynomial.legendre.leggauss(6)
    breaks = np.linspace(0, 1, 6)
    psi1 = lambda x, y: (3 * x**2 * y - y**3, x * y**2 + 2 * x**3)
    grad_psi = lambda x, y: np.array([[6 * x * y, 3 * x**2 - 3 * y**2], [y**2 + 6 * x**2, 2 * x * y]])
    interior = [j * nu + i for j in range(2, nv - 2) for i in range(2, nu - 2)]
    acc = np.zeros(space.dof_count)
    for ex in range(5):
        for ey in range(5):
            for gx, wx in zip(g, w):
                for gy, wy in zip(g, w):
                    x = breaks[ex] + (gx + 1) / 10
                    y = breaks[ey] + (gy + 1) / 10
                    b = eval_basis(space, (x, y), 2)
                    M = sym_curl(grad_psi(x, y))
                    hess = M[0, 0] * b.d2[0] + 2 * M[0, 1] * b.d2[1] + M[1, 1] * b.d2[2]
                    acc[b.active_indices] += wx * wy / 100 * hess
    assert np.abs(acc[interior]).max() < 1e-11
    assert len(interior) > 0
