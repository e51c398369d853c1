import numpy as np
import pytest
import scipy.linalg as sla

from klshell.assembly import ShellProblem, coupling_matrix, prune_rows
from klshell.discretization import (
    BoundarySpec,
    EdgeCondition,
    build_dof_map,
    build_multiplier_space,
    glue,
    symcurl_kernel,
)
from klshell.errors import InvalidSetupError
from klshell.geometry import benchmark_geometry, edge_param_points
from klshell.shell_model import MaterialParams
from klshell.splines import eval_basis, nurbs_points, uniform_space

from conftest import flat_surface


def test_clamped_square_interior_count():
    surf = flat_surface()
    dofs = build_dof_map(surf, uniform_space(2, 2), BoundarySpec.uniform(surf, "clamped"))
    for f in ("u1", "u2", "u3", "p"):
        assert dofs.n_free[f] == 4
    # phi has no essential conditions, only the three-dimensional gauge
    assert dofs.n_free["phi1"] + dofs.n_free["phi2"] == 2 * 16 - 3


def test_symcurl_kernel_dimension():
    surf = flat_surface()
    space = uniform_space(3, 3)
    raw, n_raw = glue(surf, [space])
    kern = symcurl_kernel(surf, [space], raw, n_raw)
    assert kern.shape[0] == 3
    assert np.linalg.matrix_rank(kern.reshape(3, -1)) == 3
    # each kernel vector has zero symCurl at random points
    rng = np.random.default_rng(1)
    from klshell.shell_model import sym_curl

    for vec in kern:
        for xi in rng.random((10, 2)):
            b = eval_basis(space, xi, 1)
            grads = np.array([b.d1 @ vec[c][raw[0][b.active_indices]] for c in range(2)])
            assert np.abs(sym_curl(grads)).max() < 1e-12


def _roof_four_counts(n_el, p=2):
    surf = benchmark_geometry("scordelis-lo", "four")
    space = uniform_space(p, n_el)
    bc = BoundarySpec({k: EdgeCondition.FREE for k in surf.boundary_edges()})
    return surf, space, build_dof_map(surf, space, bc, gauge=False, ring_fields=False)


@pytest.mark.parametrize("n_el", [1, 3, 7])
def test_four_patch_glue_count_vs_coordinate_dedup(n_el):
    surf, space, dofs = _roof_four_counts(n_el)
    # brute force: dedup all control points by coordinates
    pts = np.vstack([np.round(patch_ctrl(patch, space), 9) for patch in surf.patches])
    unique = np.unique(pts, axis=0).shape[0]
    n = space.shape[0]
    shared = 4 * n * n - unique
    assert dofs.n_free["u3"] == unique == 4 * n * n - shared
    # four interfaces of n points each; the centre point is shared by all four
    assert shared == 4 * n - 1


def patch_ctrl(patch, space):
    # control points of the refined patch are the Greville images only for the
    # degree-elevated geometry; use interpolation nodes of the space instead
    gu = space.space_u.greville()
    gv = space.space_v.greville()
    xi = np.array([(u, v) for v in gv for u in gu])
    return nurbs_points(patch, xi)


def test_glued_fields_single_valued(rng):
    surf, space, dofs = _roof_four_counts(3)
    coef = rng.standard_normal(dofs.n_free["u3"])
    for itf in surf.interfaces:
        t = rng.random(100)
        xa = edge_param_points(itf.edge_a, t)
        xb = edge_param_points(itf.edge_b, 1 - t if itf.reversed else t)
        for a, b in zip(xa, xb):
            ea = eval_basis(space, a)
            eb = eval_basis(space, b)
            va = ea.values @ coef[dofs.gid["u3"][itf.patch_a][ea.active_indices]]
            vb = eb.values @ coef[dofs.gid["u3"][itf.patch_b][eb.active_indices]]
            assert abs(va - vb) < 1e-12


def test_strip_clamped_edge_only():
    surf = benchmark_geometry("strip", "single")
    space = uniform_space(2, 4)
    conds = {k: (EdgeCondition.CLAMPED if k[1] == 3 else EdgeCondition.FREE) for k in surf.boundary_edges()}
    dofs = build_dof_map(surf, space, BoundarySpec(conds), gauge=False)
    n = space.shape[0]
    for f in ("u1", "u2", "u3", "p"):
        assert dofs.n_free[f] == n * n - n
    assert dofs.n_free["phi1"] == dofs.n_free["phi2"] == n * n


@pytest.mark.parametrize("cond", ["clamped", "simply_supported"])
def test_essential_conditions_hold_at_greville_points(cond, rng):
    surf = flat_surface()
    space = uniform_space(2, 3)
    dofs = build_dof_map(surf, space, BoundarySpec.uniform(surf, cond))
    zero_fields = ("u1", "u2", "u3", "p") if cond == "clamped" else ("u3", "p")
    for f in zero_fields:
        coef = rng.standard_normal(dofs.n_free[f])
        g = dofs.gid[f][0]
        full = np.where(g >= 0, coef[np.maximum(g, 0)], 0.0)
        for e in range(4):
            for t in space.space_u.greville():
                xi = edge_param_points(e, np.array([t]))[0]
                b = eval_basis(space, xi)
                assert abs(b.values @ full[b.active_indices]) < 1e-14


def test_simply_supported_tangential_component():
    surf = flat_surface()
    space = uniform_space(2, 3)
    dofs = build_dof_map(surf, space, BoundarySpec.uniform(surf, "simply_supported"))
    n = space.shape[0]
    # u1 vanishes on edges 0, 2 and u2 on edges 1, 3: each loses two rows
    assert dofs.n_free["u1"] == n * n - 2 * n
    assert dofs.n_free["u2"] == n * n - 2 * n


def test_boundary_spec_validation():
    surf = flat_surface()
    with pytest.raises(InvalidSetupError):
        build_dof_map(surf, uniform_space(2, 2), BoundarySpec({(0, 0): EdgeCondition.FREE}))
    bc = BoundarySpec.uniform(surf, "free").with_overrides([{"patch": 0, "edge": 3, "condition": "clamped"}])
    assert bc.of(0, 3) is EdgeCondition.CLAMPED and bc.of(0, 1) is EdgeCondition.FREE


def test_multipliers_empty_when_clamped():
    surf = flat_surface()
    mult = build_multiplier_space(surf, BoundarySpec.uniform(surf, "clamped"), uniform_space(2, 4))
    assert mult.size == 0


def test_multipliers_free_square_bookkeeping():
    surf = flat_surface()
    mult = build_multiplier_space(surf, BoundarySpec.uniform(surf, "free"), uniform_space(2, 4))
    assert len(mult.edges) == 4
    for m in mult.edges:
        assert m.knots.dim == 5 and m.off_tau is not None
    assert mult.n_raw == 40
    # two relations per corner, plus one zero-mean condition on mu_tau for the closed free chain
    assert mult.size == 40 - 4 * 2 - 1
    assert np.linalg.matrix_rank(mult.Z.toarray()) == mult.size


def test_roof_multiplier_edge_kinds():
    surf = benchmark_geometry("scordelis-lo", "single")
    conds = {k: (EdgeCondition.SIMPLY_SUPPORTED if k[1] in (0, 2) else EdgeCondition.FREE) for k in surf.boundary_edges()}
    mult = build_multiplier_space(surf, BoundarySpec(conds), uniform_space(2, 5))
    for m in mult.edges:
        if m.edge in (0, 2):
            assert m.condition is EdgeCondition.SIMPLY_SUPPORTED and m.off_tau is None
        else:
            assert m.condition is EdgeCondition.FREE and m.off_tau is not None


@pytest.mark.parametrize("case, layout, conds", [
    ("scordelis-lo", "single", lambda e: "simply_supported" if e in (0, 2) else "free"),
    ("scordelis-lo", "four", lambda e: "simply_supported" if e in (0, 2) else "free"),
    ("strip", "single", lambda e: "clamped" if e == 3 else "free"),
])
def test_coupling_matrix_full_row_rank(case, layout, conds):
    surf = benchmark_geometry(case, layout)
    bc = BoundarySpec({k: EdgeCondition(conds(k[1])) for k in surf.boundary_edges()})
    problem = ShellProblem(surf, MaterialParams(1.0, 0.0, 0.1), bc, [], degree=2, n_elements=3)
    space = problem.space()
    dofs = build_dof_map(surf, space, bc)
    mult = build_multiplier_space(surf, bc, space)
    D = prune_rows(coupling_matrix(problem, dofs, mult)).toarray()
    s = sla.svdvals(D)
    assert s.min() > 1e-10 * s.max()
