import warnings

import numpy as np
import pytest
import scipy.sparse as sp

from klshell.assembly import assemble
from klshell.bench import build_problem, case_setup
from klshell.errors import SingularSystemError
from klshell.linsolve import (
    IllConditionedWarning,
    read_matrix_market,
    solve_matrix,
    solve_saddle,
    write_matrix_market,
)


def test_decoupled_identity_blocks():
    # A = I, B = 0, C = I: x = 0 and -u = f  ->  u = -f
    f = np.array([1.0, -2.0, 3.0])
    K = sp.bmat([[sp.eye(2), None], [None, -sp.eye(3)]])
    rhs = np.concatenate([np.zeros(2), f])
    sol = solve_matrix(K, rhs, {"x": slice(0, 2), "u": slice(2, 5)})
    assert np.allclose(sol.block("x"), 0.0)
    assert np.allclose(sol.block("u"), -f)


def test_two_by_two_saddle():
    sol = solve_matrix(sp.csr_matrix([[1.0, 1.0], [1.0, 0.0]]), np.array([0.0, 1.0]))
    assert np.allclose(sol.values, [1.0, -1.0])
    assert sol.residual < 1e-15


def test_structural_singularity_raises():
    K = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(SingularSystemError):
        solve_matrix(K, np.array([1.0, 1.0]), {"x": slice(0, 2)})


def test_lambda_regularization_on_redundant_multiplier():
    # duplicated constraint row: singular only in the multiplier block
    K = sp.csr_matrix(np.array([[2.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
    sol = solve_matrix(K, np.array([1.0, 0.0, 0.0]), {"x": slice(0, 1), "lambda": slice(1, 3)})
    assert sol.regularized
    assert abs(sol.values[0]) < 1e-12


def test_ill_conditioned_warning():
    # Hilbert matrix of order 14: condition number far beyond 1e16
    n = 14
    i = np.arange(n)
    K = sp.csr_matrix(1.0 / (i[:, None] + i[None, :] + 1.0))
    f = np.random.default_rng(0).standard_normal(n)
    with pytest.warns(IllConditionedWarning):
        sol = solve_matrix(K, f, {"x": slice(0, n)})
    assert sol.residual > 1e-10


@pytest.fixture(scope="module")
def roof_system():
    return assemble(build_problem(case_setup("scordelis-lo"), "m", 2, 9))


def test_roof_residual_and_work(roof_system):
    sol = solve_saddle(roof_system)
    assert sol.residual <= 1e-10
    u = sol.block("u")
    f = -roof_system.rhs[roof_system.blocks["u"]]
    assert u @ f >= 0.0


def test_repeat_solve_bitwise_identical(roof_system):
    a = solve_saddle(roof_system).values
    b = solve_saddle(roof_system).values
    assert np.array_equal(a, b)


def test_matrix_market_roundtrip(tmp_path, roof_system):
    path = write_matrix_market(tmp_path / "k.mtx", roof_system.K, "roof")
    back = read_matrix_market(path)
    assert (back != roof_system.K).nnz == 0


def test_matrix_market_bad_path(roof_system):
    with pytest.raises(OSError):
        write_matrix_market("/nonexistent/dir/k.mtx", roof_system.K)
