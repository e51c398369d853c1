"""Sparse direct solution of the assembled saddle-point systems."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularSystemError

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


class IllConditionedWarning(RuntimeWarning):
    pass


@dataclass
class SolutionVector:
    """Block-partitioned solution of a saddle system."""

    values: np.ndarray
    blocks: dict[str, slice]
    residual: float
    regularized: bool = False

    def block(self, name: str) -> np.ndarray:
        return self.values[self.blocks[name]]


def _block_of(index: int, blocks: dict[str, slice]) -> str:
    for name, s in blocks.items():
        if s.start <= index < s.stop:
            return name
    return "?"


def _factor(K: sp.csc_matrix):
    with warnings.catch_warnings():
        warnings.simplefilter("error", sp.linalg.MatrixRankWarning)
        return spla.splu(K, permc_spec="COLAMD")


def _equilibrate(K: sp.csc_matrix) -> np.ndarray:
    """Symmetric diagonal scaling that brings every row max-norm near one."""
    Ka = abs(K)
    d = np.ones(K.shape[0])
    for _ in range(5):
        r = np.asarray((sp.diags(d) @ Ka @ sp.diags(d)).max(axis=1).todense()).ravel()
        r[r == 0] = 1.0
        d = d / np.sqrt(r)
    return d


def solve_matrix(
    K: sp.spmatrix, rhs: np.ndarray, blocks: dict[str, slice] | None = None, refine: int = 3
) -> SolutionVector:
    """Factor ``K`` with pivoted sparse LU and solve.

    The matrix is equilibrated symmetrically first (bending and membrane
    blocks differ by powers of the thickness); a few steps of iterative
    refinement against the unscaled matrix follow.  If the factorization is
    exactly singular a tiny diagonal shift is placed on the multiplier rows
    only and the solve is retried.
    """
    blocks = blocks or {"all": slice(0, K.shape[0])}
    K = sp.csc_matrix(K)
    rhs = np.asarray(rhs, dtype=float)
    d = _equilibrate(K)
    S = sp.diags(d)
    Ks = sp.csc_matrix(S @ K @ S)
    regularized = False
    try:
        lu = _factor(Ks)
    except (RuntimeError, sp.linalg.MatrixRankWarning) as exc:
        lam = blocks.get("lambda")
        if lam is None or lam.stop == lam.start:
            raise SingularSystemError(f"factorization failed: {exc}") from exc
        eps = 1e-14 * spla.norm(Ks, np.inf)
        shift = np.zeros(K.shape[0])
        shift[lam] = -eps
        log.warning("zero pivot; regularizing multiplier block by %.3e", eps)
        Ks = sp.csc_matrix(Ks + sp.diags(shift))
        regularized = True
        try:
            lu = _factor(Ks)
        except (RuntimeError, sp.linalg.MatrixRankWarning) as exc2:
            raise SingularSystemError(f"factorization failed after regularization: {exc2}") from exc2
    fn = np.linalg.norm(rhs)
    fn = fn if fn > 0 else 1.0
    z = d * lu.solve(d * rhs)
    for _ in range(refine):
        r = rhs - K @ z
        if np.linalg.norm(r) <= 1e-14 * fn:
            break
        z = z + d * lu.solve(d * r)
    if not np.all(np.isfinite(z)):
        bad = int(np.flatnonzero(~np.isfinite(z))[0])
        raise SingularSystemError(f"non-finite solution; first bad unknown in block {_block_of(bad, blocks)!r}")
    res = float(np.linalg.norm(K @ z - rhs) / fn)
    if res > RESIDUAL_TOL:
        warnings.warn(f"relative residual {res:.3e} exceeds {RESIDUAL_TOL:.0e}", IllConditionedWarning, stacklevel=2)
    return SolutionVector(z, dict(blocks), res, regularized)


def solve_saddle(system) -> SolutionVector:
    return solve_matrix(system.K, system.rhs, system.blocks)


def write_matrix_market(path: str | Path, K: sp.spmatrix, comment: str = "") -> Path:
    path = Path(path)
    try:
        # open here: mmwrite on a bad path name does not always raise
        with path.open("wb") as fh:
            scipy.io.mmwrite(fh, sp.coo_matrix(K), comment=comment, symmetry="general")
    except OSError as exc:
        raise OSError(f"cannot write matrix to {path}: {exc}") from exc
    return path


def read_matrix_market(path: str | Path) -> sp.csr_matrix:
    return sp.csr_matrix(scipy.io.mmread(str(path)))
