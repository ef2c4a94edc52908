"""Dense matrix helpers and a cyclic Jacobi eigensolver for symmetric matrices.

Matrices are plain 2-D float64 numpy arrays. Everything here is a pure
function of its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NoConvergence, NonUnitDirection, NotSymmetric, ShapeMismatch

SYMMETRY_TOL = 1e-10
OFFDIAG_TOL = 1e-12
RESIDUAL_TOL = 1e-9
MAX_SWEEPS = 100
UNIT_TOL = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a symmetric matrix.

    ``eigenvectors[:, j]`` belongs to ``eigenvalues[j]``; eigenvalues are in
    descending order and every eigenvector has its largest-magnitude
    component non-negative.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T

    def leading(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Top-``k`` eigenvectors as rows, with their eigenvalues."""
        return self.eigenvectors[:, :k].T.copy(), self.eigenvalues[:k].copy()


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def sign_normalize(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so that the component of largest magnitude is >= 0."""
    vectors = np.array(vectors, dtype=float)
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.where(vectors[idx, np.arange(vectors.shape[1])] < 0, -1.0, 1.0)
    return vectors * signs


def sym_eig(m, max_sweeps: int = MAX_SWEEPS) -> SpectralDecomposition:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Sweeps over all (p, q) pairs in row order until every off-diagonal entry is
    below ``OFFDIAG_TOL`` (relative to the largest entry once that exceeds 1)
    or ``max_sweeps`` is reached.
    """
    a = as_matrix(m)
    n = a.shape[0]
    if n == 0 or a.shape[1] != n:
        raise ShapeMismatch(f"sym_eig needs a non-empty square matrix, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotSymmetric("matrix contains non-finite entries")
    asym = float(np.max(np.abs(a - a.T)))
    if asym > SYMMETRY_TOL:
        raise NotSymmetric(f"asymmetry {asym:.3g} exceeds {SYMMETRY_TOL}")

    a = 0.5 * (a + a.T)
    v = np.eye(n)
    scale = max(1.0, float(np.max(np.abs(a))))
    tol = OFFDIAG_TOL * scale

    residual = _kernels.jacobi_sweeps(a, v, tol, max_sweeps)
    if residual >= tol and residual > RESIDUAL_TOL * scale:
        raise NoConvergence(f"off-diagonal residual {residual:.3g} after {max_sweeps} sweeps")

    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return SpectralDecomposition(w[order], sign_normalize(v[:, order]))


def check_directions(directions, n: int) -> np.ndarray:
    """Stack ``directions`` into a (k, n) array, checking shape and unit norm."""
    if directions is None or len(directions) == 0:
        return np.zeros((0, n))
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    if d.shape[1] != n:
        raise ShapeMismatch(f"directions have dimension {d.shape[1]}, expected {n}")
    norms = np.linalg.norm(d, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_TOL)
    if bad.size:
        raise NonUnitDirection(f"direction {bad[0]} has norm {norms[bad[0]]!r}")
    return d


def outer_deflation(m, directions) -> np.ndarray:
    """Return ``m @ (I - sum_i v_i v_i^T)``.

    The directions are expected to be mutually orthogonal; the product is
    formed as ``m - (m V^T) V`` without building the projector.
    """
    m = as_matrix(m)
    d = check_directions(directions, m.shape[1])
    if d.shape[0] == 0:
        return m.copy()
    return m - (m @ d.T) @ d


def orthonormal_complement(directions, n: int) -> np.ndarray:
    """Rows spanning the orthogonal complement of ``directions`` in R^n."""
    d = check_directions(directions, n)
    proj = np.eye(n) - d.T @ d
    dec = sym_eig(0.5 * (proj + proj.T))
    k = n - d.shape[0]
    return dec.eigenvectors[:, :k].T.copy()
