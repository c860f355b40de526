"""Dense linear-algebra core: norms, subspace distances and spectral splits.

Every other module works with the objects defined here. Matrices are plain
``numpy`` arrays; the only structured containers are :class:`SpectralSplit`
(an eigendecomposition partitioned at rank ``r``) and
:class:`PerturbationBlocks` (a perturbation expressed in that eigenbasis).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import DegenerateSplitError, DimensionError, NotSymmetricError

__all__ = [
    "as_symmetric",
    "two_to_inf_norm",
    "row_norms",
    "procrustes_align",
    "sin_theta_distance",
    "SpectralSplit",
    "spectral_split",
    "split_from_eigenpairs",
    "PerturbationBlocks",
    "project_blocks",
    "SubspaceError",
    "two_inf_subspace_error",
    "sym_norm2",
    "inv_sqrt_gram",
]


def _as_2d(b, name="matrix"):
    b = np.asarray(b)
    if b.ndim == 1:
        b = b[:, None]
    if b.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {b.shape}")
    if b.size == 0:
        raise DimensionError(f"{name} is empty")
    return b


def as_symmetric(a, tol=1e-12):
    """Validate a real symmetric matrix and return an exactly symmetric copy.

    Parameters
    ----------
    a : array_like, shape (n, n)
        Input matrix.
    tol : float
        Largest tolerated asymmetry ``max|a - a.T|`` relative to ``max|a|``.
        Within the tolerance the matrix is symmetrized as ``(a + a.T) / 2``,
        which is symmetric to the bit.

    Returns
    -------
    ndarray of float64

    Raises
    ------
    DimensionError
        If ``a`` is empty or not square.
    NotSymmetricError
        If ``a`` is complex, non-finite or asymmetric beyond ``tol``.
    """
    a = _as_2d(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if np.iscomplexobj(a):
        raise NotSymmetricError("expected a real matrix")
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise NotSymmetricError("matrix has non-finite entries")
    asym = np.max(np.abs(a - a.T))
    if asym == 0.0:
        return a.copy()
    if asym > tol * max(np.max(np.abs(a)), np.finfo(float).tiny):
        raise NotSymmetricError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    return 0.5 * (a + a.T)


def row_norms(b):
    """Euclidean norm of every row of ``b``."""
    b = _as_2d(b)
    return np.sqrt(np.sum(np.abs(b) ** 2, axis=1))


def two_to_inf_norm(b):
    """Two-to-infinity norm: the largest Euclidean norm of a row.

    Parameters
    ----------
    b : array_like, shape (n, k)
        Real or complex matrix. A 1-D input is treated as a column, for
        which the norm reduces to the max-abs entry.

    Returns
    -------
    float

    Examples
    --------
    >>> two_to_inf_norm([[3.0, 4.0], [0.0, 5.0]])
    5.0
    """
    return float(np.max(row_norms(b)))


def _check_pair(w, wtilde):
    w = _as_2d(w, "w")
    wtilde = _as_2d(wtilde, "wtilde")
    if w.shape != wtilde.shape:
        raise DimensionError(f"basis shapes differ: {w.shape} vs {wtilde.shape}")
    if w.shape[1] > w.shape[0]:
        raise DimensionError("a basis cannot have more columns than rows")
    return w, wtilde


def procrustes_align(wtilde, w):
    """Solve the orthogonal Procrustes problem ``min_U ||wtilde U - w||_F``.

    The minimizer is the orthogonal (unitary for complex input) factor of
    the polar decomposition of ``wtilde^* w``.

    Parameters
    ----------
    wtilde, w : ndarray, shape (n, k)
        Orthonormal bases.

    Returns
    -------
    ndarray, shape (k, k)
    """
    w, wtilde = _check_pair(w, wtilde)
    m = wtilde.conj().T @ w
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def sin_theta_distance(w, wtilde):
    """Spectral norm of the difference of the orthogonal projectors.

    Equals the sine of the largest principal angle between ``ran(w)`` and
    ``ran(wtilde)``. For bases of equal dimension this is the spectral norm of
    the component of ``wtilde`` orthogonal to ``ran(w)``, which avoids the
    cancellation of the cosine formula at small angles.
    """
    w, wtilde = _check_pair(w, wtilde)
    k = w.shape[1]
    if k == w.shape[0]:
        return 0.0
    # Component of wtilde orthogonal to ran(w): its largest singular value is
    # the sine of the largest principal angle.
    resid = wtilde - w @ (w.conj().T @ wtilde)
    s = np.linalg.norm(resid, 2)
    return float(min(max(s, 0.0), 1.0))


def sym_norm2(a):
    """Spectral norm of a (dense) symmetric matrix via its extreme eigenvalues."""
    a = _as_2d(a)
    if not np.any(a):
        return 0.0
    evals = scipy.linalg.eigvalsh(a, check_finite=False)
    return float(max(abs(evals[0]), abs(evals[-1])))


def inv_sqrt_gram(x):
    """Return ``(I + x^* x)^{-1/2}`` via the eigendecomposition of the Gram matrix."""
    g = x.conj().T @ x
    g = 0.5 * (g + g.conj().T)
    evals, evecs = np.linalg.eigh(g)
    evals = np.maximum(evals, 0.0)
    return (evecs * (1.0 / np.sqrt(1.0 + evals))) @ evecs.conj().T


def _fix_signs(vecs):
    """Flip columns so that each one's largest-magnitude entry is positive."""
    if vecs.shape[1] == 0:
        return vecs
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


@dataclass(frozen=True)
class SpectralSplit:
    """Eigendecomposition ``A = V1 L1 V1^T + V2 L2 V2^T`` split at rank ``r``.

    Attributes
    ----------
    v1 : ndarray, shape (n, r)
        Orthonormal eigenvectors of the ``r`` largest eigenvalues.
    lambda1 : ndarray, shape (r,)
        Those eigenvalues, descending.
    v2 : ndarray, shape (n, n - r)
        Orthonormal eigenvectors of the remaining eigenvalues. Zero
        eigenvalues are kept explicitly.
    lambda2 : ndarray, shape (n - r,)
        Remaining eigenvalues, descending.
    """

    v1: np.ndarray
    lambda1: np.ndarray
    v2: np.ndarray
    lambda2: np.ndarray

    @property
    def n(self):
        return self.v1.shape[0]

    @property
    def r(self):
        return self.v1.shape[1]

    @property
    def eigengap(self):
        """``lambda_r - lambda_{r+1}``."""
        return float(self.lambda1[-1] - self.lambda2[0])

    def matrix(self):
        """Reassemble ``V1 L1 V1^T + V2 L2 V2^T``."""
        return (self.v1 * self.lambda1) @ self.v1.T + self.complement_matrix()

    def complement_matrix(self):
        """``V2 L2 V2^T``, touching only the columns with nonzero eigenvalue."""
        nz = np.flatnonzero(self.lambda2)
        w = self.v2[:, nz]
        return (w * self.lambda2[nz]) @ w.T

    def project_out(self, z):
        """Apply ``P2 = I - V1 V1^T`` (the projector onto ``ran V2``)."""
        return z - self.v1 @ (self.v1.T @ z)


def spectral_split(a, r, gap_tol=None):
    """Eigendecompose a symmetric matrix and split it at rank ``r``.

    Parameters
    ----------
    a : array_like, shape (n, n)
        Symmetric matrix.
    r : int
        Number of leading (algebraically largest) eigenpairs, ``1 <= r < n``.
    gap_tol : float, optional
        The split is rejected when ``lambda_r - lambda_{r+1} <= gap_tol``.
        Defaults to ``1e-10 * ||A||_2``.

    Returns
    -------
    SpectralSplit

    Raises
    ------
    DegenerateSplitError
        If the eigengap at ``r`` does not exceed ``gap_tol``.

    Notes
    -----
    Eigenvectors are normalized so that the largest-magnitude entry of each
    is positive, which makes the result deterministic for a fixed input.
    """
    a = as_symmetric(a)
    n = a.shape[0]
    r = int(r)
    if not 1 <= r < n:
        raise DimensionError(f"split rank must satisfy 1 <= r < n, got r={r}, n={n}")
    evals, evecs = scipy.linalg.eigh(a, check_finite=False)
    evals = evals[::-1]
    evecs = _fix_signs(evecs[:, ::-1])
    if gap_tol is None:
        gap_tol = 1e-10 * max(abs(evals[0]), abs(evals[-1]))
    if evals[r - 1] - evals[r] <= gap_tol:
        raise DegenerateSplitError(
            f"no eigengap at r={r}: lambda_r - lambda_(r+1) = {evals[r - 1] - evals[r]:.3e}"
        )
    return SpectralSplit(
        v1=np.ascontiguousarray(evecs[:, :r]),
        lambda1=evals[:r].copy(),
        v2=np.ascontiguousarray(evecs[:, r:]),
        lambda2=evals[r:].copy(),
    )


def split_from_eigenpairs(vecs, vals, r, n=None):
    """Build a split from known eigenpairs, completing with a zero eigenspace.

    The matrix described is ``sum_i vals[i] vecs[:, i] vecs[:, i]^T``; the
    orthogonal complement of ``ran(vecs)`` is an eigenspace for eigenvalue 0
    and is filled in with an orthonormal basis from a full QR factorization.

    Parameters
    ----------
    vecs : ndarray, shape (n, m)
        Orthonormal eigenvectors.
    vals : array_like, shape (m,)
        Corresponding eigenvalues.
    r : int
        Split rank.

    Returns
    -------
    SpectralSplit
    """
    vecs = _as_2d(vecs)
    vals = np.asarray(vals, dtype=np.float64)
    n = vecs.shape[0]
    m = vecs.shape[1]
    if vals.shape != (m,):
        raise DimensionError("one eigenvalue per eigenvector is required")
    q, _ = np.linalg.qr(vecs, mode="complete")
    comp = q[:, m:]
    allvecs = np.concatenate([vecs, comp], axis=1)
    allvals = np.concatenate([vals, np.zeros(n - m)])
    order = np.argsort(-allvals, kind="stable")
    allvals = allvals[order]
    if allvals[r - 1] - allvals[r] <= 0:
        raise DegenerateSplitError(f"no eigengap at r={r}")
    allvecs = allvecs[:, order]
    return SpectralSplit(
        v1=np.ascontiguousarray(allvecs[:, :r]),
        lambda1=allvals[:r].copy(),
        v2=np.ascontiguousarray(allvecs[:, r:]),
        lambda2=allvals[r:].copy(),
    )


@dataclass(frozen=True)
class PerturbationBlocks:
    """A matrix expressed in the eigenbasis of a split: ``E_ij = V_i^T E V_j``."""

    e11: np.ndarray
    e12: np.ndarray
    e21: np.ndarray
    e22: np.ndarray

    def assemble(self):
        """The full matrix ``[V1 V2]^T E [V1 V2]`` (unitarily similar to ``E``)."""
        return np.block([[self.e11, self.e12], [self.e21, self.e22]])

    def norm2(self):
        """``||E||_2``, computed from the assembled blocks."""
        return sym_norm2(self.assemble())


def project_blocks(e, split):
    """Project a symmetric matrix onto the blocks of a spectral split.

    Parameters
    ----------
    e : array_like, shape (n, n)
    split : SpectralSplit

    Returns
    -------
    PerturbationBlocks
    """
    e = as_symmetric(e)
    if e.shape[0] != split.n:
        raise DimensionError(f"matrix has size {e.shape[0]}, split has n={split.n}")
    ev1 = e @ split.v1
    ev2 = e @ split.v2
    e11 = split.v1.T @ ev1
    e21 = split.v2.T @ ev1
    e22 = split.v2.T @ ev2
    e11 = 0.5 * (e11 + e11.T)
    e22 = 0.5 * (e22 + e22.T)
    return PerturbationBlocks(e11=e11, e12=e21.T.copy(), e21=e21, e22=e22)


@dataclass(frozen=True)
class SubspaceError:
    """Distance between two bases after Procrustes alignment."""

    aligned_error: float
    frob_error: float
    u: np.ndarray


def two_inf_subspace_error(v1hat, v1):
    """Row-wise distance between bases at the Procrustes alignment.

    Parameters
    ----------
    v1hat, v1 : ndarray, shape (n, r)
        Orthonormal bases.

    Returns
    -------
    SubspaceError
        ``aligned_error = ||v1hat U - v1||_{2,inf}`` and
        ``frob_error = ||v1hat U - v1||_F`` where ``U`` solves the orthogonal
        Procrustes problem.
    """
    u = procrustes_align(v1hat, v1)
    diff = v1hat @ u - v1
    return SubspaceError(
        aligned_error=two_to_inf_norm(diff),
        frob_error=float(np.linalg.norm(diff)),
        u=u,
    )
