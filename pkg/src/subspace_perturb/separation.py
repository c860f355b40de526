"""Separation of matrices (``sep``) and the gap used by the row-wise bound.

For matrices ``B`` (l x l) and ``C`` (m x m) and a norm ``|.|``::

    sep(B, C) = inf { |Z B - C Z| : |Z| = 1 },    Z of shape (m, l).

The restricted variant additionally constrains ``Z`` to the range of an
orthonormal ``W``. Three norms are used: spectral (``"2"``), Frobenius
(``"fro"``) and two-to-infinity (``"2inf"``).

The restricted two-to-infinity separation has no closed form, so it is only
ever reported as a certified lower bound (safe to use inside a bound) or as
an empirical upper probe with an explicit witness (useful to study
tightness).
"""

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .exceptions import DimensionError, OrderingError
from .linalg import SpectralSplit, two_to_inf_norm

__all__ = [
    "SepEstimate",
    "GapCertificate",
    "BetaEstimate",
    "norm_of",
    "sep_ratio",
    "sep_diag",
    "sep2_perturbed",
    "sep_fro_kron",
    "sep_fro_restricted",
    "complement_inf_norm",
    "sep_2inf_restricted_lower",
    "sep_2inf_upper_probe",
    "random_probe_candidates",
    "beta_w_estimate",
    "gap_certificate",
]

EXACT_DIAGONAL = "exact-diagonal"
CERTIFIED_LOWER = "certified-lower"
EMPIRICAL_UPPER = "empirical-upper"


@dataclass(frozen=True)
class SepEstimate:
    """A separation value together with what is known about it.

    Attributes
    ----------
    value : float
    kind : str
        ``"exact-diagonal"``, ``"certified-lower"`` or ``"empirical-upper"``.
    witness : ndarray or None
        A matrix ``Z`` attaining (or approaching) the value.
    """

    value: float
    kind: str
    witness: np.ndarray | None = None


@dataclass(frozen=True)
class GapCertificate:
    """Lower bound on the gap entering the row-wise bound."""

    sep2: float
    sepF: float
    sep2inf_lower: float
    gap_lower: float
    method: str

    def to_dict(self):
        return {
            "sep2": self.sep2,
            "sepF": self.sepF,
            "sep2inf_lower": self.sep2inf_lower,
            "gap_lower": self.gap_lower,
            "method": self.method,
        }


@dataclass(frozen=True)
class BetaEstimate:
    """Best value found while minimizing ``||W X||_{2,inf} / ||W||_{2,inf}``."""

    upper_estimate: float
    x: np.ndarray


def norm_of(z, norm):
    """Evaluate one of the three norms used for separations."""
    if norm == "2":
        return float(np.linalg.norm(z, 2))
    if norm == "fro":
        return float(np.linalg.norm(z))
    if norm == "2inf":
        return two_to_inf_norm(z)
    raise ValueError(f"unknown norm {norm!r}; expected '2', 'fro' or '2inf'")


def sep_ratio(z, b, c, norm):
    """The ratio ``|Z B - C Z| / |Z|`` whose infimum defines ``sep(B, C)``."""
    z = np.atleast_2d(z)
    return norm_of(z @ b - c @ z, norm) / norm_of(z, norm)


def sep_diag(d1, d2):
    """Separation of two ordered real diagonal matrices.

    For ``D1 = diag(d1)`` and ``D2 = diag(d2)`` with ``min(d1) >= max(d2)``
    the spectral, Frobenius and two-to-infinity separations all equal
    ``min(d1) - max(d2)``, attained at ``Z = e_i e_j^T`` where ``i`` indexes
    the largest entry of ``d2`` and ``j`` the smallest entry of ``d1``.

    Parameters
    ----------
    d1, d2 : array_like
        Diagonals of ``D1`` (size l) and ``D2`` (size m).

    Returns
    -------
    SepEstimate
        Kind ``"exact-diagonal"``; the witness has shape (m, l).

    Raises
    ------
    OrderingError
        If ``min(d1) < max(d2)``.
    """
    d1 = np.atleast_1d(np.asarray(d1, dtype=np.float64))
    d2 = np.atleast_1d(np.asarray(d2, dtype=np.float64))
    if d1.size == 0 or d2.size == 0:
        raise DimensionError("diagonals must be nonempty")
    j = int(np.argmin(d1))
    i = int(np.argmax(d2))
    if d1[j] < d2[i]:
        raise OrderingError(f"spectra not ordered: min(d1)={d1[j]} < max(d2)={d2[i]}")
    witness = np.zeros((d2.size, d1.size))
    witness[i, j] = 1.0
    return SepEstimate(float(d1[j] - d2[i]), EXACT_DIAGONAL, witness)


def sep2_perturbed(lambda1, lambda2, e11_norm, e22_norm):
    """Lower bound on ``sep_2(L1 + E11, L2 + E22)`` from block norms.

    ``sep_2`` moves by at most the norms of the perturbations, so the
    diagonal separation minus ``e11_norm + e22_norm`` (floored at zero) is a
    valid lower bound.
    """
    base = sep_diag(lambda1, lambda2).value
    return max(base - float(e11_norm) - float(e22_norm), 0.0)


def sep_fro_kron(b, c):
    """Frobenius separation via the Kronecker form of the Sylvester operator.

    ``vec(Z B - C Z) = (B^T kron I_m - I_l kron C) vec(Z)`` with column-major
    ``vec``, so ``sep_F(B, C)`` is the smallest singular value of that
    ``lm x lm`` matrix. Intended for small blocks.

    Returns
    -------
    SepEstimate
        The value is exact up to rounding; it is tagged ``"certified-lower"``
        and carries the minimizing ``Z`` (shape (m, l)) as witness.
    """
    b = np.atleast_2d(np.asarray(b))
    c = np.atleast_2d(np.asarray(c))
    ell = b.shape[0]
    m = c.shape[0]
    k = np.kron(b.T, np.eye(m)) - np.kron(np.eye(ell), c)
    _, s, vh = np.linalg.svd(k)
    z = vh[-1].conj().reshape((m, ell), order="F")
    return SepEstimate(float(s[-1]), CERTIFIED_LOWER, z)


def sep_fro_restricted(b, c, w):
    """Frobenius separation of ``(B, W C W^*)`` restricted to ``Z in ran(W)``.

    Computed as the smallest singular value of the Kronecker operator acting
    on coefficient matrices ``X`` with ``Z = W X``.
    """
    b = np.atleast_2d(np.asarray(b))
    c = np.atleast_2d(np.asarray(c))
    w = np.atleast_2d(np.asarray(w))
    n = w.shape[0]
    ell = b.shape[0]
    wcw = w @ c @ w.conj().T
    k = (np.kron(b.T, np.eye(n)) - np.kron(np.eye(ell), wcw)) @ np.kron(np.eye(ell), w)
    s = np.linalg.svd(k, compute_uv=False)
    return float(s[-1])


def complement_inf_norm(split, chunk=512):
    """``||V2 L2 V2^T||_inf`` (maximum absolute row sum).

    Only the columns of ``V2`` with nonzero eigenvalue contribute, so the
    cost is proportional to the rank of ``V2 L2 V2^T``.
    """
    nz = np.flatnonzero(split.lambda2)
    if nz.size == 0:
        return 0.0
    w = split.v2[:, nz]
    wl = w * split.lambda2[nz]
    best = 0.0
    for start in range(0, split.n, chunk):
        block = wl[start:start + chunk] @ w.T
        best = max(best, float(np.max(np.sum(np.abs(block), axis=1))))
    return best


def sep_2inf_restricted_lower(split):
    """Certified lower bound on ``sep_{(2,inf),V2}(L1, V2 L2 V2^T)``.

    Two lower bounds hold for any orthonormal ``W`` (here ``V2``): the
    Frobenius separation divided by ``sqrt(n)``, and
    ``sigma_min(L1) - ||V2 L2 V2^T||_inf``. The larger one is returned (the
    second is floored at zero). When ``L2 = 0`` the second branch equals
    ``min_i |lambda_i|``, which is exact.

    Parameters
    ----------
    split : SpectralSplit

    Returns
    -------
    SepEstimate
    """
    sep_f = sep_diag(split.lambda1, split.lambda2).value
    first = sep_f / np.sqrt(split.n)
    smin = float(np.min(np.abs(split.lambda1)))
    second = max(smin - complement_inf_norm(split), 0.0)
    return SepEstimate(float(max(first, second)), CERTIFIED_LOWER)


def _probe_ratio(split, z):
    lhs = z * split.lambda1
    nz = np.flatnonzero(split.lambda2)
    if nz.size:
        w = split.v2[:, nz]
        lhs = lhs - w @ (split.lambda2[nz][:, None] * (w.T @ z))
    return two_to_inf_norm(lhs) / two_to_inf_norm(z)


def sep_2inf_upper_probe(split, candidates, tol=1e-10):
    """Empirical upper bound on the restricted two-to-infinity separation.

    Parameters
    ----------
    split : SpectralSplit
    candidates : sequence of ndarray, each of shape (n, r)
        Trial matrices in ``ran(V2)``.
    tol : float
        Tolerance for membership in ``ran(V2)``, relative to ``||Z||_F``.

    Returns
    -------
    SepEstimate
        Kind ``"empirical-upper"``; ``witness`` is the best candidate. Ties
        keep the earliest candidate.

    Raises
    ------
    DimensionError
        If a candidate has the wrong shape or is zero.
    ValueError
        If a candidate is not in ``ran(V2)``.
    """
    best = np.inf
    witness = None
    count = 0
    for z in candidates:
        z = np.asarray(z, dtype=np.float64)
        if z.ndim == 1:
            z = z[:, None]
        if z.shape != (split.n, split.r):
            raise DimensionError(f"candidate has shape {z.shape}, expected {(split.n, split.r)}")
        znorm = np.linalg.norm(z)
        if znorm == 0:
            raise DimensionError("candidate is zero")
        leak = np.linalg.norm(split.v1.T @ z)
        if leak > tol * znorm:
            raise ValueError(f"candidate is not in ran(V2) (component {leak:.3e} along V1)")
        ratio = _probe_ratio(split, z)
        count += 1
        if ratio < best:
            best = ratio
            witness = z
    if count == 0:
        raise ValueError("at least one candidate is required")
    return SepEstimate(float(best), EMPIRICAL_UPPER, witness)


def random_probe_candidates(split, count, rng):
    """Random Gaussian candidates ``Z = P2 G`` in ``ran(V2)``."""
    out = []
    for _ in range(count):
        g = rng.standard_normal((split.n, split.r))
        out.append(split.project_out(g))
    return out


def _smoothed_rowmax(w, p):
    """``x -> ||row norms of W x||_p / ||x||_F`` and its gradient."""

    def fun(flat, shape):
        x = flat.reshape(shape)
        xn = np.linalg.norm(x)
        rows = w @ x
        t = np.sqrt(np.sum(rows**2, axis=1))
        tmax = t.max()
        if tmax == 0 or xn == 0:
            return np.inf, np.zeros_like(flat)
        big = tmax * np.sum((t / tmax) ** p) ** (1.0 / p)
        coef = (t / big) ** (p - 1) / np.maximum(t, 1e-300)
        dbig = w.T @ (rows * coef[:, None])
        val = big / xn
        grad = dbig / xn - val * x / xn**2
        return val, grad.ravel()

    return fun


def beta_w_estimate(w, num_starts=32, iters=500, seed=0, ncols=1):
    """Upper estimate of ``beta_W = inf ||W X||_{2,inf} / ||W||_{2,inf}``.

    The infimum runs over ``X`` with ``||X||_F = 1``. Each start draws a
    random ``X`` and minimizes a p-norm smoothing of the largest row norm
    with L-BFGS, raising ``p`` from 4 to 512 so the smoothed objective
    approaches the max. The returned value is the exact objective at the
    final iterate, so it is always a valid upper estimate.

    Parameters
    ----------
    w : ndarray, shape (n, m)
        Orthonormal basis.
    num_starts : int
        Number of random starts.
    iters : int
        L-BFGS iteration budget per smoothing stage.
    seed : int
        Seed of the random starts.
    ncols : int
        Number of columns of ``X``.

    Returns
    -------
    BetaEstimate
        The minimum over starts; ties resolve to the lowest start index.
    """
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    m = w.shape[1]
    wnorm = two_to_inf_norm(w)
    rng = np.random.Generator(np.random.Philox(seed))
    shape = (m, ncols)

    best_val = np.inf
    best_x = None
    for _ in range(num_starts):
        x = rng.standard_normal(shape)
        for p in (4.0, 16.0, 64.0, 512.0):
            res = optimize.minimize(_smoothed_rowmax(w, p), x.ravel(), args=(shape,), jac=True,
                                    method="L-BFGS-B", options={"maxiter": iters})
            x = res.x.reshape(shape)
        x = x / np.linalg.norm(x)
        val = two_to_inf_norm(w @ x) / wnorm
        if val < best_val:
            best_val, best_x = val, x
    return BetaEstimate(float(best_val), best_x)


def gap_certificate(split):
    """Certified lower bound on the gap of a spectral split.

    Returns
    -------
    GapCertificate
        ``gap_lower = min(sep2, sep2inf_lower)`` where ``sep2`` is the exact
        diagonal separation of ``(L1, L2)`` and ``sep2inf_lower`` is from
        :func:`sep_2inf_restricted_lower`.
    """
    if not isinstance(split, SpectralSplit):
        raise TypeError("gap_certificate expects a SpectralSplit")
    sep2 = sep_diag(split.lambda1, split.lambda2).value
    lower = sep_2inf_restricted_lower(split).value
    return GapCertificate(
        sep2=sep2,
        sepF=sep2,
        sep2inf_lower=lower,
        gap_lower=min(sep2, lower),
        method="diagonal-sep/restricted-lower",
    )
