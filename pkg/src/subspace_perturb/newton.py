"""Perturbed dominant subspace via a frozen-Jacobian Newton iteration.

Write ``Ahat = A + E`` in the eigenbasis ``[V1 V2]`` of ``A``. A matrix
``X`` of shape (n - r, r) spans an invariant subspace ``ran(V1 + V2 X)`` of
``Ahat`` exactly when it is a root of the quadratic map::

    F(X) = -Ahat21 + X Ahat11 - Ahat22 X + X Ahat12 X.

Starting from ``X0 = 0`` the iteration ``X_{t+1} = X_t - S^{-1} F(X_t)``
uses the Sylvester operator ``S(Z) = Z Ahat11 - Ahat22 Z``, i.e. the
Jacobian of ``F`` at zero, kept fixed. The Newton-Kantorovich theorem gives
a computable certificate for its convergence.

From the root ``Xhat`` orthonormal bases of the perturbed invariant
subspaces are::

    V1hat = (V1 + V2 Xhat) (I + Xhat^T Xhat)^{-1/2}
    V2hat = (V2 - V1 Xhat^T) (I + Xhat Xhat^T)^{-1/2}

and ``V1hat^T V1`` is symmetric positive definite, so the Procrustes
alignment of ``V1hat`` to ``V1`` is the identity.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    CertificateError,
    ConvergenceError,
    DimensionError,
    SingularOperatorError,
)
from .linalg import (
    PerturbationBlocks,
    SpectralSplit,
    as_symmetric,
    inv_sqrt_gram,
    project_blocks,
    spectral_split,
    sym_norm2,
)

__all__ = [
    "NewtonOptions",
    "NKCertificate",
    "NewtonResult",
    "MatrixFreeResult",
    "InclusionReport",
    "sylvester_solve",
    "perturbed_blocks",
    "quadratic_residual",
    "nk_certificate",
    "newton_subspace",
    "newton_subspace_matfree",
    "eigenvalue_inclusion_check",
    "instance_key",
]


@dataclass(frozen=True)
class NewtonOptions:
    """Stopping rule of the iteration.

    Attributes
    ----------
    tol : float
        Stop once ``||F(X)||_F <= tol * (||A||_2 + ||E||_2)``.
    max_iters : int
        Maximum number of corrections.
    check_certificate : bool
        Refuse to run when the convergence certificate is invalid.
    """

    tol: float = 1e-13
    max_iters: int = 50
    check_certificate: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass(frozen=True)
class NKCertificate:
    """Newton-Kantorovich constants for the frozen-Jacobian iteration.

    ``h = eta * kappa / (1 - delta)^2``; the certificate is valid when
    ``delta < 1`` and ``h < 1/2``. ``sep_lower`` is the lower bound on
    ``sep_2(Ahat11, Ahat22)`` used to bound ``||S^{-1}||``.
    """

    eta: float
    delta: float
    kappa: float
    h: float
    valid: bool
    sep_lower: float

    def to_dict(self):
        return {
            "eta": self.eta,
            "delta": self.delta,
            "kappa": self.kappa,
            "h": self.h,
            "valid": self.valid,
            "sep_lower": self.sep_lower,
        }


@dataclass(frozen=True)
class NewtonResult:
    """Root of the quadratic map and the bases built from it.

    Attributes
    ----------
    xhat : ndarray, shape (n - r, r)
    v1hat, v2hat : ndarray
        Orthonormal bases of the perturbed dominant subspace and its
        complement.
    residual : float
        ``||F(xhat)||_F``.
    iters : int
        Number of corrections applied.
    certificate : NKCertificate
    residuals : tuple of float
        Residual before each correction and after the last one.
    yhat : ndarray, shape (n, r)
        ``V2 xhat``, the basis-independent form of the root.
    scale : float
        ``||A||_2 + ||E||_2``.
    key : str
        Hash of the inputs, see :func:`instance_key`.
    """

    xhat: np.ndarray
    v1hat: np.ndarray
    v2hat: np.ndarray
    residual: float
    iters: int
    certificate: NKCertificate
    residuals: tuple = field(default=())
    yhat: np.ndarray | None = None
    scale: float = float("nan")
    key: str = ""


@dataclass(frozen=True)
class MatrixFreeResult:
    """Output of :func:`newton_subspace_matfree` (no complement basis)."""

    yhat: np.ndarray
    v1hat: np.ndarray
    residual: float
    iters: int
    certificate: NKCertificate
    residuals: tuple = field(default=())
    scale: float = float("nan")


@dataclass(frozen=True)
class InclusionReport:
    """Diagnostics of the eigenvalue-inclusion check.

    ``ok`` is true when both inclusions and the dominance condition hold.
    The object is truthy exactly when ``ok`` is.
    """

    ok: bool
    first_block_eigs: np.ndarray
    second_block_eigs: np.ndarray
    first_excess: float
    second_excess: float
    dominance_margin: float

    def __bool__(self):
        return bool(self.ok)


def instance_key(split, e):
    """Hash tying a result to the split ``(V1, L1, L2)`` and perturbation ``E``."""
    h = hashlib.sha256()
    for arr in (split.v1, split.lambda1, split.lambda2, e):
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        h.update(repr(arr.shape).encode())
        h.update(arr.tobytes())
    return h.hexdigest()


def sylvester_solve(a11, a22, f, collision_tol=1e-14):
    """Solve ``Z a11 - a22 Z = f`` for symmetric ``a11`` and ``a22``.

    Both blocks are diagonalized, after which the equation decouples into
    an entrywise division by eigenvalue differences.

    Parameters
    ----------
    a11 : ndarray, shape (r, r)
    a22 : ndarray, shape (m, m)
    f : ndarray, shape (m, r)
    collision_tol : float
        Eigenvalue differences below ``collision_tol * (||a11|| + ||a22||)``
        are treated as a singular operator.

    Returns
    -------
    ndarray, shape (m, r)

    Raises
    ------
    SingularOperatorError
        If the spectra of ``a11`` and ``a22`` (numerically) intersect.
    """
    return _DiagonalSylvester(a11, a22, collision_tol)(f)


class _DiagonalSylvester:
    """Reusable solver for ``Z a11 - a22 Z = f`` (blocks diagonalized once)."""

    def __init__(self, a11, a22, collision_tol=1e-14):
        a11 = np.atleast_2d(np.asarray(a11, dtype=np.float64))
        a22 = np.atleast_2d(np.asarray(a22, dtype=np.float64))
        if a11.shape[0] != a11.shape[1] or a22.shape[0] != a22.shape[1]:
            raise DimensionError("Sylvester blocks must be square")
        self.t1, self.q1 = np.linalg.eigh(0.5 * (a11 + a11.T))
        self.t2, self.q2 = np.linalg.eigh(0.5 * (a22 + a22.T))
        scale = max(np.max(np.abs(self.t1)), np.max(np.abs(self.t2)), 0.0)
        scale = 2.0 * scale if scale > 0 else 1.0
        self.denom = self.t1[None, :] - self.t2[:, None]
        if np.min(np.abs(self.denom)) < collision_tol * scale:
            raise SingularOperatorError("spectra of the Sylvester blocks intersect")

    def __call__(self, f):
        f = np.asarray(f, dtype=np.float64)
        if f.shape != self.denom.shape:
            raise DimensionError(f"right-hand side has shape {f.shape}, expected {self.denom.shape}")
        g = self.q2.T @ f @ self.q1
        return self.q2 @ (g / self.denom) @ self.q1.T


def perturbed_blocks(split, blocks):
    """Blocks of ``Ahat = A + E`` in the eigenbasis of ``A``."""
    a11 = blocks.e11 + np.diag(split.lambda1)
    a22 = blocks.e22.copy()
    a22[np.diag_indices_from(a22)] += split.lambda2
    return PerturbationBlocks(e11=a11, e12=blocks.e12, e21=blocks.e21, e22=a22)


def quadratic_residual(x, ahat_blocks):
    """Evaluate ``F(X) = -Ahat21 + X Ahat11 - Ahat22 X + X Ahat12 X``.

    Parameters
    ----------
    x : ndarray, shape (n - r, r)
    ahat_blocks : PerturbationBlocks
        Blocks of ``Ahat`` (see :func:`perturbed_blocks`).
    """
    b = ahat_blocks
    return -b.e21 + x @ b.e11 - b.e22 @ x + x @ (b.e12 @ x)


def _certificate(sep2, e_norm, e21_norm, e12_norm):
    sep_lower = sep2 - 2.0 * e_norm
    if not sep_lower > 0:
        return NKCertificate(np.inf, 0.0, np.inf, np.inf, False, float(sep_lower))
    eta = e21_norm / sep_lower
    kappa = e12_norm / sep_lower
    h = eta * kappa
    return NKCertificate(float(eta), 0.0, float(kappa), float(h), bool(h < 0.5), float(sep_lower))


def nk_certificate(split, blocks, e_norm=None):
    """Newton-Kantorovich certificate for the iteration on ``(split, E)``.

    Uses ``sep_2(Ahat11, Ahat22) >= sep_2(L1, L2) - 2 ||E||_2``; a
    non-positive lower bound yields an invalid certificate.

    Parameters
    ----------
    split : SpectralSplit
    blocks : PerturbationBlocks
        Blocks of the perturbation ``E``.
    e_norm : float, optional
        ``||E||_2`` if already known.
    """
    if e_norm is None:
        e_norm = blocks.norm2()
    sep2 = float(split.lambda1[-1] - split.lambda2[0])
    e21 = float(np.linalg.norm(blocks.e21, 2))
    e12 = float(np.linalg.norm(blocks.e12, 2))
    return _certificate(sep2, float(e_norm), e21, e12)


def _chord_iterate(residual_fn, solve_fn, x0, target, max_iters, inner_rtol=None):
    """Run ``x <- x - solve(residual(x))`` until ``||residual|| <= target``.

    Returns the final iterate, its residual matrix and the residual history.
    ``inner_rtol``, when given, maps the current residual norm to the
    relative tolerance passed to an inexact ``solve_fn``.
    """
    x = x0
    f = residual_fn(x)
    res = float(np.linalg.norm(f))
    history = [res]
    iters = 0
    while res > target:
        if iters >= max_iters:
            raise ConvergenceError(
                f"no convergence in {max_iters} iterations (residual {res:.3e})",
                residual=res,
                iters=iters,
            )
        if inner_rtol is None:
            step = solve_fn(f)
        else:
            step = solve_fn(f, inner_rtol(res))
        x = x - step
        f = residual_fn(x)
        res = float(np.linalg.norm(f))
        iters += 1
        history.append(res)
        if not np.isfinite(res) or res > 1e6 * (history[0] + target):
            raise ConvergenceError("iteration diverged", residual=res, iters=iters)
    return x, f, history


def _complement_inv_sqrt_apply(m, x):
    """Return ``m (I + x x^T)^{-1/2}`` using a thin SVD of ``x``."""
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    d = 1.0 / np.sqrt(1.0 + s**2) - 1.0
    return m + ((m @ u) * d) @ u.T


def newton_subspace(a, e, r, opts=None, split=None):
    """Perturbed dominant invariant subspace of ``A + E``.

    Parameters
    ----------
    a, e : array_like, shape (n, n)
        Symmetric matrix and symmetric perturbation.
    r : int
        Dimension of the dominant subspace.
    opts : NewtonOptions, optional
    split : SpectralSplit, optional
        Precomputed split of ``a`` at rank ``r``. When omitted it is computed
        with :func:`spectral_split`.

    Returns
    -------
    NewtonResult

    Raises
    ------
    CertificateError
        If ``opts.check_certificate`` is set and either
        ``||E||_2 > sep_2(L1, L2) / 4`` or the certificate is invalid.
    ConvergenceError
        If the residual tolerance is not met within ``opts.max_iters``.
    """
    opts = NewtonOptions() if opts is None else opts
    a = as_symmetric(a)
    e = as_symmetric(e)
    if a.shape != e.shape:
        raise DimensionError(f"A has shape {a.shape} but E has shape {e.shape}")
    if split is None:
        split = spectral_split(a, r)
    elif split.r != r or split.n != a.shape[0]:
        raise DimensionError("split does not match (n, r)")
    blocks = project_blocks(e, split)
    e_norm = sym_norm2(e)
    cert = nk_certificate(split, blocks, e_norm=e_norm)
    sep2 = split.eigengap
    if opts.check_certificate:
        if e_norm > sep2 / 4:
            raise CertificateError(
                f"||E||_2 = {e_norm:.3e} exceeds sep_2/4 = {sep2 / 4:.3e}", cert
            )
        if not cert.valid:
            raise CertificateError("Newton-Kantorovich certificate is invalid", cert)
    ahat = perturbed_blocks(split, blocks)
    scale = float(max(abs(split.lambda1[0]), abs(split.lambda2[-1]))) + e_norm
    solver = _DiagonalSylvester(ahat.e11, ahat.e22)
    x0 = np.zeros((split.n - r, r))
    xhat, _, history = _chord_iterate(
        lambda x: quadratic_residual(x, ahat),
        solver,
        x0,
        opts.tol * scale,
        opts.max_iters,
    )
    v1hat = (split.v1 + split.v2 @ xhat) @ inv_sqrt_gram(xhat)
    v2hat = _complement_inv_sqrt_apply(split.v2 - split.v1 @ xhat.T, xhat)
    return NewtonResult(
        xhat=xhat,
        v1hat=v1hat,
        v2hat=v2hat,
        residual=history[-1],
        iters=len(history) - 1,
        certificate=cert,
        residuals=tuple(history),
        yhat=split.v2 @ xhat,
        scale=scale,
        key=instance_key(split, e),
    )


def _shifted_cg(apply_op, b, shifts, rtol, maxiter=1000):
    """Conjugate gradients on ``(shift_j I - M) z_j = b_j`` for all columns at once.

    ``apply_op`` applies the symmetric operator ``M`` to an (n, k) block.
    Every shifted operator must be positive definite on the relevant
    subspace.
    """
    x = np.zeros_like(b)
    res = b.copy()
    p = res.copy()
    rs = np.sum(res * res, axis=0)
    bnorm = np.sqrt(rs)
    target = np.maximum(rtol * bnorm, 1e-300)
    for _ in range(maxiter):
        if np.all(np.sqrt(rs) <= target):
            return x
        ap = p * shifts - apply_op(p)
        curv = np.sum(p * ap, axis=0)
        curv = np.where(curv > 0, curv, np.inf)
        alpha = rs / curv
        x += p * alpha
        res -= ap * alpha
        rs_new = np.sum(res * res, axis=0)
        beta = np.where(rs > 0, rs_new / np.where(rs > 0, rs, 1.0), 0.0)
        p = res + p * beta
        rs = rs_new
    if np.all(np.sqrt(rs) <= 10 * target):
        return x
    raise ConvergenceError("inner conjugate-gradient solve did not converge",
                           residual=float(np.max(np.sqrt(rs))))


def newton_subspace_matfree(a, e, split, opts=None, e_norm=None):
    """Matrix-free variant of :func:`newton_subspace` for large ``n``.

    Works with ``Y = V2 X`` in ambient coordinates, touching ``V2`` only
    through the projector ``P2 = I - V1 V1^T``::

        G(Y) = -P2 Ahat V1 + Y Ahat11 - P2 Ahat Y + Y (V1^T Ahat Y).

    ``||G(Y)||_F = ||F(X)||_F`` so the residuals agree with the dense
    variant. Each correction solves the frozen Sylvester equation by
    diagonalizing the small block ``Ahat11`` and running conjugate gradients
    on ``theta_j I - P2 Ahat P2`` for each of its eigenvalues ``theta_j``;
    these operators are positive definite whenever the certificate is valid.

    Parameters
    ----------
    a, e : ndarray, shape (n, n)
        Symmetric matrix and perturbation; not re-validated.
    split : SpectralSplit
        Split of ``a``.
    opts : NewtonOptions, optional
    e_norm : float, optional
        ``||E||_2`` when already known.

    Returns
    -------
    MatrixFreeResult

    Raises
    ------
    CertificateError
        If the certificate is invalid (the inner solver needs it regardless
        of ``opts.check_certificate``).
    ConvergenceError
    """
    opts = NewtonOptions() if opts is None else opts
    v1 = split.v1
    ahat = a + e
    ev1 = e @ v1
    p2ev1 = split.project_out(ev1)
    e21_norm = float(np.linalg.norm(p2ev1, 2))
    if e_norm is None:
        e_norm = sym_norm2(e)
    cert = _certificate(split.eigengap, float(e_norm), e21_norm, e21_norm)
    if not cert.valid:
        raise CertificateError("Newton-Kantorovich certificate is invalid", cert)
    scale = float(max(abs(split.lambda1[0]), abs(split.lambda2[-1]))) + float(e_norm)
    a11 = v1.T @ (ahat @ v1)
    a11 = 0.5 * (a11 + a11.T)
    theta, q = np.linalg.eigh(a11)
    rhs0 = p2ev1  # P2 Ahat V1 = P2 E V1 because P2 A V1 = 0

    def residual(y):
        ay = ahat @ y
        return -rhs0 + y @ a11 - split.project_out(ay) + y @ (v1.T @ ay)

    def apply_op(z):
        return split.project_out(ahat @ split.project_out(z))

    def solve(g, rtol):
        gq = split.project_out(g) @ q
        zq = _shifted_cg(apply_op, gq, theta, rtol)
        return split.project_out(zq) @ q.T

    target = opts.tol * scale

    def inner_rtol(res):
        return float(np.clip(0.01 * target / max(res, 1e-300), 1e-15, 1e-2))

    y0 = np.zeros_like(v1)
    yhat, _, history = _chord_iterate(residual, solve, y0, target, opts.max_iters, inner_rtol)
    v1hat = (v1 + yhat) @ inv_sqrt_gram(yhat)
    return MatrixFreeResult(
        yhat=yhat,
        v1hat=v1hat,
        residual=history[-1],
        iters=len(history) - 1,
        certificate=cert,
        residuals=tuple(history),
        scale=scale,
    )


def _distance_to_set(values, centers):
    return np.min(np.abs(values[:, None] - centers[None, :]), axis=1)


def eigenvalue_inclusion_check(result, split, blocks, e_norm=None, rtol=1e-12):
    """Check that ``V1hat`` spans the dominant invariant subspace of ``Ahat``.

    Verifies that the eigenvalues of ``V1hat^T Ahat V1hat`` lie within
    ``2 ||E||_2`` of those of ``L1``, that those of ``V2hat^T Ahat V2hat``
    lie within ``2 ||E||_2`` of those of ``L2``, and that the first set lies
    strictly above the second.

    Parameters
    ----------
    result : NewtonResult
    split : SpectralSplit
    blocks : PerturbationBlocks
        Blocks of ``E``.
    e_norm : float, optional
    rtol : float
        Slack for rounding, relative to ``||Ahat||``.

    Returns
    -------
    InclusionReport
    """
    if e_norm is None:
        e_norm = blocks.norm2()
    x = result.xhat
    r = split.r
    full = perturbed_blocks(split, blocks).assemble()
    m1 = np.vstack([np.eye(r), x]) @ inv_sqrt_gram(x)
    m2 = _complement_inv_sqrt_apply(np.vstack([-x.T, np.eye(split.n - r)]), x)
    k1 = m1.T @ full @ m1
    k2 = m2.T @ full @ m2
    eig1 = np.linalg.eigvalsh(0.5 * (k1 + k1.T))
    eig2 = np.linalg.eigvalsh(0.5 * (k2 + k2.T))
    slack = rtol * (np.max(np.abs(full)) * full.shape[0] + e_norm)
    radius = 2.0 * e_norm + slack
    excess1 = float(np.max(_distance_to_set(eig1, split.lambda1)) - radius)
    excess2 = float(np.max(_distance_to_set(eig2, split.lambda2)) - radius)
    margin = float(eig1.min() - eig2.max())
    ok = excess1 <= 0 and excess2 <= 0 and margin > 0
    return InclusionReport(bool(ok), eig1, eig2, excess1, excess2, margin)
