"""Row-wise bounds for invariant subspaces of non-normal matrices.

For a square ``A`` with ordered complex Schur form::

    A = [U1 U2] [[T11, T12], [0, T22]] [U1 U2]^*,

where the eigenvalues of ``T11`` form a selected cluster, and a general
perturbation ``E`` (neither needs to be symmetric), there is an invariant
subspace ``U1hat`` of ``A + E`` near ``ran(U1)`` whenever
``||E||_2 <= gap/10`` and ``||T12||_2 <= gap/10``. The row-wise error
bound keeps the three-term shape of the symmetric case, with the
triangular blocks in place of the eigenvalue blocks.

All arithmetic here is complex. The aligned error minimizes over unitary
``Q`` (complex Procrustes).
"""

import json
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .exceptions import CertificateError, DegenerateSplitError, DimensionError
from .linalg import inv_sqrt_gram, sin_theta_distance, two_inf_subspace_error, two_to_inf_norm
from .newton import NKCertificate, NewtonOptions, _certificate, _chord_iterate
from .separation import sep_fro_kron

__all__ = [
    "KRON_MAX_BLOCK",
    "SchurSplit",
    "SchurSep",
    "SchurBoundReport",
    "SchurNewtonResult",
    "schur_split",
    "schur_sep",
    "schur_bound",
    "schur_newton",
    "schur_observed_error",
    "schur_subspace_distance",
    "ObservedSchurError",
]

#: Largest block size for which ``sep_F`` uses the Kronecker-form SVD.
KRON_MAX_BLOCK = 64

ALIGNMENT = "unitary"


@dataclass(frozen=True)
class SchurSplit:
    """Ordered complex Schur form split after the first ``r`` columns."""

    u1: np.ndarray
    u2: np.ndarray
    t11: np.ndarray
    t12: np.ndarray
    t22: np.ndarray

    @property
    def n(self):
        return self.u1.shape[0]

    @property
    def r(self):
        return self.u1.shape[1]

    @property
    def u(self):
        return np.hstack([self.u1, self.u2])

    @property
    def t(self):
        top = np.hstack([self.t11, self.t12])
        bottom = np.hstack([np.zeros((self.n - self.r, self.r), dtype=self.t22.dtype), self.t22])
        return np.vstack([top, bottom])

    def matrix(self):
        """Reassemble ``U T U^*``."""
        u = self.u
        return u @ self.t @ u.conj().T


def _select(eigs, r, selector):
    n = eigs.size
    if callable(selector):
        mask = np.asarray(selector(eigs), dtype=bool)
        if mask.shape != (n,):
            raise ValueError("selector must return one boolean per eigenvalue")
        if int(mask.sum()) != r:
            raise DegenerateSplitError(f"selector picked {int(mask.sum())} eigenvalues, expected {r}")
        return mask
    if selector == "largest-real":
        key = -eigs.real
    elif selector == "largest-magnitude":
        key = -np.abs(eigs)
    else:
        raise ValueError(f"unknown eigenvalue selector {selector!r}")
    order = np.argsort(key, kind="stable")
    mask = np.zeros(n, dtype=bool)
    mask[order[:r]] = True
    return mask


def _ordered_schur(a, mask):
    t, z = scipy.linalg.schur(a, output="complex")
    eigs = np.diag(t).copy()
    sel = mask(eigs) if callable(mask) else mask
    ts, qs, _, m, _, _, info = lapack.ztrsen(sel.astype(np.int32), t, z, job="N")
    if info != 0:
        raise DegenerateSplitError(f"Schur reordering failed (info={info}); eigenvalues too close")
    return np.triu(ts), qs, int(m)


def schur_split(a, r, eig_selector="largest-real", tol=1e-10):
    """Ordered complex Schur form with a selected cluster of ``r`` eigenvalues leading.

    Parameters
    ----------
    a : array_like, shape (n, n)
        Real or complex square matrix.
    r : int
        Cluster size, ``0 < r < n``.
    eig_selector : {"largest-real", "largest-magnitude"} or callable
        Which eigenvalues form the cluster. A callable receives the
        eigenvalues and returns a boolean mask with ``r`` true entries.
    tol : float
        The split is rejected when the certified ``sep_2(T11, T22)`` lower
        bound is at most ``tol * max(1, ||A||_2)``.

    Returns
    -------
    SchurSplit

    Raises
    ------
    DegenerateSplitError
        If the cluster is not separated from the rest of the spectrum.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionError(f"expected a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    n = a.shape[0]
    r = int(r)
    if not 0 < r < n:
        raise DimensionError(f"need 0 < r < n, got r={r}, n={n}")
    ts, qs, m = _ordered_schur(a, lambda eigs: _select(eigs, r, eig_selector))
    if m != r:
        raise DegenerateSplitError(f"reordering produced a cluster of size {m}, expected {r}")
    split = SchurSplit(
        u1=qs[:, :r].copy(),
        u2=qs[:, r:].copy(),
        t11=ts[:r, :r].copy(),
        t12=ts[:r, r:].copy(),
        t22=ts[r:, r:].copy(),
    )
    sep = schur_sep(split).sep2
    scale = max(1.0, float(np.linalg.norm(a, 2)))
    if not sep > tol * scale:
        raise DegenerateSplitError(f"cluster separation {sep:.3e} below tolerance")
    return split


@dataclass(frozen=True)
class SchurSep:
    """Certified lower bounds on the separations entering the Schur bound."""

    sep2: float
    sepF: float
    restricted_lower: float
    gap: float
    sepF_method: str


def _strict_upper(t):
    return t - np.diag(np.diag(t))


def _diagonal_sep2_lower(t11, t22):
    # sep_2 is 1-Lipschitz in each block, so perturbing from the diagonals
    # (after an imaginary shift) costs the norms of what is dropped.
    d1 = np.diag(t11)
    d2 = np.diag(t22)
    delta = float(np.min(d1.real) - np.max(d2.real))
    if delta <= 0:
        return 0.0
    im = np.concatenate([d1.imag, d2.imag])
    shift = 0.5 * (im.max() + im.min())
    drop = (np.max(np.abs(d1.imag - shift)) + np.max(np.abs(d2.imag - shift))
            + np.linalg.norm(_strict_upper(t11), 2) + np.linalg.norm(_strict_upper(t22), 2))
    return max(delta - float(drop), 0.0)


def _sep_fro_lower(t11, t22):
    if max(t11.shape[0], t22.shape[0]) <= KRON_MAX_BLOCK:
        return sep_fro_kron(t11, t22).value, "kronecker-svd"
    d1 = np.diag(t11)
    d2 = np.diag(t22)
    base = float(np.min(np.abs(d1[:, None] - d2[None, :])))
    drop = np.linalg.norm(_strict_upper(t11), 2) + np.linalg.norm(_strict_upper(t22), 2)
    return max(base - float(drop), 0.0), "diagonal-minus-offdiagonal"


def schur_sep(split):
    """Certified lower bounds on ``sep_2(T11, T22)`` and the gap.

    ``sep_2`` is bounded below by the larger of ``sep_F / sqrt(min(r, n - r))``
    and a real-part ordering bound; the restricted two-to-infinity separation
    by the larger of ``sep_F / sqrt(n)`` and
    ``sigma_min(T11) - ||U2 T22 U2^*||_inf``.

    Returns
    -------
    SchurSep
    """
    t11, t22 = split.t11, split.t22
    sep_f, method = _sep_fro_lower(t11, t22)
    k = min(split.r, split.n - split.r)
    sep2 = max(sep_f / np.sqrt(k), _diagonal_sep2_lower(t11, t22))
    c = (split.u2 @ t22) @ split.u2.conj().T
    c_inf = float(np.max(np.sum(np.abs(c), axis=1)))
    smin = float(np.linalg.svd(t11, compute_uv=False)[-1])
    restricted = max(sep_f / np.sqrt(split.n), smin - c_inf, 0.0)
    return SchurSep(float(sep2), float(sep_f), float(restricted), float(min(sep2, restricted)), method)


@dataclass(frozen=True)
class SchurBoundReport:
    """Three-term bound for a Schur-form invariant subspace.

    ``term_quadratic`` uses ``||E21||_2``, which agrees with the symmetric
    bound when ``A`` is symmetric; ``term_quadratic_enorm`` is the same term
    with ``||E||_2`` in its place.
    """

    term_quadratic: float
    term_cross: float
    term_submult: float
    total: float
    gap_used: float
    assumptions_ok: bool
    observed_error: float
    dk_reference: float
    sep2: float
    e_norm: float
    e21_norm: float
    t12_norm: float
    e_norm_ok: bool
    t12_ok: bool
    term_quadratic_enorm: float
    alignment: str = ALIGNMENT

    @property
    def applicable(self):
        return self.assumptions_ok

    @property
    def total_enorm(self):
        return self.term_quadratic_enorm + self.term_cross + self.term_submult

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def _check_e(split, e):
    e = np.asarray(e)
    if e.shape != (split.n, split.n):
        raise DimensionError(f"E has shape {e.shape}, expected {(split.n, split.n)}")
    if not np.all(np.isfinite(e)):
        raise ValueError("E has non-finite entries")
    return e


def _project_out(u1, z):
    return z - u1 @ (u1.conj().T @ z)


def schur_bound(split, e, *, evaluate=False, a=None, sep=None):
    """Evaluate the Schur-form bound and its applicability.

    Parameters
    ----------
    split : SchurSplit
    e : array_like, shape (n, n)
        Arbitrary (real or complex) perturbation.
    evaluate : bool
        Also compute the observed aligned error of ``A + E`` with
        :func:`schur_observed_error`.
    a : ndarray, optional
        ``A`` itself; rebuilt from the split when omitted.
    sep : SchurSep, optional
        Precomputed separations.

    Returns
    -------
    SchurBoundReport
        Inapplicability is reported through ``assumptions_ok`` rather than
        raised.
    """
    e = _check_e(split, e)
    sep = schur_sep(split) if sep is None else sep
    u1 = split.u1
    e_norm = float(np.linalg.norm(e, 2))
    t12_norm = float(np.linalg.norm(split.t12, 2)) if split.t12.size else 0.0
    p2eu1 = _project_out(u1, e @ u1)
    e21 = float(np.linalg.norm(p2eu1, 2))
    p2ep2 = _project_out(u1, _project_out(u1, e.conj().T).conj().T)
    v1_inf = two_to_inf_norm(u1)
    g = sep.gap
    sep2 = sep.sep2
    if g > 0:
        quad = 8.0 * v1_inf * (e21 / sep2) ** 2
        quad_e = 8.0 * v1_inf * (e_norm / sep2) ** 2
        cross = 2.0 * two_to_inf_norm(p2eu1) / g
        sub = 4.0 * two_to_inf_norm(p2ep2) * e21 / (g * sep2)
        dk = 2.0 * e21 / sep2
    else:
        quad = quad_e = cross = sub = dk = np.inf
    e_ok = bool(e_norm <= g / 10.0)
    t_ok = bool(t12_norm <= g / 10.0)
    observed = None
    if evaluate:
        a = split.matrix() if a is None else np.asarray(a)
        observed = schur_observed_error(split, a + e).aligned_error
    return SchurBoundReport(
        term_quadratic=float(quad),
        term_cross=float(cross),
        term_submult=float(sub),
        total=float(quad + cross + sub),
        gap_used=float(g),
        assumptions_ok=e_ok and t_ok,
        observed_error=None if observed is None else float(observed),
        dk_reference=float(dk),
        sep2=float(sep2),
        e_norm=e_norm,
        e21_norm=e21,
        t12_norm=t12_norm,
        e_norm_ok=e_ok,
        t12_ok=t_ok,
        term_quadratic_enorm=float(quad_e),
    )


@dataclass(frozen=True)
class ObservedSchurError:
    aligned_error: float
    frob_error: float
    u1hat: np.ndarray


def schur_observed_error(split, ahat):
    """Aligned error of the perturbed cluster, from an ordered Schur form of ``ahat``.

    The eigenvalues of ``ahat`` assigned to the cluster are the ``r`` that
    are relatively closest to the spectrum of ``T11`` (distance to the
    cluster minus distance to the rest).
    """
    ahat = np.asarray(ahat)
    c1 = np.diag(split.t11)
    c2 = np.diag(split.t22)
    r = split.r

    def select(eigs):
        d1 = np.min(np.abs(eigs[:, None] - c1[None, :]), axis=1)
        d2 = np.min(np.abs(eigs[:, None] - c2[None, :]), axis=1)
        order = np.argsort(d1 - d2, kind="stable")
        mask = np.zeros(eigs.size, dtype=bool)
        mask[order[:r]] = True
        return mask

    _, qs, _ = _ordered_schur(ahat, select)
    u1hat = qs[:, :r]
    err = two_inf_subspace_error(u1hat, split.u1)
    return ObservedSchurError(err.aligned_error, err.frob_error, u1hat)


@dataclass(frozen=True)
class SchurNewtonResult:
    x: np.ndarray
    u1hat: np.ndarray
    residual: float
    iters: int
    certificate: NKCertificate
    residuals: tuple


def schur_newton(split, e, opts=None):
    """Perturbed invariant subspace of ``A + E`` by the frozen-Jacobian iteration.

    With ``Ahat = U^* (A + E) U`` in blocks, the iteration solves
    ``-Ahat21 + X Ahat11 - Ahat22 X + X Ahat12 X = 0``; then
    ``U1hat = (U1 + U2 X)(I + X^* X)^{-1/2}``. The convergence certificate
    uses ``||Ahat12||_2`` where the symmetric case uses ``||E12||_2``.

    Raises
    ------
    CertificateError
        If ``opts.check_certificate`` and the certificate is invalid.
    ConvergenceError
    """
    opts = NewtonOptions() if opts is None else opts
    e = _check_e(split, e)
    r = split.r
    u = split.u
    ahat = u.conj().T @ (split.matrix() + e) @ u
    a11, a12 = ahat[:r, :r], ahat[:r, r:]
    a21, a22 = ahat[r:, :r], ahat[r:, r:]
    sep = schur_sep(split)
    e_norm = float(np.linalg.norm(e, 2))
    cert = _certificate(sep.sep2, e_norm, float(np.linalg.norm(a21, 2)), float(np.linalg.norm(a12, 2)))
    if opts.check_certificate and not cert.valid:
        raise CertificateError("Newton-Kantorovich certificate invalid for this instance", cert)
    scale = float(np.max(np.abs(np.diag(split.t)))) + e_norm
    target = opts.tol * max(scale, np.finfo(float).tiny)

    def residual(x):
        return -a21 + x @ a11 - a22 @ x + x @ (a12 @ x)

    def solve(f):
        return scipy.linalg.solve_sylvester(-a22, a11, f)

    x0 = np.zeros((split.n - r, r), dtype=ahat.dtype)
    x, f, history = _chord_iterate(residual, solve, x0, target, opts.max_iters)
    u1hat = (split.u1 + split.u2 @ x) @ inv_sqrt_gram(x)
    return SchurNewtonResult(x, u1hat, history[-1], len(history) - 1, cert, tuple(history))


def schur_subspace_distance(split, u1hat):
    """Sine of the largest principal angle between ``ran(U1)`` and ``ran(u1hat)``."""
    return sin_theta_distance(split.u1, u1hat)
