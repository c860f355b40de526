"""Row-wise perturbation bounds for the dominant invariant subspace.

Notation: ``A = V1 L1 V1^T + V2 L2 V2^T`` is split at rank ``r`` with
``sep2 = lambda_r - lambda_{r+1}``; ``E`` is a symmetric perturbation with
blocks ``E_ij = V_i^T E V_j``; ``gap`` is a certified lower bound on
``min(sep2, restricted two-to-infinity separation)``. If
``||E||_2 <= gap / 5``, the dominant subspace ``V1hat`` of ``A + E`` aligned
to ``V1`` by orthogonal Procrustes satisfies::

    ||V1hat U - V1||_{2,inf} <= 8 ||V1||_{2,inf} (||E21||_2 / sep2)^2
                              + 2 ||V2 E21||_{2,inf} / gap
                              + 4 ||V2 E22 V2^T||_{2,inf} ||E21||_2 / (gap sep2)

All quantities are basis independent, so they are evaluated through the
projector ``P2 = I - V1 V1^T``: ``V2 E21 = P2 E V1`` and
``V2 E22 V2^T = P2 E P2``. This keeps the cost at ``O(n^2 r)``.
"""

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import (
    AssumptionError,
    CertificateError,
    ConvergenceError,
    DimensionError,
    StaleResultError,
)
from .linalg import (
    SpectralSplit,
    as_symmetric,
    sym_norm2,
    two_inf_subspace_error,
    two_to_inf_norm,
)
from .newton import NewtonOptions, instance_key, newton_subspace_matfree
from .separation import gap_certificate
from .stats import fit_slope, record_value, summarize

__all__ = [
    "BoundReport",
    "RateCheck",
    "BlockNorms",
    "ObservedError",
    "block_norms",
    "incoherence",
    "compressed_two_inf_norm",
    "observed_subspace_error",
    "theorem_main_bound",
    "corollary_infbound",
    "lemma_y_bound",
    "two_perturbation_bound",
    "probg_rate_check",
]

_REPORT_FIELDS = (
    "term_quadratic",
    "term_cross",
    "term_submult",
    "total",
    "gap_used",
    "assumptions_ok",
    "observed_error",
    "dk_reference",
    "sep2",
    "e_norm",
    "e21_norm",
    "variant",
)


@dataclass(frozen=True)
class BoundReport:
    """Terms of the row-wise bound and its hypothesis check.

    The first eight fields follow the order used by the JSON and CSV
    serializations; ``sep2``, ``e_norm`` (``||E||_2``), ``e21_norm`` and
    ``variant`` are diagnostics appended after them. ``variant`` is
    ``"theorem"`` for the three-term bound and ``"corollary-inf"`` for the
    two-term bound of :func:`corollary_infbound` (where ``term_cross``
    carries the doubled cross term and ``assumptions_ok`` doubles as the
    applicability marker). ``dk_reference = 2 ||E21||_2 / sep2`` is the
    classical sin-theta scale, included for comparison.
    """

    term_quadratic: float
    term_cross: float
    term_submult: float
    total: float
    gap_used: float
    assumptions_ok: bool
    observed_error: float | None
    dk_reference: float
    sep2: float = float("nan")
    e_norm: float = float("nan")
    e21_norm: float = float("nan")
    variant: str = "theorem"

    @property
    def applicable(self):
        return self.assumptions_ok

    def to_dict(self):
        return {name: getattr(self, name) for name in _REPORT_FIELDS}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @staticmethod
    def csv_header():
        return ",".join(_REPORT_FIELDS)

    def to_csv_row(self):
        vals = []
        for name in _REPORT_FIELDS:
            v = getattr(self, name)
            if v is None:
                vals.append("")
            elif isinstance(v, bool):
                vals.append("true" if v else "false")
            elif isinstance(v, str):
                vals.append(v)
            else:
                vals.append(repr(float(v)))
        return ",".join(vals)


@dataclass(frozen=True)
class BlockNorms:
    """Norms of the perturbation entering the bounds."""

    e_norm: float
    e21_norm: float
    v2e21_two_inf: float
    v2e22v2_two_inf: float
    v1_two_inf: float


@dataclass(frozen=True)
class ObservedError:
    """Observed subspace error and how it was computed."""

    aligned_error: float
    frob_error: float
    v1hat: np.ndarray
    method: str
    newton_iters: int


@dataclass(frozen=True)
class RateCheck:
    fitted_slope: float
    predicted_slope: float
    dominant_term: str


def compressed_two_inf_norm(e, v1, ev1=None, chunk=256):
    """``||P2 E P2||_{2,inf}`` with ``P2 = I - V1 V1^T``, without forming ``P2``.

    Rows are produced in chunks from
    ``P2 E P2 = E - V1 W^T - W V1^T + V1 (V1^T W) V1^T`` with ``W = E V1``.
    """
    w = e @ v1 if ev1 is None else ev1
    c = v1.T @ w
    best = 0.0
    for start in range(0, e.shape[0], chunk):
        sl = slice(start, start + chunk)
        block = e[sl] - v1[sl] @ w.T - w[sl] @ v1.T + (v1[sl] @ c) @ v1.T
        best = max(best, float(np.sqrt(np.max(np.sum(block * block, axis=1)))))
    return best


def block_norms(split, e, e_norm=None):
    """Evaluate the perturbation norms used by the bounds.

    Parameters
    ----------
    split : SpectralSplit
    e : ndarray, shape (n, n)
        Symmetric perturbation (not re-validated).
    e_norm : float, optional
        ``||E||_2`` when already known; otherwise computed densely.
    """
    v1 = split.v1
    ev1 = e @ v1
    p2ev1 = split.project_out(ev1)
    if e_norm is None:
        e_norm = sym_norm2(e)
    return BlockNorms(
        e_norm=float(e_norm),
        e21_norm=float(np.linalg.norm(p2ev1, 2)),
        v2e21_two_inf=two_to_inf_norm(p2ev1),
        v2e22v2_two_inf=compressed_two_inf_norm(e, v1, ev1),
        v1_two_inf=two_to_inf_norm(v1),
    )


def incoherence(v1):
    """``mu = sqrt(n) ||V1||_{2,inf}``; between 1 and ``sqrt(n)``."""
    v1 = np.atleast_2d(v1)
    return float(np.sqrt(v1.shape[0]) * two_to_inf_norm(v1))


def _validate(split, e):
    if not isinstance(split, SpectralSplit):
        raise TypeError("expected a SpectralSplit")
    e = as_symmetric(e)
    if e.shape[0] != split.n:
        raise DimensionError(f"E has size {e.shape[0]}, split has n={split.n}")
    return e


def observed_subspace_error(a, e, split, e_norm=None, opts=None):
    """Procrustes-aligned error of the perturbed dominant subspace.

    The perturbed basis comes from the matrix-free Newton iteration when its
    certificate is valid; otherwise (or if it fails to converge) from a dense
    eigensolver on ``A + E``.

    Returns
    -------
    ObservedError
    """
    r = split.r
    opts = NewtonOptions() if opts is None else opts
    v1hat = None
    method = "dense-eigensolver"
    iters = 0
    try:
        res = newton_subspace_matfree(a, e, split, opts=opts, e_norm=e_norm)
        v1hat = res.v1hat
        iters = res.iters
        method = "newton"
    except (CertificateError, ConvergenceError):
        v1hat = None
    if v1hat is None:
        n = split.n
        _, vecs = scipy.linalg.eigh(a + e, subset_by_index=[n - r, n - 1], check_finite=False)
        v1hat = vecs[:, ::-1]
    err = two_inf_subspace_error(v1hat, split.v1)
    return ObservedError(err.aligned_error, err.frob_error, v1hat, method, iters)


def theorem_main_bound(split, e, *, e_norm=None, observed_error=None, a=None,
                       evaluate=False, newton_opts=None, gap=None):
    """Three-term row-wise bound on the perturbed dominant subspace.

    Parameters
    ----------
    split : SpectralSplit
        Split of the unperturbed matrix ``A``.
    e : array_like, shape (n, n)
        Symmetric perturbation.
    e_norm : float, optional
        ``||E||_2`` if already known.
    observed_error : float, optional
        Observed aligned error to attach to the report.
    a : ndarray, optional
        The matrix ``A``; needed with ``evaluate=True`` (rebuilt from the
        split if omitted).
    evaluate : bool
        Compute the observed error with :func:`observed_subspace_error`.
    newton_opts : NewtonOptions, optional
    gap : GapCertificate, optional
        Precomputed :func:`~subspace_perturb.separation.gap_certificate`.

    Returns
    -------
    BoundReport
    """
    e = _validate(split, e)
    cert = gap_certificate(split) if gap is None else gap
    norms = block_norms(split, e, e_norm)
    sep2 = cert.sep2
    g = cert.gap_lower
    quad = 8.0 * norms.v1_two_inf * (norms.e21_norm / sep2) ** 2
    cross = 2.0 * norms.v2e21_two_inf / g
    sub = 4.0 * norms.v2e22v2_two_inf * norms.e21_norm / (g * sep2)
    ok = bool(norms.e_norm <= g / 5.0)
    if evaluate and observed_error is None:
        a = split.matrix() if a is None else a
        observed_error = observed_subspace_error(a, e, split, norms.e_norm, newton_opts).aligned_error
    return BoundReport(
        term_quadratic=float(quad),
        term_cross=float(cross),
        term_submult=float(sub),
        total=float(quad + cross + sub),
        gap_used=float(g),
        assumptions_ok=ok,
        observed_error=None if observed_error is None else float(observed_error),
        dk_reference=float(2.0 * norms.e21_norm / sep2),
        sep2=float(sep2),
        e_norm=norms.e_norm,
        e21_norm=norms.e21_norm,
    )


def corollary_infbound(split, e, *, e_norm=None, observed_error=None):
    """Two-term bound valid when ``||E||_inf`` is small relative to the gap.

    Applicable iff ``||E||_2 <= gap / 5`` and
    ``||E||_inf <= gap / (4 + 4 mu^2)`` with ``mu = sqrt(n) ||V1||_{2,inf}``.
    Then::

        ||V1hat U - V1||_{2,inf} <= 8 ||V1||_{2,inf} (||E21||_2 / sep2)^2
                                  + 4 ||V2 E21||_{2,inf} / gap

    Returns
    -------
    BoundReport
        ``variant == "corollary-inf"``; ``assumptions_ok`` is false when the
        bound is inapplicable. Terms are reported either way.
    """
    e = _validate(split, e)
    cert = gap_certificate(split)
    norms = block_norms(split, e, e_norm)
    g = cert.gap_lower
    sep2 = cert.sep2
    mu = incoherence(split.v1)
    e_inf = float(np.max(np.sum(np.abs(e), axis=1)))
    applicable = bool(norms.e_norm <= g / 5.0 and e_inf <= g / (4.0 + 4.0 * mu**2))
    quad = 8.0 * norms.v1_two_inf * (norms.e21_norm / sep2) ** 2
    cross = 4.0 * norms.v2e21_two_inf / g
    return BoundReport(
        term_quadratic=float(quad),
        term_cross=float(cross),
        term_submult=0.0,
        total=float(quad + cross),
        gap_used=float(g),
        assumptions_ok=applicable,
        observed_error=None if observed_error is None else float(observed_error),
        dk_reference=float(2.0 * norms.e21_norm / sep2),
        sep2=float(sep2),
        e_norm=norms.e_norm,
        e21_norm=norms.e21_norm,
        variant="corollary-inf",
    )


def _check_key(result, split, e, what):
    if result.key != instance_key(split, e):
        raise StaleResultError(f"{what} was computed for different inputs")


def lemma_y_bound(split, e, newton):
    """Bound that keeps the Newton root ``Yhat = V2 Xhat`` explicit::

        8 ||V1||_{2,inf} (||E21||_2 / sep2)^2
            + 2 (||V2 E21||_{2,inf} + ||V2 E22 V2^T Yhat||_{2,inf}) / gap

    It never exceeds the three-term bound, which follows from it by
    sub-multiplicativity.

    Parameters
    ----------
    split : SpectralSplit
    e : array_like
    newton : NewtonResult
        Result of :func:`~subspace_perturb.newton.newton_subspace` for the
        same split and perturbation.

    Raises
    ------
    StaleResultError
        If ``newton`` belongs to different inputs.
    """
    e = _validate(split, e)
    _check_key(newton, split, e, "NewtonResult")
    cert = gap_certificate(split)
    norms = block_norms(split, e, e_norm=np.nan)
    yhat = newton.yhat
    coupled = two_to_inf_norm(split.project_out(e @ yhat))
    quad = 8.0 * norms.v1_two_inf * (norms.e21_norm / cert.sep2) ** 2
    return float(quad + 2.0 * (norms.v2e21_two_inf + coupled) / cert.gap_lower)


def two_perturbation_bound(split, e, etilde, newton_tilde, tol=1e-12):
    """Bound for ``E`` using the Newton root of a second perturbation ``Etilde``.

    ``E`` and ``Etilde`` must agree on the blocks ``E11`` and ``E12``. With
    ``Ytilde = V2 Xtilde`` from the run on ``A + Etilde``, the bound is::

        8 ||V1||_{2,inf} (||E21|| / sep2)^2 + 2 ||V2 E21||_{2,inf} / gap
          + 4 ||V2 E22 V2^T Ytilde||_{2,inf} / gap
          + 5 (||E22|| + ||Etilde22||) ||V2 E22 V2^T||_{2,inf} ||E21|| / (gap sep2^2)
          + 10 ||V2 E22 V2^T||_{2,inf} ||E21||^3 / (gap sep2^3)

    Raises
    ------
    AssumptionError
        If the block equalities fail (to ``tol``) or either perturbation
        exceeds ``gap / 5`` in spectral norm.
    StaleResultError
        If ``newton_tilde`` was not computed for ``(split, etilde)``.
    """
    e = _validate(split, e)
    etilde = _validate(split, etilde)
    _check_key(newton_tilde, split, etilde, "NewtonResult for Etilde")
    diff = split.v1.T @ (e - etilde)
    ref = max(1.0, float(np.max(np.abs(e))), float(np.max(np.abs(etilde))))
    if np.max(np.abs(diff), initial=0.0) > tol * ref:
        raise AssumptionError("E and Etilde must share the blocks E11 and E12")
    cert = gap_certificate(split)
    g = cert.gap_lower
    sep2 = cert.sep2
    norms = block_norms(split, e)
    e_tilde_norm = sym_norm2(etilde)
    if norms.e_norm > g / 5 or e_tilde_norm > g / 5:
        raise AssumptionError("both perturbations must satisfy ||E||_2 <= gap/5")
    p2 = np.eye(split.n) - split.v1 @ split.v1.T
    e22 = sym_norm2(p2 @ e @ p2)
    et22 = sym_norm2(p2 @ etilde @ p2)
    ytilde = newton_tilde.yhat
    coupled = two_to_inf_norm(split.project_out(e @ ytilde))
    c = norms.v2e22v2_two_inf
    e21 = norms.e21_norm
    total = (8.0 * norms.v1_two_inf * (e21 / sep2) ** 2
             + 2.0 * norms.v2e21_two_inf / g
             + 4.0 * coupled / g
             + 5.0 * (e22 + et22) * c * e21 / (g * sep2**2)
             + 10.0 * c * e21**3 / (g * sep2**3))
    return float(total)


def probg_rate_check(sweep, sigma_exponent, column="err_2inf"):
    """Compare the fitted error slope with the rate predicted for Gaussian noise.

    For ``sigma = n^{-p}`` the high-probability rate is the slowest-decaying
    of ``sigma^2 sqrt(n)``, ``sigma sqrt(log n)`` and ``(sigma sqrt(n))^3``
    (log factors ignored), with exponents ``1/2 - 2p``, ``-p`` and
    ``3 (1/2 - p)``.

    Parameters
    ----------
    sweep : sequence of SweepRecord
    sigma_exponent : float
        ``p`` in ``sigma = n^{-p}``.

    Returns
    -------
    RateCheck

    Raises
    ------
    ValueError
        If the sweep has fewer than four distinct ``n``.
    """
    p = float(sigma_exponent)
    ns = {int(record_value(rec, "n")) for rec in sweep}
    if len(ns) < 4:
        raise ValueError("rate check needs at least four distinct n")
    exps = {
        "sigma^2 sqrt(n)": 0.5 - 2.0 * p,
        "sigma sqrt(log n)": -p,
        "(sigma sqrt(n))^3": 3.0 * (0.5 - p),
    }
    # Prefer the later entries on ties (the cubic term is the one observed
    # to set the rate when it ties with the linear term).
    dominant = max(reversed(list(exps)), key=lambda k: exps[k])
    fit = fit_slope(summarize(sweep, [column]), column)
    return RateCheck(fit.slope, exps[dominant], dominant)
