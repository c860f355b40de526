"""Test-matrix families and seeded perturbations.

Families (``n`` even; ``ones`` is the all-ones vector and ``ones_pm`` has
``+1`` on its first half and ``-1`` on its second):

``low-rank``
    ``A = V1 V1^T`` with ``V1 = [ones, ones_pm] / sqrt(n)``; incoherent
    dominant subspace, eigenvalues ``{1, 1, 0, ...}``.
``coherent``
    ``A = 4 V1 V1^T + v v^T`` with ``v = e1 - e2``; eigenvalues
    ``{4, 4, 2, 0, ...}`` and a complement with constant row-wise mass.
``tightness``
    Rank-one ``A = ones ones^T / n`` with a designed perturbation whose
    error lands on either the cross term or the sub-multiplicative term of
    the row-wise bound, see :func:`gen_tightness_example`.
``sep-example``
    An ``(n + 1) x (n + 1)`` matrix whose restricted two-to-infinity
    separation is of order ``1/sqrt(n)`` although ``sep_2 = 1``.

Randomness comes from :class:`SeededRng`, a counter-based Philox stream
keyed by a hash of ``(seed, substream ids)``.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import ConfigError, DimensionError
from .linalg import SpectralSplit, split_from_eigenpairs

__all__ = [
    "RNG_ALGORITHM",
    "FAMILIES",
    "SeededRng",
    "InstanceSpec",
    "Instance",
    "ones_pm",
    "gen_low_rank",
    "gen_coherent",
    "gen_gaussian_perturbation",
    "gen_tightness_example",
    "tightness_split",
    "gen_sep_example",
    "sep_example_probe",
    "gen_random_symmetric",
    "build_instance",
]

RNG_ALGORITHM = "numpy Philox4x64-10, keyed by SeedSequence(seed, spawn_key=substream)"
FAMILIES = ("low-rank", "coherent", "tightness", "sep-example")


class SeededRng:
    """Factory of reproducible, independent random streams.

    Parameters
    ----------
    seed : int
        Base seed (0 <= seed < 2**64).
    """

    algorithm = RNG_ALGORITHM

    def __init__(self, seed):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = seed

    def derive_seed(self, *substream):
        """64-bit seed of the substream identified by integer ids."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(int(s) for s in substream))
        return int(ss.generate_state(1, dtype=np.uint64)[0])

    def generator(self, *substream):
        """A ``numpy.random.Generator`` for the given substream."""
        return stream_from_seed(self.derive_seed(*substream))


def stream_from_seed(seed):
    """The generator used for a derived (per-trial) seed."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class InstanceSpec:
    """Description of one instance: family, size, noise level and seed."""

    family: str
    n: int
    sigma: float
    seed: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        _check_even(self.n, 8 if self.family == "tightness" else 4)
        if not self.sigma >= 0:
            raise ConfigError("sigma must be nonnegative")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Instance:
    """A materialized instance: ``A``, its split and a perturbation ``E``."""

    spec: InstanceSpec
    a: np.ndarray
    e: np.ndarray
    split: SpectralSplit


def _check_even(n, minimum):
    if int(n) != n:
        raise DimensionError("n must be an integer")
    if n % 2:
        raise DimensionError(f"n must be even, got {n}")
    if n < minimum:
        raise DimensionError(f"n must be at least {minimum}, got {n}")


def ones_pm(n):
    """``+1`` on the first ``n/2`` entries and ``-1`` on the rest."""
    _check_even(n, 2)
    v = np.ones(n)
    v[n // 2:] = -1.0
    return v


def gen_low_rank(n):
    """Rank-two projector ``A = V1 V1^T`` with ``V1 = [ones, ones_pm]/sqrt(n)``.

    Returns
    -------
    a : ndarray, shape (n, n)
    split : SpectralSplit
        ``r = 2``, ``L1 = (1, 1)``, ``L2 = 0``.
    """
    _check_even(n, 4)
    v1 = np.column_stack([np.ones(n), ones_pm(n)]) / np.sqrt(n)
    a = v1 @ v1.T
    return a, split_from_eigenpairs(v1, [1.0, 1.0], r=2)


def gen_coherent(n):
    """``A = 4 V1 V1^T + v v^T`` with ``v = e1 - e2`` orthogonal to ``V1``.

    Returns
    -------
    a : ndarray, shape (n, n)
    split : SpectralSplit
        ``r = 2``, ``L1 = (4, 4)``, ``L2 = (2, 0, ..., 0)``.
    """
    _check_even(n, 4)
    v1 = np.column_stack([np.ones(n), ones_pm(n)]) / np.sqrt(n)
    v = np.zeros(n)
    v[0], v[1] = 1.0, -1.0
    a = 4.0 * (v1 @ v1.T) + np.outer(v, v)
    vecs = np.column_stack([v1, v / np.sqrt(2.0)])
    return a, split_from_eigenpairs(vecs, [4.0, 4.0, 2.0], r=2)


def gen_gaussian_perturbation(n, sigma, rng):
    """Symmetric Gaussian perturbation ``E = sigma Z``.

    The upper triangle of ``Z`` (diagonal included) is filled row by row
    with iid standard normals and mirrored; the diagonal is not rescaled.

    Parameters
    ----------
    n : int
    sigma : float
        Nonnegative noise level.
    rng : numpy.random.Generator

    Returns
    -------
    ndarray, shape (n, n)
    """
    if not sigma >= 0:
        raise ValueError("sigma must be nonnegative")
    n = int(n)
    z = np.zeros((n, n))
    if sigma == 0:
        return z
    for i in range(n):
        z[i, i:] = rng.standard_normal(n - i)
    # Mirror in row blocks to avoid n x n temporaries.
    for start in range(0, n, 256):
        stop = min(start + 256, n)
        z[start:stop, :start] = z[:start, start:stop].T
        diag = z[start:stop, start:stop]
        diag += np.triu(diag, 1).T
    if sigma != 1:
        z *= sigma
    return z


def _tightness_vectors(n):
    """The vectors ``v1``, ``u``, ``w`` of the tightness construction."""
    v1 = np.full(n, 1.0 / np.sqrt(n))
    u = ones_pm(n) / np.sqrt(n)
    w = -np.full(n, 1.0 / n)
    w[0] += 1.0
    return v1, u, w


def tightness_split(n):
    """Split of ``A = ones ones^T / n`` at rank one."""
    _check_even(n, 8)
    v1 = np.full((n, 1), 1.0 / np.sqrt(n))
    return split_from_eigenpairs(v1, [1.0], r=1)


def gen_tightness_example(n, c_cross=1.0, c_submult=1.0, return_parts=False):
    """Perturbation of a rank-one matrix designed to make the bound tight.

    ``A = ones ones^T / n`` (``r = 1``, ``lambda1 = 1``, ``V1 = ones/sqrt(n)``)
    and ``P2 = I - V1 V1^T``. With ``u = ones_pm/sqrt(n)`` and
    ``w = P2 e1``::

        M = P2 (e1 u^T + u e1^T) P2 = w u^T + u w^T.

    ``M`` is large on its first row only. The vector ``y`` solves
    ``(I - M) y = u`` rescaled to ``y_1 = 1`` (its other entries are
    ``O(1/sqrt(n))``), and ``b = P2 (I - M) y`` is rescaled so that
    ``||b||_2 = ||M||_2``. Then::

        E = n^{-1/3} (c_submult M + c_cross (b V1^T + V1 b^T)).

    The dominant eigenvector moves by ``Yhat ~ s c_cross (b + s c_submult M b)``
    (``s = n^{-1/3}``): ``b`` is spread evenly over the rows, so its
    row-wise size tracks the cross term, whereas ``M b`` concentrates on the
    first row and tracks the sub-multiplicative term. Their ratio grows like
    ``2 c_submult n^{1/6}``, so ``c_submult`` sets where the regimes cross.

    Parameters
    ----------
    n : int
        Even, at least 8.
    c_cross, c_submult : float
        Weights of the two parts.
    return_parts : bool
        Also return a dict with the unsymmetrized perturbation ``E_pre``
        (whose ``E11`` and ``E12`` blocks vanish), ``M``, ``y`` and ``b``.

    Returns
    -------
    a, e : ndarray, shape (n, n)
    parts : dict, only if ``return_parts``
    """
    _check_even(n, 8)
    v1, u, w = _tightness_vectors(n)

    def apply_m(x):
        return w * (u @ x) + u * (w @ x)

    # Solve (I - M) y = u inside span{w, u}: y = alpha w + beta u.
    c = u @ w
    d = w @ w
    alpha = 1.0 / ((1.0 - c) ** 2 - d)
    beta = alpha * (1.0 - c)
    y = alpha * w + beta * u
    y = y / y[0]
    b = y - apply_m(y)
    b = b - v1 * (v1 @ b)
    m_norm = c + np.sqrt(d)  # eigenvalues of M are c +- sqrt(d) on span{w, u}
    b = b * (m_norm / np.linalg.norm(b))
    s = float(n) ** (-1.0 / 3.0)
    m = np.outer(w, u)
    m = m + m.T
    e_pre = s * (c_submult * m + c_cross * np.outer(b, v1))
    e = e_pre + s * c_cross * np.outer(v1, b)
    e = 0.5 * (e + e.T)
    a = np.outer(v1, v1)
    if return_parts:
        return a, e, {"e_pre": e_pre, "m": m, "y": y, "b": b}
    return a, e


def gen_sep_example(n):
    """Matrix whose restricted two-to-infinity separation is ``O(1/sqrt(n))``.

    With ``v1 = [0; ones]/sqrt(n)`` and ``v2 = [0; ones_pm]/sqrt(n)`` in
    dimension ``n + 1``::

        A = 2 v1 v1^T + e1 v2^T + v2 e1^T,

    with eigenvalues ``{2, 1, 0 (n - 2 times), -1}``; the eigenvalues
    ``+-1`` belong to ``(e1 +- v2)/sqrt(2)``.

    Returns
    -------
    a : ndarray, shape (n + 1, n + 1)
    split : SpectralSplit
        ``r = 1``.
    """
    _check_even(n, 4)
    v1, v2 = _sep_vectors(n)
    e1 = np.zeros(n + 1)
    e1[0] = 1.0
    a = 2.0 * np.outer(v1, v1) + np.outer(e1, v2) + np.outer(v2, e1)
    vecs = np.column_stack([v1, (e1 + v2) / np.sqrt(2.0), (e1 - v2) / np.sqrt(2.0)])
    return a, split_from_eigenpairs(vecs, [2.0, 1.0, -1.0], r=1)


def _sep_vectors(n):
    v1 = np.zeros(n + 1)
    v1[1:] = 1.0 / np.sqrt(n)
    v2 = np.zeros(n + 1)
    v2[1:] = ones_pm(n) / np.sqrt(n)
    return v1, v2


def sep_example_probe(n):
    """The probe ``q = e1 + 2 v2`` in ``ran(V2)`` of :func:`gen_sep_example`."""
    _, v2 = _sep_vectors(n)
    q = 2.0 * v2
    q[0] += 1.0
    return q[:, None]


def gen_random_symmetric(n, eigenvalues, rng):
    """Symmetric matrix with a prescribed spectrum and Haar-random eigenvectors.

    Returns
    -------
    a : ndarray
    q : ndarray
        Orthogonal eigenvector matrix, columns in the order of
        ``eigenvalues``.
    """
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    if eigenvalues.shape != (n,):
        raise DimensionError("need exactly n eigenvalues")
    g = rng.standard_normal((n, n))
    q, rr = np.linalg.qr(g)
    q = q * np.sign(np.diag(rr))
    a = (q * eigenvalues) @ q.T
    return 0.5 * (a + a.T), q


def build_instance(spec, c_cross=1.0, c_submult=1.0):
    """Materialize an :class:`InstanceSpec`.

    For the Gaussian families ``E = sigma Z`` with ``Z`` drawn from the
    stream of ``spec.seed``; the tightness family uses its designed
    perturbation (``sigma`` is ignored).
    """
    n = spec.n
    if spec.family == "low-rank":
        a, split = gen_low_rank(n)
    elif spec.family == "coherent":
        a, split = gen_coherent(n)
    elif spec.family == "sep-example":
        a, split = gen_sep_example(n)
    else:
        a, e = gen_tightness_example(n, c_cross, c_submult)
        return Instance(spec, a, e, tightness_split(n))
    e = gen_gaussian_perturbation(a.shape[0], spec.sigma, stream_from_seed(spec.seed))
    return Instance(spec, a, e, split)
