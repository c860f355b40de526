import numpy as np
import pytest

from subspace_perturb.linalg import spectral_split

# Acceptance tests append (criterion, passed, detail) here; the summary hook
# prints one line per criterion at the end of the session.
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda t: t[0]):
        terminalreporter.write_line(f"criterion {crit:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_orthonormal(rng, n, k):
    q, rr = np.linalg.qr(rng.standard_normal((n, k)))
    return q * np.sign(np.diag(rr))


def random_symmetric(rng, n, scale=1.0):
    z = rng.standard_normal((n, n))
    return scale * (z + z.T) / 2


def gapped_instance(rng, n, r, gap=1.0):
    """Symmetric A with a gap of exactly ``gap`` after its r-th eigenvalue."""
    q = random_orthonormal(rng, n, n)
    low = np.sort(rng.uniform(-1.0, 0.0, n - r))[::-1]
    high = np.sort(rng.uniform(0.0, 1.0, r))[::-1] + gap
    lam = np.concatenate([high - high.min() + low.max() + gap, low])
    a = (q * lam) @ q.T
    a = (a + a.T) / 2
    return a, spectral_split(a, r)


def perturbation_with_norm(rng, n, target):
    e = random_symmetric(rng, n)
    return e * (target / np.max(np.abs(np.linalg.eigvalsh(e))))


def nonnormal_instance(rng, n, r, coupling=1.0, offdiag=0.3):
    """Real nonnormal ``A = Q T Q^T`` whose r largest-real eigenvalues form the cluster.

    Returns the matrix, the orthogonal ``Q`` and ``T``; the coupling block
    ``T[:r, r:]`` has spectral norm ``coupling``.
    """
    q = random_orthonormal(rng, n, n)
    t = np.triu(rng.standard_normal((n, n)) * offdiag / np.sqrt(n), 1)
    t[np.diag_indices(n)] = np.concatenate([rng.uniform(3.0, 4.0, r), rng.uniform(-1.0, 1.0, n - r)])
    block = rng.standard_normal((r, n - r))
    t[:r, r:] = block * (coupling / np.linalg.norm(block, 2))
    return q @ t @ q.T, q, t


def cluster_basis_oracle(ahat, r):
    """Orthonormal basis of the span of the eigenvectors for the r largest-real eigenvalues."""
    w, v = np.linalg.eig(ahat)
    idx = np.argsort(-w.real, kind="stable")[:r]
    q, _ = np.linalg.qr(v[:, idx])
    return q


def unitary_aligned_error(u1hat, u1):
    """Two-to-infinity error of ``u1hat W - u1`` at the unitary Procrustes optimum."""
    x, _, yh = np.linalg.svd(u1hat.conj().T @ u1)
    d = u1hat @ (x @ yh) - u1
    return float(np.sqrt(np.max(np.sum(np.abs(d) ** 2, axis=1))))
