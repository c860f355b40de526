import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subspace_perturb.exceptions import OrderingError
from subspace_perturb.generators import gen_coherent, gen_low_rank, gen_sep_example, sep_example_probe
from subspace_perturb.linalg import split_from_eigenpairs
from subspace_perturb.separation import (
    CERTIFIED_LOWER,
    EMPIRICAL_UPPER,
    beta_w_estimate,
    gap_certificate,
    random_probe_candidates,
    sep2_perturbed,
    sep_2inf_restricted_lower,
    sep_2inf_upper_probe,
    sep_diag,
    sep_fro_kron,
    sep_fro_restricted,
    sep_ratio,
)

from conftest import random_orthonormal


def sylvester_matrix_by_columns(b, c):
    """Matrix of Z -> Z B - C Z, assembled by applying it to unit matrices."""
    m, ell = c.shape[0], b.shape[0]
    cols = []
    for j in range(ell):
        for i in range(m):
            z = np.zeros((m, ell))
            z[i, j] = 1.0
            cols.append((z @ b - c @ z).ravel(order="F"))
    return np.array(cols).T


def diag_split(d1, d2):
    n = len(d1) + len(d2)
    return split_from_eigenpairs(np.eye(n), np.concatenate([d1, d2]), r=len(d1))


class TestSepDiag:
    def test_sep_example_spectrum(self):
        est = sep_diag([2.0], [1.0, 0.0, 0.0, -1.0])
        assert est.value == 1.0
        assert est.kind == "exact-diagonal"

    def test_touching(self):
        assert sep_diag([5.0, 4.0], [4.0]).value == 0.0

    def test_shift_by_seven(self):
        d1, d2 = np.array([3.0, 2.5]), np.array([1.0, -2.0])
        assert sep_diag(d1 + 7, d2 + 7).value == sep_diag(d1, d2).value

    def test_shift_invariance_random(self, rng):
        d1 = np.array([4.0, 3.25, 3.0])
        d2 = np.array([1.0, 0.5, -2.0, -3.0])
        base = sep_diag(d1, d2).value
        for xi in rng.uniform(-50, 50, size=50):
            np.testing.assert_allclose(sep_diag(d1 + xi, d2 + xi).value, base, atol=1e-12)

    def test_unordered(self):
        with pytest.raises(OrderingError):
            sep_diag([1.0], [2.0])

    def test_witness_attains_in_all_norms(self):
        d1, d2 = np.array([3.0, 2.0]), np.array([0.5, 1.5, -1.0])
        est = sep_diag(d1, d2)
        for norm in ("2", "fro", "2inf"):
            np.testing.assert_allclose(
                sep_ratio(est.witness, np.diag(d1), np.diag(d2), norm), est.value, atol=1e-12)


class TestSep2Perturbed:
    def test_examples(self):
        assert sep2_perturbed([3.0], [1.0], 0.0, 0.0) == 2.0
        assert sep2_perturbed([1.0], [0.0], 0.25, 0.25) == 0.5
        assert sep2_perturbed([1.0], [0.0], 0.75, 0.5) == 0.0

    def test_lower_bound_on_random_perturbations(self, rng):
        l1, l2 = np.array([3.0, 2.0]), np.array([0.5, -1.0, -1.5])
        for _ in range(20):
            e1 = rng.standard_normal((2, 2)) * 0.1
            e1 = (e1 + e1.T) / 2
            e2 = rng.standard_normal((3, 3)) * 0.1
            e2 = (e2 + e2.T) / 2
            lower = sep2_perturbed(l1, l2, np.linalg.norm(e1, 2), np.linalg.norm(e2, 2))
            # ordered symmetric blocks: sep_2 equals the eigenvalue gap
            exact = np.linalg.eigvalsh(np.diag(l1) + e1).min() - np.linalg.eigvalsh(np.diag(l2) + e2).max()
            assert lower <= exact + 1e-12


class TestSepFro:
    def test_kron_matches_unit_matrix_assembly(self, rng):
        for _ in range(10):
            b = rng.standard_normal((3, 3))
            c = rng.standard_normal((4, 4)) + 3 * np.eye(4)
            oracle = np.linalg.svd(sylvester_matrix_by_columns(b, c), compute_uv=False)[-1]
            est = sep_fro_kron(b, c)
            np.testing.assert_allclose(est.value, oracle, rtol=1e-10)
            np.testing.assert_allclose(sep_ratio(est.witness, b, c, "fro"), est.value, rtol=1e-8)

    def test_diagonal_formula(self):
        b = np.diag([3.0, 2.0])
        c = np.diag([1.5, -1.0, 0.0])
        np.testing.assert_allclose(sep_fro_kron(b, c).value, 0.5, atol=1e-14)

    def test_restricted_equals_unrestricted(self, rng):
        # For a unitarily invariant norm, restricting Z to ran(W) against W C W^T
        # gives the same separation as the compressed pair.
        for n in (6, 9, 12):
            w = random_orthonormal(rng, n, n - 2)
            b = rng.standard_normal((2, 2))
            c = rng.standard_normal((n - 2, n - 2))
            np.testing.assert_allclose(
                sep_fro_restricted(b, c, w), sep_fro_kron(b, c).value, rtol=1e-8)


class TestRestrictedLower:
    def test_low_rank(self):
        _, split = gen_low_rank(16)
        est = sep_2inf_restricted_lower(split)
        assert est.value == 1.0 and est.kind == CERTIFIED_LOWER

    def test_coherent(self):
        _, split = gen_coherent(32)
        np.testing.assert_allclose(sep_2inf_restricted_lower(split).value, 2.0, atol=1e-12)

    @pytest.mark.parametrize("n", [4, 16, 64, 256])
    def test_sep_example(self, n):
        _, split = gen_sep_example(n)
        assert sep_2inf_restricted_lower(split).value >= 1.0 / np.sqrt(n + 1) * (1 - 1e-15)

    def test_below_exact_on_diagonal(self, rng):
        for _ in range(20):
            d1 = np.sort(rng.uniform(1, 3, 2))[::-1]
            d2 = np.sort(rng.uniform(-1, 0.5, 5))[::-1]
            split = diag_split(d1, d2)
            lower = sep_2inf_restricted_lower(split).value
            n = split.n
            cands = []
            for j in range(2):
                for i in range(5):
                    z = np.zeros((n, 2))
                    z[2 + i, j] = 1.0
                    cands.append(z)
            upper = sep_2inf_upper_probe(split, cands)
            assert lower <= upper.value + 1e-12


class TestUpperProbe:
    @pytest.mark.parametrize("n", [4, 16, 64, 256])
    def test_sep_example_probe(self, n):
        _, split = gen_sep_example(n)
        q = sep_example_probe(n)
        np.testing.assert_allclose(np.abs(q).max(), 1.0)
        est = sep_2inf_upper_probe(split, [q])
        assert est.kind == EMPIRICAL_UPPER
        # the probe attains 3/sqrt(n) exactly; allow only rounding above it
        assert est.value <= 3.0 / np.sqrt(n) * (1 + 1e-13)
        np.testing.assert_allclose(est.value, 3.0 / np.sqrt(n), rtol=1e-13)

    def test_exhaustive_unit_candidates_equal_sep_diag(self):
        d1, d2 = np.array([2.0, 1.5]), np.array([1.0, 0.0, -1.0])
        split = diag_split(d1, d2)
        cands = []
        for j in range(2):
            for i in range(3):
                z = np.zeros((5, 2))
                z[2 + i, j] = 1.0
                cands.append(z)
        est = sep_2inf_upper_probe(split, cands)
        assert est.value == pytest.approx(sep_diag(d1, d2).value, abs=1e-15)

    def test_witness_reproduces_value(self, rng):
        _, split = gen_coherent(12)
        est = sep_2inf_upper_probe(split, random_probe_candidates(split, 10, rng))
        z = est.witness
        c = split.complement_matrix()
        ratio = np.sqrt((((z * split.lambda1) - c @ z) ** 2).sum(axis=1)).max() / np.sqrt((z**2).sum(axis=1)).max()
        np.testing.assert_allclose(est.value, ratio, rtol=1e-10)

    def test_rejects_candidate_outside_range(self):
        _, split = gen_low_rank(8)
        with pytest.raises(ValueError):
            sep_2inf_upper_probe(split, [split.v1])

    def test_shift_leaves_ratios_unchanged(self, rng):
        d1, d2 = np.array([3.0, 2.0]), np.array([1.0, 0.5, -1.0, -2.0])
        xi = 4.5
        s0 = diag_split(d1, d2)
        s1 = diag_split(d1 + xi, d2 + xi)
        for z in random_probe_candidates(s0, 20, rng):
            a = sep_2inf_upper_probe(s0, [z]).value
            b = sep_2inf_upper_probe(s1, [z]).value
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_random_samples_never_below_certified_lower(self, rng):
        for split in (gen_coherent(10)[1], gen_sep_example(8)[1], gen_low_rank(12)[1]):
            lower = sep_2inf_restricted_lower(split).value
            cands = random_probe_candidates(split, 1000, rng)
            vals = [sep_2inf_upper_probe(split, [z]).value for z in cands]
            assert min(vals) >= lower - 1e-12


class TestGapCertificate:
    def test_low_rank(self):
        cert = gap_certificate(gen_low_rank(64)[1])
        assert cert.gap_lower == 1.0 and cert.sep2 == 1.0

    def test_coherent(self):
        cert = gap_certificate(gen_coherent(64)[1])
        np.testing.assert_allclose(cert.gap_lower, 2.0, atol=1e-12)
        assert cert.sep2 == 2.0

    def test_sep_example(self):
        n = 16
        cert = gap_certificate(gen_sep_example(n)[1])
        assert cert.sepF == 1.0
        assert cert.gap_lower >= 1 / np.sqrt(n + 1) * (1 - 1e-15)

    def test_invariants(self, rng):
        for _ in range(10):
            d1 = np.sort(rng.uniform(1, 3, 2))[::-1]
            d2 = np.sort(rng.uniform(-2, 0.9, 6))[::-1]
            cert = gap_certificate(diag_split(d1, d2))
            assert cert.gap_lower == min(cert.sep2, cert.sep2inf_lower)
            assert cert.gap_lower <= cert.sep2


class TestBetaW:
    def test_single_column(self):
        w = np.zeros((5, 1))
        w[0] = 1.0
        assert beta_w_estimate(w, num_starts=2, iters=10).upper_estimate == pytest.approx(1.0)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_identity_against_brute_force(self, n):
        # Brute force over the family of sign vectors scaled to unit norm,
        # whose best member attains 1/sqrt(n).
        signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * n)).reshape(n, -1).T
        brute = min(np.abs(s / np.linalg.norm(s)).max() for s in signs)
        est = beta_w_estimate(np.eye(n), num_starts=8, iters=500, seed=1)
        assert est.upper_estimate >= brute - 1e-9
        assert est.upper_estimate <= brute + 1e-6

    def test_random_basis_floor(self, rng):
        w = random_orthonormal(rng, 20, 3)
        est = beta_w_estimate(w, num_starts=4, iters=200)
        assert est.upper_estimate >= 1 / np.sqrt(20) - 1e-9
        np.testing.assert_allclose(np.linalg.norm(est.x), 1.0)

    def test_deterministic(self, rng):
        w = random_orthonormal(rng, 10, 2)
        a = beta_w_estimate(w, num_starts=3, iters=50, seed=7)
        b = beta_w_estimate(w, num_starts=3, iters=50, seed=7)
        assert a.upper_estimate == b.upper_estimate


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=4),
       st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=4),
       st.floats(-100, 100, allow_nan=False))
def test_sep_diag_shift_property(a, b, xi):
    d1 = np.array(a) + 10.0
    d2 = np.array(b)
    np.testing.assert_allclose(sep_diag(d1 + xi, d2 + xi).value, sep_diag(d1, d2).value, atol=1e-12)
