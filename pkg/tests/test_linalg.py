import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from subspace_perturb.exceptions import DegenerateSplitError, DimensionError, NotSymmetricError
from subspace_perturb.generators import gen_sep_example
from subspace_perturb.linalg import (
    as_symmetric,
    inv_sqrt_gram,
    procrustes_align,
    project_blocks,
    row_norms,
    sin_theta_distance,
    spectral_split,
    split_from_eigenpairs,
    two_inf_subspace_error,
    two_to_inf_norm,
)

from conftest import random_orthonormal, random_symmetric

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
matrices = st.tuples(st.integers(1, 8), st.integers(1, 5)).flatmap(
    lambda s: arrays(np.float64, s, elements=finite)
)


class TestTwoToInfNorm:
    def test_unit_row(self):
        b = np.zeros((3, 3))
        b[0, 0] = 1.0
        assert two_to_inf_norm(b) == 1.0

    def test_full_orthonormal(self, rng):
        q = random_orthonormal(rng, 7, 7)
        np.testing.assert_allclose(two_to_inf_norm(q), 1.0, atol=1e-14)

    def test_rows_of_five(self):
        assert two_to_inf_norm([[3.0, 4.0], [0.0, 5.0]]) == 5.0

    def test_matches_loop(self, rng):
        b = rng.standard_normal((9, 4))
        expected = max(np.sqrt(sum(x * x for x in row)) for row in b)
        np.testing.assert_allclose(two_to_inf_norm(b), expected, rtol=1e-15)

    def test_complex_rows(self):
        assert two_to_inf_norm(np.array([[3j, 4.0]])) == 5.0

    def test_empty_rejected(self):
        with pytest.raises(DimensionError):
            two_to_inf_norm(np.zeros((0, 3)))

    @given(matrices)
    def test_norm_sandwich(self, b):
        n = b.shape[0]
        val = two_to_inf_norm(b)
        fro = np.linalg.norm(b)
        assert fro / np.sqrt(n) <= val * (1 + 1e-12) + 1e-300
        assert val <= fro * (1 + 1e-12) + 1e-300

    @given(matrices, st.integers(0, 2**32 - 1))
    def test_right_unitary_invariance(self, b, seed):
        z = random_orthonormal(np.random.default_rng(seed), b.shape[1], b.shape[1])
        np.testing.assert_allclose(two_to_inf_norm(b @ z), two_to_inf_norm(b),
                                   rtol=1e-12, atol=1e-12 * (1 + np.abs(b).max()))

    @given(matrices, st.integers(0, 2**32 - 1))
    def test_signed_permutation_invariance(self, b, seed):
        g = np.random.default_rng(seed)
        n = b.shape[0]
        pi = np.eye(n)[g.permutation(n)] * g.choice([-1.0, 1.0], size=n)[:, None]
        assert two_to_inf_norm(pi @ b) == two_to_inf_norm(b)

    @given(st.integers(0, 2**32 - 1))
    def test_submultiplicative(self, seed):
        g = np.random.default_rng(seed)
        b1 = g.standard_normal((6, 4))
        b2 = g.standard_normal((4, 3))
        lhs = two_to_inf_norm(b1 @ b2)
        assert lhs <= two_to_inf_norm(b1) * np.linalg.norm(b2, 2) * (1 + 1e-12)
        b3 = g.standard_normal((6, 6))
        b4 = g.standard_normal((6, 3))
        inf_norm = np.abs(b3).sum(axis=1).max()
        assert two_to_inf_norm(b3 @ b4) <= inf_norm * two_to_inf_norm(b4) * (1 + 1e-12)


class TestAsSymmetric:
    def test_exact_symmetry_after_cleanup(self, rng):
        a = random_symmetric(rng, 5)
        a[0, 1] += 1e-15
        out = as_symmetric(a)
        assert np.array_equal(out, out.T)

    def test_rejects_asymmetric(self):
        with pytest.raises(NotSymmetricError):
            as_symmetric([[1.0, 2.0], [0.0, 1.0]])

    def test_rejects_nonsquare_and_empty(self):
        with pytest.raises(DimensionError):
            as_symmetric(np.zeros((2, 3)))
        with pytest.raises(DimensionError):
            as_symmetric(np.zeros((0, 0)))

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            as_symmetric([[np.nan]])


class TestProcrustes:
    def test_identity(self, rng):
        w = random_orthonormal(rng, 10, 3)
        np.testing.assert_allclose(procrustes_align(w, w), np.eye(3), atol=1e-14)

    def test_recovers_rotation(self, rng):
        w = random_orthonormal(rng, 10, 3)
        r = random_orthonormal(rng, 3, 3)
        np.testing.assert_allclose(procrustes_align(w @ r, w), r.T, atol=1e-13)

    def test_matches_polar_oracle(self, rng):
        w = random_orthonormal(rng, 50, 3)
        wt = random_orthonormal(rng, 50, 3)
        u = procrustes_align(wt, w)
        polar_u, _ = scipy.linalg.polar(wt.T @ w)
        np.testing.assert_allclose(u, polar_u, atol=1e-10)
        ortho, _ = scipy.linalg.orthogonal_procrustes(wt, w)
        np.testing.assert_allclose(u, ortho, atol=1e-10)
        np.testing.assert_allclose(u.T @ u, np.eye(3), atol=1e-12)

    def test_optimal_against_random_rotations(self, rng):
        w = random_orthonormal(rng, 30, 3)
        wt = random_orthonormal(rng, 30, 3)
        best = np.linalg.norm(wt @ procrustes_align(wt, w) - w)
        for _ in range(100):
            q = random_orthonormal(rng, 3, 3)
            assert best <= np.linalg.norm(wt @ q - w) + 1e-12

    def test_shape_mismatch(self, rng):
        with pytest.raises(DimensionError):
            procrustes_align(np.eye(4)[:, :2], np.eye(4)[:, :3])


class TestSinTheta:
    def test_identical(self, rng):
        w = random_orthonormal(rng, 8, 2)
        assert sin_theta_distance(w, w) < 1e-15

    def test_orthogonal(self):
        e = np.eye(3)
        assert sin_theta_distance(e[:, [0]], e[:, [1]]) == pytest.approx(1.0)

    def test_planar_rotation(self):
        t = np.pi / 6
        w = np.array([[1.0], [0.0]])
        wt = np.array([[np.cos(t)], [np.sin(t)]])
        assert sin_theta_distance(w, wt) == pytest.approx(0.5, abs=1e-15)

    def test_projector_and_complement_forms(self, rng):
        q = random_orthonormal(rng, 12, 12)
        w, w2 = q[:, :3], q[:, 3:]
        wt = random_orthonormal(rng, 12, 3)
        val = sin_theta_distance(w, wt)
        proj = np.linalg.norm(w @ w.T - wt @ wt.T, 2)
        comp = np.linalg.norm(w2.T @ wt, 2)
        np.testing.assert_allclose(val, proj, atol=1e-12)
        np.testing.assert_allclose(val, comp, atol=1e-12)


class TestSpectralSplit:
    def test_identity_is_degenerate(self):
        with pytest.raises(DegenerateSplitError):
            spectral_split(np.eye(4), 1)

    def test_diagonal(self):
        s = spectral_split(np.diag([3.0, 2.0, 1.0]), 1)
        np.testing.assert_array_equal(s.lambda1, [3.0])
        np.testing.assert_allclose(np.abs(s.v1[:, 0]), [1.0, 0.0, 0.0])
        # sign convention: largest entry positive
        assert s.v1[0, 0] > 0

    def test_sep_example_spectrum(self):
        a, _ = gen_sep_example(8)
        s = spectral_split(a, 1)
        np.testing.assert_allclose(s.lambda1, [2.0], atol=1e-12)
        expected = np.array([1.0] + [0.0] * 6 + [-1.0])
        np.testing.assert_allclose(s.lambda2, expected, atol=1e-12)

    def test_rank_out_of_range(self):
        with pytest.raises(DimensionError):
            spectral_split(np.diag([2.0, 1.0]), 2)

    def test_invariants(self, rng):
        a = random_symmetric(rng, 15)
        s = spectral_split(a, 4)
        assert np.all(np.diff(s.lambda1) <= 0) and np.all(np.diff(s.lambda2) <= 0)
        assert s.lambda1[-1] > s.lambda2[0]
        np.testing.assert_allclose(s.v1.T @ s.v2, 0.0, atol=1e-12)
        np.testing.assert_allclose(s.v1.T @ s.v1, np.eye(4), atol=1e-12)
        np.testing.assert_allclose(s.matrix(), a, atol=1e-10 * np.linalg.norm(a, 2))

    def test_deterministic(self, rng):
        a = random_symmetric(rng, 10)
        s1, s2 = spectral_split(a, 2), spectral_split(a.copy(), 2)
        assert np.array_equal(s1.v1, s2.v1) and np.array_equal(s1.v2, s2.v2)

    def test_zero_eigenvalues_kept(self):
        v = np.ones((6, 1)) / np.sqrt(6)
        s = split_from_eigenpairs(v, [1.0], r=1)
        assert s.lambda2.shape == (5,)
        np.testing.assert_array_equal(s.lambda2, 0.0)
        np.testing.assert_allclose(s.v2.T @ s.v2, np.eye(5), atol=1e-12)
        np.testing.assert_allclose(s.v1.T @ s.v2, 0.0, atol=1e-12)


class TestProjectBlocks:
    def test_zero(self, rng):
        s = spectral_split(random_symmetric(rng, 6), 2)
        b = project_blocks(np.zeros((6, 6)), s)
        for blk in (b.e11, b.e12, b.e21, b.e22):
            assert not np.any(blk)

    def test_symmetric_blocks(self, rng):
        s = spectral_split(random_symmetric(rng, 9), 3)
        e = random_symmetric(rng, 9)
        b = project_blocks(e, s)
        np.testing.assert_allclose(b.e12, b.e21.T, atol=1e-12)
        np.testing.assert_allclose(b.e11, b.e11.T, atol=1e-12)
        norm = np.linalg.norm(e, 2)
        for blk in (b.e11, b.e12, b.e22):
            assert np.linalg.norm(blk, 2) <= norm * (1 + 1e-12)
        np.testing.assert_allclose(b.norm2(), norm, rtol=1e-12)

    def test_off_diagonal_construction(self, rng):
        s = spectral_split(random_symmetric(rng, 8), 2)
        m = rng.standard_normal((6, 2))
        e = s.v2 @ m @ s.v1.T + s.v1 @ m.T @ s.v2.T
        b = project_blocks(e, s)
        np.testing.assert_allclose(b.e21, m, atol=1e-12)
        np.testing.assert_allclose(b.e11, 0.0, atol=1e-12)
        np.testing.assert_allclose(b.e22, 0.0, atol=1e-12)

    def test_dimension_mismatch(self, rng):
        s = spectral_split(random_symmetric(rng, 5), 1)
        with pytest.raises(DimensionError):
            project_blocks(np.zeros((4, 4)), s)


class TestSubspaceError:
    def test_identical(self, rng):
        v = random_orthonormal(rng, 10, 2)
        err = two_inf_subspace_error(v, v)
        assert err.aligned_error < 1e-15 and err.frob_error < 1e-15
        np.testing.assert_allclose(err.u, np.eye(2), atol=1e-14)

    def test_rank_one_sign_enumeration(self, rng):
        for _ in range(20):
            v = random_orthonormal(rng, 12, 1)
            vh = v + 0.1 * rng.standard_normal((12, 1))
            vh /= np.linalg.norm(vh)
            if rng.random() < 0.5:
                vh = -vh
            brute = min(np.abs(vh - s * v).max() for s in (1.0, -1.0))
            np.testing.assert_allclose(two_inf_subspace_error(vh, v).aligned_error, brute, rtol=1e-14)

    def test_rotated_basis(self, rng):
        v = random_orthonormal(rng, 20, 3)
        r = random_orthonormal(rng, 3, 3)
        assert two_inf_subspace_error(v @ r, v).aligned_error <= 1e-12

    def test_frobenius_sandwich(self, rng):
        for k in (1, 2, 4):
            v = random_orthonormal(rng, 25, k)
            vh = np.linalg.qr(v + 0.2 * rng.standard_normal((25, k)))[0]
            err = two_inf_subspace_error(vh, v)
            st_ = sin_theta_distance(v, vh)
            assert st_ <= err.frob_error * (1 + 1e-12)
            assert err.frob_error <= np.sqrt(2 * k) * st_ * (1 + 1e-12)

    def test_entrywise_proposition(self, rng):
        # For w in ran(V1), the point V1hat U V1^T w of ran(V1hat) is close entrywise.
        v = random_orthonormal(rng, 30, 3)
        vh = np.linalg.qr(v + 0.05 * rng.standard_normal((30, 3)))[0]
        err = two_inf_subspace_error(vh, v)
        for _ in range(50):
            c = rng.standard_normal(3)
            c /= np.linalg.norm(c)
            w = v @ c
            wt = vh @ err.u @ c
            assert np.abs(w - wt).max() <= err.aligned_error * (1 + 1e-12)


def test_row_norms_and_inv_sqrt_gram(rng):
    x = rng.standard_normal((5, 2))
    np.testing.assert_allclose(row_norms(x), np.linalg.norm(x, axis=1))
    m = inv_sqrt_gram(x)
    g = np.eye(2) + x.T @ x
    np.testing.assert_allclose(m @ g @ m, np.eye(2), atol=1e-13)
