import gmpy2
import pytest
from gmpy2 import mpfr
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import assert_abs_close, assert_close
from oracles import bump_profile, trapezoid_richardson
from radmom import numerics
from radmom.errors import DomainError, QuadratureError, SingularMatrixError

import random


class TestBinomial:
    def test_empty_product(self, prec256):
        assert numerics.binomial(0, 0) == 1

    def test_standard(self, prec256):
        assert numerics.binomial(4, 2) == 6

    def test_factorial_oracle(self, prec256):
        # 20!/(10!)^2 evaluated directly
        import math

        expected = math.factorial(20) // math.factorial(10) ** 2
        assert numerics.binomial(20, 10) == expected == 184756

    def test_domain_error(self, prec256):
        with pytest.raises(DomainError):
            numerics.binomial(3, 4)
        with pytest.raises(DomainError):
            numerics.binomial(-1, 0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 40), st.integers(0, 40))
    def test_pascal_rule(self, k, j):
        with gmpy2.context(precision=256):
            if j > k:
                return
            lhs = numerics.binomial(k, j)
            rhs = mpfr(0)
            if j <= k - 1:
                rhs += numerics.binomial(k - 1, j)
            if 1 <= j:
                rhs += numerics.binomial(k - 1, j - 1)
            assert lhs == rhs


class TestIntegrate1d:
    def test_constant(self, prec256):
        v = numerics.integrate_1d(lambda t: mpfr(1), (0, 1), mpfr("1e-30"))
        assert_abs_close(v, 1, "1e-30")

    def test_quadratic(self, prec256):
        v = numerics.integrate_1d(lambda t: t * t, (0, 1), mpfr("1e-30"))
        assert_abs_close(v, mpfr(1) / 3, "1e-30")

    def test_bump_against_trapezoid_oracle(self, prec256):
        # independent oracle: extrapolated trapezoid ladder
        oracle = trapezoid_richardson(bump_profile, mpfr(-1), mpfr(1), n0=1024, levels=3)
        v = numerics.integrate_1d(bump_profile, (-1, 1), mpfr("1e-30"))
        assert_abs_close(v, oracle, "1e-25")

    @pytest.mark.parametrize("degree", range(0, 21))
    def test_polynomial_exactness(self, prec256, degree):
        v = numerics.integrate_1d(lambda t, d=degree: t**d, (0, 1), mpfr("1e-30"))
        assert_abs_close(v, mpfr(1) / (degree + 1), "1e-35")

    def test_splits_honored(self, prec256):
        # |t - 1/3| integrated exactly when split at the kink
        kink = mpfr(1) / 3
        v = numerics.integrate_1d(
            lambda t: abs(t - kink), (0, 1), mpfr("1e-30"), splits=[kink]
        )
        expected = (kink**2 + (1 - kink) ** 2) / 2
        assert_abs_close(v, expected, "1e-30")

    def test_nonconvergence_reports_achieved_error(self, prec256):
        cusp = lambda t: gmpy2.sqrt(abs(t - mpfr(1) / 3))
        with pytest.raises(QuadratureError) as err:
            numerics.integrate_1d(cusp, (0, 1), mpfr("1e-35"), max_depth=4)
        assert err.value.achieved is not None
        assert err.value.achieved > mpfr("1e-35")

    def test_bad_tolerance(self, prec256):
        with pytest.raises(DomainError):
            numerics.integrate_1d(lambda t: t, (0, 1), mpfr(0))


class TestTriangularSolve:
    def test_identity(self, prec256):
        eye = [[mpfr(1), mpfr(0)], [mpfr(0), mpfr(1)]]
        y = [mpfr("0.25"), mpfr("-3.5")]
        assert numerics.solve_lower_triangular(eye, y) == y

    def test_2x2_closed_form(self, prec256):
        c, a, b = mpfr("0.7"), mpfr("1.25"), mpfr("-0.5")
        L = [[mpfr(1), mpfr(0)], [c, mpfr(1)]]
        x = numerics.solve_lower_triangular(L, [a, b])
        assert x[0] == a
        assert_abs_close(x[1], b - c * a, mpfr(2) ** -250)

    def test_zero_diagonal(self, prec256):
        L = [[mpfr(1), mpfr(0)], [mpfr(1), mpfr(0)]]
        with pytest.raises(SingularMatrixError):
            numerics.solve_lower_triangular(L, [mpfr(1), mpfr(1)])

    def test_multiply_back(self, prec256):
        rng = random.Random(11)
        n = 6
        L = [
            [mpfr(rng.uniform(-1, 1)) if j < i else (mpfr(1 + rng.random()) if i == j else mpfr(0)) for j in range(n)]
            for i in range(n)
        ]
        y = [mpfr(rng.uniform(-1, 1)) for _ in range(n)]
        x = numerics.solve_lower_triangular(L, y)
        back = numerics.matmul_vec(L, x)
        resid = max(abs(back[i] - y[i]) for i in range(n))
        assert resid <= mpfr(2) ** -128 * numerics.inf_norm_vec(y)


class TestDenseSolve:
    def test_identity(self, prec256):
        eye = [[mpfr(1), mpfr(0)], [mpfr(0), mpfr(1)]]
        y = [mpfr(3), mpfr(4)]
        assert numerics.solve_dense(eye, y) == y

    def test_angle_matrix_order_one(self, prec256):
        # the order-1 angular system at angles pi/4, pi/2 for the xy density
        r = gmpy2.sqrt(mpfr(2)) / 2
        A = [[r, r], [mpfr(1), mpfr(0)]]
        b = [gmpy2.sqrt(mpfr(2)) / 6, mpfr(1) / 6]
        x = numerics.solve_dense(A, b)
        assert_close(x[0], mpfr(1) / 6, mpfr(2) ** -128)
        assert_close(x[1], mpfr(1) / 6, mpfr(2) ** -128)

    def test_construct_then_solve(self, prec256):
        rng = random.Random(5)
        n = 5
        A = [[mpfr(rng.uniform(-1, 1)) for _ in range(n)] for _ in range(n)]
        for i in range(n):
            A[i][i] += 4
        x_true = [mpfr(rng.uniform(-1, 1)) for _ in range(n)]
        y = numerics.matmul_vec(A, x_true)
        x = numerics.solve_dense(A, y)
        err = max(abs(x[i] - x_true[i]) for i in range(n))
        assert err <= mpfr(2) ** -128

    def test_singular_carries_pivot(self, prec256):
        A = [[mpfr(0), mpfr(0)], [mpfr(0), mpfr(0)]]
        with pytest.raises(SingularMatrixError) as err:
            numerics.solve_dense(A, [mpfr(1), mpfr(1)])
        assert "pivot" in str(err.value)

    def test_determinant(self, prec256):
        A = [[mpfr(2), mpfr(1)], [mpfr(1), mpfr(3)]]
        assert_close(numerics.determinant(A), 5, mpfr(2) ** -200)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 7))
    def test_solve_matmul_roundtrip(self, seed, n):
        with gmpy2.context(precision=256):
            rng = random.Random(seed)
            A = [[mpfr(rng.uniform(-1, 1)) for _ in range(n)] for _ in range(n)]
            for i in range(n):
                A[i][i] += n  # diagonally dominant: well conditioned
            x_true = [mpfr(rng.uniform(-1, 1)) for _ in range(n)]
            x = numerics.solve_dense(A, numerics.matmul_vec(A, x_true))
            assert max(abs(x[i] - x_true[i]) for i in range(n)) <= mpfr(2) ** -128

    def test_repeat_calls_bit_identical(self, prec256):
        rng = random.Random(1)
        A = [[mpfr(rng.uniform(-1, 1)) + (3 if i == j else 0) for j in range(4)] for i in range(4)]
        y = [mpfr(rng.uniform(-1, 1)) for _ in range(4)]
        x1 = numerics.solve_dense(A, y)
        x2 = numerics.solve_dense(A, y)
        assert all(a == b and a.precision == b.precision for a, b in zip(x1, x2))


class TestLeastSquares:
    def test_consistent_overdetermined(self, prec256):
        rng = random.Random(2)
        A = [[mpfr(rng.uniform(-1, 1)) for _ in range(3)] for _ in range(9)]
        x_true = [mpfr("0.3"), mpfr("-1.2"), mpfr("0.8")]
        y = [sum(A[i][j] * x_true[j] for j in range(3)) for i in range(9)]
        x = numerics.solve_least_squares(A, y)
        assert max(abs(x[j] - x_true[j]) for j in range(3)) <= mpfr(2) ** -120

    def test_condition_estimate(self, prec256):
        eye = [[mpfr(1) if i == j else mpfr(0) for j in range(3)] for i in range(3)]
        assert_close(numerics.condition_inf(eye), 1, mpfr(2) ** -200)
