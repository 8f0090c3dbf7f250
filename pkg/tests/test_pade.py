import math

import mpmath
import numpy as np
import pytest
from conftest import (
    mp_pade_residual,
    mp_pade_residual_slope,
    random_infinitesimal_symplectic,
)

from padeint import (
    PadePair,
    matrix_exp,
    pade_apply,
    pade_coefficients,
    pade_transfer_matrix,
    residual_constant,
    symplectic_defect,
    symplectic_form,
)
from padeint.errors import SingularDenominatorError


def formula_coefficient(r, s, i):
    """Direct factorial evaluation of the numerator coefficient a_i."""
    return math.factorial(r + s - i) * math.factorial(r) / (
        math.factorial(r + s) * math.factorial(i) * math.factorial(r - i)
    )


class TestPadePair:
    def test_rejects_both_zero(self):
        with pytest.raises(ValueError):
            PadePair(0, 0)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            PadePair(-1, 2)

    def test_one_sided_orders_allowed(self):
        assert PadePair(0, 1).total == 1
        assert PadePair(3, 0).total == 3


class TestCoefficients:
    def test_diagonal_1(self):
        c = pade_coefficients(PadePair(1, 1))
        assert c.a == (0.5,)
        assert c.b == (0.5,)

    def test_diagonal_2(self):
        c = pade_coefficients(PadePair(2, 2))
        assert c.a == (0.5, 1.0 / 12.0)
        assert c.b == c.a

    def test_diagonal_3(self):
        c = pade_coefficients(PadePair(3, 3))
        assert c.a == (0.5, 1.0 / 10.0, 1.0 / 120.0)

    def test_diagonal_4(self):
        # Quadratic coefficient is 3/28 by the closed-form expression.
        c = pade_coefficients(PadePair(4, 4))
        assert c.a == pytest.approx((0.5, 3.0 / 28.0, 1.0 / 84.0, 1.0 / 1680.0), rel=1e-15)
        assert c.a[1] == 3.0 / 28.0

    def test_matches_factorial_formula(self):
        for r in range(0, 7):
            for s in range(0, 7):
                if r + s == 0:
                    continue
                c = pade_coefficients(PadePair(r, s))
                for i in range(1, r + 1):
                    assert c.a[i - 1] == pytest.approx(
                        formula_coefficient(r, s, i), rel=1e-15
                    )
                for j in range(1, s + 1):
                    assert c.b[j - 1] == pytest.approx(
                        formula_coefficient(s, r, j), rel=1e-15
                    )

    def test_leading_values_and_positivity(self):
        for r in range(0, 6):
            for s in range(0, 6):
                if r + s == 0:
                    continue
                c = pade_coefficients(PadePair(r, s))
                if r:
                    assert c.a[0] == pytest.approx(r / (r + s), rel=1e-15)
                if s:
                    assert c.b[0] == pytest.approx(s / (r + s), rel=1e-15)
                assert all(v > 0 for v in c.a + c.b)


class TestApply:
    @pytest.mark.parametrize("order", [(1, 1), (2, 2), (0, 1), (1, 0), (2, 4)])
    def test_zero_matrix_is_identity_map(self, order):
        x = np.array([1.5, -2.0])
        out = pade_apply(np.zeros((2, 2)), PadePair(*order), x)
        assert np.array_equal(out, x)

    def test_cayley_rotation_preserves_norm(self):
        # The (1,1) approximant of a skew-symmetric matrix is orthogonal.
        rng = np.random.default_rng(2)
        for theta in rng.uniform(-1.5, 1.5, size=20):
            b = theta * np.array([[0.0, -1.0], [1.0, 0.0]])
            x = rng.standard_normal(2)
            out = pade_apply(b, PadePair(1, 1), x)
            assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(x), rel=1e-13)

    def test_consistency_with_transfer_matrix(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            b = rng.standard_normal((4, 4)) * 0.4
            x = rng.standard_normal(4)
            r, s = int(rng.integers(0, 4)), int(rng.integers(0, 4))
            order = PadePair(r, s) if r + s else PadePair(1, 1)
            via_apply = pade_apply(b, order, x)
            via_matrix = pade_transfer_matrix(b, order) @ x
            assert np.allclose(via_apply, via_matrix, rtol=1e-12, atol=1e-15)

    def test_batched_apply(self):
        rng = np.random.default_rng(9)
        b = rng.standard_normal((7, 2, 2)) * 0.3
        x = rng.standard_normal((7, 2))
        out = pade_apply(b, PadePair(2, 2), x)
        for i in range(7):
            assert np.allclose(
                out[i], pade_apply(b[i], PadePair(2, 2), x[i]), rtol=1e-14, atol=0
            )

    def test_singular_denominator(self):
        # Order (0,1) has D = I - B, singular at B = I.
        with pytest.raises(SingularDenominatorError):
            pade_apply(np.eye(2), PadePair(0, 1), np.array([1.0, 0.0]))


class TestScalarResidual:
    # In one dimension exp(mu) - P_(r,s)(mu) ~ +/- c_{r+s+1} mu^{r+s+1}
    # with c = r! s! / ((r+s)! (r+s+1)!).

    @pytest.mark.parametrize("order", [(1, 1), (2, 2)])
    def test_limit_constant_float64(self, order):
        order = PadePair(*order)
        mu = 1e-2
        approx = pade_transfer_matrix(mu * np.eye(1), order)[0, 0]
        ratio = abs(np.exp(mu) - approx) / mu ** (order.total + 1)
        assert ratio == pytest.approx(residual_constant(order), rel=3e-2)

    @pytest.mark.parametrize("order", [(3, 3), (4, 4), (1, 2), (2, 1)])
    def test_limit_constant_highprec(self, order):
        order = PadePair(*order)
        mu = 1e-3
        err = mp_pade_residual(np.eye(1), order, mu)
        ratio = err / mu ** (order.total + 1)
        assert ratio == pytest.approx(residual_constant(order), rel=1e-2)

    def test_constant_values(self):
        assert residual_constant(PadePair(1, 1)) == pytest.approx(1 / 12, rel=1e-14)
        assert residual_constant(PadePair(2, 2)) == pytest.approx(1 / 720, rel=1e-14)


class TestTransferMatrix:
    def test_zero_matrix(self):
        assert np.array_equal(
            pade_transfer_matrix(np.zeros((4, 4)), PadePair(2, 3)), np.eye(4)
        )

    def test_diagonal_orders_are_symplectic(self):
        rng = np.random.default_rng(17)
        for k in (1, 2, 3, 4):
            for n in (1, 2):
                stack = np.stack(
                    [random_infinitesimal_symplectic(rng, n) for _ in range(50)]
                )
                defects = symplectic_defect(pade_transfer_matrix(stack, PadePair(k, k)))
                assert defects.max() <= 1e-9

    def test_off_diagonal_order_is_not_symplectic(self):
        # (1,2) applied to J itself: transfer determinant is 40/41, so the
        # defect is exactly 1/41.
        s = pade_transfer_matrix(symplectic_form(1), PadePair(1, 2))
        defect = symplectic_defect(s)
        assert defect == pytest.approx(1.0 / 41.0, rel=1e-10)
        assert defect > 1e-6

    def test_matches_highprec_evaluation(self):
        rng = np.random.default_rng(21)
        b = random_infinitesimal_symplectic(rng, 2)
        t = 2.0**-3
        for order in (PadePair(1, 1), PadePair(2, 2), PadePair(4, 4), PadePair(1, 2)):
            got = pade_transfer_matrix(t * b, order)
            coeffs = pade_coefficients(order)
            with mpmath.workdps(40):
                tb = mpmath.matrix(b.tolist()) * mpmath.mpf(t)
                num = mpmath.eye(4)
                power = mpmath.eye(4)
                for c in coeffs.a:
                    power = power * tb
                    num += mpmath.mpf(c) * power
                den = mpmath.eye(4)
                power = mpmath.eye(4)
                for c in coeffs.b:
                    power = power * (-tb)
                    den += mpmath.mpf(c) * power
                expected = np.array(((den**-1) * num).tolist(), dtype=float)
            assert np.allclose(got, expected, rtol=1e-12, atol=1e-15)


class TestResidualOrder:
    # Residual exp(tB) - P_(r,s)(tB) shrinks at rate t^(r+s+1); measured in
    # 60-digit arithmetic because the high-order residuals sit far below
    # binary64 resolution on this grid.

    @pytest.mark.parametrize(
        "order", [(1, 1), (2, 2), (3, 3), (4, 4), (1, 2), (2, 1)]
    )
    def test_slope(self, order):
        order = PadePair(*order)
        rng = np.random.default_rng(31)
        b = random_infinitesimal_symplectic(rng, 1)
        ts = [2.0**-e for e in range(3, 10)]
        slope = mp_pade_residual_slope(b, order, ts)
        assert abs(slope - (order.total + 1)) <= 0.15

    def test_float64_pipeline_slope_low_order(self):
        # Within binary64 dynamic range the package evaluation itself shows
        # the same rate; checked on the (1,1) pair over the full grid.
        rng = np.random.default_rng(33)
        b = random_infinitesimal_symplectic(rng, 1)
        ts = np.array([2.0**-e for e in range(3, 10)])
        errs = []
        for t in ts:
            diff = matrix_exp(t * b) - pade_transfer_matrix(t * b, PadePair(1, 1))
            errs.append(np.abs(diff).max())
        design = np.stack([np.log(ts), np.ones_like(ts)], axis=1)
        (slope, _), *_ = np.linalg.lstsq(design, np.log(errs), rcond=None)
        assert abs(slope - 3.0) <= 0.15
