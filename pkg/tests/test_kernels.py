"""Parity between the numpy lane and the compiled lane.

Every kernel must agree across backends to float64 round-off on random
shapes; the selected backend is whatever the package imported with.
"""

import numpy as np
import pytest

from fpbilstm.nn.kernels import BACKEND, available_backends

BACKENDS = available_backends()
HAS_CYTHON = "cython" in BACKENDS

pytestmark = pytest.mark.skipif(
    not HAS_CYTHON, reason="compiled kernels not built; nothing to compare"
)


def pair():
    return BACKENDS["numpy"], BACKENDS["cython"]


def test_backend_selection_reports_name():
    assert BACKEND in ("numpy", "cython")


class TestIm2col:
    def test_random_shapes(self, rng):
        np_k, cy_k = pair()
        for _ in range(10):
            b, lp, c = rng.integers(1, 5), rng.integers(4, 40), rng.integers(1, 6)
            kernel = int(rng.integers(1, min(lp, 16)))
            x = rng.standard_normal((b, lp, c))
            a = np_k.im2col(x, kernel)
            d = cy_k.im2col(x, kernel)
            assert np.array_equal(a, d)

    def test_col2im_adjoint_identity(self, rng):
        # <im2col(x), y> == <x, col2im(y)> makes the pair a true adjoint
        np_k, cy_k = pair()
        for k_mod in (np_k, cy_k):
            x = rng.standard_normal((2, 12, 3))
            y = rng.standard_normal((2, 8, 5 * 3))
            lhs = float((k_mod.im2col(x, 5) * y).sum())
            rhs = float((x * k_mod.col2im(y, 5, 12)).sum())
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_col2im_parity(self, rng):
        # accumulation order differs between lanes, so round-off not bitwise
        np_k, cy_k = pair()
        dcols = rng.standard_normal((3, 10, 4 * 2))
        diff = np_k.col2im(dcols, 4, 13) - cy_k.col2im(dcols, 4, 13)
        assert np.max(np.abs(diff)) < 1e-12


class TestMaxPool:
    def test_forward_parity(self, rng):
        np_k, cy_k = pair()
        for _ in range(10):
            b, length, c = rng.integers(1, 4), rng.integers(4, 60), rng.integers(1, 5)
            x = rng.standard_normal((b, length, c))
            out_a, idx_a = np_k.maxpool_forward(x, 4, 2)
            out_b, idx_b = cy_k.maxpool_forward(x, 4, 2)
            assert np.array_equal(out_a, out_b)
            assert np.array_equal(idx_a, idx_b)

    def test_backward_parity(self, rng):
        np_k, cy_k = pair()
        x = rng.standard_normal((2, 30, 3))
        out, idx = np_k.maxpool_forward(x, 4, 2)
        dout = rng.standard_normal(out.shape)
        assert np.array_equal(
            np_k.maxpool_backward(dout, idx, 30), cy_k.maxpool_backward(dout, idx, 30)
        )

    def test_tie_breaking_matches(self):
        np_k, cy_k = pair()
        x = np.zeros((1, 8, 1))
        x[0, [2, 3]] = 5.0
        _, idx_a = np_k.maxpool_forward(x, 4, 2)
        _, idx_b = cy_k.maxpool_forward(x, 4, 2)
        assert np.array_equal(idx_a, idx_b)


class TestLstm:
    def test_forward_parity(self, rng):
        np_k, cy_k = pair()
        for _ in range(5):
            b, t, h = int(rng.integers(1, 4)), int(rng.integers(1, 12)), int(rng.integers(1, 8))
            xp = rng.standard_normal((b, t, 4 * h))
            wh = rng.standard_normal((h, 4 * h)) * 0.4
            outs_a = np_k.lstm_forward(xp, wh)
            outs_b = cy_k.lstm_forward(xp, wh)
            for a, d in zip(outs_a, outs_b):
                assert np.max(np.abs(a - d)) < 1e-12

    def test_backward_parity(self, rng):
        np_k, cy_k = pair()
        b, t, h = 3, 9, 5
        xp = rng.standard_normal((b, t, 4 * h))
        wh = rng.standard_normal((h, 4 * h)) * 0.4
        fwd = np_k.lstm_forward(xp, wh)
        dh = rng.standard_normal((b, t, h))
        dxp_a, dwh_a = np_k.lstm_backward(dh, *fwd[:1], *fwd[1:], wh)
        dxp_b, dwh_b = cy_k.lstm_backward(dh, *fwd[:1], *fwd[1:], wh)
        assert np.max(np.abs(dxp_a - dxp_b)) < 1e-12
        assert np.max(np.abs(dwh_a - dwh_b)) < 1e-12

    def test_single_step_sequence(self, rng):
        np_k, cy_k = pair()
        xp = rng.standard_normal((2, 1, 8))
        wh = rng.standard_normal((2, 8))
        a = np_k.lstm_forward(xp, wh)[0]
        b = cy_k.lstm_forward(xp, wh)[0]
        assert np.max(np.abs(a - b)) < 1e-15
