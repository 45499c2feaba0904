import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def assert_vec_close(actual, expected, rtol=1e-9, label=""):
    """Vector-relative comparison: max abs error against the oracle's scale."""
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    assert actual.shape == expected.shape, f"{label}: shape {actual.shape} vs {expected.shape}"
    scale = max(float(np.max(np.abs(expected))), 1.0)
    err = float(np.max(np.abs(actual - expected))) if actual.size else 0.0
    assert err <= rtol * scale, f"{label}: max error {err:.3e} exceeds {rtol:.0e} * {scale:.3e}"
