import itertools
import math

import numpy as np
import pytest

from sortembed.analysis import estimate_bilipschitz, lipschitz_upper_bound
from sortembed.embedding import frame_pipeline
from sortembed.errors import ConfigError, EnumerationCapExceeded, ShapeMismatch
from sortembed.signretrieval import (
    MeasurementFrame,
    beta_row_sort,
    collision_witness,
    frame_report,
    lower_constant_search,
    measure,
    mercedes_benz,
    parse_frame,
    sign_lower_constant,
    sign_upper_constant,
)


def brute_lower(A):
    """Independent oracle: full SVD of every subset and its complement."""
    n, D = A.shape

    def sn(cols):
        if len(cols) < n:
            return 0.0
        return np.linalg.svd(A[:, cols], compute_uv=False)[n - 1]

    best = math.inf
    for r in range(D + 1):
        for S in itertools.combinations(range(D), r):
            Sc = [i for i in range(D) if i not in S]
            best = min(best, math.hypot(sn(list(S)), sn(Sc)))
    return best


def random_frame(rng):
    n = int(rng.integers(1, 4))
    D = int(rng.integers(1, 9))
    A = rng.standard_normal((n, D))
    # sometimes force a degenerate frame: repeated or zero columns, or too few columns
    kind = rng.integers(0, 4)
    if kind == 1 and D >= 2:
        A[:, 1:] = A[:, :1] * rng.standard_normal(D - 1)
    elif kind == 2:
        A[:, rng.integers(0, D)] = 0.0
    return MeasurementFrame(A)


def test_mercedes_benz_geometry():
    A = mercedes_benz().A
    assert np.allclose(np.linalg.norm(A, axis=0), 1.0)
    G = A.T @ A
    assert np.allclose(G[~np.eye(3, dtype=bool)], -0.5)
    assert np.allclose(A @ A.T, 1.5 * np.eye(2))


def test_mercedes_benz_constants():
    mb = mercedes_benz()
    assert abs(sign_lower_constant(mb) - 1 / math.sqrt(2)) <= 1e-12
    assert abs(sign_upper_constant(mb) - math.sqrt(1.5)) <= 1e-12
    assert collision_witness(mb) is None


def test_measure_examples():
    mb = mercedes_benz()
    r = math.sqrt(3) / 2
    assert np.allclose(measure(mb, [1.0, 0.0]), [r, r, 0.0])
    assert np.array_equal(measure(mb, [0.0, 0.0]), np.zeros(3))
    rng = np.random.default_rng(0)
    x = rng.standard_normal(2)
    assert np.array_equal(measure(mb, x), measure(mb, -x))


def test_upper_constant_examples():
    assert sign_upper_constant(MeasurementFrame(np.eye(2))) == pytest.approx(1.0)
    A = mercedes_benz().A
    assert sign_upper_constant(MeasurementFrame(-3 * A)) == pytest.approx(3 * math.sqrt(1.5))


def test_lower_constant_examples():
    assert sign_lower_constant(MeasurementFrame(np.eye(2))) == 0.0
    assert sign_lower_constant(MeasurementFrame([[1.0]])) == pytest.approx(1.0)


def test_lower_constant_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(40):
        f = random_frame(rng)
        assert sign_lower_constant(f) == pytest.approx(brute_lower(f.A), abs=1e-9)


def test_lower_constant_large_high_block():
    # more than the low-block width, so the prefix loop is exercised
    rng = np.random.default_rng(2)
    A = rng.standard_normal((2, 15))
    lc = lower_constant_search(MeasurementFrame(A))
    S = list(lc.subset)
    Sc = [i for i in range(15) if i not in lc.subset]
    sn = lambda c: np.linalg.svd(A[:, c], compute_uv=False)[1] if len(c) >= 2 else 0.0  # noqa: E731
    assert lc.value == pytest.approx(math.hypot(sn(S), sn(Sc)), abs=1e-9)


def test_cap():
    with pytest.raises(EnumerationCapExceeded):
        sign_lower_constant(MeasurementFrame(np.ones((1, 10))), cap=2 ** 9)


def test_identity_witness():
    f = MeasurementFrame(np.eye(2))
    x, y = collision_witness(f)
    assert np.allclose(measure(f, x), measure(f, y), atol=1e-12)
    assert min(np.linalg.norm(x - y), np.linalg.norm(x + y)) > 1e-6
    assert collision_witness(MeasurementFrame([[1.0]])) is None


def test_lower_at_most_upper_and_witness_equivalence():
    rng = np.random.default_rng(3)
    for _ in range(100):
        f = random_frame(rng)
        lo, hi = sign_lower_constant(f), sign_upper_constant(f)
        assert lo <= hi + 1e-12
        wit = collision_witness(f)
        assert (lo == 0.0) == (wit is not None)
        if wit is not None:
            x, y = wit
            assert np.max(np.abs(measure(f, x) - measure(f, y))) <= 1e-10
            assert min(np.linalg.norm(x - y), np.linalg.norm(x + y)) > 1e-6


def test_beta_row_sort_examples():
    mb = mercedes_benz()
    rng = np.random.default_rng(4)
    x = rng.standard_normal(2)
    same = np.vstack([x, x])
    assert np.array_equal(beta_row_sort(mb, same), same @ mb.A)
    X = rng.standard_normal((2, 2))
    assert np.array_equal(beta_row_sort(mb, X), beta_row_sort(mb, X[::-1]))
    out = beta_row_sort(mb, np.vstack([x, -x]))
    m = measure(mb, x)
    assert np.allclose(out, np.vstack([m, -m]))
    with pytest.raises(ShapeMismatch):
        beta_row_sort(mb, np.ones((3, 2)))


def test_frame_pipeline_constants_on_antipodal_inputs():
    # on inputs (x; -x) the quotient distance is sqrt(2) min(|x-y|, |x+y|) and
    # the embedding distance is sqrt(2) || |A^T x| - |A^T y| ||, so the ratios
    # reduce to those of the measurement map
    mb = mercedes_benz()
    pipe = frame_pipeline(mb.A)
    assert lipschitz_upper_bound(pipe) == pytest.approx(sign_upper_constant(mb), abs=1e-12)

    def antipodal(rng, n, d):
        x = rng.standard_normal((n, 2))
        return np.hstack([x, -x])

    e = estimate_bilipschitz(pipe, antipodal, trials=10_000, seed=0)
    assert e.C_hat <= sign_upper_constant(mb) + 1e-8
    assert e.c_hat >= 0.9 * sign_lower_constant(mb)


def test_parse_frame_and_report(tmp_path):
    f = parse_frame("2 3\n# columns\n1 0\n0 1\n1,1\n")
    assert f.A.shape == (2, 3)
    with pytest.raises(ConfigError):
        parse_frame("2 3\n1 0\n")
    rep = frame_report(mercedes_benz())
    assert rep["lower_constant"] == pytest.approx(1 / math.sqrt(2))
    assert rep["witness"] is None
