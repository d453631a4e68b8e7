"""Exact Lipschitz constants for sign retrieval from ``|<x, a_i>|``.

The lower constant is the minimum, over column subsets ``S``, of
``sqrt(s_n(A_S)^2 + s_n(A_{S^c})^2)`` where ``s_n`` is the ``n``-th largest
singular value (taken as 0 when the submatrix has fewer than ``n`` columns).
It is computed exactly by enumerating subsets; ``s_n(A_S)^2`` is the smallest
eigenvalue of the ``n x n`` Gram matrix of the columns in ``S``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionMismatch, EnumerationCapExceeded, ShapeMismatch
from .sorting import sort_desc

SUBSET_CAP = 2 ** 24
WITNESS_TOL = 1e-10
# subsets are processed as (high prefix) x (all low patterns) blocks of this many bits
_LOW_BITS = 12
# screened subsets within this margin of the Gram minimum get an SVD recheck
_SCREEN_MARGIN = 1e-6
_MAX_RECHECK = 4096


@dataclass(frozen=True, eq=False)
class MeasurementFrame:
    A: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim == 1:
            A = A[None, :]
        if A.ndim != 2 or A.shape[1] < 1:
            raise DimensionMismatch(f"frame matrix must be n x D with D >= 1, got {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("frame has non-finite entries")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def D(self) -> int:
        return self.A.shape[1]

    @property
    def columns(self) -> np.ndarray:
        return self.A.T


def mercedes_benz() -> MeasurementFrame:
    r = math.sqrt(3) / 2
    return MeasurementFrame(np.array([[-r, r, 0.0], [-0.5, -0.5, 1.0]]))


def measure(frame: MeasurementFrame, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != frame.n:
        raise DimensionMismatch(f"signal has dimension {x.shape[-1]}, frame expects {frame.n}")
    return np.abs(x @ frame.A)


def sign_upper_constant(frame: MeasurementFrame) -> float:
    return float(np.linalg.svd(frame.A, compute_uv=False)[0])


def _smallest_sv(grams: np.ndarray, sizes: np.ndarray, n: int) -> np.ndarray:
    lam = np.linalg.eigvalsh(grams)[..., 0]
    return np.where(sizes >= n, np.sqrt(np.clip(lam, 0.0, None)), 0.0)


def _rank_tol(sigma_1: float, shape) -> float:
    # numpy's matrix_rank convention: singular values below this are zero
    return sigma_1 * max(shape) * np.finfo(float).eps


def _sigma_n(A: np.ndarray, cols, zero_tol: float) -> float:
    n = A.shape[0]
    if len(cols) < n:
        return 0.0
    s = float(np.linalg.svd(A[:, list(cols)], compute_uv=False)[n - 1])
    return 0.0 if s <= zero_tol else s


@dataclass(frozen=True)
class LowerConstant:
    value: float
    subset: tuple[int, ...]
    sigma_S: float
    sigma_complement: float


def lower_constant_search(frame: MeasurementFrame, cap: int = SUBSET_CAP) -> LowerConstant:
    """Exhaustive minimisation over all column subsets, with the minimiser.

    ``S`` and its complement give the same value, so only subsets avoiding the
    last column are visited.  The Gram matrix of ``S`` is the sum of a
    precomputed Gram for its high bits and one for its low bits.  Gram
    eigenvalues lose half the digits near zero, so every subset within a small
    margin of the screened minimum is re-evaluated with a full SVD.
    """
    A, n, D = frame.A, frame.n, frame.D
    if 2 ** D > cap:
        raise EnumerationCapExceeded(f"2^{D} subsets exceed the cap {cap}")
    outer = np.einsum("ai,bi->iab", A, A)  # (D, n, n) rank-one pieces
    total = outer.sum(axis=0)
    free = D - 1  # last column is fixed to the complement
    low_bits = min(free, _LOW_BITS)
    high_bits = free - low_bits
    sigma_1 = sign_upper_constant(frame)
    zero_tol = _rank_tol(sigma_1, A.shape)
    margin = _SCREEN_MARGIN * max(1.0, sigma_1)

    def block(bits, offset):
        codes = np.arange(2 ** bits)
        mask = ((codes[:, None] >> np.arange(bits)) & 1).astype(float)
        gram = np.einsum("sk,kab->sab", mask, outer[offset:offset + bits]) if bits else np.zeros((1, n, n))
        return codes, mask.sum(axis=1).astype(np.int64), gram

    low_codes, low_sizes, low_grams = block(low_bits, 0)
    high_codes, high_sizes, high_grams = block(high_bits, low_bits)

    best = math.inf
    cand_vals, cand_codes = [], []
    for h in range(high_codes.size):
        grams = high_grams[h] + low_grams
        sizes = high_sizes[h] + low_sizes
        val = np.hypot(_smallest_sv(grams, sizes, n), _smallest_sv(total - grams, D - sizes, n))
        best = min(best, float(val.min()))
        keep = np.flatnonzero(val <= best + margin)
        cand_vals.append(val[keep])
        cand_codes.append((int(high_codes[h]) << low_bits) | low_codes[keep])
    vals, codes = np.concatenate(cand_vals), np.concatenate(cand_codes)
    keep = vals <= best + margin
    vals, codes = vals[keep], codes[keep]
    codes = codes[np.argsort(vals, kind="stable")[:_MAX_RECHECK]]

    result = None
    for code in codes:
        S = tuple(i for i in range(D) if int(code) >> i & 1)
        Sc = tuple(i for i in range(D) if not int(code) >> i & 1)
        s_in, s_out = _sigma_n(A, S, zero_tol), _sigma_n(A, Sc, zero_tol)
        value = math.hypot(s_in, s_out)
        if result is None or value < result.value:
            result = LowerConstant(value, S, s_in, s_out)
    return result


def sign_lower_constant(frame: MeasurementFrame, cap: int = SUBSET_CAP) -> float:
    return lower_constant_search(frame, cap).value


def _unit_orthogonal(cols: np.ndarray, n: int) -> np.ndarray:
    """A unit vector (nearly) orthogonal to every column of the ``n x k`` matrix."""
    if cols.shape[1] == 0:
        e = np.zeros(n)
        e[0] = 1.0
        return e
    U, _, _ = np.linalg.svd(cols, full_matrices=True)
    return U[:, -1]


def collision_witness(frame: MeasurementFrame, tol: float = WITNESS_TOL):
    """Signals ``x != +-y`` with equal measurements, when the lower constant vanishes.

    Returns ``None`` when the lower constant is positive, i.e. when some
    ``s_n`` of the minimising split exceeds the numerical rank tolerance.  With ``u`` orthogonal
    to the columns in ``S`` and ``w`` orthogonal to the rest, ``x = u + w`` and
    ``y = u - w`` agree in every magnitude.
    """
    best = lower_constant_search(frame)
    if best.value > 0.0:
        return None
    S = list(best.subset)
    Sc = [i for i in range(frame.D) if i not in best.subset]
    u = _unit_orthogonal(frame.A[:, S], frame.n)
    w = _unit_orthogonal(frame.A[:, Sc], frame.n)
    x, y = u + w, u - w
    # |<u, a_i>| <= sigma_n(A_S), which is below the rank tolerance, on S
    if np.max(np.abs(measure(frame, x) - measure(frame, y))) > tol:
        raise ArithmeticError("collision witness failed its own measurement check")
    return x, y


def beta_row_sort(frame: MeasurementFrame, X) -> np.ndarray:
    """Column-wise descending sort of ``X A`` for a ``2 x n`` signal pair."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape != (2, frame.n):
        raise ShapeMismatch(f"expected a 2 x {frame.n} matrix, got {X.shape}")
    return sort_desc(X @ frame.A)


def parse_frame(text: str) -> MeasurementFrame:
    """Frame text: an ``n D`` header line, then ``D`` lines of column entries."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ConfigError("empty frame file")
    try:
        n, D = (int(t) for t in lines[0].replace(",", " ").split())
        cols = [[float(t) for t in ln.replace(",", " ").split()] for ln in lines[1:]]
    except ValueError as exc:
        raise ConfigError(f"malformed frame file: {exc}") from None
    if len(cols) != D or any(len(c) != n for c in cols):
        raise ConfigError(f"frame header says {n}x{D} but the body does not match")
    return MeasurementFrame(np.array(cols).T)


def load_frame(path) -> MeasurementFrame:
    return parse_frame(Path(path).read_text())


def frame_report(frame: MeasurementFrame) -> dict:
    lc = lower_constant_search(frame)
    wit = collision_witness(frame)
    return {
        "n": frame.n,
        "D": frame.D,
        "lower_constant": lc.value,
        "upper_constant": sign_upper_constant(frame),
        "minimizing_subset": list(lc.subset),
        "witness": None if wit is None else [wit[0].tolist(), wit[1].tolist()],
    }
