"""Finite groups of orthogonal matrices acting on R^d.

Groups are enumerated once, in a deterministic breadth-first order, and are
treated as immutable afterwards.  Everything downstream (coorbits, quotient
distances, stabilisers) indexes group elements by their position in that
enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ClosureCapExceeded,
    ConfigError,
    DimensionMismatch,
    NonOrthogonalGenerator,
)

DEFAULT_TOL = 1e-9
DEFAULT_CAP = 10_080
# Exhaustive duplicate search during generation is quadratic; above this size
# the rounded-key hash alone decides membership.
_EXHAUSTIVE_LOOKUP_LIMIT = 1024


def _key(matrix: np.ndarray) -> bytes:
    # + 0.0 folds -0.0 into 0.0 so sign-of-zero never splits a key
    return (np.round(matrix, 6) + 0.0).tobytes()


def is_orthogonal(matrix: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    gram = matrix.T @ matrix
    return bool(np.max(np.abs(gram - np.eye(matrix.shape[0]))) <= tol)


@dataclass(frozen=True)
class GroupElement:
    matrix: np.ndarray
    index: int

    def __call__(self, v):
        return act(self, v)


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    """An enumerated finite group of orthogonal ``d x d`` matrices.

    ``matrices[0]`` is always the identity.  Construct through
    :func:`build_group_from_generators` or one of the named fixtures rather
    than directly, so that closure has actually been established.
    """

    matrices: np.ndarray
    tol: float = DEFAULT_TOL
    name: str = "group"
    _lookup: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise DimensionMismatch(f"expected (M, d, d) stack, got shape {mats.shape}")
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        if not self._lookup:
            self._lookup.update({_key(m): i for i, m in enumerate(mats)})

    @property
    def order(self) -> int:
        return self.matrices.shape[0]

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def identity_index(self) -> int:
        return 0

    def __len__(self):
        return self.order

    @property
    def elements(self) -> list[GroupElement]:
        return [GroupElement(m, i) for i, m in enumerate(self.matrices)]

    def __getitem__(self, i: int) -> GroupElement:
        return GroupElement(self.matrices[i], i)

    def index_of(self, matrix: np.ndarray) -> int | None:
        """Position of ``matrix`` in the enumeration, or ``None``."""
        matrix = np.asarray(matrix, dtype=float)
        i = self._lookup.get(_key(matrix))
        if i is not None and np.max(np.abs(self.matrices[i] - matrix)) <= self.tol:
            return i
        err = np.max(np.abs(self.matrices - matrix), axis=(1, 2))
        j = int(np.argmin(err))
        return j if err[j] <= self.tol else None

    @cached_property
    def inverse_indices(self) -> np.ndarray:
        return np.array([self.index_of(m.T) for m in self.matrices])

    @cached_property
    def multiplication_table(self) -> np.ndarray:
        """``table[i, j] = k`` with ``g_i g_j = g_k``; -1 where closure fails."""
        M = self.order
        table = np.full((M, M), -1, dtype=np.int64)
        for i in range(M):
            prods = self.matrices[i] @ self.matrices
            for j in range(M):
                k = self.index_of(prods[j])
                if k is not None:
                    table[i, j] = k
        return table

    def check_closure(self, exhaustive_limit: int = 720, samples: int = 20_000, seed: int = 0) -> bool:
        """Verify that products of members are members.

        Exhaustive for groups of order at most ``exhaustive_limit``, otherwise
        on ``samples`` random pairs.
        """
        M = self.order
        if M <= exhaustive_limit:
            return bool(np.all(self.multiplication_table >= 0))
        rng = np.random.default_rng(seed)
        ii = rng.integers(0, M, samples)
        jj = rng.integers(0, M, samples)
        prods = self.matrices[ii] @ self.matrices[jj]
        return all(self.index_of(p) is not None for p in prods)

    def orbit(self, v) -> np.ndarray:
        v = _as_vector(v, self.dim)
        return self.matrices @ v


def _as_vector(v, d: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != d:
        raise DimensionMismatch(f"expected a vector of dimension {d}, got shape {v.shape}")
    return v


def build_group_from_generators(
    generators: Iterable,
    tol: float = DEFAULT_TOL,
    cap: int = DEFAULT_CAP,
    name: str = "group",
) -> FiniteGroup:
    """Close a set of orthogonal generators under multiplication.

    Elements are discovered breadth-first by right-multiplying the current
    frontier with every generator.  Each new layer is ordered lexicographically
    by its (rounded) flattened matrix, so the enumeration is reproducible.
    """
    gens = [np.asarray(g, dtype=float) for g in generators]
    if not gens:
        raise ConfigError("at least one generator is required")
    d = gens[0].shape[0]
    for k, g in enumerate(gens):
        if g.shape != (d, d):
            raise DimensionMismatch(f"generator {k} has shape {g.shape}, expected {(d, d)}")
        if not is_orthogonal(g, tol):
            raise NonOrthogonalGenerator(f"generator {k} is not orthogonal within tol={tol}")

    elements = [np.eye(d)]
    lookup = {_key(elements[0]): 0}

    def find(m):
        i = lookup.get(_key(m))
        if i is not None:
            return i
        if len(elements) <= _EXHAUSTIVE_LOOKUP_LIMIT:
            err = np.max(np.abs(np.asarray(elements) - m), axis=(1, 2))
            j = int(np.argmin(err))
            if err[j] <= tol:
                return j
        return None

    frontier = [0]
    while frontier:
        fresh = []
        fresh_keys = {}
        for i in frontier:
            for g in gens:
                prod = elements[i] @ g
                if find(prod) is not None:
                    continue
                key = _key(prod)
                if key in fresh_keys:
                    continue
                fresh_keys[key] = len(fresh)
                fresh.append(prod)
        fresh.sort(key=lambda m: tuple(np.round(m, 9).ravel() + 0.0))
        frontier = []
        for m in fresh:
            if find(m) is not None:
                continue
            if len(elements) >= cap:
                raise ClosureCapExceeded(f"group has more than {cap} elements")
            lookup[_key(m)] = len(elements)
            frontier.append(len(elements))
            elements.append(m)

    return FiniteGroup(np.asarray(elements), tol=tol, name=name, _lookup=lookup)


def act(g: GroupElement | np.ndarray, v) -> np.ndarray:
    mat = g.matrix if isinstance(g, GroupElement) else np.asarray(g, dtype=float)
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != mat.shape[1]:
        raise DimensionMismatch(f"cannot apply a {mat.shape} matrix to a vector of shape {v.shape}")
    return mat @ v


def quotient_dist(G: FiniteGroup, v, w) -> float:
    """Brute-force quotient distance ``min_g ||v - g w||``."""
    v = _as_vector(v, G.dim)
    w = _as_vector(w, G.dim)
    return float(np.min(np.linalg.norm(v - G.matrices @ w, axis=1)))


def quotient_dist_batch(G: FiniteGroup, V: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Row-wise :func:`quotient_dist` for stacks of vectors of shape (n, d)."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if V.shape != W.shape or V.shape[1] != G.dim:
        raise DimensionMismatch(f"incompatible batches {V.shape} and {W.shape} for d={G.dim}")
    best = np.full(V.shape[0], np.inf)
    for g in G.matrices:
        np.minimum(best, np.linalg.norm(V - W @ g.T, axis=1), out=best)
    return best


@dataclass(frozen=True)
class StabiliserSubset:
    member_indices: tuple[int, ...]
    gap: float

    def __contains__(self, i):
        return i in self.member_indices

    def __len__(self):
        return len(self.member_indices)

    def issubset(self, other: "StabiliserSubset") -> bool:
        return set(self.member_indices) <= set(other.member_indices)

    def is_subgroup(self, G: FiniteGroup) -> bool:
        members = np.asarray(self.member_indices)
        sub = G.multiplication_table[np.ix_(members, members)]
        return bool(np.all(np.isin(sub, members)))


def group_stabiliser(G: FiniteGroup, v, tol: float = DEFAULT_TOL) -> StabiliserSubset:
    """Group elements fixing ``v`` (within ``tol``) and the gap to the rest.

    The gap is ``min ||(e - g) v||`` over non-stabilising ``g``, which is the
    radius controlling how far ``v`` can move before its stabiliser can grow.
    """
    v = _as_vector(v, G.dim)
    moved = np.linalg.norm(G.matrices @ v - v, axis=1)
    fixed = moved <= tol
    gap = float(np.min(moved[~fixed])) if np.any(~fixed) else math.inf
    return StabiliserSubset(tuple(int(i) for i in np.flatnonzero(fixed)), gap)


# -- named fixtures ---------------------------------------------------------

def trivial_group(d: int) -> FiniteGroup:
    return build_group_from_generators([np.eye(d)], name=f"trivial({d})")


def sign_group(d: int) -> FiniteGroup:
    return build_group_from_generators([-np.eye(d)], name=f"sign({d})")


def cyclic_shift_matrix(d: int) -> np.ndarray:
    """Permutation matrix sending ``(x_1, ..., x_d)`` to ``(x_d, x_1, ..., x_{d-1})``."""
    return np.roll(np.eye(d), 1, axis=0)


def cyclic_group(d: int) -> FiniteGroup:
    return build_group_from_generators([cyclic_shift_matrix(d)], name=f"cyclic({d})")


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    """Matrix ``P`` with ``(P x)_i = x[perm[i]]``."""
    m = len(perm)
    P = np.zeros((m, m))
    P[np.arange(m), list(perm)] = 1.0
    return P


def row_perm_group(m: int, n: int = 1) -> FiniteGroup:
    """S_m permuting the rows of ``m x n`` matrices, vectorised row-major.

    A matrix ``X`` is identified with ``X.reshape(-1)``; the permutation
    ``P`` acts as ``kron(P, I_n)``.
    """
    if m == 1:
        return trivial_group(n)
    gens = []
    for i in range(m - 1):
        perm = list(range(m))
        perm[i], perm[i + 1] = perm[i + 1], perm[i]
        gens.append(np.kron(permutation_matrix(perm), np.eye(n)))
    cap = max(DEFAULT_CAP, math.factorial(m))
    return build_group_from_generators(gens, cap=cap, name=f"row-perm(S{m} on {m}x{n})")


def named_group(name: str, **params) -> FiniteGroup:
    """Build one of the built-in fixtures by name.

    ``sign``/``cyclic``/``trivial`` take ``d``; ``row-perm`` takes ``m`` and
    ``n`` (default 1).
    """
    key = name.lower().replace("_", "-")
    try:
        if key == "sign":
            return sign_group(int(params["d"]))
        if key == "cyclic":
            return cyclic_group(int(params["d"]))
        if key == "trivial":
            return trivial_group(int(params["d"]))
        if key in ("row-perm", "rowperm", "sym", "symmetric"):
            return row_perm_group(int(params["m"]), int(params.get("n", 1)))
    except KeyError as exc:
        raise ConfigError(f"group fixture {name!r} needs parameter {exc.args[0]!r}") from None
    raise ConfigError(f"unknown group fixture {name!r}")


def parse_generators(text: str) -> list[np.ndarray]:
    """Parse generator matrices from text.

    One matrix row per line, entries separated by whitespace or commas;
    generators are separated by blank lines and ``#`` starts a comment.
    """
    gens, rows = [], []
    for raw in text.splitlines() + [""]:
        line = raw.split("#", 1)[0].strip()
        if not line:
            if rows:
                gens.append(np.array(rows, dtype=float))
                rows = []
            continue
        rows.append([float(tok) for tok in line.replace(",", " ").split()])
    for k, g in enumerate(gens):
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ConfigError(f"generator {k} is not square (shape {g.shape})")
    if not gens:
        raise ConfigError("no generators found")
    return gens


def load_group_file(path, tol: float = DEFAULT_TOL, cap: int = DEFAULT_CAP) -> FiniteGroup:
    path = Path(path)
    return build_group_from_generators(parse_generators(path.read_text()), tol=tol, cap=cap, name=path.stem)
