"""Sorted-coorbit embeddings ``gamma = alpha o beta_Phi``.

The sorted coorbit matrix ``beta_Phi(v)`` has shape ``(M, N)``; the reduction
``alpha`` is stored as a dense ``D x (M N)`` matrix acting on its column-major
vectorisation (:func:`vectorize`).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, ShapeMismatch
from .group import FiniteGroup, _as_vector, row_perm_group
from .sorting import sort_desc


@dataclass(frozen=True, eq=False)
class TemplateSet:
    templates: np.ndarray

    def __post_init__(self):
        t = np.atleast_2d(np.asarray(self.templates, dtype=float))
        if t.ndim != 2 or t.shape[0] < 1:
            raise DimensionMismatch(f"templates must be a non-empty (N, d) array, got {t.shape}")
        t.setflags(write=False)
        object.__setattr__(self, "templates", t)

    @property
    def N(self) -> int:
        return self.templates.shape[0]

    @property
    def dim(self) -> int:
        return self.templates.shape[1]


@dataclass(frozen=True, eq=False)
class Reduction:
    matrix: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if a.ndim != 2 or a.shape[0] < 1:
            raise DimensionMismatch(f"reduction must be a (D, M*N) matrix, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("reduction has non-finite entries")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def D(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, M: int, N: int) -> "Reduction":
        return cls(np.eye(M * N))

    @classmethod
    def zero(cls, M: int, N: int, D: int = 1) -> "Reduction":
        return cls(np.zeros((D, M * N)))

    @classmethod
    def select_entries(cls, M: int, N: int, entries) -> "Reduction":
        """Pick entries ``(i, j)`` (row ``i`` of sorted column ``j``) of ``beta``."""
        entries = list(entries)
        a = np.zeros((len(entries), M * N))
        for r, (i, j) in enumerate(entries):
            if not (0 <= i < M and 0 <= j < N):
                raise ShapeMismatch(f"entry {(i, j)} outside a {M}x{N} sorted-coorbit matrix")
            a[r, j * M + i] = 1.0
        return cls(a)

    @classmethod
    def max_entries(cls, M: int, N: int) -> "Reduction":
        """Keep the largest entry of every coorbit (one per template)."""
        return cls.select_entries(M, N, [(0, j) for j in range(N)])


@dataclass(frozen=True, eq=False)
class EmbeddingPipeline:
    group: FiniteGroup
    templates: TemplateSet
    reduction: Reduction

    def __post_init__(self):
        if not isinstance(self.templates, TemplateSet):
            object.__setattr__(self, "templates", TemplateSet(self.templates))
        if not isinstance(self.reduction, Reduction):
            object.__setattr__(self, "reduction", Reduction(self.reduction))
        if self.templates.dim != self.group.dim:
            raise DimensionMismatch(
                f"templates live in R^{self.templates.dim} but the group acts on R^{self.group.dim}"
            )
        cols = self.group.order * self.templates.N
        if self.reduction.matrix.shape[1] != cols:
            raise DimensionMismatch(
                f"reduction has {self.reduction.matrix.shape[1]} columns, expected M*N = {cols}"
            )

    @property
    def M(self) -> int:
        return self.group.order

    @property
    def N(self) -> int:
        return self.templates.N

    @property
    def D(self) -> int:
        return self.reduction.D

    @property
    def dim(self) -> int:
        return self.group.dim

    @cached_property
    def stacked(self) -> np.ndarray:
        return stacked_coorbit_matrix(self.group, self.templates)

    def __call__(self, v) -> np.ndarray:
        return embed(self, v)

    def embed_batch(self, V) -> np.ndarray:
        return embed_batch(self, V)

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.group.matrices, self.templates.templates, self.reduction.matrix):
            h.update(str(arr.shape).encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]


def _templates(Phi) -> np.ndarray:
    return Phi.templates if isinstance(Phi, TemplateSet) else np.atleast_2d(np.asarray(Phi, dtype=float))


def coorbit(G: FiniteGroup, phi, v) -> np.ndarray:
    """``(<v, g_i phi>)_i`` in the group's enumeration order."""
    phi = _as_vector(phi, G.dim)
    v = _as_vector(v, G.dim)
    return (G.matrices @ phi) @ v


def sorted_coorbit_matrix(G: FiniteGroup, Phi, v) -> np.ndarray:
    T = _templates(Phi)
    if T.shape[1] != G.dim:
        raise DimensionMismatch(f"templates have dimension {T.shape[1]}, group acts on R^{G.dim}")
    v = _as_vector(v, G.dim)
    cols = [sort_desc(coorbit(G, phi, v)) for phi in T]
    return np.column_stack(cols)


def vectorize(X) -> np.ndarray:
    """Stack the columns of ``X`` (column-major)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        return X.copy()
    return X.reshape(-1, order="F")


def unvectorize(x, M: int, N: int) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape((M, N), order="F")


def embed(pipeline: EmbeddingPipeline, v, *, stacked: bool = False) -> np.ndarray:
    """Evaluate ``gamma(v)``.

    The default path computes every coorbit element by element; with
    ``stacked=True`` the precomputed operator ``K`` is applied instead.
    """
    v = _as_vector(v, pipeline.dim)
    if stacked:
        coorbits = (pipeline.stacked @ v).reshape(pipeline.N, pipeline.M)
        beta = np.flip(np.sort(coorbits, axis=1), axis=1).ravel()
    else:
        beta = vectorize(sorted_coorbit_matrix(pipeline.group, pipeline.templates, v))
    return pipeline.reduction.matrix @ beta


def sorted_coorbits_batch(pipeline: EmbeddingPipeline, V) -> np.ndarray:
    """Vectorised ``beta`` for a batch ``V`` of shape (n, d); returns (n, M*N)."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[1] != pipeline.dim:
        raise DimensionMismatch(f"batch has dimension {V.shape[1]}, pipeline expects {pipeline.dim}")
    co = (V @ pipeline.stacked.T).reshape(V.shape[0], pipeline.N, pipeline.M)
    co = np.flip(np.sort(co, axis=2), axis=2)
    return co.reshape(V.shape[0], -1)


def embed_batch(pipeline: EmbeddingPipeline, V) -> np.ndarray:
    return sorted_coorbits_batch(pipeline, V) @ pipeline.reduction.matrix.T


def stacked_coorbit_matrix(G: FiniteGroup, Phi) -> np.ndarray:
    """The operator ``K`` as an ``(M N) x d`` matrix.

    Row ``j M + i`` is ``(g_i phi_j)^T``, matching :func:`vectorize` order.
    """
    T = _templates(Phi)
    if T.shape[1] != G.dim:
        raise DimensionMismatch(f"templates have dimension {T.shape[1]}, group acts on R^{G.dim}")
    # (N, M, d): images g_i phi_j
    images = np.einsum("mab,nb->nma", G.matrices, T)
    return images.reshape(-1, G.dim)


_DIAG_BLOCK = 16_384  # floats per sorted block


def embed_diag(A, B, X) -> np.ndarray:
    """``diag(B^T sort(X A))`` without forming the ``D x D`` product.

    ``A`` is ``n x D``, ``B`` is ``m x D`` and ``X`` is ``m x n``; cost is one
    ``m x n x D`` product, ``D`` sorts of length ``m`` and ``D`` dot products.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    X = np.asarray(X, dtype=float)
    if A.ndim != 2 or B.ndim != 2 or X.ndim != 2:
        raise ShapeMismatch("A, B and X must all be matrices")
    m, n = X.shape
    if A.shape[0] != n or B.shape != (m, A.shape[1]):
        raise ShapeMismatch(f"incompatible shapes X {X.shape}, A {A.shape}, B {B.shape}")
    # (X A)^T in column blocks: each sort runs over a contiguous row and the
    # block stays cache resident, which keeps the cost linear in D
    D = A.shape[1]
    width = max(1, _DIAG_BLOCK // max(m, 1))
    out = np.empty(D)
    XT = X.T
    for s in range(0, D, width):
        S = A[:, s:s + width].T @ XT
        S.sort(axis=1)
        out[s:s + width] = np.einsum("kr,rk->k", S[:, ::-1], B[:, s:s + width])
    return out


def diag_form_templates(A, m: int) -> np.ndarray:
    """Templates ``e_1 a_k^T`` (row-major vectorised) for the columns ``a_k`` of ``A``."""
    A = np.asarray(A, dtype=float)
    n, D = A.shape
    T = np.zeros((D, m * n))
    T[:, :n] = A.T
    return T


def diag_form_pipeline(A, B) -> EmbeddingPipeline:
    """Generic pipeline reproducing :func:`embed_diag` for ``S_m`` on ``m x n``.

    The coorbit of ``e_1 a_k^T`` lists every entry of ``X a_k`` exactly
    ``(m-1)!`` times, so after sorting the ``r``-th largest entry of ``X a_k``
    sits at row ``r (m-1)!``; ``alpha`` weights it by ``B[r, k]``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n, D = A.shape
    m = B.shape[0]
    if B.shape != (m, D):
        raise ShapeMismatch(f"B must be {m}x{D}, got {B.shape}")
    G = row_perm_group(m, n)
    M = G.order
    rep = math.factorial(m - 1)
    alpha = np.zeros((D, M * D))
    for k in range(D):
        for r in range(m):
            alpha[k, k * M + r * rep] = B[r, k]
    return EmbeddingPipeline(G, TemplateSet(diag_form_templates(A, m)), Reduction(alpha))


def frame_pipeline(A) -> EmbeddingPipeline:
    """``beta_A(X) = sort(X A)`` for ``S_2`` acting on ``2 x n`` matrices.

    ``alpha`` is the identity on the ``2 x D`` sorted-coorbit matrix.
    """
    A = np.asarray(A, dtype=float)
    n, D = A.shape
    G = row_perm_group(2, n)
    return EmbeddingPipeline(G, TemplateSet(diag_form_templates(A, 2)), Reduction.identity(G.order, D))
