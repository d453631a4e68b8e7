"""Bi-Lipschitz analysis of invariant maps on the quotient ``(R^d / G, dist)``.

The analytic side is the upper bound ``||alpha|| * ||K||``; the empirical
side samples pairs and records the extreme ratios
``||gamma(v) - gamma(w)|| / dist(v, w)``, always with witnesses so that every
number can be re-checked.  :func:`check_separation` is a falsifier: it can
find collisions but never proves their absence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .embedding import EmbeddingPipeline
from .errors import AllPairsDegenerate
from .group import FiniteGroup, quotient_dist_batch, trivial_group

DEGENERACY_FLOOR = 1e-12
_CHUNK = 20_000

Sampler = Callable[[np.random.Generator, int, int], np.ndarray]


@dataclass(frozen=True, eq=False)
class OpaqueMap:
    """Wrap an arbitrary invariant map so the samplers below can probe it.

    ``func`` maps an ``(n, d)`` batch to ``(n, D)`` outputs.
    """

    func: Callable[[np.ndarray], np.ndarray]
    group: FiniteGroup

    @classmethod
    def scalar(cls, func, d: int = 1) -> "OpaqueMap":
        """A map of ``R^d`` with the trivial group."""
        return cls(func, trivial_group(d))

    @property
    def dim(self) -> int:
        return self.group.dim

    def embed_batch(self, V) -> np.ndarray:
        out = np.asarray(self.func(np.atleast_2d(np.asarray(V, dtype=float))), dtype=float)
        return out.reshape(out.shape[0], -1)


def operator_norm(matrix) -> float:
    """Largest singular value (0 for an empty matrix)."""
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False)[0])


def lipschitz_upper_bound(pipeline: EmbeddingPipeline) -> float:
    return operator_norm(pipeline.reduction.matrix) * operator_norm(pipeline.stacked)


def _analytic_upper(target) -> float:
    if isinstance(target, EmbeddingPipeline):
        return lipschitz_upper_bound(target)
    return math.inf


def _sampler(spec) -> Sampler:
    if callable(spec):
        return spec
    if spec in (None, "gaussian", "normal"):
        return lambda rng, n, d: rng.standard_normal((n, d))
    if spec == "uniform":
        return lambda rng, n, d: rng.uniform(-1.0, 1.0, (n, d))
    raise ValueError(f"unknown sampler {spec!r}")


def pair_ratios(target, V, W) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Embedding distances, quotient distances and their ratios for paired rows.

    Ratios are ``nan`` where the quotient distance is below the degeneracy floor.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    emb = np.linalg.norm(target.embed_batch(V) - target.embed_batch(W), axis=1)
    qd = quotient_dist_batch(target.group, V, W)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(qd > DEGENERACY_FLOOR, emb / qd, np.nan)
    return emb, qd, ratio


def ratio(target, v, w) -> float:
    return float(pair_ratios(target, [v], [w])[2][0])


@dataclass
class BiLipschitzEstimate:
    c_hat: float
    C_hat: float
    c_witness: tuple[np.ndarray, np.ndarray]
    C_witness: tuple[np.ndarray, np.ndarray]
    trials: int
    seed: int
    analytic_upper: float
    pairs_used: int = 0

    def to_dict(self) -> dict:
        return {
            "c_hat": self.c_hat,
            "C_hat": self.C_hat,
            "analytic_upper": self.analytic_upper,
            "c_witness": [w.tolist() for w in self.c_witness],
            "C_witness": [w.tolist() for w in self.C_witness],
            "trials": self.trials,
            "pairs_used": self.pairs_used,
            "seed": self.seed,
        }


def estimate_bilipschitz(
    target,
    sampler="gaussian",
    trials: int = 10_000,
    seed: int = 0,
    extra_pairs: Sequence[tuple] = (),
) -> BiLipschitzEstimate:
    """Empirical lower/upper Lipschitz constants over i.i.d. sample pairs.

    Pairs closer than the degeneracy floor in quotient distance are skipped.
    ``extra_pairs`` (e.g. a collision witness) are evaluated after the samples.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    draw = _sampler(sampler)
    rng = np.random.default_rng(seed)
    d = target.dim
    lo = (math.inf, None, None)
    hi = (-math.inf, None, None)
    used = 0

    def absorb(V, W):
        nonlocal lo, hi, used
        _, _, r = pair_ratios(target, V, W)
        ok = np.flatnonzero(~np.isnan(r))
        if ok.size == 0:
            return
        used += ok.size
        i, j = ok[np.argmin(r[ok])], ok[np.argmax(r[ok])]
        if r[i] < lo[0]:
            lo = (float(r[i]), V[i].copy(), W[i].copy())
        if r[j] > hi[0]:
            hi = (float(r[j]), V[j].copy(), W[j].copy())

    done = 0
    while done < trials:
        n = min(_CHUNK, trials - done)
        V = np.asarray(draw(rng, n, d), dtype=float)
        W = np.asarray(draw(rng, n, d), dtype=float)
        absorb(V, W)
        done += n
    if len(extra_pairs):
        absorb(np.array([p[0] for p in extra_pairs], dtype=float),
               np.array([p[1] for p in extra_pairs], dtype=float))
    if used == 0:
        raise AllPairsDegenerate("every sampled pair lies in a single orbit")
    return BiLipschitzEstimate(
        c_hat=lo[0],
        C_hat=hi[0],
        c_witness=(lo[1], lo[2]),
        C_witness=(hi[1], hi[2]),
        trials=trials,
        seed=seed,
        analytic_upper=_analytic_upper(target),
        pairs_used=used,
    )


# -- orbit separation ---------------------------------------------------------------

@dataclass
class Collision:
    v: np.ndarray
    w: np.ndarray
    embedding_distance: float
    quotient_distance: float

    def to_dict(self) -> dict:
        return {
            "v": self.v.tolist(),
            "w": self.w.tolist(),
            "embedding_distance": self.embedding_distance,
            "quotient_distance": self.quotient_distance,
        }


@dataclass
class SeparationReport:
    verdict: str
    collision: Collision | None
    trials: int
    tol: float
    seed: int
    candidates_refined: int = 0

    @property
    def found(self) -> bool:
        return self.collision is not None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "collision": None if self.collision is None else self.collision.to_dict(),
            "trials": self.trials,
            "tol": self.tol,
            "seed": self.seed,
            "candidates_refined": self.candidates_refined,
        }


def _is_collision(emb: float, qd: float, tol: float) -> bool:
    return emb <= tol and qd > 10 * tol


def refine_collision(target, v, w, steps: int = 200, floor: float = 0.5, step: float = 0.25):
    """Coordinate-wise local search shrinking ``||gamma(v) - gamma(w)||``.

    The pair is first rescaled to unit quotient distance; moves that push the
    quotient distance below ``floor`` are rejected.  Every iteration tries
    ``+-step`` along each of the ``2d`` coordinates of ``(v, w)``, takes the
    best improving move, and halves the step when none improves.
    """
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    d = v.size
    q0 = quotient_dist_batch(target.group, v[None], w[None])[0]
    x = np.concatenate([v, w]) / q0
    emb, qd, _ = pair_ratios(target, x[None, :d], x[None, d:])
    best = emb[0]
    moves = np.concatenate([np.eye(2 * d), -np.eye(2 * d)])
    for _ in range(steps):
        if best == 0.0:
            break
        trial = x + step * moves
        e, q, _ = pair_ratios(target, trial[:, :d], trial[:, d:])
        e = np.where(q >= floor, e, np.inf)
        k = int(np.argmin(e))
        if e[k] < best:
            x, best = trial[k], float(e[k])
        else:
            step *= 0.5
    qd = float(quotient_dist_batch(target.group, x[None, :d], x[None, d:])[0])
    return x[:d].copy(), x[d:].copy(), float(best), qd


def _embedded_neighbours(target, Z: np.ndarray, k: int = 3) -> np.ndarray:
    E = target.embed_batch(Z)
    k = min(k + 1, Z.shape[0])
    if E.shape[1] <= 32:
        _, idx = cKDTree(E).query(E, k=k)
    else:
        sq = np.sum(E ** 2, axis=1)
        dist = sq[:, None] + sq[None, :] - 2 * E @ E.T
        idx = np.argsort(dist, axis=1)[:, :k]
    idx = np.atleast_2d(idx)
    pairs = [(i, int(j)) for i in range(Z.shape[0]) for j in idx[i] if int(j) != i]
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def check_separation(
    target,
    trials: int = 2000,
    tol: float = 1e-6,
    seed: int = 0,
    candidates: int = 8,
    refine_steps: int = 200,
) -> SeparationReport:
    """Search for pairs in different orbits with (numerically) equal embeddings.

    A collision requires embedding distance ``<= tol`` and quotient distance
    ``> 10 tol``.  Random pairs are tried first; then the closest pairs by
    embedding distance among sampled points, plus the lowest-ratio random pairs,
    are refined by :func:`refine_collision`.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    d = target.dim
    V = rng.standard_normal((trials, d))
    W = rng.standard_normal((trials, d))
    emb, qd, r = pair_ratios(target, V, W)
    hits = np.flatnonzero((emb <= tol) & (qd > 10 * tol))
    if hits.size:
        i = int(hits[0])
        return SeparationReport("collision-found", Collision(V[i], W[i], float(emb[i]), float(qd[i])), trials, tol, seed)

    Z = rng.standard_normal((min(trials, 4096), d))
    nn = _embedded_neighbours(target, Z)
    pool_v = [V, Z[nn[:, 0]]]
    pool_w = [W, Z[nn[:, 1]]]
    PV, PW = np.concatenate(pool_v), np.concatenate(pool_w)
    _, _, pr = pair_ratios(target, PV, PW)
    pr = np.where(np.isnan(pr), np.inf, pr)
    # random pairs and neighbour pairs each get half of the refinement budget
    n_rand = trials
    order_rand = np.argsort(pr[:n_rand], kind="stable")[: max(1, candidates // 2)]
    order_nn = n_rand + np.argsort(pr[n_rand:], kind="stable")[: max(1, candidates - order_rand.size)]
    chosen = [i for i in np.concatenate([order_rand, order_nn]) if np.isfinite(pr[i])]
    for i in chosen:
        v, w, e, q = refine_collision(target, PV[i], PW[i], steps=refine_steps)
        if _is_collision(e, q, tol):
            return SeparationReport("collision-found", Collision(v, w, e, q), trials, tol, seed, len(chosen))
    return SeparationReport("separated-at-scale", None, trials, tol, seed, len(chosen))


def local_lower_probe(
    target,
    v0,
    radii: Sequence[float],
    trials_per_radius: int = 1000,
    seed: int = 0,
) -> list[tuple[float, float]]:
    """Minimum sampled ratio over pairs drawn uniformly from balls around ``v0``."""
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii):
        raise ValueError("radii must be positive")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    v0 = np.asarray(v0, dtype=float)
    d = target.dim
    rng = np.random.default_rng(seed)

    def ball(n, r):
        u = rng.standard_normal((n, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return v0 + u * (r * rng.random((n, 1)) ** (1.0 / d))

    out = []
    for r in radii:
        _, _, rat = pair_ratios(target, ball(trials_per_radius, r), ball(trials_per_radius, r))
        if np.all(np.isnan(rat)):
            raise AllPairsDegenerate(f"no non-degenerate pair at radius {r}")
        out.append((r, float(np.nanmin(rat))))
    return out
