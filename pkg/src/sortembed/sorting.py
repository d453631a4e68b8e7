"""Sorting combinatorics and brute-force oracles for the stability lemmas.

Permutations are index arrays ``p`` acting on vectors by ``(p x)_i = x[p[i]]``.
With that convention

* ``L(x)`` is the set of ``p`` with ``x[p] == sort_desc(x)``,
* ``H(x)`` is the set of ``p`` with ``x[p] == x``,

and the operator product "first ``b``, then ``a``" is :func:`compose`.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import (
    ConstantVector,
    DegenerateDraw,
    EnumerationCapExceeded,
    HypothesisViolated,
    MTooSmall,
)

ENUMERATION_CAP = 5040
COORBIT_TOL = 1e-12
SEGMENT_TS = tuple(round(0.1 * k, 1) for k in range(1, 11))

Perm = tuple[int, ...]


def sort_desc(x) -> np.ndarray:
    """Nonincreasing rearrangement of ``x``; column-wise for 2-D input."""
    x = np.asarray(x, dtype=float)
    return np.flip(np.sort(x, axis=0), axis=0)


def compose(a: Sequence[int], b: Sequence[int]) -> Perm:
    """Index array of the operator product ``a b`` (apply ``b`` first)."""
    return tuple(int(b[i]) for i in a)


def apply_perm(p: Sequence[int], x) -> np.ndarray:
    return np.asarray(x)[list(p)]


@dataclass(frozen=True)
class SortProfile:
    sigma: Perm
    partition: tuple[tuple[int, ...], ...]
    delta: float
    diff_minmax: float

    @property
    def stabiliser_order(self) -> int:
        return math.prod(math.factorial(len(b)) for b in self.partition)

    def stabiliser(self) -> set[Perm]:
        """``H(x)`` built from the tie partition: all block-wise shuffles."""
        M = len(self.sigma)
        out = set()
        for choice in itertools.product(*(itertools.permutations(b) for b in self.partition)):
            p = list(range(M))
            for block, image in zip(self.partition, choice):
                for i, j in zip(block, image):
                    p[i] = j
            out.add(tuple(p))
        return out

    def sorting_set(self) -> set[Perm]:
        """``L(x) = sigma H(x)``."""
        return {compose(self.sigma, h) for h in self.stabiliser()}


def diff_minmax(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.max(x) - np.min(x)) if x.size else 0.0


def delta(x, tol: float = 0.0) -> float:
    """Smallest gap ``|x_i - x_j|`` exceeding ``tol``; ``inf`` if there is none."""
    s = np.sort(np.asarray(x, dtype=float))
    if s.size < 2:
        return math.inf
    # for each entry, the first strictly larger-by-tol entry gives its smallest gap
    j = np.searchsorted(s, s + tol, side="right")
    ok = j < s.size
    if not np.any(ok):
        return math.inf
    return float(np.min(s[j[ok]] - s[ok]))


def sort_profile(x, tol: float = 0.0) -> SortProfile:
    x = np.asarray(x, dtype=float)
    sigma = np.argsort(-x, kind="stable")
    blocks, current = [], [int(sigma[0])] if x.size else []
    for prev, nxt in zip(sigma[:-1], sigma[1:]):
        if x[prev] - x[nxt] > tol:
            blocks.append(tuple(sorted(current)))
            current = []
        current.append(int(nxt))
    if current:
        blocks.append(tuple(sorted(current)))
    return SortProfile(
        sigma=tuple(int(i) for i in sigma),
        partition=tuple(blocks),
        delta=delta(x, tol),
        diff_minmax=diff_minmax(x),
    )


def pairwise_diff_matrix(M: int) -> np.ndarray:
    """Rows ``e_i - e_j`` for ``i < j`` in lexicographic pair order.

    ``max |D x| == max(x) - min(x)`` for every ``x``.
    """
    if M < 2:
        raise MTooSmall(f"need M >= 2, got {M}")
    pairs = list(itertools.combinations(range(M), 2))
    D = np.zeros((len(pairs), M))
    for r, (i, j) in enumerate(pairs):
        D[r, i] = 1.0
        D[r, j] = -1.0
    return D


# -- exhaustive oracles ---------------------------------------------------------

@lru_cache(maxsize=16)
def _perm_table(M: int) -> np.ndarray:
    table = np.array(list(itertools.permutations(range(M))), dtype=np.int64).reshape(-1, M)
    table.setflags(write=False)
    return table


def all_permutations(M: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    if math.factorial(M) > cap:
        raise EnumerationCapExceeded(f"{M}! exceeds the enumeration cap {cap}")
    return _perm_table(M)


def _matching(x, target, tol, cap) -> set[Perm]:
    x = np.asarray(x, dtype=float)
    perms = all_permutations(x.size, cap)
    hit = np.all(np.abs(x[perms] - target) <= tol, axis=1)
    return {tuple(int(i) for i in p) for p in perms[hit]}


def enumerate_L(x, tol: float = 0.0, cap: int = ENUMERATION_CAP) -> set[Perm]:
    """All permutations sorting ``x`` decreasingly, by exhaustive search over S_M."""
    return _matching(x, sort_desc(x), tol, cap)


def enumerate_H(x, tol: float = 0.0, cap: int = ENUMERATION_CAP) -> set[Perm]:
    """All permutations fixing ``x``, by exhaustive search over S_M."""
    return _matching(x, np.asarray(x, dtype=float), tol, cap)


@dataclass(frozen=True)
class DeltaVerdict:
    delta: float
    min_non_stabiliser: float
    min_non_sorting: float
    holds: bool


def check_delta_reexpression(x, tol: float = 0.0, cap: int = ENUMERATION_CAP) -> DeltaVerdict:
    """Compare ``delta(x)`` with its two permutation-minimum forms.

    The minima are ``min ||p x - x||_inf`` over ``p`` outside ``H(x)`` and
    ``min ||p x - sort(x)||_inf`` over ``p`` outside ``L(x)``.
    """
    x = np.asarray(x, dtype=float)
    if diff_minmax(x) <= tol:
        raise ConstantVector("delta re-expression needs a non-constant vector")
    perms = all_permutations(x.size, cap)
    moved = x[perms]
    dev_fix = np.max(np.abs(moved - x), axis=1)
    dev_sort = np.max(np.abs(moved - sort_desc(x)), axis=1)
    a = float(np.min(dev_fix[dev_fix > tol]))
    b = float(np.min(dev_sort[dev_sort > tol]))
    d = delta(x, tol)
    return DeltaVerdict(d, a, b, abs(a - d) <= tol and abs(b - d) <= tol)


# -- lemma scenarios ------------------------------------------------------------

@dataclass
class LemmaScenario:
    """Inputs for the hypercube stability and perturbation lemmas.

    ``xs`` has shape ``(p, M)``; ``cs`` are the positive weights; ``y`` is the
    optional extra vector of the perturbed variant.
    """

    xs: np.ndarray
    cs: np.ndarray
    eps: float
    y: np.ndarray | None = None
    seed: int | None = None

    @property
    def p(self) -> int:
        return self.xs.shape[0]

    @property
    def M(self) -> int:
        return self.xs.shape[1]

    @property
    def total(self) -> np.ndarray:
        return self.xs.sum(axis=0)

    @property
    def weighted_total(self) -> np.ndarray:
        return (self.cs[:, None] * self.xs).sum(axis=0)

    @property
    def perturbation(self) -> np.ndarray:
        return ((self.cs - 1.0)[:, None] * self.xs).sum(axis=0)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "M": self.M,
            "xs": self.xs.tolist(),
            "cs": self.cs.tolist(),
            "eps": self.eps,
            "y": None if self.y is None else self.y.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LemmaScenario":
        y = data.get("y")
        return cls(
            xs=np.asarray(data["xs"], dtype=float).reshape(len(data["xs"]), -1),
            cs=np.asarray(data["cs"], dtype=float),
            eps=float(data["eps"]),
            y=None if y is None else np.asarray(y, dtype=float),
            seed=data.get("seed"),
        )


def hypothesis_failures(s: LemmaScenario) -> list[str]:
    """Names of the violated lemma hypotheses (empty when the scenario is valid)."""
    bad = []
    if not 0.0 < s.eps < 1.0:
        bad.append("eps in (0,1)")
    if s.cs.shape != (s.p,) or np.any(s.cs <= 0):
        bad.append("c_k > 0")
    partial = np.zeros(s.M)
    for ell in range(s.p - 1):
        partial = partial + s.xs[ell]
        if not diff_minmax(s.xs[ell + 1]) < delta(partial):
            bad.append(f"nesting at l={ell + 1}")
    d = delta(s.total)
    if not diff_minmax(s.perturbation) <= s.eps * d:
        bad.append("perturbation bound")
    if s.y is not None:
        if s.eps > 0.5:
            bad.append("eps <= 1/2 with y")
        if not diff_minmax(s.y) <= 0.5 * d:
            bad.append("y bound")
    return bad


def validate_scenario(s: LemmaScenario) -> None:
    bad = hypothesis_failures(s)
    if bad:
        raise HypothesisViolated("scenario violates: " + ", ".join(bad))


def _rescale_to(v: np.ndarray, target: float) -> np.ndarray:
    return v * (target / diff_minmax(v))


def _tied_draw(rng: np.random.Generator, M: int) -> np.ndarray:
    # small integer alphabets leave ties in place, which is where the lemmas bite
    levels = int(rng.integers(2, M + 1))
    return rng.integers(0, levels, M).astype(float)


def generate_lemma_scenario(
    M: int,
    p: int,
    eps: float,
    with_y: bool = False,
    seed: int = 0,
    retries: int = 100,
) -> LemmaScenario:
    """Draw a scenario satisfying the lemma hypotheses by construction.

    ``x_1`` is a non-constant vector (ties allowed); each later ``x_{k+1}`` is
    rescaled so ``Delta(x_{k+1}) = delta(partial sum) / 2``.  The weights are
    ``c_k = 1 + t r_k`` with ``t`` chosen so the perturbation uses a random
    fraction in ``[0.5, 0.95]`` of the ``eps`` budget, and ``y`` uses a
    fraction in ``[0.5, 1]`` of its ``delta/2`` budget.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if with_y and eps > 0.5:
        raise ValueError("the perturbed lemma needs eps <= 1/2")
    if M < 2:
        raise MTooSmall(f"need M >= 2, got {M}")
    rng = np.random.default_rng(seed)
    for _ in range(retries):
        x1 = _tied_draw(rng, M) * rng.uniform(0.5, 4.0)
        if diff_minmax(x1) == 0:
            continue
        xs = [x1]
        partial = x1.copy()
        for _k in range(1, p):
            nxt = _tied_draw(rng, M) if rng.random() < 0.5 else rng.standard_normal(M)
            if diff_minmax(nxt) == 0:
                nxt = rng.standard_normal(M)
            nxt = _rescale_to(nxt, 0.5 * delta(partial))
            xs.append(nxt)
            partial = partial + nxt
        xs = np.asarray(xs)
        total_delta = delta(xs.sum(axis=0))

        r = rng.uniform(-1.0, 1.0, p)
        spread = diff_minmax((r[:, None] * xs).sum(axis=0))
        if spread == 0:
            cs = np.ones(p)
        else:
            cs = 1.0 + r * (rng.uniform(0.5, 0.95) * eps * total_delta / spread)
        if np.any(cs <= 0):
            continue

        y = None
        if with_y:
            y = rng.standard_normal(M)
            y = _rescale_to(y, rng.uniform(0.5, 1.0) * 0.5 * total_delta)

        s = LemmaScenario(xs, cs, float(eps), y, seed)
        if not hypothesis_failures(s):
            return s
    raise DegenerateDraw(f"no valid scenario after {retries} draws (M={M}, p={p}, seed={seed})")


@dataclass
class SubCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class LemmaVerdict:
    checks: list[SubCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(SubCheck(name, bool(passed), detail))


def check_lemma_conclusions(
    s: LemmaScenario,
    validate: bool = True,
    cap: int = ENUMERATION_CAP,
) -> LemmaVerdict:
    """Check every lemma conclusion applicable to ``s`` by exhaustive enumeration.

    The inclusion and segment lemmas are applied to the pairs
    ``(sum x_k, sum (c_k - 1) x_k)``, ``(sum x_k, y)`` when ``y`` is present,
    and to each nesting step ``(sum_{k<=l} x_k, x_{l+1})``.
    """
    if validate:
        validate_scenario(s)
    if math.factorial(s.M) > cap:
        raise EnumerationCapExceeded(f"{s.M}! exceeds the enumeration cap {cap}")

    L = lambda v: enumerate_L(v, 0.0, cap)  # noqa: E731
    H = lambda v: enumerate_H(v, 0.0, cap)  # noqa: E731
    v = LemmaVerdict()
    total, weighted = s.total, s.weighted_total

    partial = s.xs[0].copy()
    for ell in range(1, s.p):
        nxt = partial + s.xs[ell]
        v.add(f"inclusion/nesting l={ell}", L(nxt) <= L(partial) and H(nxt) <= H(partial))
        partial = nxt

    pairs = [("perturbation", s.perturbation)]
    if s.y is not None:
        pairs.append(("y", s.y))
    for label, step in pairs:
        end = total + step
        L_end, H_end = L(end), H(end)
        v.add(f"inclusion/{label}", L_end <= L(total) and H_end <= H(total))
        bad_t = [t for t in SEGMENT_TS if L(total + t * step) != L_end or H(total + t * step) != H_end]
        v.add(f"segment/{label}", not bad_t, f"failing t: {bad_t}" if bad_t else "")

    v.add("hypercube/L", L(total) == L(weighted))
    v.add("hypercube/H", H(total) == H(weighted))
    d, d_w = delta(total), delta(weighted)
    sandwich = (1 - s.eps) * d <= d_w <= (1 + s.eps) * d
    v.add("hypercube/delta-sandwich", sandwich, f"delta={d!r} delta_c={d_w!r} eps={s.eps!r}")

    if s.y is not None:
        a, b = total + s.y, weighted + s.y
        v.add("perturbed/L", L(a) == L(b))
        v.add("perturbed/H", H(a) == H(b))
    return v


def certificate(s: LemmaScenario, verdict: LemmaVerdict) -> str:
    """JSON counterexample certificate: the full scenario plus failed sub-checks."""
    payload = {
        "scenario": s.to_dict(),
        "failed": verdict.failed,
        "checks": [asdict(c) for c in verdict.checks],
    }
    return json.dumps(payload, indent=2)
