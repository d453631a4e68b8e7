import math

import numpy as np
import pytest

from sortembed.analysis import (
    OpaqueMap,
    check_separation,
    estimate_bilipschitz,
    lipschitz_upper_bound,
    local_lower_probe,
    operator_norm,
    pair_ratios,
    ratio,
    refine_collision,
)
from sortembed.embedding import EmbeddingPipeline, Reduction, TemplateSet, embed
from sortembed.errors import AllPairsDegenerate
from sortembed.group import cyclic_group, row_perm_group, sign_group, trivial_group
from sortembed.signretrieval import mercedes_benz


def isometry(d=3):
    return EmbeddingPipeline(trivial_group(d), TemplateSet(np.eye(d)), Reduction.identity(1, d))


def absval():
    return EmbeddingPipeline(sign_group(1), TemplateSet([[1.0]]), Reduction([[1.0, 0.0]]))


def zero_map():
    return EmbeddingPipeline(sign_group(2), TemplateSet([[1.0, 0.0]]), Reduction.zero(2, 1))


def degenerate_sign():
    return EmbeddingPipeline(sign_group(2), TemplateSet([[1.0, 0.0]]), Reduction.identity(2, 1))


def separating_sign():
    T = [[1.0, 0.0], [0.0, 1.0], [1 / math.sqrt(2), 1 / math.sqrt(2)]]
    return EmbeddingPipeline(sign_group(2), TemplateSet(T), Reduction.identity(2, 3))


def test_operator_norm_examples():
    assert operator_norm(np.eye(4)) == pytest.approx(1.0)
    assert operator_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0)
    assert operator_norm(mercedes_benz().A) == pytest.approx(math.sqrt(1.5), abs=1e-12)


def test_lipschitz_bound_examples():
    assert lipschitz_upper_bound(isometry()) == pytest.approx(1.0)
    p = EmbeddingPipeline(sign_group(1), TemplateSet([[1.0]]), Reduction.identity(2, 1))
    assert lipschitz_upper_bound(p) == pytest.approx(math.sqrt(2))
    p3 = EmbeddingPipeline(p.group, p.templates, Reduction(3 * p.reduction.matrix))
    assert lipschitz_upper_bound(p3) == pytest.approx(3 * math.sqrt(2))


def test_estimate_examples():
    e = estimate_bilipschitz(isometry(), trials=2000, seed=1)
    assert e.c_hat == pytest.approx(1.0, abs=1e-12) and e.C_hat == pytest.approx(1.0, abs=1e-12)
    z = estimate_bilipschitz(zero_map(), trials=500, seed=1)
    assert z.c_hat == z.C_hat == 0.0
    a = estimate_bilipschitz(absval(), trials=2000, seed=1)
    assert a.c_hat == pytest.approx(1.0, abs=1e-9) and a.C_hat == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("make", [separating_sign, degenerate_sign])
def test_estimate_witnesses_and_bounds(make):
    pipe = make()
    e = estimate_bilipschitz(pipe, trials=5000, seed=3)
    assert 0 <= e.c_hat <= e.C_hat <= e.analytic_upper + 1e-8
    assert ratio(pipe, *e.c_witness) == pytest.approx(e.c_hat, abs=1e-12)
    assert ratio(pipe, *e.C_witness) == pytest.approx(e.C_hat, abs=1e-12)


def test_estimate_is_deterministic():
    a = estimate_bilipschitz(separating_sign(), trials=3000, seed=9).to_dict()
    b = estimate_bilipschitz(separating_sign(), trials=3000, seed=9).to_dict()
    assert a == b


def test_uniform_and_callable_samplers():
    pipe = separating_sign()
    u = estimate_bilipschitz(pipe, "uniform", trials=1000, seed=0)
    c = estimate_bilipschitz(pipe, lambda rng, n, d: rng.laplace(size=(n, d)), trials=1000, seed=0)
    assert u.C_hat <= u.analytic_upper + 1e-8 and c.C_hat <= c.analytic_upper + 1e-8
    with pytest.raises(ValueError):
        estimate_bilipschitz(pipe, "cauchy", trials=10)


def test_all_degenerate_pairs():
    same = lambda rng, n, d: np.ones((n, d))  # noqa: E731
    with pytest.raises(AllPairsDegenerate):
        estimate_bilipschitz(isometry(2), same, trials=10)


def test_pair_ratios_marks_same_orbit():
    _, qd, r = pair_ratios(degenerate_sign(), [[1.0, 2.0]], [[-1.0, -2.0]])
    assert qd[0] == 0.0 and np.isnan(r[0])


def test_separation_examples():
    assert check_separation(zero_map(), trials=200, seed=0).found
    assert check_separation(isometry(), trials=500, seed=0).verdict == "separated-at-scale"
    pipe = degenerate_sign()
    assert np.array_equal(embed(pipe, [0.0, 1.0]), embed(pipe, [0.0, 2.0]))
    rep = check_separation(pipe, trials=500, seed=0)
    assert rep.verdict == "collision-found"
    col = rep.collision
    assert col.embedding_distance <= 1e-6 and col.quotient_distance > 1e-5
    assert np.linalg.norm(embed(pipe, col.v) - embed(pipe, col.w)) <= 1e-6


def test_collision_drives_c_hat_to_zero():
    pipe = degenerate_sign()
    rep = check_separation(pipe, trials=500, seed=0)
    e = estimate_bilipschitz(pipe, trials=1000, seed=0, extra_pairs=[(rep.collision.v, rep.collision.w)])
    assert e.c_hat < 1e-6


def test_refine_respects_floor():
    v, w, e, q = refine_collision(separating_sign(), [1.0, 0.5], [0.2, -0.3])
    assert q >= 0.5 and e > 0.1


def test_separating_pipeline_has_no_collision():
    pipe = separating_sign()
    e = estimate_bilipschitz(pipe, trials=100_000, seed=42)
    assert e.c_hat >= 0.01
    assert not check_separation(pipe, trials=2000, seed=42).found


@pytest.mark.parametrize("G", [cyclic_group(3), row_perm_group(3)], ids=lambda g: g.name)
def test_max_filter_with_random_templates_separates(G):
    rng = np.random.default_rng(11)
    T = TemplateSet(rng.standard_normal((2 * G.dim + 1, G.dim)))
    pipe = EmbeddingPipeline(G, T, Reduction.identity(G.order, T.N))
    assert not check_separation(pipe, trials=1000, seed=1).found


def test_local_probe_examples():
    rad = [2.0, 1.0, 0.5]
    for r, m in local_lower_probe(isometry(2), np.zeros(2), rad, 300, seed=0):
        assert m == pytest.approx(1.0, abs=1e-12)
    assert all(m == 0.0 for _, m in local_lower_probe(zero_map(), np.zeros(2), rad, 300, seed=0))
    with pytest.raises(ValueError):
        local_lower_probe(isometry(2), np.zeros(2), [1.0, 2.0])


def test_local_probe_against_global_estimate():
    pipe = separating_sign()
    glob = estimate_bilipschitz(pipe, trials=100_000, seed=5)
    probe = local_lower_probe(pipe, [1.0, 0.0], [1.0, 0.5, 0.1], 1000, seed=5)
    assert all(m >= glob.c_hat for _, m in probe)


def test_opaque_map_wrapper():
    f = OpaqueMap.scalar(lambda V: np.abs(V), 1)
    assert f.dim == 1
    e = estimate_bilipschitz(f, trials=500, seed=0)
    assert e.analytic_upper == math.inf
    assert e.c_hat <= 1.0 + 1e-12
