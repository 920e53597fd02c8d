import math

import numpy as np
import pytest

from votermix.analysis import star_lower_bound, star_phi, star_time
from votermix.chain_core import build_star
from votermix.errors import InvalidSizeError
from votermix.exact_dist import all_configs, build_config_generator, evolve, point_mass, stationary_of, tv
from votermix.star_reduced import (
    ReducedStar,
    project_config,
    reduced_evolve,
    reduced_generator,
    reduced_stationary,
    sample_split_star,
    sample_split_stationary,
    split_stationary_batch,
    split_star_batch,
    state_index,
    t_mix_from_ones,
    tv_from_all_ones,
    write_star_csv,
)


def full_projection(n, law):
    out = np.zeros(2 * (n + 1))
    for s, cfg in enumerate(all_configs(n + 1)):
        c, k = project_config(cfg)
        out[state_index(n, c, k)] += law[s]
    return out


def test_rate_table():
    n = 6
    G = reduced_generator(n).toarray()
    for k in range(n + 1):
        s0, s1 = state_index(n, 0, k), state_index(n, 1, k)
        assert G[s0, s1] == pytest.approx(0.5 + k / n)
        assert G[s1, s0] == pytest.approx(0.5 + (n - k) / n)
        if k < n:
            assert G[s0, s0 + 1] == pytest.approx((n - k) / 2)
            assert G[s1, s1 + 1] == pytest.approx(3 * (n - k) / 2)
        if k > 0:
            assert G[s0, s0 - 1] == pytest.approx(3 * k / 2)
            assert G[s1, s1 - 1] == pytest.approx(k / 2)
    assert np.abs(G.sum(axis=1)).max() <= 1e-12
    off = G - np.diag(np.diag(G))
    assert (off >= 0).all()
    # each row has at most the three listed moves
    assert ((off > 0).sum(axis=1) <= 3).all()


def test_boundary_rates():
    n = 8
    G = reduced_generator(n).toarray()
    top = state_index(n, 1, n)
    assert G[top, top - 1] == pytest.approx(n / 2)
    assert G[top, state_index(n, 0, n)] == pytest.approx(0.5)
    bottom = state_index(n, 0, 0)
    assert G[bottom, bottom + 1] == pytest.approx(n / 2)
    assert G[bottom, state_index(n, 1, 0)] == pytest.approx(0.5)


def test_size_checks():
    with pytest.raises(InvalidSizeError):
        reduced_generator(1)
    with pytest.warns(UserWarning):
        reduced_generator(5)


def test_evolve_and_stationary():
    n = 10
    p0 = ReducedStar(n).all_ones()
    assert np.array_equal(reduced_evolve(n, p0, 0.0), p0)
    p = reduced_evolve(n, p0, 1.7)
    assert abs(p.sum() - 1) <= 1e-12
    mu = reduced_stationary(n)
    G = reduced_generator(n)
    assert np.abs(G.T @ mu).max() <= 1e-10
    flipped = np.array([mu[state_index(n, 1 - c, n - k)] for c in (0, 1) for k in range(n + 1)])
    assert np.allclose(flipped, mu, atol=1e-12)


def test_stationary_matches_full_system_for_n2():
    mu_full = stationary_of(build_config_generator(build_star(2)))
    assert tv(full_projection(2, mu_full), reduced_stationary(2)) <= 1e-9


@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_lift_equality(n):
    gen = build_config_generator(build_star(n))
    mu = stationary_of(gen)
    ones = point_mass(gen.n_states, gen.n_states - 1)
    times = [0.25, 0.5, 1, 2, 4]
    reduced = dict(tv_from_all_ones(n, times))
    for t in times:
        assert abs(tv(evolve(gen, ones, t), mu) - reduced[t]) <= 1e-9


def test_tv_examples():
    assert tv_from_all_ones(200, [0.0])[0][1] > 0.99
    # the n = 10^4 case at t = 10 is part of the acceptance suite
    assert tv_from_all_ones(1000, [10.0])[0][1] <= 0.25


def test_t_mix_examples():
    assert t_mix_from_ones(10, 0.9999) <= 1e-3 or tv_from_all_ones(10, [0.0])[0][1] > 0.9999
    values = [t_mix_from_ones(n) for n in (100, 1000, 10_000)]
    assert max(values) <= 1.25 * min(values)
    assert t_mix_from_ones(1000, 1 / 16) <= 4 * t_mix_from_ones(1000, 0.25)


def test_eigenfunction_decay_exact():
    for n in (2, 4, 6):
        gen = build_config_generator(build_star(n))
        configs = all_configs(n + 1)
        A, B = range(1, n // 2 + 1), range(n // 2 + 1, n + 1)
        phi = star_phi(A, B, configs).astype(float)
        for t in (0.1, 0.5, 1.0, 2.0):
            laws = evolve(gen, np.eye(gen.n_states), t)
            assert np.abs(laws @ phi - math.exp(-2 * t) * phi).max() <= 1e-8


def test_half_leaves_bound_small_star():
    n = 6
    gen = build_config_generator(build_star(n))
    mu = stationary_of(gen)
    for center in (0, 1):
        eta0 = [center] + [1] * (n // 2) + [0] * (n // 2)
        start = point_mass(gen.n_states, sum(b << i for i, b in enumerate(eta0)))
        for C in np.linspace(-6, math.log(n) - 0.01, 25):
            t = star_time(n, C)
            assert tv(evolve(gen, start, t), mu) >= star_lower_bound(C, n) - 1e-9


def test_split_sampler_matches_reduced_law():
    n = 6
    rng = np.random.default_rng(0)
    counts = np.zeros(2 * (n + 1))
    for _ in range(40_000):
        c, a, b = sample_split_star(n, 1, 3, 3, 0.8, rng)
        counts[state_index(n, c, a + b)] += 1
    chain = ReducedStar(n)
    assert tv(counts / counts.sum(), chain.evolve(chain.all_ones(), 0.8)) <= 0.02


def test_split_sampler_matches_full_phi_law():
    n = 4
    gen = build_config_generator(build_star(n))
    eta0 = [1, 1, 1, 0, 0]
    law = evolve(gen, point_mass(gen.n_states, sum(b << i for i, b in enumerate(eta0))), 0.6)
    configs = all_configs(n + 1)
    key = configs[:, 0] * 100 + configs[:, 1:3].sum(axis=1) * 10 + configs[:, 3:].sum(axis=1)
    exact = {int(k): 0.0 for k in np.unique(key)}
    for k, p in zip(key, law):
        exact[int(k)] += p
    rng = np.random.default_rng(1)
    emp = dict.fromkeys(exact, 0.0)
    m = 40_000
    for _ in range(m):
        c, a, b = sample_split_star(n, 1, 2, 0, 0.6, rng)
        emp[c * 100 + a * 10 + b] += 1 / m
    assert 0.5 * sum(abs(emp[k] - exact[k]) for k in exact) <= 0.02


def test_split_stationary_lift():
    n = 4
    mu = stationary_of(build_config_generator(build_star(n)))
    configs = all_configs(n + 1)
    key = configs[:, 0] * 100 + configs[:, 1:3].sum(axis=1) * 10 + configs[:, 3:].sum(axis=1)
    exact = {}
    for k, p in zip(key, mu):
        exact[int(k)] = exact.get(int(k), 0.0) + p
    rng = np.random.default_rng(2)
    m = 40_000
    emp = dict.fromkeys(exact, 0.0)
    red = reduced_stationary(n)
    for _ in range(m):
        c, a, b = sample_split_stationary(n, rng, red)
        emp[c * 100 + a * 10 + b] += 1 / m
    assert 0.5 * sum(abs(emp[k] - exact[k]) for k in exact) <= 0.02


def test_star_csv():
    text = write_star_csv(None, 4, [(1.0, 0.5)])
    assert text == "n,t,tv\n4,1,0.5\n"


def test_batches_match_single_draw_laws():
    n = 4
    red = reduced_stationary(n)
    batch = split_stationary_batch(n, 40_000, 3, red)
    assert batch.shape == (40_000, 3)
    assert ((batch[:, 1] <= n // 2) & (batch[:, 2] <= n - n // 2)).all()
    emp = np.bincount(batch[:, 0] * (n + 1) + batch[:, 1] + batch[:, 2], minlength=2 * (n + 1)) / 40_000
    assert tv(emp, red) <= 0.02
    fwd = split_star_batch(n, (1, 2, 0), 0.6, 500, 4)
    assert np.array_equal(fwd, split_star_batch(n, (1, 2, 0), 0.6, 500, 4))
