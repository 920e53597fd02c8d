import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from votermix.chain_core import RateKernel, build_cycle, random_irreducible_kernel
from votermix.errors import CapacityError
from votermix.exact_dist import (
    all_configs,
    build_config_generator,
    config_to_index,
    d_profile,
    dgm_limit,
    evolve,
    flip_rates,
    hypercube_tv_exact,
    index_to_config,
    point_mass,
    stationary_of,
    stationary_residual,
    t_mix_exact,
    tv,
    write_distribution_csv,
    write_profile_csv,
)

MIXED3 = RateKernel(3, {(0, 1): 1.3, (0, 2): 0.2, (1, 2): 0.7, (2, 0): 2.1, (1, 0): 0.4})


def test_state_encoding_round_trip():
    for s in range(32):
        assert config_to_index(index_to_config(s, 5)) == s
    assert config_to_index([1, 0, 1]) == 5
    assert (all_configs(3)[6] == [0, 1, 1]).all()


def test_generator_rows_sum_to_zero():
    G = build_config_generator(MIXED3).matrix.toarray()
    assert np.abs(G.sum(axis=1)).max() <= 1e-12
    off = G - np.diag(np.diag(G))
    assert (off >= 0).all()


def test_single_site_generator():
    G = build_config_generator(RateKernel(1, {})).matrix.toarray()
    assert np.allclose(G, [[-0.5, 0.5], [0.5, -0.5]])


def test_two_site_flip_rates():
    k = RateKernel(2, {(0, 1): 1.0, (1, 0): 1.0})
    # configuration "01": site 0 holds 0, site 1 holds 1
    rates = flip_rates(k, np.array([[0, 1]]))
    assert np.allclose(rates, [[1.5, 1.5]])


def test_all_equal_configs_flip_at_one_half():
    k = random_irreducible_kernel(5, 3)
    rates = flip_rates(k, np.array([[0] * 5, [1] * 5]))
    assert np.allclose(rates, 0.5)


def test_capacity_guard():
    with pytest.raises(CapacityError):
        build_config_generator(build_cycle(21))


def test_evolve_examples():
    gen = build_config_generator(RateKernel(1, {}))
    p0 = point_mass(2, 1)
    assert np.array_equal(evolve(gen, p0, 0.0), p0)
    assert evolve(gen, p0, 1.0)[1] == pytest.approx((1 + math.exp(-1)) / 2, abs=1e-12)
    with pytest.raises(ValueError):
        evolve(gen, p0, -1.0)


def test_long_time_reaches_stationarity():
    gen = build_config_generator(MIXED3)
    mu = stationary_of(gen)
    assert stationary_residual(gen, mu) <= 1e-10
    for s in range(8):
        assert tv(evolve(gen, point_mass(8, s), 50.0), mu) <= 1e-9


def test_stationary_examples():
    gen = build_config_generator(RateKernel(3, {}))
    assert np.allclose(stationary_of(gen), 1 / 8, atol=1e-12)
    assert np.allclose(stationary_of(build_config_generator(RateKernel(1, {}))), 0.5)
    sym = build_config_generator(RateKernel(2, {(0, 1): 0.7, (1, 0): 1.9}))
    mu = stationary_of(sym)
    assert np.allclose(mu, mu[::-1], atol=1e-12)


def test_tv_examples():
    assert tv([0.2, 0.8], [0.2, 0.8]) == 0.0
    assert tv([1, 0], [0, 1]) == 1.0
    assert tv([0.7, 0.3], [0.5, 0.5]) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        tv([1.0], [0.5, 0.5])


def test_d_profile_examples():
    prof = d_profile(RateKernel(3, {}), [0.0, 0.5, 1.0, 2.0])
    assert prof[0][1] == pytest.approx(1 - 2**-3)
    for t, d, dbar in prof:
        assert dbar >= d - 1e-12
    ds = [d for _, d, _ in d_profile(MIXED3, np.linspace(0, 4, 17))]
    assert all(b <= a + 1e-10 for a, b in zip(ds, ds[1:]))


def test_t_mix_single_site():
    assert t_mix_exact(RateKernel(1, {}), 0.25) == pytest.approx(math.log(2), abs=1e-4)


def test_profile_capacity():
    with pytest.raises(CapacityError):
        d_profile(build_cycle(13), [1.0])


def test_hypercube_examples():
    assert hypercube_tv_exact(10, 0.0) == pytest.approx(1.0)
    for t in (0.1, 0.7, 3.0):
        assert hypercube_tv_exact(1, t) == pytest.approx(math.exp(-t), abs=1e-12)
    vals = [hypercube_tv_exact(50, t) for t in np.linspace(0, 10, 41)]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-2


def test_hypercube_is_antipodal_maximum():
    # with q = 0 the worst pair over all 2^n x 2^n starts is the antipodal one
    for n in (1, 2, 3, 4):
        gen = build_config_generator(RateKernel(n, {}))
        for t in (0.1, 0.5, 2.0):
            laws = evolve(gen, np.eye(gen.n_states), t)
            worst = max(tv(a, b) for a in laws for b in laws)
            assert worst == pytest.approx(hypercube_tv_exact(n, t), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 200), t=st.floats(0.01, 10))
def test_hypercube_monotone_in_n(n, t):
    assert hypercube_tv_exact(n + 1, t) >= hypercube_tv_exact(n, t) - 1e-12


def test_dgm_limit():
    assert dgm_limit(0.0) == pytest.approx(math.erf(1 / math.sqrt(8)) * 2, abs=1e-10)
    assert dgm_limit(50.0) < 1e-20
    assert abs(hypercube_tv_exact(10**4, 0.5 * math.log(10**4) + 2) - dgm_limit(2)) <= 0.02


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 5), seed=st.integers(0, 2**32 - 1), t=st.floats(0.0, 5.0))
def test_mass_conservation(n, seed, t):
    gen = build_config_generator(random_irreducible_kernel(n, seed))
    rng = np.random.default_rng(seed)
    p0 = rng.dirichlet(np.ones(gen.n_states))
    out = evolve(gen, p0, t)
    assert abs(out.sum() - 1) <= 1e-12 and (out >= 0).all()


def test_csv_exports(tmp_path):
    text = write_distribution_csv(tmp_path / "d.csv", [0.25, 0.75])
    assert text == "state_index,probability\n0,0.25\n1,0.75\n"
    text = write_profile_csv(None, [(1.0, 0.5, 0.6)])
    assert text.splitlines()[0] == "t,d,dbar"
