import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from votermix.chain_core import (
    RateKernel,
    build_complete,
    build_cycle,
    build_from_file,
    build_star,
    format_chain_spec,
    multiply_rates,
    parse_chain_spec,
    random_irreducible_kernel,
    relabel,
    stationary_distribution,
)
from votermix.errors import ChainSpecError, InvalidSizeError, ReducibleKernelError


def test_cycle_rates():
    k = build_cycle(4)
    assert k.rate(0, 1) == k.rate(0, 3) == 0.5
    assert all(k.exit_rate(x) == 1.0 for x in range(4))
    assert k.q_max == 1.0
    k3 = build_cycle(3)
    assert all(len(edges) == 2 and all(r == 0.5 for _, r in edges) for edges in k3.out_edges())


def test_cycle_too_small():
    with pytest.raises(InvalidSizeError):
        build_cycle(2)


def test_star_rates():
    k = build_star(4)
    assert k.n_sites == 5
    for leaf in range(1, 5):
        assert k.rate(0, leaf) == 0.25
        assert k.rate(leaf, 0) == 1.0
    assert k.q_max == 1.0
    path = build_star(2)
    assert path.n_sites == 3 and path.rate(1, 2) == 0.0
    with pytest.raises(InvalidSizeError):
        build_star(1)


def test_multiply_rates_scales_everything():
    k = multiply_rates(build_star(6), 2.5)
    assert k.rate(0, 3) == pytest.approx(2.5 / 6)
    assert k.q_max == pytest.approx(2.5)


def test_complete():
    k = build_complete(3)
    assert all(k.rate(x, y) == 0.5 for x in range(3) for y in range(3) if x != y)


def test_file_format(tmp_path):
    path = tmp_path / "k.txt"
    path.write_text("# two sites\nsites 2\nrate 0 1 2.0  # one arrow\n")
    k = build_from_file(path)
    assert dict(k.rates) == {(0, 1): 2.0}
    assert k.q_max == 2.0
    assert parse_chain_spec(format_chain_spec(k)) == k


@pytest.mark.parametrize(
    "text, line",
    [
        ("sites 2\nrate 0 5 1.0\n", 2),
        ("sites 2\nrate 0 1 -1\n", 2),
        ("sites 2\nrate 0 1 1\nrate 0 1 2\n", 3),
        ("sites 2\nbogus 1\n", 2),
        ("rate 0 1 1\n", 1),
    ],
)
def test_file_errors_carry_line_numbers(text, line):
    with pytest.raises(ChainSpecError, match=f"line {line}"):
        parse_chain_spec(text)


def test_missing_sites_line():
    with pytest.raises(ChainSpecError):
        parse_chain_spec("# nothing\n")


def test_kernel_rejects_bad_rates():
    with pytest.raises(ValueError):
        RateKernel(2, {(0, 0): 1.0})
    with pytest.raises(ValueError):
        RateKernel(2, {(0, 1): -1.0})
    with pytest.raises(ValueError):
        RateKernel(2, {(0, 1): math.inf})


def test_stationary_examples():
    info = stationary_distribution(build_cycle(5))
    assert np.allclose(info.pi, 0.2, atol=1e-12) and info.rho == pytest.approx(1.0)
    info = stationary_distribution(build_star(4))
    assert info.pi[0] == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(info.pi[1:], 0.125, atol=1e-12)
    assert info.rho == pytest.approx(4.0)


def test_reducible_kernel_needs_pi():
    k = RateKernel(4, {(0, 1): 1.0, (1, 0): 1.0, (2, 3): 1.0, (3, 2): 1.0})
    with pytest.raises(ReducibleKernelError):
        stationary_distribution(k)
    info = stationary_distribution(k, pi=[0.25, 0.25, 0.25, 0.25])
    assert info.rho == 1.0
    with pytest.raises(ValueError):
        stationary_distribution(k, pi=[0.5, 0.0, 0.5, 0.0])


def test_large_cycle_residual():
    info = stationary_distribution(build_cycle(2000))
    assert info.residual <= 1e-10


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
def test_exit_rates_match_stored_rates(n, seed):
    k = random_irreducible_kernel(n, seed)
    for x in range(n):
        total = sum(r for (a, _), r in k.rates.items() if a == x)
        assert abs(k.exit_rate(x) - total) <= 1e-12
        assert k.q_max >= k.exit_rate(x)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 10), seed=st.integers(0, 2**32 - 1), data=st.data())
def test_stationary_is_permutation_equivariant(n, seed, data):
    k = random_irreducible_kernel(n, seed)
    perm = data.draw(st.permutations(range(n)))
    info = stationary_distribution(k)
    moved = stationary_distribution(relabel(k, perm))
    assert info.residual <= 1e-10
    assert np.allclose(moved.pi[list(perm)], info.pi, atol=1e-12)
    assert info.rho >= 1.0
