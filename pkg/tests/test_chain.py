from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffstlab.chain import (
    ChainSpec,
    DisorderModel,
    build_coupling_matrix,
    make_uniform_spec,
    sample_disorder,
)
from ffstlab.errors import InvalidArgument

finite = st.floats(min_value=-5, max_value=5, allow_nan=False)
positive = st.floats(min_value=1e-3, max_value=5)


@st.composite
def chain_specs(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    return ChainSpec(
        n_chain=n,
        kappa=draw(st.lists(positive, min_size=n - 1, max_size=n - 1)),
        onsite=draw(st.lists(finite, min_size=n, max_size=n)),
        g_left=draw(positive),
        g_right=draw(positive),
        delta=draw(finite),
    )


def test_uniform_matrix_layout():
    K = build_coupling_matrix(make_uniform_spec(3, 2.0, 0.1, delta=0.5))
    expected = np.array(
        [
            [0.5, 0.1, 0, 0, 0],
            [0.1, 0, 2, 0, 0],
            [0, 2, 0, 2, 0],
            [0, 0, 2, 0, 0.1],
            [0, 0, 0, 0.1, 0.5],
        ]
    )
    assert np.array_equal(K, expected)
    assert not K.flags.writeable


@given(chain_specs())
def test_matrix_symmetric_and_tridiagonal(spec):
    K = build_coupling_matrix(spec)
    assert K.shape == (spec.n_chain + 2,) * 2
    assert np.array_equal(K, K.T)
    assert np.array_equal(K, np.triu(np.tril(K, 1), -1))


@given(chain_specs())
def test_serialization_round_trips(spec):
    assert ChainSpec.from_dict(spec.to_dict()) == spec
    assert ChainSpec.from_json(spec.to_json()) == spec
    assert ChainSpec.from_keyvalue(spec.to_keyvalue()) == spec


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_chain=0, kappa=(), onsite=(), g_left=1, g_right=1),
        dict(n_chain=3, kappa=(1.0,), onsite=(0, 0, 0), g_left=1, g_right=1),
        dict(n_chain=3, kappa=(1.0, 1.0), onsite=(0, 0), g_left=1, g_right=1),
        dict(n_chain=3, kappa=(1.0, -1.0), onsite=(0, 0, 0), g_left=1, g_right=1),
        dict(n_chain=2, kappa=(1.0,), onsite=(0, 0), g_left=float("nan"), g_right=1),
        dict(n_chain=2, kappa=(1.0,), onsite=(0, 0), g_left=1, g_right=-0.1),
    ],
)
def test_invalid_specs_rejected(kwargs):
    with pytest.raises(InvalidArgument):
        ChainSpec(**kwargs)


def test_keyvalue_errors_name_the_line():
    with pytest.raises(InvalidArgument, match="line 2"):
        ChainSpec.from_keyvalue("n_chain = 2\nkappa = one\n")


def test_disorder_model_validation():
    with pytest.raises(InvalidArgument):
        DisorderModel(strength=1.0)
    with pytest.raises(InvalidArgument):
        DisorderModel(seed=2**64)
    with pytest.raises(InvalidArgument):
        DisorderModel(kind="magnetic")
    DisorderModel(distribution="gaussian-relative", strength=2.0)


def test_zero_strength_is_identity():
    base = make_uniform_spec(5, 1.0, 0.01)
    assert sample_disorder(base, DisorderModel(strength=0.0, seed=3), 7) is base


@given(st.integers(0, 2**64 - 1), st.integers(0, 10_000))
@settings(max_examples=25)
def test_realizations_are_independent_of_history(seed, index):
    base = make_uniform_spec(6, 1.0, 0.01)
    model = DisorderModel(kind="both", strength=0.3, seed=seed)
    direct = sample_disorder(base, model, index)
    for i in range(3):
        sample_disorder(base, model, i)
    assert sample_disorder(base, model, index) == direct


def test_coupling_disorder_range_and_ends_untouched():
    base = make_uniform_spec(9, 2.0, 0.05, delta=0.1)
    model = DisorderModel(kind="coupling", strength=0.3, seed=11)
    kappas = np.array([sample_disorder(base, model, i).kappa for i in range(200)])
    assert np.all(kappas >= 2.0 * 0.7) and np.all(kappas <= 2.0 * 1.3)
    assert abs(kappas.mean() / 2.0 - 1.0) < 0.02
    spec = sample_disorder(base, model, 0)
    assert (spec.g_left, spec.g_right, spec.delta, spec.onsite) == (0.05, 0.05, 0.1, base.onsite)


def test_onsite_disorder_scales_with_mean_coupling():
    base = make_uniform_spec(8, 2.0, 0.05)
    model = DisorderModel(kind="onsite", strength=0.25, seed=4)
    fields = np.array([sample_disorder(base, model, i).onsite for i in range(200)])
    assert np.max(np.abs(fields)) <= 0.25 * 2.0
    assert np.max(np.abs(fields)) > 0.45
    assert sample_disorder(base, model, 0).kappa == base.kappa


def test_distinct_seeds_and_indices_differ():
    base = make_uniform_spec(8, 1.0, 0.05)
    a = sample_disorder(base, DisorderModel(strength=0.3, seed=1), 0)
    b = sample_disorder(base, DisorderModel(strength=0.3, seed=2), 0)
    c = sample_disorder(base, DisorderModel(strength=0.3, seed=1), 1)
    assert a.kappa != b.kappa and a.kappa != c.kappa


def test_uniform_spec_examples():
    spec = make_uniform_spec(7, 1.0, 0.01)
    assert spec.kappa == (1.0,) * 6 and spec.onsite == (0.0,) * 7
    single = make_uniform_spec(1, 1.0, 0.1)
    assert single.kappa == () and single.onsite == (0.0,)
    K = build_coupling_matrix(ChainSpec(4, (1.0,) * 3, (0.0,) * 4, 0.01, 0.02))
    assert (K[0, 1], K[4, 5]) == (0.01, 0.02)
