"""Finite backend: exact states, channels, inversion, divergences."""
import math

import numpy as np
import numpy.testing as nptest
import pytest
from hypothesis import given, strategies as st

from lensgames.errors import (
    DimensionMismatch,
    InvalidChannel,
    InvalidState,
    SupportViolation,
    UnknownFactor,
    UnsupportedOutcome,
)
from lensgames.prob import (
    LOG_ZERO,
    FiniteChannel,
    FiniteDist,
    almost_equal,
    bayes_invert,
    compose_channels,
    dist_from_json,
    dist_to_json,
    channel_from_json,
    channel_to_json,
    dumps_canonical,
    expectation,
    kl,
    log_density,
    marginalize,
    pushforward,
    tensor,
    total_variation,
)

AB = ("a", "b")
UV = ("u", "v")


def dist(*probs, labels=None):
    labels = labels or tuple(f"x{i}" for i in range(len(probs)))
    return FiniteDist(labels, list(probs))


@st.composite
def dists(draw, n=None):
    n = n if n is not None else draw(st.integers(2, 4))
    raw = draw(st.lists(st.floats(1e-3, 1.0), min_size=n, max_size=n))
    arr = np.asarray(raw)
    return FiniteDist(tuple(f"x{i}" for i in range(n)), arr / arr.sum())


@st.composite
def channels(draw, n_in=None, n_out=None):
    n_in = n_in if n_in is not None else draw(st.integers(2, 4))
    n_out = n_out if n_out is not None else draw(st.integers(2, 4))
    rows = []
    for _ in range(n_in):
        raw = draw(st.lists(st.floats(1e-3, 1.0), min_size=n_out, max_size=n_out))
        arr = np.asarray(raw)
        rows.append(arr / arr.sum())
    return FiniteChannel(tuple(f"i{i}" for i in range(n_in)),
                         tuple(f"o{j}" for j in range(n_out)), np.stack(rows))


# -- enumeration oracle, independent of the vectorised implementation ------


def posterior_by_enumeration(prior: FiniteDist, channel: FiniteChannel, y):
    joint = {}
    for x, px in prior.items():
        for yy, pyx in channel.at(x).items():
            joint[(x, yy)] = px * pyx
    mass = sum(p for (x, yy), p in joint.items() if yy == y)
    assert mass > 0
    return {x: joint[(x, y)] / mass for x in prior.support}


# -- construction invariants -------------------------------------------------


def test_dist_rejects_bad_mass():
    with pytest.raises(InvalidState):
        FiniteDist(AB, [0.6, 0.6])
    with pytest.raises(InvalidState):
        FiniteDist(AB, [1.2, -0.2])
    with pytest.raises(InvalidState):
        FiniteDist(("a", "a"), [0.5, 0.5])


def test_channel_rejects_bad_rows():
    with pytest.raises(InvalidChannel):
        FiniteChannel(AB, UV, [[0.9, 0.2], [0.5, 0.5]])
    with pytest.raises(DimensionMismatch):
        FiniteChannel(AB, UV, [[1.0, 0.0]])


# -- pushforward --------------------------------------------------------------


def test_pushforward_hand_example():
    pi = FiniteDist(AB, [0.5, 0.5])
    c = FiniteChannel(AB, UV, [[0.9, 0.1], [0.2, 0.8]])
    nptest.assert_allclose(pushforward(c, pi).probs, [0.55, 0.45], atol=1e-15)


def test_pushforward_identity():
    pi = FiniteDist(AB, [0.3, 0.7])
    assert pushforward(FiniteChannel.identity(AB), pi) == pi


def test_pushforward_space_mismatch():
    pi = FiniteDist(UV, [0.3, 0.7])
    c = FiniteChannel(AB, UV, [[0.9, 0.1], [0.2, 0.8]])
    with pytest.raises(DimensionMismatch):
        pushforward(c, pi)


# -- composition ---------------------------------------------------------------


def test_compose_identity_is_unit():
    c = FiniteChannel(AB, UV, [[0.9, 0.1], [0.2, 0.8]])
    assert compose_channels(c, FiniteChannel.identity(AB)) == c
    assert compose_channels(FiniteChannel.identity(UV), c) == c


def test_compose_matches_matrix_product():
    c = FiniteChannel(AB, UV, [[0.9, 0.1], [0.2, 0.8]])
    d = FiniteChannel(UV, AB, [[0.4, 0.6], [0.7, 0.3]])
    composite = compose_channels(d, c)
    nptest.assert_allclose(composite.matrix, c.matrix @ d.matrix, atol=1e-15)
    nptest.assert_allclose(composite.matrix.sum(axis=1), 1.0, atol=1e-9)


def test_compose_associative_random():
    rng = np.random.default_rng(3)
    for _ in range(25):
        mats = [rng.dirichlet(np.ones(3), size=3) for _ in range(3)]
        sp = tuple("pqr")
        c1, c2, c3 = (FiniteChannel(sp, sp, m) for m in mats)
        left = compose_channels(c3, compose_channels(c2, c1))
        right = compose_channels(compose_channels(c3, c2), c1)
        nptest.assert_allclose(left.matrix, right.matrix, atol=1e-12)


# -- tensor ---------------------------------------------------------------------


def test_tensor_unitor():
    c = FiniteChannel(AB, UV, [[0.9, 0.1], [0.2, 0.8]])
    unit = FiniteChannel.identity(("*",))
    prod = tensor(c, unit)
    nptest.assert_allclose(prod.matrix, c.matrix, atol=1e-15)
    assert prod.domain == (("a", "*"), ("b", "*"))


def test_tensor_is_kronecker():
    c1 = FiniteChannel(AB, UV, [[0.9, 0.1], [0.2, 0.8]])
    c2 = FiniteChannel(UV, AB, [[0.4, 0.6], [0.7, 0.3]])
    nptest.assert_allclose(tensor(c1, c2).matrix,
                           np.kron(c1.matrix, c2.matrix), atol=1e-15)


@given(channels(2, 2), channels(3, 2), dists(2), dists(3))
def test_tensor_functorial(c1, c2, p1, p2):
    p1 = FiniteDist(c1.domain, p1.probs)
    p2 = FiniteDist(c2.domain, p2.probs)
    lhs = pushforward(tensor(c1, c2), tensor(p1, p2))
    rhs = tensor(pushforward(c1, p1), pushforward(c2, p2))
    nptest.assert_allclose(lhs.probs, rhs.probs, atol=1e-12)


# -- Bayesian inversion -----------------------------------------------------------


def test_invert_hand_example():
    pi = FiniteDist(AB, [0.5, 0.5])
    c = FiniteChannel(AB, UV, [[0.9, 0.1], [0.2, 0.8]])
    fam = bayes_invert(c, pi)
    nptest.assert_allclose(fam.at("u").probs, [9 / 11, 2 / 11], atol=1e-15)
    oracle = posterior_by_enumeration(pi, c, "u")
    nptest.assert_allclose(fam.at("u").probs,
                           [oracle["a"], oracle["b"]], atol=1e-15)


def test_invert_identity_gives_point_mass():
    pi = FiniteDist(AB, [0.3, 0.7])
    fam = bayes_invert(FiniteChannel.identity(AB), pi)
    assert fam.at("a") == FiniteDist.point(AB, "a")


def test_invert_zero_mass_conditioning_errors():
    pi = FiniteDist(AB, [1.0, 0.0])
    c = FiniteChannel(AB, UV, [[1.0, 0.0], [0.0, 1.0]])
    fam = bayes_invert(c, pi)
    with pytest.raises(UnsupportedOutcome):
        fam.at("v")
    # packing into a channel falls back to the prior on the dead row
    assert fam.as_channel().at("v") == pi


@given(dists(3), channels(3, 3))
def test_bayes_consistency(pi, c):
    """Posterior rows are normalised and joint = posterior * marginal."""
    pi = FiniteDist(c.domain, pi.probs)
    fam = bayes_invert(c, pi)
    marg = pushforward(c, pi)
    for j, y in enumerate(c.codomain):
        if marg.probs[j] <= 1e-12:
            continue
        post = fam.at(y)
        assert abs(post.probs.sum() - 1.0) < 1e-12
        for i, x in enumerate(c.domain):
            joint = pi.probs[i] * c.matrix[i, j]
            nptest.assert_allclose(joint, post.probs[i] * marg.probs[j],
                                   atol=1e-12)


# -- log density -------------------------------------------------------------------


def test_log_density_table_lookup():
    c = FiniteChannel(AB, UV, [[0.9, 0.1], [0.2, 0.8]])
    assert log_density(c, "v", "a") == pytest.approx(math.log(0.1))


def test_log_density_deterministic_match_is_zero():
    c = FiniteChannel.deterministic(AB, UV, {"a": "u", "b": "v"}.get)
    assert log_density(c, "u", "a") == 0.0


def test_log_density_zero_mass_sentinel_poisons_sums():
    c = FiniteChannel.deterministic(AB, UV, {"a": "u", "b": "v"}.get)
    val = log_density(c, "v", "a")
    assert val == LOG_ZERO
    assert val + 123.0 == LOG_ZERO  # deterministic propagation


# -- KL ------------------------------------------------------------------------------


def test_kl_identical_is_zero():
    pi = FiniteDist(AB, [0.25, 0.75])
    assert kl(pi, pi) == pytest.approx(0.0, abs=1e-12)


def test_kl_hand_value():
    assert kl(FiniteDist(AB, [1.0, 0.0]),
              FiniteDist(AB, [0.5, 0.5])) == pytest.approx(math.log(2))


def test_kl_support_violation():
    with pytest.raises(SupportViolation):
        kl(FiniteDist(AB, [0.5, 0.5]), FiniteDist(AB, [1.0, 0.0]))


@given(dists(4), dists(4))
def test_kl_nonnegative(p, q):
    assert kl(p, q) >= -1e-12


# -- expectation ---------------------------------------------------------------------


def test_expectation_constant():
    assert expectation(FiniteDist(AB, [0.3, 0.7]), lambda x: 2.5) == 2.5


def test_expectation_weighted_sum():
    pi = FiniteDist(AB, [0.25, 0.75])
    assert expectation(pi, {"a": 0.0, "b": 4.0}.get) == pytest.approx(3.0)


# -- marginalisation -----------------------------------------------------------------


def test_marginalize_projects_product():
    p1 = FiniteDist(AB, [0.3, 0.7])
    p2 = FiniteDist(UV, [0.6, 0.4])
    joint = tensor(p1, p2)
    assert marginalize(joint, 0).allclose(p1, tol=1e-15)
    assert marginalize(joint, 1).allclose(p2, tol=1e-15)


def test_marginalize_hand_row_sums():
    labels = (("a", "u"), ("a", "v"), ("b", "u"), ("b", "v"))
    joint = FiniteDist(labels, [0.1, 0.2, 0.3, 0.4])
    nptest.assert_allclose(marginalize(joint, 0).probs, [0.3, 0.7], atol=1e-15)


def test_marginalize_unknown_factor():
    with pytest.raises(UnknownFactor):
        marginalize(FiniteDist(AB, [0.5, 0.5]), 0)
    joint = tensor(FiniteDist(AB, [0.5, 0.5]), FiniteDist(UV, [0.5, 0.5]))
    with pytest.raises(UnknownFactor):
        marginalize(joint, 2)


@given(dists(2), dists(3))
def test_marginalize_tensor_roundtrip(p1, p2):
    joint = tensor(p1, p2)
    nptest.assert_allclose(marginalize(joint, 0).probs, p1.probs, atol=1e-12)
    nptest.assert_allclose(marginalize(joint, 1).probs, p2.probs, atol=1e-12)


# -- almost equality ------------------------------------------------------------------


def test_almost_equal_reflexive():
    pi = FiniteDist(AB, [0.5, 0.5])
    c = FiniteChannel(AB, UV, [[0.9, 0.1], [0.2, 0.8]])
    fam = bayes_invert(c, pi)
    assert almost_equal(fam, fam.as_channel(), pushforward(c, pi), 1e-12)


def test_almost_equal_ignores_null_outcomes():
    ref = FiniteDist(UV, [1.0, 0.0])
    f1 = FiniteChannel(UV, AB, [[0.5, 0.5], [1.0, 0.0]])
    f2 = FiniteChannel(UV, AB, [[0.5, 0.5], [0.0, 1.0]])  # differ at dead v
    assert almost_equal(f1, f2, ref, 1e-12)


def test_almost_equal_threshold():
    tol = 1e-3
    ref = FiniteDist(UV, [0.5, 0.5])
    f1 = FiniteChannel(UV, AB, [[0.5, 0.5], [0.5, 0.5]])
    f2 = FiniteChannel(UV, AB, [[0.5 + 2 * tol, 0.5 - 2 * tol], [0.5, 0.5]])
    assert not almost_equal(f1, f2, ref, tol)
    assert almost_equal(f1, f2, ref, 2.1 * tol)


# -- row-stochastic closure property ---------------------------------------------------


@given(channels(), channels(3, 3))
def test_rows_stay_stochastic(c1, c2):
    d = FiniteChannel(c1.codomain, c2.domain,
                      np.full((len(c1.codomain), len(c2.domain)),
                              1.0 / len(c2.domain)))
    composed = compose_channels(c2, compose_channels(d, c1))
    nptest.assert_allclose(composed.matrix.sum(axis=1), 1.0, atol=1e-9)
    prod = tensor(c1, c2)
    nptest.assert_allclose(prod.matrix.sum(axis=1), 1.0, atol=1e-9)


# -- serialisation ----------------------------------------------------------------------


def test_dist_json_roundtrip_bitexact():
    pi = FiniteDist(AB, [1 / 3, 2 / 3])
    text = dumps_canonical(dist_to_json(pi))
    back = dist_from_json(__import__("json").loads(text))
    assert back == pi  # exact float equality


def test_channel_json_roundtrip_bitexact():
    rng = np.random.default_rng(11)
    c = FiniteChannel(AB, UV, rng.dirichlet(np.ones(2), size=2))
    text = dumps_canonical(channel_to_json(c))
    assert channel_from_json(__import__("json").loads(text)) == c


def test_tuple_labels_roundtrip():
    joint = tensor(FiniteDist(AB, [0.5, 0.5]), FiniteDist(UV, [0.25, 0.75]))
    text = dumps_canonical(dist_to_json(joint))
    assert dist_from_json(__import__("json").loads(text)) == joint


def test_canonical_json_deterministic():
    pi = FiniteDist(AB, [0.1, 0.9])
    assert dumps_canonical(dist_to_json(pi)) == dumps_canonical(dist_to_json(pi))
