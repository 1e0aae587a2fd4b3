"""Lens laws, exactness, and the randomized composition-law verifier."""
import json

import numpy as np
import numpy.testing as nptest
import pytest

from lensgames.lens import (
    BayesLens,
    OpticalBayesReport,
    StateDependentChannel,
    compose_lens,
    exact_lens_of,
    identity_lens,
    is_exact,
    random_channel,
    random_full_support_dist,
    tensor_lens,
    verify_optical_bayes,
)
from lensgames.prob import (
    FiniteChannel,
    FiniteDist,
    GaussianChannel,
    GaussianState,
    bayes_invert,
    compose_channels,
    pushforward,
    tensor,
    total_variation,
    worst_deviation,
)

AB = ("a", "b")
UV = ("u", "v")


def random_lens(rng, n_in=3, n_out=3):
    return exact_lens_of(random_channel(rng, tuple(f"x{i}" for i in range(n_in)),
                                        tuple(f"y{i}" for i in range(n_out))))


# -- identity ----------------------------------------------------------------


def test_identity_lens_unit_law():
    rng = np.random.default_rng(0)
    lens = random_lens(rng)
    ident_dom = identity_lens(("x0", "x1", "x2"))
    ident_cod = identity_lens(("y0", "y1", "y2"))
    left = compose_lens(lens, ident_dom)
    right = compose_lens(ident_cod, lens)
    for _ in range(10):
        pi = random_full_support_dist(rng, ("x0", "x1", "x2"))
        ref = pushforward(lens.forward, pi)
        for other in (left, right):
            assert other.forward == lens.forward
            assert worst_deviation(other.backward(pi), lens.backward(pi),
                                   ref) <= 1e-12


def test_identity_backward_is_identity_everywhere():
    ident = identity_lens(AB)
    for probs in ([0.5, 0.5], [0.9, 0.1]):
        assert ident.backward(FiniteDist(AB, probs)) == FiniteChannel.identity(AB)


def test_identity_forward_preserves_states():
    pi = FiniteDist(AB, [0.3, 0.7])
    assert pushforward(identity_lens(AB).forward, pi) == pi


# -- composite backward vs direct inversion ----------------------------------


def test_composite_backward_matches_enumerated_inverse():
    pi = FiniteDist(AB, [0.5, 0.5])
    c = FiniteChannel(AB, UV, [[0.9, 0.1], [0.2, 0.8]])
    d = FiniteChannel(UV, AB, [[0.4, 0.6], [0.7, 0.3]])
    composite = compose_lens(exact_lens_of(d), exact_lens_of(c))
    claimed = composite.backward(pi)
    truth = bayes_invert(compose_channels(d, c), pi)
    ref = pushforward(compose_channels(d, c), pi)
    assert worst_deviation(claimed, truth, ref) <= 1e-12


def test_compose_associative_pointwise():
    rng = np.random.default_rng(7)
    f = random_lens(rng, 3, 3)
    g = exact_lens_of(random_channel(rng, ("y0", "y1", "y2"), ("z0", "z1", "z2")))
    h = exact_lens_of(random_channel(rng, ("z0", "z1", "z2"), ("w0", "w1", "w2")))
    left = compose_lens(h, compose_lens(g, f))
    right = compose_lens(compose_lens(h, g), f)
    for _ in range(10):
        pi = random_full_support_dist(rng, ("x0", "x1", "x2"))
        ref = pushforward(left.forward, pi)
        assert worst_deviation(left.backward(pi), right.backward(pi), ref) <= 1e-12


# -- tensor -------------------------------------------------------------------


def test_tensor_with_identity_at_product_prior():
    rng = np.random.default_rng(1)
    f = exact_lens_of(random_channel(rng, AB, UV))
    prod = tensor_lens(f, identity_lens(("c",)))
    p1 = FiniteDist(AB, [0.4, 0.6])
    joint = tensor(p1, FiniteDist(("c",), [1.0]))
    expected = tensor(f.backward(p1), FiniteChannel.identity(("c",)))
    assert prod.backward(joint) == expected


def test_tensor_of_exact_is_kronecker_of_posteriors():
    rng = np.random.default_rng(2)
    c1 = random_channel(rng, AB, UV)
    c2 = random_channel(rng, ("c", "d"), ("w", "t"))
    p1 = FiniteDist(AB, [0.3, 0.7])
    p2 = FiniteDist(("c", "d"), [0.6, 0.4])
    joint = tensor(p1, p2)
    got = tensor_lens(exact_lens_of(c1), exact_lens_of(c2)).backward(joint)
    want = tensor(bayes_invert(c1, p1).as_channel(),
                  bayes_invert(c2, p2).as_channel())
    nptest.assert_allclose(got.matrix, want.matrix, atol=1e-12)


def test_interchange_of_tensor_and_compose():
    rng = np.random.default_rng(3)
    c1 = random_channel(rng, AB, UV)
    d1 = random_channel(rng, UV, ("m", "n"))
    c2 = random_channel(rng, ("c", "e"), ("w", "t"))
    d2 = random_channel(rng, ("w", "t"), ("r", "s"))
    p = tensor(FiniteDist(AB, [0.45, 0.55]), FiniteDist(("c", "e"), [0.2, 0.8]))
    seq_then_par = tensor_lens(
        compose_lens(exact_lens_of(d1), exact_lens_of(c1)),
        compose_lens(exact_lens_of(d2), exact_lens_of(c2)),
    )
    par_then_seq = compose_lens(
        tensor_lens(exact_lens_of(d1), exact_lens_of(d2)),
        tensor_lens(exact_lens_of(c1), exact_lens_of(c2)),
    )
    ref = pushforward(seq_then_par.forward, p)
    assert worst_deviation(seq_then_par.backward(p),
                           par_then_seq.backward(p), ref) <= 1e-12


def test_tensor_of_exact_lenses_is_exact_at_product_priors():
    """Mean-field factorisation: products of exact lenses stay exact on
    product priors."""
    rng = np.random.default_rng(4)
    c1 = random_channel(rng, AB, UV)
    c2 = random_channel(rng, ("c", "d"), ("w", "t"))
    prod = tensor_lens(exact_lens_of(c1), exact_lens_of(c2))
    priors = [
        tensor(random_full_support_dist(rng, AB),
               random_full_support_dist(rng, ("c", "d")))
        for _ in range(5)
    ]
    assert is_exact(prod, priors, tol=1e-9)


# -- exactness ------------------------------------------------------------------


def test_exact_lens_is_exact():
    rng = np.random.default_rng(5)
    lens = random_lens(rng)
    priors = [random_full_support_dist(rng, ("x0", "x1", "x2")) for _ in range(5)]
    assert is_exact(lens, priors)


def test_uniform_backward_is_approximate():
    c = FiniteChannel(AB, UV, [[0.9, 0.1], [0.2, 0.8]])
    lazy = BayesLens(c, StateDependentChannel.constant(
        FiniteChannel(UV, AB, [[0.5, 0.5], [0.5, 0.5]])))
    assert not is_exact(lazy, [FiniteDist(AB, [0.5, 0.5])])


def test_exactness_vacuous_on_empty_priors():
    c = FiniteChannel(AB, UV, [[0.9, 0.1], [0.2, 0.8]])
    lazy = BayesLens(c, StateDependentChannel.constant(
        FiniteChannel(UV, AB, [[0.5, 0.5], [0.5, 0.5]])))
    assert is_exact(lazy, [])


def test_exactness_closed_under_composition():
    rng = np.random.default_rng(6)
    f = random_lens(rng, 3, 3)
    g = exact_lens_of(random_channel(rng, ("y0", "y1", "y2"), ("z0", "z1")))
    composite = compose_lens(g, f)
    priors = [random_full_support_dist(rng, ("x0", "x1", "x2")) for _ in range(5)]
    assert is_exact(composite, priors, tol=1e-9)


def test_gaussian_exact_lens_matches_invert():
    pi = GaussianState([0.0], [[1.0]])
    c = GaussianChannel([[1.0]], [0.0], [[1.0]])
    lens = exact_lens_of(c)
    assert lens.backward(pi) == bayes_invert(c, pi)
    assert is_exact(lens, [pi, GaussianState([2.0], [[0.5]])])


# -- randomized verifier -----------------------------------------------------------


def test_verify_small_campaign_all_pass():
    report = verify_optical_bayes(trials=1000, max_dim=5, seed=42)
    assert report.passes == 1000
    assert report.worst_tv <= 1e-9
    assert report.all_passed


def test_verify_deterministic_across_worker_counts():
    one = verify_optical_bayes(trials=200, max_dim=5, seed=9, workers=1)
    four = verify_optical_bayes(trials=200, max_dim=5, seed=9, workers=4)
    assert one.dumps() == four.dumps()


def test_verify_permutation_channels_deviation_zero():
    """Deterministic permutation channels invert exactly."""
    pi = FiniteDist(("x0", "x1"), [0.4, 0.6])
    c = FiniteChannel.deterministic(("x0", "x1"), ("y0", "y1"),
                                    {"x0": "y1", "x1": "y0"}.get)
    d = FiniteChannel.deterministic(("y0", "y1"), ("z0", "z1"),
                                    {"y0": "z0", "y1": "z1"}.get)
    composite = compose_lens(exact_lens_of(d), exact_lens_of(c))
    truth = bayes_invert(compose_channels(d, c), pi)
    ref = pushforward(compose_channels(d, c), pi)
    assert worst_deviation(composite.backward(pi), truth, ref) == 0.0


def test_verify_corruption_hook_reports_witness():
    def swap(channel):
        m = np.array(channel.matrix)
        m[0, 0], m[0, 1] = m[0, 1], m[0, 0]
        return FiniteChannel(channel.domain, channel.codomain, m)

    report = verify_optical_bayes(trials=20, max_dim=4, seed=1, corrupt=swap)
    assert report.passes < 20
    assert report.failures
    witness = report.failures[0]
    assert {"trial", "prior", "first", "second", "worst_tv"} <= set(witness)
    json.loads(report.dumps())  # serialisable report


def test_verify_validates_arguments():
    with pytest.raises(Exception):
        verify_optical_bayes(trials=0)
    with pytest.raises(Exception):
        verify_optical_bayes(trials=10, max_dim=12)
