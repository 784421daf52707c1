import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jamnet.exceptions import DegenerateDistanceError
from jamnet.geometry import rectangle_scenario
from jamnet.sir import (
    ActiveJammer, RadioParams, eavesdropper_sir, receiver_sir, sir_at_eavesdropper,
    sir_at_receiver, validate_placement,
)

P1 = RadioParams(p_tx=1, p_rx=1, delta_s=1, delta_e=1, gamma=4)
GEOM = rectangle_scenario(20, 20, 10, 10)  # storage [5,15]^2, fence [0,20]^2


def test_receiver_examples():
    assert sir_at_receiver([], (0, 0), P1) == math.inf
    assert sir_at_receiver([ActiveJammer((2, 0), 1)], (0, 0), P1) == pytest.approx(16)
    two = [ActiveJammer((2, 0), 1), ActiveJammer((0, 2), 1)]
    assert sir_at_receiver(two, (0, 0), P1) == pytest.approx(8)


def test_receiver_degenerate_distance():
    with pytest.raises(DegenerateDistanceError):
        sir_at_receiver([ActiveJammer((0, 0), 1)], (0, 0), P1)


def test_eavesdropper_examples():
    params = RadioParams(p_tx=16, gamma=4)
    p_e = (3, 10)  # 2 units left of the storage edge x=5
    assert sir_at_eavesdropper([], p_e, GEOM, params) == math.inf
    jam = [ActiveJammer((4, 10), 1)]
    assert sir_at_eavesdropper(jam, p_e, GEOM, params) == pytest.approx(1.0)
    doubled = [ActiveJammer((4, 10), 2)]
    assert sir_at_eavesdropper(doubled, p_e, GEOM, params) == pytest.approx(0.5)


def test_eavesdropper_on_storage_boundary_is_degenerate():
    with pytest.raises(DegenerateDistanceError):
        sir_at_eavesdropper([ActiveJammer((0, 0), 1)], (5, 10), GEOM, P1)


def test_channels_are_orthogonal():
    jam = [ActiveJammer((2, 0), 1, channel=2)]
    assert sir_at_receiver(jam, (0, 0), P1, channel=1) == math.inf
    assert sir_at_receiver(jam, (0, 0), P1, channel=2) == pytest.approx(16)


def test_gamma_warning_and_bad_values():
    with pytest.warns(UserWarning):
        RadioParams(gamma=7)
    with pytest.raises(ValueError):
        RadioParams(delta_s=0)
    with pytest.raises(ValueError):
        ActiveJammer((0, 0), 0.0)


def test_validate_empty_set():
    rep = validate_placement([], GEOM, P1, 1.0)
    ch = rep.channels[1]
    assert ch.receiver_valid and not ch.eaves_valid
    assert ch.max_eaves_sir == math.inf
    assert rep.to_dict()["1"]["valid"] is False


def test_validate_huge_jammer_next_to_fence_sample():
    jam = [ActiveJammer((0.5, 10), 1e9)]
    rep = validate_placement(jam, GEOM, P1, 1.0)
    f = GEOM.fence_samples(1.0)
    sir = eavesdropper_sir(jam, f, GEOM, P1)
    idx = int(np.argmin(np.hypot(*(f - (0.5, 10)).T)))
    assert sir[idx] < P1.delta_e
    assert not rep.receiver_valid


def test_validate_matches_bruteforce_loop():
    rng = np.random.default_rng(3)
    jams = [ActiveJammer(tuple(p), float(w)) for p, w in
            zip(rng.uniform(1, 4, size=(5, 2)), rng.uniform(0.5, 3, 5))]
    rep = validate_placement(jams, GEOM, P1, 1.0)
    brute = min(
        P1.p_rx / sum(j.power * math.dist(j.position, s) ** -4 for j in jams)
        for s in GEOM.storage_samples(1.0)
    )
    assert rep.channels[1].min_receiver_sir == pytest.approx(brute, rel=1e-12)


def test_targets_check():
    jam = [ActiveJammer((1, 10), 1.0)]
    rep = validate_placement(jam, GEOM, P1, 1.0, targets=[((0, 10), 1)])
    # SIR at target: (1/5^4) / (1/1^4) < 1
    assert rep.channels[1].targets_valid
    assert rep.channels[1].max_target_sir == pytest.approx(5.0 ** -4)


# -- properties ----------------------------------------------------------

jammer_sets = st.lists(
    st.tuples(st.floats(0.5, 4.5), st.floats(0.5, 19.5), st.floats(0.1, 10)),
    min_size=1, max_size=5,
)


@settings(max_examples=50, deadline=None)
@given(jammer_sets, st.floats(0.1, 10))
def test_power_scaling_divides_sir(js, lam):
    base = [ActiveJammer((x, y), p) for x, y, p in js]
    scaled = [ActiveJammer((x, y), p * lam) for x, y, p in js]
    pts = GEOM.storage_samples(2.0)
    np.testing.assert_allclose(receiver_sir(scaled, pts, P1), receiver_sir(base, pts, P1) / lam,
                               rtol=1e-10)
    f = np.array([[0.0, 2.3], [20.0, 7.1], [11.0, 0.0]])
    np.testing.assert_allclose(eavesdropper_sir(scaled, f, GEOM, P1),
                               eavesdropper_sir(base, f, GEOM, P1) / lam, rtol=1e-10)


@settings(max_examples=50, deadline=None)
@given(jammer_sets, st.tuples(st.floats(0.5, 4.5), st.floats(0.5, 19.5), st.floats(0.1, 10)))
def test_adding_jammer_never_increases_sir(js, extra):
    base = [ActiveJammer((x, y), p) for x, y, p in js]
    more = base + [ActiveJammer(extra[:2], extra[2])]
    other = base + [ActiveJammer(extra[:2], extra[2], channel=2)]
    pts = GEOM.storage_samples(2.0)
    assert np.all(receiver_sir(more, pts, P1) <= receiver_sir(base, pts, P1))
    np.testing.assert_array_equal(receiver_sir(other, pts, P1), receiver_sir(base, pts, P1))


@settings(max_examples=30, deadline=None)
@given(jammer_sets)
def test_finer_fence_sampling_only_tightens(js):
    jams = [ActiveJammer((x, y), p) for x, y, p in js]
    coarse = validate_placement(jams, GEOM, P1, 4.0).channels[1]
    fine = validate_placement(jams, GEOM, P1, 1.0).channels[1]  # superset of samples
    assert fine.max_eaves_sir >= coarse.max_eaves_sir
    assert not (coarse.eaves_valid is False and fine.eaves_valid is True)
