import io
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import zeta

from jamnet.exceptions import InfeasibleConfigurationError
from jamnet.geometry import Polygon, ScenarioGeometry, rectangle_scenario
from jamnet.harness import candidate_pool, generate_eavesdropper_scenario
from jamnet.placement import (
    JamSafeDistance, PlacementRequest, adversarial_instance, admit, channel_class, density_bound,
    duration_ratio, layer_sum_bound, offline_packer, read_requests, safe_distance, write_requests,
)
from jamnet.sir import RadioParams, validate_placement

P36 = RadioParams(p_rx=36.0)
P1000 = RadioParams(p_rx=1000.0)


def coefficient_radio(gamma=4.0):
    """Radio whose two safe-distance coefficients are both 1."""
    p_rx = 72 * 4 ** gamma / (gamma - 2)
    return RadioParams(p_rx=p_rx, gamma=gamma)


# ---- safe distance --------------------------------------------------------------------------

def test_safe_distance_example():
    assert safe_distance(16, 0.5, P36) == pytest.approx(16.0)


def test_safe_distance_at_unit_ratio():
    g, p = 4.0, P1000
    expect = min(2.0, max(4 * (72 / (p.p_rx * (g - 2))) ** (1 / g), 1.0))
    assert safe_distance(1, 0.3, p) == pytest.approx(expect)


@pytest.mark.parametrize("r", [0.0, 0.2, 0.5, 0.7, 1.0])
@pytest.mark.parametrize("D", [1.0, 3.0, 16.0])
def test_safe_distance_symmetric_in_r(r, D):
    p = coefficient_radio()
    assert safe_distance(D, r, p) == pytest.approx(safe_distance(D, 1 - r, p))
    assert safe_distance(D, r, p) == pytest.approx(max(D ** r, D ** (1 - r)))


def test_safe_distance_outer_variants():
    p = RadioParams(p_rx=1e8)
    c = 4 * (72 / (1e8 * 2)) ** 0.25
    assert safe_distance(4, 1.5, p) == pytest.approx(c * 4 ** 1.5 * 4 ** 1.5)
    assert safe_distance(4, -0.5, p) == pytest.approx(4 ** 1.5 * 4 ** 1.5)


def test_safe_distance_errors():
    with pytest.raises(ValueError):
        safe_distance(4, 0.5, RadioParams(gamma=2.0))
    with pytest.raises(ValueError):
        safe_distance(0.5, 0.5, P36)
    with pytest.raises(InfeasibleConfigurationError):
        safe_distance(4, 1.0, RadioParams(p_rx=1.0))


def test_channel_class_examples():
    assert channel_class(2, 16, 2) == 1
    assert channel_class(4, 16, 2) == 1
    assert channel_class(4.01, 16, 2) == 2
    assert channel_class(16, 16, 2) == 2
    assert {channel_class(x, 16, 1) for x in (1, 3, 9, 16)} == {1}
    with pytest.raises(ValueError):
        channel_class(17, 16, 2)
    with pytest.raises(ValueError):
        channel_class(0.5, 16, 2)


@given(length=st.floats(1, 100), F=st.integers(1, 6))
def test_channel_class_brackets_length(length, F):
    D = 100.0
    i = channel_class(length, D, F)
    assert 1 <= i <= F
    assert D ** ((i - 1) / F) * (1 - 1e-9) <= length <= D ** (i / F) * (1 + 1e-9)


# ---- bound calculators ------------------------------------------------------------------------

@pytest.mark.parametrize("gamma", [2.5, 3.0, 4.0, 6.0])
def test_layer_sum_below_bound(gamma):
    res = layer_sum_bound(gamma)
    assert res.lower <= res.value <= res.upper
    assert res.upper - res.lower < 1e-6
    assert res.holds and res.value < 36 / (gamma - 2)
    closed = 4 * (2 * (zeta(gamma - 1) - 1) + zeta(gamma) - 1)
    assert res.lower - 1e-9 <= closed <= res.upper + 1e-9


def test_layer_sum_gamma4_head_and_decay():
    res = layer_sum_bound(4.0)
    head = 4 * (5 / 16 + 7 / 81 + 9 / 256)
    assert head < res.value < 18
    assert layer_sum_bound(40.0).value < 1e-10
    with pytest.raises(ValueError):
        layer_sum_bound(2.0)


def test_density_bound_examples():
    p = RadioParams(p_tx=1.0, p_rx=1.0)
    assert density_bound(1, p, 2) == pytest.approx(5184)
    x = 3.0
    assert density_bound(2 * x, p, 2) / density_bound(x, p, 2) == pytest.approx(((2 * x + 1) / (x + 1)) ** 2)
    assert density_bound(x, RadioParams(p_tx=2.0), 2) == pytest.approx(density_bound(x, p, 2) / 2)
    with pytest.raises(ValueError):
        density_bound(0.5, p, 2)


# ---- admission ------------------------------------------------------------------------------

GEOM = rectangle_scenario(80, 60, 20, 10)  # storage [30,50]x[25,35]


def fitted(**kw):
    kw.setdefault("radio", P1000)
    kw.setdefault("delta_ratio", 8.0)
    kw.setdefault("r", 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return JamSafeDistance(**kw).fit(GEOM)


def test_first_request_accepted_and_close_second_rejected():
    est = fitted()
    a = PlacementRequest((10, 3), (10, 0), arrival=0)
    b = PlacementRequest((11, 3), (11, 0), arrival=1)  # cross distances sqrt(10) < sigma
    assert admit(est, a).accept
    dec = admit(est, b)
    assert not dec.accept and dec.reason == "conflict"
    far = PlacementRequest((70, 3), (70, 0), arrival=2)
    assert admit(est, far).accept


def test_expired_request_never_blocks():
    est = fitted()
    est.decide(PlacementRequest((10, 3), (10, 0), duration=3, arrival=0))
    assert not est.evaluate(PlacementRequest((11, 3), (11, 0), arrival=2)).accept
    assert est.evaluate(PlacementRequest((11, 3), (11, 0), arrival=3)).accept


@pytest.mark.parametrize("req, reason", [
    (PlacementRequest((-5, 5), (0, 5)), "outside_allowable"),
    (PlacementRequest((10, 5), (10, 3)), "target_off_fence"),
    (PlacementRequest((10, 0.5), (10, 0)), "length_out_of_range"),
    (PlacementRequest((10, 20), (10, 0)), "length_out_of_range"),
    (PlacementRequest((40, 21), (40, 60)), "length_out_of_range"),
    (PlacementRequest((28, 30), (28, 60)), "length_out_of_range"),
])
def test_reject_reasons(req, reason):
    assert fitted().evaluate(req).reason == reason


def test_storage_guard_and_power_cap():
    est = fitted(delta_ratio=40.0)
    near = PlacementRequest((27, 30), (0, 30))  # 3 from the storage, sigma is larger
    assert est.evaluate(near).reason == "storage_guard"
    capped = fitted(power_cap=10.0)
    long_req = PlacementRequest((10, 6), (10, 0))  # power 6^2 = 36
    assert capped.evaluate(long_req).reason == "power_cap"
    assert capped.evaluate(PlacementRequest((10, 3), (10, 0))).accept


def test_channels_do_not_interact():
    est = fitted(n_channels=2)
    short = PlacementRequest((10, 2), (10, 0), arrival=0)  # length 2 -> channel 1
    long_ = PlacementRequest((12, 7), (12, 0), arrival=1)  # length 7 -> channel 2
    before = est.evaluate(long_)
    assert est.decide(short).channel == 1
    after = est.evaluate(long_)
    assert before.accept == after.accept and after.channel == 2


def test_predict_does_not_commit_and_order_is_enforced():
    est = fitted()
    reqs = [PlacementRequest((10, 3), (10, 0), arrival=0), PlacementRequest((11, 3), (11, 0), arrival=1)]
    assert est.predict(reqs).tolist() == [True, True]
    assert est.accepted_ == []
    est.partial_fit(reqs)
    assert [d.accept for d in est.decisions_] == [True, False]
    with pytest.raises(ValueError):
        est.partial_fit([PlacementRequest((70, 5), (70, 0), arrival=0)])
    assert est.get_params()["delta_ratio"] == 8.0


def test_decision_log_and_jsonl_round_trip():
    est = fitted()
    reqs = [PlacementRequest((10, 5), (10, 0), arrival=0), PlacementRequest((12, 5), (12, 0), duration=4, arrival=1)]
    est.partial_fit(reqs)
    lines = est.decision_log_csv().splitlines()
    assert lines[0] == "arrival,accept,reason,power,channel,sigma"
    assert lines[1].startswith("0,1,accepted,")
    buf = io.StringIO()
    write_requests(reqs, buf)
    assert read_requests(buf.getvalue().splitlines()) == reqs


def test_fence_blocking_warning():
    with pytest.warns(UserWarning):
        JamSafeDistance(radio=P1000, delta_ratio=8.0, r=1.0).fit(GEOM)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), r=st.sampled_from([0.0, 0.5, 1.0]))
def test_accepted_set_is_prefix_monotone_and_valid(seed, r):
    pool = candidate_pool(GEOM)
    reqs = generate_eavesdropper_scenario(GEOM, 8, np.random.default_rng(seed), delta_ratio=8.0, per_target=3,
                                          max_duration=6, pool=pool)
    est = fitted(r=r)
    history = []
    for q in reqs:
        est.decide(q)
        history.append(list(est.accepted_))
        act = est.active(q.arrival)
        rep = validate_placement([a.as_active() for a in act], GEOM, P1000, 1.0,
                                 targets=[(a.request.target, a.channel) for a in act])
        assert rep.receiver_valid and rep.targets_valid
    for shorter, longer in zip(history, history[1:]):
        assert longer[:len(shorter)] == shorter


def test_validator_catches_unsafe_spacing():
    # shrinking the spacing by hand and using huge powers must break the receiver constraint
    geom = rectangle_scenario(30, 30, 10, 10)  # storage [10,20]^2
    est = JamSafeDistance(radio=P1000, delta_ratio=8.0, r=1.0, power_fn=lambda length: 1e9)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est.fit(geom)
    est.sigma_[:] = 0.5
    assert est.decide(PlacementRequest((8, 15), (0, 15))).accept
    rep = validate_placement(est.active_jammers(), geom, P1000, 1.0)
    assert not rep.receiver_valid


# ---- offline packer and adversarial family -------------------------------------------------------

def pairs_geometry():
    storage = Polygon.rectangle(0, 0, 300, 2)
    fence = Polygon.rectangle(-20, -20, 340, 42)
    return ScenarioGeometry(storage=storage, fence=fence)


def test_packer_picks_one_per_conflicting_pair():
    geom = pairs_geometry()
    limit = 1.5 / 11 ** 4  # one jammer at distance 11 fits, two side by side do not
    radio = RadioParams(p_rx=limit, delta_s=1.0)
    reqs = []
    for x in (40, 150, 260):
        reqs += [PlacementRequest((x - 1, -11), (x - 1, -20)), PlacementRequest((x + 1, -11), (x + 1, -20))]
    res = offline_packer(reqs, geom, radio, delta_ratio=10.0, r=0.0)
    assert res.exact and res.size == 3
    assert sorted(i // 2 for i in res.selected) == [0, 1, 2]


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_packer_dominates_online(seed):
    reqs = generate_eavesdropper_scenario(GEOM, 5, np.random.default_rng(seed), delta_ratio=8.0, per_target=3)
    est = fitted(r=0.5)
    est.partial_fit(reqs)
    res = offline_packer(reqs, GEOM, P1000, delta_ratio=8.0, r=0.5)
    assert res.size >= len(est.accepted_)


def test_packer_greedy_fallback_is_feasible():
    reqs = generate_eavesdropper_scenario(GEOM, 9, np.random.default_rng(3), delta_ratio=8.0, per_target=3)
    res = offline_packer(reqs, GEOM, P1000, delta_ratio=8.0, r=0.5)
    assert not res.exact and res.size > 0
    chosen = [reqs[i] for i in res.selected]
    from jamnet.sir import ActiveJammer
    jam = [ActiveJammer(q.jammer_pos, q.length ** 2) for q in chosen]
    assert validate_placement(jam, GEOM, P1000, 1.0, targets=[(q.target, 1) for q in chosen]).receiver_valid


def test_adversarial_single_request():
    inst = adversarial_instance(2, n_small=0)
    assert len(inst.requests) == 1 and inst.requests[0].length == pytest.approx(2)
    with pytest.raises(ValueError):
        adversarial_instance(2, n_small=50)


def test_adversarial_ratio_trend():
    ratios = []
    for D in (4, 8, 16, 32):
        inst = adversarial_instance(D)
        est = JamSafeDistance(radio=inst.radio, delta_ratio=D, r=1.0).fit(inst.geometry)
        est.partial_fit(inst.requests)
        assert len(est.accepted_) == 1
        opt = offline_packer(inst.requests, inst.geometry, inst.radio, delta_ratio=D, r=1.0)
        assert opt.exact
        ratios.append(opt.size / len(est.accepted_))
    assert all(b >= a for a, b in zip(ratios, ratios[1:]))
    assert ratios[2] >= 2


def test_duration_ratio():
    reqs = [PlacementRequest((0, 1), (0, 0), duration=d) for d in (2, None, 8, 4)]
    assert duration_ratio(reqs) == 4.0
    assert duration_ratio(reqs[1:2]) == 1.0
