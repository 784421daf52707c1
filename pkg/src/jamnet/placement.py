"""Online admission and power assignment of friendly jammers.

Requests arrive one at a time, each naming a jammer position and the fence
point it should jam. A request is accepted only if the jammer keeps a safe
distance ``sigma`` from the storage and from every conflicting accepted
request; decisions are irrevocable and powers follow a distance-based rule.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import InfeasibleConfigurationError
from .geometry import ScenarioGeometry, boundary_distance
from .sir import ActiveJammer, RadioParams

REJECT_REASONS = ("outside_allowable", "target_off_fence", "length_out_of_range",
                  "storage_guard", "power_cap", "conflict")
DECISION_COLUMNS = ("arrival", "accept", "reason", "power", "channel", "sigma")
_LEN_TOL = 1e-9


def safe_distance(delta_ratio, r, params):
    """Safe distance for lengths in ``[1, delta_ratio]`` under power ``length ** (r * gamma)``.

    ``sigma = min(2 D, max(4 D^r (72 ds / (Pbar (g - 2)))^(1/g), D^(1-r) (Ptx / de)^(1/g)))``,
    scaled by ``D^r`` when ``r > 1`` and by ``D^(1-r)`` when ``r < 0``. When the
    max-term alone exceeds ``2 D`` the outer minimum would hide a violated
    requirement, so an :class:`InfeasibleConfigurationError` is raised.
    """
    D, g = float(delta_ratio), params.gamma
    if g <= 2:
        raise ValueError("the safe distance needs a path-loss exponent above 2")
    if D < 1:
        raise ValueError("the distance ratio must be at least 1")
    rx_term = 4 * D ** r * (72 * params.delta_s / (params.p_rx * (g - 2))) ** (1 / g)
    ev_term = D ** (1 - r) * (params.p_tx / params.delta_e) ** (1 / g)
    need = max(rx_term, ev_term)
    if need > 2 * D:
        raise InfeasibleConfigurationError(
            f"required spacing {need:.6g} exceeds twice the distance ratio ({2 * D:.6g})")
    sigma = min(2 * D, need)
    if r > 1:
        sigma *= D ** r
    elif r < 0:
        sigma *= D ** (1 - r)
    return sigma


def channel_class(length, delta_ratio, F):
    """Channel ``i`` with ``D^((i-1)/F) <= length <= D^(i/F)``; shared boundaries go to the lower channel."""
    if F < 1 or int(F) != F:
        raise ValueError("F must be a positive integer")
    if not 1 - _LEN_TOL <= length <= delta_ratio * (1 + _LEN_TOL):
        raise ValueError(f"length {length} outside [1, {delta_ratio}]")
    if F == 1 or delta_ratio <= 1 or length <= 1:
        return 1
    x = F * math.log(length) / math.log(delta_ratio)
    return int(min(F, max(1, math.ceil(x - 1e-12))))


def polynomial_power(r, gamma):
    def power(length):
        return float(length) ** (r * gamma)
    return power


@dataclass(frozen=True)
class PlacementRequest:
    jammer_pos: tuple
    target: tuple
    duration: Optional[float] = None
    arrival: int = 0

    def __post_init__(self):
        object.__setattr__(self, "jammer_pos", tuple(map(float, self.jammer_pos)))
        object.__setattr__(self, "target", tuple(map(float, self.target)))
        if self.duration is not None and not self.duration > 0:
            raise ValueError("duration must be positive or None (unbounded)")

    @property
    def length(self):
        return math.dist(self.jammer_pos, self.target)

    @property
    def expiry(self):
        return math.inf if self.duration is None else self.arrival + self.duration

    def to_dict(self):
        return {"jammer": list(self.jammer_pos), "target": list(self.target),
                "duration": self.duration, "arrival": self.arrival}

    @classmethod
    def from_dict(cls, data):
        return cls(jammer_pos=data["jammer"], target=data["target"],
                   duration=data.get("duration"), arrival=int(data.get("arrival", 0)))


def read_requests(lines):
    """Parse a JSONL request stream (blank lines skipped)."""
    return [PlacementRequest.from_dict(json.loads(line)) for line in lines if line.strip()]


def write_requests(requests, fh):
    for req in requests:
        fh.write(json.dumps(req.to_dict(), sort_keys=True) + "\n")


@dataclass(frozen=True)
class AcceptedJammer:
    request: PlacementRequest
    power: float
    channel: int

    def as_active(self):
        return ActiveJammer(self.request.jammer_pos, self.power, self.channel)


@dataclass(frozen=True)
class Decision:
    arrival: int
    accept: bool
    reason: str
    power: float
    channel: int
    sigma: float

    def row(self):
        return (self.arrival, int(self.accept), self.reason, repr(self.power), self.channel, repr(self.sigma))


def fence_blocking_holds(min_gap, sigma):
    """Sufficient condition ``min_gap >= (sqrt 2 + 2) sigma`` for jamming the whole fence."""
    return min_gap >= (math.sqrt(2) + 2) * sigma


def duration_ratio(requests):
    """Max/min finite duration over ``requests`` (Gamma, also written Lambda); 1.0 if none are finite."""
    finite = [q.duration for q in requests if q.duration is not None]
    return max(finite) / min(finite) if finite else 1.0


class JamSafeDistance(BaseEstimator):
    """Online safe-distance admission with polynomial (or custom) power assignment.

    Parameters
    ----------
    radio : RadioParams
    delta_ratio : float
        Largest admissible jamming length ``D`` (lengths lie in ``[1, D]``).
    r : float
        Power exponent: ``P = length ** (r * gamma)``.
    n_channels : int
        Channels used by length class; conflicts are only checked within a channel.
    power_cap : float or None
        Reject requests whose assigned power exceeds this cap.
    sigma_scale : float
        Multiplier applied to every safe distance (slack knob).
    power_fn : callable or None
        Custom ``length -> power`` rule replacing the polynomial one.
    """

    def __init__(self, radio=None, delta_ratio=16.0, r=0.5, n_channels=1, power_cap=None,
                 sigma_scale=1.0, power_fn=None):
        self.radio = radio
        self.delta_ratio = delta_ratio
        self.r = r
        self.n_channels = n_channels
        self.power_cap = power_cap
        self.sigma_scale = sigma_scale
        self.power_fn = power_fn

    def fit(self, geometry):
        """Compute per-channel safe distances for ``geometry`` and clear the accepted set."""
        radio = self.radio if self.radio is not None else RadioParams()
        F = int(self.n_channels)
        D = float(self.delta_ratio)
        self.radio_ = radio
        self.geometry_ = geometry
        # every class lies inside [1, D], so the global spacing is valid on each channel
        self.sigma_ = np.full(F, self.sigma_scale * safe_distance(D, self.r, radio))
        self.power_fn_ = self.power_fn or polynomial_power(self.r, radio.gamma)
        self.accepted_: List[AcceptedJammer] = []
        self.decisions_: List[Decision] = []
        min_gap, _ = geometry.gap()
        self.fence_blocked_ = fence_blocking_holds(min_gap, float(self.sigma_.max()))
        if not self.fence_blocked_:
            warnings.warn("storage-fence gap is below (sqrt(2) + 2) * sigma; relying on per-point checks",
                          stacklevel=2)
        return self

    def active(self, now):
        return [a for a in self.accepted_ if a.request.arrival <= now < a.request.expiry]

    def _reject(self, req, reason, power=0.0, channel=0, sigma=0.0):
        return Decision(req.arrival, False, reason, power, channel, sigma)

    def evaluate(self, req):
        """Decision for ``req`` against the current accepted set, without recording it."""
        geom = self.geometry_
        if not geom.in_allowable([req.jammer_pos])[0]:
            return self._reject(req, "outside_allowable")
        if not geom.on_fence([req.target])[0]:
            return self._reject(req, "target_off_fence")
        length = req.length
        if not 1 - _LEN_TOL <= length <= self.delta_ratio * (1 + _LEN_TOL):
            return self._reject(req, "length_out_of_range")
        ch = channel_class(length, self.delta_ratio, int(self.n_channels))
        sigma = float(self.sigma_[ch - 1])
        power = float(self.power_fn_(length))
        if boundary_distance(geom.storage, [req.jammer_pos])[0] < sigma:
            return self._reject(req, "storage_guard", power, ch, sigma)
        if self.power_cap is not None and power > self.power_cap:
            return self._reject(req, "power_cap", power, ch, sigma)
        for acc in self.active(req.arrival):
            if acc.channel != ch:
                continue
            other = acc.request
            if max(math.dist(req.jammer_pos, other.target), math.dist(other.jammer_pos, req.target)) < sigma:
                return self._reject(req, "conflict", power, ch, sigma)
        return Decision(req.arrival, True, "accepted", power, ch, sigma)

    def decide(self, req):
        """Process one request irrevocably."""
        dec = self.evaluate(req)
        self.decisions_.append(dec)
        if dec.accept:
            self.accepted_.append(AcceptedJammer(req, dec.power, dec.channel))
        return dec

    def partial_fit(self, requests):
        """Process requests in arrival order; out-of-order arrivals are an error."""
        last = self.decisions_[-1].arrival if self.decisions_ else -math.inf
        for req in requests:
            if req.arrival < last:
                raise ValueError("requests must arrive in non-decreasing order")
            last = req.arrival
            self.decide(req)
        return self

    def predict(self, requests):
        """Accept flags the current state would give each request, without committing."""
        return np.array([self.evaluate(req).accept for req in requests], dtype=bool)

    def active_jammers(self, now=None):
        items = self.accepted_ if now is None else self.active(now)
        return [a.as_active() for a in items]

    def decision_log_csv(self):
        lines = [",".join(DECISION_COLUMNS)]
        lines += [",".join(map(str, d.row())) for d in self.decisions_]
        return "\n".join(lines) + "\n"


def admit(state, req):
    """Functional alias for :meth:`JamSafeDistance.decide`."""
    return state.decide(req)


@dataclass(frozen=True)
class LayerSum:
    value: float
    lower: float
    upper: float
    bound: float

    @property
    def holds(self):
        return self.upper < self.bound


def layer_sum_bound(gamma, n_terms=1_000_000):
    """``4 * sum_{l>=3} (2l - 1) / (l - 1)^gamma`` next to the bound ``36 / (gamma - 2)``.

    The first ``n_terms`` terms are summed directly and the tail is
    bracketed by integrals of the decreasing summand, so
    ``lower <= value <= upper`` holds rigorously; ``value`` is the midpoint.
    """
    if gamma <= 2:
        raise ValueError("the layer series diverges for gamma <= 2")
    m = np.arange(2, n_terms + 2, dtype=float)  # m = l - 1
    partial = math.fsum((2 * m + 1) / m ** gamma)
    M = m[-1]

    def tail_integral(x):
        return 2 * x ** (2 - gamma) / (gamma - 2) + x ** (1 - gamma) / (gamma - 1)

    lower = 4 * (partial + float(tail_integral(M + 1)))
    upper = 4 * (partial + float(tail_integral(M)))
    return LayerSum(value=(lower + upper) / 2, lower=lower, upper=upper, bound=36 / (gamma - 2))


def density_bound(x, params, max_gap):
    """Cap on jammers in a square sector of side ``x``: ``(de 3^g L^g / ds)(Pbar / Ptx)(x + 1)^2``."""
    if x < 1:
        raise ValueError("sector side must be at least 1")
    g = params.gamma
    return (params.delta_e * 3 ** g * max_gap ** g / params.delta_s) * (params.p_rx / params.p_tx) * (x + 1) ** 2


@dataclass
class PackResult:
    selected: List[int]
    exact: bool
    nodes: int = 0

    @property
    def size(self):
        return len(self.selected)


class _PackTables:
    """Per-request interference contributions used by the offline packer."""

    def __init__(self, requests, geometry, radio, spacing, delta_ratio, power_fn, n_channels):
        g = radio.gamma
        self.n = len(requests)
        s_pts = geometry.storage_samples(spacing)
        self.eligible = np.zeros(self.n, dtype=bool)
        self.channel = np.zeros(self.n, dtype=int)
        self.rx = np.zeros((self.n, len(s_pts)))
        jam = np.array([q.jammer_pos for q in requests], dtype=float).reshape(-1, 2)
        tgt = np.array([q.target for q in requests], dtype=float).reshape(-1, 2)
        power = np.zeros(self.n)
        if self.n:
            inside = geometry.in_allowable(jam)
            fence = geometry.on_fence(tgt)
        for i, q in enumerate(requests):
            ok_len = 1 - _LEN_TOL <= q.length <= delta_ratio * (1 + _LEN_TOL)
            if not (inside[i] and fence[i] and ok_len):
                continue
            self.eligible[i] = True
            self.channel[i] = channel_class(q.length, delta_ratio, n_channels)
            power[i] = power_fn(q.length)
            self.rx[i] = power[i] * np.hypot(*(s_pts - jam[i]).T) ** (-g)
        d_sig = boundary_distance(geometry.storage, tgt) if self.n else np.zeros(0)
        self.target_need = radio.p_tx * d_sig ** (-g) / radio.delta_e
        d = np.hypot(tgt[:, None, 0] - jam[None, :, 0], tgt[:, None, 1] - jam[None, :, 1])
        with np.errstate(divide="ignore"):
            hit = power[None, :] * d ** (-g)
        same = self.channel[:, None] == self.channel[None, :]
        self.target = np.where(same, hit, 0.0)  # target i <- jammer j
        self.rx_limit = radio.p_rx / radio.delta_s

    def receivers_ok(self, load):
        return bool(np.all(load < self.rx_limit))

    def targets_ok(self, chosen):
        if not chosen:
            return True
        idx = np.asarray(chosen)
        got = self.target[np.ix_(idx, idx)].sum(axis=1)
        return bool(np.all(got > self.target_need[idx]))


def offline_packer(requests, geometry, radio, spacing=1.0, delta_ratio=16.0, r=0.5,
                   n_channels=1, power_fn=None, exact_limit=20):
    """Largest subset of simultaneous requests that is feasible as a whole.

    Feasible means every sampled storage receiver stays above its threshold
    on each channel and every chosen target is jammed, with powers from the
    same length rule the online policy uses. Up to ``exact_limit`` requests
    are solved by branch and bound; larger inputs fall back to a greedy pass
    over requests sorted by length and the result is flagged inexact.
    """
    power_fn = power_fn or polynomial_power(r, radio.gamma)
    tab = _PackTables(requests, geometry, radio, spacing, delta_ratio, power_fn, int(n_channels))
    order = [int(i) for i in np.argsort([q.length for q in requests], kind="stable") if tab.eligible[i]]
    n_channels = int(n_channels)
    empty = np.zeros((n_channels + 1, tab.rx.shape[1]))

    if len(requests) > exact_limit:
        chosen, load = [], empty.copy()
        for i in order:
            trial = load.copy()
            trial[tab.channel[i]] += tab.rx[i]
            if tab.receivers_ok(trial[tab.channel[i]]) and tab.targets_ok(chosen + [i]):
                chosen.append(i)
                load = trial
        return PackResult(sorted(chosen), exact=False)

    best: List[int] = []
    nodes = 0

    def search(pos, chosen, load):
        nonlocal best, nodes
        nodes += 1
        if len(chosen) + len(order) - pos <= len(best):
            return
        if pos == len(order):
            if tab.targets_ok(chosen):
                best = list(chosen)
            return
        i = order[pos]
        ch = tab.channel[i]
        load[ch] += tab.rx[i]
        # receiver load only grows with more jammers, so a violation prunes the subtree
        if tab.receivers_ok(load[ch]):
            chosen.append(i)
            search(pos + 1, chosen, load)
            chosen.pop()
        load[ch] -= tab.rx[i]
        search(pos + 1, chosen, load)

    search(0, [], empty.copy())
    return PackResult(sorted(best), exact=True, nodes=nodes)


@dataclass
class AdversarialInstance:
    geometry: ScenarioGeometry
    radio: RadioParams
    requests: List[PlacementRequest]
    delta_ratio: float
    sigma: float


def adversarial_instance(delta_ratio, n_small=None, p_rx=878.0, spacing=2.0, max_small=19):
    """Stream on which online admission accepts one request while all fit offline.

    With ``r = 1`` the safe distance is about ``1.8 D``. A long request jams
    ``(0, 0)`` from ``(0, D)``; short unit-length requests follow at
    ``(x, 1) -> (x, 0)`` for ``|x| < sqrt(sigma^2 - D^2)``, each conflicting
    with the first one. ``n_small`` defaults to as many as fit (at most
    ``max_small``, keeping the stream within exhaustive-search range).
    """
    from .geometry import Polygon  # local import keeps the module namespace small

    D = float(delta_ratio)
    radio = RadioParams(p_tx=1.0, p_rx=p_rx, delta_s=1.0, delta_e=1.0, gamma=4.0)
    sigma = safe_distance(D, 1.0, radio)
    half_w = math.sqrt(max(sigma ** 2 - D ** 2, 0.0))
    fit = int(math.floor(2 * half_w / spacing))
    n_small = min(max_small, fit) if n_small is None else int(n_small)
    if n_small > fit:
        raise ValueError(f"at most {fit} short requests fit in the blocked area")
    xs = (np.arange(n_small) - (n_small - 1) / 2) * spacing
    gap = math.ceil((math.sqrt(2) + 2) * sigma) + 1.0
    storage = Polygon.rectangle(-D, gap, 2 * D, 2 * D)
    fence = Polygon.rectangle(-D - gap, 0.0, 2 * (D + gap), 2 * (D + gap))
    geom = ScenarioGeometry(fence=fence, storage=storage)
    reqs = [PlacementRequest((0.0, D), (0.0, 0.0), arrival=0)]
    reqs += [PlacementRequest((float(x), 1.0), (float(x), 0.0), arrival=k + 1) for k, x in enumerate(xs)]
    return AdversarialInstance(geom, radio, reqs, D, sigma)
