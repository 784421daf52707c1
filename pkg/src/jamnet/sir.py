"""Signal-to-interference ratios at legitimate receivers and eavesdroppers.

Only jammers cause interference (no thermal noise) and channels are
orthogonal, so a jammer contributes only on its own channel.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .exceptions import DegenerateDistanceError
from .geometry import boundary_distance, locate


@dataclass(frozen=True)
class RadioParams:
    """Transmit/receive powers, SIR thresholds and path-loss exponent.

    Attributes
    ----------
    p_tx : float
        Legitimate transmit power (eavesdropper side numerator).
    p_rx : float
        Legitimate received power at receivers inside the storage.
    delta_s : float
        Receiver threshold; receivers need SIR strictly above it.
    delta_e : float
        Eavesdropper threshold; eavesdroppers need SIR strictly below it.
    gamma : float
        Path-loss exponent.
    """

    p_tx: float = 1.0
    p_rx: float = 1.0
    delta_s: float = 1.0
    delta_e: float = 1.0
    gamma: float = 4.0

    def __post_init__(self):
        for name in ("p_tx", "p_rx", "delta_s", "delta_e", "gamma"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number")
        if not 2.0 <= self.gamma <= 6.0:
            warnings.warn(f"path-loss exponent {self.gamma} outside the usual [2, 6]", stacklevel=3)

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self):
        return {"p_tx": self.p_tx, "p_rx": self.p_rx, "delta_s": self.delta_s,
                "delta_e": self.delta_e, "gamma": self.gamma}


@dataclass(frozen=True)
class ActiveJammer:
    position: Tuple[float, float]
    power: float
    channel: int = 1

    def __post_init__(self):
        if not self.power > 0:
            raise ValueError("jammer power must be positive")
        if int(self.channel) != self.channel or self.channel < 1:
            raise ValueError("channel must be an integer >= 1")


def _on_channel(jammers, channel):
    pos = np.array([j.position for j in jammers if j.channel == channel], dtype=float).reshape(-1, 2)
    pw = np.array([j.power for j in jammers if j.channel == channel], dtype=float)
    return pos, pw


def interference(jammers, points, gamma, channel=1):
    """Total received jamming power ``sum_j P_j d_j^-gamma`` at each point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    pos, pw = _on_channel(jammers, channel)
    if pw.size == 0:
        return np.zeros(len(pts))
    d = np.hypot(pts[:, None, 0] - pos[None, :, 0], pts[:, None, 1] - pos[None, :, 1])
    if np.any(d == 0):
        raise DegenerateDistanceError("a jammer coincides with an evaluation point")
    # fixed jammer order along axis 1 keeps the summation deterministic
    return (pw[None, :] * d ** (-gamma)).sum(axis=1)


def _ratio(signal, interf):
    with np.errstate(divide="ignore"):
        return np.where(interf > 0, signal / np.where(interf > 0, interf, 1.0), np.inf)


def receiver_sir(jammers, points, params, channel=1):
    """Vectorised SIR at legitimate receivers; ``inf`` when unjammed."""
    interf = interference(jammers, points, params.gamma, channel)
    return _ratio(params.p_rx, interf)


def eavesdropper_sir(jammers, points, geom, params, channel=1):
    """Vectorised SIR at eavesdroppers, signal taken from the nearest storage point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(locate(geom.storage, pts) == 1):
        raise ValueError("eavesdropper lies inside the storage")
    d_sig = boundary_distance(geom.storage, pts)
    if np.any(d_sig == 0):
        raise DegenerateDistanceError("eavesdropper lies on the storage boundary")
    signal = params.p_tx * d_sig ** (-params.gamma)
    interf = interference(jammers, pts, params.gamma, channel)
    return _ratio(signal, interf)


def sir_at_receiver(jammers, p_s, params, channel=1):
    return float(receiver_sir(jammers, [p_s], params, channel)[0])


def sir_at_eavesdropper(jammers, p_e, geom, params, channel=1):
    return float(eavesdropper_sir(jammers, [p_e], geom, params, channel)[0])


@dataclass
class ChannelReport:
    channel: int
    min_receiver_sir: float
    argmin_point: Tuple[float, float]
    max_eaves_sir: float
    argmax_point: Tuple[float, float]
    receiver_valid: bool
    eaves_valid: bool
    receiver_margins: np.ndarray = field(repr=False)
    eaves_margins: np.ndarray = field(repr=False)
    max_target_sir: Optional[float] = None
    targets_valid: bool = True

    @property
    def valid(self):
        return self.receiver_valid and self.eaves_valid

    def to_dict(self):
        return {
            "min_receiver_sir": _json_float(self.min_receiver_sir),
            "argmin_point": list(self.argmin_point),
            "max_eaves_sir": _json_float(self.max_eaves_sir),
            "argmax_point": list(self.argmax_point),
            "valid": bool(self.valid),
            "receiver_valid": bool(self.receiver_valid),
            "eaves_valid": bool(self.eaves_valid),
            "max_target_sir": _json_float(self.max_target_sir),
            "targets_valid": bool(self.targets_valid),
        }


def _json_float(x):
    if x is None:
        return None
    return "inf" if math.isinf(x) else float(x)


@dataclass
class ConstraintReport:
    channels: Dict[int, ChannelReport]

    @property
    def receiver_valid(self):
        return all(c.receiver_valid for c in self.channels.values())

    @property
    def eaves_valid(self):
        return all(c.eaves_valid for c in self.channels.values())

    @property
    def targets_valid(self):
        return all(c.targets_valid for c in self.channels.values())

    @property
    def valid(self):
        return all(c.valid for c in self.channels.values())

    def to_dict(self):
        return {str(ch): rep.to_dict() for ch, rep in sorted(self.channels.items())}


def validate_placement(jammers, geom, params, spacing, targets=None):
    """Check both SIR constraint families on sampled boundaries.

    Receivers are sampled on the storage boundary and eavesdroppers on the
    fence, per channel. ``targets`` optionally lists ``(point, channel)``
    eavesdropping locations that must individually be jammed; their worst
    SIR is reported as ``max_target_sir``/``targets_valid``.
    """
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    targets = list(targets or [])
    s_pts = geom.storage_samples(spacing)
    f_pts = geom.fence_samples(spacing)
    channels = sorted({j.channel for j in jammers} | {int(c) for _, c in targets}) or [1]
    reports = {}
    for ch in channels:
        r_sir = receiver_sir(jammers, s_pts, params, ch)
        e_sir = eavesdropper_sir(jammers, f_pts, geom, params, ch)
        i_min = int(np.argmin(r_sir))
        i_max = int(np.argmax(e_sir))
        ch_targets = np.array([p for p, c in targets if int(c) == ch], dtype=float).reshape(-1, 2)
        max_t, t_ok = None, True
        if len(ch_targets):
            t_sir = eavesdropper_sir(jammers, ch_targets, geom, params, ch)
            max_t = float(t_sir.max())
            t_ok = bool(max_t < params.delta_e)
        reports[ch] = ChannelReport(
            channel=ch,
            min_receiver_sir=float(r_sir[i_min]),
            argmin_point=tuple(map(float, s_pts[i_min])),
            max_eaves_sir=float(e_sir[i_max]),
            argmax_point=tuple(map(float, f_pts[i_max])),
            receiver_valid=bool(r_sir[i_min] > params.delta_s),
            eaves_valid=bool(e_sir[i_max] < params.delta_e),
            receiver_margins=r_sir / params.delta_s,
            eaves_margins=_ratio(params.delta_e, e_sir),
            max_target_sir=max_t,
            targets_valid=t_ok,
        )
    return ConstraintReport(reports)
