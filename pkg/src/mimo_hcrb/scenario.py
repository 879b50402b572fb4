"""Scenario data model: sensor geometry, signal parameters, phase-error variance.

Path ordering convention used everywhere in the package: the bistatic path
from transmitter ``k`` to receiver ``l`` (both zero-based) is stored at flat
index ``i = l * M + k``, i.e. receiver-major, transmitter-minor.
"""
from __future__ import annotations

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError

SPEED_OF_LIGHT = 299_792_458.0
NARROWBAND_RATIO_MAX = 0.01

_REQUIRED_KEYS = (
    "carrier_hz",
    "bandwidth_hz",
    "reflectivity",
    "sigma_delta_sq",
    "transmitters",
    "receivers",
    "target",
)
_OPTIONAL_KEYS = ("snr", "snr_db", "speed_of_light")


class NarrowbandWarning(UserWarning):
    pass


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SignalModel:
    carrier_hz: float
    bandwidth_hz: float
    snr: float
    reflectivity: tuple = (1.0, 0.0)
    speed_of_light: float = SPEED_OF_LIGHT

    def __post_init__(self):
        object.__setattr__(self, "reflectivity", tuple(float(v) for v in self.reflectivity))
        _check(math.isfinite(self.carrier_hz) and self.carrier_hz > 0, "carrier_hz", "must be > 0")
        _check(
            math.isfinite(self.bandwidth_hz) and self.bandwidth_hz >= 0,
            "bandwidth_hz",
            "must be >= 0",
        )
        _check(math.isfinite(self.snr) and self.snr > 0, "snr", "must be > 0")
        _check(len(self.reflectivity) == 2, "reflectivity", "must be [re, im]")
        _check(
            all(math.isfinite(v) for v in self.reflectivity) and self.reflectivity_sq > 0,
            "reflectivity",
            "must be finite with nonzero magnitude",
        )
        _check(
            math.isfinite(self.speed_of_light) and self.speed_of_light > 0,
            "speed_of_light",
            "must be > 0",
        )
        ratio = (self.bandwidth_hz / self.carrier_hz) ** 2
        if ratio > NARROWBAND_RATIO_MAX:
            warnings.warn(
                f"beta^2/f_c^2 = {ratio:.3g} exceeds {NARROWBAND_RATIO_MAX}; "
                "narrowband model may not hold",
                NarrowbandWarning,
                stacklevel=3,
            )

    @property
    def reflectivity_sq(self) -> float:
        re, im = self.reflectivity
        return re * re + im * im

    @property
    def noise_var(self) -> float:
        """Noise level implied by ``snr = |reflectivity|^2 / noise_var``."""
        return self.reflectivity_sq / self.snr

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr)


@dataclass(frozen=True)
class Scenario:
    transmitters: np.ndarray
    receivers: np.ndarray
    target: np.ndarray
    signal: SignalModel
    sigma_delta_sq: float = 0.0

    def __post_init__(self):
        tx = np.asarray(self.transmitters, dtype=float)
        rx = np.asarray(self.receivers, dtype=float)
        tgt = np.asarray(self.target, dtype=float)
        _check(tx.ndim == 2 and tx.shape[1:] == (2,) and len(tx) >= 1,
               "transmitters", "must be a non-empty list of [x, y]")
        _check(rx.ndim == 2 and rx.shape[1:] == (2,) and len(rx) >= 1,
               "receivers", "must be a non-empty list of [x, y]")
        _check(tgt.shape == (2,), "target", "must be [x, y]")
        for name, a in (("transmitters", tx), ("receivers", rx), ("target", tgt)):
            _check(bool(np.all(np.isfinite(a))), name, "positions must be finite")
        _check(bool(np.all(np.hypot(*(tx - tgt).T) > 0)), "transmitters",
               "a transmitter coincides with the target")
        _check(bool(np.all(np.hypot(*(rx - tgt).T) > 0)), "receivers",
               "a receiver coincides with the target")
        sig = float(self.sigma_delta_sq)
        _check(math.isfinite(sig) and sig >= 0, "sigma_delta_sq", "must be >= 0")
        _check(isinstance(self.signal, SignalModel), "signal", "must be a SignalModel")
        object.__setattr__(self, "transmitters", _frozen(tx))
        object.__setattr__(self, "receivers", _frozen(rx))
        object.__setattr__(self, "target", _frozen(tgt))
        object.__setattr__(self, "sigma_delta_sq", sig)

    @property
    def n_tx(self) -> int:
        return len(self.transmitters)

    @property
    def n_rx(self) -> int:
        return len(self.receivers)

    @property
    def n_paths(self) -> int:
        return self.n_tx * self.n_rx

    @property
    def n_phase(self) -> int:
        return self.n_tx + self.n_rx

    def with_sigma(self, sigma_delta_sq: float) -> "Scenario":
        return dataclasses.replace(self, sigma_delta_sq=sigma_delta_sq)

    def with_snr(self, snr: float) -> "Scenario":
        return dataclasses.replace(self, signal=dataclasses.replace(self.signal, snr=snr))

    def transformed(self, rotation=None, shift=(0.0, 0.0)) -> "Scenario":
        """Apply ``p -> R @ p + shift`` to every position."""
        r = np.eye(2) if rotation is None else np.asarray(rotation, dtype=float)
        t = np.asarray(shift, dtype=float)
        return dataclasses.replace(
            self,
            transmitters=self.transmitters @ r.T + t,
            receivers=self.receivers @ r.T + t,
            target=r @ self.target + t,
        )

    def to_dict(self) -> dict:
        sig = self.signal
        return {
            "carrier_hz": sig.carrier_hz,
            "bandwidth_hz": sig.bandwidth_hz,
            "snr": sig.snr,
            "reflectivity": list(sig.reflectivity),
            "sigma_delta_sq": self.sigma_delta_sq,
            "speed_of_light": sig.speed_of_light,
            "transmitters": self.transmitters.tolist(),
            "receivers": self.receivers.tolist(),
            "target": self.target.tolist(),
        }


@dataclass(frozen=True)
class GeometryDerived:
    """Delays (flat path order ``l * M + k``) and bearing angles."""

    tau: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    tx_range: np.ndarray = field(repr=False, default=None)
    rx_range: np.ndarray = field(repr=False, default=None)

    @property
    def tx_unit(self) -> np.ndarray:
        """(M, 2) unit vectors from the target to each transmitter."""
        return np.column_stack([np.cos(self.alpha), np.sin(self.alpha)])

    @property
    def rx_unit(self) -> np.ndarray:
        return np.column_stack([np.cos(self.gamma), np.sin(self.gamma)])


def _check(ok, field_name, msg):
    if not ok:
        raise ValidationError(f"{field_name}: {msg}", field_name)


def _number(doc, key):
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{key}: must be a number", key)
    return float(v)


def _points(doc, key, single=False):
    v = doc[key]
    try:
        a = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{key}: must contain numeric coordinates", key) from None
    if single:
        _check(a.shape == (2,), key, "must be [x, y]")
    else:
        _check(a.ndim == 2 and a.shape[1:] == (2,) and len(a) >= 1, key,
               "must be a non-empty list of [x, y]")
    return a


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ParseError("scenario document must be a JSON object")
    unknown = sorted(set(doc) - set(_REQUIRED_KEYS) - set(_OPTIONAL_KEYS))
    if unknown:
        raise ValidationError(f"unknown keys: {', '.join(unknown)}", unknown[0])
    for key in _REQUIRED_KEYS:
        if key not in doc:
            raise ValidationError(f"{key}: missing", key)
    has_lin, has_db = "snr" in doc, "snr_db" in doc
    if has_lin == has_db:
        raise ValidationError("exactly one of snr / snr_db is required", "snr")
    snr = _number(doc, "snr") if has_lin else 10.0 ** (_number(doc, "snr_db") / 10.0)
    refl = doc["reflectivity"]
    if not (isinstance(refl, list) and len(refl) == 2):
        raise ValidationError("reflectivity: must be [re, im]", "reflectivity")
    if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in refl):
        raise ValidationError("reflectivity: must be numeric", "reflectivity")
    signal = SignalModel(
        carrier_hz=_number(doc, "carrier_hz"),
        bandwidth_hz=_number(doc, "bandwidth_hz"),
        snr=snr,
        reflectivity=tuple(float(v) for v in refl),
        speed_of_light=_number(doc, "speed_of_light") if "speed_of_light" in doc else SPEED_OF_LIGHT,
    )
    return Scenario(
        transmitters=_points(doc, "transmitters"),
        receivers=_points(doc, "receivers"),
        target=_points(doc, "target", single=True),
        signal=signal,
        sigma_delta_sq=_number(doc, "sigma_delta_sq"),
    )


def load_scenario(document: str) -> Scenario:
    """Parse and validate a scenario JSON document."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed scenario JSON: {e}") from None
    return scenario_from_dict(doc)


def load_scenario_file(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


def compute_delays(s: Scenario) -> np.ndarray:
    """Bistatic delays ``(|tx_k - p| + |rx_l - p|) / c`` at index ``l * M + k``."""
    d_tx = np.hypot(*(s.transmitters - s.target).T)
    d_rx = np.hypot(*(s.receivers - s.target).T)
    return (d_rx[:, None] + d_tx[None, :]).ravel() / s.signal.speed_of_light


def compute_bearings(s: Scenario):
    """Bearing angles (alpha for transmitters, gamma for receivers).

    Measured from the x axis, of the vector from the target to the sensor.
    """
    dt = s.transmitters - s.target
    dr = s.receivers - s.target
    return np.arctan2(dt[:, 1], dt[:, 0]), np.arctan2(dr[:, 1], dr[:, 0])


def derive_geometry(s: Scenario) -> GeometryDerived:
    alpha, gamma = compute_bearings(s)
    return GeometryDerived(
        tau=compute_delays(s),
        alpha=alpha,
        gamma=gamma,
        tx_range=np.hypot(*(s.transmitters - s.target).T),
        rx_range=np.hypot(*(s.receivers - s.target).T),
    )


def circular_layout(n_tx, n_rx, radius, signal, sigma_delta_sq=0.0, target=(0.0, 0.0),
                    rx_offset=None) -> Scenario:
    """Transmitters and receivers evenly spaced on a circle around the target.

    Receivers are rotated by half a receiver spacing unless ``rx_offset``
    (radians) is given, so no receiver sits on a transmitter.
    """
    t0 = np.asarray(target, dtype=float)
    a = 2 * np.pi * np.arange(n_tx) / n_tx
    off = np.pi / n_rx if rx_offset is None else rx_offset
    g = 2 * np.pi * np.arange(n_rx) / n_rx + off
    tx = t0 + radius * np.column_stack([np.cos(a), np.sin(a)])
    rx = t0 + radius * np.column_stack([np.cos(g), np.sin(g)])
    return Scenario(tx, rx, t0, signal, sigma_delta_sq)


def random_scenario(rng: np.random.Generator, m_range=(2, 12), n_range=(2, 12),
                    r_range=(1e3, 20e3), snr_range=(0.1, 100.0), carrier_hz=1e9,
                    bandwidth_hz=1e6, sigma_delta_sq=0.0) -> Scenario:
    """Sensors uniform (by area) on an annulus around a target at the origin.

    ``snr`` is drawn log-uniformly; ``sigma_delta_sq`` may be a fixed value
    or a ``(lo, hi)`` pair drawn log-uniformly.
    """
    m = int(rng.integers(m_range[0], m_range[1] + 1))
    n = int(rng.integers(n_range[0], n_range[1] + 1))

    def ring(k):
        r = np.sqrt(rng.uniform(r_range[0] ** 2, r_range[1] ** 2, k))
        th = rng.uniform(-np.pi, np.pi, k)
        return np.column_stack([r * np.cos(th), r * np.sin(th)])

    tx, rx = ring(m), ring(n)
    snr = float(np.exp(rng.uniform(np.log(snr_range[0]), np.log(snr_range[1]))))
    phase = rng.uniform(-np.pi, np.pi)
    signal = SignalModel(carrier_hz, bandwidth_hz, snr, (math.cos(phase), math.sin(phase)))
    if isinstance(sigma_delta_sq, tuple):
        lo, hi = sigma_delta_sq
        sigma_delta_sq = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    return Scenario(tx, rx, np.zeros(2), signal, sigma_delta_sq)
