"""Sawtooth timing observables for clocked-impulse exchange.

An initiator pings a responder every ``t_m`` seconds.  The responder
cannot reply at an arbitrary instant: it waits for the next edge of its
own oscillator and then adds a fixed processing delay.  Collected over
an epoch, those wait times trace a sawtooth whose repetition rate is
the beat between the two clock frequencies and whose height is the
responder period (or, with delay scaling engaged, a public amplitude
the responder chooses).

Conventions used throughout the package:

* ``fold(x, p)`` is the mathematical modulus with result in ``[0, p)``.
* The sawtooth phase ``phi`` of an epoch is quoted at the epoch
  timestamp ``t_prime``; measurement times inside the epoch are
  relative to ``t_prime``.
* Each ping carries two independent composite noise terms.  The term
  inside the modulus pools initiator emission jitter, the forward
  channel, and the responder latch (variance ``sigma_c**2 +
  2*sigma_j**2``).  The term outside pools respond generation and the
  return path (variance ``sigma_c**2 + sigma_j**2``).
  :func:`draw_epoch_noise` draws the inner vector first and the outer
  vector second, so a tick-level simulation and a closed-form model
  that share a seeded generator consume identical values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SPEED_OF_LIGHT_M_S",
    "as_generator",
    "fold",
    "ClockParams",
    "NoiseParams",
    "ProtocolConstants",
    "SawtoothArgs",
    "MeasurementEpoch",
    "draw_epoch_noise",
    "sawtooth_h",
    "sawtooth_g",
    "scale_delay",
    "rtt_epoch_model",
    "climex_epoch_model",
]

SPEED_OF_LIGHT_M_S = 299792458.0

_TWO_PI = 2.0 * np.pi


def as_generator(rng=None) -> np.random.Generator:
    """Return ``rng`` if it already is a Generator, else seed a fresh one."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def fold(x, period):
    """Mathematical modulus of ``x`` onto the half-open range ``[0, period)``.

    ``np.mod`` can return exactly ``period`` when ``x`` is a negative
    value tiny compared to ``period``; the half-open contract requires
    0.0 there, so that case is mapped explicitly.
    """
    if period <= 0.0:
        raise ValueError("period must be positive")
    out = np.mod(x, period)
    if np.ndim(out) == 0:
        v = float(out)
        return 0.0 if v >= period else v
    out[out >= period] = 0.0
    return out


# ======================================================================
# parameter records
# ======================================================================


@dataclass(frozen=True)
class ClockParams:
    """A free-running oscillator: frequency in Hz and phase offset in rad.

    The clock's edge comb is the set of times t where
    ``f_hz * t + theta_rad / (2 pi)`` crosses an integer.
    """

    f_hz: float
    theta_rad: float = 0.0

    def __post_init__(self):
        if self.f_hz <= 0.0:
            raise ValueError("clock frequency must be positive")

    @property
    def period(self) -> float:
        return 1.0 / self.f_hz


@dataclass(frozen=True)
class NoiseParams:
    """Per-stage timing noise, both sigmas in seconds.

    sigma_j is the jitter of a single emit or latch event; sigma_c is
    the one-way channel contribution.
    """

    sigma_j: float = 0.0
    sigma_c: float = 0.0

    def __post_init__(self):
        if self.sigma_j < 0.0 or self.sigma_c < 0.0:
            raise ValueError("noise sigmas must be non-negative")

    @property
    def sigma_inner(self) -> float:
        """Composite sigma of the term inside the responder-side modulus."""
        return float(np.sqrt(self.sigma_c**2 + 2.0 * self.sigma_j**2))

    @property
    def sigma_outer(self) -> float:
        """Composite sigma of the term added after the responder edge."""
        return float(np.sqrt(self.sigma_c**2 + self.sigma_j**2))


@dataclass(frozen=True)
class ProtocolConstants:
    """Public protocol parameters, known to everyone including adversaries.

    c          propagation speed, m/s
    f_nominal  advertised base frequency both clocks are disciplined to, Hz
    delta_0    deterministic responder processing delay, s
    a_scale    public sawtooth amplitude used when delay scaling is on, s
    """

    c: float = SPEED_OF_LIGHT_M_S
    f_nominal: float = 1.0e8
    delta_0: float = 25.0e-9
    a_scale: float = 25.0e-9

    def __post_init__(self):
        if self.c <= 0.0 or self.f_nominal <= 0.0 or self.a_scale <= 0.0:
            raise ValueError("c, f_nominal and a_scale must be positive")
        if self.delta_0 < 0.0:
            raise ValueError("delta_0 must be non-negative")


@dataclass(frozen=True)
class SawtoothArgs:
    """Parameters of one epoch's sawtooth: beat frequency, responder
    period, and phase at the epoch timestamp."""

    f_d: float
    t_b: float
    phi: float = 0.0

    def __post_init__(self):
        if self.t_b <= 0.0:
            raise ValueError("responder period t_b must be positive")


@dataclass
class MeasurementEpoch:
    """One epoch of round-trip measurements.

    t_prime  absolute epoch timestamp, s
    t_vec    measurement times relative to t_prime, ascending, s
    y_vec    measured values, non-negative, s
    """

    t_prime: float
    t_vec: np.ndarray
    y_vec: np.ndarray

    def __post_init__(self):
        self.t_vec = np.asarray(self.t_vec, dtype=float)
        self.y_vec = np.asarray(self.y_vec, dtype=float)
        if self.t_vec.ndim != 1 or self.y_vec.ndim != 1:
            raise ValueError("t_vec and y_vec must be one-dimensional")
        if self.t_vec.shape != self.y_vec.shape:
            raise ValueError("t_vec and y_vec must have equal length")
        if self.t_vec.size == 0:
            raise ValueError("epoch must contain at least one measurement")
        if not (np.all(np.isfinite(self.t_vec)) and np.all(np.isfinite(self.y_vec))):
            raise ValueError("epoch values must be finite")
        if np.any(np.diff(self.t_vec) < 0.0):
            raise ValueError("t_vec must be non-decreasing")
        if np.any(self.y_vec < 0.0):
            raise ValueError("measured values must be non-negative")

    @property
    def n(self) -> int:
        return int(self.t_vec.size)


# ======================================================================
# noise and sawtooth models
# ======================================================================


def draw_epoch_noise(n_pings: int, noise: NoiseParams, rng=None):
    """Draw the per-ping noise vectors for one epoch.

    Returns ``(inner, outer)``.  The inner vector is drawn first; with
    a zero sigma the draws still consume generator state, so stream
    alignment between runs does not depend on the noise level.
    """
    g = as_generator(rng)
    inner = g.normal(0.0, noise.sigma_inner, size=n_pings)
    outer = g.normal(0.0, noise.sigma_outer, size=n_pings)
    return inner, outer


def _inner_noise_vec(t_vec, noise, rng, noise_vec):
    if noise_vec is not None:
        return np.asarray(noise_vec, dtype=float)
    if noise is None:
        return 0.0
    return as_generator(rng).normal(0.0, noise.sigma_inner, size=np.shape(t_vec))


def sawtooth_h(t_vec, args: SawtoothArgs, *, noise: NoiseParams | None = None,
               rng=None, noise_vec=None):
    """Responder wait-to-next-edge sawtooth, values in ``[0, t_b)``.

    ``h(t) = fold((t_b / 2 pi) * fold(2 pi f_d t + phi, 2 pi) + n, t_b)``

    Parameters
    ----------
    t_vec : array_like
        Measurement times, relative to wherever ``args.phi`` is quoted.
    args : SawtoothArgs
    noise, rng : optional
        Draw the inner composite noise internally.
    noise_vec : array_like, optional
        Pre-drawn inner noise; overrides ``noise``.
    """
    t = np.asarray(t_vec, dtype=float)
    n = _inner_noise_vec(t, noise, rng, noise_vec)
    cyc = fold(_TWO_PI * args.f_d * t + args.phi, _TWO_PI)
    return fold(args.t_b / _TWO_PI * cyc + n, args.t_b)


def sawtooth_g(t_vec, args: SawtoothArgs, delta_vec, a_scale: float, *,
               noise: NoiseParams | None = None, rng=None, noise_vec=None):
    """Dithered, amplitude-scaled sawtooth, values in ``[0, a_scale)``.

    ``g(t) = (a / t_b) * fold((t_b / 2 pi) * fold(2 pi f_d t + phi, 2 pi)
    + delta + n, t_b)``

    ``delta_vec`` is the per-ping dither in seconds (scalar or vector);
    it enters inside the modulus, same as the inner noise.
    """
    if a_scale <= 0.0:
        raise ValueError("a_scale must be positive")
    t = np.asarray(t_vec, dtype=float)
    n = _inner_noise_vec(t, noise, rng, noise_vec)
    delta = np.asarray(delta_vec, dtype=float)
    cyc = fold(_TWO_PI * args.f_d * t + args.phi, _TWO_PI)
    core = fold(args.t_b / _TWO_PI * cyc + delta + n, args.t_b)
    return (a_scale / args.t_b) * core


def scale_delay(delta_b: float, a_scale: float, t_b: float, delta_0: float) -> float:
    """Map one total responder delay onto the public delay range.

    The total delay of a ping (edge wait plus processing) lives in
    ``[0, t_b + delta_0)``; the published delay must live in
    ``[0, a_scale + delta_0)``.  The map is a plain rescaling:

    ``scale_delay = delta_b * (a_scale + delta_0) / (t_b + delta_0)``
    """
    if t_b <= 0.0:
        raise ValueError("t_b must be positive")
    return delta_b * (a_scale + delta_0) / (t_b + delta_0)


# ======================================================================
# closed-form epoch models
# ======================================================================


def _epoch_noise(n_pings, noise, rng):
    if noise is None:
        z = np.zeros(n_pings)
        return z, z
    return draw_epoch_noise(n_pings, noise, rng)


def rtt_epoch_model(t_prime: float, n_pings: int, t_m: float,
                    args: SawtoothArgs, rho: float,
                    consts: ProtocolConstants, *,
                    noise: NoiseParams | None = None, rng=None) -> MeasurementEpoch:
    """Round-trip-time epoch without dither or delay scaling.

    ``y_i = h(i t_m) + delta_0 + 2 rho / c + w_i``
    """
    if n_pings < 1:
        raise ValueError("n_pings must be at least 1")
    if rho < 0.0:
        raise ValueError("rho must be non-negative")
    t = t_m * np.arange(n_pings, dtype=float)
    n_in, w_out = _epoch_noise(n_pings, noise, rng)
    h = sawtooth_h(t, args, noise_vec=n_in)
    y = h + consts.delta_0 + 2.0 * rho / consts.c + w_out
    return MeasurementEpoch(t_prime, t, y)


def climex_epoch_model(t_prime: float, n_pings: int, t_m: float,
                       args: SawtoothArgs, delta_vec, rho: float,
                       consts: ProtocolConstants, *, a_scale: float | None = None,
                       noise: NoiseParams | None = None, rng=None) -> MeasurementEpoch:
    """Clocked-impulse-exchange epoch: dithered pings, scaled respond delay.

    ``y_i = g(i t_m) + delta_0 + 2 rho / c + w_i`` with the dither
    ``delta_vec`` inside the modulus of g.  The amplitude defaults to
    the public ``consts.a_scale``.
    """
    if n_pings < 1:
        raise ValueError("n_pings must be at least 1")
    if rho < 0.0:
        raise ValueError("rho must be non-negative")
    a = consts.a_scale if a_scale is None else a_scale
    delta = np.broadcast_to(np.asarray(delta_vec, dtype=float), (n_pings,))
    t = t_m * np.arange(n_pings, dtype=float)
    n_in, w_out = _epoch_noise(n_pings, noise, rng)
    gvals = sawtooth_g(t, args, delta, a, noise_vec=n_in)
    y = gvals + consts.delta_0 + 2.0 * rho / consts.c + w_out
    return MeasurementEpoch(t_prime, t, y)
