"""Tick-level simulation of the ping/respond exchange.

The engine realizes both exchange flavors from explicit clock edges.
The initiator emits on every M-th edge of its oscillator; the responder
latches each arrival against its own edge comb, scales the latched gap
onto the public amplitude, adds the deterministic processing delay, and
replies.  Nothing in here is fitted: this is the forward model the
estimators are blind-tested against, so it must agree with the
closed-form epoch models of :mod:`climex.signal_model` rather than call
them.

Dither convention: a drawn dither value advances the scheduled emission
(the ping leaves at nominal minus delta).  Advancing the ping makes the
responder's latched gap larger by the same amount modulo its period,
which is the plus sign the measurement model carries inside its
modulus, so the recorded dither vector plugs directly into
``climex_epoch_model``.  The published epoch timestamp is the nominal
(undithered) first emission.

Timestamps are absolute seconds in float64.  Phase extraction from an
absolute time loses precision as the magnitude grows; keep scenario
start times below roughly 1e4 s if sub-picosecond agreement with the
closed forms matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .signal_model import (
    ClockParams,
    MeasurementEpoch,
    NoiseParams,
    ProtocolConstants,
    draw_epoch_noise,
    fold,
)

__all__ = [
    "ProtocolOverrunError",
    "CausalityError",
    "DitherSpec",
    "ScenarioConfig",
    "Streams",
    "ArrivalLog",
    "scenario_streams",
    "first_edge_at_or_after",
    "phase_to_next_edge",
    "measure_phi_test_local",
    "ideal_epoch_phase",
    "ping_decimation",
    "effective_ping_interval",
    "run_exchange",
    "run_rtt_epoch",
    "run_climex_epoch",
]

_TWO_PI = 2.0 * np.pi


class ProtocolOverrunError(RuntimeError):
    """A respond (or a dithered ping) collides with the next ping slot."""


class CausalityError(RuntimeError):
    """Event ordering violates signal causality."""


# ======================================================================
# scenario configuration and random streams
# ======================================================================


@dataclass(frozen=True)
class DitherSpec:
    """Per-ping emission dither.

    kind  "none" or "uniform"
    span  upper edge of U(0, span) in seconds; None means one nominal
          responder period (1 / f_nominal)
    """

    kind: str = "none"
    span: float | None = None

    def __post_init__(self):
        if self.kind not in ("none", "uniform"):
            raise ValueError(f"unknown dither kind {self.kind!r}")
        if self.span is not None and self.span < 0.0:
            raise ValueError("dither span must be non-negative")


@dataclass(frozen=True)
class ScenarioConfig:
    """Exchange-level knobs that are not clock or noise parameters."""

    t_m: float = 1.0e-4
    n_pings: int = 10000
    rho_ab: float = 3.0
    t_start: float = 0.0
    dither: DitherSpec = field(default_factory=DitherSpec)
    seed: int = 0

    def __post_init__(self):
        if self.t_m <= 0.0:
            raise ValueError("ping interval t_m must be positive")
        if self.n_pings < 1:
            raise ValueError("n_pings must be at least 1")
        if self.rho_ab < 0.0:
            raise CausalityError("negative initiator-responder distance")


class Streams(NamedTuple):
    """Independent generators for every stochastic role in a scenario.

    Roles own fixed stream slots so that changing one knob (say, the
    dither kind) never shifts the draws seen by another role.
    """

    phases: np.random.Generator
    initiator_dither: np.random.Generator
    initiator_noise: np.random.Generator
    responder_dither: np.random.Generator
    responder_noise: np.random.Generator
    eve: np.random.Generator


def scenario_streams(seed) -> Streams:
    """Spawn the six role streams of a scenario from one seed."""
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    return Streams(*(np.random.default_rng(c) for c in ss.spawn(6)))


# ======================================================================
# clock-edge helpers
# ======================================================================


def first_edge_at_or_after(clock: ClockParams, t: float) -> float:
    """Time of the clock's first edge at or after ``t`` (within one ulp)."""
    u = clock.f_hz * t + clock.theta_rad / _TWO_PI
    k = math.ceil(u)
    return (k - clock.theta_rad / _TWO_PI) / clock.f_hz


def phase_to_next_edge(clock: ClockParams, t) -> float:
    """Phase left until the clock's next edge, in ``[0, 2 pi)``.

    Zero means an edge falls exactly at ``t``.
    """
    return _TWO_PI * fold(-(clock.f_hz * np.asarray(t, dtype=float)
                            + clock.theta_rad / _TWO_PI), 1.0)


def measure_phi_test_local(clock: ClockParams, t_test: float) -> float:
    """The locally measurable check phase: edge distance of one's own
    clock at the agreed test time."""
    return float(phase_to_next_edge(clock, t_test))


def ideal_epoch_phase(responder: ClockParams, t_prime: float, rho: float,
                      consts: ProtocolConstants) -> float:
    """True sawtooth phase of an epoch, as the estimators define it.

    This is the responder's edge-distance phase evaluated where the
    epoch-opening ping would arrive, t_prime + rho / c.
    """
    return float(phase_to_next_edge(responder, t_prime + rho / consts.c))


def ping_decimation(t_m: float, consts: ProtocolConstants) -> int:
    """Number of initiator clock edges per ping slot."""
    m = int(round(t_m * consts.f_nominal))
    if m < 1:
        raise ValueError("ping interval shorter than one clock period")
    return m


def effective_ping_interval(initiator: ClockParams, t_m: float,
                            consts: ProtocolConstants) -> float:
    """Realized ping spacing: the commanded interval is counted in edges
    of the initiator's actual oscillator, so the true spacing differs
    from ``t_m`` by the initiator's fractional frequency offset."""
    return ping_decimation(t_m, consts) / initiator.f_hz


# ======================================================================
# the exchange engine
# ======================================================================


@dataclass
class ArrivalLog:
    """Ground-truth event record of one simulated epoch.

    Everything an omniscient observer could tap: adversary models read
    their observables from here, and tests read the hidden truth.
    """

    kind: str
    t_prime: float
    t_m_eff: float
    amplitude: float
    scale: float
    ping_nominal: np.ndarray
    ping_emit: np.ndarray
    ping_arrive: np.ndarray
    gap: np.ndarray
    respond_emit: np.ndarray
    respond_arrive: np.ndarray
    delta: np.ndarray
    noise_inner: np.ndarray
    noise_outer: np.ndarray
    initiator: ClockParams
    responder: ClockParams
    cfg: ScenarioConfig
    consts: ProtocolConstants
    noise: NoiseParams


def replay_dither(cfg: ScenarioConfig,
                  consts: ProtocolConstants) -> np.ndarray:
    """Regenerate the initiator's private ping dither for a scenario.

    The draws are a pure function of ``cfg.seed``, so the initiator can
    rebuild them when refitting an epoch it recorded earlier (the epoch
    CSV does not carry them).  ``dither.kind == "none"`` gives zeros.
    """
    if cfg.dither.kind == "uniform":
        span = cfg.dither.span
        if span is None:
            span = 1.0 / consts.f_nominal
        return scenario_streams(cfg.seed).initiator_dither.uniform(
            0.0, span, size=cfg.n_pings)
    return np.zeros(cfg.n_pings)


def run_exchange(initiator: ClockParams, responder: ClockParams,
                 cfg: ScenarioConfig, consts: ProtocolConstants,
                 noise: NoiseParams, kind: str = "rtt"):
    """Simulate one epoch of the exchange at clock-edge level.

    Returns ``(epoch, log)``.  The epoch is what the initiator walks
    away with: nominal relative measurement times (it trusts its own
    clock) and round-trip values.  The log is ground truth.

    kind "rtt":     responder replies after its raw edge gap; the
                    sawtooth amplitude is its private period.
    kind "climex":  ping emissions are dithered and the responder
                    rescales its gap onto the public amplitude.
    """
    if kind not in ("rtt", "climex"):
        raise ValueError(f"unknown exchange kind {kind!r}")

    streams = scenario_streams(cfg.seed)
    n = cfg.n_pings
    t_b_true = 1.0 / responder.f_hz
    if kind == "rtt":
        amplitude = t_b_true
        scale = 1.0
    else:
        amplitude = consts.a_scale
        scale = consts.a_scale / t_b_true

    m = ping_decimation(cfg.t_m, consts)
    t_m_eff = m / initiator.f_hz
    e0 = first_edge_at_or_after(initiator, cfg.t_start)
    idx = np.arange(n, dtype=float)
    ping_nominal = e0 + t_m_eff * idx

    if kind == "climex":
        delta = replay_dither(cfg, consts)
    else:
        delta = np.zeros(n)

    ping_emit = ping_nominal - delta
    if n >= 2 and np.any(np.diff(ping_emit) <= 0.0):
        raise ProtocolOverrunError("dither span reorders ping emissions")

    ping_arrive = ping_emit + cfg.rho_ab / consts.c
    n_in, w_out = draw_epoch_noise(n, noise, streams.initiator_noise)

    frac = fold(-(responder.theta_rad / _TWO_PI) - responder.f_hz * ping_arrive, 1.0)
    gap = fold(t_b_true * frac + n_in, t_b_true)

    respond_emit = ping_arrive + scale * gap + consts.delta_0
    respond_arrive = respond_emit + cfg.rho_ab / consts.c

    y = (respond_arrive - ping_emit) + w_out
    if np.any(y < 0.0):
        raise CausalityError("a respond arrives before its ping was sent")
    if n >= 2 and np.any(respond_arrive[:-1] >= ping_emit[1:]):
        raise ProtocolOverrunError("respond overruns the next ping slot")

    epoch = MeasurementEpoch(t_prime=e0, t_vec=cfg.t_m * idx, y_vec=y)
    log = ArrivalLog(
        kind=kind, t_prime=e0, t_m_eff=t_m_eff, amplitude=amplitude,
        scale=scale, ping_nominal=ping_nominal, ping_emit=ping_emit,
        ping_arrive=ping_arrive, gap=gap, respond_emit=respond_emit,
        respond_arrive=respond_arrive, delta=delta, noise_inner=n_in,
        noise_outer=w_out, initiator=initiator, responder=responder,
        cfg=cfg, consts=consts, noise=noise,
    )
    return epoch, log


def run_rtt_epoch(initiator, responder, cfg, consts, noise):
    """Plain round-trip epoch; dither settings in ``cfg`` are ignored."""
    return run_exchange(initiator, responder, cfg, consts, noise, kind="rtt")


def run_climex_epoch(initiator, responder, cfg, consts, noise):
    return run_exchange(initiator, responder, cfg, consts, noise, kind="climex")
