"""Adversary models: passive parameter recovery and active injection.

The passive adversary (Eve) owns a receiver at a fixed position.  She
timestamps every overheard ping and respond, and her primary observable
is the per-ping time difference of arrival between the two.  That TDOA
equals the responder's scaled edge gap plus constants, so against the
plain round-trip exchange she can run the very same sawtooth search the
initiator runs.  Against the dithered exchange the sawtooth she sees is
smeared over a full period and the search returns noise.

The active adversary injects forged responds.  The initiator's
time-to-digital converter stops on the first respond-like arrival in a
ping slot, so a forgery wins exactly when it arrives before the honest
respond.  Detection works on wrap-aware residuals against the fitted
sawtooth: the measurement is only defined modulo the amplitude, and a
linear residual would flag every benign wrap of the sawtooth as an
outlier.  The flip side is a blind zone: a forgery landing within
threshold of any multiple of the amplitude sits on an adjacent tooth
and is invisible to this test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimators import (
    ParamEstimate,
    SearchGrid,
    grid_search,
    model_fold_values,
)
from .protocol_sim import ArrivalLog
from .signal_model import (
    ClockParams,
    MeasurementEpoch,
    NoiseParams,
    ProtocolConstants,
    as_generator,
    fold,
)

__all__ = [
    "ShortEpochError",
    "EveEpoch",
    "EveEstimate",
    "InjectionPlan",
    "eve_tdoa_epoch",
    "eve_interarrival_epoch",
    "eve_estimate_rtt",
    "make_random_timing_plan",
    "make_oracle_plan",
    "inject_responses",
    "remeasure_epoch",
    "detect_outliers",
    "robust_parameter_fit",
    "CONSISTENCY_CONSTANT",
]

# MAD to sigma for a normal population
CONSISTENCY_CONSTANT = 1.4826

_MIN_EPOCH = 16


class ShortEpochError(ValueError):
    """Epoch too short for the requested statistical operation."""


# ======================================================================
# passive observables
# ======================================================================


@dataclass
class EveEpoch:
    """What a passive listener records during one epoch.

    t_prime     her first recorded ping arrival, s
    ping_times  noisy absolute ping arrival timestamps, s
    tdoa        per-ping respond-minus-ping arrival difference, s
    """

    t_prime: float
    ping_times: np.ndarray
    tdoa: np.ndarray


@dataclass(frozen=True)
class EveEstimate:
    """Protocol parameters recovered by the passive listener."""

    t_m_hat: float
    f_d_hat: float
    f_a_hat: float
    f_b_hat: float
    t_b_hat: float
    phi_hat: float
    cost: float


def eve_tdoa_epoch(log: ArrivalLog, rho_ae: float, rho_be: float,
                   noise: NoiseParams, rng=None) -> EveEpoch:
    """Tap one exchange from position (rho_ae, rho_be).

    The TDOA is formed as (respond emission - ping emission) plus the
    path difference (rho_be - rho_ae) / c, the way a hardware
    start/stop converter differences the two arrivals; the absolute
    station time never enters the difference.  One composite noise draw
    per TDOA element, then an independent draw per ping timestamp, in
    that order.
    """
    if rho_ae < 0.0 or rho_be < 0.0:
        raise ValueError("distances must be non-negative")
    if log.cfg.rho_ab + rho_be - rho_ae < 0.0:
        raise ValueError("geometry violates the triangle inequality")
    g = as_generator(rng)
    n = log.ping_emit.size
    c = log.consts.c
    tdoa_noise = g.normal(0.0, noise.sigma_outer, size=n)
    stamp_noise = g.normal(0.0, noise.sigma_outer, size=n)
    tdoa = (log.respond_emit - log.ping_emit) + (rho_be - rho_ae) / c + tdoa_noise
    ping_times = log.ping_emit + rho_ae / c + stamp_noise
    return EveEpoch(t_prime=float(ping_times[0]), ping_times=ping_times,
                    tdoa=tdoa)


def eve_interarrival_epoch(log: ArrivalLog, eve_clock: ClockParams,
                           rho_ae: float, noise: NoiseParams,
                           rng=None) -> MeasurementEpoch:
    """Latch overheard ping arrivals against the listener's own clock.

    Even without seeing responds, the edge gaps of the ping stream on
    the listener's oscillator trace a sawtooth beating at (f_initiator
    - f_eve); with dithered pings the gaps smear over the full period.
    The values are edge gaps, so they live in [0, 1 / f_eve); the inner
    composite noise applies (emit jitter, channel, her latch).  The
    relative time grid is rebuilt from her own timestamp record via a
    least-squares slope.
    """
    if rho_ae < 0.0:
        raise ValueError("distance must be non-negative")
    g = as_generator(rng)
    n = log.ping_emit.size
    arr = log.ping_emit + rho_ae / log.consts.c
    latch_noise = g.normal(0.0, noise.sigma_inner, size=n)
    stamp_noise = g.normal(0.0, noise.sigma_outer, size=n)
    t_e = eve_clock.period
    frac = fold(-(eve_clock.theta_rad / (2.0 * np.pi)) - eve_clock.f_hz * arr, 1.0)
    vals = fold(t_e * frac + latch_noise, t_e)
    rec = arr + stamp_noise
    slope, icpt = _comb_fit(rec)
    return MeasurementEpoch(t_prime=float(icpt),
                            t_vec=slope * np.arange(n, dtype=float),
                            y_vec=vals)


def _comb_fit(times: np.ndarray):
    """Least-squares (spacing, start) of a nominally uniform pulse comb."""
    n = times.size
    if n < 8:
        raise ShortEpochError("need at least 8 pulses to fit the comb")
    slope, icpt = np.polyfit(np.arange(n, dtype=float), times, 1)
    return float(slope), float(icpt)


def eve_estimate_rtt(epoch: EveEpoch, consts: ProtocolConstants,
                     grid: SearchGrid | None = None) -> EveEstimate:
    """Recover both clock frequencies from a tapped plain exchange.

    The ping comb pins the realized ping interval; counting it in
    advertised clock periods gives the initiator frequency to the
    comb-fit precision.  The TDOA sawtooth then yields the beat, and
    with it the responder frequency.  A dense joint search over period
    and beat is never needed: the comb carries the period information
    at far better resolution than the sawtooth amplitude could.

    Run against a dithered exchange, the same procedure returns a beat
    drawn from a featureless cost surface.
    """
    slope, icpt = _comb_fit(epoch.ping_times)
    m = int(round(slope * consts.f_nominal))
    if m < 1:
        raise ValueError("ping comb spacing is shorter than a clock period")
    f_a_hat = m / slope
    t_nom = 1.0 / consts.f_nominal
    n = epoch.ping_times.size
    fit_epoch = MeasurementEpoch(t_prime=icpt,
                                 t_vec=slope * np.arange(n, dtype=float),
                                 y_vec=epoch.tdoa)
    est = grid_search(fit_epoch, consts, amplitude=t_nom, t_b_model=t_nom,
                      grid=grid)
    f_b_hat = f_a_hat - est.f_d_hat
    if f_b_hat <= 0.0:
        raise ValueError("responder frequency came out non-positive")
    return EveEstimate(t_m_hat=slope, f_d_hat=est.f_d_hat, f_a_hat=f_a_hat,
                       f_b_hat=f_b_hat, t_b_hat=1.0 / f_b_hat,
                       phi_hat=est.phi_hat, cost=est.cost)


# ======================================================================
# active injection
# ======================================================================


@dataclass(frozen=True)
class InjectionPlan:
    """Forged responds: which ping slots, when the forger transmits,
    and from how far away the forgeries travel to the initiator."""

    indices: np.ndarray
    emit_times: np.ndarray
    rho_ea: float
    w_seed: int


def make_random_timing_plan(log: ArrivalLog, rho_ae: float, n_attack: int,
                            rng=None) -> InjectionPlan:
    """Respond-looking pulses at plausible but blind delays.

    The forger hears each ping rho_ae / c after emission and replies a
    uniform delay in [0, delta_0 / 2) later; it knows the public
    processing delay but not the responder's edge comb.  Whether a
    forgery preempts the honest respond depends on the geometry; the
    per-slot outcome is settled at remeasurement.
    """
    g = as_generator(rng)
    n = log.ping_emit.size
    if not 0 < n_attack <= n:
        raise ValueError("n_attack must be in [1, n_pings]")
    idx = np.sort(g.choice(n, size=n_attack, replace=False))
    hear = log.ping_emit[idx] + rho_ae / log.consts.c
    emit = hear + g.uniform(0.0, log.consts.delta_0 / 2.0, size=n_attack)
    w_seed = int(g.integers(2**63))
    return InjectionPlan(indices=idx, emit_times=emit, rho_ea=rho_ae,
                         w_seed=w_seed)


def make_oracle_plan(log: ArrivalLog, rho_ae: float, n_attack: int,
                     rng=None, lead: float = 1.0e-12) -> InjectionPlan:
    """Forgeries timed from ground truth to preempt by ``lead`` seconds.

    An upper bound on the injector, not a realizable attacker: it reads
    the honest respond arrivals from the log and lands just ahead of
    them, on-model up to the lead and the fresh receive noise.
    """
    g = as_generator(rng)
    n = log.ping_emit.size
    if not 0 < n_attack <= n:
        raise ValueError("n_attack must be in [1, n_pings]")
    if lead <= 0.0:
        raise ValueError("lead must be positive")
    idx = np.sort(g.choice(n, size=n_attack, replace=False))
    emit = log.respond_arrive[idx] - lead - rho_ae / log.consts.c
    w_seed = int(g.integers(2**63))
    return InjectionPlan(indices=idx, emit_times=emit, rho_ea=rho_ae,
                         w_seed=w_seed)


def inject_responses(log: ArrivalLog, plan: InjectionPlan):
    """First-arrival merge of honest and forged responds.

    Returns ``(first_arrival, won)``: per-slot stop times after the
    race, and the mask of slots where the forgery got there first.
    """
    c = log.consts.c
    forged_arrive = plan.emit_times + plan.rho_ea / c
    first = log.respond_arrive.copy()
    won = np.zeros(log.respond_arrive.size, dtype=bool)
    beaten = forged_arrive < first[plan.indices]
    winners = plan.indices[beaten]
    first[winners] = forged_arrive[beaten]
    won[winners] = True
    return first, won


def remeasure_epoch(log: ArrivalLog, plan: InjectionPlan):
    """Rebuild the initiator's epoch with the injection in flight.

    Slots the forgery lost keep their original measurement bit for bit
    (same arrival, same latch noise).  Slots it won are remeasured with
    fresh receive noise drawn from the plan's seed.

    Returns ``(epoch, won)``.
    """
    first, won = inject_responses(log, plan)
    w = log.noise_outer.copy()
    g = np.random.default_rng(plan.w_seed)
    w[won] = g.normal(0.0, log.noise.sigma_outer, size=int(won.sum()))
    y = (first - log.ping_emit) + w
    if np.any(y < 0.0):
        raise ValueError("a forged respond precedes its ping")
    epoch = MeasurementEpoch(t_prime=log.t_prime,
                             t_vec=log.cfg.t_m * np.arange(y.size, dtype=float),
                             y_vec=y)
    return epoch, won


# ======================================================================
# detection
# ======================================================================


def _circular_residuals(epoch: MeasurementEpoch, est: ParamEstimate,
                        consts: ProtocolConstants, amplitude: float,
                        t_b_model: float | None, delta_vec):
    t_b = (1.0 / consts.f_nominal) if t_b_model is None else t_b_model
    m = model_fold_values(epoch.t_vec, est.f_d_hat, est.phi_hat, amplitude,
                          t_b, delta_vec)
    full = m + consts.delta_0 + 2.0 * est.rho_hat / consts.c
    half = amplitude / 2.0
    return fold(epoch.y_vec - full + half, amplitude) - half


def detect_outliers(epoch: MeasurementEpoch, est: ParamEstimate,
                    consts: ProtocolConstants, amplitude: float, *,
                    t_b_model: float | None = None, delta_vec=None,
                    k: float = 4.0):
    """Flag measurements inconsistent with the fitted sawtooth.

    Residuals are taken circularly (folded to [-amplitude/2,
    amplitude/2)) so benign wraps of the sawtooth never flag.  The
    scale is the median absolute deviation about the median, scaled to
    sigma; a point flags when its deviation exceeds k of those.

    Returns ``(flags, residuals)``.
    """
    if epoch.n < _MIN_EPOCH:
        raise ShortEpochError(f"need at least {_MIN_EPOCH} measurements")
    r = _circular_residuals(epoch, est, consts, amplitude, t_b_model, delta_vec)
    dev = np.abs(r - np.median(r))
    sigma_hat = CONSISTENCY_CONSTANT * np.median(dev)
    return dev > k * sigma_hat, r


def robust_parameter_fit(epoch: MeasurementEpoch, consts: ProtocolConstants, *,
                         amplitude: float | None = None,
                         t_b_model: float | None = None,
                         grid: SearchGrid | None = None, delta_vec=None,
                         trim: float = 0.05):
    """Grid search hardened against a contaminated epoch.

    Fits once, drops the ``trim`` fraction with the largest circular
    deviations, and refits on the survivors.  Returns ``(estimate,
    keep_mask)``.
    """
    if epoch.n < _MIN_EPOCH:
        raise ShortEpochError(f"need at least {_MIN_EPOCH} measurements")
    if not 0.0 <= trim < 0.5:
        raise ValueError("trim must be in [0, 0.5)")
    t_b = (1.0 / consts.f_nominal) if t_b_model is None else t_b_model
    a = t_b if amplitude is None else amplitude
    est0 = grid_search(epoch, consts, amplitude=a, t_b_model=t_b, grid=grid,
                       delta_vec=delta_vec)
    r = _circular_residuals(epoch, est0, consts, a, t_b, delta_vec)
    dev = np.abs(r - np.median(r))
    keep = dev <= np.quantile(dev, 1.0 - trim)
    est1 = grid_search(epoch, consts, amplitude=a, t_b_model=t_b, grid=grid,
                       delta_vec=delta_vec, sample_mask=keep)
    return est1, keep
