"""Parameter estimation from round-trip sawtooth epochs.

The estimation problem: given one epoch of round-trip values, recover
the beat frequency f_d, the sawtooth phase phi at the epoch timestamp,
and the line-of-sight distance rho.  The constant floor (processing
delay plus two-way flight time) carries rho; the sawtooth shape carries
f_d and phi.  A grid search with the constant profiled out is robust
where gradient methods are hopeless, because the surface is a comb of
aliases.

Frequency stage.  A plain least-squares residual is useless for picking
f_d once the timing noise is an appreciable fraction of the sawtooth
period: every sample that wraps past an edge contributes an error of
order the full amplitude, so at a few ns of noise on a 10 ns sawtooth
the true frequency scores worse than a flat model.  The frequency sweep
therefore scores each candidate by the phase-locking resultant

    R(f) = | sum_j exp(2 pi i (y_j / a - f t_j - delta_j / t_b)) |

which maps each sample onto the unit circle, where a wrap is a no-op.
At the true frequency the angles pile up (R ~ N), anywhere else they
decohere (R ~ sqrt(N)).  R is invariant to phi and to the constant
floor, so the stage estimates f alone.

Phase stage.  At the selected frequency the phase is read from the
least-squares profile J(phi) = sum((z - mean(z))**2), z = y - model.
Mean removal profiles out the floor exactly, so rho never enters the
search; it is read off afterwards from the residual mean.  Wrap noise
inflates this profile by a phi-independent floor but leaves its argmin
near the true phase, which is all the stage needs.

The phase profile is evaluated by a bin partition rather than a loop
over candidate phases.  For a phase on the uniform grid p = k / n_phi
(in cycles), the folded model is a * (frac(u) + p - [frac(u) >= 1 - p]),
and the threshold 1 - k / n_phi aligns exactly with the fractional-part
bin edge floor(frac(u) * n_phi) = n_phi - k.  All n_phi costs therefore
come from three bincounts plus suffix sums, equal (up to float
round-off) to building each model explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_model import MeasurementEpoch, ProtocolConstants, fold

__all__ = [
    "SearchGrid",
    "ParamEstimate",
    "CounterpartEstimate",
    "DEFAULT_T_TEST_OFFSET",
    "cost_J",
    "model_fold_values",
    "estimate_rho",
    "grid_search",
    "counterpart_frequency",
    "predict_phi_test",
    "complete_estimate",
    "phase_error",
]

_TWO_PI = 2.0 * np.pi

DEFAULT_T_TEST_OFFSET = 0.25
"""Default check-time placement after the epoch timestamp, seconds.

Predicted phase error grows linearly in (t_test - t_prime) through the
counterpart-frequency error, so the check point should sit within a
second of the epoch it was estimated from.
"""


@dataclass(frozen=True)
class SearchGrid:
    """Grid-search layout.

    The coarse stage scans f in [f_lo, f_hi] at step df against n_phi
    phases.  The refine stage multiplies both densities by ``refine``
    in a +-df window around the coarse pick (refine = 1 changes
    nothing).
    """

    f_lo: float = -1000.0
    f_hi: float = 1000.0
    df: float = 1.0
    n_phi: int = 64
    refine: int = 10

    def __post_init__(self):
        if not self.f_hi > self.f_lo:
            raise ValueError("need f_hi > f_lo")
        if self.df <= 0.0:
            raise ValueError("df must be positive")
        if self.n_phi < 1 or self.refine < 1:
            raise ValueError("n_phi and refine must be at least 1")

    def freq_values(self) -> np.ndarray:
        n = int(round((self.f_hi - self.f_lo) / self.df))
        return self.f_lo + self.df * np.arange(n + 1)


@dataclass(frozen=True)
class ParamEstimate:
    """Grid-search output: beat, phase at epoch timestamp, distance,
    residual cost, and whether the coarse pick sat on the grid edge."""

    f_d_hat: float
    phi_hat: float
    rho_hat: float
    cost: float
    at_grid_edge: bool = False


@dataclass(frozen=True)
class CounterpartEstimate:
    """Everything one side learns about the other from a single epoch."""

    estimate: ParamEstimate
    f_counterpart_hz: float
    t_b_hat: float
    phi_test_hat: float
    t_test: float


def phase_error(a: float, b: float) -> float:
    """Smallest circular distance between two phases, in [0, pi]."""
    return float(abs(fold(a - b + np.pi, _TWO_PI) - np.pi))


def cost_J(y_vec, model_vec) -> float:
    """Sum of squared mean-removed residuals."""
    z = np.asarray(y_vec, dtype=float) - np.asarray(model_vec, dtype=float)
    z = z - z.mean()
    return float(np.dot(z, z))


def model_fold_values(t_vec, f_d: float, phi: float, amplitude: float,
                      t_b_model: float, delta_vec=None) -> np.ndarray:
    """Noise-free folded sawtooth at the given parameters.

    ``amplitude * fold(f_d t + phi / 2 pi + delta / t_b_model, 1)``.
    This is the model the grid search scores; with delta_vec = None it
    is sawtooth_h (amplitude = t_b) or sawtooth_g (amplitude = a) up to
    the labelling of the amplitude.
    """
    t = np.asarray(t_vec, dtype=float)
    u = f_d * t + phi / _TWO_PI
    if delta_vec is not None:
        u = u + np.asarray(delta_vec, dtype=float) / t_b_model
    return amplitude * fold(u, 1.0)


def estimate_rho(y_vec, model_vec, consts: ProtocolConstants) -> float:
    """Distance from the residual floor once the sawtooth is explained.

    ``rho = (c / 2) * mean(y - model - delta_0)``
    """
    y = np.asarray(y_vec, dtype=float)
    m = np.asarray(model_vec, dtype=float)
    return float(0.5 * consts.c * np.mean(y - m - consts.delta_0))


# ======================================================================
# the sweep core
# ======================================================================


def _phase_costs(q: np.ndarray, y: np.ndarray, a: float, n_phi: int) -> np.ndarray:
    """Costs of all n_phi uniform-grid phases for one candidate f_d.

    q must lie in [0, 1).  Expansion of J over z = s - a p + a I with
    s = y - a q and I the wrap indicator leaves only two bin-dependent
    sums: the indicator count and the indicator-masked sum of s, both
    read from suffix sums over the q bins.
    """
    n = q.size
    s = y - a * q
    s1 = s.sum()
    s2 = float(np.dot(s, s))
    bins = (q * n_phi).astype(np.int64)
    cnt = np.bincount(bins, minlength=n_phi).astype(float)
    wsum = np.bincount(bins, weights=s, minlength=n_phi)
    rc = np.cumsum(cnt[::-1])
    rw = np.cumsum(wsum[::-1])
    c_k = np.concatenate(([0.0], rc[:-1]))
    si_k = np.concatenate(([0.0], rw[:-1]))
    p = np.arange(n_phi) / n_phi
    ap = a * p
    zsum = s1 - ap * n + a * c_k
    zsq = (s2 + n * ap**2 + a * a * c_k - 2.0 * ap * s1
           + 2.0 * a * si_k - 2.0 * a * ap * c_k)
    return zsq - zsum * zsum / n


def _norm_cdf(z: np.ndarray) -> np.ndarray:
    """Standard normal CDF via the Abramowitz-Stegun 7.1.26 erf
    polynomial (|error| < 1.5e-7, far below the noise scales here)."""
    x = np.asarray(z, dtype=float) / np.sqrt(2.0)
    s = np.sign(x)
    x = np.abs(x)
    t = 1.0 / (1.0 + 0.3275911 * x)
    poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741
               + t * (-1.453152027 + t * 1.061405429))))
    erf = 1.0 - poly * np.exp(-x * x)
    return 0.5 * (1.0 + s * erf)


def _smoothed_fold_mean(q: np.ndarray, a: float, sigma: float) -> float:
    """Mean of the folded model over the epoch's sample phases, with the
    fold smoothed by Gaussian timing noise of scale sigma.

    E[fold(x + n, a)] = x + a (Phi(-x/sigma) - Phi((x-a)/sigma)) for
    each sample at ramp position x = a q.  The smoothing matters when
    the sample phases live on a coarse lattice (rational f_d t_m): the
    sharp lattice mean wobbles by up to half a lattice cell as the
    candidate phase moves, while the smoothed mean is flat, which keeps
    the phase/rho readout stable.
    """
    x = a * q
    if sigma <= 0.0:
        return float(x.mean())
    corr = a * (_norm_cdf(-x / sigma) - _norm_cdf((x - a) / sigma))
    return float((x + corr).mean())


def _circular_level(t, y, dphase, a, f):
    """Resultant angle and implied noise scale at a fixed frequency.

    The angle locates the epoch's constant level on the fold circle
    (phase plus floor, confounded mod a); the resultant length R gives
    a wrapped-normal noise-scale readback sigma = (a/2pi) sqrt(-2 ln R).
    """
    ang = _TWO_PI * (y / a - dphase - f * t)
    v = np.exp(1j * ang).mean()
    xi = fold((a / _TWO_PI) * float(np.angle(v)), a)
    r = min(float(np.abs(v)), 1.0)
    if r <= 0.0:
        r = 1.0 / y.size
    sigma = (a / _TWO_PI) * np.sqrt(-2.0 * np.log(r))
    return xi, float(sigma)


def _resultant_mags(t, y, dphase, a, f_start, f_step, count):
    """|R(f)| on the uniform frequency ladder f_start + f_step * k.

    Stepping multiplies the running phasor by exp(-2 pi i f_step t)
    instead of re-exponentiating per frequency; the accumulated rounding
    over a few thousand steps is ~1e-13 relative, far below the noise
    contrast the magnitudes are compared at.
    """
    base = _TWO_PI * (y / a - dphase - f_start * t)
    cur = np.exp(1j * base)
    step = np.exp(-1j * _TWO_PI * f_step * t)
    mags = np.empty(count)
    for k in range(count):
        mags[k] = abs(cur.sum())
        cur *= step
    return mags


def _best_phi_index(t, y, dphase, a, f, n_phi):
    """Argmin of the phase profile at a fixed frequency, first
    occurrence in ascending phase order."""
    q = fold(f * t + dphase, 1.0)
    costs = _phase_costs(q, y, a, n_phi)
    return int(np.argmin(costs))


def grid_search(epoch: MeasurementEpoch, consts: ProtocolConstants, *,
                amplitude: float | None = None, t_b_model: float | None = None,
                grid: SearchGrid | None = None, delta_vec=None,
                sample_mask=None) -> ParamEstimate:
    """Fit (f_d, phi) by exhaustive search, then read rho off the floor.

    Parameters
    ----------
    epoch : MeasurementEpoch
    consts : ProtocolConstants
    amplitude : float, optional
        Sawtooth amplitude of the model.  Defaults to the nominal
        responder period (the plain round-trip reading); pass
        ``consts.a_scale`` when fitting scaled epochs.
    t_b_model : float, optional
        Modulus used to convert a known dither vector to cycles.
        Defaults to the nominal period.
    grid : SearchGrid, optional
    delta_vec : array_like, optional
        Known per-ping dither (the collector knows its own draws).
    sample_mask : boolean array, optional
        Restrict the fit to a subset of pings.
    """
    if grid is None:
        grid = SearchGrid()
    t_b = (1.0 / consts.f_nominal) if t_b_model is None else t_b_model
    a = t_b if amplitude is None else amplitude

    t = epoch.t_vec
    y = epoch.y_vec
    d = None
    if delta_vec is not None:
        d = np.broadcast_to(np.asarray(delta_vec, dtype=float), t.shape)
    if sample_mask is not None:
        keep = np.asarray(sample_mask, dtype=bool)
        t, y = t[keep], y[keep]
        if d is not None:
            d = d[keep]
    if t.size < 2:
        raise ValueError("grid search needs at least two usable samples")
    dphase = 0.0 if d is None else d / t_b

    n_coarse = int(round((grid.f_hi - grid.f_lo) / grid.df)) + 1
    mags = _resultant_mags(t, y, dphase, a, grid.f_lo, grid.df, n_coarse)
    i_c = int(np.argmax(mags))          # first occurrence: smallest f wins ties
    f_c = grid.f_lo + grid.df * i_c
    at_edge = i_c in (0, n_coarse - 1)

    # +-df around the coarse pick; interior picks have grid points as
    # neighbours so only boundary picks need one-sided windows.
    step = grid.df / grid.refine
    k_lo = -grid.refine if i_c > 0 else 0
    k_hi = grid.refine if i_c < n_coarse - 1 else 0
    mags_f = _resultant_mags(t, y, dphase, a, f_c + step * k_lo, step,
                             k_hi - k_lo + 1)
    f_hat = f_c + step * (k_lo + int(np.argmax(mags_f)))

    # Phase/floor readout.  The least-squares phase profile seeds the
    # ramp positions; the unbiased phase comes from the resultant angle
    # xi, which pins phase + floor only jointly (mod a), so the floor is
    # read first from the epoch mean against the smoothed fold model and
    # then removed from xi.  Two passes settle the coupling.
    n_phi2 = grid.n_phi * grid.refine
    p_hat = _best_phi_index(t, y, dphase, a, f_hat, n_phi2) / n_phi2
    xi, sigma = _circular_level(t, y, dphase, a, f_hat)
    y_mean = float(y.mean())
    for _ in range(2):
        q = fold(f_hat * t + dphase + p_hat, 1.0)
        level = _smoothed_fold_mean(q, a, sigma)
        rho_hat = 0.5 * consts.c * (y_mean - level - consts.delta_0)
        p_hat = fold((xi - consts.delta_0 - 2.0 * rho_hat / consts.c) / a, 1.0)
    phi_hat = _TWO_PI * p_hat

    model = model_fold_values(t, f_hat, phi_hat, a, t_b,
                              None if d is None else d)
    return ParamEstimate(f_d_hat=f_hat, phi_hat=phi_hat, rho_hat=rho_hat,
                         cost=cost_J(y, model), at_grid_edge=bool(at_edge))


# ======================================================================
# from a fit to the counterpart clock
# ======================================================================


def counterpart_frequency(own_f_hz: float, f_d_hat: float, role: str) -> float:
    """Counterpart frequency from one's own frequency and the beat.

    The beat is quoted in the global initiator-minus-responder
    convention, f_d = f_initiator - f_responder.  A collector's own
    grid search always returns its local beat (own minus counterpart);
    an initiator can use that value directly, a responder must negate
    it before applying the global convention here.
    """
    if role in ("initiator", "alice"):
        return own_f_hz - f_d_hat
    if role in ("responder", "bob"):
        return own_f_hz + f_d_hat
    raise ValueError(f"unknown role {role!r}")


def predict_phi_test(est: ParamEstimate, own_f_hz: float, t_prime: float,
                     t_test: float, consts: ProtocolConstants,
                     role: str = "initiator") -> float:
    """Predict the counterpart's local check phase at ``t_test``.

    The epoch phase anchors the counterpart's edge comb: the estimated
    gap to its next edge, seen from the epoch-opening arrival, is
    phi_hat / (2 pi f_c) seconds at t_prime + rho / c.  Walking that
    comb to the test time gives the phase the counterpart will measure
    against its own clock:

    ``2 pi - 2 pi f_c fold(t_test - t_prime - phi_hat / (2 pi f_c)
    - rho / c, 1 / f_c)``, wrapped to [0, 2 pi).

    Raises ValueError when the estimated beat is exactly zero: a
    beat-free epoch is flat and carries no phase information about the
    counterpart clock.
    """
    if est.f_d_hat == 0.0:
        raise ValueError("estimated beat frequency is zero; counterpart "
                         "phase is unobservable from this epoch")
    f_c = counterpart_frequency(own_f_hz, est.f_d_hat, role)
    if f_c <= 0.0:
        raise ValueError("counterpart frequency came out non-positive")
    g0 = est.phi_hat / (_TWO_PI * f_c)
    arg = t_test - t_prime - g0 - est.rho_hat / consts.c
    val = _TWO_PI - _TWO_PI * f_c * fold(arg, 1.0 / f_c)
    return fold(val, _TWO_PI)


def complete_estimate(epoch: MeasurementEpoch, own_f_hz: float,
                      consts: ProtocolConstants, *, grid: SearchGrid | None = None,
                      amplitude: float | None = None, t_b_model: float | None = None,
                      delta_vec=None,
                      t_test: float | None = None) -> CounterpartEstimate:
    """Grid search plus everything derived from it, in one call.

    Works on an epoch the caller collected itself, so the returned beat
    is in the collector-local convention and the counterpart frequency
    is own_f minus beat regardless of which side is calling.
    """
    est = grid_search(epoch, consts, amplitude=amplitude, t_b_model=t_b_model,
                      grid=grid, delta_vec=delta_vec)
    local_beat = est.f_d_hat
    f_cp = own_f_hz - local_beat
    if f_cp <= 0.0:
        raise ValueError("counterpart frequency came out non-positive")
    if t_test is None:
        t_test = epoch.t_prime + DEFAULT_T_TEST_OFFSET
    phi_test = predict_phi_test(est, own_f_hz, epoch.t_prime, t_test, consts,
                                role="initiator")
    return CounterpartEstimate(estimate=est, f_counterpart_hz=f_cp,
                               t_b_hat=1.0 / f_cp, phi_test_hat=phi_test,
                               t_test=t_test)
