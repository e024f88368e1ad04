"""Two approximation metrics for output statistics.

The excess-information metric is the mass, under the first argument, of
symbols whose log-likelihood ratio strictly exceeds a threshold. The
E-gamma divergence is the best-event advantage max_A (P(A) - gamma Q(A)),
equal to the positive-part sum over symbols; at gamma = 1 it is half the
total variation distance. The excess metric upper-bounds E-gamma at the
same threshold.

Strictness at the threshold follows the defining displays: the excess mass
uses a strict ">", under which the threshold and positive-part forms of
E-gamma agree exactly (ties contribute zero to the positive part).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .prob import Channel, Distribution, push_forward, _check_same_alphabet


def _log_ratio(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(p) - np.log(q)


def excess_mass(p: np.ndarray, q: np.ndarray, log_gamma: float) -> float:
    """Mass under p of {x : log(p(x)/q(x)) > log_gamma}.

    Symbols with p(x) > 0 and q(x) = 0 have infinite density and are always
    counted. Accepts raw arrays; callers validate shapes.
    """
    dens = _log_ratio(p, q)
    mask = (p > 0) & (dens > log_gamma)
    return float(p[mask].sum())


def e_gamma_parts(
    p: np.ndarray, q: np.ndarray, log_gamma: float
) -> tuple[float, float, float]:
    """(value, p_excess, q_excess) of the positive-part sum at gamma.

    Works for any real log_gamma (the public wrapper restricts to
    log_gamma >= 0). The subtracted term gamma * q(x) is assembled as
    exp(log_gamma + log q(x)), which stays below p(x) <= 1 on the strict
    excess set even when gamma itself would overflow.
    """
    dens = _log_ratio(p, q)
    mask = (p > 0) & (dens > log_gamma)
    p_excess = float(p[mask].sum())
    q_excess = float(q[mask].sum())
    with np.errstate(divide="ignore"):
        gq = np.exp(log_gamma + np.log(q[mask]))
    value = float((p[mask] - gq).sum())
    return value, p_excess, q_excess


@dataclass(frozen=True)
class DivergenceReport:
    """E-gamma value together with the two threshold-exceedance masses."""

    value: float
    p_excess: float
    q_excess: float
    log_gamma: float


@dataclass(frozen=True)
class DpiWitness:
    """A processing instance where the output excess mass strictly exceeds
    the input excess mass at threshold tau (non-strict ">= tau" exceedance),
    i.e. where the naive "processing decreases excess mass" ordering fails.
    """

    p_x: Distribution
    q_x: Distribution
    channel: Channel
    tau: float
    input_excess: float
    output_excess: float
    trial: int


def excess_information(p: Distribution, q: Distribution, log_gamma: float) -> float:
    """Excess-information metric: P[log(p(X)/q(X)) > log_gamma], X ~ p."""
    _check_same_alphabet(p, q)
    if math.isnan(log_gamma):
        raise ValidationError("log_gamma must not be NaN")
    return excess_mass(p.probs, q.probs, log_gamma)


def e_gamma(p: Distribution, q: Distribution, log_gamma: float) -> DivergenceReport:
    """E-gamma divergence, gamma = exp(log_gamma) >= 1, via the positive-part sum."""
    _check_same_alphabet(p, q)
    if not log_gamma >= 0.0:
        raise ValidationError("e_gamma requires log_gamma >= 0 (gamma >= 1)")
    value, p_excess, q_excess = e_gamma_parts(p.probs, q.probs, log_gamma)
    return DivergenceReport(value, p_excess, q_excess, log_gamma)


def conditional_e_gamma(
    p_x: Distribution, ch_p: Channel, ch_q: Channel, log_gamma: float
) -> float:
    """Expectation over X ~ p_x of E-gamma between the two conditional rows.

    Equals the E-gamma divergence of the joints p_x * ch_p and p_x * ch_q.
    """
    if ch_p.input_size != p_x.alphabet_size or ch_q.input_size != p_x.alphabet_size:
        raise ValidationError("conditional channels must share the input alphabet")
    if ch_p.output_size != ch_q.output_size:
        raise ValidationError("conditional channels must share the output alphabet")
    if not log_gamma >= 0.0:
        raise ValidationError("conditional_e_gamma requires log_gamma >= 0")
    total = 0.0
    for x in range(p_x.alphabet_size):
        w = p_x.probs[x]
        if w == 0:
            continue
        value, _, _ = e_gamma_parts(ch_p.matrix[x], ch_q.matrix[x], log_gamma)
        total += w * value
    return total


def relative_entropy_via_excess(p: Distribution, q: Distribution) -> float:
    """Relative entropy recovered from the excess-mass curve.

    Integrates the piecewise-constant tail function P[density > tau] over
    [0, inf) and the cumulative function over (-inf, 0] exactly, by sorting
    the finitely many realized density values and summing segments. Returns
    +inf when p is not absolutely continuous w.r.t. q.
    """
    _check_same_alphabet(p, q)
    mask = p.probs > 0
    if np.any(q.probs[mask] == 0):
        return math.inf
    dens = np.log(p.probs[mask]) - np.log(q.probs[mask])
    masses = p.probs[mask]
    vals, inverse = np.unique(dens, return_inverse=True)
    weights = np.bincount(inverse, weights=masses, minlength=vals.size)

    positive = vals > 0
    pos_total = 0.0
    if np.any(positive):
        pv = vals[positive]
        pw = weights[positive]
        # tail[i] = mass at density >= pv[i]; segment [b_{i-1}, b_i) carries it
        tails = np.cumsum(pw[::-1])[::-1]
        breaks = np.concatenate(([0.0], pv))
        pos_total = float(np.sum((breaks[1:] - breaks[:-1]) * tails))

    negative = vals < 0
    neg_total = 0.0
    if np.any(negative):
        nv = vals[negative]
        nw = weights[negative]
        # cum[i] = mass at density <= nv[i], constant on [nv[i], nv[i+1])
        cums = np.cumsum(nw)
        uppers = np.concatenate((nv[1:], [0.0]))
        neg_total = float(np.sum((uppers - nv) * cums))

    return pos_total - neg_total


def find_excess_dpi_counterexample(
    seed: int, max_trials: int, alphabet_sizes: tuple[int, ...] = (2, 3)
) -> DpiWitness | None:
    """Random search for a failure of the naive data-processing ordering of
    the excess-information metric.

    Draws (p_x, q_x, channel) on alphabets of the given sizes and scans
    thresholds at realized density values. Returns the first witness whose
    output-side exceedance mass strictly beats the input side, re-verified
    by direct evaluation, or None after max_trials attempts.
    """
    if max_trials < 1:
        raise ValidationError("max_trials must be at least 1")
    for trial in range(max_trials):
        rng = np.random.default_rng((seed, trial))
        k_in = int(rng.choice(alphabet_sizes))
        k_out = int(rng.choice(alphabet_sizes))
        p = rng.dirichlet(np.ones(k_in))
        q = rng.dirichlet(np.ones(k_in))
        t = rng.dirichlet(np.ones(k_out), size=k_in)
        p_y = p @ t
        q_y = q @ t
        dens_in = _log_ratio(p, q)
        dens_out = _log_ratio(p_y, q_y)
        candidates = np.concatenate((dens_in[p > 0], dens_out[p_y > 0]))
        candidates = np.unique(candidates[np.isfinite(candidates)])
        for tau in candidates:
            in_excess = float(p[(p > 0) & (dens_in >= tau)].sum())
            out_excess = float(p_y[(p_y > 0) & (dens_out >= tau)].sum())
            if out_excess > in_excess + 1e-12:
                return DpiWitness(
                    p_x=Distribution(p),
                    q_x=Distribution(q),
                    channel=Channel(t),
                    tau=float(tau),
                    input_excess=in_excess,
                    output_excess=out_excess,
                    trial=trial,
                )
    return None


def verify_dpi_witness(w: DpiWitness) -> bool:
    """Re-evaluate a witness's exceedance masses from scratch."""
    p = w.p_x.probs
    q = w.q_x.probs
    p_y = p @ w.channel.matrix
    q_y = q @ w.channel.matrix
    dens_in = _log_ratio(p, q)
    dens_out = _log_ratio(p_y, q_y)
    in_excess = float(p[(p > 0) & (dens_in >= w.tau)].sum())
    out_excess = float(p_y[(p_y > 0) & (dens_out >= w.tau)].sum())
    return (
        math.isclose(in_excess, w.input_excess, abs_tol=1e-15)
        and math.isclose(out_excess, w.output_excess, abs_tol=1e-15)
        and out_excess > in_excess
    )


# re-exported so downstream modules can mix distributions without pulling prob
def half_total_variation(p: Distribution, q: Distribution) -> float:
    """Half the l1 distance; equals the E-gamma value at gamma = 1."""
    _check_same_alphabet(p, q)
    return float(0.5 * np.abs(p.probs - q.probs).sum())
