"""Lossy source coding driven by output-approximation codebooks.

A codebook over the reconstruction alphabet plus a test channel to the
source alphabet induces a stochastic likelihood encoder: the posterior over
codewords given the source realization. This module builds that encoder,
evaluates its exact and sampled success probability, lower-bounds the
success probability via the mixture excess bound, computes the
rate-distortion function by alternating minimization, and evaluates the
success exponent of coding below the rate-distortion function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CapacityError,
    ConvergenceError,
    DistortionInfeasibleError,
    UndefinedPosteriorError,
    ValidationError,
)
from .prob import (
    CHANNEL_ENTRY_CAP,
    Channel,
    Distribution,
    ProductIndex,
    check_flat_capacity,
    product_power,
    product_row,
    push_forward,
    mutual_information,
    relative_entropy,
)
from .resolvability import BoundParams, BoundReport, Codebook, one_shot_bound, optimize_bound
from .simplex import projected_descent


@dataclass(frozen=True)
class DistortionMeasure:
    """Per-letter distortion matrix indexed (reconstruction u, source x)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise ValidationError("distortion: expected a nonempty 2-D matrix")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValidationError("distortion entries must be finite and nonnegative")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def reconstruction_size(self) -> int:
        return int(self.values.shape[0])

    @property
    def source_size(self) -> int:
        return int(self.values.shape[1])

    @classmethod
    def hamming(cls, size: int) -> "DistortionMeasure":
        return cls(1.0 - np.eye(size))

    def block(self, n: int) -> np.ndarray:
        """Block distortion matrix on flat tuple alphabets: the average of
        per-letter distortions."""
        if n < 1:
            raise ValidationError("n must be positive")
        nu = check_flat_capacity(self.reconstruction_size, n)
        nx = check_flat_capacity(self.source_size, n)
        if nu * nx > CHANNEL_ENTRY_CAP:
            raise CapacityError(
                f"block distortion would hold {nu * nx} entries, above the cap"
            )
        total = self.values
        for _ in range(n - 1):
            total = np.kron(total, np.ones_like(self.values)) + np.kron(
                np.ones_like(total), self.values
            )
        return total / n


@dataclass(frozen=True)
class LikelihoodEncoder:
    """Posterior over codeword indices given the (flat) source block."""

    posterior: Channel
    codebook: Codebook

    def codeword_index_law(self, pi: Distribution) -> np.ndarray:
        """Marginal over the L codeword indices when the source is pi^n."""
        pi_n = product_power(pi, self.codebook.n)
        return pi_n.probs @ self.posterior.matrix

    def reconstruction_law(self, pi: Distribution) -> dict[int, float]:
        """Induced law over distinct reconstruction blocks; its support has
        at most L points by construction."""
        law = self.codeword_index_law(pi)
        out: dict[int, float] = {}
        for idx, mass in zip(self.codebook.codewords, law):
            out[idx] = out.get(idx, 0.0) + float(mass)
        return {k: v for k, v in out.items() if v > 0.0}


@dataclass(frozen=True)
class LossySimResult:
    """Sampled success estimate plus the exact enumerated value when the
    block alphabet is small enough."""

    success_prob: float
    std_err: float
    exact: float | None
    trials: int
    seed: int


@dataclass(frozen=True)
class SuccessBound:
    """Lower bound on the encoder success probability; a negative value is
    vacuous and flagged, never clamped."""

    value: float
    vacuous: bool
    success_mass: float
    epsilon: float
    report: BoundReport


@dataclass(frozen=True)
class RdSolution:
    rate: float
    conditional: np.ndarray  # W(u|x), shape (U, X)
    marginal: np.ndarray  # induced reconstruction marginal r(u)
    distortion: float
    multiplier: float

    def reverse_channel(self, q: Distribution) -> tuple[Distribution, Channel]:
        """Return (r, Q_{X|U}) obtained by Bayes inversion of W against q."""
        joint = self.conditional * q.probs[None, :]
        r = joint.sum(axis=1)
        keep = r > 0
        rows = np.zeros_like(joint)
        rows[keep] = joint[keep] / r[keep, None]
        rows[~keep] = 1.0 / self.conditional.shape[1]
        return Distribution(r / r.sum()), Channel(rows)


@dataclass(frozen=True)
class ScheduleReport:
    """Admissible exponent for a supplied (input law, test channel) pair,
    plus the two feasibility checks."""

    exponent: float
    expected_distortion: float
    mutual_info: float
    divergence: float
    rate_feasible: bool


# ---------------------------------------------------------------------------
# likelihood encoder
# ---------------------------------------------------------------------------


def build_likelihood_encoder(
    cb: Codebook, ch: Channel, pi: Distribution
) -> LikelihoodEncoder:
    """Posterior over codewords proportional to each codeword's conditional
    mass at the source realization.

    ``ch`` maps reconstruction letters to source letters; ``pi`` is the
    single-letter source law used to check that every supported source
    block has positive synthesized mass.
    """
    if pi.alphabet_size != ch.output_size:
        raise ValidationError("source alphabet must match channel output")
    index = ProductIndex(ch.input_size, cb.n)
    if max(cb.codewords) >= index.flat_size:
        raise ValidationError("codeword index outside the flat input alphabet")
    rows = np.stack(
        [
            product_row(ch, index.decode(c)) if cb.n > 1 else ch.matrix[c]
            for c in cb.codewords
        ]
    )
    synth = rows.mean(axis=0)
    pi_n = product_power(pi, cb.n)
    offenders = np.nonzero((pi_n.probs > 0) & (synth == 0))[0]
    if offenders.size:
        raise UndefinedPosteriorError(
            f"source block {int(offenders[0])} has positive mass but zero "
            "synthesized mass; the posterior is undefined there"
        )
    posterior = np.full((synth.size, cb.L), 1.0 / cb.L)
    ok = synth > 0
    posterior[ok] = rows[:, ok].T / (cb.L * synth[ok])[:, None]
    return LikelihoodEncoder(Channel(posterior), cb)


def _codeword_letters(cb: Codebook, base: int) -> np.ndarray:
    index = ProductIndex(base, cb.n)
    return np.array([index.decode(c) for c in cb.codewords], dtype=np.int64)


def simulate_success(
    pi: Distribution,
    cb: Codebook,
    ch: Channel,
    dm: DistortionMeasure,
    d_max: float,
    trials: int,
    seed: int,
) -> LossySimResult:
    """Sample source blocks, encode through the posterior, and estimate the
    probability that the block distortion stays within d_max; also returns
    the exact probability by enumeration when the block alphabet allows."""
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    if dm.reconstruction_size != ch.input_size or dm.source_size != ch.output_size:
        raise ValidationError("distortion matrix must match the channel shape")
    enc = build_likelihood_encoder(cb, ch, pi)
    cw_letters = _codeword_letters(cb, ch.input_size)

    rng = np.random.default_rng(seed)
    x_letters = rng.choice(pi.alphabet_size, size=(trials, cb.n), p=pi.probs)
    powers = pi.alphabet_size ** np.arange(cb.n - 1, -1, -1, dtype=np.int64)
    x_flat = x_letters @ powers
    post = enc.posterior.matrix[x_flat]  # (trials, L)
    u = rng.random(trials)
    choices = (np.cumsum(post, axis=1) < u[:, None]).sum(axis=1)
    choices = np.minimum(choices, cb.L - 1)
    picked = cw_letters[choices]  # (trials, n)
    dist = dm.values[picked, x_letters].mean(axis=1)
    hits = (dist <= d_max).astype(float)
    success = float(hits.mean())
    std_err = 0.0 if trials == 1 else float(np.std(hits, ddof=1) / math.sqrt(trials))

    exact = None
    x_size = pi.alphabet_size**cb.n
    if x_size * cb.L <= CHANNEL_ENTRY_CAP:
        pi_n = product_power(pi, cb.n).probs
        xdigits = ProductIndex(pi.alphabet_size, cb.n).decode_all()  # (Xn, n)
        ok = np.zeros((x_size,))
        for l, cw in enumerate(cw_letters):
            dblock = dm.values[cw[None, :].repeat(x_size, axis=0), xdigits].mean(axis=1)
            ok += enc.posterior.matrix[:, l] * (dblock <= d_max)
        exact = float((pi_n * ok).sum())
    return LossySimResult(success, std_err, exact, trials, seed)


def one_shot_success_bound(
    pi: Distribution,
    q_u: Distribution,
    ch: Channel,
    dm: DistortionMeasure,
    d_max: float,
    L: int,
    params: BoundParams | None = None,
    log_gamma: float | None = None,
    budget: int = 400,
) -> SuccessBound:
    """Lower bound (1/gamma) * (P[d(U, X) <= d_max under the designed pair]
    - epsilon) on the success probability achievable by some likelihood
    encoder with L codewords.

    epsilon is the excess-bound total: evaluated at ``params`` when given,
    otherwise optimized within ``budget`` at ``log_gamma``. Block instances
    are passed pre-expanded, exactly as for the excess bound itself.
    """
    if dm.values.shape != ch.matrix.shape:
        raise ValidationError("distortion matrix must match the channel shape")
    if params is None:
        if log_gamma is None:
            raise ValidationError("provide either params or log_gamma")
        report = optimize_bound(pi, q_u, ch, L, log_gamma, budget)
    else:
        report = one_shot_bound(pi, q_u, ch, L, params)
    lg = report.params.log_gamma
    success_mass = float(
        (q_u.probs[:, None] * ch.matrix * (dm.values <= d_max)).sum()
    )
    value = math.exp(-lg) * (success_mass - report.total)
    return SuccessBound(value, value <= 0.0, success_mass, report.total, report)


# ---------------------------------------------------------------------------
# rate-distortion
# ---------------------------------------------------------------------------


def _ba_fixed_multiplier(
    q: np.ndarray, d: np.ndarray, kernel: np.ndarray, tol_inner: float, max_iter: int
) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Alternating minimization at a fixed multiplier; ``kernel`` is
    exp(-beta * d) or a 0/1 support mask. Returns (rate, distortion, W, r)."""
    nu = d.shape[0]
    r = np.full(nu, 1.0 / nu)
    support = q > 0
    for _ in range(max_iter):
        w = r[:, None] * kernel
        z = w.sum(axis=0)
        if np.any(z[support] <= 0):
            raise ConvergenceError("alternating minimization lost the source support")
        w = np.divide(w, z[None, :], out=np.zeros_like(w), where=z[None, :] > 0)
        r_new = w @ q
        delta = float(np.abs(r_new - r).max())
        r = np.clip(r_new, 1e-300, None)
        r = r / r.sum()
        if delta < tol_inner:
            break
    w = r[:, None] * kernel
    z = w.sum(axis=0)
    w = np.divide(w, z[None, :], out=np.zeros_like(w), where=z[None, :] > 0)
    dist = float((q * (w * d).sum(axis=0)).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        term = w * (np.log(w) - np.log(r)[:, None])
    term[~np.isfinite(term)] = 0.0
    term[w == 0] = 0.0
    rate = float((q * term.sum(axis=0)).sum())
    return max(rate, 0.0), dist, w, r


def blahut_arimoto_solution(
    q: Distribution, dm: DistortionMeasure, d_max: float, tol: float
) -> RdSolution:
    """Rate-distortion point R(q, d_max) with the optimizing conditional.

    The multiplier is bisected until the achieved distortion sits within
    tol * max-entry below d_max (feasible side); the inner loop stops when
    the reconstruction marginal moves less than tol / 10.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if dm.source_size != q.alphabet_size:
        raise ValidationError("distortion matrix must match the source alphabet")
    d = dm.values
    qv = q.probs
    d_floor = float((qv * d.min(axis=0)).sum())
    d_trivial = float((d @ qv).min())
    if d_max < d_floor - 1e-12:
        raise DistortionInfeasibleError(
            f"d_max={d_max} below the minimum achievable distortion {d_floor}"
        )
    tol_inner = tol / 10.0
    max_iter = 20000
    if d_max >= d_trivial - 1e-15:
        best = int(np.argmin(d @ qv))
        w = np.zeros_like(d)
        w[best, :] = 1.0
        r = np.zeros(d.shape[0])
        r[best] = 1.0
        return RdSolution(0.0, w, r, d_trivial, 0.0)
    if d_max <= d_floor + 1e-15:
        mask = (d <= d.min(axis=0)[None, :] + 1e-15).astype(float)
        rate, dist, w, r = _ba_fixed_multiplier(qv, d, mask, tol_inner, max_iter)
        return RdSolution(rate, w, r, dist, math.inf)

    dist_tol = tol * max(float(d.max()), 1e-12)
    beta_hi = 1.0
    for _ in range(80):
        rate_hi, dist_hi, w_hi, r_hi = _ba_fixed_multiplier(
            qv, d, np.exp(-beta_hi * d), tol_inner, max_iter
        )
        if dist_hi <= d_max:
            break
        beta_hi *= 2.0
    else:
        raise ConvergenceError("multiplier growth failed to reach the target distortion")
    beta_lo = 0.0
    for _ in range(200):
        if d_max - dist_hi <= dist_tol:
            break
        beta_mid = 0.5 * (beta_lo + beta_hi)
        rate_mid, dist_mid, w_mid, r_mid = _ba_fixed_multiplier(
            qv, d, np.exp(-beta_mid * d), tol_inner, max_iter
        )
        if dist_mid <= d_max:
            beta_hi, rate_hi, dist_hi, w_hi, r_hi = (
                beta_mid,
                rate_mid,
                dist_mid,
                w_mid,
                r_mid,
            )
        else:
            beta_lo = beta_mid
    else:
        raise ConvergenceError(
            "distortion constraint not met within tolerance",
            residual=d_max - dist_hi,
        )
    return RdSolution(rate_hi, w_hi, r_hi, dist_hi, beta_hi)


def blahut_arimoto_rd(
    q: Distribution, dm: DistortionMeasure, d_max: float, tol: float
) -> float:
    """Rate-distortion function R(q, d_max) in nats."""
    return blahut_arimoto_solution(q, dm, d_max, tol).rate


# ---------------------------------------------------------------------------
# success exponent
# ---------------------------------------------------------------------------


def _exponent_objective(
    qvec: np.ndarray, p: Distribution, dm: DistortionMeasure, d_max: float, rate: float, tol: float
) -> float:
    qvec = np.clip(qvec, 0.0, None)
    total = qvec.sum()
    if total <= 0:
        return math.inf
    qvec = qvec / total
    if np.any((qvec > 0) & (p.probs == 0)):
        return math.inf
    div = relative_entropy(Distribution(qvec), p)
    rd = blahut_arimoto_rd(Distribution(qvec), dm, d_max, tol)
    return div + max(rd - rate, 0.0)


def success_exponent_solution(
    p: Distribution, dm: DistortionMeasure, d_max: float, rate: float, tol: float
) -> tuple[float, Distribution]:
    """min over source laws Q of D(Q || p) + [R(Q, d_max) - rate]^+ with the
    minimizer, via multi-start projected descent (16 deterministic starts)."""
    if rate < 0:
        raise ValidationError("rate must be nonnegative")
    k = p.alphabet_size
    ba_tol = min(tol, 1e-6)

    def objective(x: np.ndarray) -> float:
        return _exponent_objective(x, p, dm, d_max, rate, ba_tol)

    starts = [p.probs.copy(), np.full(k, 1.0 / k)]
    for i in range(14):
        rng = np.random.default_rng((20240, i))
        starts.append(rng.dirichlet(np.ones(k)))
    best_val = math.inf
    best_q = p.probs.copy()
    for x0 in starts:
        x, val = projected_descent(objective, x0, steps=50)
        if val < best_val:
            best_val = val
            best_q = np.clip(x, 0.0, None)
            best_q = best_q / best_q.sum()
    direct = objective(p.probs)
    if direct <= best_val:
        best_val = direct
        best_q = p.probs.copy()
    return max(best_val, 0.0), Distribution(best_q)


def success_exponent(
    p: Distribution, dm: DistortionMeasure, d_max: float, rate: float, tol: float
) -> float:
    """Exponential decay rate of the success probability when coding below
    the rate-distortion function; 0 whenever rate >= R(p, d_max)."""
    return success_exponent_solution(p, dm, d_max, rate, tol)[0]


def achievability_schedule(
    p: Distribution,
    q_u: Distribution,
    ch: Channel,
    dm: DistortionMeasure,
    d_max: float,
    rate: float,
    tol: float = 1e-9,
) -> ScheduleReport:
    """Minimal admissible threshold exponent for a supplied reconstruction
    law and test channel: D(Q_X || p) + [I(q_u, ch) - rate]^+.

    Raises when the pair's expected distortion exceeds d_max; a rate above
    the pair's mutual information is reported via ``rate_feasible`` since
    the bracket already accounts for the overshoot.
    """
    if dm.values.shape != ch.matrix.shape:
        raise ValidationError("distortion matrix must match the channel shape")
    if rate < 0:
        raise ValidationError("rate must be nonnegative")
    expected_d = float((q_u.probs[:, None] * ch.matrix * dm.values).sum())
    if expected_d > d_max + tol:
        raise DistortionInfeasibleError(
            f"pair has expected distortion {expected_d:.12g} > d_max={d_max}"
        )
    q_x = push_forward(q_u, ch)
    info = mutual_information(q_u, ch)
    div = relative_entropy(q_x, p)
    exponent = div + max(info - rate, 0.0)
    return ScheduleReport(
        exponent=exponent,
        expected_distortion=expected_d,
        mutual_info=info,
        divergence=div,
        rate_feasible=info <= rate + tol,
    )
