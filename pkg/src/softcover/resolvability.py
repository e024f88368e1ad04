"""Random-codebook approximation of a target output distribution.

A codebook of L inputs drives a channel; the synthesized output is the
equal-weight mixture of the selected rows. This module evaluates the
four-term upper bound on the expected excess-mass probability of that
mixture against a target, its weakened three-term form, a budgeted
parameter search over the bound, an exact-per-codebook Monte Carlo
simulator, the asymptotic threshold exponent, and the minimum randomness
rate needed to meet a given exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .divergences import e_gamma_parts, excess_mass
from .errors import ConvergenceError, ValidationError
from .parallel import parallel_map
from .prob import (
    Channel,
    Distribution,
    ProductIndex,
    product_power,
    product_row,
    push_forward,
    mutual_information,
    relative_entropy,
)
from .simplex import exponentiated_gradient, projected_descent


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Codebook:
    """L flat input indices, each encoding a length-n tuple big-endian."""

    codewords: tuple[int, ...]
    L: int
    n: int

    def __post_init__(self):
        if self.L < 1 or self.n < 1:
            raise ValidationError("codebook requires L >= 1 and n >= 1")
        if len(self.codewords) != self.L:
            raise ValidationError(
                f"codebook claims L={self.L} but holds {len(self.codewords)} codewords"
            )
        if any(c < 0 for c in self.codewords):
            raise ValidationError("codeword indices must be nonnegative")


@dataclass(frozen=True)
class BoundParams:
    """Parameter tuple of the mixture excess bound.

    Requires epsilon > 0, sigma > 0 and gamma = exp(log_gamma) > epsilon +
    sigma. The four-term form additionally needs a finite tau and a delta
    in (0, 1); the weakened three-term form leaves both None.
    """

    log_gamma: float
    epsilon: float
    sigma: float
    tau: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if not (self.epsilon > 0 and self.sigma > 0):
            raise ValidationError("epsilon and sigma must be positive")
        if not math.log(self.epsilon + self.sigma) < self.log_gamma:
            raise ValidationError("need gamma > epsilon + sigma")
        if self.delta is not None and not 0.0 < self.delta < 1.0:
            raise ValidationError("delta must lie in (0, 1)")
        if self.tau is not None and not math.isfinite(self.tau):
            raise ValidationError("tau must be finite when given")

    @property
    def gamma(self) -> float:
        return math.exp(self.log_gamma)

    def log_gamma_minus_eps_sigma(self) -> float:
        """log(gamma - sigma - epsilon), stable for large log_gamma."""
        s = self.sigma + self.epsilon
        if self.log_gamma > 50.0:
            return self.log_gamma + math.log1p(-s * math.exp(-self.log_gamma))
        return math.log(math.exp(self.log_gamma) - s)


@dataclass(frozen=True)
class BoundReport:
    """The additive terms of the excess bound, their sum, and the params."""

    term1: float
    term2: float
    term3: float
    term4: float
    total: float
    params: BoundParams


@dataclass(frozen=True)
class SimResult:
    """Monte Carlo estimates over random codebooks; per-codebook values are
    exact, randomness enters only through the codebook draw."""

    mean_excess_prob: float
    mean_e_gamma: float
    std_err_excess: float
    std_err_e_gamma: float
    trials: int
    seed: int

    @property
    def std_err(self) -> float:
        return max(self.std_err_excess, self.std_err_e_gamma)


@dataclass(frozen=True)
class MinRateResult:
    """Outcome of the minimum-randomness-rate optimization. ``feasible`` is
    False when no input law meets the divergence budget; infeasibility is a
    value, not an error."""

    feasible: bool
    rate: float
    objective: float
    q_u: np.ndarray | None
    constraint_value: float
    residual: float
    converged: bool


# ---------------------------------------------------------------------------
# codebooks and synthesis
# ---------------------------------------------------------------------------


def draw_codebook(q: Distribution, n: int, L: int, seed: int) -> Codebook:
    """L i.i.d. length-n codewords, letters drawn from q; deterministic in seed."""
    if L < 1:
        raise ValidationError("L must be positive")
    index = ProductIndex(q.alphabet_size, n)
    rng = np.random.default_rng(seed)
    letters = rng.choice(q.alphabet_size, size=(L, n), p=q.probs)
    powers = q.alphabet_size ** np.arange(n - 1, -1, -1, dtype=np.int64)
    flats = letters @ powers
    assert index.flat_size > int(flats.max())
    return Codebook(tuple(int(c) for c in flats), L, n)


def synthesize_output(cb: Codebook, ch: Channel) -> Distribution:
    """Equal-weight mixture of the channel rows selected by the codebook.

    For n > 1 the channel is interpreted per-letter and rows are expanded
    on demand, so the full power matrix is never materialized.
    """
    return Distribution(_synthesize_array(cb, ch))


def _synthesize_array(cb: Codebook, ch: Channel) -> np.ndarray:
    index = ProductIndex(ch.input_size, cb.n)
    if max(cb.codewords) >= index.flat_size:
        raise ValidationError(
            f"codeword {max(cb.codewords)} outside flat input alphabet "
            f"{index.flat_size}"
        )
    if cb.n == 1:
        rows = ch.matrix[list(cb.codewords)]
        return rows.mean(axis=0)
    acc = np.zeros(ch.output_size**cb.n)
    for c in cb.codewords:
        acc += product_row(ch, index.decode(c))
    return acc / cb.L


# ---------------------------------------------------------------------------
# the excess bound
# ---------------------------------------------------------------------------


class _Spectrum:
    """Sorted realized density values with suffix mass sums, for O(log)
    threshold-exceedance queries."""

    def __init__(self, values: np.ndarray, masses: np.ndarray):
        keep = masses > 0
        vals = values[keep]
        mass = masses[keep]
        order = np.argsort(vals)
        self.vals = vals[order]
        suffix = np.concatenate((np.cumsum(mass[order][::-1])[::-1], [0.0]))
        self.tail = suffix

    def mass_above(self, threshold: float, strict: bool = True) -> float:
        side = "right" if strict else "left"
        idx = int(np.searchsorted(self.vals, threshold, side=side))
        return float(self.tail[idx])


class _BoundInstance:
    """Precomputed density spectra of one (target, input, channel) triple."""

    def __init__(self, pi: Distribution, q_u: Distribution, ch: Channel):
        if pi.alphabet_size != ch.output_size:
            raise ValidationError("target alphabet must match channel output")
        if q_u.alphabet_size != ch.input_size:
            raise ValidationError("input law alphabet must match channel input")
        log_pi = pi.log_probs()
        q_x = push_forward(q_u, ch).probs
        with np.errstate(divide="ignore", invalid="ignore"):
            out_vals = np.log(q_x) - log_pi
            cond_vals = np.log(ch.matrix) - log_pi[None, :]
            info_vals = np.log(ch.matrix) - np.log(q_x)[None, :]
        joint = q_u.probs[:, None] * ch.matrix
        self.out = _Spectrum(out_vals, q_x)
        self.cond = _Spectrum(cond_vals.ravel(), joint.ravel())
        self.info = _Spectrum(info_vals.ravel(), joint.ravel())

    def evaluate(self, L: int, params: BoundParams) -> BoundReport:
        if params.tau is None or params.delta is None:
            raise ValidationError("four-term bound requires tau and delta")
        log_head = params.log_gamma_minus_eps_sigma()
        term1 = self.out.mass_above(log_head, strict=True)
        t2_threshold = math.log(params.delta) + math.log(L) + math.log(params.sigma)
        term2 = self.cond.mass_above(t2_threshold, strict=True)
        term3 = math.exp(
            params.tau
            + 2.0 * log_head
            - math.log(L)
            - 2.0 * math.log1p(-params.delta)
            - 2.0 * math.log(params.sigma)
        )
        coeff = math.exp(log_head - math.log(params.epsilon))
        term4 = coeff * self.info.mass_above(params.tau, strict=True)
        total = term1 + term2 + term3 + term4
        return BoundReport(term1, term2, term3, term4, total, params)

    def evaluate_weakened(self, L: int, params: BoundParams) -> BoundReport:
        log_head = params.log_gamma_minus_eps_sigma()
        term1 = self.out.mass_above(log_head, strict=True)
        # the weakened form thresholds at L*sigma non-strictly
        t2_threshold = math.log(L) + math.log(params.sigma)
        term2 = self.cond.mass_above(t2_threshold, strict=False)
        term3 = math.exp(log_head - math.log(params.epsilon))
        total = term1 + term2 + term3
        return BoundReport(term1, term2, term3, 0.0, total, params)


def one_shot_bound(
    pi: Distribution, q_u: Distribution, ch: Channel, L: int, params: BoundParams
) -> BoundReport:
    """Four-term upper bound on the probability that the synthesized
    mixture's density against the target exceeds gamma, averaged over
    codebooks of L i.i.d. codewords.

    All exceedance probabilities are exact sums with density comparisons in
    the log domain; block instances are passed pre-expanded.
    """
    if L < 1:
        raise ValidationError("L must be positive")
    return _BoundInstance(pi, q_u, ch).evaluate(L, params)


def weakened_bound(
    pi: Distribution,
    q_u: Distribution,
    ch: Channel,
    L: int,
    log_gamma: float,
    epsilon: float,
    sigma: float,
) -> BoundReport:
    """Three-term weakening of the excess bound (the tau -> -inf, delta -> 1
    limit); the second term thresholds at L*sigma non-strictly and the
    fourth term is reported as 0."""
    if L < 1:
        raise ValidationError("L must be positive")
    params = BoundParams(log_gamma, epsilon, sigma)
    return _BoundInstance(pi, q_u, ch).evaluate_weakened(L, params)


def _schedule_fractions() -> np.ndarray:
    return np.geomspace(1e-4, 0.9, 8)


def optimize_bound(
    pi: Distribution,
    q_u: Distribution,
    ch: Channel,
    L: int,
    log_gamma: float,
    budget: int,
) -> BoundReport:
    """Budgeted search for bound parameters.

    Seeds with the split schedule epsilon = gamma*(1-f), sigma = gamma*f/2
    (delta = 1/2 family) evaluated through the weakened form, then runs a
    coordinate search with two refinement rounds over (tau, delta, epsilon,
    sigma) on the four-term form. Never exceeds ``budget`` evaluations and
    the incumbent total is nonincreasing in the budget.
    """
    if budget < 1:
        raise ValidationError("budget must be at least 1")
    if L < 1:
        raise ValidationError("L must be positive")
    if log_gamma > 300.0:
        raise ValidationError(
            "log_gamma too large for linear epsilon/sigma parameters"
        )
    inst = _BoundInstance(pi, q_u, ch)
    gamma = math.exp(log_gamma)
    evals = 0
    best: BoundReport | None = None

    def consider(report: BoundReport) -> None:
        nonlocal best
        if best is None or report.total < best.total:
            best = report

    best_frac = float(_schedule_fractions()[0])
    for f in _schedule_fractions():
        params = BoundParams(log_gamma, gamma * (1.0 - f), gamma * f / 2.0)
        report = inst.evaluate_weakened(L, params)
        evals += 1
        if best is None or report.total < best.total:
            best_frac = float(f)
        consider(report)
        if evals >= budget:
            return best

    finite_info = inst.info.vals[np.isfinite(inst.info.vals)]
    if finite_info.size:
        tau_seed = list(np.quantile(finite_info, np.linspace(0.0, 1.0, 7)))
        tau_seed.append(float(finite_info.max()) + 1.0)
    else:
        tau_seed = [0.0]

    current = {
        "epsilon": gamma * (1.0 - best_frac),
        "sigma": gamma * best_frac / 2.0,
        "delta": 0.5,
        "tau": float(np.median(tau_seed)),
    }

    def try_point(point: dict[str, float]) -> float | None:
        if not (point["epsilon"] > 0 and point["sigma"] > 0):
            return None
        if point["epsilon"] + point["sigma"] >= gamma:
            return None
        if not 0.0 < point["delta"] < 1.0:
            return None
        params = BoundParams(
            log_gamma, point["epsilon"], point["sigma"], point["tau"], point["delta"]
        )
        return inst.evaluate(L, params)

    for round_idx in range(3):
        if round_idx == 0:
            grids = {
                "tau": list(tau_seed),
                "delta": list(np.linspace(0.1, 0.9, 8)),
                "epsilon": list(gamma * (1.0 - _schedule_fractions())),
                "sigma": list(gamma * _schedule_fractions() / 2.0),
            }
        else:
            shrink = 2.0 ** (1.0 - round_idx)
            grids = {
                "tau": list(current["tau"] + np.linspace(-2.0, 2.0, 8) * shrink),
                "delta": list(
                    np.clip(
                        current["delta"] + np.linspace(-0.3, 0.3, 8) * shrink,
                        1e-3,
                        1.0 - 1e-3,
                    )
                ),
                "epsilon": list(current["epsilon"] * np.geomspace(0.25, 4.0, 8)),
                "sigma": list(current["sigma"] * np.geomspace(0.25, 4.0, 8)),
            }
        for coord in ("tau", "delta", "epsilon", "sigma"):
            for value in grids[coord]:
                point = dict(current)
                point[coord] = float(value)
                report = try_point(point)
                if report is None:
                    continue
                evals += 1
                if best is None or report.total < best.total:
                    current = point
                consider(report)
                if evals >= budget:
                    return best
    return best


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def simulate_resolvability(
    pi: Distribution,
    q_u: Distribution,
    ch: Channel,
    n: int,
    L: int,
    log_gamma: float,
    trials: int,
    seed: int,
    threads: int = 1,
) -> SimResult:
    """Exact per-codebook Monte Carlo over random codebooks.

    Codewords are drawn i.i.d. from the n-fold product of the pushforward
    of q_u through ch (the codeword law of the bound), which requires a
    square channel so output symbols index rows. Per codebook both the
    excess-mass probability and the E-gamma value of the synthesized
    mixture against the n-fold target are computed by full enumeration;
    only the codebook draw is random. Trial t uses seed XOR t, so totals
    are bitwise reproducible for any worker count.
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    if seed < 0:
        raise ValidationError("seed must be nonnegative")
    if ch.input_size != ch.output_size:
        raise ValidationError(
            "codeword law is the channel pushforward; channel must be square"
        )
    if pi.alphabet_size != ch.output_size:
        raise ValidationError("target alphabet must match channel output")
    q_x = push_forward(q_u, ch)
    target = product_power(pi, n).probs

    def run_trial(t: int) -> tuple[float, float]:
        cb = draw_codebook(q_x, n, L, seed ^ t)
        p = _synthesize_array(cb, ch)
        exc = excess_mass(p, target, log_gamma)
        egv = e_gamma_parts(p, target, log_gamma)[0]
        return exc, egv

    results = parallel_map(run_trial, range(trials), threads)
    exc = np.array([r[0] for r in results])
    egv = np.array([r[1] for r in results])

    def std_err(x: np.ndarray) -> float:
        if trials == 1:
            return 0.0
        return float(np.std(x, ddof=1) / math.sqrt(trials))

    return SimResult(
        mean_excess_prob=float(exc.mean()),
        mean_e_gamma=float(egv.mean()),
        std_err_excess=std_err(exc),
        std_err_e_gamma=std_err(egv),
        trials=trials,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# asymptotics
# ---------------------------------------------------------------------------


def asymptotic_threshold(
    pi: Distribution, q_u: Distribution, ch: Channel, rate: float
) -> float:
    """Critical exponent D(Q_X || pi) + [I(Q_U, ch) - rate]^+ in nats."""
    if rate < 0:
        raise ValidationError("rate must be nonnegative")
    q_x = push_forward(q_u, ch)
    d = relative_entropy(q_x, pi)
    if math.isinf(d):
        return math.inf
    return d + max(mutual_information(q_u, ch) - rate, 0.0)


def min_randomness_rate(
    pi: Distribution, ch: Channel, exponent: float, tol: float
) -> MinRateResult:
    """Minimum randomness rate needed to drive the excess metric to zero at
    the given exponent.

    Minimizes sum_u q_u(u) D(row_u || pi), which equals D(Q_X || pi) +
    I(Q_U, ch), over input laws whose pushforward divergence stays within
    the exponent budget; the reported rate is the positive part of the
    optimum minus the exponent. Linear objective, convex constraint:
    solved by exponentiated gradient on a positive-part penalty with
    multiplier bisection, plus an exact feasibility-restoring line step.
    """
    if exponent < 0:
        raise ValidationError("exponent must be nonnegative")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if pi.alphabet_size != ch.output_size:
        raise ValidationError("target alphabet must match channel output")
    k = ch.input_size
    cost = np.array(
        [relative_entropy(Distribution(ch.matrix[u]), pi) for u in range(k)]
    )
    active = np.isfinite(cost)
    if not np.any(active):
        return MinRateResult(False, math.nan, math.inf, None, math.inf, math.inf, True)
    T = ch.matrix[active]
    c = cost[active]
    ka = int(active.sum())
    log_pi = pi.log_probs()

    def g(w: np.ndarray) -> float:
        qx = w @ T
        m = qx > 0
        val = float(np.sum(qx[m] * (np.log(qx[m]) - log_pi[m])))
        return val if val > 0.0 else 0.0

    def grad_g(w: np.ndarray) -> np.ndarray:
        qx = np.clip(w @ T, 1e-300, None)
        return T @ (np.log(qx) - log_pi + 1.0)

    steps = 2000 + 500 * ka
    w_feas, _ = exponentiated_gradient(grad_g, g, np.full(ka, 1.0 / ka), steps, 1.0)
    w_feas, g_min = projected_descent(g, w_feas, steps=120)
    w_feas = np.clip(w_feas, 0.0, None)
    w_feas /= w_feas.sum()
    g_min = g(w_feas)
    if g_min > exponent + 1e-6:
        return MinRateResult(
            False, math.nan, math.inf, None, g_min, g_min - exponent, True
        )

    feas_tol = 1e-10
    candidates: list[tuple[np.ndarray, float, float]] = [(w_feas, g_min, float(c @ w_feas))]

    def restore(w: np.ndarray) -> None:
        """Pull an infeasible iterate back along the segment to w_feas; g is
        convex so feasibility along the segment is monotone enough to bisect."""
        gw = g(w)
        if gw <= exponent:
            candidates.append((w, gw, float(c @ w)))
            return
        lo, hi = 0.0, 1.0  # alpha: weight on w
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            wm = mid * w + (1.0 - mid) * w_feas
            if g(wm) <= exponent:
                lo = mid
            else:
                hi = mid
        wm = lo * w + (1.0 - lo) * w_feas
        candidates.append((wm, g(wm), float(c @ wm)))

    def solve(lam: float, warm: np.ndarray) -> np.ndarray:
        def h(w: np.ndarray) -> float:
            return float(c @ w) + lam * max(0.0, g(w) - exponent)

        def grad_h(w: np.ndarray) -> np.ndarray:
            base = c.astype(float).copy()
            if g(w) > exponent:
                base = base + lam * grad_g(w)
            return base

        scale = 1.0 + lam * max(1.0, float(np.abs(c).max() + 1.0))
        w, _ = exponentiated_gradient(grad_h, h, warm, steps, 4.0 / scale)
        w, _ = projected_descent(h, w, steps=120)
        w = np.clip(w, 0.0, None)
        return w / w.sum()

    warm = np.full(ka, 1.0 / ka)
    lam_hi = 1.0
    w_hi = solve(lam_hi, warm)
    restore(w_hi)
    growths = 0
    while g(w_hi) > exponent + feas_tol and lam_hi < 1e9:
        lam_hi *= 8.0
        w_hi = solve(lam_hi, w_hi)
        restore(w_hi)
        growths += 1
        if growths > 12:
            break
    lam_lo = 0.0
    for _ in range(10):
        lam_mid = 0.5 * (lam_lo + lam_hi)
        w_mid = solve(lam_mid, w_hi)
        restore(w_mid)
        if g(w_mid) > exponent + feas_tol:
            lam_lo = lam_mid
        else:
            lam_hi = lam_mid
            w_hi = w_mid

    feasible = [(w, gv, obj) for (w, gv, obj) in candidates if gv <= exponent + feas_tol]
    if not feasible:
        raise ConvergenceError(
            "no feasible candidate found despite feasible instance",
            residual=min(gv for _, gv, _ in candidates) - exponent,
        )
    w_best, g_best, obj_best = min(feasible, key=lambda item: item[2])
    q_full = np.zeros(k)
    q_full[active] = w_best
    rate = max(0.0, obj_best - exponent)
    residual = max(0.0, g_best - exponent)
    return MinRateResult(True, rate, obj_best, q_full, g_best, residual, True)
