"""Exact finite-alphabet probability arithmetic.

Distributions and channels are stored as linear-domain mass vectors;
likelihood ratios and thresholds are handled in the log domain so that
exponentially large thresholds never overflow. All logarithms are natural
(values are in nats); the command line layer converts to bits for display.

Conventions:
  * 0 * log(0/q) = 0 everywhere.
  * log(p/0) = +inf when p > 0, log(0/q) = -inf when q > 0.
  * A 0/0 density is flagged as NaN ("outside both supports"), never
    silently treated as 0; mass-weighted sums mask those symbols out
    because they carry no probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, ValidationError

MASS_TOL = 1e-12
FLAT_CAP = 1 << 24
CHANNEL_ENTRY_CAP = 1 << 27


def _as_mass_vector(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{what}: expected a nonempty 1-D mass vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what}: masses must be finite")
    if np.any(arr < 0):
        raise ValidationError(f"{what}: masses must be nonnegative")
    total = float(arr.sum())
    residual = total - 1.0
    if abs(residual) > MASS_TOL:
        raise ValidationError(
            f"{what}: masses sum to {total:.17g} (residual {residual:.3g})"
        )
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Distribution:
    """Probability mass function over a finite alphabet.

    Masses are nonnegative and sum to 1 within 1e-12. The array is frozen
    after construction, so instances are safe to share across workers.
    """

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _as_mass_vector(self.probs, "probs"))

    @property
    def alphabet_size(self) -> int:
        return int(self.probs.size)

    @classmethod
    def uniform(cls, size: int) -> "Distribution":
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def point_mass(cls, index: int, size: int) -> "Distribution":
        if not 0 <= index < size:
            raise ValidationError(f"point mass index {index} outside [0, {size})")
        probs = np.zeros(size)
        probs[index] = 1.0
        return cls(probs)

    def log_probs(self) -> np.ndarray:
        """Elementwise log-mass, -inf at zero-mass symbols."""
        with np.errstate(divide="ignore"):
            return np.log(self.probs)

    def __eq__(self, other) -> bool:
        return isinstance(other, Distribution) and np.array_equal(
            self.probs, other.probs
        )

    def __hash__(self):
        return hash(self.probs.tobytes())


@dataclass(frozen=True)
class Channel:
    """Row-indexed family of conditional distributions.

    ``matrix[u, x]`` is the probability of output ``x`` given input ``u``;
    every row is itself a valid mass vector.
    """

    matrix: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.matrix, dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise ValidationError("rows: expected a nonempty 2-D stochastic matrix")
        for u in range(arr.shape[0]):
            _as_mass_vector(arr[u], f"rows[{u}]")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "matrix", arr)

    @property
    def input_size(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def output_size(self) -> int:
        return int(self.matrix.shape[1])

    def row(self, u: int) -> Distribution:
        if not 0 <= u < self.input_size:
            raise ValidationError(f"row index {u} outside [0, {self.input_size})")
        return Distribution(self.matrix[u])

    @classmethod
    def identity(cls, size: int) -> "Channel":
        return cls(np.eye(size))

    @classmethod
    def constant(cls, output: Distribution, input_size: int) -> "Channel":
        return cls(np.tile(output.probs, (input_size, 1)))

    @classmethod
    def binary_symmetric(cls, flip: float) -> "Channel":
        if not 0.0 <= flip <= 1.0:
            raise ValidationError("flip probability must lie in [0, 1]")
        return cls(np.array([[1.0 - flip, flip], [flip, 1.0 - flip]]))

    def __eq__(self, other) -> bool:
        return isinstance(other, Channel) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


@dataclass(frozen=True)
class ProductIndex:
    """Bijection between length-n symbol tuples and flat indices.

    Tuples are encoded big-endian: the first letter is the most significant
    digit, matching the ordering produced by iterated Kronecker products.
    """

    base_size: int
    n: int

    def __post_init__(self):
        if self.base_size < 1 or self.n < 1:
            raise ValidationError("base_size and n must be positive")
        check_flat_capacity(self.base_size, self.n)

    @property
    def flat_size(self) -> int:
        return self.base_size**self.n

    def encode(self, symbols: Sequence[int]) -> int:
        if len(symbols) != self.n:
            raise ValidationError(f"expected {self.n} symbols, got {len(symbols)}")
        flat = 0
        for s in symbols:
            if not 0 <= s < self.base_size:
                raise ValidationError(f"symbol {s} outside [0, {self.base_size})")
            flat = flat * self.base_size + int(s)
        return flat

    def decode(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.flat_size:
            raise ValidationError(f"flat index {index} outside [0, {self.flat_size})")
        digits = []
        for _ in range(self.n):
            digits.append(index % self.base_size)
            index //= self.base_size
        return tuple(reversed(digits))

    def decode_all(self) -> np.ndarray:
        """(flat_size, n) matrix whose row i is the digit tuple of index i."""
        idx = np.arange(self.flat_size)
        out = np.empty((self.flat_size, self.n), dtype=np.int64)
        for pos in range(self.n):
            out[:, pos] = (idx // self.base_size ** (self.n - 1 - pos)) % self.base_size
        return out


def check_flat_capacity(base_size: int, n: int) -> int:
    """Return base_size**n, or raise once the flat alphabet exceeds 2**24."""
    flat = base_size**n
    if flat > FLAT_CAP:
        raise CapacityError(
            f"flat alphabet {base_size}^{n} = {flat} exceeds the enumeration cap "
            f"{FLAT_CAP}; use the Monte Carlo paths instead"
        )
    return flat


def push_forward(dist: Distribution, ch: Channel) -> Distribution:
    """Output marginal of ``dist`` sent through ``ch``."""
    if dist.alphabet_size != ch.input_size:
        raise ValidationError(
            f"input alphabet {dist.alphabet_size} does not match channel "
            f"input size {ch.input_size}"
        )
    return Distribution(dist.probs @ ch.matrix)


def product_power(p: Distribution, n: int) -> Distribution:
    """n-fold product distribution over the flat big-endian index."""
    if n < 1:
        raise ValidationError("n must be positive")
    check_flat_capacity(p.alphabet_size, n)
    probs = reduce(np.kron, [p.probs] * n)
    return Distribution(probs)


def channel_power(ch: Channel, n: int) -> Channel:
    """Memoryless n-fold extension of ``ch`` on flat tuple alphabets."""
    if n < 1:
        raise ValidationError("n must be positive")
    check_flat_capacity(ch.input_size, n)
    check_flat_capacity(ch.output_size, n)
    entries = (ch.input_size**n) * (ch.output_size**n)
    if entries > CHANNEL_ENTRY_CAP:
        raise CapacityError(
            f"channel power would hold {entries} entries, above the cap "
            f"{CHANNEL_ENTRY_CAP}"
        )
    return Channel(reduce(np.kron, [ch.matrix] * n))


def product_row(ch: Channel, letters: Iterable[int]) -> np.ndarray:
    """Row of the n-fold channel power for one input tuple, without
    materializing the full matrix."""
    rows = [ch.matrix[int(u)] for u in letters]
    if not rows:
        raise ValidationError("empty input tuple")
    check_flat_capacity(ch.output_size, len(rows))
    return reduce(np.kron, rows)


def relative_entropy(p: Distribution, q: Distribution) -> float:
    """D(p || q) in nats; +inf when p is not absolutely continuous w.r.t. q."""
    _check_same_alphabet(p, q)
    mask = p.probs > 0
    if np.any(q.probs[mask] == 0):
        return math.inf
    pm = p.probs[mask]
    val = float(np.sum(pm * (np.log(pm) - np.log(q.probs[mask]))))
    return val if val > 0.0 else 0.0


def entropy(p: Distribution) -> float:
    """Shannon entropy in nats."""
    mask = p.probs > 0
    return float(-np.sum(p.probs[mask] * np.log(p.probs[mask])))


def mutual_information(q_u: Distribution, ch: Channel) -> float:
    """I(U; X) of the joint q_u(u) ch(x|u), in nats."""
    q_x = push_forward(q_u, ch)
    total = 0.0
    for u in range(ch.input_size):
        w = q_u.probs[u]
        if w == 0:
            continue
        total += w * relative_entropy(Distribution(ch.matrix[u]), q_x)
    return total if total > 0.0 else 0.0


def information_density(p: Distribution, q: Distribution) -> np.ndarray:
    """Per-symbol log-likelihood ratio log(p(x)/q(x)).

    +inf where only p has mass, -inf where only q has mass, NaN where
    neither does (outside both supports).
    """
    _check_same_alphabet(p, q)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(p.probs) - np.log(q.probs)


def joint_information_density(q_u: Distribution, ch: Channel) -> np.ndarray:
    """Matrix of log(ch(x|u) / q_x(x)) with q_x the pushforward of q_u.

    Entries where ch(x|u) and q_x(x) both vanish are NaN; they carry no
    joint mass.
    """
    q_x = push_forward(q_u, ch)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(ch.matrix) - np.log(q_x.probs)[None, :]


def joint_distribution(p: Distribution, ch: Channel) -> Distribution:
    """Joint law p(u) ch(x|u) flattened input-major."""
    if p.alphabet_size != ch.input_size:
        raise ValidationError("joint: input alphabet does not match channel")
    return Distribution((p.probs[:, None] * ch.matrix).ravel())


def product_distribution(p: Distribution, q: Distribution) -> Distribution:
    """Independent product p x q flattened with p-major indexing."""
    return Distribution(np.kron(p.probs, q.probs))


def _check_same_alphabet(p: Distribution, q: Distribution) -> None:
    if p.alphabet_size != q.alphabet_size:
        raise ValidationError(
            f"alphabet mismatch: {p.alphabet_size} vs {q.alphabet_size}"
        )
