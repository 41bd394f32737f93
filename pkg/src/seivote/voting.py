"""Sequential Bayesian vote accumulation and stopping rules.

A stream of classifier votes is reduced to per-category counts.  With a
uniform prior, the unknown per-category probabilities given counts k are
Beta/Dirichlet distributed with parameters k + 1, and the regularized
incomplete Beta function I_x(a, b) measures how certain we are that a
category commands a true majority of the voter population.  Votes
accumulate one at a time until that certainty reaches 1 - acceptable_error.

Two stopping rules are provided:

* ``preponderance`` -- certainty that the category's probability exceeds
  0.5 after merging all rivals into one: 1 - I_0.5(k_i + 1, n - k_i + 1).
* ``favored`` -- certainty that the category beats every rival pairwise,
  with the pairwise error probabilities summed (a conservative union
  bound): 1 - sum_j I_0.5(k_i + 1, k_j + 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Literal, Optional

Rule = Literal["preponderance", "favored"]

# Continued-fraction controls for the incomplete Beta evaluation.
_CF_TOL = 1e-14
_CF_MAX_ITER = 500
_CF_TINY = 1e-300


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Evaluate the continued fraction for I_x(a, b) by the modified
    Lentz method.  Only called with x < (a + 1) / (a + b + 2), where the
    fraction converges quickly.
    """
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        # Even step.
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        # Odd step.
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            return h
    raise ValueError(
        f"incomplete Beta continued fraction did not converge for "
        f"a={a}, b={b}, x={x} within {_CF_MAX_ITER} iterations"
    )


def _stirling_delta(x: float) -> float:
    # lgamma(x) - [(x - 1/2) ln x - x + ln(2 pi)/2]; series valid for x >= 30.
    inv = 1.0 / x
    inv2 = inv * inv
    return inv * (
        1.0 / 12.0
        - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0)))
    )


def _ln_front(a: float, b: float, x: float) -> float:
    """log of x^a (1-x)^b / B(a, b), grouped to avoid the catastrophic
    cancellation a plain lgamma difference suffers at large parameters."""
    t = a + b
    if a >= 30.0 and b >= 30.0:
        return (
            a * math.log(x * t / a)
            + b * math.log((1.0 - x) * t / b)
            + 0.5 * math.log(a * b / (2.0 * math.pi * t))
            + _stirling_delta(t)
            - _stirling_delta(a)
            - _stirling_delta(b)
        )
    if max(a, b) >= 30.0:
        s, big = min(a, b), max(a, b)
        lgamma_diff = (
            (big - 0.5) * math.log1p(s / big)
            + s * math.log(t)
            - s
            + _stirling_delta(t)
            - _stirling_delta(big)
        )
        return a * math.log(x) + b * math.log1p(-x) - math.lgamma(s) + lgamma_diff
    return (
        math.lgamma(t)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )


def reg_incomplete_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete Beta function I_x(a, b).

    This is the CDF of the Beta(a, b) distribution evaluated at x.
    Computed via the continued fraction on whichever side of the
    symmetry point (a + 1) / (a + b + 2) converges fastest, using
    I_x(a, b) = 1 - I_{1-x}(b, a) on the far side.

    Raises ValueError for x outside [0, 1] or non-positive/non-finite
    parameters.
    """
    if not (math.isfinite(a) and math.isfinite(b)) or a <= 0.0 or b <= 0.0:
        raise ValueError(f"Beta parameters must be positive and finite, got a={a}, b={b}")
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    if x == 0.5 and a == b:
        return 0.5  # exact by symmetry
    ln_front = _ln_front(a, b, x)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(ln_front) * _beta_continued_fraction(a, b, x) / a
    return 1.0 - math.exp(ln_front) * _beta_continued_fraction(b, a, 1.0 - x) / b


@lru_cache(maxsize=1_000_000)
def _beta_half(a: int, b: int) -> float:
    # Hot path of the stopping rules: x is always 0.5 and the parameters
    # are small integers, so results are memoized.
    return reg_incomplete_beta(0.5, float(a), float(b))


@dataclass(frozen=True)
class VoteTally:
    """Immutable per-category vote counts."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.counts) < 2:
            raise ValueError("a tally needs at least 2 categories")
        if any(c < 0 for c in self.counts):
            raise ValueError(f"vote counts must be non-negative, got {self.counts}")
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))

    @classmethod
    def empty(cls, num_categories: int) -> "VoteTally":
        return cls((0,) * num_categories)

    @property
    def num_categories(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class StoppingConfig:
    """Stopping-rule settings.

    ``acceptable_error`` is the prescribed maximum probability that the
    declared winner is not the true population-preferred category.
    ``sum_rival_parameters`` switches the preponderance Beta to the
    Dirichlet-marginal variant Beta(k + 1, n - k + N - 1), which sums the
    rivals' parameters instead of their counts; kept for study, off by
    default.
    """

    acceptable_error: float
    rule: Rule = "preponderance"
    max_votes: int = 10000
    sum_rival_parameters: bool = False

    def __post_init__(self):
        if not (0.0 < self.acceptable_error < 0.5):
            raise ValueError(
                f"acceptable_error must lie in (0, 0.5), got {self.acceptable_error}"
            )
        if self.rule not in ("preponderance", "favored"):
            raise ValueError(f"unknown rule {self.rule!r}")
        if self.max_votes < 1:
            raise ValueError("max_votes must be positive")


@dataclass(frozen=True)
class Decision:
    """Outcome of a sequential identification."""

    winner: int
    votes_used: int
    achieved_certainty: float
    rule: Rule
    conclusive: bool
    exhausted: bool = False


def record_vote(tally: VoteTally, category: int) -> VoteTally:
    """Return a new tally with one more vote for ``category``."""
    if not (0 <= category < tally.num_categories):
        raise ValueError(f"category {category} out of range [0, {tally.num_categories})")
    counts = list(tally.counts)
    counts[category] += 1
    return VoteTally(tuple(counts))


def _check_index(tally: VoteTally, category: int) -> None:
    if not (0 <= category < tally.num_categories):
        raise ValueError(f"category {category} out of range [0, {tally.num_categories})")


def preponderance_certainty(
    tally: VoteTally, category: int, sum_rival_parameters: bool = False
) -> float:
    """P(category's population probability > 0.5) given the tally.

    All rivals are merged into a single opposing category before the
    k + 1 convention is applied, giving 1 - I_0.5(k + 1, n - k + 1).
    """
    _check_index(tally, category)
    k = tally.counts[category]
    n = tally.total
    if sum_rival_parameters:
        b = n - k + tally.num_categories - 1
    else:
        b = n - k + 1
    return 1.0 - _beta_half(k + 1, b)


def favored_certainty(tally: VoteTally, category: int) -> float:
    """Certainty that ``category`` beats each rival pairwise.

    For each rival j the pairwise error I_0.5(k_i + 1, k_j + 1) comes from
    the two-category sub-composition of the Dirichlet posterior restricted
    to {i, j}; the errors are summed (union bound) and clipped at 1.
    """
    _check_index(tally, category)
    k = tally.counts[category]
    err = sum(
        _beta_half(k + 1, kj + 1)
        for j, kj in enumerate(tally.counts)
        if j != category
    )
    return max(0.0, 1.0 - err)


def _certainty(tally: VoteTally, category: int, config: StoppingConfig) -> float:
    if config.rule == "favored":
        return favored_certainty(tally, category)
    return preponderance_certainty(tally, category, config.sum_rival_parameters)


def check_stop(
    tally: VoteTally, config: StoppingConfig
) -> Optional[tuple[int, float]]:
    """Return (winner, certainty) if some category's certainty reaches
    1 - acceptable_error, else None.  Ties break toward higher certainty,
    then lower index.

    Under both rules only categories holding the maximum count can reach a
    certainty above 0.5 (certainty is monotone in the category's count),
    and 1 - acceptable_error > 0.5, so only those are evaluated.
    """
    max_count = max(tally.counts)
    best: Optional[tuple[int, float]] = None
    for i, c in enumerate(tally.counts):
        if c != max_count:
            continue
        certainty = _certainty(tally, i, config)
        if best is None or certainty > best[1]:
            best = (i, certainty)
    assert best is not None
    if best[1] >= 1.0 - config.acceptable_error:
        return best
    return None


def decide_sequential(
    vote_source: Iterable[int], num_categories: int, config: StoppingConfig
) -> Decision:
    """Consume votes one at a time until the stopping rule fires.

    Returns a conclusive Decision when some category reaches the required
    certainty, or an inconclusive one (winner = current argmax count) when
    ``max_votes`` is reached or the vote source is exhausted first.
    """
    if num_categories < 2:
        raise ValueError("need at least 2 categories")
    counts = [0] * num_categories
    votes_used = 0
    exhausted = False
    it = iter(vote_source)
    while votes_used < config.max_votes:
        try:
            vote = next(it)
        except StopIteration:
            exhausted = True
            break
        vote = int(vote)
        if not (0 <= vote < num_categories):
            raise ValueError(f"vote {vote} out of range [0, {num_categories})")
        counts[vote] += 1
        votes_used += 1
        tally = VoteTally(tuple(counts))
        stop = check_stop(tally, config)
        if stop is not None:
            winner, certainty = stop
            return Decision(
                winner=winner,
                votes_used=votes_used,
                achieved_certainty=certainty,
                rule=config.rule,
                conclusive=True,
            )
    # Inconclusive: report the current leader and its certainty.
    winner = max(range(num_categories), key=lambda i: (counts[i], -i))
    if votes_used > 0:
        certainty = _certainty(VoteTally(tuple(counts)), winner, config)
    else:
        certainty = 0.5
    return Decision(
        winner=winner,
        votes_used=votes_used,
        achieved_certainty=certainty,
        rule=config.rule,
        conclusive=False,
        exhausted=exhausted,
    )
