"""Deterministic local strategies and exhaustive classical bounds.

A deterministic strategy assigns one fixed outcome to every setting of each
party; these are the extreme points of the local polytope, so the maximum of
a Bell expression over them is its maximum over all local models (convexity).
For ``n`` settings per party there are ``4^n`` strategies; enumeration is
capped at ``n <= 12`` and evaluates expressions by direct coefficient
matching in fixed-size chunks, never materializing behavior tensors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator, NamedTuple

import numpy as np

from .scenario import (
    SCHEMA_VERSION,
    Behavior,
    BellExpression,
    Scenario,
    TOLERANCES,
    ValidationError,
)

if TYPE_CHECKING:
    from .hardy import HardyParadox

MAX_SETTINGS = 12  # 4^12 = 16.7M joint strategies
_CHUNK = 1 << 14


class CapacityError(ValidationError):
    """The scenario exceeds the exhaustive-enumeration limit."""


@dataclass(frozen=True)
class DeterministicStrategy:
    """Fixed outcome per setting for each party.

    ``a[x - 1]`` is Alice's outcome for setting ``x``; ``b`` likewise for Bob.
    """

    a: tuple[int, ...]
    b: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.a) != len(self.b):
            raise ValidationError("strategy maps must cover the same settings")
        if not all(v in (0, 1) for v in self.a + self.b):
            raise ValidationError("strategy outcomes must be 0 or 1")

    def alice(self, x: int) -> int:
        return self.a[x - 1]

    def bob(self, y: int) -> int:
        return self.b[y - 1]

    def to_json_dict(self) -> dict:
        return {"a": list(self.a), "b": list(self.b)}


def _check_capacity(scenario: Scenario) -> None:
    if scenario.n_settings > MAX_SETTINGS:
        raise CapacityError(
            f"exhaustive enumeration is limited to n_settings <= {MAX_SETTINGS} "
            f"(4^n strategies); got n_settings = {scenario.n_settings}"
        )


def _bits(values: np.ndarray, n: int) -> np.ndarray:
    """Decode integers to outcome arrays, setting 1 in the leading position."""
    shifts = np.arange(n - 1, -1, -1)
    return (values[:, None] >> shifts[None, :]) & 1


def enumerate_strategies(scenario: Scenario) -> Iterator[DeterministicStrategy]:
    """Yield all ``4^n`` deterministic strategies exactly once.

    Order is lexicographic in the concatenated outcome tuple
    ``(a(1), ..., a(n), b(1), ..., b(n))``.
    """
    _check_capacity(scenario)
    n = scenario.n_settings
    for a_code in range(1 << n):
        a = tuple((a_code >> (n - 1 - k)) & 1 for k in range(n))
        for b_code in range(1 << n):
            b = tuple((b_code >> (n - 1 - k)) & 1 for k in range(n))
            yield DeterministicStrategy(a, b)


def behavior_of(strategy: DeterministicStrategy, scenario: Scenario) -> Behavior:
    """The deterministic behavior ``p(ij|xy) = [i = a(x)][j = b(y)]``."""
    n = scenario.n_settings
    if len(strategy.a) != n:
        raise ValidationError(
            f"strategy covers {len(strategy.a)} settings, scenario has {n}"
        )
    p = np.zeros((n, n, 2, 2))
    for x in range(n):
        for y in range(n):
            p[x, y, strategy.a[x], strategy.b[y]] = 1.0
    return Behavior(scenario, p)


def _expression_arrays(expr: BellExpression):
    keys = list(expr.items())
    i = np.array([k[0] for k, _ in keys], dtype=np.int64)
    j = np.array([k[1] for k, _ in keys], dtype=np.int64)
    x = np.array([k[2] - 1 for k, _ in keys], dtype=np.int64)
    y = np.array([k[3] - 1 for k, _ in keys], dtype=np.int64)
    c = np.array([v for _, v in keys], dtype=float)
    return i, j, x, y, c


def _chunk_values(
    exprs: list[tuple],
    codes: np.ndarray,
    n: int,
) -> list[np.ndarray]:
    """Evaluate several compiled expressions on a chunk of strategy codes."""
    a_bits = _bits(codes >> n, n)
    b_bits = _bits(codes & ((1 << n) - 1), n)
    out = []
    for (ti, tj, tx, ty, tc) in exprs:
        hits = (a_bits[:, tx] == ti[None, :]) & (b_bits[:, ty] == tj[None, :])
        out.append(hits @ tc)
    return out


def _strategy_from_code(code: int, n: int) -> DeterministicStrategy:
    a = tuple((int(code) >> (2 * n - 1 - k)) & 1 for k in range(n))
    b = tuple((int(code) >> (n - 1 - k)) & 1 for k in range(n))
    return DeterministicStrategy(a, b)


class ClassicalMax(NamedTuple):
    value: float
    maximizers: tuple[DeterministicStrategy, ...]


def classical_max(expr: BellExpression) -> ClassicalMax:
    """Maximum of ``expr`` over all deterministic strategies, with all
    maximizers (within ``TOLERANCES.saturation``) in enumeration order."""
    scenario = expr.scenario
    _check_capacity(scenario)
    n = scenario.n_settings
    arrays = _expression_arrays(expr)
    total = 1 << (2 * n)

    best = -np.inf
    best_codes: list[int] = []
    tol = TOLERANCES.saturation
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        values = _chunk_values([arrays], codes, n)[0]
        chunk_best = values.max()
        if chunk_best > best + tol:
            best = chunk_best
            best_codes = [int(c) for c in codes[values >= best - tol]]
        elif chunk_best >= best - tol:
            best = max(best, chunk_best)
            best_codes.extend(int(c) for c in codes[values >= best - tol])
    # A late chunk may raise `best`; re-filter retained codes at the final value.
    survivors = []
    for code in best_codes:
        strat = _strategy_from_code(code, n)
        value = _strategy_value(arrays, strat)
        if value >= best - tol:
            survivors.append(strat)
    return ClassicalMax(float(best), tuple(survivors))


def _strategy_value(arrays, strategy: DeterministicStrategy) -> float:
    ti, tj, tx, ty, tc = arrays
    a = np.array(strategy.a)
    b = np.array(strategy.b)
    hits = (a[tx] == ti) & (b[ty] == tj)
    return float(tc @ hits)


@dataclass(frozen=True)
class SoundnessReport:
    """Outcome of the exhaustive Hardy soundness check.

    ``sound`` is true iff every deterministic strategy that saturates all
    condition targets has zero probability on the Hardy term.  Soundness over
    extreme points extends to mixtures: the condition value is a maximum, so
    a mixture attains it only if every strategy in its support does.
    """

    paradox_id: str
    n: int
    checked: int
    saturating: int
    counterexamples: tuple[DeterministicStrategy, ...]

    @property
    def sound(self) -> bool:
        return not self.counterexamples

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "soundness_report",
            "paradox_id": self.paradox_id,
            "n": self.n,
            "checked": self.checked,
            "saturating": self.saturating,
            "counterexamples": [s.to_json_dict() for s in self.counterexamples],
            "sound": self.sound,
        }


def certify_hardy_soundness(paradox: "HardyParadox") -> SoundnessReport:
    """Check every deterministic strategy saturating the paradox conditions.

    A counterexample is a strategy whose condition values all equal their
    targets within ``TOLERANCES.saturation`` yet whose Hardy-term probability
    is 1 (deterministic behaviors only take values 0 or 1 there).
    """
    scenario = paradox.scenario
    _check_capacity(scenario)
    n = scenario.n_settings
    cond_arrays = [_expression_arrays(expr) for expr, _ in paradox.conditions]
    targets = [target for _, target in paradox.conditions]
    hi, hj, hx, hy = paradox.hardy_term
    total = 1 << (2 * n)
    tol = TOLERANCES.saturation

    saturating = 0
    counterexamples: list[DeterministicStrategy] = []
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        values = _chunk_values(cond_arrays, codes, n)
        mask = np.ones(len(codes), dtype=bool)
        for vals, target in zip(values, targets):
            mask &= np.abs(vals - target) <= tol
        if not mask.any():
            continue
        saturating += int(mask.sum())
        a_bits = _bits(codes[mask] >> n, n)
        b_bits = _bits(codes[mask] & ((1 << n) - 1), n)
        hardy_hit = (a_bits[:, hx - 1] == hi) & (b_bits[:, hy - 1] == hj)
        for code in codes[mask][hardy_hit]:
            counterexamples.append(_strategy_from_code(int(code), n))

    return SoundnessReport(
        paradox_id=paradox.paradox_id,
        n=n,
        checked=total,
        saturating=saturating,
        counterexamples=tuple(counterexamples),
    )
