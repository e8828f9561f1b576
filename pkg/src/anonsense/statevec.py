"""Brute-force dense state-vector path: the ground truth for small n.

States are dense complex vectors over the n-qubit computational basis.
Basis indexing: bit j-1 of the index integer is participant j's qubit
(participant 1 is the least-significant bit), matching the bit-vector
convention in :mod:`anonsense.combinatorics`.

This path exists purely for verification; it is capped at a qubit count
where dense vectors stay cheap.  The cap can be raised via the
``ANONSENSE_ORACLE_LIMIT`` environment variable.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .combinatorics import MINUS, PLUS, SIGNS, FieldVector
from .engine import (
    ConfigError,
    OutcomeDistribution,
    ProtocolConfig,
    _clamp,
    max_senders,
    validate_config,
)

DEFAULT_ORACLE_LIMIT = 20


class OracleLimitError(RuntimeError):
    """Raised when a dense computation would exceed the qubit cap."""


def oracle_limit() -> int:
    """Current qubit cap for dense vectors (env ANONSENSE_ORACLE_LIMIT overrides)."""
    raw = os.environ.get("ANONSENSE_ORACLE_LIMIT")
    if raw is None:
        return DEFAULT_ORACLE_LIMIT
    limit = int(raw)
    if limit < 1:
        raise ValueError(f"ANONSENSE_ORACLE_LIMIT must be >= 1, got {limit}")
    return limit


def _check_limit(n: int):
    limit = oracle_limit()
    if n > limit:
        raise OracleLimitError(
            f"n={n} exceeds the dense-vector limit {limit} "
            f"(set ANONSENSE_ORACLE_LIMIT to raise it)"
        )
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")


@dataclass(frozen=True)
class SenderAssignment:
    """Ground-truth secret: which participants host fields, and the fields.

    ``sender_positions`` are distinct 1-based participant indices; the j-th
    position carries the j-th amplitude of ``fields``.
    """

    n: int
    sender_positions: tuple[int, ...]
    fields: FieldVector

    def __post_init__(self):
        object.__setattr__(self, "sender_positions", tuple(int(p) for p in self.sender_positions))
        m = len(self.sender_positions)
        if len(set(self.sender_positions)) != m:
            raise ValueError(f"sender positions must be distinct: {self.sender_positions}")
        for p in self.sender_positions:
            if not 1 <= p <= self.n:
                raise ValueError(f"sender position {p} outside [1, {self.n}]")
        if self.fields.m != m:
            raise ValueError(f"{self.fields.m} field amplitudes for {m} sender positions")
        if m > max_senders(self.n):
            raise ValueError(f"m={m} exceeds floor((n+1)/2)={max_senders(self.n)} for n={self.n}")

    @property
    def m(self) -> int:
        return len(self.sender_positions)


def dicke_state(n: int, k: int) -> np.ndarray:
    """Equal superposition of all n-qubit basis states of Hamming weight k."""
    _check_limit(n)
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside [0, {n}]")
    amps = np.zeros(1 << n, dtype=np.complex128)
    weights = _hamming_weights(n)
    amps[weights == k] = 1.0 / math.sqrt(math.comb(n, k))
    return amps


def phi_state(n: int, k: int, sign: str) -> np.ndarray:
    """Normalized (|D_k> + sign |D_{n-k}>)/sqrt(2), for k <= floor(n/2).

    For n = 2k the '+' state is |D_{n/2}> itself and the '-' state does not
    exist; the latter is returned as the zero vector so that inner products
    with it vanish without special-casing callers.
    """
    if sign not in SIGNS:
        raise ValueError(f"sign must be one of {SIGNS}, got {sign!r}")
    if not 0 <= k <= n // 2:
        raise ValueError(f"k={k} outside [0, floor(n/2)={n // 2}]")
    if 2 * k == n:
        if sign == MINUS:
            _check_limit(n)
            return np.zeros(1 << n, dtype=np.complex128)
        return dicke_state(n, k)
    s = 1.0 if sign == PLUS else -1.0
    return (dicke_state(n, k) + s * dicke_state(n, n - k)) / math.sqrt(2)


def apply_sender_unitary(state: np.ndarray, assign: SenderAssignment) -> np.ndarray:
    """Apply the diagonal time-evolution phases of the sender fields.

    Basis state |x> picks up exp(-i t/2 * sum_j omega_j * (-1)^{x_{s_j}}),
    where x_{s_j} is the bit of x at sender position s_j.
    """
    n = assign.n
    if state.shape != (1 << n,):
        raise ValueError(f"state has {state.shape[0]} amplitudes, expected 2^{n}")
    idx = np.arange(1 << n)
    acc = np.zeros(1 << n)
    for pos, w in zip(assign.sender_positions, assign.fields.omegas):
        bit = (idx >> (pos - 1)) & 1
        acc = acc + w * (1.0 - 2.0 * bit)
    return state * np.exp(-0.5j * assign.fields.t * acc)


def oracle_distribution(assign: SenderAssignment, config: ProtocolConfig) -> OutcomeDistribution:
    """Outcome probabilities by direct inner products on dense vectors.

    Independent of the closed-form engine: probabilities are computed as
    sum_{i'} q[i'] |<phi_{i,sign}| U |phi_{i',+}>|^2 over the full mixture,
    with the residual 'f' completing the distribution.
    """
    violations = validate_config(config)
    if violations:
        raise ConfigError(violations)
    if config.n != assign.n:
        raise ValueError(f"config.n={config.n} != assignment n={assign.n}")
    n = config.n
    _check_limit(n)
    evolved = {
        ip: apply_sender_unitary(phi_state(n, ip, PLUS), assign)
        for ip in range(config.kmax + 1)
        if config.q[ip] > 0.0
    }
    probs: dict[str, float] = {}
    total = 0.0
    for i in range(config.kmax + 1):
        for sign in SIGNS:
            if not config.c(i, sign):
                continue
            proj = phi_state(n, i, sign)
            p = sum(
                config.q[ip] * abs(np.vdot(proj, st)) ** 2 for ip, st in evolved.items()
            )
            probs[f"{i}{sign}"] = _clamp(float(p))
            total += probs[f"{i}{sign}"]
    probs["f"] = _clamp(1.0 - total)
    return OutcomeDistribution(probs=probs)


def conditional_distributions(
    assign: SenderAssignment, config: ProtocolConfig
) -> dict[int, OutcomeDistribution]:
    """Outcome distribution conditioned on each initial-state index with q > 0.

    Used by round-by-round simulation, where the initial state is drawn from
    the mixture weights before each measurement.
    """
    violations = validate_config(config)
    if violations:
        raise ConfigError(violations)
    if config.n != assign.n:
        raise ValueError(f"config.n={config.n} != assignment n={assign.n}")
    n = config.n
    _check_limit(n)
    out: dict[int, OutcomeDistribution] = {}
    for ip in range(config.kmax + 1):
        if config.q[ip] <= 0.0:
            continue
        st = apply_sender_unitary(phi_state(n, ip, PLUS), assign)
        probs: dict[str, float] = {}
        total = 0.0
        for i in range(config.kmax + 1):
            for sign in SIGNS:
                if not config.c(i, sign):
                    continue
                p = abs(np.vdot(phi_state(n, i, sign), st)) ** 2
                probs[f"{i}{sign}"] = _clamp(float(p))
                total += probs[f"{i}{sign}"]
        probs["f"] = _clamp(1.0 - total)
        out[ip] = OutcomeDistribution(probs=probs)
    return out


def _hamming_weights(n: int) -> np.ndarray:
    """Hamming weight of every index 0..2^n-1."""
    idx = np.arange(1 << n, dtype=np.uint32)
    weights = np.zeros(1 << n, dtype=np.int8)
    for j in range(n):
        weights += ((idx >> j) & 1).astype(np.int8)
    return weights
