"""End-to-end protocol simulation and the anonymity (tracelessness) harness.

The roles are in-process: a distributer prepares the mixed initial state, the
participants' qubits accumulate field phases, and a measurer collects outcome
counts, estimates the phases, and broadcasts the result.  A transcript holds
everything any of them (and hence an eavesdropper) ever learns; by
construction it has no field that could store sender positions.

The verifier checks the anonymity claim exhaustively: it enumerates every
sender subset, computes each outcome distribution with the dense simulator,
and reports the largest pairwise total-variation distance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .combinatorics import FieldVector
from .engine import (
    ConfigError,
    OutcomeDistribution,
    ProtocolConfig,
    max_senders,
    outcome_distribution,
    validate_config,
)
from .estimation import EstimateReport, OutcomeCounts, mle_estimate
from .sampling import draw_counts, philox
from .statevec import (
    SenderAssignment,
    apply_sender_unitary,
    conditional_distributions,
    oracle_distribution,
    oracle_limit,
)

EXACT_TV_TOL = 1e-10
SAMPLED_P_THRESHOLD = 1e-3


@dataclass(frozen=True)
class Transcript:
    """Every piece of classical information the protocol produces.

    Deliberately cannot reference sender positions: the type has no field for
    them, so anything serialized from it is position-blind by construction.
    """

    config: ProtocolConfig
    rounds: int
    counts: dict[str, int]
    broadcast: EstimateReport
    seed: int


@dataclass(frozen=True)
class TracelessnessReport:
    """Outcome of comparing outcome distributions across sender subsets."""

    n: int
    m: int
    fields: FieldVector
    mode: str
    n_subsets: int
    max_tv_distance: float
    tolerance: float
    verdict: bool
    p_value: Optional[float] = None


def run_protocol(
    assign: SenderAssignment,
    config: ProtocolConfig,
    rounds: int,
    seed: int,
    path: str = "auto",
) -> Transcript:
    """Simulate one full protocol run and return the transcript.

    ``path`` selects how outcomes are generated: ``"oracle"`` samples the
    initial-state index per round from the mixture weights and then the
    outcome from that state's dense-vector distribution; ``"analytic"``
    samples directly from the closed-form mixture distribution.  ``"auto"``
    uses the oracle when n is within the dense-vector limit.  Both paths have
    identical statistics and are reproducible from the seed.
    """
    violations = validate_config(config)
    if violations:
        raise ConfigError(violations)
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    if config.n != assign.n:
        raise ValueError(f"config.n={config.n} != assignment n={assign.n}")
    if path == "auto":
        path = "oracle" if config.n <= oracle_limit() else "analytic"
    rng = philox(seed)
    if path == "oracle":
        conditionals = conditional_distributions(assign, config)
        weights = [config.q[i] for i in sorted(conditionals)]
        per_state = rng.multinomial(rounds, np.array(weights) / sum(weights))
        counts: dict[str, int] = {}
        for idx, i in enumerate(sorted(conditionals)):
            drawn = draw_counts(conditionals[i], int(per_state[idx]), rng)
            for label, c in drawn.items():
                counts[label] = counts.get(label, 0) + c
        labels = config.labels()
        counts = {label: counts.get(label, 0) for label in labels}
    elif path == "analytic":
        dist = outcome_distribution(config, assign.fields)
        counts = draw_counts(dist, rounds, rng)
    else:
        raise ValueError(f"unknown path {path!r}")
    broadcast = mle_estimate(OutcomeCounts(counts=counts, N=rounds), config)
    return Transcript(config=config, rounds=rounds, counts=counts, broadcast=broadcast, seed=seed)


def eavesdropper_view(transcript: Transcript) -> Transcript:
    """The eavesdropper's maximal view: the transcript itself.

    An identity by design; it exists to make the threat model explicit.  The
    transcript already contains all classical information produced by every
    role, and its schema has no sender-position field to leak.
    """
    assert not hasattr(transcript, "sender_positions")
    assert not hasattr(transcript, "assignment")
    return transcript


def sender_subsets(n: int, m: int) -> list[tuple[int, ...]]:
    """All size-m subsets of participant positions {1..n}, in lexicographic order."""
    return list(itertools.combinations(range(1, n + 1), m))


def verify_tracelessness(
    n: int,
    fields: FieldVector,
    config: ProtocolConfig,
    mode: str = "exact",
    rounds: int = 100_000,
    seed: int = 0,
    tolerance: float = EXACT_TV_TOL,
) -> TracelessnessReport:
    """Compare outcome distributions across ALL sender subsets.

    exact mode: each subset's distribution comes from the dense simulator and
    the report carries the maximum pairwise total-variation distance (pass iff
    it stays within ``tolerance``).

    sampled mode: draws ``rounds`` outcomes per subset and runs a chi-square
    homogeneity test across the subsets' empirical counts (pass iff the
    p-value is at least 1e-3).  Sampling uses the dense simulator when n is
    within its limit, otherwise the closed-form distribution (which takes no
    position input at all).
    """
    m = fields.m
    if m > max_senders(n):
        raise ValueError(f"m={m} exceeds floor((n+1)/2)={max_senders(n)} for n={n}")
    subsets = sender_subsets(n, m)
    if mode == "exact":
        dists = [
            oracle_distribution(SenderAssignment(n, subset, fields), config)
            for subset in subsets
        ]
        max_tv = _max_pairwise_tv(dists)
        return TracelessnessReport(
            n=n, m=m, fields=fields, mode=mode, n_subsets=len(subsets),
            max_tv_distance=max_tv, tolerance=tolerance, verdict=max_tv <= tolerance,
        )
    if mode == "sampled":
        labels = config.labels()
        table = []
        for j, subset in enumerate(subsets):
            if n <= oracle_limit():
                dist = oracle_distribution(SenderAssignment(n, subset, fields), config)
            else:
                dist = outcome_distribution(config, fields)
            drawn = draw_counts(dist, rounds, philox(seed, j))
            table.append([drawn[label] for label in labels])
        table_arr = np.array(table)
        table_arr = table_arr[:, table_arr.sum(axis=0) > 0]  # drop never-seen outcomes
        if table_arr.shape[1] <= 1:
            p_value = 1.0  # every subset produced the same single outcome
        else:
            _, p_value, _, _ = stats.chi2_contingency(table_arr)
        emp = table_arr / table_arr.sum(axis=1, keepdims=True)
        max_tv = 0.0
        for d1, d2 in itertools.combinations(emp, 2):
            max_tv = max(max_tv, 0.5 * float(np.abs(d1 - d2).sum()))
        return TracelessnessReport(
            n=n, m=m, fields=fields, mode=mode, n_subsets=len(subsets),
            max_tv_distance=max_tv, tolerance=tolerance,
            verdict=p_value >= SAMPLED_P_THRESHOLD, p_value=float(p_value),
        )
    raise ValueError(f"unknown mode {mode!r}")


def negative_control(
    n: int,
    fields: FieldVector,
    config: ProtocolConfig,
    tolerance: float = 0.01,
) -> TracelessnessReport:
    """Credibility check: a deliberately position-sensitive scheme must FAIL.

    The control runs a broken protocol variant: unentangled sensors (each
    qubit prepared in |+>) read out in the X basis at participant 1 only.
    Whether participant 1 hosts a field is then visible directly in the
    outcome rate, so the verifier must report a distance above ``tolerance``
    whenever the fields produce any signal at all.  A 'fail' verdict from
    this control is the expected, healthy result.
    """
    m = fields.m
    if m > max_senders(n):
        raise ValueError(f"m={m} exceeds floor((n+1)/2)={max_senders(n)} for n={n}")
    subsets = sender_subsets(n, m)
    dists = [_control_distribution(n, subset, fields) for subset in subsets]
    max_tv = _max_pairwise_tv(dists)
    return TracelessnessReport(
        n=n, m=m, fields=fields, mode="negative-control", n_subsets=len(subsets),
        max_tv_distance=max_tv, tolerance=tolerance, verdict=max_tv <= tolerance,
    )


def _control_distribution(n: int, subset: tuple[int, ...], fields: FieldVector) -> OutcomeDistribution:
    """Outcome distribution of the broken (non-anonymous) control scheme."""
    assign = SenderAssignment(n, subset, fields)
    plus_all = np.full(1 << n, 1.0 / math.sqrt(1 << n), dtype=np.complex128)
    state = apply_sender_unitary(plus_all, assign)
    idx = np.arange(1 << n)
    a0 = state[(idx & 1) == 0]
    a1 = state[(idx & 1) == 1]
    p_minus = float(np.sum(np.abs((a0 - a1) / math.sqrt(2.0)) ** 2))
    p_minus = min(max(p_minus, 0.0), 1.0)
    return OutcomeDistribution(probs={"pos1-": p_minus, "pos1+": 1.0 - p_minus})


def _max_pairwise_tv(dists: list[OutcomeDistribution]) -> float:
    max_tv = 0.0
    for d1, d2 in itertools.combinations(dists, 2):
        max_tv = max(max_tv, d1.tv_distance(d2))
    return max_tv
