"""Harmonic certificates of non-stabilizability.

The expected one-step displacement of every action forms the drift matrix
D. A nonzero rational weight vector alpha with D alpha = 0 makes the
weighted queue length a martingale under every non-idling policy; if in
addition every action can actually change the weighted length (the
non-degeneracy condition), no policy can make the network positive
recurrent. This module computes D exactly, tests the rank condition,
produces closed-form weight vectors for the built-in families, and
packages the result as a machine-checkable certificate.

Everything here is exact rational arithmetic; the simulator corroborates
verdicts statistically but plays no role in them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Sequence

from . import exactla
from .netmodel import (
    NetworkSpec,
    PushPullMeta,
    ReentrantMeta,
    RingMeta,
    format_rational,
    index_sets,
)


class UnsupportedFamilyError(ValueError):
    """The requested computation is undefined for this network family."""


@dataclass(frozen=True)
class DriftMatrix:
    """Per-action expected displacements, one row per action."""

    rows: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        for row in self.rows:
            for entry in row:
                if abs(entry) > 1:
                    raise ValueError(f"drift entry {entry} out of [-1, 1]")

    @property
    def n_actions(self) -> int:
        return len(self.rows)

    @property
    def n_queues(self) -> int:
        return len(self.rows[0]) if self.rows else 0


@dataclass(frozen=True)
class SignMatrix:
    """Element-wise signs of a drift matrix."""

    rows: tuple[tuple[int, ...], ...]

    @property
    def n_actions(self) -> int:
        return len(self.rows)

    @property
    def n_queues(self) -> int:
        return len(self.rows[0]) if self.rows else 0


class Verdict(Enum):
    NON_STABILIZABLE = "non-stabilizable"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class HarmonicCertificate:
    """Outcome of a certification run.

    ``alpha`` is the canonical integer form of the harmonic weight vector
    when one was found, else None. The verdict is NON_STABILIZABLE exactly
    when ``dalpha_zero`` and ``nondeg_direct`` both hold. The condition is
    sufficient, not necessary, so INCONCLUSIVE never asserts stability.
    """

    verdict: Verdict
    alpha: tuple[Fraction, ...] | None
    dalpha_zero: bool
    nondeg_direct: bool
    nondeg_lemma: bool
    rank: int
    n_queues: int
    n_actions: int
    critical: bool | None
    null_space_basis: tuple[tuple[int, ...], ...]

    def to_json_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "rank": self.rank,
            "M": self.n_queues,
            "L": self.n_actions,
            "alpha": None
            if self.alpha is None
            else [format_rational(x) for x in self.alpha],
            "nondegeneracy": {"direct": self.nondeg_direct, "lemma": self.nondeg_lemma},
            "critical": self.critical,
            "null_space_basis": [
                [format_rational(Fraction(x)) for x in vec] for vec in self.null_space_basis
            ],
        }


def drift_matrix(net: NetworkSpec) -> DriftMatrix:
    """Expected displacement of each action, rows in action-id order.

    Rows with zero drift (balanced actions) are kept so the matrix shape
    stays L x M.
    """
    rows = []
    for act in net.actions:
        row = [Fraction(0)] * net.n_queues
        for d, rate in act.outcomes:
            w = rate / act.total_rate
            for k, x in enumerate(d):
                if x:
                    row[k] += w if x > 0 else -w
        rows.append(tuple(row))
    return DriftMatrix(tuple(rows))


def rank(d: DriftMatrix) -> int:
    """Exact rank over the rationals."""
    return exactla.rational_rank(d.rows)


def null_space_basis(d: DriftMatrix) -> list[tuple[int, ...]]:
    """Canonical integer basis of {alpha : D alpha = 0}."""
    return exactla.rational_null_space(d.rows, d.n_queues)


def sign_matrix(d: DriftMatrix) -> SignMatrix:
    return SignMatrix(
        tuple(tuple(0 if x == 0 else (1 if x > 0 else -1) for x in row) for row in d.rows)
    )


def _row_sign_pattern_ok(row: Sequence[int], n: int) -> bool:
    nonzero = [i for i, x in enumerate(row) if x]
    if not nonzero:
        return True
    m = len(nonzero)
    for k in range(m):
        a = nonzero[k]
        b = nonzero[(k + 1) % m]
        gap = (b - a - 1) % n
        same_sign = row[a] == row[b]
        if same_sign != (gap % 2 == 0):
            return False
    return True


def verify_sign_pattern(dhat: SignMatrix) -> bool:
    """Cyclic parity check on every sign row.

    Between consecutive nonzero entries (queues are treated cyclically, as
    in a ring), the number of interleaved zeros must be even when the two
    signs agree and odd when they differ. All-zero rows pass vacuously.
    """
    return all(_row_sign_pattern_ok(row, dhat.n_queues) for row in dhat.rows)


def _check_alpha(net: NetworkSpec, alpha: Sequence[Fraction | int]) -> tuple[Fraction, ...]:
    vec = tuple(Fraction(x) for x in alpha)
    if len(vec) != net.n_queues:
        raise ValueError(f"alpha has length {len(vec)}, expected {net.n_queues}")
    if all(x == 0 for x in vec):
        raise ValueError("alpha must be nonzero")
    return vec


def check_nondegeneracy_direct(net: NetworkSpec, alpha: Sequence[Fraction | int]) -> bool:
    """True iff every action can change the alpha-weighted queue length.

    Because displacement distributions are state independent, this per
    action support condition is equivalent to requiring, at every state
    and available action, a positive probability of changing alpha'X.
    """
    vec = _check_alpha(net, alpha)
    for act in net.actions:
        if all(exactla.dot(vec, d) == 0 for d in act.support):
            return False
    return True


def check_nondegeneracy_lemma(net: NetworkSpec, alpha: Sequence[Fraction | int]) -> bool:
    """Sufficient index-set test: nonzero on external queues, separating on transfers."""
    vec = _check_alpha(net, alpha)
    sets = index_sets(net)
    if any(vec[i] == 0 for i in sets.external):
        return False
    if any(vec[i] == vec[j] for i, j in sets.transfers):
        return False
    return True


def is_critical(net: NetworkSpec) -> bool:
    """Exact criticality test for the built-in families.

    Push-pull and ring networks are critical when each stream's push and
    pull rates coincide. A re-entrant network is critical when, for every
    stream, the two servers carry equal total mean work per job (equal
    sums of inverse rates).
    """
    if isinstance(net.meta, (PushPullMeta, RingMeta)):
        return net.meta.push_rates == net.meta.pull_rates
    if isinstance(net.meta, ReentrantMeta):
        for stream in net.meta.streams:
            sums = {1: Fraction(0), 2: Fraction(0)}
            for server, rate in stream:
                sums[server] += 1 / rate
            if sums[1] != sums[2]:
                return False
        return True
    raise UnsupportedFamilyError("criticality is undefined for custom networks")


def ring_alpha_even(net: NetworkSpec) -> tuple[Fraction, ...]:
    """Closed-form harmonic weights for a critical ring with evenly many servers.

    Alternating signed inverse push rates: (+1/lam_1, -1/lam_2, ...).
    """
    if not isinstance(net.meta, RingMeta):
        raise UnsupportedFamilyError("ring_alpha_even requires a ring network")
    if net.n_queues % 2 != 0:
        raise ValueError("ring_alpha_even requires an even number of servers")
    if not is_critical(net):
        raise ValueError("ring_alpha_even requires a critical ring")
    alpha = tuple(
        (Fraction(1) if i % 2 == 0 else Fraction(-1)) / rate
        for i, rate in enumerate(net.meta.push_rates)
    )
    _assert_harmonic(net, alpha)
    return alpha


def reentrant_alpha(net: NetworkSpec) -> tuple[Fraction, ...]:
    """Closed-form harmonic weights for a critical re-entrant network.

    The weight of a queue is the signed sum of inverse rates of all
    earlier steps of its stream, the sign being -1 for server-1 steps and
    +1 for server-2 steps.
    """
    if not isinstance(net.meta, ReentrantMeta):
        raise UnsupportedFamilyError("reentrant_alpha requires a re-entrant network")
    if not is_critical(net):
        raise ValueError("reentrant_alpha requires a critical network")
    meta = net.meta
    alpha = [Fraction(0)] * net.n_queues
    for i, stream in enumerate(meta.streams):
        partial = Fraction(0)
        for j in range(meta.stream_lengths[i]):
            server, rate = stream[j]
            partial += Fraction(-1 if server == 1 else 1) / rate
            alpha[meta.queue_index(i, j + 1)] = partial
    vec = tuple(alpha)
    _assert_harmonic(net, vec)
    return vec


def _push_pull_alpha(net: NetworkSpec) -> tuple[Fraction, ...]:
    assert isinstance(net.meta, PushPullMeta)
    l1, l2 = net.meta.push_rates
    alpha = (Fraction(1) / l1, Fraction(-1) / l2)
    _assert_harmonic(net, alpha)
    return alpha


def family_alpha(net: NetworkSpec) -> tuple[Fraction, ...] | None:
    """The family closed-form weight vector, or None when not applicable.

    Applicable to critical push-pull networks, critical rings with evenly
    many servers, and critical re-entrant networks.
    """
    if isinstance(net.meta, PushPullMeta) and is_critical(net):
        return _push_pull_alpha(net)
    if isinstance(net.meta, RingMeta) and net.n_queues % 2 == 0 and is_critical(net):
        return ring_alpha_even(net)
    if isinstance(net.meta, ReentrantMeta) and is_critical(net):
        return reentrant_alpha(net)
    return None


def _assert_harmonic(net: NetworkSpec, alpha: Sequence[Fraction]) -> None:
    d = drift_matrix(net)
    if not _solves(d, alpha):
        raise ArithmeticError("internal error: closed-form weights are not harmonic")


def _solves(d: DriftMatrix, alpha: Sequence[Fraction | int]) -> bool:
    return all(exactla.dot(row, alpha) == 0 for row in d.rows)


def verify_unit_pairing(net: NetworkSpec, alpha: Sequence[Fraction | int]) -> bool:
    """Check the signed-unit identity of re-entrant closed-form weights.

    For every step (i, j), the rate-weighted displacement of that single
    step must pair with alpha to exactly -1 on server 1 and +1 on server 2.
    Summing the two steps of any action then cancels exactly, which is why
    the drift matrix annihilates alpha.
    """
    if not isinstance(net.meta, ReentrantMeta):
        raise UnsupportedFamilyError("verify_unit_pairing requires a re-entrant network")
    meta = net.meta
    vec = _check_alpha(net, alpha)
    for i, stream in enumerate(meta.streams):
        n_i = meta.stream_lengths[i]
        for j, (server, rate) in enumerate(stream):
            if j == 0:
                paired = rate * vec[meta.queue_index(i, 1)]
            elif j == n_i:
                paired = -rate * vec[meta.queue_index(i, n_i)]
            else:
                paired = rate * (vec[meta.queue_index(i, j + 1)] - vec[meta.queue_index(i, j)])
            if paired != (-1 if server == 1 else 1):
                return False
    return True


def _candidate_vectors(
    net: NetworkSpec,
    basis: Sequence[tuple[int, ...]],
    combo_budget: int,
    max_candidates: int,
):
    """Candidate harmonic vectors in deterministic search order.

    Family closed form first (when the family is critical), then each null
    space basis vector, then small-integer combinations of basis vectors
    with coefficients in [-combo_budget, combo_budget].
    """
    if net.family != "custom":
        closed = family_alpha(net)
        if closed is not None:
            yield closed
    for vec in basis:
        yield vec
    if len(basis) < 2:
        return
    count = 0
    coeff_range = range(-combo_budget, combo_budget + 1)
    for coeffs in itertools.product(coeff_range, repeat=len(basis)):
        if all(c == 0 for c in coeffs):
            continue
        count += 1
        if count > max_candidates:
            return
        yield tuple(
            sum(c * vec[k] for c, vec in zip(coeffs, basis)) for k in range(net.n_queues)
        )


def certify_nonstabilizable(
    net: NetworkSpec,
    combo_budget: int = 3,
    max_candidates: int = 50_000,
) -> HarmonicCertificate:
    """Search for a harmonic certificate of non-stabilizability.

    Computes the exact drift matrix and its rank; when the rank is
    deficient, searches the null space for a vector passing the direct
    non-degeneracy check. The first hit (in a deterministic order) is
    normalized to canonical integer form and returned with verdict
    NON_STABILIZABLE; otherwise the verdict is INCONCLUSIVE with the null
    space basis attached, as the criterion is sufficient but not necessary.
    """
    d = drift_matrix(net)
    rk = rank(d)
    critical = None if net.family == "custom" else is_critical(net)
    if rk == net.n_queues:
        return HarmonicCertificate(
            Verdict.INCONCLUSIVE, None, False, False, False,
            rk, net.n_queues, net.n_actions, critical, (),
        )
    basis = tuple(null_space_basis(d))
    tried: set[tuple[int, ...]] = set()
    for cand in _candidate_vectors(net, basis, combo_budget, max_candidates):
        vec = tuple(Fraction(x) for x in cand)
        if all(x == 0 for x in vec):
            continue
        canon = exactla.normalize_integer_vector(vec)
        if canon in tried:
            continue
        tried.add(canon)
        if not _solves(d, vec):
            continue
        if check_nondegeneracy_direct(net, vec):
            alpha = tuple(Fraction(x) for x in canon)
            return HarmonicCertificate(
                Verdict.NON_STABILIZABLE,
                alpha,
                True,
                True,
                check_nondegeneracy_lemma(net, alpha),
                rk, net.n_queues, net.n_actions, critical, basis,
            )
    return HarmonicCertificate(
        Verdict.INCONCLUSIVE, None, False, False, False,
        rk, net.n_queues, net.n_actions, critical, basis,
    )
