"""Homogeneous controlled queueing networks with exact rational rates.

A network couples M queues with a finite set of actions. Every action
carries a state-independent distribution over unit displacements: a new
job entering a queue, a job leaving one, or a job moving between two
queues. State dependence enters only through availability: an action may
fire only in states where none of its outcomes would drive a queue
negative, which is exactly the non-idling convention that pulls require a
nonempty queue.

Three concrete families are provided (the two-server push-pull network, a
ring of push-pull servers, and two-server re-entrant lines) plus fully
custom action lists. All rates are exact rationals; this module never
touches floating point.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

RateLike = Union[int, str, Fraction]
Displacement = tuple[int, ...]
State = tuple[int, ...]

FAMILIES = ("pushpull", "ring", "reentrant", "custom")


class ConstructionError(ValueError):
    """Invalid parameters for building a network."""


class SpecFileError(ValueError):
    """A network spec document is malformed."""


def parse_rational(text: str) -> Fraction:
    """Parse ``"num/den"`` or ``"num"`` into an exact Fraction."""
    s = text.strip()
    try:
        if "/" in s:
            num, den = s.split("/", 1)
            return Fraction(int(num.strip()), int(den.strip()))
        return Fraction(int(s))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConstructionError(f"not a rational number: {text!r}") from exc


def format_rational(q: Fraction) -> str:
    """Render a rational as ``"num/den"``, omitting the denominator when 1."""
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def as_rate(value: RateLike) -> Fraction:
    """Validate and normalize a processing rate (must be a positive rational)."""
    if isinstance(value, bool):
        raise ConstructionError(f"rate must be a positive rational, got {value!r}")
    if isinstance(value, Fraction):
        q = value
    elif isinstance(value, int):
        q = Fraction(value)
    elif isinstance(value, str):
        q = parse_rational(value)
    else:
        raise ConstructionError(
            f"rate must be an int, 'num/den' string, or Fraction, got {type(value).__name__}"
        )
    if q <= 0:
        raise ConstructionError(f"rates must be positive, got {format_rational(q)}")
    return q


def check_displacement(disp: Sequence[int], n_queues: int) -> Displacement:
    """Validate the three admissible displacement shapes.

    A displacement either adds one job to a queue, removes one job from a
    queue, or moves one job between two distinct queues.
    """
    d = tuple(int(x) for x in disp)
    if len(d) != n_queues:
        raise ConstructionError(f"displacement {d} has length {len(d)}, expected {n_queues}")
    nonzero = [x for x in d if x]
    ok = (
        1 <= len(nonzero) <= 2
        and all(x in (-1, 1) for x in nonzero)
        and (len(nonzero) == 1 or sum(nonzero) == 0)
    )
    if not ok:
        raise ConstructionError(
            f"displacement {d} must add one job, remove one job, or move one job between queues"
        )
    return d


@dataclass(frozen=True)
class ActionSpec:
    """One action: a rate-weighted distribution over displacements.

    Outcomes are stored merged (distinct displacements) and sorted
    lexicographically by displacement; this canonical order is also the
    normative order for cumulative-sum sampling in the simulator.
    ``drains`` lists the queues some outcome decrements, i.e. the queues
    that must be nonempty for the action to be available.
    """

    id: int
    label: str
    outcomes: tuple[tuple[Displacement, Fraction], ...]
    total_rate: Fraction
    drains: frozenset[int]

    @property
    def support(self) -> tuple[Displacement, ...]:
        return tuple(d for d, _ in self.outcomes)


def make_action(
    action_id: int,
    label: str,
    outcomes: Iterable[tuple[Sequence[int], RateLike]],
    n_queues: int,
) -> ActionSpec:
    """Build an ActionSpec, merging duplicate displacements by summing rates."""
    merged: dict[Displacement, Fraction] = {}
    for disp, rate in outcomes:
        d = check_displacement(disp, n_queues)
        merged[d] = merged.get(d, Fraction(0)) + as_rate(rate)
    if not merged:
        raise ConstructionError(f"action {label!r} has no outcomes")
    ordered = tuple(sorted(merged.items()))
    total = sum((r for _, r in ordered), Fraction(0))
    drains = frozenset(k for d, _ in ordered for k, x in enumerate(d) if x == -1)
    return ActionSpec(action_id, label, ordered, total, drains)


@dataclass(frozen=True)
class PushPullMeta:
    push_rates: tuple[Fraction, Fraction]
    pull_rates: tuple[Fraction, Fraction]


@dataclass(frozen=True)
class RingMeta:
    push_rates: tuple[Fraction, ...]
    pull_rates: tuple[Fraction, ...]


@dataclass(frozen=True)
class ReentrantMeta:
    """Stream layout of a two-server re-entrant network.

    ``streams[i][j]`` is the ``(server, rate)`` of step j of stream i,
    j = 0 being the supply-fed first step. Queues are numbered
    lexicographically by (stream, step) for steps >= 1, so the queue fed
    by step j of stream i has index ``queue_index(i, j)``.
    """

    streams: tuple[tuple[tuple[int, Fraction], ...], ...]

    @property
    def n_streams(self) -> int:
        return len(self.streams)

    @property
    def stream_lengths(self) -> tuple[int, ...]:
        """Number of queues per stream (steps excluding the supply step)."""
        return tuple(len(s) - 1 for s in self.streams)

    @property
    def offsets(self) -> tuple[int, ...]:
        offs = [0]
        for n in self.stream_lengths:
            offs.append(offs[-1] + n)
        return tuple(offs)

    def queue_index(self, stream: int, step: int) -> int:
        n = self.stream_lengths[stream]
        if not 1 <= step <= n:
            raise ValueError(f"stream {stream} has no queue for step {step}")
        return self.offsets[stream] + step - 1

    def locate_queue(self, queue: int) -> tuple[int, int]:
        """Inverse of queue_index: the (stream, step) serving this queue."""
        offs = self.offsets
        for i in range(self.n_streams):
            if offs[i] <= queue < offs[i + 1]:
                return i, queue - offs[i] + 1
        raise ValueError(f"no queue {queue}")

    def operations(self) -> list[tuple[int, int]]:
        """All (stream, step) pairs, supply steps included."""
        return [(i, j) for i, s in enumerate(self.streams) for j in range(len(s))]

    def server_operations(self, server: int) -> list[tuple[int, int]]:
        return [(i, j) for i, j in self.operations() if self.streams[i][j][0] == server]

    def op_server(self, stream: int, step: int) -> int:
        return self.streams[stream][step][0]

    def op_rate(self, stream: int, step: int) -> Fraction:
        return self.streams[stream][step][1]

    @property
    def entry_queues(self) -> frozenset[int]:
        """Queues fed by the supply step of each stream."""
        return frozenset(self.queue_index(i, 1) for i in range(self.n_streams))

    @property
    def exit_queues(self) -> frozenset[int]:
        """Queues drained by the final step of each stream."""
        return frozenset(
            self.queue_index(i, n) for i, n in enumerate(self.stream_lengths)
        )


FamilyMeta = Union[PushPullMeta, RingMeta, ReentrantMeta, None]


@dataclass(frozen=True)
class NetworkSpec:
    """A homogeneous controlled queueing network."""

    n_queues: int
    actions: tuple[ActionSpec, ...]
    family: str
    meta: FamilyMeta = None

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def action(self, action_id: int) -> ActionSpec:
        if not 0 <= action_id < len(self.actions):
            raise ConstructionError(f"unknown action id {action_id}")
        return self.actions[action_id]

    def labels(self) -> dict[str, int]:
        return {a.label: a.id for a in self.actions}


@dataclass(frozen=True)
class IndexSets:
    """Queues touched by each displacement shape across all actions.

    ``external`` holds queues where single jobs enter or leave the network;
    ``transfers`` holds (from_queue, to_queue) pairs of internal job moves.
    """

    external: frozenset[int]
    transfers: frozenset[tuple[int, int]]


def index_sets(net: NetworkSpec) -> IndexSets:
    external: set[int] = set()
    transfers: set[tuple[int, int]] = set()
    for act in net.actions:
        for d in act.support:
            nz = [(k, x) for k, x in enumerate(d) if x]
            if len(nz) == 1:
                external.add(nz[0][0])
            else:
                src = next(k for k, x in nz if x == -1)
                dst = next(k for k, x in nz if x == 1)
                transfers.add((src, dst))
    return IndexSets(frozenset(external), frozenset(transfers))


def _unit(n: int, k: int, sign: int) -> Displacement:
    d = [0] * n
    d[k] = sign
    return tuple(d)


def build_push_pull(lam1: RateLike, lam2: RateLike, mu1: RateLike, mu2: RateLike) -> NetworkSpec:
    """The two-server push-pull network.

    Server 1 pushes stream 1 (rate lam1) or pulls queue 2 (rate mu2);
    server 2 pushes stream 2 (rate lam2) or pulls queue 1 (rate mu1).
    Four actions, one per pair of server choices.
    """
    l1, l2 = as_rate(lam1), as_rate(lam2)
    m1, m2 = as_rate(mu1), as_rate(mu2)
    actions = (
        make_action(0, "(push,push)", [((1, 0), l1), ((0, 1), l2)], 2),
        make_action(1, "(pull,pull)", [((-1, 0), m1), ((0, -1), m2)], 2),
        make_action(2, "(push,pull)", [((1, 0), l1), ((-1, 0), m1)], 2),
        make_action(3, "(pull,push)", [((0, 1), l2), ((0, -1), m2)], 2),
    )
    return NetworkSpec(2, actions, "pushpull", PushPullMeta((l1, l2), (m1, m2)))


def build_ring(lam: Sequence[RateLike], mu: Sequence[RateLike]) -> NetworkSpec:
    """A ring of M push-pull servers.

    Server i chooses between pushing stream i (displacement +e_i at rate
    lam[i]) and pulling stream i-1 (displacement -e_{i-1} at rate mu[i-1]),
    indices cyclic. One action per vector of server choices, 2^M total.
    """
    push = tuple(as_rate(x) for x in lam)
    pull = tuple(as_rate(x) for x in mu)
    if len(push) != len(pull):
        raise ConstructionError(
            f"push and pull rate vectors differ in length ({len(push)} vs {len(pull)})"
        )
    m = len(push)
    if m < 2:
        raise ConstructionError("a ring needs at least 2 servers")
    actions = []
    for action_id, choices in enumerate(itertools.product(("push", "pull"), repeat=m)):
        outcomes = []
        for srv, choice in enumerate(choices):
            if choice == "push":
                outcomes.append((_unit(m, srv, 1), push[srv]))
            else:
                q = (srv - 1) % m
                outcomes.append((_unit(m, q, -1), pull[q]))
        actions.append(make_action(action_id, "(" + ",".join(choices) + ")", outcomes, m))
    return NetworkSpec(m, tuple(actions), "ring", RingMeta(push, pull))


def build_reentrant(
    streams: Sequence[Sequence[tuple[int, RateLike]]],
) -> NetworkSpec:
    """Two-server re-entrant lines.

    Each stream is a list of (server, rate) steps; step 0 generates jobs
    from an unlimited supply, step j >= 1 serves queue j of the stream, and
    the last step removes jobs from the network. Actions pair one server-1
    step with one server-2 step, so the action count is the product of the
    two servers' step counts.
    """
    parsed = []
    for i, stream in enumerate(streams):
        steps = []
        for j, (server, rate) in enumerate(stream):
            if server not in (1, 2):
                raise ConstructionError(
                    f"stream {i + 1} step {j}: server must be 1 or 2, got {server!r}"
                )
            steps.append((int(server), as_rate(rate)))
        if len(steps) < 2:
            raise ConstructionError(f"stream {i + 1} needs at least two steps")
        parsed.append(tuple(steps))
    if not parsed:
        raise ConstructionError("at least one stream is required")
    meta = ReentrantMeta(tuple(parsed))
    m = sum(meta.stream_lengths)

    def step_outcome(i: int, j: int) -> tuple[Displacement, Fraction]:
        n_i = meta.stream_lengths[i]
        rate = meta.op_rate(i, j)
        if j == 0:
            return _unit(m, meta.queue_index(i, 1), 1), rate
        if j == n_i:
            return _unit(m, meta.queue_index(i, n_i), -1), rate
        d = [0] * m
        d[meta.queue_index(i, j)] = -1
        d[meta.queue_index(i, j + 1)] = 1
        return tuple(d), rate

    ops1 = meta.server_operations(1)
    ops2 = meta.server_operations(2)
    for server, ops in ((1, ops1), (2, ops2)):
        if not ops:
            raise ConstructionError(f"server {server} has no operations")
    actions = []
    for idx1, (i1, j1) in enumerate(ops1):
        for idx2, (i2, j2) in enumerate(ops2):
            action_id = idx1 * len(ops2) + idx2
            label = f"(({i1 + 1},{j1}),({i2 + 1},{j2}))"
            actions.append(
                make_action(action_id, label, [step_outcome(i1, j1), step_outcome(i2, j2)], m)
            )
    return NetworkSpec(m, tuple(actions), "reentrant", meta)


def build_custom(
    n_queues: int,
    actions: Sequence[tuple[str, Sequence[tuple[Sequence[int], RateLike]]]],
) -> NetworkSpec:
    """A network given directly as a list of (label, outcomes) actions."""
    if n_queues < 1:
        raise ConstructionError("a network needs at least one queue")
    if not actions:
        raise ConstructionError("a network needs at least one action")
    built = tuple(
        make_action(i, label, outcomes, n_queues) for i, (label, outcomes) in enumerate(actions)
    )
    return NetworkSpec(n_queues, built, "custom", None)


# Illustrative layout of two re-entrant streams with 3 and 4 queues: the
# nine (server, step) assignments below place four operations on server 1
# and five on server 2, giving 20 actions over 7 queues.
TWO_STREAM_LAYOUT: tuple[tuple[int, ...], ...] = ((1, 2, 1, 2), (2, 1, 2, 1, 2))


def build_two_stream_example(
    rates: Sequence[Sequence[RateLike]] | None = None,
) -> NetworkSpec:
    """The 7-queue, 20-action two-stream re-entrant example network.

    ``rates[i][j]`` overrides the rate of step j of stream i; the default
    assignment is critical (each server carries one unit of mean work per
    job on every stream). The server layout is ``TWO_STREAM_LAYOUT``.
    """
    if rates is None:
        rates = (
            (1, 1, 1, 1),
            (Fraction(3, 2), 1, Fraction(3, 2), 1, Fraction(3, 2)),
        )
    streams = []
    for layout, stream_rates in zip(TWO_STREAM_LAYOUT, rates, strict=True):
        if len(layout) != len(stream_rates):
            raise ConstructionError("rate list does not match the two-stream layout")
        streams.append(list(zip(layout, stream_rates)))
    return build_reentrant(streams)


def check_state(z: Sequence[int], n_queues: int) -> State:
    state = tuple(int(x) for x in z)
    if len(state) != n_queues:
        raise ConstructionError(f"state {state} has length {len(state)}, expected {n_queues}")
    if any(x < 0 for x in state):
        raise ConstructionError(f"state {state} has a negative queue length")
    return state


def available_actions(net: NetworkSpec, z: Sequence[int]) -> set[int]:
    """Ids of the actions that can fire at state z.

    An action is available iff every queue it may decrement is nonempty,
    so no outcome can leave the nonnegative orthant.
    """
    state = check_state(z, net.n_queues)
    return {a.id for a in net.actions if all(state[k] >= 1 for k in a.drains)}


def transition_distribution(
    net: NetworkSpec, action_id: int
) -> list[tuple[Displacement, Fraction]]:
    """The action's displacement distribution, probabilities exact and summing to 1."""
    act = net.action(action_id)
    return [(d, rate / act.total_rate) for d, rate in act.outcomes]


# ---------------------------------------------------------------------------
# Spec files: UTF-8 JSON documents describing a network.

def _require_fields(obj: Mapping, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, Mapping):
        raise SpecFileError(f"{where} must be an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise SpecFileError(f"unknown field {unknown[0]!r} in {where}")
    missing = sorted(required - set(obj))
    if missing:
        raise SpecFileError(f"missing field {missing[0]!r} in {where}")


def _rate_field(value: object, where: str) -> Fraction:
    if not isinstance(value, (str, int)) or isinstance(value, bool):
        raise SpecFileError(f"{where} must be an integer or 'num/den' string")
    try:
        return as_rate(value)
    except ConstructionError as exc:
        raise SpecFileError(f"{where}: {exc}") from exc


def _rate_list(value: object, where: str, length: int | None = None) -> list[Fraction]:
    if not isinstance(value, list) or (length is not None and len(value) != length):
        need = f" of length {length}" if length is not None else ""
        raise SpecFileError(f"{where} must be a list{need}")
    return [_rate_field(v, f"{where}[{i}]") for i, v in enumerate(value)]


def loads_spec(text: str) -> NetworkSpec:
    """Parse a network spec document from a JSON string."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFileError(
            f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise SpecFileError("top level must be an object")
    family = doc.get("family")
    if family not in FAMILIES:
        raise SpecFileError(f"field 'family' must be one of {list(FAMILIES)}, got {family!r}")
    try:
        if family == "pushpull":
            _require_fields(doc, {"family", "lambda", "mu"}, {"family", "lambda", "mu"}, "document")
            lam = _rate_list(doc["lambda"], "'lambda'", 2)
            mu = _rate_list(doc["mu"], "'mu'", 2)
            return build_push_pull(lam[0], lam[1], mu[0], mu[1])
        if family == "ring":
            _require_fields(doc, {"family", "lambda", "mu"}, {"family", "lambda", "mu"}, "document")
            lam = _rate_list(doc["lambda"], "'lambda'")
            mu = _rate_list(doc["mu"], "'mu'")
            if len(lam) != len(mu) or len(lam) < 2:
                raise SpecFileError("'lambda' and 'mu' must have equal lengths >= 2")
            return build_ring(lam, mu)
        if family == "reentrant":
            _require_fields(doc, {"family", "streams"}, {"family", "streams"}, "document")
            if not isinstance(doc["streams"], list) or not doc["streams"]:
                raise SpecFileError("'streams' must be a nonempty list")
            streams = []
            for i, stream in enumerate(doc["streams"]):
                if not isinstance(stream, list):
                    raise SpecFileError(f"streams[{i}] must be a list of operations")
                ops = []
                for j, op in enumerate(stream):
                    where = f"streams[{i}][{j}]"
                    _require_fields(op, {"server", "rate"}, {"server", "rate"}, where)
                    server = op["server"]
                    if server not in (1, 2):
                        raise SpecFileError(f"{where}.server must be 1 or 2")
                    ops.append((server, _rate_field(op["rate"], f"{where}.rate")))
                streams.append(ops)
            return build_reentrant(streams)
        # custom
        _require_fields(doc, {"family", "M", "actions"}, {"family", "M", "actions"}, "document")
        m = doc["M"]
        if not isinstance(m, int) or isinstance(m, bool) or m < 1:
            raise SpecFileError("'M' must be a positive integer")
        if not isinstance(doc["actions"], list) or not doc["actions"]:
            raise SpecFileError("'actions' must be a nonempty list")
        actions = []
        for i, entry in enumerate(doc["actions"]):
            where = f"actions[{i}]"
            _require_fields(entry, {"label", "outcomes"}, {"label", "outcomes"}, where)
            if not isinstance(entry["label"], str):
                raise SpecFileError(f"{where}.label must be a string")
            if not isinstance(entry["outcomes"], list) or not entry["outcomes"]:
                raise SpecFileError(f"{where}.outcomes must be a nonempty list")
            outcomes = []
            for j, outcome in enumerate(entry["outcomes"]):
                owhere = f"{where}.outcomes[{j}]"
                _require_fields(outcome, {"disp", "rate"}, {"disp", "rate"}, owhere)
                disp = outcome["disp"]
                if not isinstance(disp, list) or not all(
                    isinstance(x, int) and not isinstance(x, bool) for x in disp
                ):
                    raise SpecFileError(f"{owhere}.disp must be a list of integers")
                outcomes.append((disp, _rate_field(outcome["rate"], f"{owhere}.rate")))
            actions.append((entry["label"], outcomes))
        return build_custom(m, actions)
    except ConstructionError as exc:
        raise SpecFileError(str(exc)) from exc


def load_spec(path: str | Path) -> NetworkSpec:
    """Load a network spec document from a file."""
    return loads_spec(Path(path).read_text(encoding="utf-8"))


def spec_document(net: NetworkSpec) -> dict:
    """Export any network as a custom-family spec document."""
    return {
        "family": "custom",
        "M": net.n_queues,
        "actions": [
            {
                "label": act.label,
                "outcomes": [
                    {"disp": list(d), "rate": format_rational(rate)} for d, rate in act.outcomes
                ],
            }
            for act in net.actions
        ],
    }


def dump_spec(net: NetworkSpec) -> str:
    """Serialize a network as a loadable custom-family JSON document."""
    return json.dumps(spec_document(net), indent=2)
