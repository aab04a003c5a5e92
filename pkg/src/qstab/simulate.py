"""Monte Carlo simulation of the embedded jump chain under non-idling policies.

Trajectories live on the discrete-time chain obtained by watching the
continuous-time network only at jump instants; holding times are
integrated out. Each trial owns an independent RNG substream derived from
the run seed, so trials may execute in any order (or in parallel batches,
as the engine below does) without changing results.

Reproducibility contract
------------------------
* substream seed of trial t = splitmix64(seed + (t+1) * golden), see
  :func:`substream_seed`; this mixing function is normative.
* one uniform variate is consumed per step, from the trial's own stream;
* each action's outcome is selected by cumulative-sum inversion over its
  outcomes in lexicographic displacement order (the storage order of
  :class:`~qstab.netmodel.ActionSpec`), with probabilities converted from
  exact rationals to floats once per run.

Identical (network, policy, config) therefore yield bit-identical reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .netmodel import (
    ConstructionError,
    NetworkSpec,
    PushPullMeta,
    ReentrantMeta,
    RingMeta,
    State,
    check_state,
    format_rational,
    index_sets,
)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_CHUNK = 1024      # uniforms pregenerated per trial per refill
_BATCH = 4096      # trials simulated in lockstep per batch

POLICY_KINDS = ("pull-priority", "push-priority", "threshold", "custom")


class PolicyError(RuntimeError):
    """A policy selected an action that is not available, or none exists."""


def substream_seed(seed: int, trial: int) -> int:
    """Seed of the RNG substream owned by one trial (splitmix64 mix)."""
    z = (seed + (trial + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """The PCG64 generator owned by one trial."""
    return np.random.Generator(np.random.PCG64(substream_seed(seed, trial)))


@dataclass(frozen=True)
class SimConfig:
    """Run parameters; ``x0=None`` means start at the origin."""

    seed: int = 0
    steps: int = 1000
    trials: int = 10_000
    cap: int = 10_000
    x0: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ConstructionError("seed must be a nonnegative integer")
        for name in ("steps", "trials", "cap"):
            if getattr(self, name) < 1:
                raise ConstructionError(f"{name} must be a positive integer")


@dataclass(frozen=True)
class Policy:
    """A total state-to-action map, non-idling by construction.

    ``resolve`` maps a state tuple to an action id; availability of the
    returned action is enforced at every simulation step. ``choose_batch``
    is an optional vectorized form used by the lockstep engine.
    """

    kind: str
    resolve: Callable[[State], int]
    choose_batch: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class ReturnTimeStats:
    """Return times to the start state, censored at the cap.

    Censored trials are excluded from ``mean_uncensored`` and contribute
    the cap itself to ``mean_censored_at_cap``; the censored fraction is
    reported exactly so neither mean hides censoring.
    """

    trials: int
    returned: int
    censored_fraction: Fraction
    mean_uncensored: float
    mean_censored_at_cap: float

    def to_json_dict(self) -> dict:
        return {
            "trials": self.trials,
            "returned": self.returned,
            "censored_fraction": format_rational(self.censored_fraction),
            "mean_uncensored": self.mean_uncensored,
            "mean_censored_at_cap": self.mean_censored_at_cap,
        }


@dataclass(frozen=True)
class MartingaleReport:
    """Empirical drift of the weighted queue length Z = alpha'X.

    ``bound`` is the exact supremum of one-step |dZ| implied by the
    displacement shapes; ``max_abs_increment`` never exceeds it.
    """

    mean_delta_Z: float
    std_error: float
    max_abs_increment: float
    bound: float

    def to_json_dict(self) -> dict:
        return {
            "mean_delta_Z": self.mean_delta_Z,
            "std_error": self.std_error,
            "max_abs_increment": self.max_abs_increment,
            "bound": self.bound,
        }


@dataclass(frozen=True)
class GrowthReport:
    """Least-squares slope of total queue length per step, averaged over trials."""

    slope_per_step: float
    fraction_grew: float

    def to_json_dict(self) -> dict:
        return {"slope_per_step": self.slope_per_step, "fraction_grew": self.fraction_grew}


@dataclass(frozen=True)
class TrajectorySummary:
    """Quick-look statistics of fixed-length trajectories."""

    trials: int
    steps: int
    mean_final_total: float
    max_final_total: int
    final_state_trial0: tuple[int, ...]

    def to_json_dict(self) -> dict:
        return {
            "trials": self.trials,
            "steps": self.steps,
            "mean_final_total": self.mean_final_total,
            "max_final_total": self.max_final_total,
            "final_state_trial0": list(self.final_state_trial0),
        }


# ---------------------------------------------------------------------------
# Policies

def _server_pull_queues(m: int) -> list[int]:
    # Server i pulls the queue of stream i-1, cyclically; for the push-pull
    # pair (m == 2) this is exactly "server 1 pulls queue 2 and vice versa".
    return [(i - 1) % m for i in range(m)]


def _choice_id_maps(net: NetworkSpec):
    """bits-of-pull -> action id, scalar and vectorized, for pushpull/ring."""
    m = net.n_queues
    if isinstance(net.meta, PushPullMeta):
        lut = np.array([0, 2, 3, 1], dtype=np.int64)  # index = 2*pull1 + pull2

        def scalar(bits):
            return int(lut[2 * bits[0] + bits[1]])

        def batch(bits):
            return lut[2 * bits[:, 0] + bits[:, 1]]

        return scalar, batch
    powers = np.array([1 << (m - 1 - i) for i in range(m)], dtype=np.int64)

    def scalar(bits):
        return int(sum(b << (m - 1 - i) for i, b in enumerate(bits)))

    def batch(bits):
        return bits.astype(np.int64) @ powers

    return scalar, batch


def _threshold_policy(net: NetworkSpec, kind: str, cutoff: int) -> Policy:
    m = net.n_queues
    pull_q = _server_pull_queues(m)
    pull_q_arr = np.array(pull_q, dtype=np.int64)
    scalar_id, batch_id = _choice_id_maps(net)

    def resolve(z: State) -> int:
        return scalar_id([1 if z[pull_q[i]] > cutoff else 0 for i in range(m)])

    def choose_batch(states: np.ndarray) -> np.ndarray:
        return batch_id(states[:, pull_q_arr] > cutoff)

    return Policy(kind, resolve, choose_batch)


def _push_priority_policy(net: NetworkSpec) -> Policy:
    if isinstance(net.meta, (PushPullMeta, RingMeta)):
        all_push = 0  # first action in both enumerations

        def resolve(z: State) -> int:
            return all_push

        def choose_batch(states: np.ndarray) -> np.ndarray:
            return np.zeros(len(states), dtype=np.int64)

        return Policy("push-priority", resolve, choose_batch)
    assert isinstance(net.meta, ReentrantMeta)
    meta = net.meta
    ops1 = meta.server_operations(1)
    ops2 = meta.server_operations(2)
    picks = []
    for server, ops in ((1, ops1), (2, ops2)):
        starts = [op for op in ops if op[1] == 0]
        if not starts:
            raise ConstructionError(
                f"push-priority is unsupported here: server {server} has no supply step"
            )
        picks.append(ops.index(starts[0]))
    action_id = picks[0] * len(ops2) + picks[1]

    def resolve(z: State) -> int:
        return action_id

    return Policy("push-priority", resolve, None)


def _reentrant_pull_priority(net: NetworkSpec) -> Policy:
    """Last-buffer-first-served per server: the available step with the
    largest index wins, ties broken by stream order."""
    meta = net.meta
    assert isinstance(meta, ReentrantMeta)
    ops1 = meta.server_operations(1)
    ops2 = meta.server_operations(2)
    order1 = sorted(ops1, key=lambda ij: (-ij[1], ij[0]))
    order2 = sorted(ops2, key=lambda ij: (-ij[1], ij[0]))
    pos1 = {op: k for k, op in enumerate(ops1)}
    pos2 = {op: k for k, op in enumerate(ops2)}

    def pick(z: State, order, server: int) -> tuple[int, int]:
        for i, j in order:
            if j == 0 or z[meta.queue_index(i, j)] >= 1:
                return (i, j)
        raise PolicyError(f"server {server} has no available operation at state {z}")

    def resolve(z: State) -> int:
        return pos1[pick(z, order1, 1)] * len(ops2) + pos2[pick(z, order2, 2)]

    return Policy("pull-priority", resolve, None)


def make_policy(
    net: NetworkSpec,
    kind: str,
    *,
    threshold: int | None = None,
    table: Mapping[State, int] | None = None,
    default: int | None = None,
    resolver: Callable[[State], int] | None = None,
) -> Policy:
    """Build one of the supported policies for this network.

    pull-priority
        Each server pulls whenever its pull queue is nonempty, else
        pushes. On re-entrant networks this is last-buffer-first-served
        per server.
    push-priority
        Every server always pushes (re-entrant networks must give every
        server a supply step).
    threshold
        Each server pulls iff its pull queue exceeds ``threshold``
        (push-pull and ring families only).
    custom
        An explicit finite ``table`` of state -> action id with a
        ``default`` id, or an arbitrary ``resolver`` callable. Availability
        is validated at every step.
    """
    if kind not in POLICY_KINDS:
        raise ConstructionError(f"unknown policy kind {kind!r}, expected one of {POLICY_KINDS}")
    if kind == "custom":
        if resolver is not None:
            return Policy("custom", resolver, None)
        if table is None and default is None:
            raise ConstructionError("custom policies need a table/default or a resolver")
        mapping = {tuple(k): int(v) for k, v in (table or {}).items()}

        def resolve(z: State) -> int:
            a = mapping.get(z, default)
            if a is None:
                raise PolicyError(f"custom policy table has no entry for state {z}")
            return a

        return Policy("custom", resolve, None)
    if isinstance(net.meta, (PushPullMeta, RingMeta)):
        if kind == "pull-priority":
            return _threshold_policy(net, kind, 0)
        if kind == "threshold":
            if threshold is None or threshold < 0:
                raise ConstructionError("threshold policies need a nonnegative cutoff")
            return _threshold_policy(net, kind, threshold)
        return _push_priority_policy(net)
    if isinstance(net.meta, ReentrantMeta):
        if kind == "pull-priority":
            return _reentrant_pull_priority(net)
        if kind == "push-priority":
            return _push_priority_policy(net)
        raise ConstructionError(f"policy kind {kind!r} is unsupported for re-entrant networks")
    raise ConstructionError(
        f"policy kind {kind!r} is unsupported for custom networks; provide a custom resolver"
    )


# ---------------------------------------------------------------------------
# Sampling engine

class _Sampler:
    """Cached float distributions and displacement tables per action."""

    def __init__(self, net: NetworkSpec, alpha: Sequence[Fraction] | None = None):
        self.n_actions = net.n_actions
        self.labels = [a.label for a in net.actions]
        self.cums: list[np.ndarray] = []
        self.disps: list[np.ndarray] = []
        self.drains: list[np.ndarray] = []
        self.incs: list[np.ndarray] | None = [] if alpha is not None else None
        for act in net.actions:
            probs = np.array(
                [float(rate / act.total_rate) for _, rate in act.outcomes], dtype=np.float64
            )
            self.cums.append(np.cumsum(probs))
            self.disps.append(np.array([d for d, _ in act.outcomes], dtype=np.int64))
            self.drains.append(np.array(sorted(act.drains), dtype=np.int64))
            if self.incs is not None:
                exact = [
                    sum((Fraction(a) * x for a, x in zip(alpha, d)), Fraction(0))
                    for d, _ in act.outcomes
                ]
                self.incs.append(np.array([float(q) for q in exact], dtype=np.float64))

    def apply(
        self,
        states: np.ndarray,
        acts: np.ndarray,
        u: np.ndarray,
        disp_out: np.ndarray,
        inc_out: np.ndarray | None = None,
        used: list[np.ndarray] | None = None,
    ) -> None:
        """Validate availability and sample one displacement per row."""
        if acts.min() < 0 or acts.max() >= self.n_actions:
            raise PolicyError(f"policy produced an unknown action id {int(acts.min())}")
        for a in np.unique(acts):
            rows = np.nonzero(acts == a)[0]
            sub = states[rows]
            drains = self.drains[a]
            if drains.size:
                bad = (sub[:, drains] < 1).any(axis=1)
                if bad.any():
                    state = tuple(int(v) for v in sub[int(np.argmax(bad))])
                    raise PolicyError(
                        f"action {self.labels[a]!r} (id {int(a)}) is not available at state {state}"
                    )
            idx = np.searchsorted(self.cums[a], u[rows], side="right")
            np.minimum(idx, len(self.cums[a]) - 1, out=idx)
            disp_out[rows] = self.disps[a][idx]
            if inc_out is not None:
                inc_out[rows] = self.incs[a][idx]
            if used is not None:
                used[a][idx] = True


def _make_chooser(policy: Policy) -> Callable[[np.ndarray], np.ndarray]:
    if policy.choose_batch is not None:
        return policy.choose_batch
    resolve = policy.resolve

    def chooser(states: np.ndarray) -> np.ndarray:
        return np.fromiter(
            (resolve(tuple(int(v) for v in row)) for row in states),
            dtype=np.int64,
            count=len(states),
        )

    return chooser


def _start_state(net: NetworkSpec, cfg: SimConfig) -> State:
    x0 = cfg.x0 if cfg.x0 is not None else (0,) * net.n_queues
    return check_state(x0, net.n_queues)


def _batches(trials: int):
    start = 0
    while start < trials:
        stop = min(start + _BATCH, trials)
        yield start, stop
        start = stop


def step(
    net: NetworkSpec, policy: Policy, z: Sequence[int], rng: np.random.Generator
) -> State:
    """One embedded-chain transition from state z.

    Resolves the policy, enforces availability, and samples from the
    action's displacement distribution using one uniform variate.
    """
    state = check_state(z, net.n_queues)
    a = policy.resolve(state)
    if not isinstance(a, (int, np.integer)) or not 0 <= int(a) < net.n_actions:
        raise PolicyError(f"policy produced an unknown action id {a!r} at state {state}")
    act = net.actions[int(a)]
    for k in act.drains:
        if state[k] < 1:
            raise PolicyError(
                f"action {act.label!r} (id {act.id}) is not available at state {state}"
            )
    probs = np.array([float(rate / act.total_rate) for _, rate in act.outcomes])
    cum = np.cumsum(probs)
    idx = min(int(np.searchsorted(cum, rng.random(), side="right")), len(cum) - 1)
    d = act.outcomes[idx][0]
    return tuple(q + dq for q, dq in zip(state, d))


def _refill(chunk: np.ndarray, gens: list, rows: np.ndarray) -> None:
    for i in rows:
        chunk[i] = gens[i].random(_CHUNK)


def estimate_return_time(net: NetworkSpec, policy: Policy, cfg: SimConfig) -> ReturnTimeStats:
    """First-return times to the start state, one per trial, censored at cfg.cap."""
    x0 = _start_state(net, cfg)
    x0_arr = np.array(x0, dtype=np.int64)
    sampler = _Sampler(net)
    chooser = _make_chooser(policy)
    returned_total = 0
    sum_uncensored = 0
    sum_all = 0
    for start, stop in _batches(cfg.trials):
        b = stop - start
        gens = [trial_rng(cfg.seed, t) for t in range(start, stop)]
        states = np.repeat(x0_arr[None, :], b, axis=0)
        active = np.ones(b, dtype=bool)
        times = np.full(b, cfg.cap, dtype=np.int64)
        returned = np.zeros(b, dtype=bool)
        chunk = np.empty((b, _CHUNK), dtype=np.float64)
        for s in range(cfg.cap):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                break
            if s % _CHUNK == 0:
                _refill(chunk, gens, idx)
            u = chunk[idx, s % _CHUNK]
            sub = states[idx]
            acts = chooser(sub)
            disp = np.empty_like(sub)
            sampler.apply(sub, acts, u, disp)
            sub = sub + disp
            states[idx] = sub
            hits = (sub == x0_arr).all(axis=1)
            if hits.any():
                done = idx[hits]
                times[done] = s + 1
                returned[done] = True
                active[done] = False
        returned_total += int(returned.sum())
        sum_uncensored += int(times[returned].sum())
        sum_all += int(times.sum())
    censored_fraction = Fraction(cfg.trials - returned_total, cfg.trials)
    mean_uncensored = sum_uncensored / returned_total if returned_total else 0.0
    return ReturnTimeStats(
        cfg.trials, returned_total, censored_fraction, mean_uncensored, sum_all / cfg.trials
    )


def martingale_test(
    net: NetworkSpec,
    policy: Policy,
    alpha: Sequence[Fraction | int],
    cfg: SimConfig,
) -> MartingaleReport:
    """Empirical mean and standard error of Z_steps - Z_0 where Z = alpha'X.

    Increments are looked up from exact per-outcome values converted to
    float once, so the reported maximum increment respects the exact bound
    by construction.
    """
    vec = tuple(Fraction(x) for x in alpha)
    if len(vec) != net.n_queues:
        raise ConstructionError(f"alpha has length {len(vec)}, expected {net.n_queues}")
    x0 = _start_state(net, cfg)
    x0_arr = np.array(x0, dtype=np.int64)
    sampler = _Sampler(net, alpha=vec)
    chooser = _make_chooser(policy)
    sets = index_sets(net)
    candidates = [abs(vec[i]) for i in sets.external]
    candidates += [abs(vec[i] - vec[j]) for i, j in sets.transfers]
    bound = float(max(candidates)) if candidates else 0.0
    used = [np.zeros(len(c), dtype=bool) for c in sampler.cums]
    deltas = []
    for start, stop in _batches(cfg.trials):
        b = stop - start
        gens = [trial_rng(cfg.seed, t) for t in range(start, stop)]
        states = np.repeat(x0_arr[None, :], b, axis=0)
        z_acc = np.zeros(b, dtype=np.float64)
        chunk = np.empty((b, _CHUNK), dtype=np.float64)
        all_rows = np.arange(b)
        disp = np.empty_like(states)
        inc = np.empty(b, dtype=np.float64)
        for s in range(cfg.steps):
            if s % _CHUNK == 0:
                _refill(chunk, gens, all_rows)
            u = chunk[:, s % _CHUNK]
            acts = chooser(states)
            sampler.apply(states, acts, u, disp, inc_out=inc, used=used)
            states += disp
            z_acc += inc
        deltas.append(z_acc)
    dz = np.concatenate(deltas)
    mean = float(dz.mean())
    std_error = float(dz.std(ddof=1) / np.sqrt(cfg.trials)) if cfg.trials > 1 else 0.0
    max_abs = 0.0
    for flags, incs in zip(used, sampler.incs):
        if flags.any():
            max_abs = max(max_abs, float(np.abs(incs[flags]).max()))
    return MartingaleReport(mean, std_error, max_abs, bound)


def blowup_probe(net: NetworkSpec, policy: Policy, cfg: SimConfig) -> GrowthReport:
    """Per-trial least-squares slope of total queue length against step index."""
    x0 = _start_state(net, cfg)
    x0_arr = np.array(x0, dtype=np.int64)
    sampler = _Sampler(net)
    chooser = _make_chooser(policy)
    n = cfg.steps
    count = n + 1
    sum_n = n * (n + 1) / 2.0
    sum_n2 = n * (n + 1) * (2 * n + 1) / 6.0
    denom = sum_n2 - sum_n * sum_n / count
    slopes = []
    grew_total = 0
    initial_total = int(x0_arr.sum())
    for start, stop in _batches(cfg.trials):
        b = stop - start
        gens = [trial_rng(cfg.seed, t) for t in range(start, stop)]
        states = np.repeat(x0_arr[None, :], b, axis=0)
        totals = states.sum(axis=1).astype(np.float64)
        sum_t = totals.copy()
        sum_nt = np.zeros(b, dtype=np.float64)
        chunk = np.empty((b, _CHUNK), dtype=np.float64)
        all_rows = np.arange(b)
        disp = np.empty_like(states)
        for s in range(1, cfg.steps + 1):
            local = s - 1
            if local % _CHUNK == 0:
                _refill(chunk, gens, all_rows)
            u = chunk[:, local % _CHUNK]
            acts = chooser(states)
            sampler.apply(states, acts, u, disp)
            states += disp
            totals += disp.sum(axis=1)
            sum_t += totals
            sum_nt += s * totals
        slopes.append((sum_nt - sum_n * sum_t / count) / denom)
        grew_total += int((states.sum(axis=1) > initial_total).sum())
    slope = float(np.concatenate(slopes).mean())
    return GrowthReport(slope, grew_total / cfg.trials)


def run_trajectories(net: NetworkSpec, policy: Policy, cfg: SimConfig) -> TrajectorySummary:
    """Run fixed-length trajectories and summarize final states."""
    x0 = _start_state(net, cfg)
    x0_arr = np.array(x0, dtype=np.int64)
    sampler = _Sampler(net)
    chooser = _make_chooser(policy)
    final_totals = []
    first_final: tuple[int, ...] | None = None
    for start, stop in _batches(cfg.trials):
        b = stop - start
        gens = [trial_rng(cfg.seed, t) for t in range(start, stop)]
        states = np.repeat(x0_arr[None, :], b, axis=0)
        chunk = np.empty((b, _CHUNK), dtype=np.float64)
        all_rows = np.arange(b)
        disp = np.empty_like(states)
        for s in range(cfg.steps):
            if s % _CHUNK == 0:
                _refill(chunk, gens, all_rows)
            u = chunk[:, s % _CHUNK]
            acts = chooser(states)
            sampler.apply(states, acts, u, disp)
            states += disp
        final_totals.append(states.sum(axis=1))
        if start == 0:
            first_final = tuple(int(v) for v in states[0])
    totals = np.concatenate(final_totals)
    assert first_final is not None
    return TrajectorySummary(
        cfg.trials, cfg.steps, float(totals.mean()), int(totals.max()), first_final
    )
