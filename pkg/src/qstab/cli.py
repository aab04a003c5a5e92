"""Command-line front end.

Verbs: certify, drift, alpha, simulate, return-time, martingale, blowup.
Exit codes are a stable contract: 0 for success (for ``certify``, a
non-stabilizability verdict), 2 for an inconclusive certificate, 1 for
any error.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from typing import Sequence

from . import certify as certify_mod
from . import netmodel, simulate
from .jsonio import render_json
from .netmodel import ConstructionError, SpecFileError, format_rational, parse_rational
from .simulate import PolicyError, SimConfig

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONCLUSIVE = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A002 - argparse API
        raise _UsageError(message)


def _parse_x0(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part.strip()) for part in text.split(","))
    except ValueError as exc:
        raise ConstructionError(f"--x0 must be comma-separated integers, got {text!r}") from exc


def _parse_alpha(text: str) -> tuple[Fraction, ...]:
    return tuple(parse_rational(part) for part in text.split(","))


def _parse_policy(net, text: str):
    if text.startswith("threshold:"):
        try:
            cutoff = int(text.split(":", 1)[1])
        except ValueError as exc:
            raise ConstructionError(f"bad threshold policy {text!r}, expected threshold:<int>") from exc
        return simulate.make_policy(net, "threshold", threshold=cutoff)
    if text in ("pull-priority", "push-priority"):
        return simulate.make_policy(net, text)
    raise ConstructionError(
        f"unknown policy {text!r}; expected pull-priority, push-priority, or threshold:<int>"
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="qstab", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def add_common(p):
        p.add_argument("spec", help="path to a network spec JSON file")
        p.add_argument("--format", choices=("text", "json"), default="text")

    def add_sim(p):
        add_common(p)
        p.add_argument("--policy", default="pull-priority",
                       help="pull-priority | push-priority | threshold:<c>")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=10_000)
        p.add_argument("--steps", type=int, default=1_000)
        p.add_argument("--cap", type=int, default=10_000)
        p.add_argument("--x0", default=None, help="comma-separated start state (default origin)")

    p_certify = sub.add_parser("certify", help="compute a harmonic certificate")
    add_common(p_certify)
    p_certify.add_argument("--budget", type=int, default=3,
                           help="coefficient bound for the null-space combination search")

    p_drift = sub.add_parser("drift", help="print the exact drift matrix and its rank")
    add_common(p_drift)

    p_alpha = sub.add_parser("alpha", help="print the family closed-form weight vector")
    add_common(p_alpha)

    for verb, help_text in (
        ("simulate", "run fixed-length trajectories and summarize them"),
        ("return-time", "estimate return times to the start state"),
        ("martingale", "check the empirical drift of the weighted queue length"),
        ("blowup", "estimate the growth rate of the total queue length"),
    ):
        p = sub.add_parser(verb, help=help_text)
        add_sim(p)
        if verb == "martingale":
            p.add_argument("--alpha", default=None,
                           help="comma-separated rational weights (default: from certify)")
    return parser


def _emit(payload: dict, fmt: str) -> None:
    if fmt == "json":
        print(render_json(payload))
        return
    for key, value in payload.items():
        if key == "rows":
            print("rows:")
            for row in value:
                print("  [" + ", ".join(row) + "]")
        elif isinstance(value, dict):
            print(f"{key}: " + ", ".join(f"{k}={v}" for k, v in value.items()))
        elif isinstance(value, list):
            if value and isinstance(value[0], list):
                inner = ", ".join("[" + ", ".join(str(x) for x in v) + "]" for v in value)
                print(f"{key}: [{inner}]")
            else:
                print(f"{key}: [" + ", ".join(str(v) for v in value) + "]")
        elif isinstance(value, float):
            print(f"{key}: {format(value, '.17g')}")
        else:
            print(f"{key}: {value}")


def _sim_config(ns, net) -> SimConfig:
    x0 = _parse_x0(ns.x0) if ns.x0 is not None else None
    if x0 is not None and len(x0) != net.n_queues:
        raise ConstructionError(
            f"--x0 has length {len(x0)}, the network has {net.n_queues} queues"
        )
    return SimConfig(seed=ns.seed, steps=ns.steps, trials=ns.trials, cap=ns.cap, x0=x0)


def _dispatch(ns) -> int:
    net = netmodel.load_spec(ns.spec)
    if ns.verb == "certify":
        cert = certify_mod.certify_nonstabilizable(net, combo_budget=ns.budget)
        _emit(cert.to_json_dict(), ns.format)
        return EXIT_OK if cert.verdict is certify_mod.Verdict.NON_STABILIZABLE else EXIT_INCONCLUSIVE
    if ns.verb == "drift":
        d = certify_mod.drift_matrix(net)
        payload = {
            "M": d.n_queues,
            "L": d.n_actions,
            "rank": certify_mod.rank(d),
            "rows": [[format_rational(x) for x in row] for row in d.rows],
        }
        _emit(payload, ns.format)
        return EXIT_OK
    if ns.verb == "alpha":
        closed = certify_mod.family_alpha(net)
        if closed is None:
            raise ConstructionError(
                "no closed-form weights: needs a critical push-pull network, a critical "
                "ring with evenly many servers, or a critical re-entrant network"
            )
        _emit({"family": net.family, "alpha": [format_rational(x) for x in closed]}, ns.format)
        return EXIT_OK
    policy = _parse_policy(net, ns.policy)
    cfg = _sim_config(ns, net)
    if ns.verb == "simulate":
        report = simulate.run_trajectories(net, policy, cfg)
    elif ns.verb == "return-time":
        report = simulate.estimate_return_time(net, policy, cfg)
    elif ns.verb == "martingale":
        if ns.alpha is not None:
            alpha = _parse_alpha(ns.alpha)
        else:
            cert = certify_mod.certify_nonstabilizable(net)
            if cert.alpha is None:
                raise ConstructionError(
                    "no --alpha given and the certificate search was inconclusive"
                )
            alpha = cert.alpha
        report = simulate.martingale_test(net, policy, alpha, cfg)
    else:  # blowup
        report = simulate.blowup_probe(net, policy, cfg)
    _emit(report.to_json_dict(), ns.format)
    return EXIT_OK


def run(argv: Sequence[str] | None = None) -> int:
    """Parse argv, execute one verb, and return the process exit code."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        return _dispatch(ns)
    except (SpecFileError, ConstructionError, PolicyError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
