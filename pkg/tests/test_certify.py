"""Drift matrices, exact rank, harmonic weights, and certificates.

Frozen expected values were computed with the independent oracles named in
each test (hand enumeration of outcomes, Fraction Gauss-Jordan, floating
point elimination at 1e-9) before being asserted here.
"""

from __future__ import annotations

import random
from fractions import Fraction

import numpy as np
import pytest

from qstab import certify, exactla
from qstab.certify import (
    UnsupportedFamilyError,
    Verdict,
    certify_nonstabilizable,
    check_nondegeneracy_direct,
    check_nondegeneracy_lemma,
    drift_matrix,
    family_alpha,
    is_critical,
    null_space_basis,
    rank,
    reentrant_alpha,
    ring_alpha_even,
    sign_matrix,
    verify_sign_pattern,
    verify_unit_pairing,
)
from qstab.netmodel import (
    build_custom,
    build_push_pull,
    build_reentrant,
    build_ring,
    build_two_stream_example,
    index_sets,
)

F = Fraction


def float_rank(rows) -> int:
    return int(np.linalg.matrix_rank(np.array(rows, dtype=float), tol=1e-9))


def random_rates(rnd, n):
    return [F(rnd.randint(1, 9), rnd.randint(1, 9)) for _ in range(n)]


# A critical single-stream network: server 1 steps {0, 3} have inverse-rate
# sum 1 + 1/3 = 4/3, server 2 steps {1, 2, 4} have 1/2 + 1/2 + 1/3 = 4/3.
CRITICAL_STREAM = [[(1, 1), (2, 2), (2, 2), (1, 3), (2, 3)]]


# ---------------------------------------------------------------------------
# drift matrix


def test_drift_rows_critical_symmetric_push_pull():
    # Hand sum: (push,push) moves +e1 or +e2 each w.p. 1/2 and so on.
    d = drift_matrix(build_push_pull(1, 1, 1, 1))
    assert d.rows == (
        (F(1, 2), F(1, 2)),
        (F(-1, 2), F(-1, 2)),
        (F(0), F(0)),
        (F(0), F(0)),
    )


def test_drift_row_unbalanced_push_pull():
    d = drift_matrix(build_push_pull(1, 1, 2, 2))
    assert d.rows[2] == (F(-1, 3), F(0))
    assert d.rows[3] == (F(0), F(-1, 3))


def test_drift_all_push_ring_row():
    d = drift_matrix(build_ring([1] * 4, [1] * 4))
    assert d.rows[0] == (F(1, 4),) * 4


def test_drift_row_mixed_ring_action():
    # Hand enumeration (see netmodel tests): outcomes +e1, -e1, -e2, each
    # probability 1/3, so the expected displacement is (0, -1/3, 0).
    ring = build_ring([1, 1, 1], [1, 1, 1])
    row = drift_matrix(ring).rows[ring.labels()["(push,pull,pull)"]]
    assert row == (F(0), F(-1, 3), F(0))


def test_drift_entries_bounded_and_shape_kept():
    net = build_two_stream_example()
    d = drift_matrix(net)
    assert d.n_actions == net.n_actions and d.n_queues == net.n_queues
    assert all(abs(x) <= 1 for row in d.rows for x in row)
    # Balanced rows are kept, preserving the L x M shape.
    pp = drift_matrix(build_push_pull(1, 1, 1, 1))
    assert pp.n_actions == 4 and any(all(x == 0 for x in row) for row in pp.rows)


# ---------------------------------------------------------------------------
# rank and null space


def test_rank_critical_symmetric_push_pull():
    d = drift_matrix(build_push_pull(1, 1, 1, 1))
    assert rank(d) == float_rank(d.rows) == 1


def test_rank_ring_parity_examples():
    even = drift_matrix(build_ring([1] * 4, [1] * 4))
    odd = drift_matrix(build_ring([1] * 3, [1] * 3))
    assert rank(even) == float_rank(even.rows) == 3
    assert rank(odd) == float_rank(odd.rows) == 3


def test_null_space_examples():
    assert null_space_basis(drift_matrix(build_push_pull(1, 1, 1, 1))) == [(1, -1)]
    assert null_space_basis(drift_matrix(build_push_pull(1, 2, 1, 2))) == [(2, -1)]
    noncritical = drift_matrix(build_push_pull(1, 1, 2, 2))
    assert float_rank(noncritical.rows) == 2
    assert null_space_basis(noncritical) == []


# ---------------------------------------------------------------------------
# non-degeneracy


def test_nondegeneracy_direct():
    net = build_push_pull(1, 1, 1, 1)
    assert check_nondegeneracy_direct(net, (1, -1))
    assert check_nondegeneracy_direct(net, (1, 1))  # every support moves one queue
    assert not check_nondegeneracy_direct(net, (0, 1))  # (push,pull) support is +-e1
    with pytest.raises(ValueError):
        check_nondegeneracy_direct(net, (0, 0))
    with pytest.raises(ValueError):
        check_nondegeneracy_direct(net, (1, 0, 0))


def test_nondegeneracy_lemma():
    ring = build_ring([1] * 4, [1] * 4)
    assert check_nondegeneracy_lemma(ring, (1, -1, 1, -1))
    assert not check_nondegeneracy_lemma(ring, (0, 1, -1, 1))
    net = build_reentrant(CRITICAL_STREAM)
    alpha = reentrant_alpha(net)
    assert alpha == (F(-1), F(-1, 2), F(0), F(-1, 3))
    # A zero weight on a middle queue is fine; the lemma only constrains
    # external queues and transfer pairs.
    assert check_nondegeneracy_lemma(net, alpha)
    assert not check_nondegeneracy_lemma(net, (0, 1, 2, 3))


def test_lemma_implies_direct_on_random_nets():
    rnd = random.Random(7)
    nets = []
    for _ in range(6):
        lam = random_rates(rnd, 2)
        nets.append(build_push_pull(*lam, *lam))
        m = rnd.choice([2, 3, 4])
        rates = random_rates(rnd, m)
        nets.append(build_ring(rates, rates))
    nets.append(build_reentrant(CRITICAL_STREAM))
    nets.append(build_two_stream_example())
    from qstab.netmodel import dump_spec, loads_spec

    nets.append(loads_spec(dump_spec(build_push_pull(1, 2, 1, 2))))
    rng = random.Random(8)
    for net in nets:
        candidates = [tuple(F(rng.randint(-3, 3)) for _ in range(net.n_queues)) for _ in range(8)]
        cert = certify_nonstabilizable(net)
        if cert.alpha is not None:
            candidates.append(cert.alpha)
        for alpha in candidates:
            if all(x == 0 for x in alpha):
                continue
            if check_nondegeneracy_lemma(net, alpha):
                assert check_nondegeneracy_direct(net, alpha)


# ---------------------------------------------------------------------------
# criticality


def test_is_critical_examples():
    assert is_critical(build_push_pull(1, 2, 1, 2))
    assert not is_critical(build_push_pull(1, 1, 2, 2))
    assert is_critical(build_reentrant(CRITICAL_STREAM))
    perturbed = [[(1, 1), (2, 2), (2, 2), (1, 3), (2, 4)]]
    assert not is_critical(build_reentrant(perturbed))
    with pytest.raises(UnsupportedFamilyError):
        is_critical(build_custom(1, [("x", [((1,), 1)])]))


# ---------------------------------------------------------------------------
# closed forms


def test_ring_alpha_even_examples():
    assert ring_alpha_even(build_ring([1] * 4, [1] * 4)) == (F(1), F(-1), F(1), F(-1))
    assert ring_alpha_even(build_ring([1, 2], [1, 2])) == (F(1), F(-1, 2))
    with pytest.raises(ValueError):
        ring_alpha_even(build_ring([1] * 3, [1] * 3))
    with pytest.raises(ValueError):
        ring_alpha_even(build_ring([1, 1], [2, 2]))
    with pytest.raises(UnsupportedFamilyError):
        ring_alpha_even(build_push_pull(1, 1, 1, 1))


def test_reentrant_alpha_push_pull_shaped():
    net = build_reentrant([[(1, 1), (2, 1)], [(2, 1), (1, 1)]])
    alpha = reentrant_alpha(net)
    assert alpha == (F(-1), F(1))
    d = drift_matrix(net)
    assert all(exactla.dot(row, alpha) == 0 for row in d.rows)


def test_reentrant_alpha_signed_sums():
    net = build_reentrant(CRITICAL_STREAM)
    meta = net.meta
    alpha = reentrant_alpha(net)
    # First queue of each stream carries the signed inverse supply rate.
    for i in range(meta.n_streams):
        server, rate = meta.streams[i][0]
        assert alpha[meta.queue_index(i, 1)] == F(-1 if server == 1 else 1) / rate
    # Transfer pairs differ by exactly the signed inverse rate of the step
    # between them.
    for src, dst in index_sets(net).transfers:
        i, j = meta.locate_queue(src)
        server, rate = meta.streams[i][j]
        assert alpha[dst] - alpha[src] == F(-1 if server == 1 else 1) / rate
    with pytest.raises(ValueError):
        reentrant_alpha(build_reentrant([[(1, 1), (2, 2)]]))
    with pytest.raises(UnsupportedFamilyError):
        reentrant_alpha(build_push_pull(1, 1, 1, 1))


def test_family_alpha_dispatch():
    assert family_alpha(build_push_pull(1, 2, 1, 2)) == (F(1), F(-1, 2))
    assert family_alpha(build_ring([1, 2, 3, 4], [1, 2, 3, 4])) == (
        F(1), F(-1, 2), F(1, 3), F(-1, 4),
    )
    assert family_alpha(build_ring([1] * 3, [1] * 3)) is None
    assert family_alpha(build_push_pull(1, 1, 2, 2)) is None
    assert family_alpha(build_two_stream_example()) is not None


# ---------------------------------------------------------------------------
# sign patterns


def test_sign_matrix_examples():
    pp = sign_matrix(drift_matrix(build_push_pull(1, 1, 1, 1)))
    assert pp.rows == ((1, 1), (-1, -1), (0, 0), (0, 0))
    ring = build_ring([1] * 4, [1] * 4)
    dhat = sign_matrix(drift_matrix(ring))
    assert dhat.rows[0] == (1, 1, 1, 1)


def test_sign_rank_equals_drift_rank_on_critical_rings():
    rnd = random.Random(11)
    for m in (2, 3, 4, 5):
        rates = random_rates(rnd, m)
        d = drift_matrix(build_ring(rates, rates))
        dhat = sign_matrix(d)
        sign_rows = [[F(x) for x in row] for row in dhat.rows]
        assert exactla.rational_rank(sign_rows) == rank(d)


def test_sign_pattern_all_rows_of_even_ring():
    # Exhaustive over all 16 rows.
    dhat = sign_matrix(drift_matrix(build_ring([1] * 4, [1] * 4)))
    assert verify_sign_pattern(dhat)


def test_sign_pattern_row_set_of_odd_ring():
    # Exhaustive generation: the 3-ring produces exactly these sign rows,
    # and in particular never (+1, 0, -1).
    dhat = sign_matrix(drift_matrix(build_ring([1] * 3, [1] * 3)))
    rows = set(dhat.rows)
    assert rows == {
        (1, 1, 1), (-1, -1, -1),
        (1, 0, 0), (0, 1, 0), (0, 0, 1),
        (-1, 0, 0), (0, -1, 0), (0, 0, -1),
    }
    assert (1, 0, -1) not in rows
    # And the cyclic parity checker rejects that pattern: going around the
    # ring, the two opposite signs are adjacent with zero separating zeros.
    from qstab.certify import SignMatrix

    assert not verify_sign_pattern(SignMatrix(((1, 0, -1),)))
    assert verify_sign_pattern(SignMatrix(((0, 0, 0),)))


def test_sign_pattern_zero_count_parity():
    rnd = random.Random(13)
    for m in range(2, 7):
        rates = random_rates(rnd, m)
        dhat = sign_matrix(drift_matrix(build_ring(rates, rates)))
        assert verify_sign_pattern(dhat)
        for row in dhat.rows:
            assert sum(1 for x in row if x == 0) % 2 == 0


# ---------------------------------------------------------------------------
# unit pairing


def test_unit_pairing_critical_and_perturbed():
    net = build_reentrant(CRITICAL_STREAM)
    alpha = reentrant_alpha(net)
    assert verify_unit_pairing(net, alpha)
    # Perturbing the final rate breaks criticality; the signed partial sums
    # (which do not involve the final rate) then fail the pairing at the
    # last step of the stream.
    perturbed = build_reentrant([[(1, 1), (2, 2), (2, 2), (1, 3), (2, 4)]])
    assert not verify_unit_pairing(perturbed, alpha)
    with pytest.raises(UnsupportedFamilyError):
        verify_unit_pairing(build_push_pull(1, 1, 1, 1), (1, -1))


# ---------------------------------------------------------------------------
# certificates


def test_certify_critical_push_pull():
    cert = certify_nonstabilizable(build_push_pull(1, 1, 1, 1))
    assert cert.verdict is Verdict.NON_STABILIZABLE
    assert cert.alpha == (F(1), F(-1))
    assert cert.dalpha_zero and cert.nondeg_direct and cert.nondeg_lemma
    assert cert.critical is True and cert.rank == 1


def test_certify_critical_even_ring_closed_form():
    cert = certify_nonstabilizable(build_ring([1, 2, 3, 4], [1, 2, 3, 4]))
    assert cert.verdict is Verdict.NON_STABILIZABLE
    assert cert.alpha == (F(12), F(-6), F(4), F(-3))


def test_certify_inconclusive_cases():
    odd = certify_nonstabilizable(build_ring([1] * 3, [1] * 3))
    assert odd.verdict is Verdict.INCONCLUSIVE
    assert odd.rank == 3 and odd.alpha is None and odd.null_space_basis == ()
    noncrit = certify_nonstabilizable(build_push_pull(1, 1, 2, 2))
    assert noncrit.verdict is Verdict.INCONCLUSIVE and noncrit.rank == 2
    assert noncrit.critical is False


def test_certificate_payload_schema():
    payload = certify_nonstabilizable(build_push_pull(1, 2, 1, 2)).to_json_dict()
    assert payload == {
        "verdict": "non-stabilizable",
        "rank": 1,
        "M": 2,
        "L": 4,
        "alpha": ["2", "-1"],
        "nondegeneracy": {"direct": True, "lemma": True},
        "critical": True,
        "null_space_basis": [["2", "-1"]],
    }


def test_certificates_are_sound_on_random_family_nets():
    # For every NON_STABILIZABLE verdict: D alpha = 0 exactly and every
    # action's support can move the weighted length.
    rnd = random.Random(17)
    nets = []
    for _ in range(4):
        lam = random_rates(rnd, 2)
        nets.append(build_push_pull(*lam, *lam))
        nets.append(build_push_pull(*random_rates(rnd, 2), *random_rates(rnd, 2)))
        m = rnd.choice([2, 3, 4, 5, 6])
        rates = random_rates(rnd, m)
        nets.append(build_ring(rates, rates))
    nets.append(build_reentrant(CRITICAL_STREAM))
    nets.append(build_two_stream_example())
    for net in nets:
        cert = certify_nonstabilizable(net)
        if cert.verdict is Verdict.NON_STABILIZABLE:
            d = drift_matrix(net)
            assert all(exactla.dot(row, cert.alpha) == 0 for row in d.rows)
            assert check_nondegeneracy_direct(net, cert.alpha)
        else:
            assert cert.alpha is None


def test_ring_rank_dichotomy_small_sweep():
    rnd = random.Random(19)
    for m in range(2, 7):
        for _ in range(2):
            rates = random_rates(rnd, m)
            net = build_ring(rates, rates)
            d = drift_matrix(net)
            expected = m - 1 if m % 2 == 0 else m
            assert rank(d) == expected
            if m % 2 == 0:
                alpha = ring_alpha_even(net)
                basis = null_space_basis(d)
                assert len(basis) == 1
                # The closed form lies in the one-dimensional null space.
                assert exactla.normalize_integer_vector(alpha) == basis[0]


def test_reentrant_rows_annihilate_alpha():
    net = build_two_stream_example()
    alpha = reentrant_alpha(net)
    d = drift_matrix(net)
    assert all(exactla.dot(row, alpha) == 0 for row in d.rows)


def test_scaling_invariance():
    scale = F(5, 3)
    for base, scaled in (
        (build_push_pull(1, 2, 1, 2), build_push_pull(scale, 2 * scale, scale, 2 * scale)),
        (
            build_ring([1, 2, 3, 4], [1, 2, 3, 4]),
            build_ring([scale, 2 * scale, 3 * scale, 4 * scale],
                       [scale, 2 * scale, 3 * scale, 4 * scale]),
        ),
    ):
        d0, d1 = drift_matrix(base), drift_matrix(scaled)
        assert d0.rows == d1.rows
        c0, c1 = certify_nonstabilizable(base), certify_nonstabilizable(scaled)
        assert c0.verdict == c1.verdict and c0.rank == c1.rank and c0.alpha == c1.alpha


def test_custom_net_certification_uses_null_space():
    # A custom network equivalent to the critical push-pull network is
    # certified from its null space (no closed form applies).
    from qstab.netmodel import dump_spec, loads_spec

    custom = loads_spec(dump_spec(build_push_pull(1, 2, 1, 2)))
    cert = certify_nonstabilizable(custom)
    assert cert.verdict is Verdict.NON_STABILIZABLE
    assert cert.alpha == (F(2), F(-1))
    assert cert.critical is None
