from __future__ import annotations

import itertools
import random

import pytest

from sessev.bundled import load
from sessev.domains import (
    domain_iso,
    enumerate_configurations,
    is_configuration,
    is_proving_sequence,
)
from sessev.errors import PreconditionError
from sessev.events import FlowES, fes_of_network, nec
from sessev.kernel import AsyncType, DefEnv, GEnd, Network
from sessev.textfmt import parse_trace
from tests.test_events import ne


# ---------------------------------------------------------------------- #
# configurations of the worked examples
# ---------------------------------------------------------------------- #


def _configs_of(name, net_name, depth):
    sf = load(name)
    fes = fes_of_network(sf.networks[net_name], sf.env, depth)
    dom = enumerate_configurations(fes)
    return sf, fes, dom


def test_configurations_of_doubled_network():
    sf, fes, dom = _configs_of("characteristic2", "Nchar2", 4)
    nonempty = {c for c in dom.configurations if c}
    assert len(nonempty) == 14
    rho = lambda i: ne("p", ["q!l", "q!l.q?m", "q!l.q?m.q!l", "q!l.q?m.q!l.q?m"][i - 1])
    rhop = lambda i: ne("q", ["p!m", "p!m.p?l", "p!m.p?l.p!m", "p!m.p?l.p!m.p?l"][i - 1])
    listed = [
        {rho(1)},
        {rhop(1)},
        {rho(1), rhop(1)},
        {rho(1), rhop(1), rho(2)},
        {rho(1), rhop(1), rhop(2)},
        {rho(1), rhop(1), rho(2), rhop(2)},
        {rho(1), rhop(1), rho(2), rho(3)},
        {rho(1), rhop(1), rhop(2), rhop(3)},
        {rho(1), rhop(1), rho(2), rhop(2), rho(3)},
        {rho(1), rhop(1), rho(2), rhop(2), rhop(3)},
        {rho(1), rhop(1), rho(2), rhop(2), rho(3), rhop(3)},
        {rho(1), rhop(1), rho(2), rhop(2), rho(3), rhop(3), rho(4)},
        {rho(1), rhop(1), rho(2), rhop(2), rho(3), rhop(3), rhop(4)},
        {rho(1), rhop(1), rho(2), rhop(2), rho(3), rhop(3), rho(4), rhop(4)},
    ]
    assert nonempty == {frozenset(c) for c in listed}
    # any other small subset is not a configuration
    for size2 in itertools.combinations(fes.events, 2):
        s = frozenset(size2)
        assert is_configuration(fes, s) == (s in dom.configurations)


def test_configurations_of_choice_network():
    sf, fes, dom = _configs_of("choice", "Nch", 4)
    nonempty = {c for c in dom.configurations if c}
    assert len(nonempty) == 12
    r1, r2 = ne("p", "q!l1"), ne("p", "q!l2")
    r3, r4 = ne("p", "q!l1.r!l"), ne("p", "q!l2.r!l")
    rp1, rp2 = ne("q", "p?l1"), ne("q", "p?l2")
    rpp1 = ne("r", "p?l")
    listed = [
        {r1},
        {r1, r3},
        {r1, rp1},
        {r1, r3, rp1},
        {r1, r3, rpp1},
        {r1, r3, rp1, rpp1},
        {r2},
        {r2, r4},
        {r2, rp2},
        {r2, r4, rp2},
        {r2, r4, rpp1},
        {r2, r4, rp2, rpp1},
    ]
    assert nonempty == {frozenset(c) for c in listed}
    assert not is_configuration(fes, {r1, r2})


def test_configurations_of_stepped_choice_network():
    sf, fes, dom = _configs_of("choice", "Nch_mid", 4)
    nonempty = {c for c in dom.configurations if c}
    assert len(nonempty) == 5
    rho5, rp3, rpp2 = ne("p", "r!l"), ne("q", "p?l1"), ne("r", "p?l")
    assert nonempty == {
        frozenset(c)
        for c in [{rho5}, {rp3}, {rho5, rp3}, {rho5, rpp2}, {rho5, rp3, rpp2}]
    }


def test_empty_es_domain():
    fes = FlowES((), frozenset(), frozenset(), ())
    dom = enumerate_configurations(fes)
    assert dom.configurations == frozenset({frozenset()})


def test_empty_set_is_configuration():
    sf, fes, _ = _configs_of("choice", "Nch", 4)
    assert is_configuration(fes, frozenset())


# ---------------------------------------------------------------------- #
# proving sequences
# ---------------------------------------------------------------------- #


def test_nec_of_run_is_proving_sequence():
    sf = load("characteristic")
    fes = fes_of_network(sf.networks["Nchar"], sf.env, 4)
    tau = parse_trace("p->q!l . q->p!m . q->p?m . p->q?l")
    seq = nec((), tau)
    assert is_proving_sequence(fes, seq)
    assert {e for e in seq} == {
        ne("p", "q!l"),
        ne("q", "p!m"),
        ne("p", "q!l.q?m"),
        ne("q", "p!m.p?l"),
    }


def test_input_before_justifier_not_proving():
    sf = load("characteristic")
    fes = fes_of_network(sf.networks["Nchar"], sf.env, 4)
    bad = [ne("p", "q!l.q?m"), ne("p", "q!l"), ne("q", "p!m")]
    assert not is_proving_sequence(fes, bad)


def test_prefixes_of_proving_sequences_prove():
    sf = load("characteristic2")
    fes = fes_of_network(sf.networks["Nchar2"], sf.env, 4)
    tau = parse_trace(
        "p->q!l . q->p!m . q->p?m . p->q?l . p->q!l . q->p!m . q->p?m . p->q?l"
    )
    seq = nec((), tau)
    assert is_proving_sequence(fes, seq)
    for i in range(len(seq) + 1):
        assert is_proving_sequence(fes, seq[:i])


# ---------------------------------------------------------------------- #
# Prop 4.7-style brute force: configurations iff provable enumeration
# ---------------------------------------------------------------------- #


def _random_fes(rng, n):
    events = tuple(range(n))
    flow = set()
    for a in events:
        for b in events:
            if a != b and rng.random() < 0.28:
                flow.add((a, b))
    conflict = set()
    for a in events:
        for b in events:
            if a < b and rng.random() < 0.2:
                conflict.add((a, b))
                conflict.add((b, a))
    return FlowES(events, frozenset(flow), frozenset(conflict), ())


def _provable_by_backtracking(es, X):
    """Independent oracle: search for an enumeration of X that is a proving
    sequence, checking the definition on whole prefixes each time."""
    X = list(X)

    def extend(prefix, remaining):
        if not remaining:
            return True
        for i, e in enumerate(remaining):
            cand = prefix + [e]
            if is_proving_sequence(es, cand):
                if extend(cand, remaining[:i] + remaining[i + 1 :]):
                    return True
        return False

    return extend([], X)


def test_configuration_iff_proving_enumeration_bruteforce():
    rng = random.Random(29)
    cases = 0
    for _ in range(40):
        es = _random_fes(rng, rng.randint(3, 8))
        enumerated = enumerate_configurations(es).configurations
        for size in range(0, min(len(es.events), 5) + 1):
            for subset in itertools.combinations(es.events, size):
                s = frozenset(subset)
                cases += 1
                direct = is_configuration(es, s)
                provable = _provable_by_backtracking(es, sorted(s))
                assert direct == provable, (es, s)
                assert (s in enumerated) == direct
    assert cases >= 500


# ---------------------------------------------------------------------- #
# separation: configurations grow one event at a time
# ---------------------------------------------------------------------- #


def test_separation_on_example_domains():
    for name, net_name in (("characteristic2", "Nchar2"), ("choice", "Nch")):
        sf = load(name)
        fes = fes_of_network(sf.networks[net_name], sf.env, 4)
        dom = enumerate_configurations(fes).configurations
        for x in dom:
            for y in dom:
                if x < y:
                    assert any(
                        x | {e} in dom for e in y - x
                    ), f"no one-step extension inside {y} from {x}"


# ---------------------------------------------------------------------- #
# the isomorphism check
# ---------------------------------------------------------------------- #


def test_iso_choice_pair():
    sf = load("choice")
    res = domain_iso(sf.networks["Nch"], sf.types["Tch"], sf.env, 4)
    assert res.isomorphic, res.failure
    assert res.config_count == 12


def test_iso_characteristic2_pair():
    # depth 8 covers every path of the doubled exchange exactly
    sf = load("characteristic2")
    res = domain_iso(sf.networks["Nchar2"], sf.types["Tchar2"], sf.env, 8)
    assert res.isomorphic, res.failure
    assert res.config_count == 14
    assert res.margin_note is None


def test_iso_trivial_pair():
    env = DefEnv()
    res = domain_iso(Network.of({}, ()), AsyncType(GEnd(), ()), env, 4)
    assert res.isomorphic
    assert res.config_count == 0


def test_iso_single_characteristic_all_types():
    sf = load("characteristic")
    for name in ("Ta", "Tb", "Tc", "Td"):
        res = domain_iso(sf.networks["Nchar"], sf.types[name], sf.env, 4)
        assert res.isomorphic, (name, res.failure)
        assert res.config_count == 6


def test_iso_requires_typed_pair():
    sf = load("characteristic")
    with pytest.raises(PreconditionError):
        domain_iso(sf.networks["Nchar"], sf.types["Ta_stale"], sf.env, 4)


def test_iso_truncated_recursive_pair_reports_margin():
    sf = load("loop")
    res = domain_iso(sf.networks["Nloop"], sf.types["Tloop"], sf.env, 4)
    assert res.isomorphic, res.failure
    assert res.margin_note is not None
