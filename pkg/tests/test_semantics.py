from __future__ import annotations

import pytest

from sessev.bundled import load
from sessev.errors import NotEnabled
from sessev.kernel import AsyncType, DefEnv, Network, Stop, network_equiv, queue_equiv
from sessev.semantics import (
    bisimilar_to_depth,
    net_enabled,
    net_run,
    net_step,
    type_enabled,
    type_run,
    type_step,
)
from sessev.textfmt import (
    parse_comm,
    parse_global,
    parse_network,
    parse_queue,
    parse_trace,
)


def comm(s):
    return parse_comm(s)


@pytest.fixture()
def char():
    sf = load("characteristic")
    return sf


# ---------------------------------------------------------------------- #
# network LTS
# ---------------------------------------------------------------------- #


def test_net_enabled_characteristic_start(char):
    net = char.networks["Nchar"]
    assert set(net_enabled(net, char.env)) == {comm("p->q!l"), comm("q->p!m")}


def test_net_enabled_empty_for_inactive():
    env = DefEnv()
    net = parse_network("p :: 0 |- empty")
    assert net_enabled(net, env) == ()


def test_net_enabled_input_from_queue():
    env = DefEnv()
    net = parse_network("p :: q?l |- <q l p>")
    assert set(net_enabled(net, env)) == {comm("q->p?l")}


def test_five_step_run_uses_queue_equivalence(char):
    # the second read overtakes the first because the messages sit on
    # different channels
    net = char.networks["Nchar"]
    tau = parse_trace("p->q!l . q->p!m . q->p?m . p->q?l")
    final = net_run(net, tau, char.env)
    expected = Network.of({"p": Stop(), "q": Stop()}, ())
    assert network_equiv(final, expected, char.env)


def test_send_appends_to_queue(char):
    net = char.networks["Nchar"]
    stepped = net_step(net, comm("p->q!l"), char.env)
    assert queue_equiv(stepped.queue, parse_queue("<p l q>"))


def test_two_step_evolution_of_doubled_network():
    sf = load("characteristic2")
    net = sf.networks["Nchar2"]
    mid = net_run(net, parse_trace("p->q!l . q->p!m"), sf.env)
    assert network_equiv(mid, sf.networks["Nchar2_mid"], sf.env)


def test_net_step_not_enabled(char):
    net = char.networks["Nchar"]
    with pytest.raises(NotEnabled):
        net_step(net, comm("p->q!wrong"), char.env)
    with pytest.raises(NotEnabled):
        net_step(net, comm("p->q?l"), char.env)


def test_net_run_reports_failing_index(char):
    net = char.networks["Nchar"]
    with pytest.raises(NotEnabled, match="step 2"):
        net_run(net, parse_trace("p->q!l . p->q!l"), char.env)


def test_enabled_players_are_singletons(char):
    net = char.networks["Nchar"]
    for b in net_enabled(net, char.env):
        assert len({b.player}) == 1


# ---------------------------------------------------------------------- #
# type LTS
# ---------------------------------------------------------------------- #


def test_type_enabled_characteristic_root(char):
    # both emissions are enabled: q's one fires under p's guard since it is
    # independent of it (and the network itself can start with either)
    at = char.types["Ta"]
    assert set(type_enabled(at, char.env)) == {comm("p->q!l"), comm("q->p!m")}


def test_type_ext_in_axiom():
    env = DefEnv()
    at = AsyncType(parse_global("p->q?l ; p->q!m ; p->q?m"), parse_queue("<p l q>"))
    assert comm("p->q?l") in set(type_enabled(at, env))
    stepped = type_step(at, comm("p->q?l"), env)
    assert queue_equiv(stepped.queue, ())


def test_icomm_out_read_under_output_guard():
    # the guarded read consumes the queued message, not the freshly sent one
    sf = load("projection")
    at = sf.types["Tguard"]
    stepped = type_step(at, comm("p->q?l"), sf.env)
    assert queue_equiv(stepped.queue, ())
    expected = parse_global("p->q!l ; Gguard", sf.env)
    from sessev.kernel import regular_equal

    assert regular_equal(stepped.gtype, expected, sf.env)


def test_icomm_does_not_consume_own_message():
    env = DefEnv()
    env.define_global("G2", parse_global("p->r!l ; p->r?l ; G2"))
    at = AsyncType(parse_global("G2", env), ())
    # the read is only enabled once its message is actually queued
    assert set(type_enabled(at, env)) == {comm("p->r!l")}


def test_type_run_and_not_enabled(char):
    at = char.types["Ta"]
    tau = parse_trace("p->q!l . q->p!m . q->p?m . p->q?l")
    final = type_run(at, tau, char.env)
    assert final.queue == ()
    with pytest.raises(NotEnabled):
        type_step(at, comm("q->p?m"), char.env)


def test_second_output_allowed_under_guard(char):
    # in Ta the emission of q is independent of p's guarding emission
    at = char.types["Ta"]
    stepped = type_step(at, comm("q->p!m"), char.env)
    assert queue_equiv(stepped.queue, parse_queue("<q m p>"))


# ---------------------------------------------------------------------- #
# joint exploration
# ---------------------------------------------------------------------- #


def test_characteristic_bisimilar_to_depth(char):
    net = char.networks["Nchar"]
    for name in ("Ta", "Tb", "Tc", "Td"):
        res = bisimilar_to_depth(net, char.types[name], 6, char.env)
        assert res.equivalent, (name, res.witness)


def test_wrong_type_gives_witness(char):
    net = char.networks["Nchar"]
    env = char.env
    at = AsyncType(parse_global("p->q!l ; p->q?l"), ())
    res = bisimilar_to_depth(net, at, 6, env)
    assert not res.equivalent
    assert res.witness is not None


def test_deadlocked_pair_trivially_bisimilar():
    env = DefEnv()
    net = parse_network("p :: 0 |- empty")
    at = AsyncType(parse_global("End"), ())
    assert bisimilar_to_depth(net, at, 4, env).equivalent


def test_choice_network_bisimilar():
    sf = load("choice")
    res = bisimilar_to_depth(sf.networks["Nch"], sf.types["Tch"], 6, sf.env)
    assert res.equivalent, res.witness
