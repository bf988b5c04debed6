from __future__ import annotations

import random

import pytest

from sessev.bundled import NAMES, load
from sessev.errors import ParseError
from sessev.kernel import DefEnv, GOut, In, Out, Stop, regular_equal
from sessev.textfmt import (
    parse_global,
    parse_network,
    parse_process,
    parse_queue,
    parse_session,
    parse_trace,
    print_global,
    print_network,
    print_process,
    print_queue,
    print_session,
    print_trace,
)


# ---------------------------------------------------------------------- #
# processes
# ---------------------------------------------------------------------- #


def test_parse_sequence_of_actions():
    p = parse_process("q!l ; q?lx")
    assert isinstance(p, Out)
    (label, cont), = p.branches
    assert label == "l" and isinstance(cont, In)


def test_parse_inaction():
    assert isinstance(parse_process("0"), Stop)


def test_parse_two_branch_output_choice():
    p = parse_process("q!l1;r!l (+) q!l2;r!l")
    assert isinstance(p, Out)
    assert [l for l, _ in p.branches] == ["l1", "l2"]


def test_parse_external_choice():
    p = parse_process("p?l1 + p?l2")
    assert isinstance(p, In)
    assert [l for l, _ in p.branches] == ["l1", "l2"]


def test_duplicate_labels_rejected():
    with pytest.raises(ParseError):
        parse_process("q!l (+) q!l")


def test_mixed_choice_operators_rejected():
    with pytest.raises(ParseError):
        parse_process("q!l1 (+) q?l2")
    with pytest.raises(ParseError):
        parse_process("q!l1 ; 0 + q!l2")


def test_choice_must_share_peer():
    with pytest.raises(ParseError):
        parse_process("q!l1 (+) r!l2")


def test_choice_cannot_be_sequenced():
    with pytest.raises(ParseError):
        parse_process("(q!l1 (+) q!l2) ; r!l")


def test_error_carries_position():
    with pytest.raises(ParseError) as e:
        parse_process("q!l ;\n ; q?m", filename="bad.sess")
    assert str(e.value).startswith("bad.sess:2:")


# ---------------------------------------------------------------------- #
# globals
# ---------------------------------------------------------------------- #


def test_parse_global_sequence():
    g = parse_global("p->q!l ; q->p!lx ; p->q?l ; q->p?lx")
    assert isinstance(g, GOut)


def test_parse_end():
    from sessev.kernel import GEnd

    assert parse_global("End") == GEnd()


def test_parse_global_choice_with_recursion():
    env = DefEnv()
    env.define_global("G", parse_global("p->q!l1 ; p->q?l1 ; G [+] p->q!l2 ; p->q?l2"))
    g = env.globals_["G"]
    assert isinstance(g, GOut)
    assert len(g.branches) == 2


def test_global_choice_requires_output_head():
    with pytest.raises(ParseError):
        parse_global("p->q?l1 [+] p->q!l2")


def test_global_choice_requires_one_channel():
    with pytest.raises(ParseError):
        parse_global("p->q!l1 [+] p->r!l2")


# ---------------------------------------------------------------------- #
# queues, networks, traces
# ---------------------------------------------------------------------- #


def test_parse_queue_two_messages():
    q = parse_queue("<p l q> . <q lx p>")
    assert len(q) == 2
    assert q[0].sender == "p" and q[0].label == "l" and q[0].receiver == "q"


def test_parse_queue_empty_forms():
    assert parse_queue("empty") == ()
    assert parse_queue("") == ()


def test_parse_network_characteristic():
    net = parse_network("p :: q!l;q?lx | q :: p!lx;p?l |- empty")
    assert net.participants() == ["p", "q"]
    assert net.queue == ()


def test_duplicate_participant_rejected():
    with pytest.raises(ParseError):
        parse_network("p :: 0 | p :: 0 |- empty")


def test_parse_trace_roundtrip():
    tau = parse_trace("p->q!l . p->q?l")
    assert print_trace(tau) == "p->q!l . p->q?l"


# ---------------------------------------------------------------------- #
# round-trips
# ---------------------------------------------------------------------- #


PROCESS_SAMPLES = [
    "0",
    "q!l",
    "q!l ; q?lx",
    "q!l1 ; r!l (+) q!l2 ; r!l",
    "p?l1 + p?l2",
    "q!l ; (p?l1 + p?l2)",
]

GLOBAL_SAMPLES = [
    "End",
    "p->q!l",
    "p->q!l ; p->q?l",
    "p->q!l1 ; p->q?l1 [+] p->q!l2 ; p->q?l2",
    "p->q!l ; (r->s!l1 ; p->q?l [+] r->s!l2 ; p->q?l)",
]


@pytest.mark.parametrize("text", PROCESS_SAMPLES)
def test_process_print_parse_identity(text):
    env = DefEnv()
    term = parse_process(text)
    assert regular_equal(parse_process(print_process(term)), term, env)


@pytest.mark.parametrize("text", GLOBAL_SAMPLES)
def test_global_print_parse_identity(text):
    env = DefEnv()
    term = parse_global(text)
    assert regular_equal(parse_global(print_global(term)), term, env)


def test_random_roundtrip_processes():
    from tests.test_kernel import _random_proc

    rng = random.Random(31)
    env = DefEnv()
    for _ in range(150):
        term = _random_proc(rng, env, 4)
        assert regular_equal(parse_process(print_process(term)), term, env)


def test_queue_network_roundtrip():
    q = parse_queue("<p l q> . <q lx p>")
    assert parse_queue(print_queue(q)) == q
    net = parse_network("p :: q!l;q?lx | q :: p!lx;p?l |- <p l q>")
    net2 = parse_network(print_network(net))
    assert net2.queue == net.queue
    assert net2.participants() == net.participants()


# ---------------------------------------------------------------------- #
# session files
# ---------------------------------------------------------------------- #


def test_session_roundtrip_whole_corpus():
    for name in NAMES:
        sf = load(name)
        text = print_session(sf)
        sf2 = parse_session(text, f"{name}-reprinted")
        assert set(sf2.env.procs) == set(sf.env.procs)
        assert set(sf2.env.globals_) == set(sf.env.globals_)
        for dname in sf.env.procs:
            assert regular_equal(sf2.env.procs[dname], sf.env.procs[dname], sf2.env)
        for dname in sf.env.globals_:
            assert regular_equal(sf2.env.globals_[dname], sf.env.globals_[dname], sf2.env)
        assert set(sf2.networks) == set(sf.networks)
        assert set(sf2.types) == set(sf.types)
        assert len(sf2.expectations) == len(sf.expectations)


def test_session_rejects_unknown_reference():
    with pytest.raises(ParseError):
        parse_session("net N = p :: Undefined |- empty")


def test_session_rejects_duplicate_names():
    with pytest.raises(ParseError):
        parse_session("def A = q!l\ndef A = q!lx")


def test_session_expectation_on_unknown_name():
    with pytest.raises(ParseError):
        parse_session("expect Nope balanced")


def test_session_pure_ref_def_classified():
    sf = parse_session("def A = B\ndef B = q!l ; B")
    assert "A" in sf.env.procs


def test_session_pure_ref_cycle_rejected():
    with pytest.raises(ParseError):
        parse_session("def A = B\ndef B = A")
