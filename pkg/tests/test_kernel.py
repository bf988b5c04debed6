from __future__ import annotations

import itertools
import random

import pytest

from sessev.errors import DefError
from sessev.kernel import (
    Comm,
    DefEnv,
    GEnd,
    GIn,
    GOut,
    GRef,
    In,
    Msg,
    Out,
    PRef,
    Stop,
    is_cyclic,
    out,
    players_comm,
    players_global,
    queue_equiv,
    regular_equal,
    send,
    unfold,
)
from sessev.textfmt import parse_global, parse_queue

# ---------------------------------------------------------------------- #
# unfold
# ---------------------------------------------------------------------- #


def test_unfold_resolves_to_constructor_head():
    env = DefEnv()
    env.define_proc("P", out("q", (("l", PRef("P")), ("lx", Stop()))))
    t = unfold(PRef("P"), env)
    assert isinstance(t, Out)
    assert [l for l, _ in t.branches] == ["l", "lx"]


def test_unfold_constructor_is_identity():
    env = DefEnv()
    assert unfold(GEnd(), env) == GEnd()
    term = send("q", "l")
    assert unfold(term, env) == term


def test_unfold_recursive_global():
    env = DefEnv()
    env.define_global("G2", parse_global("p->r!l ; p->r?l ; G2"))
    t = unfold(GRef("G2"), env)
    assert isinstance(t, GOut)
    (label, cont), = t.branches
    assert label == "l"
    assert isinstance(cont, GIn)


def test_unfold_idempotent_on_constructor_heads():
    env = DefEnv()
    env.define_proc("P", send("q", "l", PRef("P")))
    t = unfold(PRef("P"), env)
    assert unfold(t, env) == t


def test_unfold_unguarded_cycle_rejected():
    env = DefEnv()
    env.procs["A"] = PRef("B")
    env.procs["B"] = PRef("A")
    with pytest.raises(DefError):
        unfold(PRef("A"), env)


def test_dangling_name_rejected():
    env = DefEnv()
    with pytest.raises(DefError):
        unfold(PRef("missing"), env)


def test_duplicate_choice_labels_rejected():
    with pytest.raises(DefError):
        Out("q", (("l", Stop()), ("l", Stop())))


# ---------------------------------------------------------------------- #
# regular_equal, with a bounded tree-expansion oracle
# ---------------------------------------------------------------------- #


def _expand_proc(t, env, depth):
    t = unfold(t, env)
    if depth == 0:
        return "cut"
    if isinstance(t, Stop):
        return "0"
    kind = "!" if isinstance(t, Out) else "?"
    return (kind, t.peer, tuple((l, _expand_proc(c, env, depth - 1)) for l, c in t.branches))


def tree_equal_oracle(a, b, env, depth):
    return _expand_proc(a, env, depth) == _expand_proc(b, env, depth)


def test_regular_equal_reflexive():
    env = DefEnv()
    env.define_proc("P", send("q", "l", PRef("P")))
    assert regular_equal(PRef("P"), PRef("P"), env)


def test_regular_equal_different_unfolding_speeds():
    env = DefEnv()
    env.define_proc("P", send("q", "l", PRef("P")))
    env.define_proc("Q", send("q", "l", send("q", "l", PRef("Q"))))
    assert regular_equal(PRef("P"), PRef("Q"), env)
    assert tree_equal_oracle(PRef("P"), PRef("Q"), env, 9)


def test_regular_equal_distinguishes_labels():
    env = DefEnv()
    assert not regular_equal(send("q", "l"), send("q", "lx"), env)


def _random_proc(rng, env, size, peers=("q", "r"), labels=("a", "b")):
    if size <= 0 or rng.random() < 0.25:
        return Stop()
    kind = rng.choice([Out, In])
    peer = rng.choice(peers)
    n = rng.choice([1, 1, 2])
    chosen = rng.sample(labels, n)
    branches = tuple(
        (l, _random_proc(rng, env, size - 1, peers, labels)) for l in sorted(chosen)
    )
    return Out(peer, branches) if kind is Out else In(peer, branches)


def test_regular_equal_is_an_equivalence_on_random_terms():
    rng = random.Random(7)
    env = DefEnv()
    terms = [_random_proc(rng, env, 3) for _ in range(24)]
    for a, b in itertools.product(terms, repeat=2):
        ab = regular_equal(a, b, env)
        assert ab == regular_equal(b, a, env)  # symmetry
        assert ab == tree_equal_oracle(a, b, env, 8)  # agreement with the oracle
    for a, b, c in zip(terms, terms[1:], terms[2:]):
        if regular_equal(a, b, env) and regular_equal(b, c, env):
            assert regular_equal(a, c, env)  # transitivity


# ---------------------------------------------------------------------- #
# players
# ---------------------------------------------------------------------- #


def test_players_comm():
    assert players_comm(Comm("!", "p", "q", "l")) == {"p"}
    assert players_comm(Comm("?", "p", "q", "l")) == {"q"}


def test_players_global_end_empty():
    assert players_global(GEnd(), DefEnv()) == set()


def test_players_global_one_exchange():
    env = DefEnv()
    g = parse_global("p->q!l ; p->q?l")
    assert players_global(g, env) == {"p", "q"}


def _fpaths_prefixes(g, env, k):
    from sessev.events import fpaths

    return fpaths(g, env, k)


def test_players_global_recursive_against_trace_oracle():
    env = DefEnv()
    env.define_global(
        "Gd2",
        parse_global("p->q!l1 ; p->q?l1 ; p->r!l3 ; p->r?l3 [+] p->q!l2 ; p->q?l2 ; Gd2"),
    )
    env.define_global("Gd", parse_global("r->q!l ; r->q?l ; Gd"))
    g = parse_global("r->q!l ; r->q?l ; Gd2", env)
    got = players_global(g, env)
    assert got == {"r", "p", "q"}
    # oracle: union of trace players at any depth >= term-graph size
    oracle = set()
    for tau in _fpaths_prefixes(g, env, 12):
        oracle |= {b.player for b in tau}
    assert got == oracle


# ---------------------------------------------------------------------- #
# queue equivalence, with a swap-closure oracle
# ---------------------------------------------------------------------- #


def _queue_swap_closure(q):
    seen = {tuple(q)}
    todo = [tuple(q)]
    while todo:
        cur = todo.pop()
        for i in range(len(cur) - 1):
            a, b = cur[i], cur[i + 1]
            if a.channel != b.channel:
                nxt = cur[:i] + (b, a) + cur[i + 2 :]
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
    return seen


def test_queue_equiv_cross_channel_swap():
    q1 = parse_queue("<p l q> . <q lx p>")
    q2 = parse_queue("<q lx p> . <p l q>")
    assert queue_equiv(q1, q2)


def test_queue_equiv_same_channel_order_matters():
    q1 = parse_queue("<p l q> . <p lx q>")
    q2 = parse_queue("<p lx q> . <p l q>")
    assert not queue_equiv(q1, q2)


def test_queue_equiv_empty():
    assert queue_equiv((), ())


def test_queue_equiv_matches_swap_closure_oracle():
    rng = random.Random(3)
    msgs = [
        Msg(s, l, r)
        for s, r in [("p", "q"), ("q", "p"), ("p", "r")]
        for l in ("a", "b")
    ]
    for _ in range(60):
        q1 = tuple(rng.choices(msgs, k=rng.randint(0, 4)))
        q2 = tuple(rng.choices(msgs, k=rng.randint(0, 4)))
        assert queue_equiv(q1, q2) == (q2 in _queue_swap_closure(q1))


# ---------------------------------------------------------------------- #
# is_cyclic
# ---------------------------------------------------------------------- #


def test_is_cyclic_self_loop():
    env = DefEnv()
    env.define_global("G", parse_global("p->q!l ; p->q!l ; p->q?l ; G"))
    assert is_cyclic(GRef("G"), env)


def test_is_cyclic_end():
    assert not is_cyclic(GEnd(), DefEnv())


def test_is_cyclic_acyclic_head_into_cycle():
    env = DefEnv()
    env.define_global("Gb4b", parse_global("p->r!l ; p->r?l ; Gb4b"))
    env.define_global("Gb4a", parse_global("p->q!l ; p->q!l ; p->q?l ; Gb4b"))
    assert not is_cyclic(GRef("Gb4a"), env)
    assert is_cyclic(GRef("Gb4b"), env)
