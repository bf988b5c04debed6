"""Random generators shared by the property suites.

Well-formed asynchronous types are generated constructively (forward
simulation of the balancing derivation, with structured choices whose
branches share their continuation so that projection succeeds often) and
then filtered through the real well-formedness check; the generator shape
affects coverage only, never soundness.
"""

from __future__ import annotations

import itertools
import random

from sessev.kernel import (
    AsyncType,
    DefEnv,
    GEnd,
    GIn,
    GOut,
    GRef,
    Msg,
    Network,
    players_global,
)
from sessev.semantics import net_enabled, net_step, type_step
from sessev.typecheck import project, typecheck, well_formed

PARTS = ("p", "q", "r")
LABELS = ("a", "b")


def _drain(queue):
    if not queue:
        return GEnd()
    m = queue[0]
    return GIn(m.sender, m.receiver, m.label, _drain(queue[1:]))


def _channels(rng):
    s, r = rng.sample(PARTS, 2)
    return s, r


def _gen_acyclic(rng, queue, budget):
    if budget <= 0:
        return _drain(queue)
    roll = rng.random()
    if queue and roll < 0.4:
        # consume the first message of some channel
        chans = []
        seen = set()
        for m in queue:
            if m.channel not in seen:
                seen.add(m.channel)
                chans.append(m)
        m = rng.choice(chans)
        rest = list(queue)
        rest.remove(m)
        return GIn(m.sender, m.receiver, m.label, _gen_acyclic(rng, tuple(rest), budget - 1))
    s, r = _channels(rng)
    if roll > 0.75 and budget >= 3:
        # two-branch choice, each branch reads its label then runs the same tail
        tail = _gen_acyclic(rng, queue, budget - 3)
        return GOut(
            s,
            r,
            (
                ("a", GIn(s, r, "a", tail)),
                ("b", GIn(s, r, "b", tail)),
            ),
        )
    label = rng.choice(LABELS)
    msg = Msg(s, label, r)
    return GOut(s, r, ((label, _gen_acyclic(rng, queue + (msg,), budget - 1)),))


_counter = itertools.count()


def _gen_cyclic(rng, env):
    """A few loop shapes that drain their queue before every restart."""
    name = f"L{next(_counter)}"
    s, r = _channels(rng)
    shape = rng.randrange(3)
    if shape == 0:
        body = GOut(s, r, ((rng.choice(LABELS), GIn(s, r, rng.choice(LABELS), GRef(name))),))
        # matching labels required for the read to consume the send
        (lbl, _), = body.branches
        body = GOut(s, r, ((lbl, GIn(s, r, lbl, GRef(name))),))
    elif shape == 1:
        # loop-or-exit choice
        body = GOut(
            s,
            r,
            (
                ("a", GIn(s, r, "a", GRef(name))),
                ("b", GIn(s, r, "b", GEnd())),
            ),
        )
    else:
        # ping/pong
        body = GOut(
            s, r, ((("a"), GIn(s, r, "a", GOut(r, s, (("b", GIn(r, s, "b", GRef(name))),)))),)
        )
    env.define_global(name, body)
    return GRef(name)


def random_wf_type(rng, env, budget=6, allow_cyclic=True):
    """One well-formed asynchronous type with an empty queue, or None when
    the draw fails the filter."""
    if allow_cyclic and rng.random() < 0.25:
        g = _gen_cyclic(rng, env)
    else:
        g = _gen_acyclic(rng, (), budget)
    at = AsyncType(g, ())
    if not well_formed(at, env):
        return None
    return at


def network_of_type(at: AsyncType, env: DefEnv) -> Network:
    procs = {}
    for p in sorted(players_global(at.gtype, env)):
        procs[p] = project(at.gtype, p, env)
    return Network.of(procs, at.queue)


def typed_pair_stream(seed: int, count: int, max_steps: int = 3):
    """Yield `count` typed (network, type, env) triples, including randomly
    stepped descendants of freshly generated well-formed types."""
    rng = random.Random(seed)
    produced = 0
    while produced < count:
        env = DefEnv()
        at = random_wf_type(rng, env)
        if at is None:
            continue
        net = network_of_type(at, env)
        assert typecheck(net, at, env), "generator produced an untypable pair"
        yield net, at, env
        produced += 1
        for _ in range(rng.randint(0, max_steps)):
            moves = net_enabled(net, env)
            if not moves:
                break
            b = rng.choice(moves)
            net = net_step(net, b, env)
            at = type_step(at, b, env)
            if produced < count:
                yield net, at, env
                produced += 1
