"""The two labelled transition systems: networks (Send/Rcv) and
asynchronous types (Ext-Out, Ext-In, IComm-Out, IComm-In), plus trace
execution and bounded joint exploration.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import CapExceeded, NotEnabled, SessError
from .kernel import (
    IN,
    OUT,
    AsyncType,
    Comm,
    DefEnv,
    GEnd,
    GIn,
    GOut,
    Global,
    In,
    Msg,
    Network,
    Out,
    Queue,
    canonical_queue,
    queue_first_on_channel,
    queue_pop_channel,
    reachable_nodes,
    unfold,
)
from .traces import Trace


# --------------------------------------------------------------------------- #
# Network LTS
# --------------------------------------------------------------------------- #


def net_enabled(net: Network, env: DefEnv) -> tuple:
    """All communications the network can perform, in canonical order."""
    enabled = set()
    for p, proc in net.procs:
        term = unfold(proc, env)
        if isinstance(term, Out):
            for label, _ in term.branches:
                enabled.add(Comm(OUT, p, term.peer, label))
        elif isinstance(term, In):
            msg = queue_first_on_channel(net.queue, term.peer, p)
            if msg is not None and any(label == msg.label for label, _ in term.branches):
                enabled.add(Comm(IN, term.peer, p, msg.label))
    return tuple(sorted(enabled, key=Comm.sort_key))


def net_step(net: Network, b: Comm, env: DefEnv) -> Network:
    """Fire one communication (rule Send or Rcv)."""
    term = unfold(net.proc_of(b.player), env)
    if b.kind == OUT:
        if not isinstance(term, Out) or term.peer != b.receiver:
            raise NotEnabled(f"{b} not enabled: {b.sender} is not sending to {b.receiver}")
        for label, cont in term.branches:
            if label == b.label:
                queue = net.queue + (Msg(b.sender, b.label, b.receiver),)
                return net.with_proc(b.sender, cont).with_queue(queue)
        raise NotEnabled(f"{b} not enabled: label {b.label!r} not offered")
    if not isinstance(term, In) or term.peer != b.sender:
        raise NotEnabled(f"{b} not enabled: {b.receiver} is not receiving from {b.sender}")
    msg = queue_first_on_channel(net.queue, b.sender, b.receiver)
    if msg is None or msg.label != b.label:
        raise NotEnabled(f"{b} not enabled: first message on channel is {msg}")
    for label, cont in term.branches:
        if label == b.label:
            queue = queue_pop_channel(net.queue, b.sender, b.receiver)
            return net.with_proc(b.receiver, cont).with_queue(queue)
    raise NotEnabled(f"{b} not enabled: label {b.label!r} not expected")


def net_run(net: Network, tau: Trace, env: DefEnv) -> Network:
    """Left fold of :func:`net_step`; reports the position of the first failure."""
    state = net
    for i, b in enumerate(tau, start=1):
        try:
            state = net_step(state, b, env)
        except NotEnabled as e:
            raise NotEnabled(f"step {i} ({b}) of trace not enabled: {e}") from None
    return state


# --------------------------------------------------------------------------- #
# Asynchronous type LTS
# --------------------------------------------------------------------------- #


def _queue_effect(b: Comm, queue: Queue) -> Queue | None:
    """Queue after firing ``b``, or None when an input's message is absent."""
    if b.kind == OUT:
        return queue + (Msg(b.sender, b.label, b.receiver),)
    msg = queue_first_on_channel(queue, b.sender, b.receiver)
    if msg is None or msg.label != b.label:
        return None
    return queue_pop_channel(queue, b.sender, b.receiver)


def type_step(at: AsyncType, b: Comm, env: DefEnv) -> AsyncType:
    """Fire one communication on an asynchronous type.

    Proof search over the four rules.  The rule applicable at a node is
    determined by the head constructor and the player of ``b``, so the
    derivation, if any, is unique; revisiting a judgement on the search path
    means the derivation would be infinite, hence the judgement fails there.
    """
    depth_cap = 4 * len(reachable_nodes(at.gtype, env)) + 2 * len(at.queue) + 16

    def derive(g: Global, queue: Queue, path: frozenset, depth: int):
        if depth > depth_cap:
            raise CapExceeded(f"type transition search exceeded depth {depth_cap} for {b}")
        g = unfold(g, env)
        key = (g, canonical_queue(queue))
        if key in path:
            return None
        path = path | {key}
        if isinstance(g, GEnd):
            return None
        if isinstance(g, GOut):
            if b.kind == OUT and (b.sender, b.receiver) == (g.sender, g.receiver):
                for label, cont in g.branches:
                    if label == b.label:  # Ext-Out
                        return cont, queue + (Msg(b.sender, b.label, b.receiver),)
                return None
            if g.sender == b.player:
                return None
            # IComm-Out: b must fire in every branch without consuming the
            # message that branch just added; its queue effect must therefore
            # be realisable on the original queue.
            new_queue = _queue_effect(b, queue)
            if new_queue is None:
                return None
            new_branches = []
            for label, cont in g.branches:
                added = Msg(g.sender, label, g.receiver)
                sub = derive(cont, queue + (added,), path, depth + 1)
                if sub is None:
                    return None
                cont2, queue2 = sub
                expected = canonical_queue(new_queue + (added,))
                if canonical_queue(queue2) != expected:
                    # premise shape violated; not a mere failure, so do not
                    # let callers read it as "not enabled"
                    raise SessError(
                        f"{b} has a branch-dependent queue effect under {g.sender}->{g.receiver}!"
                    )
                new_branches.append((label, cont2))
            return GOut(g.sender, g.receiver, tuple(new_branches)), new_queue
        # GIn
        if b.kind == IN and (b.sender, b.receiver, b.label) == (g.sender, g.receiver, g.label):
            msg = queue_first_on_channel(queue, g.sender, g.receiver)
            if msg is not None and msg.label == g.label:  # Ext-In
                return g.cont, queue_pop_channel(queue, g.sender, g.receiver)
            return None
        if g.receiver == b.player:
            return None
        # IComm-In: the guard's message must head its channel; remove it,
        # fire underneath, put it back in front.
        msg = queue_first_on_channel(queue, g.sender, g.receiver)
        if msg is None or msg.label != g.label:
            return None
        rest = queue_pop_channel(queue, g.sender, g.receiver)
        sub = derive(g.cont, rest, path, depth + 1)
        if sub is None:
            return None
        cont2, queue2 = sub
        return GIn(g.sender, g.receiver, g.label, cont2), (msg,) + tuple(queue2)

    result = derive(at.gtype, at.queue, frozenset(), 0)
    if result is None:
        raise NotEnabled(f"{b} is not enabled in the asynchronous type")
    g2, q2 = result
    return AsyncType(g2, q2)


def type_enabled(at: AsyncType, env: DefEnv) -> tuple:
    """All communications the asynchronous type can perform, in canonical order.

    Candidate outputs come from reachable output nodes; candidate inputs
    consume the first message of some channel.
    """
    candidates = set()
    for node in reachable_nodes(at.gtype, env):
        if isinstance(node, GOut):
            for label, _ in node.branches:
                candidates.add(Comm(OUT, node.sender, node.receiver, label))
    seen_channels = set()
    for msg in at.queue:
        if msg.channel not in seen_channels:
            seen_channels.add(msg.channel)
            candidates.add(Comm(IN, msg.sender, msg.receiver, msg.label))
    enabled = []
    for b in candidates:
        try:
            type_step(at, b, env)
        except NotEnabled:
            continue
        enabled.append(b)
    return tuple(sorted(enabled, key=Comm.sort_key))


def type_run(at: AsyncType, tau: Trace, env: DefEnv) -> AsyncType:
    state = at
    for i, b in enumerate(tau, start=1):
        try:
            state = type_step(state, b, env)
        except NotEnabled as e:
            raise NotEnabled(f"step {i} ({b}) of trace not enabled: {e}") from None
    return state


# --------------------------------------------------------------------------- #
# Joint bounded exploration
# --------------------------------------------------------------------------- #


@dataclass
class BisimResult:
    equivalent: bool
    witness: Trace | None = None  # first divergent trace
    states_explored: int = 0

    def __bool__(self) -> bool:
        return self.equivalent


def bisimilar_to_depth(net: Network, at: AsyncType, k: int, env: DefEnv) -> BisimResult:
    """Check that network and type enable exactly the same communications at
    every state reachable by traces of length <= k."""
    seen = set()
    explored = 0

    def go(n: Network, t: AsyncType, prefix: tuple, depth: int):
        nonlocal explored
        key = (n.canonical(env), t.canonical(env))
        if key in seen:
            return None
        seen.add(key)
        explored += 1
        en_n = net_enabled(n, env)
        en_t = type_enabled(t, env)
        if set(en_n) != set(en_t):
            extra = set(en_n) ^ set(en_t)
            b = sorted(extra, key=Comm.sort_key)[0]
            return prefix + (b,)
        if depth >= k:
            return None
        for b in en_n:
            witness = go(net_step(n, b, env), type_step(t, b, env), prefix + (b,), depth + 1)
            if witness is not None:
                return witness
        return None

    witness = go(net, at, (), 0)
    return BisimResult(witness is None, witness, explored)
