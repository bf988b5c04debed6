"""Trace-level machinery: o-traces, projections, matching, swapping
equivalence, pointedness, filtering, and the duality relations on
undirected action sequences.

Positions are 1-based throughout, mirroring the tau[i] indexing convention
of the underlying theory.
"""

from __future__ import annotations

from collections import deque

from .errors import CapExceeded, SessError
from .kernel import IN, OUT, Action, Comm, Msg, Participant, Queue, canonical_queue

Trace = tuple  # tuple[Comm, ...]
OTrace = tuple  # tuple[Comm, ...] with outputs only
ActionSeq = tuple  # tuple[Action, ...]
UndirectedSeq = tuple  # tuple[tuple[kind, label], ...]

DEFAULT_CLOSURE_CAP = 100_000


# --------------------------------------------------------------------------- #
# o-traces
# --------------------------------------------------------------------------- #


def otr(queue: Queue) -> OTrace:
    """The o-trace of a queue: one output communication per message."""
    return tuple(Comm(OUT, m.sender, m.receiver, m.label) for m in queue)


def otrace_to_queue(omega: OTrace) -> Queue:
    return tuple(Msg(b.sender, b.label, b.receiver) for b in omega)


def canonical_otrace(omega: OTrace) -> OTrace:
    return tuple(sorted(omega, key=lambda b: b.channel))


def otrace_equiv(w1: OTrace, w2: OTrace) -> bool:
    """The equivalence on o-traces: per-channel subsequences coincide."""
    return canonical_otrace(w1) == canonical_otrace(w2)


# --------------------------------------------------------------------------- #
# Projections
# --------------------------------------------------------------------------- #


def trace_proj(tau: Trace, r: Participant) -> ActionSeq:
    """Project a trace on a participant, keeping the actions it performs."""
    acts = []
    for b in tau:
        if b.kind == OUT and b.sender == r:
            acts.append(Action(OUT, b.receiver, b.label))
        elif b.kind == IN and b.receiver == r:
            acts.append(Action(IN, b.sender, b.label))
    return tuple(acts)


def actionseq_proj(zeta: ActionSeq, r: Participant) -> UndirectedSeq:
    """Project an action sequence on a peer, dropping direction information."""
    return tuple((a.kind, a.label) for a in zeta if a.peer == r)


# --------------------------------------------------------------------------- #
# Matching and well-formedness
# --------------------------------------------------------------------------- #


def multiplicity(tau: Trace, sender: Participant, receiver: Participant, kind: str) -> int:
    """Number of communications ``sender receiver kind _`` in the trace."""
    return sum(
        1 for b in tau if b.kind == kind and b.sender == sender and b.receiver == receiver
    )


def matches(tau: Trace, i: int, j: int) -> bool:
    """True iff the input at 1-based position ``j`` matches the output at ``i``."""
    if not (1 <= i < j <= len(tau)):
        return False
    bo, bi = tau[i - 1], tau[j - 1]
    if not (bo.kind == OUT and bi.kind == IN):
        return False
    if bo.channel != bi.channel or bo.label != bi.label:
        return False
    s, r = bo.channel
    return multiplicity(tau[: i - 1], s, r, OUT) == multiplicity(tau[: j - 1], s, r, IN)


def match_of_input(tau: Trace, j: int) -> int | None:
    """Position of the output matched by the input at position ``j``, if any."""
    for i in range(1, j):
        if matches(tau, i, j):
            return i
    return None


def well_formed_trace(tau: Trace, prefix: Trace = ()) -> bool:
    """``prefix``-well-formedness: every input of ``prefix . tau`` matches an output."""
    whole = tuple(prefix) + tuple(tau)
    for j in range(1, len(whole) + 1):
        if whole[j - 1].kind == IN and match_of_input(whole, j) is None:
            return False
    return True


# --------------------------------------------------------------------------- #
# Swapping and the equivalence on well-formed traces
# --------------------------------------------------------------------------- #


class NotSwappable(SessError):
    """The requested adjacent swap is not permitted."""


def swap_step(tau: Trace, i: int, omega: OTrace) -> Trace:
    """Swap the communications at 1-based positions ``i`` and ``i+1``.

    Permitted iff they have disjoint players and do not match each other
    inside ``omega . tau``.  Raises :class:`NotSwappable` otherwise; an index
    out of range raises :class:`IndexError`.
    """
    if not (1 <= i < len(tau)):
        raise IndexError(f"swap position {i} out of range for trace of length {len(tau)}")
    b1, b2 = tau[i - 1], tau[i]
    if b1.player == b2.player:
        raise NotSwappable(f"{b1} and {b2} share a player")
    k = len(omega)
    if matches(tuple(omega) + tuple(tau), i + k, i + 1 + k):
        raise NotSwappable(f"{b2} matches {b1}")
    return tau[: i - 1] + (b2, b1) + tau[i + 1 :]


def swap_candidates(tau: Trace, omega: OTrace):
    """All traces one permitted swap away from ``tau``."""
    for i in range(1, len(tau)):
        try:
            yield swap_step(tau, i, omega)
        except NotSwappable:
            continue


def trace_closure(tau: Trace, omega: OTrace, cap: int = DEFAULT_CLOSURE_CAP) -> set:
    """Breadth-first closure of ``tau`` under permitted swaps."""
    seen = {tuple(tau)}
    todo = deque([tuple(tau)])
    while todo:
        t = todo.popleft()
        for t2 in swap_candidates(t, omega):
            if t2 not in seen:
                seen.add(t2)
                if len(seen) > cap:
                    raise CapExceeded(f"trace closure exceeded cap {cap}")
                todo.append(t2)
    return seen


def trace_equiv(t1: Trace, t2: Trace, omega: OTrace, cap: int = DEFAULT_CLOSURE_CAP) -> bool:
    """The swap-generated equivalence on ``omega``-well-formed traces."""
    t1, t2 = tuple(t1), tuple(t2)
    if sorted(map(str, t1)) != sorted(map(str, t2)):
        return False
    return t2 in trace_closure(t1, omega, cap)


def canonical_trace(tau: Trace, omega: OTrace, cap: int = DEFAULT_CLOSURE_CAP) -> Trace:
    """The least trace of the equivalence class, under the fixed total order."""
    return min(trace_closure(tau, omega, cap), key=lambda t: [b.sort_key() for b in t])


# --------------------------------------------------------------------------- #
# Required communications, pointedness, filtering
# --------------------------------------------------------------------------- #


def required(tau: Trace, i: int) -> bool:
    """The communication at position ``i`` is required: its player plays again later."""
    if not (1 <= i <= len(tau)):
        raise IndexError(f"position {i} out of range")
    rest = tau[i:]
    return tau[i - 1].player in {b.player for b in rest}


def pointed(tau: Trace, prefix: Trace = ()) -> bool:
    """``prefix``-pointedness: well formed, and every non-final communication is
    required or is an output matched by a later input of ``prefix . tau``."""
    tau = tuple(tau)
    if not well_formed_trace(tau, prefix):
        return False
    k = len(prefix)
    whole = tuple(prefix) + tau
    for i in range(1, len(tau)):
        if required(tau, i):
            continue
        if tau[i - 1].kind == OUT and any(
            matches(whole, i + k, j + k) for j in range(i + 1, len(tau) + 1)
        ):
            continue
        return False
    return True


def filter_trace(tau: Trace, omega: OTrace) -> Trace:
    """Filtering of ``tau`` by ``omega`` with cursor at the end: a right-to-left
    scan keeping each communication iff the kept suffix it heads stays pointed
    relative to ``omega`` extended with the unconsumed prefix."""
    kept: Trace = ()
    for i in range(len(tau), 0, -1):
        candidate = (tau[i - 1],) + kept
        if pointed(candidate, tuple(omega) + tau[: i - 1]):
            kept = candidate
    return kept


# --------------------------------------------------------------------------- #
# Duality on undirected action sequences
# --------------------------------------------------------------------------- #


def precsim_closure(theta: UndirectedSeq, cap: int = DEFAULT_CLOSURE_CAP) -> set:
    """Upward closure under delaying outputs: an output may move past an
    immediately following input."""
    theta = tuple(theta)
    seen = {theta}
    todo = deque([theta])
    while todo:
        t = todo.popleft()
        for i in range(len(t) - 1):
            if t[i][0] == OUT and t[i + 1][0] == IN:
                t2 = t[:i] + (t[i + 1], t[i]) + t[i + 2 :]
                if t2 not in seen:
                    seen.add(t2)
                    if len(seen) > cap:
                        raise CapExceeded(f"undirected closure exceeded cap {cap}")
                    todo.append(t2)
    return seen


def dual(t1: UndirectedSeq, t2: UndirectedSeq) -> bool:
    """Pointwise duality: equal labels, complementary directions."""
    if len(t1) != len(t2):
        return False
    return all(l1 == l2 and k1 != k2 for (k1, l1), (k2, l2) in zip(t1, t2))


def weak_dual(t1: UndirectedSeq, t2: UndirectedSeq, cap: int = DEFAULT_CLOSURE_CAP) -> bool:
    """Duality up to delaying outputs on both sides."""
    if len(t1) != len(t2):
        return False
    c2 = precsim_closure(tuple(t2), cap)
    for u1 in precsim_closure(tuple(t1), cap):
        d1 = tuple((IN if k == OUT else OUT, l) for k, l in u1)
        if d1 in c2:
            return True
    return False


# --------------------------------------------------------------------------- #
# Queue maps (forward/backward effect of a communication on an o-trace)
# --------------------------------------------------------------------------- #


def queue_map_fwd(b: Comm, omega: OTrace) -> OTrace | None:
    """The o-trace after executing ``b``: outputs append; an input consumes the
    first message on its channel, which must carry its label."""
    if b.kind == OUT:
        return tuple(omega) + (b,)
    for i, m in enumerate(omega):
        if m.channel == b.channel:
            if m.label != b.label:
                return None
            return omega[:i] + omega[i + 1 :]
    return None


def queue_map_bwd(b: Comm, omega: OTrace) -> OTrace | None:
    """The o-trace before executing ``b``: inputs re-prepend their message; an
    output must be the last message on its channel, and is removed."""
    if b.kind == IN:
        return (b.dual(),) + tuple(omega)
    for i in range(len(omega) - 1, -1, -1):
        if omega[i].channel == b.channel:
            if omega[i].label != b.label:
                return None
            return omega[:i] + omega[i + 1 :]
    return None


def queue_canonical_from(omega: OTrace) -> Queue:
    return canonical_queue(otrace_to_queue(omega))
