"""The three event universes and their structures.

* p-events: nonempty action sequences; prime event structure of a process.
* n-events: p-events located at a participant; flow event structure of a
  network (narrowing, local flow, cross-flow, queue justification).
* t-events: classes of (o-trace, pointed trace) pairs; prime event structure
  of an asynchronous type.

The shared o-trace of the network events lives on the enclosing structure
and is threaded explicitly into the relations and the residual/retrieval
operators; residuals shift it uniformly for all events.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import PreconditionError
from .kernel import (
    IN,
    OUT,
    Action,
    AsyncType,
    Comm,
    DefEnv,
    GEnd,
    GIn,
    GOut,
    In,
    Network,
    Out,
    Proc,
    Stop,
    unfold,
)
from .traces import (
    OTrace,
    Trace,
    actionseq_proj,
    canonical_otrace,
    canonical_trace,
    filter_trace,
    otr,
    pointed,
    precsim_closure,
    queue_map_bwd,
    queue_map_fwd,
    trace_closure,
    trace_proj,
    weak_dual,
    well_formed_trace,
)

# --------------------------------------------------------------------------- #
# p-events
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class PEvent:
    """A nonempty sequence of actions; the last action is the one occurring."""

    acts: tuple  # tuple[Action, ...]

    def __post_init__(self):
        if not self.acts:
            raise PreconditionError("a p-event is a nonempty action sequence")

    @property
    def act(self) -> Action:
        return self.acts[-1]

    def __str__(self) -> str:
        return ".".join(str(a) for a in self.acts)


def pevent_leq(e1: PEvent, e2: PEvent) -> bool:
    """Causality: prefix order on action sequences."""
    return e1.acts == e2.acts[: len(e1.acts)]


def pevent_conflict(e1: PEvent, e2: PEvent) -> bool:
    """Conflict: a shared prefix followed by different actions."""
    return _seq_conflict(e1.acts, e2.acts)


def _seq_conflict(a1: tuple, a2: tuple) -> bool:
    for x, y in zip(a1, a2):
        if x != y:
            return True
    return False


@dataclass(frozen=True)
class PrimeES:
    """A prime event structure with strict causality and conflict pairs."""

    events: tuple
    causality: frozenset  # strict pairs (e, e') with e < e'
    conflict: frozenset  # symmetric closure stored both ways

    is_prime = True

    def flow_pairs(self) -> frozenset:
        return self.causality

    def in_conflict(self, e1, e2) -> bool:
        return (e1, e2) in self.conflict

    def leq(self, e1, e2) -> bool:
        return e1 == e2 or (e1, e2) in self.causality


@dataclass(frozen=True)
class FlowES:
    """A flow event structure; carries the ambient o-trace of its network."""

    events: tuple
    flow: frozenset  # pairs (e, e') with e flow-below e'
    conflict: frozenset
    otrace: tuple = ()

    is_prime = False

    def flow_pairs(self) -> frozenset:
        return self.flow

    def in_conflict(self, e1, e2) -> bool:
        return (e1, e2) in self.conflict


def _symmetric(pairs) -> frozenset:
    out = set()
    for a, b in pairs:
        out.add((a, b))
        out.add((b, a))
    return frozenset(out)


def pes_of_process(p: Proc, env: DefEnv, k: int) -> PrimeES:
    """Events are the action sequences along root-to-edge paths of the process
    tree, truncated at length ``k``."""
    if k < 1:
        raise PreconditionError("truncation depth must be at least 1")
    events: list[PEvent] = []

    def walk(term: Proc, prefix: tuple):
        if len(prefix) >= k:
            return
        term = unfold(term, env)
        if isinstance(term, Stop):
            return
        assert isinstance(term, (Out, In))
        kind = OUT if isinstance(term, Out) else IN
        for label, cont in term.branches:
            acts = prefix + (Action(kind, term.peer, label),)
            events.append(PEvent(acts))
            walk(cont, acts)

    walk(p, ())
    ev = tuple(events)
    causality = frozenset(
        (a, b) for a in ev for b in ev if a != b and pevent_leq(a, b)
    )
    conflict = frozenset((a, b) for a in ev for b in ev if pevent_conflict(a, b))
    return PrimeES(ev, causality, conflict)


# --------------------------------------------------------------------------- #
# n-events
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class NEvent:
    """A p-event located at a participant."""

    loc: str
    ev: PEvent

    def __str__(self) -> str:
        return f"{self.loc}:{self.ev}"

    def sort_key(self) -> tuple:
        return (self.loc, len(self.ev.acts), tuple(map(str, self.ev.acts)))


def nevent_io(e: NEvent) -> Comm:
    """The communication an n-event represents."""
    a = e.ev.act
    if a.kind == OUT:
        return Comm(OUT, e.loc, a.peer, a.label)
    return Comm(IN, a.peer, e.loc, a.label)


def is_input_nevent(e: NEvent) -> bool:
    return e.ev.act.kind == IN


def _local_flow(e1: NEvent, e2: NEvent) -> bool:
    return e1.loc == e2.loc and e1.ev != e2.ev and pevent_leq(e1.ev, e2.ev)


def _histories_compatible(lhs, rhs) -> bool:
    """Weak duality of the output side against the input side, tolerating
    unmatched trailing outputs on the input side.

    The input side's own later sends are delayable past its read (they end
    up in the trailing chi of the duality condition); once such a send has
    been executed it lives in the queue instead of the event history, and it
    must stay just as ignorable, or the flow relation would not be invariant
    under the residual/retrieval operators.  After delay-reordering, any
    surplus must consist of outputs only and sit at the tail.
    """
    if len(rhs) < len(lhs):
        return False
    if len(rhs) == len(lhs):
        return weak_dual(lhs, rhs)
    rhs_variants = precsim_closure(tuple(rhs))
    for u in precsim_closure(tuple(lhs)):
        d = tuple((IN if k == OUT else OUT, l) for k, l in u)
        for v in rhs_variants:
            if v[: len(d)] == d and all(k == OUT for k, _ in v[len(d) :]):
                return True
    return False


def _cross_flow(e1: NEvent, e2: NEvent, omega: OTrace) -> bool:
    """Cross-flow from an output of p towards q to the matching input of q.

    The existential history rewriting is searched by enumerating the
    delayed-output reorderings of the input side's projection on the sender,
    splitting at an occurrence of the matched input with an outputs-only
    tail, and testing duality of the two projected histories.
    """
    a1, a2 = e1.ev.act, e2.ev.act
    if not (a1.kind == OUT and a2.kind == IN):
        return False
    p, q = e1.loc, e2.loc
    if p == q or a1.peer != q or a2.peer != p or a1.label != a2.label:
        return False
    label = a1.label
    zeta = e1.ev.acts[:-1]
    lhs = actionseq_proj(trace_proj(omega, p) + tuple(zeta), q)
    rhs_base = actionseq_proj(trace_proj(omega, q), p)
    theta = actionseq_proj(e2.ev.acts, p)  # ends with ?label
    for variant in sorted(precsim_closure(theta)):
        for j, ua in enumerate(variant):
            if ua != (IN, label):
                continue
            if any(v[0] != OUT for v in variant[j + 1 :]):
                continue
            if _histories_compatible(lhs, rhs_base + variant[:j]):
                return True
    return False


def nevent_flow(e1: NEvent, e2: NEvent, omega: OTrace) -> bool:
    """The flow relation parametrised by the ambient o-trace: local flows are
    strict prefixes at one participant, cross-flows connect an output to a
    matching input."""
    return _local_flow(e1, e2) or _cross_flow(e1, e2, omega)


def nevent_conflict(e1: NEvent, e2: NEvent) -> bool:
    return e1.loc == e2.loc and pevent_conflict(e1.ev, e2.ev)


def queue_justified(e: NEvent, omega: OTrace) -> bool:
    """The input n-event is justified by a message of the queue: some
    occurrence of its channel message in ``omega`` yields an empty-queue
    cross-flow from the synthetic located output history."""
    a = e.ev.act
    if a.kind != IN:
        return False
    p, q = a.peer, e.loc
    channel_labels = [b.label for b in omega if b.channel == (p, q)]
    theta = actionseq_proj(e.ev.acts, p)
    variants = sorted(precsim_closure(theta))
    for c, lab in enumerate(channel_labels):
        if lab != a.label:
            continue
        lhs = tuple((OUT, l) for l in channel_labels[:c])
        for variant in variants:
            for j, ua in enumerate(variant):
                if ua != (IN, a.label):
                    continue
                if any(v[0] != OUT for v in variant[j + 1 :]):
                    continue
                if _histories_compatible(lhs, variant[:j]):
                    return True
    return False


def narrowing(events, omega: OTrace) -> set:
    """Greatest set of n-events closed under local-predecessor membership and
    input justification (by the queue or by a member), via iterated removal."""
    live = set(events)
    cross_cache: dict = {}

    def crossed(e1: NEvent, e2: NEvent) -> bool:
        key = (e1, e2)
        if key not in cross_cache:
            cross_cache[key] = _cross_flow(e1, e2, omega)
        return cross_cache[key]

    changed = True
    while changed:
        changed = False
        for e in sorted(live, key=NEvent.sort_key):
            if len(e.ev.acts) > 1 and NEvent(e.loc, PEvent(e.ev.acts[:-1])) not in live:
                live.discard(e)
                changed = True
                continue
            if is_input_nevent(e) and not queue_justified(e, omega):
                if not any(
                    e2 is not e and not is_input_nevent(e2) and crossed(e2, e)
                    for e2 in live
                ):
                    live.discard(e)
                    changed = True
    return live


def fes_of_network(net: Network, env: DefEnv, k: int) -> FlowES:
    """Per-participant p-events truncated at ``k``, narrowed with respect to
    the queue's o-trace; flow and conflict restricted to the survivors."""
    omega = otr(net.queue)
    candidates = []
    for p, proc in net.procs:
        pes = pes_of_process(proc, env, k)
        candidates.extend(NEvent(p, e) for e in pes.events)
    events = tuple(sorted(narrowing(candidates, omega), key=NEvent.sort_key))
    flow = frozenset(
        (a, b) for a in events for b in events if a != b and nevent_flow(a, b, omega)
    )
    conflict = frozenset(
        (a, b) for a in events for b in events if nevent_conflict(a, b)
    )
    return FlowES(events, flow, conflict, omega)


def proj_nevent(e: NEvent, p: str) -> PEvent | None:
    """Partial projection of an n-event to the p-event of participant ``p``."""
    return e.ev if e.loc == p else None


def proj_nevents(events, p: str) -> set:
    return {e.ev for e in events if e.loc == p}


# --------------------------------------------------------------------------- #
# n-event residual/retrieval and queue maps
# --------------------------------------------------------------------------- #


def nevent_residual(e: NEvent, b: Comm, omega: OTrace) -> NEvent | None:
    """The event as it is after ``b``: strips the head action at the player's
    locality; undefined when the event is that very action or differs."""
    if e.loc != b.player:
        return e
    head = b.action()
    if len(e.ev.acts) < 2 or e.ev.acts[0] != head:
        return None
    return NEvent(e.loc, PEvent(e.ev.acts[1:]))


def nevent_retrieval(e: NEvent, b: Comm, omega: OTrace) -> NEvent:
    """The event as it was before ``b``: prepends the action at the player's
    locality."""
    if e.loc != b.player:
        return e
    return NEvent(e.loc, PEvent((b.action(),) + e.ev.acts))


# --------------------------------------------------------------------------- #
# t-events
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class TEvent:
    """An equivalence class of (o-trace, pointed trace) pairs, stored in
    canonical form (channel-sorted o-trace, least equivalent trace)."""

    otrace: tuple
    trace: tuple

    def __str__(self) -> str:
        om = ".".join(str(b) for b in self.otrace) or "eps"
        tr = ".".join(str(b) for b in self.trace)
        return f"[{om} | {tr}]"

    def sort_key(self) -> tuple:
        return (len(self.trace), tuple(b.sort_key() for b in self.trace))


def make_tevent(omega: OTrace, tau: Trace) -> TEvent:
    """Canonical representative of the class of the pair."""
    if not tau:
        raise PreconditionError("a t-event's trace is nonempty")
    if not pointed(tau, tuple(omega)):
        raise PreconditionError("a t-event's trace must be pointed for its o-trace")
    return TEvent(canonical_otrace(tuple(omega)), canonical_trace(tuple(tau), tuple(omega)))


def ev(omega: OTrace, tau: Trace) -> TEvent:
    """The t-event generated by an o-trace and a nonempty well-formed trace:
    filter the trace, then take the class."""
    if not tau:
        raise PreconditionError("ev requires a nonempty trace")
    if not well_formed_trace(tau, tuple(omega)):
        raise PreconditionError("ev requires a trace well formed for the o-trace")
    return make_tevent(omega, filter_trace(tuple(tau), tuple(omega)))


def tevent_io(d: TEvent) -> Comm:
    return d.trace[-1]


def tevent_equal(d1: TEvent, d2: TEvent) -> bool:
    return d1 == d2  # canonical forms


def tevent_leq(d1: TEvent, d2: TEvent) -> bool:
    """Causality: the second trace is equivalent to an extension of the first."""
    if d1.otrace != d2.otrace:
        return False
    n = len(d1.trace)
    if n > len(d2.trace):
        return False
    return any(
        u[:n] == d1.trace for u in trace_closure(d2.trace, d2.otrace)
    )


def tevent_conflict(d1: TEvent, d2: TEvent) -> bool:
    """Conflict: some participant's projections of the traces conflict."""
    if d1.otrace != d2.otrace:
        return False
    parts = {b.player for b in d1.trace} | {b.player for b in d2.trace}
    for p in parts:
        if _seq_conflict(trace_proj(d1.trace, p), trace_proj(d2.trace, p)):
            return True
    return False


def fpaths(g, env: DefEnv, k: int):
    """All nonempty traces along root-to-edge paths of the global tree, with
    length at most ``k``."""
    paths = []

    def walk(term, prefix: tuple):
        if len(prefix) >= k:
            return
        term = unfold(term, env)
        if isinstance(term, GEnd):
            return
        if isinstance(term, GOut):
            for label, cont in term.branches:
                tau = prefix + (Comm(OUT, term.sender, term.receiver, label),)
                paths.append(tau)
                walk(cont, tau)
        else:
            assert isinstance(term, GIn)
            tau = prefix + (Comm(IN, term.sender, term.receiver, term.label),)
            paths.append(tau)
            walk(term.cont, tau)

    walk(g, ())
    return paths


def pes_of_type(at: AsyncType, env: DefEnv, k: int) -> PrimeES:
    """Events of the asynchronous type: classes of filtered paths of the
    global tree, deduplicated by t-event equality."""
    if k < 1:
        raise PreconditionError("truncation depth must be at least 1")
    omega = otr(at.queue)
    events = {ev(omega, tau) for tau in fpaths(at.gtype, env, k)}
    evs = tuple(sorted(events, key=TEvent.sort_key))
    causality = frozenset(
        (a, b) for a in evs for b in evs if a != b and tevent_leq(a, b)
    )
    conflict = frozenset((a, b) for a in evs for b in evs if tevent_conflict(a, b))
    return PrimeES(evs, causality, conflict)


# --------------------------------------------------------------------------- #
# t-event residual/retrieval
# --------------------------------------------------------------------------- #


def tevent_residual(d: TEvent, b: Comm) -> TEvent | None:
    """The t-event after ``b``: drop a leading ``b`` from an equivalent trace,
    or keep the trace when its players do not include ``b``'s."""
    omega2 = queue_map_fwd(b, d.otrace)
    if omega2 is None:
        return None
    closure = sorted(trace_closure(d.trace, d.otrace), key=lambda t: [c.sort_key() for c in t])
    for u in closure:
        if u[0] == b:
            if len(u) == 1:
                return None
            return make_tevent(omega2, u[1:])
    if b.player not in {c.player for c in d.trace}:
        return make_tevent(omega2, d.trace)
    return None


def tevent_retrieval(b: Comm, d: TEvent) -> TEvent | None:
    """The t-event before ``b``: prefix the trace by ``b`` when that stays
    pointed, or keep the trace when its players do not include ``b``'s."""
    omega2 = queue_map_bwd(b, d.otrace)
    if omega2 is None:
        return None
    candidate = (b,) + d.trace
    if pointed(candidate, omega2):
        return make_tevent(omega2, candidate)
    if b.player not in {c.player for c in d.trace}:
        return make_tevent(omega2, d.trace)
    return None


# --------------------------------------------------------------------------- #
# Event sequences of traces
# --------------------------------------------------------------------------- #


def nec(omega: OTrace, tau: Trace) -> list:
    """The n-events fired along a trace: the i-th is located at the player of
    the i-th communication and carries its projected history.  The o-trace
    identifies the ambient structure and does not enter the events."""
    events = []
    for i in range(1, len(tau) + 1):
        p = tau[i - 1].player
        events.append(NEvent(p, PEvent(trace_proj(tau[:i], p))))
    return events


def tec(omega: OTrace, tau: Trace) -> list:
    """The t-events fired along a trace: the i-th is the event of the prefix
    of length i."""
    if not tau:
        raise PreconditionError("tec requires a nonempty trace")
    if not well_formed_trace(tau, tuple(omega)):
        raise PreconditionError("tec requires a trace well formed for the o-trace")
    return [ev(omega, tau[:i]) for i in range(1, len(tau) + 1)]
