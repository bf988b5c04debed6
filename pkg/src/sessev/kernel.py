"""Core term language: processes, global types, queues, networks.

Processes and global types are regular (possibly cyclic) terms represented
as finite syntax plus named recursion equations in a :class:`DefEnv`.  All
term values are immutable and hashable; a "node" of the underlying term
graph is a constructor-headed term obtained by :func:`unfold`.

Participants and labels are plain strings; string comparison supplies the
lexicographic total order used for every canonical ordering in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

from .errors import DefError, SessError

Participant = str
Label = str


# --------------------------------------------------------------------------- #
# Actions and communications
# --------------------------------------------------------------------------- #

OUT = "!"
IN = "?"


@dataclass(frozen=True)
class Action:
    """An atomic process action: send to or receive from a peer."""

    kind: str  # OUT or IN
    peer: Participant
    label: Label

    def __str__(self) -> str:
        return f"{self.peer}{self.kind}{self.label}"


@dataclass(frozen=True)
class Comm:
    """A located communication: ``p->q!l`` (emission) or ``p->q?l`` (read)."""

    kind: str  # OUT or IN
    sender: Participant
    receiver: Participant
    label: Label

    @property
    def player(self) -> Participant:
        """The unique active participant: sender of an output, receiver of an input."""
        return self.sender if self.kind == OUT else self.receiver

    @property
    def channel(self) -> tuple[Participant, Participant]:
        return (self.sender, self.receiver)

    def is_output(self) -> bool:
        return self.kind == OUT

    def is_input(self) -> bool:
        return self.kind == IN

    def action(self) -> Action:
        """The action this communication performs at its player."""
        if self.kind == OUT:
            return Action(OUT, self.receiver, self.label)
        return Action(IN, self.sender, self.label)

    def dual(self) -> "Comm":
        return Comm(IN if self.kind == OUT else OUT, self.sender, self.receiver, self.label)

    def sort_key(self) -> tuple:
        # exploration order: player first, then kind, peer, label
        peer = self.receiver if self.kind == OUT else self.sender
        return (self.player, self.kind, peer, self.label)

    def __str__(self) -> str:
        return f"{self.sender}->{self.receiver}{self.kind}{self.label}"


def players(comms: Iterable[Comm]) -> set[Participant]:
    """Players of a trace: union of the players of its communications."""
    return {b.player for b in comms}


# --------------------------------------------------------------------------- #
# Messages and queues
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Msg:
    sender: Participant
    label: Label
    receiver: Participant

    @property
    def channel(self) -> tuple[Participant, Participant]:
        return (self.sender, self.receiver)

    def __str__(self) -> str:
        return f"<{self.sender} {self.label} {self.receiver}>"


Queue = tuple  # tuple[Msg, ...]

EMPTY_QUEUE: Queue = ()


def canonical_queue(queue: Queue) -> Queue:
    """Stable sort by channel; preserves per-channel order, normalises modulo the
    structural equivalence on queues."""
    return tuple(sorted(queue, key=lambda m: m.channel))


def queue_equiv(q1: Queue, q2: Queue) -> bool:
    """Structural equivalence of queues: per-channel subsequences coincide."""
    return canonical_queue(q1) == canonical_queue(q2)


def queue_channel(queue: Queue, sender: Participant, receiver: Participant) -> list[Msg]:
    return [m for m in queue if m.channel == (sender, receiver)]


def queue_first_on_channel(queue: Queue, sender: Participant, receiver: Participant) -> Msg | None:
    for m in queue:
        if m.channel == (sender, receiver):
            return m
    return None


def queue_pop_channel(queue: Queue, sender: Participant, receiver: Participant) -> Queue:
    """Remove the first message on the given channel (which must exist)."""
    for i, m in enumerate(queue):
        if m.channel == (sender, receiver):
            return queue[:i] + queue[i + 1 :]
    raise SessError(f"no message on channel {sender}->{receiver}")


# --------------------------------------------------------------------------- #
# Process terms
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Stop:
    """The inactive process 0."""

    def __str__(self) -> str:
        return "0"


@dataclass(frozen=True)
class Out:
    """Internal choice of outputs towards one peer."""

    peer: Participant
    branches: tuple  # tuple[tuple[Label, Proc], ...], sorted by label

    def __post_init__(self):
        _check_branches(self.branches, "output choice")


@dataclass(frozen=True)
class In:
    """External choice of inputs from one peer."""

    peer: Participant
    branches: tuple

    def __post_init__(self):
        _check_branches(self.branches, "input choice")


@dataclass(frozen=True)
class PRef:
    name: str


Proc = Union[Stop, Out, In, PRef]


def _check_branches(branches: tuple, what: str) -> None:
    if not branches:
        raise DefError(f"{what} must have at least one branch")
    labels = [l for l, _ in branches]
    if len(set(labels)) != len(labels):
        raise DefError(f"duplicate label in {what}: {sorted(labels)}")


def _sorted_branches(branches: Iterable[tuple]) -> tuple:
    return tuple(sorted(branches, key=lambda b: b[0]))


def out(peer: Participant, branches: Iterable[tuple]) -> Out:
    return Out(peer, _sorted_branches(branches))


def inp(peer: Participant, branches: Iterable[tuple]) -> In:
    return In(peer, _sorted_branches(branches))


def send(peer: Participant, label: Label, cont: Proc = Stop()) -> Out:
    return Out(peer, ((label, cont),))


def recv(peer: Participant, label: Label, cont: Proc = Stop()) -> In:
    return In(peer, ((label, cont),))


# --------------------------------------------------------------------------- #
# Global terms
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class GEnd:
    def __str__(self) -> str:
        return "End"


@dataclass(frozen=True)
class GOut:
    """Output choice ``p->q!{l_i ; G_i}``."""

    sender: Participant
    receiver: Participant
    branches: tuple  # tuple[tuple[Label, Global], ...], sorted by label

    def __post_init__(self):
        _check_branches(self.branches, "global output choice")


@dataclass(frozen=True)
class GIn:
    """Input prefix ``p->q?l ; G``."""

    sender: Participant
    receiver: Participant
    label: Label
    cont: "Global"


@dataclass(frozen=True)
class GRef:
    name: str


Global = Union[GEnd, GOut, GIn, GRef]


def gout(sender: Participant, receiver: Participant, branches: Iterable[tuple]) -> GOut:
    return GOut(sender, receiver, _sorted_branches(branches))


def gsend(sender: Participant, receiver: Participant, label: Label, cont: Global = GEnd()) -> GOut:
    return GOut(sender, receiver, ((label, cont),))


# --------------------------------------------------------------------------- #
# Definition environments
# --------------------------------------------------------------------------- #


@dataclass
class DefEnv:
    """Named recursion equations for processes and global types.

    Synthesised definitions (e.g. cyclic projections) get ``@``-prefixed
    names, which the concrete syntax cannot produce.
    """

    procs: dict = field(default_factory=dict)  # name -> Proc
    globals_: dict = field(default_factory=dict)  # name -> Global
    _fresh: int = 0

    def copy(self) -> "DefEnv":
        env = DefEnv(dict(self.procs), dict(self.globals_))
        env._fresh = self._fresh
        return env

    def define_proc(self, name: str, body: Proc) -> None:
        if name in self.procs:
            raise DefError(f"duplicate process definition {name!r}")
        self.procs[name] = body

    def define_global(self, name: str, body: Global) -> None:
        if name in self.globals_:
            raise DefError(f"duplicate global definition {name!r}")
        self.globals_[name] = body

    def fresh_proc_name(self, hint: str) -> str:
        self._fresh += 1
        return f"@{hint}_{self._fresh}"

    def validate(self) -> None:
        """Check that every reference resolves and ref-chains are guarded."""
        for body in self.procs.values():
            for t in _syntactic_subterms(body):
                if isinstance(t, PRef) and t.name not in self.procs:
                    raise DefError(f"dangling process reference {t.name!r}")
        for body in self.globals_.values():
            for t in _syntactic_subterms(body):
                if isinstance(t, GRef) and t.name not in self.globals_:
                    raise DefError(f"dangling global reference {t.name!r}")
        for name in self.procs:
            unfold(PRef(name), self)
        for name in self.globals_:
            unfold(GRef(name), self)


def _syntactic_subterms(t) -> Iterator:
    yield t
    if isinstance(t, (Out, In, GOut)):
        for _, cont in t.branches:
            yield from _syntactic_subterms(cont)
    elif isinstance(t, GIn):
        yield from _syntactic_subterms(t.cont)


# --------------------------------------------------------------------------- #
# Unfolding and term-graph traversal
# --------------------------------------------------------------------------- #


def unfold(t, env: DefEnv):
    """Resolve top-level references until the head is a constructor.

    Terminates by guardedness; an unguarded reference cycle (or a dangling
    name) raises :class:`DefError`.
    """
    seen = set()
    while isinstance(t, (PRef, GRef)):
        if t.name in seen:
            raise DefError(f"unguarded reference cycle through {t.name!r}")
        seen.add(t.name)
        table = env.procs if isinstance(t, PRef) else env.globals_
        if t.name not in table:
            raise DefError(f"dangling reference {t.name!r}")
        t = table[t.name]
    return t


def children(node, env: DefEnv) -> list:
    """Constructor-headed successors of a constructor-headed node."""
    if isinstance(node, (Out, In, GOut)):
        return [unfold(c, env) for _, c in node.branches]
    if isinstance(node, GIn):
        return [unfold(node.cont, env)]
    return []


def reachable_nodes(t, env: DefEnv) -> list:
    """All constructor-headed nodes reachable from ``t`` (finite by regularity),
    in deterministic DFS order."""
    root = unfold(t, env)
    seen: list = []
    seen_set = set()
    stack = [root]
    while stack:
        n = stack.pop()
        if n in seen_set:
            continue
        seen_set.add(n)
        seen.append(n)
        stack.extend(reversed(children(n, env)))
    return seen


def head_comm(node) -> Comm | None:
    """The communication decorating a global node's root, if any.

    For an output choice the label is branch-dependent; the returned
    communication carries the first branch's label but its player and
    channel are branch-independent, which is what callers rely on.
    """
    if isinstance(node, GOut):
        return Comm(OUT, node.sender, node.receiver, node.branches[0][0])
    if isinstance(node, GIn):
        return Comm(IN, node.sender, node.receiver, node.label)
    return None


def is_cyclic(g: Global, env: DefEnv) -> bool:
    """True iff the node of ``g`` lies on a cycle of its reachable term graph
    (its unfolding tree contains itself as a proper subtree)."""
    root = unfold(g, env)
    stack = list(children(root, env))
    seen = set()
    while stack:
        n = stack.pop()
        if n == root:
            return True
        if n in seen:
            continue
        seen.add(n)
        stack.extend(children(n, env))
    return False


# --------------------------------------------------------------------------- #
# Regular-term equality (bisimulation on finite term graphs)
# --------------------------------------------------------------------------- #


def regular_equal(a, b, env: DefEnv) -> bool:
    """Equality of the infinite unfoldings of two regular terms."""
    assumed: set = set()

    def go(x, y) -> bool:
        if x == y:
            # also covers shared references whose definition is still being
            # synthesised (cyclic projections compare mid-construction)
            return True
        x = unfold(x, env)
        y = unfold(y, env)
        if x == y:
            return True
        if (x, y) in assumed:
            return True
        if type(x) is not type(y):
            return False
        assumed.add((x, y))
        if isinstance(x, (Stop, GEnd)):
            return True
        if isinstance(x, (Out, In)):
            if x.peer != y.peer:
                return False
            return _branches_equal(x.branches, y.branches, go)
        if isinstance(x, GOut):
            if (x.sender, x.receiver) != (y.sender, y.receiver):
                return False
            return _branches_equal(x.branches, y.branches, go)
        if isinstance(x, GIn):
            if (x.sender, x.receiver, x.label) != (y.sender, y.receiver, y.label):
                return False
            return go(x.cont, y.cont)
        raise SessError(f"unexpected term {x!r}")

    return go(a, b)


def _branches_equal(bs1: tuple, bs2: tuple, go) -> bool:
    if len(bs1) != len(bs2):
        return False
    for (l1, c1), (l2, c2) in zip(bs1, bs2):
        if l1 != l2 or not go(c1, c2):
            return False
    return True


# --------------------------------------------------------------------------- #
# Players
# --------------------------------------------------------------------------- #


def players_comm(b: Comm) -> set[Participant]:
    return {b.player}


def players_global(g: Global, env: DefEnv) -> set[Participant]:
    """Players of a global type: least fixpoint over the finite term graph."""
    nodes = reachable_nodes(g, env)
    play: dict = {n: set() for n in nodes}
    changed = True
    while changed:
        changed = False
        for n in nodes:
            acc = set(play[n])
            c = head_comm(n)
            if c is not None:
                acc.add(c.player)
            for m in children(n, env):
                acc |= play[m]
            if acc != play[n]:
                play[n] = acc
                changed = True
    return play[unfold(g, env)]


# --------------------------------------------------------------------------- #
# Networks and asynchronous types
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Network:
    """Parallel composition of located processes with one message queue."""

    procs: tuple  # tuple[tuple[Participant, Proc], ...] sorted by participant
    queue: Queue = EMPTY_QUEUE

    def __post_init__(self):
        names = [p for p, _ in self.procs]
        if len(set(names)) != len(names):
            raise DefError(f"duplicate participant in network: {names}")

    @staticmethod
    def of(procs: dict, queue: Queue = EMPTY_QUEUE) -> "Network":
        return Network(tuple(sorted(procs.items())), queue)

    def proc_map(self) -> dict:
        return dict(self.procs)

    def proc_of(self, p: Participant) -> Proc:
        for name, proc in self.procs:
            if name == p:
                return proc
        return Stop()

    def with_proc(self, p: Participant, proc: Proc) -> "Network":
        procs = dict(self.procs)
        procs[p] = proc
        return Network.of(procs, self.queue)

    def with_queue(self, queue: Queue) -> "Network":
        return Network(self.procs, queue)

    def participants(self) -> list[Participant]:
        return [p for p, _ in self.procs]

    def active_participants(self, env: DefEnv) -> list[Participant]:
        """Participants whose process is not (an unfolding of) 0."""
        return [p for p, proc in self.procs if not isinstance(unfold(proc, env), Stop)]

    def canonical(self, env: DefEnv) -> "Network":
        """Normal form used as an exploration key: processes unfolded one step,
        inactive entries pruned, queue canonicalised."""
        procs = {
            p: unfold(proc, env)
            for p, proc in self.procs
            if not isinstance(unfold(proc, env), Stop)
        }
        return Network.of(procs, canonical_queue(self.queue))


@dataclass(frozen=True)
class AsyncType:
    """A global type paired with a queue."""

    gtype: Global
    queue: Queue = EMPTY_QUEUE

    def canonical(self, env: DefEnv) -> "AsyncType":
        return AsyncType(unfold(self.gtype, env), canonical_queue(self.queue))


def network_equiv(n1: Network, n2: Network, env: DefEnv) -> bool:
    """Equality modulo structural congruence (0-entries dropped, parallel
    reordered) and queue equivalence, with regular equality on processes."""
    m1 = {p: proc for p, proc in n1.procs if not isinstance(unfold(proc, env), Stop)}
    m2 = {p: proc for p, proc in n2.procs if not isinstance(unfold(proc, env), Stop)}
    if set(m1) != set(m2):
        return False
    if not queue_equiv(n1.queue, n2.queue):
        return False
    return all(regular_equal(m1[p], m2[p], env) for p in m1)


def lint_self_communication(g: Global, env: DefEnv) -> list[str]:
    """Flag ``p->p`` communications; they are accepted but almost surely a typo."""
    warnings = []
    for n in reachable_nodes(g, env):
        c = head_comm(n)
        if c is not None and c.sender == c.receiver:
            warnings.append(f"self-communication {c}")
    return warnings
