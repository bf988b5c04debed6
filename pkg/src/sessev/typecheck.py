"""Projection, boundedness, balancing, well-formedness, the process
preorder, network typing, and bounded progress witnesses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DefError, PreconditionError, SessError
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
    Global,
    In,
    Msg,
    Network,
    Out,
    PRef,
    Proc,
    Queue,
    Stop,
    canonical_queue,
    children,
    head_comm,
    inp,
    is_cyclic,
    out,
    players_global,
    queue_equiv,
    queue_first_on_channel,
    queue_pop_channel,
    reachable_nodes,
    regular_equal,
    unfold,
)
from .semantics import net_run, type_run
from .traces import Trace

INFINITE = math.inf


@dataclass
class Diagnostic:
    code: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] at {self.location}: {self.message}"

    def to_json(self) -> dict:
        return {"code": self.code, "location": self.location, "message": self.message}


class ProjectionUndefined(SessError):
    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


# --------------------------------------------------------------------------- #
# Projection
# --------------------------------------------------------------------------- #


def project(g: Global, r: str, env: DefEnv) -> Proc:
    """Project a global type onto a participant.

    Cyclic projections are closed through fresh ``@``-prefixed process
    equations added to ``env``.  Raises :class:`ProjectionUndefined` with the
    failing clause when no projection exists.
    """
    play_cache: dict = {}

    def play(node) -> set:
        if node not in play_cache:
            play_cache[node] = players_global(node, env)
        return play_cache[node]

    graph_size = len(reachable_nodes(g, env))
    # in-progress nodes: node -> (entry guard depth, assigned name or None)
    in_progress: dict = {}
    finished: dict = {}

    def undef(code: str, node, msg: str):
        raise ProjectionUndefined(Diagnostic(code, _loc(node), msg))

    def go(term: Global, guard_depth: int) -> Proc:
        node = unfold(term, env)
        if node in finished:
            name = finished[node]
            return PRef(name) if name is not None else _finished_terms[node]
        if node in in_progress:
            entry_depth, name = in_progress[node]
            if guard_depth <= entry_depth:
                undef(
                    "unguarded-projection",
                    node,
                    f"projection on {r!r} loops without producing an action",
                )
            if name is None:
                name = env.fresh_proc_name(f"proj_{r}")
                in_progress[node] = (entry_depth, name)
            return PRef(name)
        in_progress[node] = (guard_depth, None)
        body = compute(node, guard_depth)
        _, name = in_progress.pop(node)
        if name is not None:
            env.define_proc(name, body)
            finished[node] = name
            return PRef(name)
        finished[node] = None
        _finished_terms[node] = body
        return body

    _finished_terms: dict = {}

    def compute(node: Global, guard_depth: int) -> Proc:
        if r not in play(node):
            return Stop()
        if isinstance(node, GIn):
            if r == node.receiver:
                return inp(node.sender, ((node.label, go(node.cont, guard_depth + 1)),))
            # r != receiver and r in play(node), hence r plays in the continuation
            return go(node.cont, guard_depth)
        assert isinstance(node, GOut)
        if r == node.sender:
            branches = [(label, go(cont, guard_depth + 1)) for label, cont in node.branches]
            return out(node.receiver, branches)
        if r == node.receiver:
            if len(node.branches) == 1:
                return go(node.branches[0][1], guard_depth)
            return factor_receiver(node, guard_depth)
        # outsider: r must play in every branch and project identically
        for label, cont in node.branches:
            if r not in play(unfold(cont, env)):
                undef(
                    "branch-mismatch",
                    node,
                    f"{r!r} plays in some but not all branches of the choice",
                )
        projections = [go(cont, guard_depth) for _, cont in node.branches]
        first = projections[0]
        for p2 in projections[1:]:
            try:
                same = regular_equal(first, p2, env)
            except DefError:
                # branches close over distinct still-open cycles; their
                # comparison cannot be discharged structurally
                undef(
                    "branch-mismatch",
                    node,
                    f"projections of {r!r} close over unresolved cycles",
                )
            if not same:
                undef(
                    "branch-mismatch",
                    node,
                    f"projections of {r!r} differ across branches of the choice",
                )
        return first

    def symbolic_walk(start) -> list:
        """Apply the projection clauses of ``r`` symbolically along a chain of
        global nodes, collecting the actions ``r`` performs.  Stops at any
        node whose projection is not a single action prefixing (choices,
        termination, non-players)."""
        steps = [((), unfold(start, env))]
        acts: tuple = ()
        node = steps[0][1]
        for _ in range(2 * graph_size + 1):
            if r not in play(node):
                break
            nxt = None
            if isinstance(node, GIn):
                if r == node.receiver:
                    acts = acts + (Action(IN, node.sender, node.label),)
                nxt = unfold(node.cont, env)
            elif isinstance(node, GOut) and len(node.branches) == 1:
                label, cont = node.branches[0]
                if r == node.sender:
                    acts = acts + (Action(OUT, node.receiver, label),)
                nxt = unfold(cont, env)
            else:
                break  # a genuine choice: the action prefix ends here
            steps.append((acts, nxt))
            node = nxt
        return steps

    def factor_receiver(node: GOut, guard_depth: int) -> Proc:
        """Receiver clause for a multi-branch choice: every branch projection
        must factor as a common action prefix followed by the input of that
        branch's label from the sender.  Accept the shortest prefix at which
        every branch presents its input."""
        sender = node.sender
        tables = []  # per branch: label, {action prefix -> continuation node}
        for label, cont in node.branches:
            table: dict = {}
            for acts, n in symbolic_walk(cont):
                if (
                    isinstance(n, GIn)
                    and n.sender == sender
                    and n.receiver == r
                    and n.label == label
                    and acts not in table
                ):
                    table[acts] = n.cont
            tables.append((label, table))
        common = set(tables[0][1])
        for _, table in tables[1:]:
            common &= set(table)
        if not common:
            undef(
                "no-factorization",
                node,
                f"branch projections on {r!r} admit no common action prefix"
                " ending in the branch input",
            )
        prefix = min(common, key=lambda acts: (len(acts), tuple(map(str, acts))))
        conts = [
            (label, go(table[prefix], guard_depth + len(prefix) + 1))
            for label, table in tables
        ]
        result: Proc = inp(sender, conts)
        for act in reversed(prefix):
            branch = ((act.label, result),)
            result = Out(act.peer, branch) if act.kind == OUT else In(act.peer, branch)
        return result

    result = go(g, 0)
    return result


def _loc(node) -> str:
    c = head_comm(node)
    return str(c) if c is not None else "End"


# --------------------------------------------------------------------------- #
# Depth and boundedness
# --------------------------------------------------------------------------- #


def ord_trace(tau: Trace, p: str) -> int:
    """1-based position of the first communication played by ``p``; 0 if none."""
    for i, b in enumerate(tau, start=1):
        if b.player == p:
            return i
    return 0


def depth(g: Global, p: str, env: DefEnv) -> float:
    """Depth of ``p`` in ``g``: the supremum of first-play positions over all
    paths, computed on the finite term graph."""
    root = unfold(g, env)
    if p not in players_global(root, env):
        return 0
    comm = head_comm(root)
    if comm is not None and comm.player == p:
        return 1
    # region of nodes reachable without crossing a p-headed node
    region = set()
    stack = [root]
    while stack:
        n = stack.pop()
        if n in region:
            continue
        region.add(n)
        for m in children(n, env):
            c = head_comm(m)
            if c is None or c.player != p:
                if m not in region:
                    stack.append(m)
    # restrict to nodes from which a p-headed node is reachable inside the region
    def has_p_successor(n) -> bool:
        return any(
            (c := head_comm(m)) is not None and c.player == p for m in children(n, env)
        )

    co: set = set()
    changed = True
    while changed:
        changed = False
        for n in region:
            if n in co:
                continue
            if has_p_successor(n) or any(
                m in co for m in children(n, env) if m in region
            ):
                co.add(n)
                changed = True
    if root not in co:
        # p in play(G) guarantees some path reaches p first; root must co-reach
        raise SessError("internal: player unreachable despite membership in play")
    # cycle inside the co-reaching region => unbounded depth
    if _has_cycle(co, env):
        return INFINITE
    # longest node-path inside `co` from root to a node with a p-successor
    memo: dict = {}

    def longest(n) -> float:
        if n in memo:
            return memo[n]
        best = -math.inf
        if has_p_successor(n):
            best = 1
        for m in children(n, env):
            if m in co:
                best = max(best, 1 + longest(m))
        memo[n] = best
        return best

    return longest(root) + 1


def _has_cycle(nodes: set, env: DefEnv) -> bool:
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {n: WHITE for n in nodes}

    def visit(n) -> bool:
        colour[n] = GREY
        for m in children(n, env):
            if m not in colour:
                continue
            if colour[m] == GREY:
                return True
            if colour[m] == WHITE and visit(m):
                return True
        colour[n] = BLACK
        return False

    return any(colour[n] == WHITE and visit(n) for n in list(nodes))


def bounded(g: Global, env: DefEnv) -> tuple[bool, list]:
    """A global type is bounded iff depth is finite for every player of every
    reachable subterm.  Returns the offending (subterm, participant) pairs."""
    offending = []
    for node in reachable_nodes(g, env):
        for p in sorted(players_global(node, env)):
            if depth(node, p, env) == INFINITE:
                offending.append((node, p))
    return (not offending, offending)


# --------------------------------------------------------------------------- #
# Balancing
# --------------------------------------------------------------------------- #


@dataclass
class BalanceResult:
    balanced: bool
    derivation: list = field(default_factory=list)
    diagnostic: Diagnostic | None = None

    def __bool__(self) -> bool:
        return self.balanced


def balanced(at: AsyncType, env: DefEnv) -> BalanceResult:
    """Decide the balancing predicate coinductively.

    Judgements already assumed on the current path succeed (circular
    derivations are regular); the queue outgrowing the acyclic spine is
    reported as divergence.
    """
    trace: list = []
    max_queue = len(at.queue) + len(reachable_nodes(at.gtype, env)) + 1

    cyclic_cache: dict = {}

    def cyc(node) -> bool:
        if node not in cyclic_cache:
            cyclic_cache[node] = is_cyclic(node, env)
        return cyclic_cache[node]

    def derive(g: Global, queue: Queue, assumptions: frozenset) -> Diagnostic | None:
        node = unfold(g, env)
        key = (node, canonical_queue(queue))
        if key in assumptions:
            trace.append(f"assumption hit: {_loc(node)}")
            return None
        if len(queue) > max_queue:
            return Diagnostic(
                "divergence-guard",
                _loc(node),
                f"queue grew past {max_queue} messages; derivation cannot be regular",
            )
        assumptions = assumptions | {key}
        if isinstance(node, GEnd):
            if queue:
                return Diagnostic(
                    "unmatched-messages",
                    "End",
                    f"terminated type leaves {len(queue)} message(s) unread",
                )
            trace.append("End")
            return None
        if isinstance(node, GIn):
            msg = queue_first_on_channel(queue, node.sender, node.receiver)
            if msg is None or msg.label != node.label:
                return Diagnostic(
                    "unmatched-input",
                    _loc(node),
                    f"input {node.sender}->{node.receiver}?{node.label} has no matching"
                    f" first message in the queue",
                )
            trace.append(f"In {_loc(node)}")
            return derive(node.cont, queue_pop_channel(queue, node.sender, node.receiver), assumptions)
        assert isinstance(node, GOut)
        if cyc(node) and queue:
            return Diagnostic(
                "cyclic-queue",
                _loc(node),
                "cyclic output choice reached with a non-empty queue",
            )
        trace.append(f"Out {node.sender}->{node.receiver}!{{{','.join(l for l, _ in node.branches)}}}")
        for label, cont in node.branches:
            d = derive(cont, queue + (Msg(node.sender, label, node.receiver),), assumptions)
            if d is not None:
                return d
        return None

    diag = derive(at.gtype, at.queue, frozenset())
    return BalanceResult(diag is None, trace, diag)


# --------------------------------------------------------------------------- #
# Well-formedness
# --------------------------------------------------------------------------- #


@dataclass
class WellFormedResult:
    well_formed: bool
    diagnostics: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.well_formed


def well_formed(at: AsyncType, env: DefEnv) -> WellFormedResult:
    """Balanced, projectable on all players, and bounded."""
    diags: list = []
    br = balanced(at, env)
    if not br:
        diags.append(br.diagnostic)
    ok, offending = bounded(at.gtype, env)
    if not ok:
        for node, p in offending:
            diags.append(
                Diagnostic("unbounded", _loc(node), f"depth of {p!r} is infinite in a subterm")
            )
    for p in sorted(players_global(at.gtype, env)):
        try:
            project(at.gtype, p, env)
        except ProjectionUndefined as e:
            diags.append(e.diagnostic)
    return WellFormedResult(not diags, diags)


# --------------------------------------------------------------------------- #
# Process preorder and network typing
# --------------------------------------------------------------------------- #


def proc_leq(p: Proc, q: Proc, env: DefEnv) -> bool:
    """The structural preorder: ``p`` can be used where ``q`` is expected.
    Output choices must offer identical label sets; input choices may offer
    more on the left."""
    assumed: set = set()

    def go(x: Proc, y: Proc) -> bool:
        x = unfold(x, env)
        y = unfold(y, env)
        if (x, y) in assumed:
            return True
        assumed.add((x, y))
        if isinstance(x, Stop) and isinstance(y, Stop):
            return True
        if isinstance(x, Out) and isinstance(y, Out):
            if x.peer != y.peer:
                return False
            lx = [l for l, _ in x.branches]
            ly = [l for l, _ in y.branches]
            if lx != ly:
                return False
            return all(go(cx, cy) for (_, cx), (_, cy) in zip(x.branches, y.branches))
        if isinstance(x, In) and isinstance(y, In):
            if x.peer != y.peer:
                return False
            bx = dict(x.branches)
            if not set(bx) >= {l for l, _ in y.branches}:
                return False
            return all(go(bx[l], cy) for l, cy in y.branches)
        return False

    return go(p, q)


@dataclass
class TypecheckResult:
    ok: bool
    diagnostics: list = field(default_factory=list)  # per-participant Diagnostic

    def __bool__(self) -> bool:
        return self.ok


def typecheck(net: Network, at: AsyncType, env: DefEnv, check_wf: bool = True) -> TypecheckResult:
    """Rule Net: every player of the type appears in the network, shares its
    queue, and every participant's process refines its projection."""
    diags: list = []
    if check_wf:
        wf = well_formed(at, env)
        if not wf:
            return TypecheckResult(False, wf.diagnostics)
    if not queue_equiv(net.queue, at.queue):
        diags.append(Diagnostic("queue-mismatch", "queue", "network and type queues differ"))
    play = players_global(at.gtype, env)
    parts = set(net.participants())
    for p in sorted(play - parts):
        diags.append(Diagnostic("missing-player", p, f"player {p!r} of the type is not in the network"))
    for p, proc in net.procs:
        try:
            proj = project(at.gtype, p, env)
        except ProjectionUndefined as e:
            diags.append(e.diagnostic)
            continue
        if not proc_leq(proc, proj, env):
            diags.append(
                Diagnostic(
                    "refinement-failure",
                    p,
                    f"process of {p!r} does not refine its projection",
                )
            )
    return TypecheckResult(not diags, diags)


# --------------------------------------------------------------------------- #
# Input depth and progress witnesses
# --------------------------------------------------------------------------- #


def idepth(g: Global, b: Comm, env: DefEnv) -> float:
    """Number of constructors guarding the (sub)term that performs the input
    ``b``; infinite when some path misses it."""
    if b.kind != IN:
        raise PreconditionError("idepth is defined for input communications")
    root = unfold(g, env)

    visiting: set = set()
    memo: dict = {}

    def value(node) -> float:
        if isinstance(node, GIn) and (node.sender, node.receiver, node.label) == (
            b.sender,
            b.receiver,
            b.label,
        ):
            return 1
        if isinstance(node, GEnd):
            return INFINITE
        if node in memo:
            return memo[node]
        if node in visiting:
            return INFINITE  # a cycle missing the input has unbounded guards
        visiting.add(node)
        result = 1 + max(value(m) for m in children(node, env))
        visiting.discard(node)
        memo[node] = result
        return result

    return value(root)


def progress_witness(net: Network, at: AsyncType, target, env: DefEnv) -> Trace:
    """A transition sequence discharging the progress obligation for
    ``target``: either a participant (ends with a communication played by it)
    or a queued message (ends with the input consuming it).

    Built on the type side with top transitions only, then replayed on the
    network; the length is bounded by depth resp. input depth.
    """
    tc = typecheck(net, at, env)
    if not tc:
        raise PreconditionError("progress witnesses exist only for typed networks")

    if isinstance(target, Msg):
        first = queue_first_on_channel(at.queue, target.sender, target.receiver)
        if first != target:
            raise PreconditionError(
                f"target {target} is not the first message on its channel"
            )
        goal = Comm(IN, target.sender, target.receiver, target.label)
        bound = idepth(at.gtype, goal, env)

        def done(node) -> Comm | None:
            if isinstance(node, GIn) and (node.sender, node.receiver) == target.channel:
                if node.label != target.label:
                    raise SessError(
                        "internal: balanced type meets the wrong label at the target channel"
                    )
                return Comm(IN, node.sender, node.receiver, node.label)
            return None

    else:
        p = target
        if isinstance(unfold(net.proc_of(p), env), Stop):
            raise PreconditionError(f"participant {p!r} has no behaviour left")
        bound = depth(at.gtype, p, env)
        if bound == 0 or bound == INFINITE:
            raise SessError(f"internal: typed network with depth({p!r}) = {bound}")

        def done(node) -> Comm | None:
            c = head_comm(node)
            if c is not None and c.player == p:
                if isinstance(node, GOut):
                    return Comm(OUT, node.sender, node.receiver, node.branches[0][0])
                return Comm(IN, node.sender, node.receiver, node.label)
            return None

    trace: list[Comm] = []
    state = at
    for _ in range(int(bound) if bound != INFINITE else 0):
        node = unfold(state.gtype, env)
        b = done(node)
        if b is None:
            # take any top transition: first branch of an output choice, or
            # the guarded input (its message is present by balancing)
            if isinstance(node, GOut):
                b = Comm(OUT, node.sender, node.receiver, node.branches[0][0])
            elif isinstance(node, GIn):
                b = Comm(IN, node.sender, node.receiver, node.label)
            else:
                raise SessError("internal: terminated type before reaching the target")
            trace.append(b)
            state = type_run(state, (b,), env)
            continue
        trace.append(b)
        break
    else:
        raise SessError("internal: progress bound exceeded on a typed input")
    if done(unfold(type_run(at, tuple(trace[:-1]), env).gtype, env)) is None:
        raise SessError("internal: witness does not end at the target")
    net_run(net, tuple(trace), env)  # must replay on the network (session fidelity)
    return tuple(trace)
