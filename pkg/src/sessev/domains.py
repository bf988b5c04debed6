"""Configurations, proving sequences, configuration domains, and the
isomorphism check between the flow event structure of a typed network and
the prime event structure of its asynchronous type.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import PreconditionError
from .events import (
    fes_of_network,
    nec,
    nevent_io,
    pes_of_type,
    tec,
    tevent_conflict,
    tevent_io,
    tevent_leq,
)
from .kernel import AsyncType, DefEnv, Network
from .semantics import net_enabled, net_step
from .traces import otr
from .typecheck import typecheck


# --------------------------------------------------------------------------- #
# Configurations and proving sequences
# --------------------------------------------------------------------------- #


def _conflict_free(es, events) -> bool:
    events = list(events)
    return not any(
        es.in_conflict(a, b) for i, a in enumerate(events) for b in events[i + 1 :]
    )


def is_configuration(es, X) -> bool:
    """Configuration test.

    For a prime structure: downward-closed and conflict-free.  For a flow
    structure: conflict-free, downward-closed up to conflicts, and without
    causality cycles inside the set.
    """
    X = frozenset(X)
    if not X <= set(es.events):
        return False
    if not _conflict_free(es, X):
        return False
    flow = es.flow_pairs()
    if es.is_prime:
        return all(a in X for (a, b) in flow if b in X)
    # downward closure up to conflicts
    for e in X:
        for (a, b) in flow:
            if b == e and a not in X:
                if not any(
                    es.in_conflict(a, c) and (c, e) in flow for c in X
                ):
                    return False
    # no causality cycles within X
    inside = {(a, b) for (a, b) in flow if a in X and b in X}
    return not _digraph_has_cycle(X, inside)


def _digraph_has_cycle(nodes, edges) -> bool:
    succ: dict = {n: [] for n in nodes}
    for a, b in edges:
        succ[a].append(b)
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {n: WHITE for n in nodes}

    def visit(n) -> bool:
        colour[n] = GREY
        for m in succ[n]:
            if colour[m] == GREY:
                return True
            if colour[m] == WHITE and visit(m):
                return True
        colour[n] = BLACK
        return False

    return any(colour[n] == WHITE and visit(n) for n in nodes)


def _extension_ok(es, X, e) -> bool:
    """Whether appending ``e`` to an enumeration of ``X`` keeps it a proving
    sequence: every flow-predecessor of ``e`` is in ``X`` or conflicts with a
    member of ``X`` below ``e`` (the latter only in flow structures)."""
    for (a, b) in es.flow_pairs():
        if b != e or a in X:
            continue
        if es.is_prime:
            return False
        if not any(es.in_conflict(a, c) and (c, e) in es.flow_pairs() for c in X):
            return False
    return True


def is_proving_sequence(es, seq) -> bool:
    """Distinct, pairwise conflict-free, and every flow-predecessor of each
    element appears earlier or conflicts with an earlier predecessor."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return False
    if not _conflict_free(es, seq):
        return False
    if not all(e in set(es.events) for e in seq):
        return False
    for i, e in enumerate(seq):
        if not _extension_ok(es, frozenset(seq[:i]), e):
            return False
    return True


@dataclass
class DomainPoset:
    """The poset of configurations under inclusion."""

    configurations: frozenset  # frozenset[frozenset[event]]

    def __len__(self) -> int:
        return len(self.configurations)

    def nonempty_count(self) -> int:
        return sum(1 for c in self.configurations if c)

    def leq(self, x, y) -> bool:
        return x <= y

    def covers(self) -> list:
        """Covering pairs of the inclusion order (for rendering)."""
        out = []
        for x in self.configurations:
            for y in self.configurations:
                if x < y and len(y) == len(x) + 1:
                    out.append((x, y))
        return out


def enumerate_configurations(es, max_size: int | None = None) -> DomainPoset:
    """Breadth-first extension of proving sequences, deduplicated as sets."""
    if max_size is None:
        max_size = len(es.events)
    seen = {frozenset()}
    frontier = [frozenset()]
    while frontier:
        X = frontier.pop()
        if len(X) >= max_size:
            continue
        for e in es.events:
            if e in X:
                continue
            if any(es.in_conflict(e, x) for x in X):
                continue
            if not _extension_ok(es, X, e):
                continue
            Y = X | {e}
            if Y not in seen:
                seen.add(Y)
                frontier.append(Y)
    return DomainPoset(frozenset(seen))


# --------------------------------------------------------------------------- #
# Domain isomorphism
# --------------------------------------------------------------------------- #


@dataclass
class IsoResult:
    isomorphic: bool
    config_count: int = 0  # nonempty configurations on each side when isomorphic
    table: list = field(default_factory=list)  # (network config, type config) pairs
    failure: str | None = None
    margin_note: str | None = None

    def __bool__(self) -> bool:
        return self.isomorphic


def _stable_depth(build, k: int) -> bool:
    """True when the structure built at depth k already contains every event
    (building one level deeper adds nothing)."""
    return set(build(k).events) == set(build(k + 1).events)


def choose_depth(net: Network, at: AsyncType, env: DefEnv, cap: int = 12) -> int:
    """The total event count of structure-stable instances; else ``cap``."""
    for k in range(1, cap + 1):
        if _stable_depth(lambda d: fes_of_network(net, env, d), k) and _stable_depth(
            lambda d: pes_of_type(at, env, d), k
        ):
            return k
    return cap


def domain_iso(net: Network, at: AsyncType, env: DefEnv, k: int) -> IsoResult:
    """Mechanical check of the configuration-domain isomorphism for a typed
    network, via the trace correspondence between the event sequences fired
    on the two sides.

    When both structures are complete at depth ``k`` the whole domains are
    compared.  Truncated instances are compared on their k-step approximants
    (the configurations reached by joint traces of length at most ``k``),
    with a margin note; boundary configurations of the raw truncations would
    not be meaningful.
    """
    tc = typecheck(net, at, env)
    if not tc:
        raise PreconditionError(
            "domain_iso requires a typed network: "
            + "; ".join(str(d) for d in tc.diagnostics)
        )
    omega = otr(net.queue)
    fes = fes_of_network(net, env, k)

    complete = _stable_depth(lambda d: fes_of_network(net, env, d), k) and _stable_depth(
        lambda d: pes_of_type(at, env, d), k
    )
    pes = pes_of_type(at, env, k) if complete else None
    margin = (
        None
        if complete
        else f"truncated structures: domains compared on their {k}-step approximants"
    )
    net_events = set(fes.events)

    def type_sequence_ok(deltas) -> str | None:
        if complete:
            if any(d not in set(pes.events) for d in deltas):
                return "type event missing from the structure"
            if not is_proving_sequence(pes, deltas):
                return "type trace does not yield a proving sequence"
            return None
        # truncated: check the intrinsic relations on the sequence itself
        for i, d in enumerate(deltas):
            for j in range(i):
                if tevent_conflict(deltas[j], d):
                    return "conflicting type events along one trace"
                if tevent_leq(d, deltas[j]) and d != deltas[j]:
                    return "type event precedes one of its causes"
        return None

    # candidate bijection via traces: breadth-first over the network LTS,
    # deduplicating states by the configuration reached
    mapping: dict = {frozenset(): frozenset()}
    frontier = [(net, ())]
    seen_configs = {frozenset()}
    while frontier:
        state, tau = frontier.pop()
        if not complete and len(tau) >= k:
            continue
        for b in net_enabled(state, env):
            tau2 = tau + (b,)
            rhos = nec(omega, tau2)
            if any(r not in net_events for r in rhos):
                return IsoResult(
                    False, failure=f"network event missing from the structure at {tau2}"
                )
            X = frozenset(rhos)
            if len(X) != len(rhos):
                return IsoResult(False, failure=f"repeated event along trace {tau2}")
            if not is_proving_sequence(fes, rhos):
                return IsoResult(
                    False, failure=f"network trace does not yield a proving sequence: {tau2}"
                )
            deltas = tec(omega, tau2)
            err = type_sequence_ok(deltas)
            if err is not None:
                return IsoResult(False, failure=f"{err}: {tau2}")
            for r, d, b2 in zip(rhos, deltas, tau2):
                if nevent_io(r) != b2 or tevent_io(d) != b2:
                    return IsoResult(
                        False,
                        failure=f"event sequence labels disagree with the trace at {b2}",
                    )
            Y = frozenset(deltas)
            if X in mapping and mapping[X] != Y:
                return IsoResult(
                    False, failure=f"trace correspondence is not well defined at {tau2}"
                )
            mapping[X] = Y
            if X not in seen_configs:
                seen_configs.add(X)
                frontier.append((net_step(state, b, env), tau2))

    if complete:
        dn = enumerate_configurations(fes).configurations
        dg = enumerate_configurations(pes).configurations
        if set(mapping) != dn:
            missing = sorted(dn - set(mapping), key=len)[:1]
            extra = sorted(set(mapping) - dn, key=len)[:1]
            return IsoResult(
                False,
                failure=f"network domain mismatch: unmatched {missing or extra}",
            )
        image = set(mapping.values())
        if image != dg:
            missing2 = sorted(dg - image, key=len)[:1]
            return IsoResult(False, failure=f"type domain mismatch: unmatched {missing2}")
    if len(set(mapping.values())) != len(mapping):
        return IsoResult(False, failure="trace correspondence is not injective")
    # inclusion preserved in both directions
    items = sorted(mapping.items(), key=lambda kv: (len(kv[0]), sorted(map(str, kv[0]))))
    for X1, Y1 in items:
        for X2, Y2 in items:
            if (X1 <= X2) != (Y1 <= Y2):
                return IsoResult(
                    False,
                    failure="inclusion is not preserved by the correspondence",
                )
    # label coherence per configuration
    for X1, Y1 in items:
        if sorted(str(nevent_io(r)) for r in X1) != sorted(str(tevent_io(d)) for d in Y1):
            return IsoResult(False, failure="communication labels differ across the bijection")
    table = [(x, y) for x, y in items]
    return IsoResult(True, sum(1 for x, _ in items if x), table, None, margin)
