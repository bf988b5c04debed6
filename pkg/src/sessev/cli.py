"""Command-line front end.

Subcommands run every analysis on ``.sess`` files and emit human-readable
text (with delimited tables), JSON reports, DOT graphs, and figure files.

Exit codes: 0 success / analysis true; 1 analysis false; 2 input error;
3 internal cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .domains import choose_depth, domain_iso, enumerate_configurations
from .errors import CapExceeded, NotEnabled, ParseError, PreconditionError, SessError
from .events import fes_of_network, pes_of_type
from .kernel import Msg, lint_self_communication
from .semantics import net_enabled, net_run, net_step, type_enabled, type_run, type_step
from .textfmt import parse_session, parse_trace, print_network, print_process, print_trace
from .typecheck import (
    ProjectionUndefined,
    balanced,
    bounded,
    depth,
    idepth,
    progress_witness,
    project,
    typecheck,
    well_formed,
)
from . import report as rpt

SCHEMA = "sessev.report/1"

EXIT_TRUE = 0
EXIT_FALSE = 1
EXIT_INPUT = 2
EXIT_CAP = 3


class Report:
    def __init__(self, command: str, inputs: dict, fmt: str):
        self.command = command
        self.inputs = inputs
        self.fmt = fmt
        self.verdicts: dict = {}
        self.diagnostics: list = []
        self.artifacts: dict = {}
        self.lines: list[str] = []

    def say(self, line: str) -> None:
        self.lines.append(line)

    def diagnostic(self, d) -> None:
        if isinstance(d, dict):
            self.diagnostics.append(d)
        elif hasattr(d, "to_json"):
            self.diagnostics.append(d.to_json())
        else:
            self.diagnostics.append({"message": str(d)})

    def emit(self) -> None:
        if self.fmt == "json":
            payload = {
                "schema": SCHEMA,
                "command": self.command,
                "inputs": self.inputs,
                "verdicts": self.verdicts,
                "diagnostics": self.diagnostics,
                "artifacts": self.artifacts,
            }
            print(json.dumps(payload, indent=2, sort_keys=True))
        else:
            for line in self.lines:
                print(line)
            for d in self.diagnostics:
                print(f"diagnostic: {d.get('code', '')} {d.get('location', '')} {d['message']}".strip())


def _load_session(path: str):
    text = Path(path).read_text(encoding="utf-8")
    return parse_session(text, path)


def _get(table: dict, name: str, what: str):
    if name not in table:
        raise ParseError(f"unknown {what} {name!r}; known: {', '.join(sorted(table))}")
    return table[name]


def _resolve_subject(sf, args):
    """One of --net NAME / --type NAME for commands taking either."""
    if getattr(args, "net", None) and getattr(args, "type", None):
        raise ParseError("give either --net or --type, not both")
    if getattr(args, "net", None):
        return "net", _get(sf.networks, args.net, "network")
    if getattr(args, "type", None):
        return "type", _get(sf.types, args.type, "type")
    raise ParseError("one of --net or --type is required")


def _auto_depth(args, net, at, env) -> int:
    if args.depth is not None:
        return args.depth
    if net is not None and at is not None:
        return choose_depth(net, at, env)
    return 8


# --------------------------------------------------------------------------- #
# subcommands
# --------------------------------------------------------------------------- #


def cmd_check(args, rep: Report) -> int:
    sf = _load_session(args.file)
    if args.net is None and args.type is None:
        # verify the file's own expectations
        failures = 0
        for e in sf.expectations:
            if e.assertion == "balanced":
                got = bool(balanced(sf.types[e.subject], sf.env))
            elif e.assertion == "bounded":
                got = bounded(sf.types[e.subject].gtype, sf.env)[0]
            else:
                got = bool(typecheck(sf.networks[e.subject], sf.types[e.argument], sf.env))
            ok = got == e.value
            failures += not ok
            neg = "" if e.value else "not "
            rep.say(f"expect {e.subject} {neg}{e.assertion}{' ' + e.argument if e.argument else ''}: "
                    f"{'ok' if ok else f'FAILED (got {got})'}")
        rep.verdicts["expectations_ok"] = failures == 0
        rep.artifacts["checked"] = len(sf.expectations)
        return EXIT_TRUE if failures == 0 else EXIT_FALSE
    net = _get(sf.networks, args.net, "network")
    at = _get(sf.types, args.type, "type")
    wf = well_formed(at, sf.env)
    rep.verdicts["well_formed"] = bool(wf)
    for d in wf.diagnostics:
        rep.diagnostic(d)
    for w in lint_self_communication(at.gtype, sf.env):
        rep.diagnostic(_lint(w))
    tc = typecheck(net, at, sf.env)
    rep.verdicts["typechecks"] = bool(tc)
    for d in tc.diagnostics:
        rep.diagnostic(d)
    rep.say(f"well-formed: {str(bool(wf)).lower()}")
    rep.say(f"typechecks: {str(bool(tc)).lower()}")
    return EXIT_TRUE if tc else EXIT_FALSE


def _lint(message: str) -> dict:
    return {"code": "lint", "location": "", "message": message}


def cmd_project(args, rep: Report) -> int:
    sf = _load_session(args.file)
    at = _get(sf.types, args.type, "type")
    try:
        proc = project(at.gtype, args.participant, sf.env)
    except ProjectionUndefined as e:
        rep.verdicts["projectable"] = False
        rep.diagnostic(e.diagnostic)
        rep.say(f"projection on {args.participant}: undefined")
        return EXIT_FALSE
    text = print_process(proc)
    rep.verdicts["projectable"] = True
    rep.artifacts["projection"] = text
    defs = {name: print_process(body) for name, body in sf.env.procs.items() if name.startswith("@")}
    if defs:
        rep.artifacts["definitions"] = defs
        for name, body in defs.items():
            rep.say(f"def {name} = {body}")
    rep.say(text)
    return EXIT_TRUE


def cmd_balance(args, rep: Report) -> int:
    sf = _load_session(args.file)
    at = _get(sf.types, args.type, "type")
    res = balanced(at, sf.env)
    rep.verdicts["balanced"] = res.balanced
    rep.artifacts["derivation"] = res.derivation
    if res.diagnostic:
        rep.diagnostic(res.diagnostic)
    rep.say(f"balanced: {str(res.balanced).lower()}")
    return EXIT_TRUE if res.balanced else EXIT_FALSE


def cmd_bounded(args, rep: Report) -> int:
    sf = _load_session(args.file)
    at = _get(sf.types, args.type, "type")
    ok, offending = bounded(at.gtype, sf.env)
    rep.verdicts["bounded"] = ok
    rep.artifacts["offending"] = [
        {"participant": p, "subterm": str(node)} for node, p in offending
    ]
    rep.say(f"bounded: {str(ok).lower()}")
    for node, p in offending:
        rep.say(f"  unbounded: participant {p}")
    return EXIT_TRUE if ok else EXIT_FALSE


def cmd_sim(args, rep: Report) -> int:
    sf = _load_session(args.file)
    kind, subject = _resolve_subject(sf, args)
    env = sf.env
    if args.trace is not None:
        tau = parse_trace(args.trace)
        if kind == "net":
            final = net_run(subject, tau, env)
            rep.artifacts["final"] = print_network(final)
            rep.say(print_network(final))
        else:
            final = type_run(subject, tau, env)
            from .textfmt import print_async_type

            rep.artifacts["final"] = print_async_type(final)
            rep.say(print_async_type(final))
        rep.verdicts["ran"] = True
        return EXIT_TRUE
    k = args.enumerate if args.enumerate is not None else (args.depth or 8)
    enabled = net_enabled if kind == "net" else type_enabled
    step = net_step if kind == "net" else type_step
    seen = set()
    traces = []

    def explore(state, tau):
        if len(tau) >= k:
            return
        for b in enabled(state, env):
            tau2 = tau + (b,)
            traces.append(tau2)
            key = (print_trace(tau2),)
            if key not in seen:
                seen.add(key)
                explore(step(state, b, env), tau2)

    explore(subject, ())
    rep.verdicts["ran"] = True
    rep.artifacts["traces"] = [print_trace(t) for t in traces]
    rep.say(f"traces of length <= {k}: {len(traces)}")
    for t in traces:
        rep.say("  " + print_trace(t))
    return EXIT_TRUE


def cmd_events(args, rep: Report) -> int:
    sf = _load_session(args.file)
    kind, subject = _resolve_subject(sf, args)
    k = args.depth if args.depth is not None else 8
    es = (
        fes_of_network(subject, sf.env, k)
        if kind == "net"
        else pes_of_type(subject, sf.env, k)
    )
    rows = rpt.event_table(es)
    header = ["event", "communication", "causes", "conflicts"]
    rep.artifacts["events"] = [dict(zip(header, row)) for row in rows]
    rep.artifacts["flow_count"] = len(es.flow_pairs())
    rep.say(f"events: {len(es.events)}")
    rep.say(rpt.tsv(rows, header))
    if args.dot:
        Path(args.dot).write_text(rpt.to_dot(es), encoding="utf-8")
        rep.say(f"dot written to {args.dot}")
        rep.artifacts["dot"] = args.dot
    if args.fig:
        rpt.render_event_structure(es, args.fig, title=f"{kind} events (depth {k})")
        rep.say(f"figure written to {args.fig}")
        rep.artifacts["figure"] = args.fig
    return EXIT_TRUE


def cmd_domain(args, rep: Report) -> int:
    sf = _load_session(args.file)
    kind, subject = _resolve_subject(sf, args)
    k = args.depth if args.depth is not None else 8
    es = (
        fes_of_network(subject, sf.env, k)
        if kind == "net"
        else pes_of_type(subject, sf.env, k)
    )
    dom = enumerate_configurations(es)
    rows = rpt.configuration_table(dom)
    rep.artifacts["configurations"] = [row[1] for row in rows]
    rep.verdicts["configuration_count"] = dom.nonempty_count()
    rep.say(f"configurations: {dom.nonempty_count()}")
    rep.say(rpt.tsv(rows, ["size", "configuration"]))
    if args.fig:
        rpt.render_domain(dom, args.fig, title=f"{kind} configuration domain (depth {k})")
        rep.say(f"figure written to {args.fig}")
        rep.artifacts["figure"] = args.fig
    return EXIT_TRUE


def cmd_iso(args, rep: Report) -> int:
    sf = _load_session(args.file)
    net = _get(sf.networks, args.net, "network")
    at = _get(sf.types, args.type, "type")
    k = _auto_depth(args, net, at, sf.env)
    res = domain_iso(net, at, sf.env, k)
    rep.verdicts["isomorphic"] = res.isomorphic
    rep.verdicts["configurations"] = res.config_count
    rep.artifacts["depth"] = k
    if res.margin_note:
        rep.artifacts["margin"] = res.margin_note
    if res.failure:
        rep.artifacts["failure"] = res.failure
    rep.artifacts["bijection"] = [
        {
            "network": "{" + ", ".join(sorted(map(str, x))) + "}",
            "type": "{" + ", ".join(sorted(map(str, y))) + "}",
        }
        for x, y in res.table
    ]
    rep.say(f"isomorphic: {str(res.isomorphic).lower()}, configurations: {res.config_count}")
    if res.margin_note:
        rep.say(f"note: {res.margin_note}")
    if res.failure:
        rep.say(f"failure: {res.failure}")
    for x, y in res.table:
        rep.say(
            "  {"
            + ", ".join(sorted(map(str, x)))
            + "}  <->  {"
            + ", ".join(sorted(map(str, y)))
            + "}"
        )
    if args.fig:
        fes = fes_of_network(net, sf.env, k)
        rpt.render_domain(
            enumerate_configurations(fes), args.fig, title=f"network domain (depth {k})"
        )
        rep.say(f"figure written to {args.fig}")
        rep.artifacts["figure"] = args.fig
    return EXIT_TRUE if res.isomorphic else EXIT_FALSE


def cmd_progress(args, rep: Report) -> int:
    sf = _load_session(args.file)
    net = _get(sf.networks, args.net, "network")
    at = _get(sf.types, args.type, "type")
    target_text = args.target
    if target_text.startswith("<"):
        from .textfmt import parse_queue

        msgs = parse_queue(target_text)
        if len(msgs) != 1:
            raise ParseError("message target must be a single <p l q>")
        target = msgs[0]
        goal_desc = str(target)
    else:
        target = target_text
        goal_desc = target_text
    tau = progress_witness(net, at, target, sf.env)
    rep.verdicts["witness_found"] = True
    rep.artifacts["trace"] = print_trace(tau)
    rep.artifacts["length"] = len(tau)
    if isinstance(target, Msg):
        bound = idepth(at.gtype, tau[-1], sf.env)
    else:
        bound = depth(at.gtype, target, sf.env)
    rep.artifacts["bound"] = bound if bound != float("inf") else "infinite"
    rep.say(f"progress witness for {goal_desc}: {print_trace(tau)} (length {len(tau)}, bound {bound})")
    return EXIT_TRUE


# --------------------------------------------------------------------------- #
# entry point
# --------------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sessev",
        description="Analyses for asynchronous multiparty sessions: typing, "
        "transition systems, event structures, configuration domains.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, net=False, typ=False, either=False, depth=True):
        p.add_argument("file", help=".sess session file")
        if net:
            p.add_argument("--net", required=False, help="network name")
        if typ:
            p.add_argument("--type", required=False, help="type name")
        if either:
            p.add_argument("--net", required=False, help="network name")
            p.add_argument("--type", required=False, help="type name")
        if depth:
            p.add_argument("--depth", type=int, default=None, help="truncation depth k")
        p.add_argument(
            "--format", choices=("text", "json"), default="text", help="output format"
        )
        p.add_argument("--seed", type=int, default=0, help="seed for randomized commands")

    p = sub.add_parser("check", help="typecheck a network against a type, or verify a file's expectations")
    common(p, net=True, typ=True)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("project", help="project a global type onto a participant")
    common(p, typ=True)
    p.add_argument("--participant", required=True)
    p.set_defaults(fn=cmd_project)

    p = sub.add_parser("balance", help="decide the balancing predicate")
    common(p, typ=True)
    p.set_defaults(fn=cmd_balance)

    p = sub.add_parser("bounded", help="decide boundedness of a global type")
    common(p, typ=True)
    p.set_defaults(fn=cmd_bounded)

    p = sub.add_parser("sim", help="run a trace or enumerate transitions")
    common(p, either=True)
    p.add_argument("--trace", help="dotted trace, e.g. 'p->q!l . p->q?l'")
    p.add_argument("--enumerate", type=int, help="enumerate traces up to this length")
    p.set_defaults(fn=cmd_sim)

    p = sub.add_parser("events", help="build the event structure and export it")
    common(p, either=True)
    p.add_argument("--dot", help="write DOT to this file")
    p.add_argument("--fig", help="render a figure to this file")
    p.set_defaults(fn=cmd_events)

    p = sub.add_parser("domain", help="enumerate the configuration domain")
    common(p, either=True)
    p.add_argument("--fig", help="render the domain Hasse diagram to this file")
    p.set_defaults(fn=cmd_domain)

    p = sub.add_parser("iso", help="check the configuration-domain isomorphism")
    common(p, net=True, typ=True)
    p.add_argument("--fig", help="render the network domain to this file")
    p.set_defaults(fn=cmd_iso)

    p = sub.add_parser("progress", help="produce a progress witness")
    common(p, net=True, typ=True)
    p.add_argument("--target", required=True, help="participant name or message '<p l q>'")
    p.set_defaults(fn=cmd_progress)

    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    rep = Report(args.command, {k: v for k, v in vars(args).items() if k not in ("fn", "command")}, args.format)
    try:
        code = args.fn(args, rep)
    except (ParseError, FileNotFoundError, PreconditionError, NotEnabled) as e:
        rep.diagnostics.append({"message": str(e), "code": "input-error"})
        rep.verdicts["error"] = str(e)
        rep.emit()
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except CapExceeded as e:
        rep.diagnostics.append({"message": str(e), "code": "cap-exceeded"})
        rep.emit()
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAP
    except SessError as e:
        rep.diagnostics.append({"message": str(e), "code": "internal"})
        rep.emit()
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    rep.emit()
    return code


if __name__ == "__main__":
    sys.exit(main())
