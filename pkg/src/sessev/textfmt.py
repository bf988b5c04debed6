"""Concrete syntax: parser and printer for processes, global types, queues,
networks, communications, and ``.sess`` session files.

Grammar summary (ASCII rendering of the calculus notation):

* identifiers ``[A-Za-z][A-Za-z0-9_]*``; ``#`` starts a line comment
* process actions ``q!l`` / ``q?l``; sequencing ``;``; internal choice
  ``(+)``; external choice ``+``; inaction ``0`` (trailing ``;0`` optional)
* global output ``p->q!l``; global input ``p->q?l``; global choice ``[+]``;
  terminated type ``End`` (trailing ``;End`` optional)
* queues ``<p l q> . <q l p>`` or ``empty``
* networks ``p :: P | q :: Q |- QUEUE``
* session files: ``def N = term``, ``net N = network``,
  ``type N = global |- queue``, ``expect N [not] balanced|bounded`` and
  ``expect N [not] typable-by T``, one statement per block.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ParseError
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
    GRef,
    In,
    Msg,
    Network,
    Out,
    PRef,
    Proc,
    Queue,
    Stop,
    gout,
    inp,
    out,
)

KEYWORDS = {"def", "net", "type", "expect", "empty", "End", "not"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<ichoice>\(\+\))
  | (?P<gchoice>\[\+\])
  | (?P<arrow>->)
  | (?P<turnstile>\|-)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<sym>[;()+!?<>.|:=0-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, filename: str = "<input>") -> list[Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", filename, line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            if kind == "sym" and chunk == ":":
                # '::' is the only use of ':'
                if text[pos : pos + 2] == "::":
                    tokens.append(Token("coloncolon", "::", line, col))
                    chunk = "::"
                else:
                    raise ParseError("expected '::'", filename, line, col)
            else:
                tokens.append(Token(kind, chunk, line, col))
        nl = chunk.count("\n")
        if nl:
            line += nl
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos += len(chunk)
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token], filename: str):
        self.tokens = tokens
        self.pos = 0
        self.filename = filename

    # -- token plumbing ---------------------------------------------------- #

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(msg, self.filename, tok.line, tok.col)

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            raise self.error(f"expected {want!r}, found {t.text!r}")
        return self.next()

    def at_sym(self, text: str) -> bool:
        t = self.peek()
        return t.kind == "sym" and t.text == text

    def ident(self, what: str = "identifier") -> str:
        t = self.peek()
        if t.kind != "ident":
            raise self.error(f"expected {what}, found {t.text!r}")
        if t.text in KEYWORDS:
            raise self.error(f"keyword {t.text!r} cannot be used as {what}")
        return self.next().text

    # -- process terms ------------------------------------------------------ #
    #
    # Parsing goes through a small sequence/choice AST which is then shaped
    # into the branch-structured kernel terms, validating the side conditions
    # (one peer per choice, distinct labels, choices only in tail position).

    def parse_proc(self) -> Proc:
        branches = [self._proc_seq()]
        op = None
        while self.at_sym("+") or self.peek().kind == "ichoice":
            tok = self.next()
            this = "(+)" if tok.kind == "ichoice" else "+"
            if op is None:
                op = this
            elif op != this:
                raise self.error("cannot mix '(+)' and '+' without parentheses", tok)
            branches.append(self._proc_seq())
        if op is None:
            return branches[0]
        return self._merge_proc_choice(branches, op)

    def _proc_seq(self) -> Proc:
        tok = self.peek()
        # atom: action, 0, reference, or parenthesised choice
        if tok.kind == "sym" and tok.text == "(":
            self.next()
            term = self.parse_proc()
            self.expect("sym", ")")
            if self.at_sym(";"):
                raise self.error("a choice cannot be followed by ';' (continuations are per branch)")
            return term
        if tok.kind == "sym" and tok.text == "0":
            self.next()
            return Stop()
        if tok.kind == "ident" and self.peek(1).kind == "sym" and self.peek(1).text in "!?":
            peer = self.ident("participant")
            kind = self.next().text
            label = self.ident("label")
            if self.at_sym(";"):
                self.next()
                cont = self._proc_seq()
            else:
                cont = Stop()
            branch = ((label, cont),)
            return Out(peer, branch) if kind == OUT else In(peer, branch)
        if tok.kind == "ident":
            name = self.ident("process name")
            if self.at_sym(";"):
                raise self.error("a reference cannot be followed by ';'")
            return PRef(name)
        raise self.error(f"expected a process term, found {tok.text!r}")

    def _merge_proc_choice(self, branches: list[Proc], op: str) -> Proc:
        cls = Out if op == "(+)" else In
        peer = None
        merged: list[tuple] = []
        for b in branches:
            if not isinstance(b, cls):
                kind = "an output" if op == "(+)" else "an input"
                raise self.error(f"every branch of {op!r} must start with {kind} action")
            if peer is None:
                peer = b.peer
            elif b.peer != peer:
                raise self.error(f"branches of one choice must address one peer, got {peer!r} and {b.peer!r}")
            merged.extend(b.branches)
        labels = [l for l, _ in merged]
        if len(set(labels)) != len(labels):
            raise self.error(f"duplicate label in choice: {sorted(labels)}")
        return out(peer, merged) if op == "(+)" else inp(peer, merged)

    # -- global terms -------------------------------------------------------- #

    def parse_global(self) -> Global:
        branches = [self._global_seq()]
        while self.peek().kind == "gchoice":
            self.next()
            branches.append(self._global_seq())
        if len(branches) == 1:
            return branches[0]
        return self._merge_global_choice(branches)

    def _global_seq(self) -> Global:
        tok = self.peek()
        if tok.kind == "sym" and tok.text == "(":
            self.next()
            term = self.parse_global()
            self.expect("sym", ")")
            if self.at_sym(";"):
                raise self.error("a choice cannot be followed by ';' (continuations are per branch)")
            return term
        if tok.kind == "ident" and tok.text == "End":
            self.next()
            return GEnd()
        if tok.kind == "ident" and self.peek(1).kind == "arrow":
            sender = self.ident("participant")
            self.expect("arrow")
            receiver = self.ident("participant")
            t = self.peek()
            if not (t.kind == "sym" and t.text in "!?"):
                raise self.error("expected '!' or '?' after communication channel")
            kind = self.next().text
            label = self.ident("label")
            if self.at_sym(";"):
                self.next()
                cont = self._global_seq()
            else:
                cont = GEnd()
            if kind == OUT:
                return GOut(sender, receiver, ((label, cont),))
            return GIn(sender, receiver, label, cont)
        if tok.kind == "ident":
            name = self.ident("global type name")
            if self.at_sym(";"):
                raise self.error("a reference cannot be followed by ';'")
            return GRef(name)
        raise self.error(f"expected a global type, found {tok.text!r}")

    def _merge_global_choice(self, branches: list[Global]) -> Global:
        chan = None
        merged: list[tuple] = []
        for b in branches:
            if not isinstance(b, GOut):
                raise self.error("every branch of '[+]' must start with an output 'p->q!l'")
            if chan is None:
                chan = (b.sender, b.receiver)
            elif (b.sender, b.receiver) != chan:
                raise self.error("branches of one global choice must share sender and receiver")
            merged.extend(b.branches)
        labels = [l for l, _ in merged]
        if len(set(labels)) != len(labels):
            raise self.error(f"duplicate label in global choice: {sorted(labels)}")
        return gout(chan[0], chan[1], merged)

    # -- queues, networks, communications ------------------------------------ #

    def parse_queue(self) -> Queue:
        if self.peek().kind == "ident" and self.peek().text == "empty":
            self.next()
            return ()
        if self.peek().kind == "eof":
            return ()
        msgs = [self._message()]
        while self.at_sym("."):
            self.next()
            msgs.append(self._message())
        return tuple(msgs)

    def _message(self) -> Msg:
        self.expect("sym", "<")
        sender = self.ident("sender")
        label = self.ident("label")
        receiver = self.ident("receiver")
        self.expect("sym", ">")
        return Msg(sender, label, receiver)

    def parse_network(self) -> Network:
        procs: dict = {}
        while True:
            tok = self.peek()
            p = self.ident("participant")
            self.expect("coloncolon")
            term = self.parse_proc()
            if p in procs:
                raise self.error(f"duplicate participant {p!r} in network", tok)
            procs[p] = term
            if self.at_sym("|"):
                self.next()
                continue
            break
        self.expect("turnstile")
        queue = self.parse_queue()
        return Network.of(procs, queue)

    def parse_comm(self) -> Comm:
        sender = self.ident("participant")
        self.expect("arrow")
        receiver = self.ident("participant")
        t = self.peek()
        if not (t.kind == "sym" and t.text in "!?"):
            raise self.error("expected '!' or '?' in communication")
        kind = self.next().text
        label = self.ident("label")
        return Comm(kind, sender, receiver, label)

    def parse_trace(self) -> tuple:
        if self.peek().kind == "eof":
            return ()
        comms = [self.parse_comm()]
        while self.at_sym("."):
            self.next()
            comms.append(self.parse_comm())
        return tuple(comms)


def _parse_with(text: str, filename: str, method):
    p = _Parser(tokenize(text, filename), filename)
    result = method(p)
    tok = p.peek()
    if tok.kind != "eof":
        raise p.error(f"trailing input starting at {tok.text!r}")
    return result


def parse_process(text: str, env: DefEnv | None = None, filename: str = "<input>") -> Proc:
    term = _parse_with(text, filename, _Parser.parse_proc)
    if env is not None:
        _check_proc_refs(term, env, filename)
    return term


def parse_global(text: str, env: DefEnv | None = None, filename: str = "<input>") -> Global:
    term = _parse_with(text, filename, _Parser.parse_global)
    if env is not None:
        _check_global_refs(term, env, filename)
    return term


def parse_queue(text: str, filename: str = "<input>") -> Queue:
    return _parse_with(text, filename, _Parser.parse_queue)


def parse_network(text: str, env: DefEnv | None = None, filename: str = "<input>") -> Network:
    net = _parse_with(text, filename, _Parser.parse_network)
    if env is not None:
        for _, proc in net.procs:
            _check_proc_refs(proc, env, filename)
    return net


def parse_comm(text: str, filename: str = "<input>") -> Comm:
    return _parse_with(text, filename, _Parser.parse_comm)


def parse_trace(text: str, filename: str = "<input>") -> tuple:
    return _parse_with(text, filename, _Parser.parse_trace)


def _check_proc_refs(term: Proc, env: DefEnv, filename: str) -> None:
    from .kernel import _syntactic_subterms

    for t in _syntactic_subterms(term):
        if isinstance(t, PRef) and t.name not in env.procs:
            raise ParseError(f"dangling process reference {t.name!r}", filename)


def _check_global_refs(term: Global, env: DefEnv, filename: str) -> None:
    from .kernel import _syntactic_subterms

    for t in _syntactic_subterms(term):
        if isinstance(t, GRef) and t.name not in env.globals_:
            raise ParseError(f"dangling global reference {t.name!r}", filename)


# --------------------------------------------------------------------------- #
# Session files
# --------------------------------------------------------------------------- #


@dataclass
class Expectation:
    subject: str
    assertion: str  # "balanced" | "bounded" | "typable-by"
    argument: str | None
    value: bool
    line: int


@dataclass
class SessionFile:
    filename: str
    env: DefEnv = field(default_factory=DefEnv)
    networks: dict = field(default_factory=dict)  # name -> Network
    types: dict = field(default_factory=dict)  # name -> AsyncType
    expectations: list = field(default_factory=list)


_STMT_KEYWORDS = {"def", "net", "type", "expect"}


def parse_session(text: str, filename: str = "<session>") -> SessionFile:
    tokens = tokenize(text, filename)
    sf = SessionFile(filename)
    # split into statements: each starts with a statement keyword
    stmts: list[list[Token]] = []
    current: list[Token] = []
    for tok in tokens:
        if tok.kind == "ident" and tok.text in _STMT_KEYWORDS:
            if current:
                stmts.append(current)
            current = [tok]
        elif tok.kind == "eof":
            if current:
                stmts.append(current)
        else:
            if not current:
                raise ParseError(
                    f"expected 'def', 'net', 'type' or 'expect', found {tok.text!r}",
                    filename,
                    tok.line,
                    tok.col,
                )
            current.append(tok)

    deferred_defs = []  # (name, body tokens) for two-pass classification
    for stmt in stmts:
        head = stmt[0]
        body = stmt[1:] + [Token("eof", "", head.line, head.col)]
        p = _Parser(body, filename)
        if head.text == "def":
            name = p.ident("definition name")
            p.expect("sym", "=")
            deferred_defs.append((name, body[p.pos :], head))
        elif head.text == "net":
            name = p.ident("network name")
            p.expect("sym", "=")
            net = p.parse_network()
            _end_of(p)
            if name in sf.networks:
                raise ParseError(f"duplicate network {name!r}", filename, head.line, head.col)
            sf.networks[name] = net
        elif head.text == "type":
            name = p.ident("type name")
            p.expect("sym", "=")
            g = p.parse_global()
            p.expect("turnstile")
            queue = p.parse_queue()
            _end_of(p)
            if name in sf.types:
                raise ParseError(f"duplicate type {name!r}", filename, head.line, head.col)
            sf.types[name] = AsyncType(g, queue)
        elif head.text == "expect":
            sf.expectations.append(_parse_expectation(p, head))

    _install_defs(sf, deferred_defs)

    # resolution checks: every reference used anywhere must be defined
    sf.env.validate()
    for net in sf.networks.values():
        for _, proc in net.procs:
            _check_proc_refs(proc, sf.env, filename)
    for at in sf.types.values():
        _check_global_refs(at.gtype, sf.env, filename)
    for e in sf.expectations:
        known = set(sf.networks) | set(sf.types)
        if e.subject not in known:
            raise ParseError(f"expectation on unknown name {e.subject!r}", filename, e.line)
        if e.argument is not None and e.argument not in sf.types:
            raise ParseError(f"expectation references unknown type {e.argument!r}", filename, e.line)
    return sf


def _end_of(p: _Parser) -> None:
    tok = p.peek()
    if tok.kind != "eof":
        raise p.error(f"trailing input starting at {tok.text!r}")


def _parse_expectation(p: _Parser, head: Token) -> Expectation:
    subject = p.ident("subject name")
    value = True
    if p.peek().kind == "ident" and p.peek().text == "not":
        p.next()
        value = False
    tok = p.peek()
    if tok.kind == "ident" and tok.text in ("balanced", "bounded"):
        p.next()
        _end_of(p)
        return Expectation(subject, tok.text, None, value, head.line)
    if tok.kind == "ident" and tok.text == "typable":
        p.next()
        p.expect("sym", "-")
        by = p.ident("'by'")
        if by != "by":
            raise p.error("expected 'typable-by'")
        arg = p.ident("type name")
        _end_of(p)
        return Expectation(subject, "typable-by", arg, value, head.line)
    raise p.error("expected 'balanced', 'bounded' or 'typable-by'")


def _install_defs(sf: SessionFile, deferred: list) -> None:
    """Classify each ``def`` body as process or global and install it."""
    classified: dict[str, str] = {}
    bodies: dict[str, list[Token]] = {}
    pending: dict[str, str] = {}  # pure-reference bodies: name -> referent
    for name, body, head in deferred:
        if name in bodies:
            raise ParseError(f"duplicate definition {name!r}", sf.filename, head.line, head.col)
        bodies[name] = body
        kinds = {t.kind for t in body} | {t.text for t in body if t.kind == "sym"}
        idents = [t.text for t in body if t.kind == "ident"]
        if "arrow" in kinds or "gchoice" in kinds or "End" in idents:
            classified[name] = "global"
        elif "!" in kinds or "?" in kinds or "0" in kinds or "ichoice" in kinds or "+" in kinds:
            classified[name] = "proc"
        else:
            # a bare reference: classify by referent
            refs = [t.text for t in body if t.kind == "ident"]
            if len(refs) != 1:
                raise ParseError(f"cannot classify definition {name!r}", sf.filename, head.line)
            pending[name] = refs[0]
    for name, referent in pending.items():
        seen = {name}
        target = referent
        while target in pending:
            if target in seen:
                raise ParseError(f"unguarded reference cycle through {name!r}", sf.filename)
            seen.add(target)
            target = pending[target]
        if target in classified:
            classified[name] = classified[target]
        else:
            raise ParseError(f"definition {name!r} refers to unknown name {target!r}", sf.filename)
    for name, body in bodies.items():
        p = _Parser(body, sf.filename)
        if classified[name] == "global":
            term = p.parse_global()
            _end_of(p)
            sf.env.define_global(name, term)
        else:
            term = p.parse_proc()
            _end_of(p)
            sf.env.define_proc(name, term)


# --------------------------------------------------------------------------- #
# Printers
# --------------------------------------------------------------------------- #


def print_process(term: Proc) -> str:
    return _print_proc(term, top=True)


def _print_proc(term: Proc, top: bool) -> str:
    if isinstance(term, Stop):
        return "0"
    if isinstance(term, PRef):
        return term.name
    if isinstance(term, (Out, In)):
        op = " (+) " if isinstance(term, Out) else " + "
        kind = OUT if isinstance(term, Out) else IN
        parts = []
        for label, cont in term.branches:
            head = f"{term.peer}{kind}{label}"
            if isinstance(cont, Stop):
                parts.append(head)
            else:
                parts.append(f"{head} ; {_print_cont_proc(cont)}")
        body = op.join(parts)
        if len(parts) > 1 and not top:
            return f"({body})"
        return body
    raise TypeError(f"not a process term: {term!r}")


def _print_cont_proc(term: Proc) -> str:
    return _print_proc(term, top=False)


def print_global(term: Global) -> str:
    return _print_global(term, top=True)


def _print_global(term: Global, top: bool) -> str:
    if isinstance(term, GEnd):
        return "End"
    if isinstance(term, GRef):
        return term.name
    if isinstance(term, GIn):
        head = f"{term.sender}->{term.receiver}?{term.label}"
        if isinstance(term.cont, GEnd):
            return head
        return f"{head} ; {_print_global(term.cont, top=False)}"
    if isinstance(term, GOut):
        parts = []
        for label, cont in term.branches:
            head = f"{term.sender}->{term.receiver}!{label}"
            if isinstance(cont, GEnd):
                parts.append(head)
            else:
                parts.append(f"{head} ; {_print_global(cont, top=False)}")
        body = " [+] ".join(parts)
        if len(parts) > 1 and not top:
            return f"({body})"
        return body
    raise TypeError(f"not a global term: {term!r}")


def print_queue(queue: Queue) -> str:
    if not queue:
        return "empty"
    return " . ".join(str(m) for m in queue)


def print_network(net: Network) -> str:
    parts = [f"{p} :: {print_process(proc)}" for p, proc in net.procs]
    return " | ".join(parts) + " |- " + print_queue(net.queue)


def print_async_type(at: AsyncType) -> str:
    return f"{print_global(at.gtype)} |- {print_queue(at.queue)}"


def print_trace(tau: tuple) -> str:
    return " . ".join(str(b) for b in tau) if tau else ""


def print_session(sf: SessionFile) -> str:
    lines = []
    for name, body in sf.env.procs.items():
        lines.append(f"def {name} = {print_process(body)}")
    for name, body in sf.env.globals_.items():
        lines.append(f"def {name} = {print_global(body)}")
    for name, net in sf.networks.items():
        lines.append(f"net {name} = {print_network(net)}")
    for name, at in sf.types.items():
        lines.append(f"type {name} = {print_async_type(at)}")
    for e in sf.expectations:
        neg = "" if e.value else "not "
        arg = f" {e.argument}" if e.argument else ""
        lines.append(f"expect {e.subject} {neg}{e.assertion}{arg}")
    return "\n".join(lines) + "\n"
