"""Rendering of analysis artifacts: delimited event/configuration tables,
DOT export, and matplotlib figures written next to them.
"""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .events import FlowES, NEvent, nevent_io, tevent_io


def event_label(e) -> str:
    return str(nevent_io(e)) if isinstance(e, NEvent) else str(tevent_io(e))


def event_table(es) -> list[list[str]]:
    """Rows: event name, its communication, direct causes, direct conflicts."""
    rows = []
    flow = es.flow_pairs()
    for e in es.events:
        causes = sorted(str(a) for (a, b) in flow if b == e)
        conflicts = sorted(str(b) for (a, b) in es.conflict if a == e)
        rows.append([str(e), event_label(e), " ".join(causes), " ".join(conflicts)])
    return rows


def configuration_table(dom) -> list[list[str]]:
    rows = []
    for c in sorted(dom.configurations, key=lambda c: (len(c), sorted(map(str, c)))):
        rows.append([str(len(c)), "{" + ", ".join(sorted(map(str, c))) + "}"])
    return rows


def tsv(rows: list[list[str]], header: list[str]) -> str:
    lines = ["\t".join(header)]
    lines.extend("\t".join(row) for row in rows)
    return "\n".join(lines)


def to_dot(es, name: str = "events") -> str:
    """DOT rendering: one node per event labeled with its communication,
    solid edges for flow/causality, dashed edges for conflict."""
    lines = [f"digraph {name} {{", "  rankdir=TB;", "  node [shape=box];"]
    ids = {e: f"e{i}" for i, e in enumerate(es.events)}
    for e in es.events:
        lines.append(f'  {ids[e]} [label="{event_label(e)}\\n{e}"];')
    for (a, b) in sorted(es.flow_pairs(), key=lambda p: (str(p[0]), str(p[1]))):
        lines.append(f"  {ids[a]} -> {ids[b]};")
    seen = set()
    for (a, b) in sorted(es.conflict, key=lambda p: (str(p[0]), str(p[1]))):
        if (b, a) in seen:
            continue
        seen.add((a, b))
        lines.append(f"  {ids[a]} -> {ids[b]} [style=dashed, dir=none, color=red];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _event_layers(es) -> dict:
    """Column per locality (network events) or single column group (type
    events); row by causal depth."""
    flow = es.flow_pairs()
    depth: dict = {}

    def depth_of(e, seen=()):
        if e in depth:
            return depth[e]
        preds = [a for (a, b) in flow if b == e and a not in seen]
        d = 0 if not preds else 1 + max(depth_of(a, seen + (e,)) for a in preds)
        depth[e] = d
        return d

    for e in es.events:
        depth_of(e)
    return depth


def render_event_structure(es, path: str, title: str = "") -> None:
    """Draw the event structure: events as nodes laid out by locality and
    causal depth; solid arrows for flow, dashed red lines for conflict."""
    events = list(es.events)
    if not events:
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.text(0.5, 0.5, "no events", ha="center", va="center")
        ax.set_axis_off()
        fig.suptitle(title)
        fig.savefig(path, bbox_inches="tight")
        plt.close(fig)
        return
    depth = _event_layers(es)
    if isinstance(es, FlowES) or all(isinstance(e, NEvent) for e in events):
        group = lambda e: e.loc
    else:
        group = lambda e: ""
    columns = sorted({group(e) for e in events})
    pos = {}
    col_members = defaultdict(list)
    for e in events:
        col_members[group(e)].append(e)
    for ci, col in enumerate(columns):
        members = sorted(col_members[col], key=lambda e: (depth[e], str(e)))
        lanes = defaultdict(int)
        for e in members:
            lane = lanes[depth[e]]
            lanes[depth[e]] += 1
            pos[e] = (ci * 3.0 + lane * 0.9, -depth[e] * 1.6)
    fig, ax = plt.subplots(figsize=(3 + 2.4 * len(columns), 2 + 1.2 * (1 + max(depth.values()))))
    for (a, b) in es.flow_pairs():
        xa, ya = pos[a]
        xb, yb = pos[b]
        ax.annotate(
            "",
            xy=(xb, yb + 0.18),
            xytext=(xa, ya - 0.18),
            arrowprops=dict(arrowstyle="-|>", color="#333333", lw=1.0),
        )
    drawn = set()
    for (a, b) in es.conflict:
        if (b, a) in drawn:
            continue
        drawn.add((a, b))
        xa, ya = pos[a]
        xb, yb = pos[b]
        ax.plot([xa, xb], [ya, yb], linestyle="--", color="crimson", lw=0.9, zorder=0)
    for e in events:
        x, y = pos[e]
        ax.annotate(
            f"{event_label(e)}\n{e}",
            xy=(x, y),
            ha="center",
            va="center",
            fontsize=7,
            bbox=dict(boxstyle="round,pad=0.3", fc="#f0f4ff", ec="#4466aa"),
        )
    ax.set_axis_off()
    ax.margins(0.15)
    if title:
        fig.suptitle(title)
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)


def render_domain(dom, path: str, title: str = "") -> None:
    """Hasse diagram of the configuration domain, layered by size."""
    configs = sorted(dom.configurations, key=lambda c: (len(c), sorted(map(str, c))))
    index = {c: i for i, c in enumerate(configs)}
    by_size = defaultdict(list)
    for c in configs:
        by_size[len(c)].append(c)
    pos = {}
    for size, members in by_size.items():
        for i, c in enumerate(members):
            pos[index[c]] = (i * 1.8 - 0.9 * (len(members) - 1), size * 1.4)
    fig, ax = plt.subplots(
        figsize=(2 + 1.1 * max(len(m) for m in by_size.values()), 2 + 1.0 * len(by_size))
    )
    for (x, y) in dom.covers():
        xa, ya = pos[index[x]]
        xb, yb = pos[index[y]]
        ax.plot([xa, xb], [ya, yb], color="#555555", lw=0.8, zorder=0)
    for c in configs:
        x, y = pos[index[c]]
        label = "{}" if not c else "{" + ",".join(sorted(event_label(e) for e in c)) + "}"
        ax.annotate(
            label,
            xy=(x, y),
            ha="center",
            va="center",
            fontsize=6,
            bbox=dict(boxstyle="round,pad=0.25", fc="#f7fff0", ec="#558844"),
        )
    ax.set_axis_off()
    ax.margins(0.1)
    if title:
        fig.suptitle(title)
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
