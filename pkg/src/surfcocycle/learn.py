"""Deterministic automaton synthesis from labelled Cayley-ball tries.

The canonical-word language is prefix closed, so ball elements are exactly
the trie nodes of the language restricted to the ball radius.  Given a
boolean label per element, partition refinement folds the trie into a DFA:
two nodes stay merged while no definite evidence separates them.  Evidence
is definite everywhere except for the class a beyond-horizon child falls
in: boundary nodes whose one-letter extension is canonical but outside the
ball are compatible with every live class and are assigned, after definite
splits, alongside the smallest class id.

The result is exact on the ball by construction; its claim beyond the ball
is backed by the stabilization flag (agreement of the machines learned at
the two largest radii), never by proof.
"""

from __future__ import annotations

from collections import deque

from . import fsa
from .group import CayleyBall

DEAD = -1
UNKNOWN = -2


def _children(ball: CayleyBall, radius: int):
    """Per-node child array: element id, DEAD, or UNKNOWN beyond the horizon."""
    group = ball.group
    ker = group.kernel
    nl = 4 * ball.genus
    ids = ball.elements_within(radius)
    child = {}
    for gid in ids:
        w = ball.words[gid]
        row = []
        if ball.dist[gid] < radius:
            for x in range(nl):
                h = ball.step(gid, x)
                if h is not None and ball.dist[h] == ball.dist[gid] + 1:
                    row.append(h)
                else:
                    row.append(DEAD)
        else:
            for x in range(nl):
                ext = w + bytes([x])
                if ker.canonicalize(ext) == ext:
                    row.append(UNKNOWN)
                else:
                    row.append(DEAD)
        child[gid] = row
    return ids, child


def learn_dfa(ball: CayleyBall, labels, radius=None) -> fsa.Dfa:
    """Fold the labelled ball trie into a DFA over the letter alphabet.

    ``labels[gid]`` is the accept bit of each element.  Transitions that no
    interior node witnesses would leave the machine underdetermined; with
    balls of radius >= 2 and total labels this does not occur, and it raises
    if it ever does.
    """
    r = ball.radius if radius is None else radius
    ids, child = _children(ball, r)
    nl = 4 * ball.genus
    cls = {gid: (1 if labels[gid] else 0) for gid in ids}
    changed = True
    while changed:
        changed = False
        for x in range(nl):
            groups: dict[int, list[int]] = {}
            for gid in ids:
                groups.setdefault(cls[gid], []).append(gid)
            fresh = max(groups) + 1
            for _, members in sorted(groups.items()):
                # definite targets under letter x: DEAD or a live class
                parts: dict[int, list[int]] = {}
                unknowns = []
                for gid in members:
                    c = child[gid][x]
                    if c == UNKNOWN:
                        unknowns.append(gid)
                    elif c == DEAD:
                        parts.setdefault(DEAD, []).append(gid)
                    else:
                        parts.setdefault(cls[c], []).append(gid)
                live_parts = sorted(k for k in parts if k != DEAD)
                if unknowns:
                    # a canonical extension exists, so the child is live
                    if live_parts:
                        parts[live_parts[0]].extend(unknowns)
                    else:
                        parts.setdefault(UNKNOWN, []).extend(unknowns)
                if len(parts) <= 1:
                    continue
                changed = True
                for key in sorted(parts)[1:]:
                    for gid in parts[key]:
                        cls[gid] = fresh
                    fresh += 1

    # transitions: any definite witness per (class, letter); UNKNOWN-only
    # transitions are underdetermined
    root = cls[0]
    delta_map: dict[tuple[int, int], int] = {}
    accept_classes = set()
    for gid in ids:
        if labels[gid]:
            accept_classes.add(cls[gid])
        for x in range(nl):
            c = child[gid][x]
            if c == DEAD:
                tgt = DEAD
            elif c == UNKNOWN:
                continue
            else:
                tgt = cls[c]
            prev = delta_map.get((cls[gid], x))
            if prev is not None and prev != tgt:
                raise fsa.FsaError("refinement fixpoint is inconsistent")
            delta_map[(cls[gid], x)] = tgt
    order = sorted(set(cls.values()))
    remap = {c: i for i, c in enumerate(order)}
    dead_id = len(order)
    delta = []
    for c in order:
        row = []
        for x in range(nl):
            tgt = delta_map.get((c, x))
            if tgt is None:
                raise fsa.FsaError(
                    "transition (%d, %d) has no interior witness; ball too small" % (c, x)
                )
            row.append(dead_id if tgt == DEAD else remap[tgt])
        delta.append(row)
    delta.append([dead_id] * nl)
    names = ball.group.alphabet.names
    accepts = {remap[c] for c in accept_classes}
    return fsa.minimize(fsa.Dfa(names, delta, remap[root], accepts))


def learn_with_stability(ball: CayleyBall, labels) -> tuple[fsa.Dfa, bool]:
    """Learned DFA at the full radius plus agreement with one radius less."""
    full = learn_dfa(ball, labels, ball.radius)
    if ball.radius < 2:
        return full, False
    smaller = learn_dfa(ball, labels, ball.radius - 1)
    return full, smaller == full
