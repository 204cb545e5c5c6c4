"""Symmetric generator alphabets for closed surface groups, and the word kernel.

Letters of the genus-g alphabet are byte values 0 .. 4g-1 in the fixed order

    a1 < a1^-1 < b1 < b1^-1 < a2 < ... < bg^-1

so the formal inverse of letter ``l`` is ``l ^ 1`` and bytewise comparison of
equal-length words is the letter order used everywhere for shortlex normal
forms.  Words are ``bytes``.  The printable form is space separated with
uppercase denoting inverses: ``"a1 B1 a2"`` is a_1 b_1^-1 a_2.

This module also builds the combinatorial data shared by the word kernel and
the geometry layer: the cyclic order of the 4g edge directions around a
vertex of the right-angled-free (pi/2g corners) 4g-gon tessellation, and the
integer turn table derived from it.
"""

from __future__ import annotations

import os
from functools import lru_cache


class AlphabetError(ValueError):
    pass


def _check_genus(genus: int) -> None:
    if not isinstance(genus, int) or genus < 2:
        raise AlphabetError("genus must be an integer >= 2, got %r" % (genus,))


@lru_cache(maxsize=None)
def letter_names(genus: int) -> tuple[str, ...]:
    _check_genus(genus)
    names = []
    for i in range(genus):
        names += ["a%d" % (i + 1), "A%d" % (i + 1), "b%d" % (i + 1), "B%d" % (i + 1)]
    return tuple(names)


def inv_letter(letter: int) -> int:
    return letter ^ 1


def inv_word(word: bytes) -> bytes:
    return bytes(l ^ 1 for l in reversed(word))


def parse_word(text: str, genus: int) -> bytes:
    """Parse ``"a1 B1 a2"`` into letter bytes; ``""`` and ``"1"`` are the identity."""
    names = letter_names(genus)
    lookup = {name: i for i, name in enumerate(names)}
    text = text.strip()
    if text in ("", "1"):
        return b""
    out = []
    for tok in text.split():
        if tok not in lookup:
            raise AlphabetError("unknown letter %r for genus %d" % (tok, genus))
        out.append(lookup[tok])
    return bytes(out)


def format_word(word: bytes, genus: int) -> str:
    names = letter_names(genus)
    return " ".join(names[l] for l in word)


@lru_cache(maxsize=None)
def relator(genus: int) -> bytes:
    """The surface relator, the product of the g commutators [a_i, b_i]."""
    _check_genus(genus)
    out = []
    for i in range(genus):
        a, b = 4 * i, 4 * i + 2
        out += [a, b, a ^ 1, b ^ 1]
    return bytes(out)


class LinkError(RuntimeError):
    """The corner pairing of the fundamental polygon failed to close up."""


@lru_cache(maxsize=None)
def link_cycle(genus: int) -> tuple[int, ...]:
    """Cyclic order of the 4g out-edge labels around a tessellation vertex.

    Corners of the fundamental polygon at a vertex correspond to consecutive
    letter pairs (z, y) of the cyclic relator; the corner joins the undirected
    edges carried by the out-edges z^-1 and y.  The orientation is fixed so
    that traversing the relator turns by +(2g-1) units at every corner, which
    makes the positively oriented polygon boundary counterclockwise.
    """
    r = relator(genus)
    n = len(r)
    nbrs: dict[int, list[int]] = {l: [] for l in range(n)}
    for i in range(n):
        z, y = r[i], r[(i + 1) % n]
        p, q = z ^ 1, y
        nbrs[p].append(q)
        nbrs[q].append(p)
    for l, ns in nbrs.items():
        if len(ns) != 2:
            raise LinkError("letter %d lies on %d corners, expected 2" % (l, len(ns)))
    cycle = [0]
    prev = None
    while True:
        a, b = nbrs[cycle[-1]]
        nxt = b if a == prev else a
        if nxt == 0:
            break
        prev = cycle[-1]
        cycle.append(nxt)
        if len(cycle) > n:
            raise LinkError("link is not a single cycle")
    if len(cycle) != n:
        raise LinkError("link cycle has length %d, expected %d" % (len(cycle), n))

    def turn(pos, z, y):
        v = (pos[y] - pos[z ^ 1] - 2 * genus) % (4 * genus)
        return v - 4 * genus if v > 2 * genus else v

    pos = {l: i for i, l in enumerate(cycle)}
    if turn(pos, r[0], r[1]) == -(2 * genus - 1):
        cycle = [cycle[0]] + cycle[:0:-1]
        pos = {l: i for i, l in enumerate(cycle)}
    for i in range(n):
        t = turn(pos, r[i], r[(i + 1) % n])
        if t != 2 * genus - 1:
            raise LinkError("relator corner %d turns by %d, expected %d" % (i, t, 2 * genus - 1))
    return tuple(cycle)


@lru_cache(maxsize=None)
def turn_table(genus: int) -> tuple[int, ...]:
    """Flat 4g x 4g table: entry [z*4g + y] is the integer turn multiple of
    pi/2g when a path enters a vertex along letter z and leaves along y.

    Values lie in (-2g, 2g]; the value 2g (angle pi) occurs exactly for
    backtracks y = z^-1.
    """
    n = 4 * genus
    pos = {l: i for i, l in enumerate(link_cycle(genus))}
    table = []
    for z in range(n):
        for y in range(n):
            v = (pos[y] - pos[z ^ 1] - 2 * genus) % n
            table.append(v - n if v > 2 * genus else v)
    return tuple(table)


class Alphabet:
    """Letter table for one genus; parsing, formatting and inversion."""

    def __init__(self, genus: int):
        _check_genus(genus)
        self.genus = genus
        self.size = 4 * genus
        self.names = letter_names(genus)
        self.index = {name: i for i, name in enumerate(self.names)}

    def parse(self, text: str) -> bytes:
        return parse_word(text, self.genus)

    def format(self, word: bytes) -> str:
        return format_word(word, self.genus)

    def __repr__(self):
        return "Alphabet(genus=%d)" % self.genus


def _load_compiled():
    if os.environ.get("SURFCOCYCLE_PURE"):
        return None
    try:
        from . import _wordcore_c
    except ImportError:
        return None
    return _wordcore_c


@lru_cache(maxsize=None)
def get_kernel(genus: int):
    """Word kernel for one genus: compiled if available, else pure Python.

    Both implementations expose the same API; see ``_wordcore.PureKernel``.
    """
    _check_genus(genus)
    compiled = _load_compiled()
    table = turn_table(genus)
    if compiled is not None:
        return compiled.Kernel(genus, relator(genus), table)
    from ._wordcore import PureKernel

    return PureKernel(genus, relator(genus), table)


def kernel_implementation() -> str:
    """Which kernel a fresh genus-2 build would use ("compiled" or "pure")."""
    return get_kernel(2).implementation
