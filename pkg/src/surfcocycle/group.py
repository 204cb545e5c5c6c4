"""Surface group words, Dehn's algorithm, Cayley balls, and word differences.

The genus-g surface group is presented on the 4g symmetric generators with
the single commutator-product relator.  Dehn reduction solves the word
problem (the presentation is small cancellation with single-letter pieces),
geodesic representatives of an element differ by exact-half relator swaps,
and the canonical form of a word is its shortlex-least geodesic
representative.  Cayley balls are built breadth-first with canonical words
as element identities, and are the ground truth every synthesized automaton
is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fsa
from .words import Alphabet, format_word, get_kernel, inv_word, parse_word, relator


class BallError(RuntimeError):
    pass


class OutsideBallError(LookupError):
    """An element fell outside the radius covered by the ball."""


class ResourceLimitError(RuntimeError):
    """A requested ball would exceed the configured element budget."""


class SurfaceGroup:
    """Word arithmetic in the genus-g closed orientable surface group."""

    def __init__(self, genus: int):
        self.genus = genus
        self.alphabet = Alphabet(genus)
        self.kernel = get_kernel(genus)
        self.relator = relator(genus)

    # words in and out
    def parse(self, text: str) -> bytes:
        return parse_word(text, self.genus)

    def format(self, word: bytes) -> str:
        return format_word(word, self.genus)

    def free_reduce(self, word: bytes) -> bytes:
        return self.kernel.free_reduce(word)

    def dehn_reduce(self, word: bytes) -> bytes:
        return self.kernel.dehn_reduce(word)

    def dehn_reduce_traced(self, word: bytes):
        return self.kernel.dehn_reduce_traced(word)

    def canon(self, word: bytes) -> bytes:
        return self.kernel.canonicalize(word)

    def geodesic_words(self, word: bytes) -> list[bytes]:
        return self.kernel.geodesic_reps(word)

    def mul(self, u: bytes, v: bytes) -> bytes:
        return self.kernel.canonicalize(u + v)

    def inv(self, u: bytes) -> bytes:
        return self.kernel.canonicalize(inv_word(u))

    def is_trivial(self, word: bytes) -> bool:
        return self.kernel.is_trivial(word)

    def equal(self, u: bytes, v: bytes) -> bool:
        return self.kernel.is_trivial(u + inv_word(v))

    def distance(self, u: bytes, v: bytes) -> int:
        return len(self.mul(self.inv(u), v))

    def conjugate_relators(self):
        """All cyclic conjugates of the relator and its inverse, with signs."""
        return self.kernel.conjugates

    def abelianized(self, word: bytes):
        vec = [0] * (2 * self.genus)
        for l in word:
            vec[l >> 1] += -1 if l & 1 else 1
        return tuple(vec)

    def __repr__(self):
        return "SurfaceGroup(genus=%d)" % self.genus


class CayleyBall:
    """All group elements within a radius, as canonical shortlex-geodesic words.

    ``words[i]`` is the canonical word of element i, ``index`` inverts it,
    ``dist[i]`` the graph distance from the identity, and ``adj[i, l]`` the
    element reached by right multiplication with letter l (-1 outside the
    ball).  Immutable after construction.
    """

    def __init__(self, group, radius, words, index, dist, adj, stats):
        self.group = group
        self.genus = group.genus
        self.radius = radius
        self.words = words
        self.index = index
        self.dist = dist
        self.adj = adj
        self.adj.setflags(write=False)
        self.stats = stats

    # -- construction --------------------------------------------------------

    @classmethod
    def build(cls, group: SurfaceGroup, radius: int, method="fast", max_elements=3_000_000):
        if radius < 0:
            raise ValueError("radius must be >= 0")
        nl = 4 * group.genus
        est = sum((nl) * (nl - 1) ** max(0, r - 1) for r in range(1, radius + 1)) + 1
        if est > max_elements and radius > 1:
            # the free-group count is an upper bound; refuse early if even the
            # identified count must exceed the budget (it is at least half)
            if est // 2 > max_elements:
                raise ResourceLimitError(
                    "ball of radius %d may hold up to %d elements (budget %d)"
                    % (radius, est, max_elements)
                )
        if method == "fast":
            return cls._build_fast(group, radius, max_elements)
        if method == "safe":
            return cls._build_safe(group, radius, max_elements)
        raise ValueError("method must be 'fast' or 'safe'")

    @classmethod
    def _build_fast(cls, group, radius, max_elements):
        ker = group.kernel
        nl = 4 * group.genus
        words = [b""]
        index = {b"": 0}
        dist = [0]
        adj = [[-1] * nl]
        sphere_sizes = [1]
        identifications = [0]
        level = [0]
        for d in range(radius):
            new_index = {}
            ident = 0
            for gid in level:
                w = words[gid]
                row = adj[gid]
                for x in range(nl):
                    if row[x] != -1:
                        continue
                    cand = w + bytes([x])
                    c = ker.canonicalize(cand)
                    if len(c) == len(cand):
                        h = new_index.get(c)
                        if h is None:
                            h = len(words)
                            if h > max_elements:
                                raise ResourceLimitError(
                                    "ball construction exceeded %d elements" % max_elements
                                )
                            new_index[c] = h
                            words.append(c)
                            index[c] = h
                            dist.append(d + 1)
                            adj.append([-1] * nl)
                        else:
                            ident += 1
                    else:
                        # shorter product: must already be known; a miss means
                        # the canonicalizer disagreed with an earlier level
                        h = index.get(c)
                        if h is None:
                            raise BallError(
                                "inconsistent canonical form for %r" % (cand,)
                            )
                    if adj[h][x ^ 1] not in (-1, gid):
                        raise BallError("adjacency conflict at element %d" % h)
                    row[x] = h
                    adj[h][x ^ 1] = gid
            sphere_sizes.append(len(new_index))
            identifications.append(ident)
            level = sorted(new_index.values())
        stats = {
            "sphere_sizes": sphere_sizes,
            "identifications": identifications,
            "method": "fast",
        }
        return cls(
            group,
            radius,
            words,
            index,
            np.array(dist, dtype=np.int32),
            np.array(adj, dtype=np.int32),
            stats,
        )

    @classmethod
    def _build_safe(cls, group, radius, max_elements):
        """Identification by pairwise Dehn equality inside abelianization
        buckets; canonical word chosen as the least geodesic candidate seen.
        Slower, used to cross-check the fast builder."""
        ker = group.kernel
        nl = 4 * group.genus
        words = [b""]
        index = {}
        dist = [0]
        adj = [[-1] * nl]
        sphere_sizes = [1]
        identifications = [0]
        level = [0]
        for d in range(radius):
            buckets: dict[tuple, list[int]] = {}
            reps: dict[int, list[bytes]] = {}
            pending = []  # (gid, x, candidate word)
            ident = 0
            for gid in level:
                w = words[gid]
                for x in range(nl):
                    if adj[gid][x] != -1:
                        continue
                    cand = w + bytes([x])
                    red = ker.dehn_reduce(cand)
                    if len(red) < len(cand):
                        raise BallError("unexpected shortening at the frontier")
                    h = None
                    key = group.abelianized(cand)
                    for other in buckets.get(key, ()):
                        probe = reps[other][0]
                        if ker.is_trivial(cand + inv_word(probe)):
                            h = other
                            ident += 1
                            reps[other].append(cand)
                            break
                    if h is None:
                        h = len(words)
                        if h > max_elements:
                            raise ResourceLimitError(
                                "ball construction exceeded %d elements" % max_elements
                            )
                        words.append(cand)
                        dist.append(d + 1)
                        adj.append([-1] * nl)
                        buckets.setdefault(key, []).append(h)
                        reps[h] = [cand]
                    adj[gid][x] = h
                    adj[h][x ^ 1] = gid
                    pending.append(h)
            # fix canonical words: least geodesic representative of each class
            for h, cands in reps.items():
                words[h] = min(min(ker.geodesic_reps(c) for c in cands))
            sphere_sizes.append(len(reps))
            identifications.append(ident)
            level = sorted(reps.keys())
        index = {w: i for i, w in enumerate(words)}
        stats = {
            "sphere_sizes": sphere_sizes,
            "identifications": identifications,
            "method": "safe",
        }
        return cls(
            group,
            radius,
            words,
            index,
            np.array(dist, dtype=np.int32),
            np.array(adj, dtype=np.int32),
            stats,
        )

    # -- queries ---------------------------------------------------------------

    def __len__(self):
        return len(self.words)

    @property
    def sphere_sizes(self):
        return self.stats["sphere_sizes"]

    @property
    def identifications(self):
        return self.stats["identifications"]

    def id_of(self, word: bytes) -> int:
        """Element id of a word known to lie in the ball."""
        c = self.group.canon(word)
        h = self.index.get(c)
        if h is None:
            raise OutsideBallError(
                "element %r lies outside the radius-%d ball" % (c, self.radius)
            )
        return h

    def contains_word(self, word: bytes) -> bool:
        return self.group.canon(word) in self.index

    def word_of(self, elt: int) -> bytes:
        return self.words[elt]

    def step(self, elt: int, letter: int):
        h = int(self.adj[elt, letter])
        return None if h < 0 else h

    def sphere(self, r: int):
        return [i for i in range(len(self.words)) if self.dist[i] == r]

    def elements_within(self, r: int):
        return [i for i in range(len(self.words)) if self.dist[i] <= r]

    def neighbors_of(self, elt: int):
        return [(x, int(h)) for x, h in enumerate(self.adj[elt]) if h >= 0]

    # -- serialization -----------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "genus": self.genus,
            "radius": self.radius,
            "elements": [self.group.format(w) for w in self.words],
            "adjacency": [[int(t) for t in row] for row in self.adj],
            "stats": {
                "sphere_sizes": list(self.stats["sphere_sizes"]),
                "identifications": list(self.stats["identifications"]),
                "method": self.stats["method"],
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "CayleyBall":
        group = SurfaceGroup(int(data["genus"]))
        words = [group.parse(t) for t in data["elements"]]
        index = {w: i for i, w in enumerate(words)}
        dist = np.array([len(w) for w in words], dtype=np.int32)
        adj = np.array(data["adjacency"], dtype=np.int32)
        stats = dict(data.get("stats", {}))
        stats.setdefault("sphere_sizes", None)
        return cls(group, int(data["radius"]), words, index, dist, adj, stats)

    def to_dot(self) -> str:
        lines = ["graph ball {", "  node [shape=point];"]
        for i in range(len(self.words)):
            lines.append('  n%d [tooltip="%s"];' % (i, self.group.format(self.words[i])))
        for i in range(len(self.words)):
            for x, h in self.neighbors_of(i):
                if h > i or (h == i):
                    lines.append("  n%d -- n%d;" % (i, h))
        lines.append("}")
        return "\n".join(lines) + "\n"


def canonical(word: bytes, ball: CayleyBall) -> bytes:
    """Canonical word of an element required to lie in the ball."""
    c = ball.group.canon(word)
    if c not in ball.index:
        raise OutsideBallError("element lies outside the ball")
    return c


def geodesic_words(word: bytes, ball: CayleyBall) -> list[bytes]:
    """All geodesic representatives of a ball element."""
    canonical(word, ball)
    return ball.group.geodesic_words(word)


# -- shortlex word acceptor -------------------------------------------------------


def geodesic_acceptor(group: SurfaceGroup) -> fsa.Dfa:
    """DFA for the geodesic words, from local forbidden factors.

    A freely reduced word is geodesic exactly when it carries no relator
    window longer than half (Dehn-irreducible words are geodesic in these
    presentations); states remember the last 2g letters.
    """
    ker = group.kernel
    nl = 4 * group.genus
    names = group.alphabet.names
    memory = ker.window - 1
    states = {b"": 0}
    order = [b""]
    queue = [b""]
    transitions = {}
    while queue:
        s = queue.pop()
        for x in range(nl):
            w = s + bytes([x])
            bad = len(w) >= 2 and w[-2] == x ^ 1
            if not bad and len(w) >= ker.window and w[-ker.window :] in ker.dehn_table:
                bad = True
            if bad:
                transitions[(s, x)] = None
                continue
            t = w[-memory:] if len(w) > memory else w
            if t not in states:
                states[t] = len(order)
                order.append(t)
                queue.append(t)
            transitions[(s, x)] = t
    dead_id = len(order)
    delta = []
    for s in order:
        row = []
        for x in range(nl):
            t = transitions[(s, x)]
            row.append(dead_id if t is None else states[t])
        delta.append(row)
    delta.append([dead_id] * nl)
    return fsa.minimize(fsa.Dfa(names, delta, 0, set(range(len(order)))))


def equality_difference_closure(group: SurfaceGroup, ball: CayleyBall, radius=None) -> tuple[bytes, ...]:
    """Prefix differences over ordered pairs of geodesic words of one element.

    These drive the comparator that recognizes pairs of equal-length,
    equal-value geodesic words; at genus 2 the set stabilizes from radius 4.
    """
    import itertools

    ker = group.kernel
    r = ball.radius if radius is None else radius
    memo_l: dict[tuple[int, bytes], bytes] = {}
    memo_r: dict[tuple[bytes, int], bytes] = {}
    seen = {b""}
    for gid in ball.elements_within(r):
        reps = ker.geodesic_reps(ball.words[gid])
        if len(reps) < 2:
            continue
        for v, w in itertools.permutations(reps, 2):
            d = b""
            for t in range(len(v)):
                key = (v[t], d)
                got = memo_l.get(key)
                if got is None:
                    got = memo_l[key] = group.mul(bytes([v[t] ^ 1]), d)
                d = got
                key2 = (d, w[t])
                got = memo_r.get(key2)
                if got is None:
                    got = memo_r[key2] = group.mul(d, bytes([w[t]]))
                d = got
                seen.add(d)
    return tuple(sorted(seen))


def equality_comparator(group: SurfaceGroup, diffs: tuple[bytes, ...]) -> fsa.Dfa:
    """Two-tape machine for equal-length word pairs with the same value.

    States are the given differences plus a sink; transitions multiply by
    the group law and padded labels fall to the sink, so accepted pairs have
    equal length and difference path inside the set, ending at the identity.
    """
    names = group.alphabet.names
    labels = fsa.pair_alphabet(names)
    dset = set(diffs)
    index = {d: i for i, d in enumerate(diffs)}
    sink = len(diffs)
    delta = []
    for d in diffs:
        row = []
        for a, b in labels:
            if a == fsa.PAD or b == fsa.PAD:
                row.append(sink)
                continue
            nd = group.mul(bytes([names.index(a) ^ 1]), d)
            nd = group.mul(nd, bytes([names.index(b)]))
            row.append(index.get(nd, sink))
        delta.append(row)
    delta.append([sink] * len(labels))
    start = index[b""]
    return fsa.Dfa(labels, delta, start, {start})


def lex_less_machine(alphabet_names) -> fsa.Dfa:
    """Synchronous two-tape order check: accepts pairs with tape 1 smaller.

    Letter order is the alphabet order; padded labels are rejected (the
    machine is only meaningful on equal-length pairs).
    """
    labels = fsa.pair_alphabet(tuple(alphabet_names))
    pos = {n: i for i, n in enumerate(alphabet_names)}
    EQ, LT, GT, SINK = 0, 1, 2, 3
    delta = []
    for state in (EQ, LT, GT, SINK):
        row = []
        for a, b in labels:
            if a == fsa.PAD or b == fsa.PAD or state == SINK:
                row.append(SINK)
            elif state in (LT, GT):
                row.append(state)
            elif pos[a] < pos[b]:
                row.append(LT)
            elif pos[a] > pos[b]:
                row.append(GT)
            else:
                row.append(EQ)
        delta.append(row)
    return fsa.Dfa(labels, delta, EQ, {LT})


_acceptor_cache: dict[int, fsa.Dfa] = {}


def shortlex_acceptor(group: SurfaceGroup) -> fsa.Dfa:
    """DFA for the canonical-word language (shortlex-least geodesics).

    The geodesic acceptor minus the beaten words: w is beaten when some
    lexicographically smaller geodesic word of the same length has the same
    value, recognized by projecting the equality comparator intersected
    with the order check and a geodesic first tape.  The comparator's
    difference set is harvested from a ball whose radius is grown until the
    set agrees with the next smaller radius.
    """
    got = _acceptor_cache.get(group.genus)
    if got is not None:
        return got
    geo = geodesic_acceptor(group)
    radius = 4
    while True:
        ball = CayleyBall.build(group, radius + 1)
        small = equality_difference_closure(group, ball, radius)
        large = equality_difference_closure(group, ball, radius + 1)
        if small == large:
            diffs = large
            break
        radius += 1
        if radius > 7:
            raise BallError("equality differences did not stabilize by radius 7")
    comparator = equality_comparator(group, diffs)
    order = lex_less_machine(group.alphabet.names)
    cyl = fsa.tape_cylinder(geo, 1, geo.alphabet)
    pairs = fsa.intersection(fsa.intersection(comparator, order), cyl.dfa)
    beaten = fsa.determinize_min(fsa.project(fsa.TwoTapeAutomaton(pairs, mode="asynchronous"), 2))
    acceptor = fsa.minimize(fsa.difference(geo, beaten))
    _acceptor_cache[group.genus] = acceptor
    return acceptor


def ball_language_check(acceptor: fsa.Dfa, ball: CayleyBall) -> dict:
    """Compare an acceptor against the ball: canonical words accepted, counts
    per length equal to sphere sizes."""
    group = ball.group
    ok = True
    missed = []
    for w in ball.words:
        if not acceptor.accepts_word([group.alphabet.names[l] for l in w]):
            ok = False
            missed.append(group.format(w))
            if len(missed) > 5:
                break
    counts = acceptor.count_words(ball.radius)
    spheres = list(ball.sphere_sizes)
    count_ok = counts == spheres
    return {
        "all_canonical_accepted": ok,
        "counts_match_spheres": count_ok,
        "acceptor_counts": counts,
        "sphere_sizes": spheres,
        "missed": missed,
    }


# -- word-difference machines --------------------------------------------------


@dataclass
class WordDifferenceMachine:
    """Synchronous two-tape comparator built from observed word pairs.

    States are the word differences prefix(u)^-1 prefix(v) together with the
    padding phase of each tape; the accepted pair language, restricted to the
    ball it was built from, equals the source relation.
    """

    automaton: fsa.TwoTapeAutomaton
    differences: tuple
    max_difference_distance: int
    stabilized: bool | None = None
    skipped: list = field(default_factory=list)

    @property
    def dfa(self):
        return self.automaton.dfa


def build_word_difference_machine(group: SurfaceGroup, pairs, stabilized=None) -> WordDifferenceMachine:
    """Comparator automaton from explicit word pairs (see module doc).

    ``pairs`` yields ``(u, v)`` byte words.  Each padded pair is walked and
    every (difference, pad phase) state and transition it uses is recorded;
    unseen transitions go to a sink.  Determinism is guaranteed because the
    next difference is a function of the current one and the letter pair.
    """
    names = group.alphabet.names
    labels = fsa.pair_alphabet(names)
    label_pos = {lab: i for i, lab in enumerate(labels)}
    left_memo: dict[tuple[int, bytes], bytes] = {}
    right_memo: dict[tuple[bytes, int], bytes] = {}
    start = (b"", False, False)
    states = {start: 0}
    order = [start]
    trans: dict[tuple[int, int], int] = {}
    accepts = set()
    for u, v in pairs:
        cur = start
        n = max(len(u), len(v))
        for t in range(n):
            a = u[t] if t < len(u) else None
            b = v[t] if t < len(v) else None
            diff, f1, f2 = cur
            if (f1 and a is not None) or (f2 and b is not None):
                raise BallError("pad discipline violated in pair source")
            ndiff = diff
            if a is not None:
                key = (a, ndiff)
                got = left_memo.get(key)
                if got is None:
                    got = left_memo[key] = group.mul(bytes([a ^ 1]), ndiff)
                ndiff = got
            if b is not None:
                key = (ndiff, b)
                got = right_memo.get(key)
                if got is None:
                    got = right_memo[key] = group.mul(ndiff, bytes([b]))
                ndiff = got
            nxt = (ndiff, f1 or a is None, f2 or b is None)
            if nxt not in states:
                states[nxt] = len(order)
                order.append(nxt)
            la = names[a] if a is not None else fsa.PAD
            lb = names[b] if b is not None else fsa.PAD
            key = (states[cur], label_pos[(la, lb)])
            prev = trans.get(key)
            if prev is not None and prev != states[nxt]:
                raise BallError("nondeterministic word-difference transition")
            trans[key] = states[nxt]
            cur = nxt
        accepts.add(states[cur])
    sink = len(order)
    delta = [[sink] * len(labels) for _ in range(sink + 1)]
    for (s, i), t in trans.items():
        delta[s][i] = t
    dfa = fsa.Dfa(labels, delta, 0, accepts)
    diffs = tuple(sorted({d for (d, _, _) in order}))
    maxdist = max((len(d) for d in diffs), default=0)
    return WordDifferenceMachine(
        automaton=fsa.TwoTapeAutomaton(dfa, mode="synchronous"),
        differences=diffs,
        max_difference_distance=maxdist,
        stabilized=stabilized,
    )


def multiplier_pairs(ball: CayleyBall, letter: int, radius=None):
    """Pairs (w_g, w_{g x}) for g within radius-1 of the ball."""
    r = ball.radius if radius is None else radius
    out = []
    for gid in ball.elements_within(r - 1):
        h = ball.step(gid, letter)
        if h is None:
            raise BallError("ball too shallow for multiplier pairs")
        out.append((ball.words[gid], ball.words[h]))
    return out


def neighbor_pairs(ball: CayleyBall, radius=None):
    """Pairs (u, v) of canonical words with d(u, v) <= 1."""
    r = ball.radius if radius is None else radius
    out = []
    for gid in ball.elements_within(r - 1):
        out.append((ball.words[gid], ball.words[gid]))
        for _, h in ball.neighbors_of(gid):
            if ball.dist[h] <= r:
                out.append((ball.words[gid], ball.words[h]))
    return out


def left_multiplier_pairs(ball: CayleyBall, letter: int, radius=None):
    """Pairs (x v, w) of path words with the same value, for v, w canonical."""
    r = ball.radius if radius is None else radius
    group = ball.group
    out = []
    for gid in ball.elements_within(r - 1):
        v = ball.words[gid]
        w = group.mul(bytes([letter]), v)
        if len(w) <= ball.radius:
            out.append((bytes([letter]) + v, w))
    return out


def multiplier_machine(ball: CayleyBall, letter: int, check_stability=True) -> WordDifferenceMachine:
    """Comparator for the right-multiplication relation of one letter."""
    machine = build_word_difference_machine(
        ball.group, multiplier_pairs(ball, letter)
    )
    if check_stability and ball.radius >= 2:
        smaller = build_word_difference_machine(
            ball.group, multiplier_pairs(ball, letter, ball.radius - 1)
        )
        machine.stabilized = fsa.minimize(smaller.dfa) == fsa.minimize(machine.dfa)
    return machine


def translate_acceptor(subset_dfa: fsa.Dfa, ball: CayleyBall, letter: int) -> fsa.Dfa:
    """Acceptor for the right translate S*x of a rational subset S.

    ``subset_dfa`` accepts the canonical words of S.  The letter's comparator
    is intersected with S running on the first tape and projected onto the
    second tape; the projection is then pinned back to canonical words,
    which the comparator's difference tracking makes exactly the canonical
    words valuing into S*x.
    """
    machine = multiplier_machine(ball, letter, check_stability=False)
    cyl = fsa.tape_cylinder(subset_dfa, 1, subset_dfa.alphabet)
    both = fsa.intersection(machine.dfa, cyl.dfa)
    proj = fsa.project(fsa.TwoTapeAutomaton(both, mode="asynchronous"), 2)
    out = fsa.determinize(proj)
    return fsa.minimize(fsa.intersection(out, shortlex_acceptor(ball.group)))
