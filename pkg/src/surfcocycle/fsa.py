"""Finite automata: DFAs, NFAs, two-tape machines, and their algebra.

All DFAs are total (an explicit sink completes every transition function) and
immutable after construction.  ``minimize`` renumbers states breadth-first in
alphabet order, so two minimal DFAs over the same alphabet accept the same
language iff their encodings are identical; that makes automaton equality a
byte comparison of the text format.

Alphabet labels are strings without whitespace.  Two-tape machines run over
pair labels ``(left, right)`` where either side may be the padding symbol
``PAD`` (never both); their text form joins the sides with ``|``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

PAD = "-"


class FsaError(ValueError):
    pass


class AlphabetMismatch(FsaError):
    pass


class PartitionError(FsaError):
    """The indexed family of level acceptors fails to partition the language."""


def _label_str(label) -> str:
    if isinstance(label, tuple):
        return "|".join(str(p) for p in label)
    return str(label)


def _label_parse(text: str):
    if "|" in text:
        return tuple(text.split("|"))
    return text


class Dfa:
    """Total deterministic automaton.

    ``delta`` is a tuple of per-state tuples indexed by alphabet position.
    """

    __slots__ = ("alphabet", "delta", "start", "accepts", "_index")

    def __init__(self, alphabet, delta, start, accepts):
        self.alphabet = tuple(alphabet)
        if len(set(self.alphabet)) != len(self.alphabet):
            raise FsaError("duplicate labels in alphabet")
        self.delta = tuple(tuple(row) for row in delta)
        n = len(self.delta)
        for row in self.delta:
            if len(row) != len(self.alphabet):
                raise FsaError("transition row does not cover the alphabet")
            for t in row:
                if not (0 <= t < n):
                    raise FsaError("transition target %r outside states" % (t,))
        if not (0 <= start < n):
            raise FsaError("start state outside states")
        self.start = start
        self.accepts = frozenset(accepts)
        if not self.accepts <= set(range(n)):
            raise FsaError("accept states outside states")
        self._index = {label: i for i, label in enumerate(self.alphabet)}

    @property
    def n_states(self) -> int:
        return len(self.delta)

    def step(self, state: int, label) -> int:
        return self.delta[state][self._index[label]]

    def walk(self, word, state=None) -> int:
        s = self.start if state is None else state
        for label in word:
            s = self.delta[s][self._index[label]]
        return s

    def accepts_word(self, word) -> bool:
        return self.walk(word) in self.accepts

    def reachable(self) -> set[int]:
        seen = {self.start}
        todo = [self.start]
        while todo:
            s = todo.pop()
            for t in self.delta[s]:
                if t not in seen:
                    seen.add(t)
                    todo.append(t)
        return seen

    def coaccessible(self) -> set[int]:
        rev: dict[int, set[int]] = {i: set() for i in range(self.n_states)}
        for s, row in enumerate(self.delta):
            for t in row:
                rev[t].add(s)
        seen = set(self.accepts)
        todo = list(self.accepts)
        while todo:
            s = todo.pop()
            for p in rev[s]:
                if p not in seen:
                    seen.add(p)
                    todo.append(p)
        return seen

    def enumerate_words(self, max_len: int):
        """Yield accepted words (tuples of labels) of length <= max_len."""
        live = self.coaccessible()
        queue = deque([((), self.start)])
        while queue:
            word, s = queue.popleft()
            if s in self.accepts:
                yield word
            if len(word) == max_len:
                continue
            for i, label in enumerate(self.alphabet):
                t = self.delta[s][i]
                if t in live:
                    queue.append((word + (label,), t))

    def count_words(self, max_len: int) -> list[int]:
        """Number of accepted words of each length 0..max_len."""
        counts = []
        vec = [0] * self.n_states
        vec[self.start] = 1
        for _ in range(max_len + 1):
            counts.append(sum(vec[s] for s in self.accepts))
            nxt = [0] * self.n_states
            for s, c in enumerate(vec):
                if c:
                    for t in self.delta[s]:
                        nxt[t] += c
            vec = nxt
        return counts

    def __eq__(self, other):
        if not isinstance(other, Dfa):
            return NotImplemented
        return (
            self.alphabet == other.alphabet
            and self.delta == other.delta
            and self.start == other.start
            and self.accepts == other.accepts
        )

    def __hash__(self):
        return hash((self.alphabet, self.delta, self.start, tuple(sorted(self.accepts))))

    def __repr__(self):
        return "Dfa(states=%d, alphabet=%d, accepts=%d)" % (
            self.n_states,
            len(self.alphabet),
            len(self.accepts),
        )


class Nfa:
    """Nondeterministic automaton with optional epsilon moves (label None)."""

    __slots__ = ("alphabet", "transitions", "starts", "accepts", "n_states")

    def __init__(self, alphabet, n_states, transitions, starts, accepts):
        self.alphabet = tuple(alphabet)
        self.n_states = n_states
        trans: dict[tuple[int, object], frozenset[int]] = {}
        for (s, label), targets in transitions.items():
            if not (0 <= s < n_states):
                raise FsaError("transition source outside states")
            if label is not None and label not in self.alphabet:
                raise FsaError("transition label %r not in alphabet" % (label,))
            tgt = frozenset(targets)
            if not tgt <= set(range(n_states)):
                raise FsaError("transition target outside states")
            trans[(s, label)] = tgt
        self.transitions = trans
        self.starts = frozenset(starts)
        self.accepts = frozenset(accepts)
        if not self.starts <= set(range(n_states)) or not self.accepts <= set(range(n_states)):
            raise FsaError("start/accept states outside states")

    def eps_closure(self, states) -> frozenset[int]:
        seen = set(states)
        todo = list(states)
        while todo:
            s = todo.pop()
            for t in self.transitions.get((s, None), ()):
                if t not in seen:
                    seen.add(t)
                    todo.append(t)
        return frozenset(seen)

    def accepts_word(self, word) -> bool:
        cur = self.eps_closure(self.starts)
        for label in word:
            nxt = set()
            for s in cur:
                nxt |= self.transitions.get((s, label), frozenset())
            cur = self.eps_closure(nxt)
            if not cur:
                return False
        return bool(cur & self.accepts)


def determinize(nfa: Nfa) -> Dfa:
    """Subset construction; the result is total and deterministic."""
    start = nfa.eps_closure(nfa.starts)
    ids = {start: 0}
    order = [start]
    delta = []
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        row = []
        for label in nfa.alphabet:
            nxt = set()
            for s in cur:
                nxt |= nfa.transitions.get((s, label), frozenset())
            nxt = nfa.eps_closure(nxt)
            if nxt not in ids:
                ids[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            row.append(ids[nxt])
        delta.append(row)
    accepts = [i for i, subset in enumerate(order) if subset & nfa.accepts]
    return Dfa(nfa.alphabet, delta, 0, accepts)


def reverse_nfa(nfa: Nfa) -> Nfa:
    """Mirror-image NFA: accepts exactly the reversed words."""
    trans: dict[tuple[int, object], set[int]] = {}
    for (s, label), targets in nfa.transitions.items():
        for t in targets:
            trans.setdefault((t, label), set()).add(s)
    return Nfa(nfa.alphabet, nfa.n_states, trans, nfa.accepts, nfa.starts)


def determinize_min(nfa: Nfa) -> Dfa:
    """Minimal DFA for an NFA via double reversal (Brzozowski).

    Much better behaved than direct subset construction on projections,
    whose forward determinizations can blow up combinatorially.
    """
    once = determinize(reverse_nfa(nfa))
    return minimize(determinize(reverse_nfa(dfa_to_nfa(once))))


def minimize(dfa: Dfa) -> Dfa:
    """Language-minimal DFA with canonical breadth-first state numbering."""
    reach = sorted(dfa.reachable())
    remap = {s: i for i, s in enumerate(reach)}
    delta = [[remap[dfa.delta[s][a]] for a in range(len(dfa.alphabet))] for s in reach]
    accepts = {remap[s] for s in dfa.accepts if s in remap}
    start = remap[dfa.start]
    n = len(reach)

    # Moore partition refinement
    block = [1 if i in accepts else 0 for i in range(n)]
    nblocks = 2 if accepts and len(accepts) < n else 1
    while True:
        sig = {}
        new_block = [0] * n
        for s in range(n):
            key = (block[s], tuple(block[t] for t in delta[s]))
            if key not in sig:
                sig[key] = len(sig)
            new_block[s] = sig[key]
        if len(sig) == nblocks:
            block = new_block
            break
        nblocks = len(sig)
        block = new_block

    # canonical numbering: BFS from the start block in alphabet order
    rep_delta = {}
    for s in range(n):
        rep_delta[block[s]] = [block[t] for t in delta[s]]
    order = [block[start]]
    seen = {block[start]}
    queue = deque(order)
    while queue:
        b = queue.popleft()
        for t in rep_delta[b]:
            if t not in seen:
                seen.add(t)
                order.append(t)
                queue.append(t)
    number = {b: i for i, b in enumerate(order)}
    out_delta = [[number[t] for t in rep_delta[b]] for b in order]
    out_accepts = {number[block[s]] for s in range(n) if s in accepts}
    return Dfa(dfa.alphabet, out_delta, 0, out_accepts)


def _product(a: Dfa, b: Dfa, keep) -> Dfa:
    if a.alphabet != b.alphabet:
        raise AlphabetMismatch("boolean operations need identical alphabets")
    ids = {(a.start, b.start): 0}
    order = [(a.start, b.start)]
    delta = []
    queue = deque(order)
    while queue:
        sa, sb = queue.popleft()
        row = []
        for i in range(len(a.alphabet)):
            nxt = (a.delta[sa][i], b.delta[sb][i])
            if nxt not in ids:
                ids[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            row.append(ids[nxt])
        delta.append(row)
    accepts = [
        i
        for i, (sa, sb) in enumerate(order)
        if keep(sa in a.accepts, sb in b.accepts)
    ]
    return Dfa(a.alphabet, delta, 0, accepts)


def intersection(a: Dfa, b: Dfa) -> Dfa:
    return _product(a, b, lambda x, y: x and y)


def union(a: Dfa, b: Dfa) -> Dfa:
    return _product(a, b, lambda x, y: x or y)


def difference(a: Dfa, b: Dfa) -> Dfa:
    return _product(a, b, lambda x, y: x and not y)


def complement(a: Dfa) -> Dfa:
    return Dfa(a.alphabet, a.delta, a.start, set(range(a.n_states)) - a.accepts)


def language_equal(a: Dfa, b: Dfa) -> bool:
    return minimize(a) == minimize(b)


def dfa_to_nfa(dfa: Dfa) -> Nfa:
    trans = {}
    for s, row in enumerate(dfa.delta):
        for i, t in enumerate(row):
            trans.setdefault((s, dfa.alphabet[i]), set()).add(t)
    return Nfa(dfa.alphabet, dfa.n_states, trans, {dfa.start}, dfa.accepts)


def concatenate(a: Dfa, b: Dfa) -> Nfa:
    """NFA for the concatenation language; alphabets may differ."""
    alphabet = tuple(a.alphabet) + tuple(l for l in b.alphabet if l not in a.alphabet)
    off = a.n_states
    trans: dict[tuple[int, object], set[int]] = {}
    for s, row in enumerate(a.delta):
        for i, t in enumerate(row):
            trans.setdefault((s, a.alphabet[i]), set()).add(t)
    for s, row in enumerate(b.delta):
        for i, t in enumerate(row):
            trans.setdefault((s + off, b.alphabet[i]), set()).add(t + off)
    for s in a.accepts:
        trans.setdefault((s, None), set()).add(b.start + off)
    accepts = {s + off for s in b.accepts}
    return Nfa(alphabet, a.n_states + b.n_states, trans, {a.start}, accepts)


def empty_dfa(alphabet) -> Dfa:
    return Dfa(alphabet, [[0] * len(tuple(alphabet))], 0, set())


def epsilon_dfa(alphabet) -> Dfa:
    labels = tuple(alphabet)
    return Dfa(labels, [[1] * len(labels), [1] * len(labels)], 0, {0})


def word_dfa(alphabet, word) -> Dfa:
    """DFA accepting exactly one word."""
    labels = tuple(alphabet)
    n = len(word)
    sink = n + 1
    delta = []
    for i in range(n):
        row = [sink] * len(labels)
        row[labels.index(word[i])] = i + 1
        delta.append(row)
    delta.append([sink] * len(labels))
    delta.append([sink] * len(labels))
    return Dfa(labels, delta, 0, {n})


# -- two-tape machines -------------------------------------------------------


def pair_alphabet(left_labels, right_labels=None):
    """All pair labels over two padded tapes, excluding (PAD, PAD)."""
    right_labels = left_labels if right_labels is None else right_labels
    labels = []
    for a in tuple(left_labels) + (PAD,):
        for b in tuple(right_labels) + (PAD,):
            if a == PAD and b == PAD:
                continue
            labels.append((a, b))
    return tuple(labels)


class TwoTapeAutomaton:
    """A DFA over padded pair labels, synchronous or asynchronous.

    Synchronous machines must never resume a tape after it has been padded;
    construction verifies this on the reachable, co-accessible part.
    """

    def __init__(self, dfa: Dfa, mode: str = "synchronous"):
        if mode not in ("synchronous", "asynchronous"):
            raise FsaError("mode must be synchronous or asynchronous")
        for label in dfa.alphabet:
            if not (isinstance(label, tuple) and len(label) == 2):
                raise FsaError("two-tape labels must be pairs")
            if label == (PAD, PAD):
                raise FsaError("pair label (PAD, PAD) is forbidden")
        self.dfa = dfa
        self.mode = mode
        if mode == "synchronous":
            self._check_pad_discipline()

    def _check_pad_discipline(self):
        live = self.dfa.coaccessible()
        seen = {(self.dfa.start, False, False)}
        todo = [(self.dfa.start, False, False)]
        while todo:
            s, f1, f2 = todo.pop()
            for i, (a, b) in enumerate(self.dfa.alphabet):
                t = self.dfa.delta[s][i]
                if t not in live:
                    continue
                if (f1 and a != PAD) or (f2 and b != PAD):
                    raise FsaError("synchronous machine resumes a padded tape")
                key = (t, f1 or a == PAD, f2 or b == PAD)
                if key not in seen:
                    seen.add(key)
                    todo.append(key)

    def accepts_pair(self, left, right) -> bool:
        word = pad_pair(left, right)
        return self.dfa.accepts_word(word)


def pad_pair(left, right):
    """Zip two label sequences into padded pair labels."""
    n = max(len(left), len(right))
    out = []
    for i in range(n):
        a = left[i] if i < len(left) else PAD
        b = right[i] if i < len(right) else PAD
        out.append((a, b))
    return tuple(out)


def project(two_tape: TwoTapeAutomaton, tape: int) -> Nfa:
    """Projection of the pair language onto one tape, pads dropped."""
    if tape not in (1, 2):
        raise FsaError("tape must be 1 or 2")
    dfa = two_tape.dfa
    labels = []
    for a, b in dfa.alphabet:
        side = a if tape == 1 else b
        if side != PAD and side not in labels:
            labels.append(side)
    trans: dict[tuple[int, object], set[int]] = {}
    for s, row in enumerate(dfa.delta):
        for i, t in enumerate(row):
            a, b = dfa.alphabet[i]
            side = a if tape == 1 else b
            key = (s, None if side == PAD else side)
            trans.setdefault(key, set()).add(t)
    return Nfa(tuple(labels), dfa.n_states, trans, {dfa.start}, dfa.accepts)


def tape_cylinder(dfa: Dfa, tape: int, other_labels) -> TwoTapeAutomaton:
    """Run ``dfa`` on one tape of a pair machine, ignoring the other tape."""
    if tape not in (1, 2):
        raise FsaError("tape must be 1 or 2")
    own = dfa.alphabet
    labels = pair_alphabet(own, tuple(other_labels)) if tape == 1 else pair_alphabet(
        tuple(other_labels), own
    )
    delta = []
    for s in range(dfa.n_states):
        row = []
        for a, b in labels:
            side = a if tape == 1 else b
            row.append(s if side == PAD else dfa.delta[s][own.index(side)])
        delta.append(row)
    return TwoTapeAutomaton(
        Dfa(labels, delta, dfa.start, dfa.accepts), mode="asynchronous"
    )


# -- the lifted-language product ----------------------------------------------


def lift_product(word_acceptor: Dfa, level_machines, y_encoding, full=False):
    """Acceptor over annotated letters for the lifted normal-form language.

    ``level_machines`` maps ``(letter, value)`` to the DFA accepting the
    normal-form words whose cocycle value against that letter is ``value``;
    all of them and the word acceptor share one alphabet.  ``y_encoding``
    maps each annotated label to its ``(letter, value)`` pair.  Reading an
    annotated label checks that the level machine for its pair currently
    accepts, then advances every component on the underlying letter; a single
    dead state absorbs failures.

    With ``full=True`` the whole cartesian product is materialised (feasible
    only for small families); otherwise only reachable tuples are built.
    The level machines must partition the accepted language: a reachable
    prefix claimed by none or several machines of one letter raises
    ``PartitionError``.
    """
    base = word_acceptor.alphabet
    keys = sorted(level_machines.keys(), key=lambda k: (base.index(k[0]), str(k[1])))
    machines = [level_machines[k] for k in keys]
    for m in machines:
        if m.alphabet != base:
            raise AlphabetMismatch("level machines must share the word acceptor alphabet")
    y_labels = tuple(sorted(y_encoding.keys(), key=lambda y: (base.index(y_encoding[y][0]), str(y_encoding[y][1]))))
    key_pos = {k: i for i, k in enumerate(keys)}
    for y, pair in y_encoding.items():
        if pair not in key_pos:
            raise FsaError("annotated label %r has no level machine" % (y,))
    letters_with_machines = {k[0] for k in keys}
    live_word_states = word_acceptor.coaccessible()

    def check_partition(state):
        word_state = state[0]
        if word_state not in live_word_states:
            return
        for letter in letters_with_machines:
            claims = [
                k
                for k in keys
                if k[0] == letter and state[1 + key_pos[k]] in level_machines[k].accepts
            ]
            if len(claims) != 1:
                raise PartitionError(
                    "prefix claimed by %d level machines for letter %r"
                    % (len(claims), letter)
                )

    start = (word_acceptor.start,) + tuple(m.start for m in machines)

    def advance(state, letter):
        i = base.index(letter)
        return (word_acceptor.delta[state[0]][i],) + tuple(
            m.delta[state[1 + j]][i] for j, m in enumerate(machines)
        )

    ids = {start: 0}
    order = [start]
    if full:
        import itertools

        for w in range(word_acceptor.n_states):
            for rest in itertools.product(*[range(m.n_states) for m in machines]):
                st = (w,) + rest
                if st not in ids:
                    ids[st] = len(order)
                    order.append(st)
    dead = object()
    ids[dead] = len(order)
    order.append(dead)
    dead_id = ids[dead]

    def row_for(state):
        row = []
        for y in y_labels:
            k = y_encoding[y]
            comp = state[1 + key_pos[k]]
            if comp in level_machines[k].accepts:
                nxt = advance(state, y_encoding[y][0])
                if nxt not in ids:
                    ids[nxt] = len(order)
                    order.append(nxt)
                    queue.append(nxt)
                row.append(ids[nxt])
            else:
                row.append(dead_id)
        return row

    delta = {}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        if ids[state] in delta:
            continue
        check_partition(state)
        delta[ids[state]] = row_for(state)
    # full mode also materialises the unreachable tuples, without the
    # partition check, so the literal cartesian construction is available
    if full:
        for state in list(order):
            if state is not dead and ids[state] not in delta:
                queue.append(state)
        while queue:
            state = queue.popleft()
            if ids[state] in delta:
                continue
            delta[ids[state]] = row_for(state)
    rows = []
    for i, state in enumerate(order):
        if i in delta:
            rows.append(delta[i])
        else:
            rows.append([dead_id] * len(y_labels))
    accepts = {
        i
        for i, state in enumerate(order)
        if state is not dead and i in delta and state[0] in word_acceptor.accepts
    }
    return Dfa(y_labels, rows, ids[start], accepts)


# -- serialization -------------------------------------------------------------


def dfa_to_text(dfa: Dfa) -> str:
    """Plain-text exchange format.

    Header lines ``states``, ``alphabet``, ``start``, ``accept``; then one
    tab-separated line per transition ``from label to``.
    """
    lines = [
        "states %d" % dfa.n_states,
        "alphabet %s" % " ".join(_label_str(l) for l in dfa.alphabet),
        "start %d" % dfa.start,
        "accept %s" % " ".join(str(s) for s in sorted(dfa.accepts)),
    ]
    for s, row in enumerate(dfa.delta):
        for i, t in enumerate(row):
            lines.append("%d\t%s\t%d" % (s, _label_str(dfa.alphabet[i]), t))
    return "\n".join(lines) + "\n"


def dfa_from_text(text: str) -> Dfa:
    lines = [l for l in text.splitlines() if l.strip()]
    header = {}
    body = []
    for line in lines:
        if "\t" in line:
            body.append(line)
        else:
            key, _, rest = line.partition(" ")
            header[key] = rest.strip()
    n = int(header["states"])
    alphabet = tuple(_label_parse(t) for t in header["alphabet"].split())
    start = int(header["start"])
    accepts = {int(t) for t in header.get("accept", "").split()}
    index = {label: i for i, label in enumerate(alphabet)}
    delta = [[None] * len(alphabet) for _ in range(n)]
    for line in body:
        frm, label, to = line.split("\t")
        delta[int(frm)][index[_label_parse(label)]] = int(to)
    for s, row in enumerate(delta):
        for i, t in enumerate(row):
            if t is None:
                raise FsaError("missing transition for state %d label %r" % (s, alphabet[i]))
    return Dfa(alphabet, delta, start, accepts)


def dfa_to_dot(dfa: Dfa, name="automaton") -> str:
    lines = ["digraph %s {" % name, "  rankdir=LR;", '  hidden [shape=point, style=invis];']
    for s in range(dfa.n_states):
        shape = "doublecircle" if s in dfa.accepts else "circle"
        lines.append('  n%d [shape=%s, label="%d"];' % (s, shape, s))
    lines.append("  hidden -> n%d;" % dfa.start)
    for s, row in enumerate(dfa.delta):
        grouped: dict[int, list[str]] = {}
        for i, t in enumerate(row):
            grouped.setdefault(t, []).append(_label_str(dfa.alphabet[i]))
        for t, labels in sorted(grouped.items()):
            lines.append('  n%d -> n%d [label="%s"];' % (s, t, ",".join(labels)))
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- fellow travelling ----------------------------------------------------------


@dataclass
class FellowTravellerReport:
    mode: str
    max_delta: int
    per_pair: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.skipped


def fellow_traveller_check(pairs, metric, mode="synchronous") -> FellowTravellerReport:
    """Least constant under which every pair of paths fellow-travels.

    ``pairs`` yields pairs of words (sequences of positions are their
    prefixes); ``metric(u_prefix, v_prefix)`` returns the distance between
    the two path points and may raise ``LookupError`` to signal a point
    outside the supplied ball, which skips that pair and reports it.
    Asynchronous mode minimises, by dynamic programming over monotone
    reparameterizations, the maximum distance along the pair of paths.
    """
    report = FellowTravellerReport(mode=mode, max_delta=0)
    for idx, (u, v) in enumerate(pairs):
        try:
            if mode == "synchronous":
                delta = 0
                for t in range(max(len(u), len(v)) + 1):
                    delta = max(delta, metric(u[: min(t, len(u))], v[: min(t, len(v))]))
            else:
                nu, nv = len(u) + 1, len(v) + 1
                cost = [[metric(u[:i], v[:j]) for j in range(nv)] for i in range(nu)]
                best = [[None] * nv for _ in range(nu)]
                best[0][0] = cost[0][0]
                for i in range(nu):
                    for j in range(nv):
                        if i == 0 and j == 0:
                            continue
                        prev = [
                            best[i - 1][j] if i > 0 else None,
                            best[i][j - 1] if j > 0 else None,
                            best[i - 1][j - 1] if i > 0 and j > 0 else None,
                        ]
                        prev = [p for p in prev if p is not None]
                        best[i][j] = max(cost[i][j], min(prev))
                delta = best[nu - 1][nv - 1]
        except LookupError:
            report.skipped.append(idx)
            continue
        report.per_pair.append(delta)
        report.max_delta = max(report.max_delta, delta)
    return report
