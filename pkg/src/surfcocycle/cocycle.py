"""Two-cocycles with finite coefficient actions on surface groups.

The central objects are:

* ``Coefficients`` / ``FiniteAction`` -- a finitely generated abelian group
  Z^rank + torsion, acted on by the group through a finite image.
* ``SurfaceCocycle`` -- the integer cocycle of the canonical central
  extension of the genus-g group, computed two independent ways: from
  extension arithmetic (signed relator count plus turn sums) and from the
  closed form (turning number plus three junction angles).
* level sets and their synthesized acceptors, the coboundary adjustment,
  the cocycle identity checker, and the transfer map along a finite-index
  subgroup given by a homomorphism onto a finite abelian group.

All identities are exact integer computations; floating point enters only
through the geometry oracle used to cross-check turning numbers.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

from . import fsa
from .geometry import get_model
from .group import (
    CayleyBall,
    OutsideBallError,
    SurfaceGroup,
    multiplier_machine,
    shortlex_acceptor,
)
from .words import inv_word


class CocycleError(RuntimeError):
    pass


class InsufficientRadiusError(CocycleError):
    """The ball is too small for the requested computation."""

    def __init__(self, message, required_radius=None):
        super().__init__(message)
        self.required_radius = required_radius


# -- coefficients and actions ----------------------------------------------------


class Coefficients:
    """Z^rank plus cyclic torsion factors, elements as integer tuples."""

    def __init__(self, rank: int = 1, torsion: tuple[int, ...] = ()):
        if rank < 0 or any(m < 2 for m in torsion):
            raise ValueError("rank must be >= 0 and torsion moduli >= 2")
        self.rank = rank
        self.torsion = tuple(int(m) for m in torsion)
        self.dim = rank + len(self.torsion)

    def reduce(self, vec) -> tuple[int, ...]:
        vec = tuple(int(v) for v in vec)
        if len(vec) != self.dim:
            raise ValueError("coefficient vector has wrong length")
        out = list(vec)
        for j, m in enumerate(self.torsion):
            out[self.rank + j] %= m
        return tuple(out)

    @property
    def zero(self) -> tuple[int, ...]:
        return (0,) * self.dim

    def add(self, u, v):
        return self.reduce(tuple(a + b for a, b in zip(u, v)))

    def neg(self, u):
        return self.reduce(tuple(-a for a in u))

    def sub(self, u, v):
        return self.add(u, self.neg(v))

    def from_int(self, n: int):
        """Embed an integer in the first free coordinate (rank >= 1)."""
        if self.rank < 1:
            raise ValueError("no free coordinate to hold an integer")
        return self.reduce((n,) + (0,) * (self.dim - 1))

    def __repr__(self):
        return "Coefficients(rank=%d, torsion=%r)" % (self.rank, self.torsion)

    def __eq__(self, other):
        return (
            isinstance(other, Coefficients)
            and self.rank == other.rank
            and self.torsion == other.torsion
        )

    def __hash__(self):
        return hash((self.rank, self.torsion))


class FiniteAction:
    """Action of the group on coefficients through integer matrices.

    ``matrices`` maps letters to square integer matrices (rows act on
    coordinate columns: value' = value @ M).  Missing letters act trivially.
    Validation requires the relator to act as the identity and the generated
    matrix monoid to close into a finite group.
    """

    def __init__(self, coefficients: Coefficients, matrices: dict | None = None):
        self.coefficients = coefficients
        n = coefficients.dim
        self.matrices = {}
        for letter, mat in (matrices or {}).items():
            rows = tuple(tuple(int(x) for x in row) for row in mat)
            if len(rows) != n or any(len(r) != n for r in rows):
                raise ValueError("action matrix must be %dx%d" % (n, n))
            self.matrices[int(letter)] = rows

    @property
    def is_trivial(self) -> bool:
        n = self.coefficients.dim
        ident = tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n))
        return all(m == ident for m in self.matrices.values())

    def matrix_of_letter(self, letter: int):
        n = self.coefficients.dim
        return self.matrices.get(
            letter, tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n))
        )

    def act_letter(self, value, letter: int):
        mat = self.matrices.get(letter)
        if mat is None:
            return self.coefficients.reduce(value)
        n = self.coefficients.dim
        out = [0] * n
        for i in range(n):
            vi = value[i]
            if vi:
                row = mat[i]
                for j in range(n):
                    out[j] += vi * row[j]
        return self.coefficients.reduce(out)

    def act(self, value, word: bytes):
        for l in word:
            value = self.act_letter(value, l)
        return self.coefficients.reduce(value)

    def validate(self, group: SurfaceGroup, closure_limit: int = 4096):
        ident = self.matrix_of_letter(-1)
        acted = ident
        mats = {}
        for l in range(4 * group.genus):
            mats[l] = self.matrix_of_letter(l)

        def matmul(a, b):
            n = len(a)
            return tuple(
                tuple(sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n))
                for i in range(n)
            )

        rel = ident
        for l in group.relator:
            rel = matmul(rel, mats[l])
        if rel != ident:
            raise CocycleError("relator does not act as the identity")
        for l in range(4 * group.genus):
            if matmul(mats[l], mats[l ^ 1]) != ident:
                raise CocycleError("letter and inverse actions do not cancel")
        closure = {ident}
        frontier = [ident]
        while frontier:
            m = frontier.pop()
            for l in range(4 * group.genus):
                nm = matmul(m, mats[l])
                if nm not in closure:
                    closure.add(nm)
                    frontier.append(nm)
                    if len(closure) > closure_limit:
                        raise CocycleError(
                            "action image exceeded %d matrices" % closure_limit
                        )
        return len(closure)

    def signed_permutation_images(self):
        """For each letter, the image of each unit vector as (index, sign);
        raises if some matrix is not a signed permutation."""
        n = self.coefficients.dim
        out = {}
        for letter, mat in self.matrices.items():
            perm = []
            for i in range(n):
                row = mat[i]
                hits = [(j, row[j]) for j in range(n) if row[j] != 0]
                if len(hits) != 1 or hits[0][1] not in (1, -1):
                    raise CocycleError("action is not a signed permutation")
                perm.append(hits[0])
            out[letter] = tuple(perm)
        return out


def trivial_action(coefficients: Coefficients) -> FiniteAction:
    return FiniteAction(coefficients, {})


# -- the surface cocycle ------------------------------------------------------------


@dataclass(frozen=True)
class ClosedFormValue:
    """Closed-form evaluation with its witnesses.

    ``junction_turns`` are the three integer angles (units of pi/2g) at the
    junctions of the closed path w1 w2 w3^-1; ``turning_number`` is measured
    numerically.  The value is -4g*tau + sum of junction turns.  For single
    letter w2 the integer sign rule predicts tau from the junction signs and
    is checked.
    """

    sigma: int
    junction_turns: tuple | None
    turning_number: int | None
    rule_turning_number: int | None


def _rule_turning_number(m1: int, m2: int, m3: int) -> int:
    if m1 < 0 and m2 < 0 and m3 < 0:
        return -1
    if m3 < 0 or (m1 < 0 and m2 < 0):
        return 0
    return 1


class SurfaceCocycle:
    """The integer-valued cocycle of the canonical central extension.

    The section sends the element of canonical word w to the lifted word
    times the fiber generator to the power -turn_sum(w); the resulting
    cocycle is sigma(g1, g2) = k*N + n(w3) - n(w1) - n(w2) with
    k = 8g(g-1) the fiber charge of the lifted relator.
    """

    def __init__(self, group: SurfaceGroup):
        self.group = group
        self.kernel = group.kernel
        self.genus = group.genus
        self.k = self.kernel.relator_charge
        self._memo: dict[tuple[bytes, bytes], int] = {}

    def section_exponent(self, word: bytes) -> int:
        """Fiber exponent of the section at the element of this word."""
        return -self.kernel.turn_sum(self.group.canon(word))

    def value(self, w1: bytes, w2: bytes) -> int:
        key = (w1, w2)
        got = self._memo.get(key)
        if got is None:
            got = self.kernel.sigma_pair(w1, w2)[0]
            self._memo[key] = got
        return got

    def value_and_product(self, w1: bytes, w2: bytes) -> tuple[int, bytes]:
        return self.kernel.sigma_pair(w1, w2)

    def closed_form(self, w1: bytes, w2: bytes, model=None) -> ClosedFormValue:
        """Evaluate from the turning number and the three junction angles.

        Independent of the extension-arithmetic route: the turning number is
        tracked numerically in the isometry model.  Degenerate pairs (an
        empty factor) evaluate to 0 with no witnesses.
        """
        group = self.group
        w1 = group.canon(w1)
        w2 = group.canon(w2)
        if not w1 or not w2:
            return ClosedFormValue(0, None, None, None)
        model = model or get_model(self.genus)
        table = self.kernel.turns
        nl = 4 * self.genus
        w3 = group.mul(w1, w2)
        loop = w1 + w2 + inv_word(w3)
        tau = model.turning_number(loop)
        if w3:
            m1 = table[w1[-1] * nl + w2[0]]
            m2 = table[w2[-1] * nl + (w3[-1] ^ 1)]
            m3 = table[(w3[0] ^ 1) * nl + w1[0]]
            turns = (m1, m2, m3)
        else:
            m1 = table[w1[-1] * nl + w2[0]]
            m3 = table[w2[-1] * nl + w1[0]]
            turns = (m1, m3)
        sigma = -4 * self.genus * tau + sum(turns)
        rule = None
        if len(w2) == 1 and w3:
            rule = _rule_turning_number(*turns)
            if rule != tau:
                raise CocycleError(
                    "turning-number sign rule fails for pair (%r, %r): rule %d, measured %d"
                    % (w1, w2, rule, tau)
                )
        return ClosedFormValue(sigma, turns, tau, rule)

    def bound(self) -> int:
        """Exact a-priori bound on cocycle values: 14g from the closed form."""
        return 14 * self.genus


# -- sweeps over balls -----------------------------------------------------------


class BallSweeps:
    """Cached cocycle sweeps over one ball; the workhorse for verification."""

    def __init__(self, cocycle: SurfaceCocycle, ball: CayleyBall):
        if cocycle.group.genus != ball.genus:
            raise ValueError("cocycle and ball disagree on genus")
        self.cocycle = cocycle
        self.ball = ball
        self._right: dict[tuple[int, int], list[int]] = {}
        self._left: dict[tuple[int, int], list[int]] = {}

    def right(self, letter: int, radius: int | None = None) -> list[int]:
        """sigma(g, x) for every ball element g within the radius."""
        r = self.ball.radius if radius is None else radius
        key = (letter, r)
        if key not in self._right:
            ker = self.cocycle.kernel
            lw = bytes([letter])
            out = []
            for gid in self.ball.elements_within(r):
                out.append(ker.sigma_pair(self.ball.words[gid], lw)[0])
            self._right[key] = out
        return self._right[key]

    def left(self, letter: int, radius: int | None = None) -> list[int]:
        """sigma(x, g) for every ball element g within the radius."""
        r = self.ball.radius if radius is None else radius
        key = (letter, r)
        if key not in self._left:
            ker = self.cocycle.kernel
            lw = bytes([letter])
            out = []
            for gid in self.ball.elements_within(r):
                out.append(ker.sigma_pair(lw, self.ball.words[gid])[0])
            self._left[key] = out
        return self._left[key]

    def right_level_sets(self, letter: int, radius: int | None = None) -> dict[int, list[int]]:
        """Partition of the ball by the value of sigma(., x).

        The product g*x may leave the ball; values are computed at word
        level, so the domain is the whole ball.
        """
        r = self.ball.radius if radius is None else radius
        out: dict[int, list[int]] = {}
        vals = self.right(letter, r)
        ids = self.ball.elements_within(r)
        for gid, v in zip(ids, vals):
            out.setdefault(v, []).append(gid)
        return out


def weak_boundedness_report(sweeps: BallSweeps) -> dict:
    """Finite value sets of sigma against single letters, both sides, with
    stabilization between the last two radii."""
    ball = sweeps.ball
    group = sweeps.cocycle.group
    R = ball.radius
    report = {"radius": R, "right": {}, "left": {}, "max_abs": 0, "bound": sweeps.cocycle.bound()}
    for letter in range(4 * group.genus):
        name = group.alphabet.names[letter]
        for side, fn in (("right", sweeps.right), ("left", sweeps.left)):
            prev = sorted(set(fn(letter, R - 1))) if R >= 1 else []
            last = sorted(set(fn(letter, R)))
            report[side][name] = {
                "values": last,
                "size_prev": len(prev),
                "size_last": len(last),
                "stabilized": prev == last,
            }
            if last:
                report["max_abs"] = max(report["max_abs"], max(abs(v) for v in last))
    report["within_bound"] = report["max_abs"] <= report["bound"]
    report["all_stabilized"] = all(
        entry["stabilized"] for side in ("right", "left") for entry in report[side].values()
    )
    return report


def four_tuple_classification(sweeps: BallSweeps, letter: int) -> dict:
    """Check sigma(g, x) is a function of the first and last letters of the
    canonical words of g and gx (None for the empty word)."""
    ball = sweeps.ball
    vals = sweeps.right(letter)
    ids = ball.elements_within(ball.radius)
    table: dict[tuple, int] = {}
    conflicts = []
    ker = sweeps.cocycle.kernel
    lw = bytes([letter])
    for gid, v in zip(ids, vals):
        w1 = ball.words[gid]
        w3 = ker.sigma_pair(w1, lw)[1]
        key = (
            w1[0] if w1 else None,
            w1[-1] if w1 else None,
            w3[0] if w3 else None,
            w3[-1] if w3 else None,
        )
        if key in table:
            if table[key] != v:
                conflicts.append((key, table[key], v))
        else:
            table[key] = v
    return {"classes": len(table), "consistent": not conflicts, "conflicts": conflicts}


# -- level-set acceptors ------------------------------------------------------------


def boundary_classifier(group: SurfaceGroup) -> tuple[fsa.Dfa, tuple]:
    """Two-tape DFA tracking first and last letters of both tapes.

    Returns the DFA with an empty accept set plus the tuple of per-state
    boundary data; callers select accept states by predicate on the data.
    """
    names = group.alphabet.names
    labels = fsa.pair_alphabet(names)
    pos = {n: i for i, n in enumerate(names)}
    start = (None, None, None, None)
    states = {start: 0}
    order = [start]
    delta = []
    queue = [start]
    rows = {}
    while queue:
        st = queue.pop()
        f1, l1, f3, l3 = st
        row = []
        for a, b in labels:
            nf1, nl1, nf3, nl3 = f1, l1, f3, l3
            if a != fsa.PAD:
                la = pos[a]
                nf1 = la if nf1 is None else nf1
                nl1 = la
            if b != fsa.PAD:
                lb = pos[b]
                nf3 = lb if nf3 is None else nf3
                nl3 = lb
            nxt = (nf1, nl1, nf3, nl3)
            if nxt not in states:
                states[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            row.append(nxt)
        rows[st] = row
    delta = [[states[t] for t in rows[st]] for st in order]
    return fsa.Dfa(labels, delta, 0, set()), tuple(order)


def sigma_of_boundary_letters(cocycle: SurfaceCocycle, f1, l1, f3, l3, letter: int) -> int:
    """Closed-form cocycle value from boundary letters alone.

    Valid for letter pairs because the turning number is determined by the
    junction angle signs there; the exhaustive sweeps of the verification
    suite are what justify using this as the acceptor's output function.
    """
    if f1 is None or f3 is None:
        return 0
    table = cocycle.kernel.turns
    nl = 4 * cocycle.genus
    m1 = table[l1 * nl + letter]
    m2 = table[letter * nl + (l3 ^ 1)]
    m3 = table[(f3 ^ 1) * nl + f1]
    tau = _rule_turning_number(m1, m2, m3)
    return -4 * cocycle.genus * tau + m1 + m2 + m3


def sigma_of_boundary(cocycle: SurfaceCocycle, key: tuple, letter: int) -> int:
    return sigma_of_boundary_letters(cocycle, key[0], key[1], key[2], key[3], letter)


@dataclass
class LevelSetAcceptor:
    letter: int
    value: int
    dfa: fsa.Dfa
    stabilized: bool | None
    elements: list


def difference_closure(cocycle: SurfaceCocycle, ball: CayleyBall, radius=None) -> tuple[bytes, ...]:
    """All word differences between canonical words of neighboring elements.

    Walks the padded pairs (w_g, canonical(g x)) for every letter x and every
    g within the radius, recording every prefix difference.  The set is the
    single data-dependent ingredient of the synthesized acceptors; at genus 2
    it stabilizes from radius 4 on.
    """
    group = cocycle.group
    ker = cocycle.kernel
    r = ball.radius if radius is None else radius
    left_memo: dict[tuple[int, bytes], bytes] = {}
    right_memo: dict[tuple[bytes, int], bytes] = {}
    seen = {b""}
    for letter in range(4 * group.genus):
        lw = bytes([letter])
        for gid in ball.elements_within(r):
            u = ball.words[gid]
            v = ker.sigma_pair(u, lw)[1]
            d = b""
            for t in range(max(len(u), len(v))):
                a = u[t] if t < len(u) else None
                b = v[t] if t < len(v) else None
                if a is not None:
                    key = (a, d)
                    got = left_memo.get(key)
                    if got is None:
                        got = left_memo[key] = group.mul(bytes([a ^ 1]), d)
                    d = got
                if b is not None:
                    key = (d, b)
                    got = right_memo.get(key)
                    if got is None:
                        got = right_memo[key] = group.mul(d, bytes([b]))
                    d = got
                seen.add(d)
    return tuple(sorted(seen))


def closure_comparator(group: SurfaceGroup, diffs: tuple[bytes, ...]) -> tuple[fsa.Dfa, tuple]:
    """Two-tape machine over a difference set, transitions by the group law.

    States are (difference, tape padding phases) plus a sink; the transition
    on a pair label multiplies the difference on the left by the inverse
    first-tape letter and on the right by the second-tape letter, falling to
    the sink when the product leaves the set.  Every path is group-law
    consistent, so the data enters only through the choice of ``diffs``.
    Returns the DFA (no accepts chosen) and per-state (difference, phases).
    """
    names = group.alphabet.names
    labels = fsa.pair_alphabet(names)
    dset = set(diffs)
    states = {}
    order = []

    def intern(st):
        if st not in states:
            states[st] = len(order)
            order.append(st)
        return states[st]

    start = intern((b"", False, False))
    for d in diffs:
        for f1 in (False, True):
            for f2 in (False, True):
                if f1 and f2:
                    continue
                intern((d, f1, f2))
    sink = len(order)
    delta = []
    for d, f1, f2 in order:
        row = []
        for a, b in labels:
            nf1 = f1 or a == fsa.PAD
            nf2 = f2 or b == fsa.PAD
            if (f1 and a != fsa.PAD) or (f2 and b != fsa.PAD):
                row.append(sink)
                continue
            nd = d
            if a != fsa.PAD:
                nd = group.mul(bytes([names.index(a) ^ 1]), nd)
            if b != fsa.PAD:
                nd = group.mul(nd, bytes([names.index(b)]))
            if nd not in dset or (nf1 and nf2):
                row.append(sink)
            else:
                row.append(states[(nd, nf1, nf2)])
        delta.append(row)
    delta.append([sink] * len(labels))
    data = tuple(order) + ((None, True, True),)
    return fsa.Dfa(labels, delta, start, set()), data


class _LevelProjection:
    """Shared determinized projection underlying every level-set acceptor.

    The pair machine is the product of the closure comparator, the (first,
    last)-letter memory of the second tape, and the canonical-word acceptor
    running on the second tape.  Its tape-1 projection is determinized once;
    the first and last letters of the first tape are a function of the word
    being read, so they are re-attached afterwards by a small memory
    machine.  Each (letter, value) choice then only picks accept states, so
    synthesizing all level acceptors costs one subset construction.
    """

    def __init__(self, group: SurfaceGroup, cocycle: SurfaceCocycle, diffs: tuple[bytes, ...]):
        self.group = group
        self.cocycle = cocycle
        self.diffs = diffs
        comparator, comp_data = closure_comparator(group, diffs)
        acc = shortlex_acceptor(group)
        names = group.alphabet.names
        labels = comparator.alphabet
        acc_dead = [s for s in range(acc.n_states) if s not in acc.accepts]
        acc_dead = acc_dead[0] if acc_dead else None

        label_info = []
        for a, b in labels:
            ai = None if a == fsa.PAD else names.index(a)
            bi = None if b == fsa.PAD else names.index(b)
            label_info.append((ai, bi))
        comp_sink = comparator.n_states - 1

        # reachable product (comparator, f3, l3, tape-2 acceptor state)
        start = (comparator.start, None, None, acc.start)
        ids = {start: 0}
        order = [start]
        rows = []
        queue = deque([start])
        while queue:
            st = queue.popleft()
            cs, f3, l3, as_ = st
            row = []
            for k in range(len(labels)):
                nc = comparator.delta[cs][k]
                if nc == comp_sink:
                    row.append(-1)
                    continue
                bi = label_info[k][1]
                nf3, nl3, na = f3, l3, as_
                if bi is not None:
                    nf3 = bi if nf3 is None else nf3
                    nl3 = bi
                    na = acc.delta[as_][bi]
                    if na == acc_dead:
                        row.append(-1)
                        continue
                nxt = (nc, nf3, nl3, na)
                if nxt not in ids:
                    ids[nxt] = len(order)
                    order.append(nxt)
                    queue.append(nxt)
                row.append(ids[nxt])
            rows.append(row)
        self.comp_data = comp_data
        self.product_order = order

        # tape-1 projection as an NFA, then subset construction
        eps: dict[int, set[int]] = {}
        moves: dict[tuple[int, int], set[int]] = {}
        for s, row in enumerate(rows):
            for k, t in enumerate(row):
                if t < 0:
                    continue
                ai = label_info[k][0]
                if ai is None:
                    eps.setdefault(s, set()).add(t)
                else:
                    moves.setdefault((s, ai), set()).add(t)

        def closure(subset):
            out = set(subset)
            todo = list(subset)
            while todo:
                s = todo.pop()
                for t in eps.get(s, ()):
                    if t not in out:
                        out.add(t)
                        todo.append(t)
            return frozenset(out)

        nl_count = 4 * group.genus
        dstart = closure({0})
        dids = {dstart: 0}
        dorder = [dstart]
        ddelta = []
        dqueue = deque([dstart])
        while dqueue:
            cur = dqueue.popleft()
            row = []
            for x in range(nl_count):
                nxt = set()
                for s in cur:
                    nxt |= moves.get((s, x), set())
                nxt = closure(nxt)
                if nxt not in dids:
                    dids[nxt] = len(dorder)
                    dorder.append(nxt)
                    dqueue.append(nxt)
                row.append(dids[nxt])
            ddelta.append(row)
        self.det_delta = tuple(tuple(r) for r in ddelta)
        self.det_order = dorder
        self.alphabet = names
        self.acceptor = acc
        self._letter_cache: dict[int, tuple] = {}

    def _per_letter(self, letter: int):
        """For each determinized state, the set of (f3, l3) data of member
        product states whose difference is the letter."""
        got = self._letter_cache.get(letter)
        if got is not None:
            return got
        target = self.group.canon(bytes([letter]))
        member_data = []
        for cs, f3, l3, _ in self.product_order:
            d = self.comp_data[cs][0]
            member_data.append((f3, l3) if d == target else None)
        per_state = []
        for subset in self.det_order:
            data = {member_data[s] for s in subset}
            data.discard(None)
            per_state.append(frozenset(data))
        got = tuple(per_state)
        self._letter_cache[letter] = got
        return got

    def acceptor_for(self, letter: int, value: int) -> fsa.Dfa:
        """Minimal DFA for the level set of sigma(., letter) = value."""
        per_state = self._per_letter(letter)
        # product with the (first, last)-letter memory of the word being read
        nl = len(self.alphabet)
        start = (0, None, None, self.acceptor.start)
        acc_dead = [s for s in range(self.acceptor.n_states) if s not in self.acceptor.accepts]
        acc_dead = acc_dead[0] if acc_dead else None
        ids = {start: 0}
        order = [start]
        delta = []
        accepts = set()
        queue = deque([start])
        while queue:
            st = queue.popleft()
            ds, f1, l1, as_ = st
            row = []
            for x in range(nl):
                na = self.acceptor.delta[as_][x]
                if na == acc_dead:
                    row.append(None)
                    continue
                nxt = (self.det_delta[ds][x], f1 if f1 is not None else x, x, na)
                if nxt not in ids:
                    ids[nxt] = len(order)
                    order.append(nxt)
                    queue.append(nxt)
                row.append(ids[nxt])
            delta.append(row)
        dead = len(order)
        rows = [[dead if t is None else t for t in row] for row in delta]
        rows.append([dead] * nl)
        for i, (ds, f1, l1, as_) in enumerate(order):
            for f3, l3 in per_state[ds]:
                if sigma_of_boundary_letters(self.cocycle, f1, l1, f3, l3, letter) == value:
                    accepts.add(i)
                    break
        return fsa.minimize(fsa.Dfa(self.alphabet, rows, 0, accepts))


_projection_cache: dict = {}


def level_projection(cocycle: SurfaceCocycle, ball: CayleyBall, radius=None) -> _LevelProjection:
    diffs = difference_closure(cocycle, ball, radius)
    key = (cocycle.genus, diffs)
    got = _projection_cache.get(key)
    if got is None:
        got = _projection_cache[key] = _LevelProjection(cocycle.group, cocycle, diffs)
    return got


def annotated_multiplier(cocycle: SurfaceCocycle, ball: CayleyBall, letter: int, radius=None):
    """Letter comparator over the closed difference set, with boundary data.

    Returns the two-tape DFA (accepts: difference equal to the letter) and
    the per-state boundary tuples; retained for direct use and tests, the
    level-set pipeline shares the cached projection instead.
    """
    diffs = difference_closure(cocycle, ball, radius)
    group = cocycle.group
    comparator, data = closure_comparator(group, diffs)
    target = group.canon(bytes([letter]))
    accepts = {s for s, (d, f1, f2) in enumerate(data) if d == target}
    return (
        fsa.Dfa(comparator.alphabet, comparator.delta, comparator.start, accepts),
        data,
    )


def level_set(
    cocycle: SurfaceCocycle,
    ball: CayleyBall,
    letter: int,
    value: int,
    sweeps: BallSweeps | None = None,
    acceptor: fsa.Dfa | None = None,
    check_stability: bool = True,
) -> LevelSetAcceptor:
    """In-ball level set of sigma(., x) = a plus a synthesized acceptor.

    The acceptor is the tape-1 projection of the closure comparator crossed
    with the boundary classifier and the tape-2 canonical-word acceptor,
    with accept states chosen by the closed-form boundary value, then
    determinized, minimized, and intersected with the canonical-word
    acceptor.  Ball data enters only through the difference closure, so the
    stabilization flag compares the difference sets (and hence the machines)
    of the two largest radii.
    """
    sweeps = sweeps or BallSweeps(cocycle, ball)
    elements = sweeps.right_level_sets(letter).get(value, [])
    proj = level_projection(cocycle, ball, ball.radius)
    dfa = proj.acceptor_for(letter, value)
    if acceptor is not None:
        dfa = fsa.minimize(fsa.intersection(dfa, acceptor))
    stabilized = None
    if check_stability and ball.radius >= 2:
        smaller = level_projection(cocycle, ball, ball.radius - 1)
        if smaller.diffs == proj.diffs:
            stabilized = True
        else:
            other = smaller.acceptor_for(letter, value)
            if acceptor is not None:
                other = fsa.minimize(fsa.intersection(other, acceptor))
            stabilized = other == dfa
    return LevelSetAcceptor(letter, value, dfa, stabilized, elements)


def level_set_elements_exact(sweeps: BallSweeps, letter: int, value: int) -> set[int]:
    return set(sweeps.right_level_sets(letter).get(value, []))


def level_set_general(
    cocycle: SurfaceCocycle,
    ball: CayleyBall,
    h_word: bytes,
    value: int,
    domain_radius: int | None = None,
) -> set[int]:
    """Elements g in the safe domain with sigma(g, h) = value.

    Assembled recursively along the canonical word of h from the cocycle
    relation: the h-level set is a finite union, over value splittings, of
    intersections of a single-letter level set with a right translate of a
    shorter level set.  The safe domain is the ball of radius R - len(h), so
    every translate stays inside the ball; a longer h raises with the radius
    it would need.
    """
    group = cocycle.group
    h_word = group.canon(h_word)
    if domain_radius is None:
        domain_radius = ball.radius - len(h_word)
    if domain_radius < 0 or domain_radius + len(h_word) > ball.radius:
        raise InsufficientRadiusError(
            "level sets for |h|=%d need ball radius >= %d"
            % (len(h_word), len(h_word) + max(domain_radius, 0)),
            required_radius=len(h_word) + max(domain_radius, 0),
        )
    domain = ball.elements_within(domain_radius)
    ker = cocycle.kernel
    if len(h_word) <= 1:
        return {
            gid for gid in domain if ker.sigma_pair(ball.words[gid], h_word)[0] == value
        }
    h1, h2 = h_word[:1], h_word[1:]
    s12 = cocycle.value(h1, h2)
    a1_set = {ker.sigma_pair(ball.words[gid], h1)[0] for gid in domain}
    result: set[int] = set()
    for a1 in sorted(a1_set):
        a2 = value + s12 - a1  # trivial action on the integer fiber
        s_h1 = {gid for gid in domain if ker.sigma_pair(ball.words[gid], h1)[0] == a1}
        inner = level_set_general(cocycle, ball, h2, a2, domain_radius + 1)
        s_h2_translated = {
            gid for gid in domain if ball.step(gid, h1[0]) in inner
        }
        result |= s_h1 & s_h2_translated
    return result


def level_set_direct_sweep(
    cocycle: SurfaceCocycle, ball: CayleyBall, h_word: bytes, value: int
) -> set[int]:
    """Oracle for ``level_set_general``: the direct definition on the same domain."""
    group = cocycle.group
    h_word = group.canon(h_word)
    domain_radius = ball.radius - len(h_word)
    if domain_radius < 0:
        raise InsufficientRadiusError("ball too small", required_radius=len(h_word))
    ker = cocycle.kernel
    return {
        gid
        for gid in ball.elements_within(domain_radius)
        if ker.sigma_pair(ball.words[gid], h_word)[0] == value
    }


# -- tables, identity check, coboundaries -------------------------------------------


class CocycleTable:
    """Partial map (g1, g2) -> coefficients with provenance per entry."""

    def __init__(self, coefficients: Coefficients, action: FiniteAction):
        self.coefficients = coefficients
        self.action = action
        self.entries: dict[tuple[bytes, bytes], tuple] = {}
        self.provenance: dict[tuple[bytes, bytes], str] = {}

    def set(self, w1: bytes, w2: bytes, value, provenance="direct"):
        self.entries[(w1, w2)] = self.coefficients.reduce(value)
        self.provenance[(w1, w2)] = provenance

    def get(self, w1: bytes, w2: bytes):
        got = self.entries.get((w1, w2))
        if got is None:
            raise InsufficientRadiusError(
                "cocycle table has no entry for the requested pair"
            )
        return got

    def __len__(self):
        return len(self.entries)

    @classmethod
    def from_function(cls, fn, pairs, coefficients, action, provenance="direct"):
        table = cls(coefficients, action)
        for w1, w2 in pairs:
            table.set(w1, w2, fn(w1, w2), provenance)
        return table

    def to_jsonl(self, group: SurfaceGroup) -> str:
        lines = []
        for (w1, w2), val in sorted(self.entries.items()):
            lines.append(
                json.dumps(
                    {
                        "g1": group.format(w1),
                        "g2": group.format(w2),
                        "sigma": list(val),
                        "provenance": self.provenance[(w1, w2)],
                    }
                )
            )
        return "\n".join(lines) + "\n"


def cocycle_identity_check(sigma, action: FiniteAction, triples, group: SurfaceGroup) -> dict:
    """Exact twisted-identity check over explicit triples.

    ``sigma(w1, w2)`` returns a coefficient tuple.  The identity is

        act(sigma(g1,g2), g3) + sigma(g1 g2, g3)
            == sigma(g2,g3) + sigma(g1, g2 g3).
    """
    coeff = action.coefficients
    witnesses = []
    checked = 0
    for g1, g2, g3 in triples:
        g12 = group.mul(g1, g2)
        g23 = group.mul(g2, g3)
        lhs = coeff.add(action.act(sigma(g1, g2), g3), sigma(g12, g3))
        rhs = coeff.add(sigma(g2, g3), sigma(g1, g23))
        checked += 1
        if lhs != rhs:
            witnesses.append(
                {
                    "g1": group.format(g1),
                    "g2": group.format(g2),
                    "g3": group.format(g3),
                    "lhs": list(lhs),
                    "rhs": list(rhs),
                }
            )
            if len(witnesses) >= 10:
                break
    return {"checked": checked, "passed": not witnesses, "witnesses": witnesses}


def coboundary(u, action: FiniteAction, group: SurfaceGroup):
    """The cocycle of a section change: (g1,g2) -> act(u(g1),g2) + u(g2) - u(g1 g2).

    ``u`` maps canonical words to coefficient tuples and must cover every
    element the caller evaluates at.
    """
    coeff = action.coefficients

    def delta(w1: bytes, w2: bytes):
        w12 = group.mul(w1, w2)
        for w in (w1, w2, w12):
            if w not in u:
                raise InsufficientRadiusError("section change undefined at %r" % (w,))
        return coeff.sub(coeff.add(action.act(u[w1], w2), u[w2]), u[w12])

    return delta


def coboundary_adjust(table: CocycleTable, u, group: SurfaceGroup) -> CocycleTable:
    """Adjusted table sigma'(g1,g2) = sigma(g1,g2) + coboundary(u)."""
    delta = coboundary(u, table.action, group)
    out = CocycleTable(table.coefficients, table.action)
    for (w1, w2), val in table.entries.items():
        out.set(
            w1,
            w2,
            table.coefficients.add(val, delta(w1, w2)),
            provenance=table.provenance[(w1, w2)] + "+coboundary",
        )
    return out


# -- transfer ---------------------------------------------------------------------


class CosetStructure:
    """Finite-index subgroup presented as the kernel of a homomorphism onto a
    finite abelian group Z/m1 x ... x Z/mk.

    ``images`` maps positive letters (even byte values) to image tuples; the
    inverse letters map to the negatives.  Right-coset representatives are
    the shortlex-least words per image, found by breadth-first search, and
    the representative map factors through the finite image, so it needs no
    ball lookups.
    """

    def __init__(self, group: SurfaceGroup, moduli, images):
        self.group = group
        self.moduli = tuple(int(m) for m in moduli)
        if any(m < 1 for m in self.moduli):
            raise ValueError("moduli must be >= 1")
        dim = len(self.moduli)
        self.letter_images = {}
        for letter, img in images.items():
            letter = int(letter)
            img = tuple(int(v) % m for v, m in zip(img, self.moduli))
            if len(img) != dim:
                raise ValueError("image tuple has wrong length")
            if letter % 2 != 0:
                raise ValueError("images are given on positive letters only")
            self.letter_images[letter] = img
        self.index = 1
        for m in self.moduli:
            self.index *= m
        self.representatives = self._find_representatives()

    def image(self, word: bytes) -> tuple:
        out = [0] * len(self.moduli)
        for l in word:
            img = self.letter_images.get(l & ~1)
            if img is None:
                continue
            sign = -1 if l & 1 else 1
            for j, v in enumerate(img):
                out[j] += sign * v
        return tuple(v % m for v, m in zip(out, self.moduli))

    def _find_representatives(self):
        reps = {}
        frontier = [b""]
        reps[self.image(b"")] = b""
        genus = self.group.genus
        while len(reps) < self.index:
            nxt = []
            for w in frontier:
                for x in range(4 * genus):
                    c = self.group.canon(w + bytes([x]))
                    img = self.image(c)
                    if img not in reps:
                        reps[img] = c
                        nxt.append(c)
            if not nxt:
                raise CocycleError("homomorphism is not onto the finite group")
            frontier = nxt
        return reps

    @property
    def coset_reps(self):
        return sorted(self.representatives.values())

    def rep(self, word: bytes) -> bytes:
        return self.representatives[self.image(word)]

    def in_subgroup(self, word: bytes) -> bool:
        return self.image(word) == tuple(0 for _ in self.moduli)


def restrict_to_subgroup(cocycle: SurfaceCocycle, cosets: CosetStructure, coefficients: Coefficients):
    """The subgroup cocycle as a function, integer values embedded in A."""

    def sigma_h(w1: bytes, w2: bytes):
        if not (cosets.in_subgroup(w1) and cosets.in_subgroup(w2)):
            raise CocycleError("restricted cocycle evaluated outside the subgroup")
        return coefficients.from_int(cocycle.value(w1, w2))

    return sigma_h


def transfer(sigma_h, cosets: CosetStructure, action: FiniteAction, pairs, group: SurfaceGroup) -> CocycleTable:
    """Transfer of a subgroup cocycle to the whole group, at cocycle level.

    For right-coset representatives S and representative map r,

        T sigma(g1, g2) =
            sum over y in S of
                act(sigma_h(y g1 r(y g1)^-1, r(y g1) g2 (r(y g1 g2))^-1), y).

    ``sigma_h`` takes canonical words of subgroup elements; a table-backed
    sigma_h raises InsufficientRadiusError when an argument is missing.
    """
    coeff = action.coefficients
    table = CocycleTable(coeff, action)
    reps = cosets.coset_reps
    for g1, g2 in pairs:
        total = coeff.zero
        for y in reps:
            yg1 = group.mul(y, g1)
            r1 = cosets.rep(yg1)
            arg1 = group.mul(yg1, group.inv(r1))
            yg1g2 = group.mul(yg1, g2)
            r2 = cosets.rep(yg1g2)
            arg2 = group.mul(group.mul(r1, g2), group.inv(r2))
            if not (cosets.in_subgroup(arg1) and cosets.in_subgroup(arg2)):
                raise CocycleError("transfer argument left the subgroup")
            total = coeff.add(total, action.act(sigma_h(arg1, arg2), y))
        table.set(g1, g2, total, provenance="transfer")
    return table
