"""Pure-Python word kernel for surface groups.

The kernel owns the hot word-level operations: free reduction, Dehn
reduction (with an optional trace of relator applications), shortlex
canonical forms via the exact-half-relator swap closure, geodesic
representative enumeration, turn sums, and the integer cocycle value of a
pair of words.  The compiled twin in ``_wordcore_c.pyx`` mirrors this API
exactly; ``words.get_kernel`` picks one at import time.

Conventions: words are ``bytes`` of letters 0..4g-1 with ``inverse = l ^ 1``;
the relator has length 4g, so any freely reduced word containing a relator
window of length 2g+1 can be shortened, and geodesic representatives of one
element differ by swaps of exact-half windows (length 2g).
"""

from __future__ import annotations


class WordProblemError(RuntimeError):
    """A word expected to define the identity failed to Dehn-reduce to it."""


def _free_reduce(word):
    out = bytearray()
    for l in word:
        if out and out[-1] == l ^ 1:
            out.pop()
        else:
            out.append(l)
    return bytes(out)


class PureKernel:
    implementation = "pure"

    def __init__(self, genus, relator_word, turn_flat):
        self.genus = genus
        self.nletters = 4 * genus
        self.half = 2 * genus
        self.window = 2 * genus + 1
        self.relator = bytes(relator_word)
        self.relator_charge = 8 * genus * (genus - 1)
        self.turns = tuple(turn_flat)

        # sign +1 conjugates are rotations of r, sign -1 rotations of r^-1
        conjugates = []
        r = self.relator
        rinv = bytes(l ^ 1 for l in reversed(r))
        for base, sign in ((r, 1), (rinv, -1)):
            dbl = base + base
            for i in range(len(base)):
                conjugates.append((dbl[i : i + len(base)], sign))
        self.conjugates = tuple(conjugates)

        self.dehn_table = {}
        self.swap_table = {}
        for idx, (cw, _sign) in enumerate(conjugates):
            win = cw[: self.window]
            repl = bytes(l ^ 1 for l in reversed(cw[self.window :]))
            if win in self.dehn_table:
                raise AssertionError("relator windows are not unique")
            self.dehn_table[win] = (repl, idx)
            hwin = cw[: self.half]
            hrepl = bytes(l ^ 1 for l in reversed(cw[self.half :]))
            if hwin in self.swap_table:
                raise AssertionError("half-relator windows are not unique")
            self.swap_table[hwin] = hrepl

    # -- basic reductions ---------------------------------------------------

    def free_reduce(self, word):
        return _free_reduce(word)

    def dehn_reduce(self, word):
        """Freely reduce and replace every longer-than-half relator window."""
        w, _ = self._dehn(word, None)
        return w

    def dehn_reduce_traced(self, word):
        """Dehn reduction recording each relator application.

        Returns ``(reduced, trace)`` where trace entries are
        ``(prefix, conjugate_index, sign)``: at the time of application the
        current word was ``prefix + window + rest`` and equals, in the free
        group, ``(prefix . conjugate . prefix^-1) * (next word)``.
        """
        trace = []
        w, _ = self._dehn(word, trace)
        return w, trace

    def relator_count(self, word):
        """Signed number of relator applications Dehn reduction uses to kill
        ``word``; raises if the word is not trivial in the group."""
        w, n = self._dehn(word, "count")
        if w:
            raise WordProblemError("word does not represent the identity")
        return n

    def _dehn(self, word, trace):
        w = _free_reduce(word)
        win = self.window
        table = self.dehn_table
        count = 0
        changed = True
        while changed and len(w) >= win:
            changed = False
            for i in range(len(w) - win + 1):
                hit = table.get(w[i : i + win])
                if hit is not None:
                    repl, idx = hit
                    sign = self.conjugates[idx][1]
                    if trace == "count":
                        count += sign
                    elif trace is not None:
                        trace.append((w[:i], idx, sign))
                    w = _free_reduce(w[:i] + repl + w[i + win :])
                    changed = True
                    break
        return w, count

    def is_trivial(self, word):
        return not self.dehn_reduce(word)

    # -- canonical forms ----------------------------------------------------

    def canonicalize(self, word):
        """Shortlex-least geodesic representative of the word's element.

        Dehn reduction reaches geodesic length; the closure under exact-half
        relator swaps then enumerates the geodesic representatives, of which
        the bytewise-least is returned.  A swap exposing a further shortening
        would mean the closure started below geodesic length, so the search
        restarts from the shorter word.
        """
        w = self.dehn_reduce(word)
        while True:
            shorter = None
            best = w
            seen = {w}
            stack = [w]
            half = self.half
            swaps = self.swap_table
            while stack:
                u = stack.pop()
                for i in range(len(u) - half + 1):
                    repl = swaps.get(u[i : i + half])
                    if repl is None:
                        continue
                    v = _free_reduce(u[:i] + repl + u[i + half :])
                    if len(v) < len(u):
                        shorter = v
                        break
                    if v not in seen:
                        seen.add(v)
                        stack.append(v)
                        if v < best:
                            best = v
                if shorter is not None:
                    break
            if shorter is None:
                return best
            w = self.dehn_reduce(shorter)

    def geodesic_reps(self, word):
        """All geodesic representatives of the word's element, sorted."""
        w = self.dehn_reduce(word)
        while True:
            seen = {w}
            stack = [w]
            shorter = None
            half = self.half
            swaps = self.swap_table
            while stack:
                u = stack.pop()
                for i in range(len(u) - half + 1):
                    repl = swaps.get(u[i : i + half])
                    if repl is None:
                        continue
                    v = _free_reduce(u[:i] + repl + u[i + half :])
                    if len(v) < len(u):
                        shorter = v
                        break
                    if v not in seen:
                        seen.add(v)
                        stack.append(v)
                if shorter is not None:
                    break
            if shorter is None:
                return sorted(seen)
            w = self.dehn_reduce(shorter)

    # -- turn sums and the cocycle -------------------------------------------

    def turn_sum(self, word):
        """Sum of the integer turns at the interior vertices of the path."""
        t = self.turns
        n = self.nletters
        s = 0
        for i in range(len(word) - 1):
            s += t[word[i] * n + word[i + 1]]
        return s

    def sigma_pair(self, w1, w2):
        """Cocycle value for the pair of canonical words, and their product.

        Returns ``(sigma, w3)`` with w3 the canonical form of w1*w2 and
        sigma = k*N + n(w3) - n(w1) - n(w2), where N is the signed relator
        count of the closed path w1 w2 w3^-1 and n the turn sum.
        """
        w3 = self.canonicalize(w1 + w2)
        loop = w1 + w2 + bytes(l ^ 1 for l in reversed(w3))
        n = self.relator_count(loop)
        sigma = (
            self.relator_charge * n
            + self.turn_sum(w3)
            - self.turn_sum(w1)
            - self.turn_sum(w2)
        )
        return sigma, w3
