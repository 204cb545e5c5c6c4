"""Combinatorial angle machinery and its floating-point hyperbolic oracle.

A vertex of the 4g-gon tessellation carries 4g wedges of angle pi/2g; the
cyclic order of the edge directions around a vertex is derived from the
corner structure of the relator.  All quantities the package relies on
(turn sums, turning numbers, signed relator counts) are integers computed
from that table; the upper-half-plane isometry model in this module is the
independent check: every integer is re-derived from coordinates and must
agree to tight tolerances.

Orientation convention: the positively oriented relator loop is
counterclockwise, has turning number +1, and encloses area +(4g-4)pi.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .words import get_kernel, letter_names, link_cycle, relator, turn_table


class GeometryError(RuntimeError):
    pass


class ConditioningError(GeometryError):
    """Floating-point evaluation degraded beyond tolerance at some vertex."""

    def __init__(self, message, vertex=None):
        super().__init__(message)
        self.vertex = vertex


@dataclass(frozen=True)
class VertexLink:
    """Cyclic order of the 4g edge labels around a tessellation vertex."""

    genus: int
    cycle: tuple[int, ...]

    @property
    def wedge_angle(self) -> float:
        return math.pi / (2 * self.genus)

    def validate(self):
        n = 4 * self.genus
        if len(self.cycle) != n or set(self.cycle) != set(range(n)):
            raise GeometryError("link is not a single cycle over all edges")
        if abs(n * self.wedge_angle - 2 * math.pi) > 1e-12:
            raise GeometryError("wedge angles do not close up to 2 pi")


@dataclass(frozen=True)
class TurnTable:
    """Integer turn multiples of pi/2g for (incoming, outgoing) letter pairs."""

    genus: int
    flat: tuple[int, ...]

    def turn(self, incoming: int, outgoing: int) -> int:
        return self.flat[incoming * 4 * self.genus + outgoing]

    def angle(self, incoming: int, outgoing: int) -> float:
        return self.turn(incoming, outgoing) * math.pi / (2 * self.genus)

    def turn_sum(self, word: bytes) -> int:
        n = 4 * self.genus
        return sum(self.flat[word[i] * n + word[i + 1]] for i in range(len(word) - 1))


def vertex_link(genus: int) -> tuple[VertexLink, TurnTable]:
    """The link cycle and turn table of the tessellation vertex."""
    link = VertexLink(genus, link_cycle(genus))
    link.validate()
    table = TurnTable(genus, turn_table(genus))
    for x in range(4 * genus):
        if table.turn(x, x ^ 1) != 2 * genus:
            raise GeometryError("backtrack turn is not pi")
    return link, table


# -- the upper half-plane model ----------------------------------------------


def _mobius(m, z):
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    return (a * z + b) / (c * z + d)


def _rotation(theta):
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, s], [-s, c]], dtype=float)


def _translation_up(t):
    e = math.exp(t / 2.0)
    return np.array([[e, 0.0], [0.0, 1.0 / e]], dtype=float)


def _translation(direction, t):
    r = _rotation(direction - math.pi / 2.0)
    return r @ _translation_up(t) @ np.linalg.inv(r)


def hyperbolic_distance(z, w) -> float:
    num = abs(z - w) ** 2
    den = 2.0 * z.imag * w.imag
    if den <= 0:
        raise ConditioningError("point left the upper half-plane")
    return math.acosh(1.0 + num / den)


def direction_toward(z, w) -> float:
    """Euclidean angle at z of the geodesic from z toward w (conformal model)."""
    if abs(z - w) == 0:
        raise GeometryError("direction between coincident points")
    if abs(z.real - w.real) < 1e-13 * max(1.0, abs(z), abs(w)):
        return math.pi / 2.0 if w.imag > z.imag else -math.pi / 2.0
    center = (abs(w) ** 2 - abs(z) ** 2) / (2.0 * (w.real - z.real))
    tangent = 1j * (z - center)
    if w.real < z.real:
        return cmath.phase(tangent)
    return cmath.phase(-tangent)


def _wrap(angle: float) -> float:
    """Principal value in (-pi, pi]."""
    a = math.fmod(angle, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


class IsometryModel:
    """Side-pairing isometries of the regular 4g-gon, one SL(2,R) matrix per
    letter, acting on the upper half-plane with the identity vertex at i.

    The circumradius of the regular 4g-gon with vertex angle pi/2g is found
    by bisecting the right-triangle relation; the edge length follows from
    the hyperbolic sine rule.  Out-edges at the base vertex leave at angles
    pos(letter) * pi/2g following the vertex link, which makes every
    combinatorial turn integer agree with the measured angle.
    """

    def __init__(self, genus: int, tol: float = 1e-12):
        self.genus = genus
        self.base = 1j
        n = 4 * genus
        alpha = math.pi / n  # half the central angle, also half the vertex angle

        def vertex_angle(rho):
            return 2.0 * math.atan(1.0 / (math.cosh(rho) * math.tan(alpha)))

        lo, hi = 1e-9, 50.0
        target = math.pi / (2 * genus)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if vertex_angle(mid) > target:
                lo = mid
            else:
                hi = mid
            if hi - lo < tol:
                break
        self.circumradius = 0.5 * (lo + hi)
        self.side_length = 2.0 * math.asinh(math.sinh(self.circumradius) * math.sin(alpha))

        pos = {l: k for k, l in enumerate(link_cycle(genus))}
        self.edge_angle = {l: pos[l] * math.pi / (2 * genus) for l in range(n)}
        mats = []
        for x in range(n):
            rot = _rotation(self.edge_angle[x] + math.pi - self.edge_angle[x ^ 1])
            tra = _translation(self.edge_angle[x], self.side_length)
            mats.append(tra @ rot)
        self.matrices = tuple(mats)
        for m in self.matrices:
            m.setflags(write=False)
        self._turns = TurnTable(genus, turn_table(genus))
        self.validate()

    # -- paths -----------------------------------------------------------------

    def matrix_of_word(self, word: bytes):
        m = np.eye(2)
        for l in word:
            m = m @ self.matrices[l]
        return m

    def apply_word(self, word: bytes, z=None):
        return _mobius(self.matrix_of_word(word), self.base if z is None else z)

    def path_points(self, word: bytes):
        pts = [self.base]
        m = np.eye(2)
        for l in word:
            m = m @ self.matrices[l]
            pts.append(_mobius(m, self.base))
        return pts

    # -- validation --------------------------------------------------------------

    def validate(self, tol: float = 1e-9):
        close = lambda p, q: abs(p - q) < tol
        r = relator(self.genus)
        mr = self.matrix_of_word(r)
        if not (np.allclose(mr, np.eye(2), atol=tol) or np.allclose(mr, -np.eye(2), atol=tol)):
            raise GeometryError("relator does not evaluate to +-identity")
        for x in range(4 * self.genus):
            mi = self.matrices[x] @ self.matrices[x ^ 1]
            if not (np.allclose(mi, np.eye(2), atol=tol) or np.allclose(mi, -np.eye(2), atol=tol)):
                raise GeometryError("letter and inverse do not compose to +-identity")
            # side pairing: x maps the edge {x^-1 vertex, base} onto {base, x vertex}
            src_far = _mobius(self.matrices[x ^ 1], self.base)
            if not close(_mobius(self.matrices[x], src_far), self.base):
                raise GeometryError("side pairing fails for letter %d" % x)
            if abs(hyperbolic_distance(self.base, _mobius(self.matrices[x], self.base)) - self.side_length) > 1e-9:
                raise GeometryError("edge length mismatch for letter %d" % x)
        # orientation: the relator loop must close counterclockwise, +1 turn
        area = self.signed_area(r)
        expected = (4 * self.genus - 4) * math.pi
        if abs(area - expected) > 1e-6:
            raise GeometryError(
                "relator loop area %.9f, expected %.9f; orientation broken" % (area, expected)
            )

    # -- the numeric oracle ---------------------------------------------------------

    def numeric_turns(self, word: bytes):
        """Measured angles at the interior vertices of the open path.

        Backtracks turn by exactly +pi by convention (their measured value is
        sign-ambiguous); everything else comes from coordinates.
        """
        pts = self.path_points(word)
        out = []
        for t in range(1, len(word)):
            if word[t] == word[t - 1] ^ 1:
                out.append(math.pi)
                continue
            incoming = direction_toward(pts[t], pts[t - 1]) + math.pi
            outgoing = direction_toward(pts[t], pts[t + 1])
            out.append(_wrap(outgoing - incoming))
        return out

    def closing_turn(self, word: bytes):
        """Angle from the last edge back to the first for a closed path."""
        if not word:
            raise GeometryError("closing turn of the empty path")
        if word[0] == word[-1] ^ 1:
            return math.pi
        pts = self.path_points(word)
        incoming = direction_toward(pts[-1], pts[-2]) + math.pi
        outgoing = direction_toward(pts[-1], pts[1])
        return _wrap(outgoing - incoming)

    def snap_turn(self, angle: float, tol: float = 1e-6) -> int:
        """Nearest integer multiple of pi/2g, with residual enforcement."""
        unit = math.pi / (2 * self.genus)
        m = round(angle / unit)
        if abs(angle - m * unit) > tol:
            raise ConditioningError(
                "angle %.9f is %.3g away from a pi/%d multiple"
                % (angle, abs(angle - m * unit), 2 * self.genus)
            )
        return int(m)

    def signed_area(self, word: bytes) -> float:
        """Signed area enclosed by a closed path, by fan triangulation from
        the base point; counterclockwise positive, multiplicities counted."""
        pts = self.path_points(word)
        if abs(pts[-1] - pts[0]) > 1e-7 * max(1.0, abs(pts[-1])):
            raise GeometryError("signed area of a non-closed path")
        total = 0.0
        for t in range(len(pts) - 1):
            total += _triangle_area(self.base, pts[t], pts[t + 1])
        return total

    def edge_rotation(self, z, w) -> float:
        """Euclidean rotation of the tangent along the geodesic from z to w."""
        start = direction_toward(z, w)
        end = _wrap(direction_toward(w, z) + math.pi)
        return _wrap(end - start)

    def turning_number(self, word: bytes, tol: float = 1e-6) -> int:
        """Winding of the tangent around a closed path, tracked continuously.

        Sums the Euclidean tangent rotation along each edge and the corner
        turns (interior and closing); the total must be within tolerance of
        an integer multiple of 2 pi.
        """
        pts = self.path_points(word)
        if not word:
            return 0
        if abs(pts[-1] - pts[0]) > 1e-7 * max(1.0, abs(pts[-1])):
            raise GeometryError("turning number of a non-closed path")
        total = 0.0
        for t in range(len(word)):
            total += self.edge_rotation(pts[t], pts[t + 1])
        total += sum(self.numeric_turns(word))
        total += self.closing_turn(word)
        tau = round(total / (2.0 * math.pi))
        if abs(total - tau * 2.0 * math.pi) > tol:
            raise ConditioningError(
                "tangent winding %.9f is not an integer multiple of 2 pi" % total
            )
        return int(tau)


def _triangle_area(p, q, r) -> float:
    """Signed area of the hyperbolic geodesic triangle, angle-defect formula."""
    eps = 1e-12
    if abs(p - q) < eps or abs(q - r) < eps or abs(r - p) < eps:
        return 0.0
    a = _wrap(direction_toward(p, r) - direction_toward(p, q))
    b = _wrap(direction_toward(q, p) - direction_toward(q, r))
    c = _wrap(direction_toward(r, q) - direction_toward(r, p))
    if abs(a) < 1e-10 or abs(abs(a) - math.pi) < 1e-10:
        return 0.0
    sign = 1.0 if a > 0 else -1.0
    defect = math.pi - abs(a) - abs(b) - abs(c)
    if defect < -1e-8:
        raise ConditioningError("negative angle defect %.3g" % defect)
    return sign * max(defect, 0.0)


@lru_cache(maxsize=None)
def get_model(genus: int) -> IsometryModel:
    return IsometryModel(genus)


# -- loop analysis ------------------------------------------------------------


@dataclass(frozen=True)
class LoopAnalysis:
    """Integer invariants of a closed path, with their numeric witnesses.

    ``turn_sum`` is over interior vertices only; ``closing_turn`` is kept
    separate.  The integer identity

        turn_sum + closing_turn = 8g(g-1) * relator_count + 4g * turning_number

    is enforced exactly, and the signed area must equal
    4(g-1) pi * relator_count.
    """

    genus: int
    word: bytes
    turn_sum: int
    closing_turn: int
    relator_count: int
    turning_number: int
    area: float

    @property
    def identity_residual(self) -> int:
        g = self.genus
        return (
            self.turn_sum
            + self.closing_turn
            - 8 * g * (g - 1) * self.relator_count
            - 4 * g * self.turning_number
        )

    def to_json(self) -> dict:
        from .words import format_word

        return {
            "word": format_word(self.word, self.genus),
            "turn_sum": self.turn_sum,
            "closing_turn": self.closing_turn,
            "relator_count": self.relator_count,
            "turning_number": self.turning_number,
            "area": self.area,
            "identity_residual": self.identity_residual,
        }


def numeric_oracle(word: bytes, model: IsometryModel) -> dict:
    """Per-vertex measured angles, signed area, and tangent winding.

    Angles are checked against pi/2g multiples; reports the offending vertex
    on conditioning failure.
    """
    if len(word) > 64:
        raise GeometryError("paths longer than 64 edges are not supported")
    turns = model.numeric_turns(word)
    snapped = []
    for t, angle in enumerate(turns):
        try:
            snapped.append(model.snap_turn(angle))
        except ConditioningError as exc:
            raise ConditioningError(str(exc), vertex=t + 1) from exc
    closed = bool(not word or abs(model.apply_word(word) - model.base) < 1e-7)
    out = {
        "angles": turns,
        "snapped": snapped,
        "closed": closed,
    }
    if closed and word:
        out["area"] = model.signed_area(word)
        out["turning_number"] = model.turning_number(word)
        out["closing_turn"] = model.snap_turn(model.closing_turn(word))
    return out


def analyze_loop(word: bytes, model: IsometryModel) -> LoopAnalysis:
    """Integer invariants of a closed word, every route cross-checked.

    The relator count comes from the Dehn trace, the turn sums from the
    integer table, the turning number and area from the numeric model; the
    integer turn identity must hold exactly and the area must match the
    relator count times the polygon area.
    """
    kernel = get_kernel(model.genus)
    if not kernel.is_trivial(word):
        raise GeometryError("loop analysis requires a closed word")
    if not word:
        return LoopAnalysis(model.genus, b"", 0, 0, 0, 0, 0.0)
    g = model.genus
    n = kernel.turn_sum(word)
    table = TurnTable(g, kernel.turns)
    closing = table.turn(word[-1], word[0])
    count = kernel.relator_count(word)
    tau = model.turning_number(word)
    area = model.signed_area(word)
    analysis = LoopAnalysis(g, bytes(word), n, closing, count, tau, area)
    if analysis.identity_residual != 0:
        raise GeometryError(
            "turn identity fails on %r: residual %d" % (word, analysis.identity_residual)
        )
    if abs(area - 4 * (g - 1) * math.pi * count) > 1e-6:
        raise GeometryError(
            "area %.9f does not match relator count %d" % (area, count)
        )
    # numeric turns must snap onto the integer table, vertex by vertex
    for t, angle in enumerate(model.numeric_turns(word)):
        if model.snap_turn(angle) != table.turn(word[t], word[t + 1]):
            raise GeometryError("turn mismatch at vertex %d of %r" % (t + 1, word))
    return analysis
