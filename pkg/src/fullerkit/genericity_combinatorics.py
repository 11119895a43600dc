"""Relation algebra, accumulation-step bookkeeping and the order bound.

Three layers live here:

* ``RelationExpr``: integer polynomials in the "simple relations" S_I, one
  formal variable per bracket word, with a Poisson bracket defined on leaves
  by word concatenation ({S_I, S_J} = S_(IJ)) and extended by bilinearity
  and Leibniz.  The determinant recursion Q_r is built from these.
* ``accumulation_branches``: structural successor states available at an
  accumulation step (one new simple relation, one new polynomial relation,
  or two new simple relations with polynomial reset).  Only the bookkeeping
  is tracked; no analytic hypotheses are checked.
* ``longest_admissible`` / ``fuller_bound``: the lattice dynamics on
  (simple count, polynomial count) whose longest path inside the triangle
  x1 + x2 <= 2n - 1 yields the (n-1)^2 bound on the accumulation order.

Pointwise classifiers for 3-D systems (the A1..A6 / W / C sets and the
collinear degeneracy tests) are at the bottom.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .bracket_algebra import (
    BracketCache,
    BracketWord,
    PolyVectorField,
    WordLike,
    ad_power,
    as_word,
    eval_at,
    eval_word_field,
    pairing,
    two_frame_minors,
    wedge_det,
)

__all__ = [
    "RelationExpr",
    "simple_relation",
    "poisson",
    "build_q_relation",
    "eval_relation",
    "AccumulationState",
    "initial_accumulation_state",
    "accumulation_branches",
    "AdmissibleCurve",
    "longest_admissible",
    "BoundResult",
    "fuller_bound",
    "PointClass",
    "classify_point_3d",
    "CollinearDegeneracy",
    "collinear_degeneracy_test",
    "collinear_order_chain",
    "BranchReport",
    "fourth_order_branch_test",
]

# A monomial is a sorted tuple of word strings; an expression maps monomials
# to integer coefficients.
Monomial = tuple[str, ...]


def _word_key(text: str) -> tuple[int, ...]:
    return BracketWord(text).sort_key()


def _mono_sorted(words: Sequence[str]) -> Monomial:
    return tuple(sorted(words, key=_word_key))


class RelationExpr:
    """Integer polynomial in simple-relation variables, kept expanded.

    The canonical form is a map from monomials (multisets of bracket words)
    to integer coefficients, with a fixed word order (lexicographic under
    0 < 1 < + < -), so equal expressions compare equal structurally.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: dict[Monomial, int] | None = None):
        clean: dict[Monomial, int] = {}
        if terms:
            for mono, coeff in terms.items():
                if coeff == 0:
                    continue
                mono = _mono_sorted(mono)
                c = clean.get(mono, 0) + coeff
                if c == 0:
                    clean.pop(mono, None)
                else:
                    clean[mono] = c
        self._terms = clean

    @property
    def terms(self) -> tuple[tuple[Monomial, int], ...]:
        """Monomials with coefficients, sorted by (degree, word keys)."""
        return tuple(
            (m, self._terms[m])
            for m in sorted(
                self._terms, key=lambda m: (len(m), tuple(_word_key(w) for w in m))
            )
        )

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, words: Sequence[str]) -> int:
        return self._terms.get(_mono_sorted(words), 0)

    def leaves(self) -> set[str]:
        """All word variables that occur in the expression."""
        return {w for mono in self._terms for w in mono}

    def __eq__(self, other) -> bool:
        if not isinstance(other, RelationExpr):
            return NotImplemented
        return self._terms == other._terms

    def __add__(self, other: "RelationExpr") -> "RelationExpr":
        out = dict(self._terms)
        for mono, coeff in other._terms.items():
            c = out.get(mono, 0) + coeff
            if c == 0:
                out.pop(mono, None)
            else:
                out[mono] = c
        return RelationExpr(out)

    def __sub__(self, other: "RelationExpr") -> "RelationExpr":
        return self + (-other)

    def __neg__(self) -> "RelationExpr":
        return RelationExpr({m: -c for m, c in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, int):
            return RelationExpr({m: c * other for m, c in self._terms.items()})
        out: dict[Monomial, int] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                mono = _mono_sorted(m1 + m2)
                c = out.get(mono, 0) + c1 * c2
                if c == 0:
                    out.pop(mono, None)
                else:
                    out[mono] = c
        return RelationExpr(out)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        if self.is_zero():
            return "0"
        parts = []
        for mono, coeff in self.terms:
            body = "*".join(f"S[{w}]" for w in mono) or "1"
            parts.append(f"{coeff:+d}*{body}")
        return " ".join(parts)


def simple_relation(word: WordLike) -> RelationExpr:
    return RelationExpr({(as_word(word).letters,): 1})


def poisson(a: RelationExpr, b: RelationExpr) -> RelationExpr:
    """Poisson bracket: {S_I, S_J} = S_(IJ) on leaves, Leibniz on products."""
    out = RelationExpr()
    for m1, c1 in a._terms.items():
        for m2, c2 in b._terms.items():
            coeff = c1 * c2
            for i, w1 in enumerate(m1):
                rest1 = m1[:i] + m1[i + 1 :]
                for j, w2 in enumerate(m2):
                    rest2 = m2[:j] + m2[j + 1 :]
                    mono = _mono_sorted(rest1 + rest2 + (w1 + w2,))
                    out = out + RelationExpr({mono: coeff})
    return out


def build_q_relation(r: int, word_prev: WordLike, word_last: WordLike) -> RelationExpr:
    """Determinant-recursion relation Q_r for the word pair (prev, last).

    Q_1 = det [[{S_0, S_last}, {S_1, S_last}], [{S_0, S_prev}, {S_1, S_prev}]]
    and Q_r replaces the second row by ({S_0, Q_{r-1}}, {S_1, Q_{r-1}}).
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    s0, s1 = simple_relation("0"), simple_relation("1")
    last = simple_relation(word_last)
    row0 = (poisson(s0, last), poisson(s1, last))
    q = row0[0] * poisson(s1, simple_relation(word_prev)) - row0[1] * poisson(
        s0, simple_relation(word_prev)
    )
    for _ in range(r - 1):
        q = row0[0] * poisson(s1, q) - row0[1] * poisson(s0, q)
    return q


def eval_relation(expr: RelationExpr, lam: Sequence, q: Sequence, cache: BracketCache):
    """Evaluate an expression by substituting S_I -> <lam, f_I(q)>.

    Exact (Fraction) when lam and q are rational, floating point otherwise.
    """
    total = None
    exact = all(isinstance(x, (int, Fraction)) for x in list(lam) + list(q))
    for mono, coeff in expr._terms.items():
        term = Fraction(coeff) if exact else float(coeff)
        for word in mono:
            value = pairing(lam, cache.eval(word, q, "exact" if exact else "float"))
            term = term * value
        total = term if total is None else total + term
    if total is None:
        return Fraction(0) if exact else 0.0
    return total


# ---------------------------------------------------------------------------
# accumulation-step bookkeeping


@dataclass(frozen=True)
class AccumulationState:
    """Vanishing-relation bookkeeping at an accumulation point.

    ``simple`` lists the words of vanishing simple relations in the order
    they were derived; ``poly_count`` counts the active determinant
    relations.  ``phase`` is 'jets' when the last two words are (J, sJ) for
    a sign s, 'codim' when an equal-degree pair equivalent to ((0J), (1J))
    is available (stored in ``pair``), and 'open' otherwise (no successor
    rule is claimed; pruning is left to the caller).
    """

    simple: tuple[str, ...]
    poly_count: int = 0
    phase: str = "jets"
    pair: tuple[str, str] | None = None
    move: str | None = None

    @property
    def codimension(self) -> int:
        return len(self.simple) + self.poly_count

    @property
    def counts(self) -> tuple[int, int]:
        """The (x1, x2) lattice point this state occupies."""
        return (len(self.simple), self.poly_count)


def initial_accumulation_state(sign: str = "+") -> AccumulationState:
    """State holding at any order->=1 accumulation: h_1 = h_01 = h_{s01} = 0."""
    if sign not in "+-":
        raise ValueError("sign must be '+' or '-'")
    return AccumulationState(simple=("1", "01", sign + "01"), phase="jets")


def _classify(words: tuple[str, ...], pair_hint=None):
    """Phase of a word stack from its last two entries."""
    if pair_hint is not None:
        return "codim", pair_hint
    if len(words) >= 2:
        a, b = words[-2], words[-1]
        if b == "+" + a or b == "-" + a:
            return "jets", None
        if len(a) == len(b) and a[1:] == b[1:]:
            if a[0] == "0" and b[0] == "1":
                return "codim", (a, b)
            # {S_{+J} = 0, S_{-J} = 0} is linearly equivalent to
            # {S_{0J} = 0, S_{1J} = 0}
            if a[0] == "+" and b[0] == "-":
                return "codim", ("0" + a[1:], "1" + a[1:])
    return "open", None


def accumulation_branches(state: AccumulationState) -> list[AccumulationState]:
    """Successor states available after one more accumulation step.

    In the jets phase (last words J, sJ) there are three branches, each a new
    simple relation (an F0 move): s'J, s'sJ and ssJ where s' is the opposite
    sign.  In the codim phase there are two: a new determinant relation (F1)
    or the vanishing of both words (0 I_l), (1 I_l), which retires every
    active determinant relation (F2).
    """
    if state.phase == "jets":
        a, b = state.simple[-2], state.simple[-1]
        sign = b[0]
        if sign not in "+-" or b[1:] != a:
            raise ValueError(f"malformed jets state: last words {a!r}, {b!r}")
        other = "-" if sign == "+" else "+"
        out = []
        for new in (other + a, other + b, sign + b):
            words = state.simple + (new,)
            if new == other + a:
                phase, pair = "codim", ("0" + a, "1" + a)
            else:
                phase, pair = _classify(words)
            out.append(
                AccumulationState(words, state.poly_count, phase, pair, move="F0")
            )
        return out
    if state.phase == "codim":
        if state.pair is None:
            raise ValueError("codim state is missing its word pair")
        _, word_last = state.pair
        f1 = AccumulationState(
            state.simple, state.poly_count + 1, "codim", state.pair, move="F1"
        )
        grown = ("0" + word_last, "1" + word_last)
        f2 = AccumulationState(
            state.simple + grown, 0, "codim", grown, move="F2"
        )
        return [f1, f2]
    raise ValueError(f"no successor rule for phase {state.phase!r}")


# ---------------------------------------------------------------------------
# lattice dynamics and the order bound


@dataclass(frozen=True)
class AdmissibleCurve:
    length: int
    moves: tuple[str, ...]
    points: tuple[tuple[int, int], ...]


_MOVES = {
    "F0": lambda x1, x2: (x1 + 1, x2),
    "F1": lambda x1, x2: (x1, x2 + 1),
    "F2": lambda x1, x2: (x1 + 2, 0),
}


def longest_admissible(n: int) -> AdmissibleCurve:
    """Longest admissible curve from (3, 0) staying in x1 + x2 <= 2n - 1.

    Admissible curves start with a nonempty prefix of F0 moves and continue
    with moves in {F1, F2} only.  The search is exhaustive dynamic
    programming, independent of the closed form (n-2)(n-1).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    budget = 2 * n - 1

    # phase: 0 = no move yet (F0 forced first), 1 = in F0 prefix, 2 = free
    @lru_cache(maxsize=None)
    def best(x1: int, x2: int, phase: int) -> tuple[int, tuple[str, ...]]:
        options = {0: ("F0",), 1: ("F0", "F1", "F2"), 2: ("F1", "F2")}[phase]
        top, top_moves = 0, ()
        for move in options:
            nx1, nx2 = _MOVES[move](x1, x2)
            if nx1 + nx2 > budget:
                continue
            nphase = 1 if move == "F0" else 2
            length, tail = best(nx1, nx2, nphase)
            if 1 + length > top:
                top, top_moves = 1 + length, (move,) + tail
        return top, top_moves

    length, moves = best(3, 0, 0)
    points = [(3, 0)]
    for move in moves:
        points.append(_MOVES[move](*points[-1]))
    return AdmissibleCurve(length, moves, tuple(points))


@dataclass(frozen=True)
class BoundResult:
    longest: int
    K: int
    total: int


def fuller_bound(n: int) -> BoundResult:
    """Accumulation-order bound in dimension n: K + (n - 2) = (n - 1)^2."""
    longest = longest_admissible(n).length
    K = 1 + longest
    total = K + (n - 2)
    if total != (n - 1) ** 2:
        raise RuntimeError(
            f"lattice search disagrees with the closed form at n={n}: {total}"
        )
    return BoundResult(longest, K, total)


# ---------------------------------------------------------------------------
# pointwise classification in dimension 3


_CLASSIFIER_TRIPLES = {
    "1,01,+01": ("1", "01", "+01"),
    "1,01,-01": ("1", "01", "-01"),
    "1,01,++01": ("1", "01", "++01"),
    "1,01,--01": ("1", "01", "--01"),
    "1,01,+++01": ("1", "01", "+++01"),
    "1,01,---01": ("1", "01", "---01"),
    "1,+01,-01": ("1", "+01", "-01"),
    "1,+01,++01": ("1", "+01", "++01"),
    "1,-01,--01": ("1", "-01", "--01"),
}


@dataclass(frozen=True)
class PointClass:
    """Membership flags of a point for the 3-D classification sets.

    a1..a6 are the no-higher-order-accumulation classes, w the doubly
    degenerate frame class, c the collinearity set f0 ^ f1 = 0.  The wedge
    determinants backing the flags are kept for inspection.
    """

    a1: bool
    a2: bool
    a3: bool
    a4: bool
    a5: bool
    a6: bool
    w: bool
    c: bool
    determinants: dict = field(repr=False, default_factory=dict)
    exact: bool = True

    def to_payload(self) -> dict:
        return {
            "A1": self.a1, "A2": self.a2, "A3": self.a3,
            "A4": self.a4, "A5": self.a5, "A6": self.a6,
            "W": self.w, "C": self.c,
            "exact": self.exact,
            "determinants": {
                k: (str(v) if isinstance(v, Fraction) else v)
                for k, v in self.determinants.items()
            },
        }


def _zero_test(values, exact: bool, tol: float):
    """Return a zero-predicate relative to the largest magnitude present."""
    if exact:
        return lambda v: v == 0
    scale = max((abs(float(v)) for v in values), default=0.0)
    cut = tol * scale
    return lambda v: abs(float(v)) <= cut


def classify_point_3d(scenario, q: Sequence, lam=None, tol: float = 1e-9) -> PointClass:
    """Classify a point of a 3-D system by its bracket wedge degeneracies.

    Exact when q is rational.  ``lam`` is accepted for signature parity with
    trajectory-point classification but does not enter the flags, which
    depend on the fields alone.
    """
    f0, f1 = scenario.f0, scenario.f1
    if f0.dim != 3:
        raise ValueError("classification requires a 3-dimensional system")
    cache = BracketCache(f0, f1)
    exact = all(isinstance(x, (int, Fraction)) for x in q)
    mode = "exact" if exact else "float"

    vectors = {
        w: cache.eval(w, q, mode)
        for w in ("1", "01", "+01", "-01", "++01", "--01", "+++01", "---01")
    }
    v0 = eval_at(f0, q, mode)

    triple_dets = {
        label: wedge_det([vectors[a], vectors[b], vectors[c]])
        for label, (a, b, c) in _CLASSIFIER_TRIPLES.items()
    }
    frame_f1_f01 = two_frame_minors(vectors["1"], vectors["01"])
    frame_f0_f1 = two_frame_minors(v0, vectors["1"])
    dets = dict(triple_dets)
    dets["1^01"] = frame_f1_f01
    dets["0^1"] = frame_f0_f1

    is_zero = _zero_test(triple_dets.values(), exact, tol)
    frame_zero = _zero_test(frame_f1_f01 + frame_f0_f1, exact, tol)

    d_p = dets["1,01,+01"]
    d_m = dets["1,01,-01"]
    d_pp = dets["1,01,++01"]
    d_mm = dets["1,01,--01"]
    d_ppp = dets["1,01,+++01"]
    d_mmm = dets["1,01,---01"]
    frame_ok = not all(frame_zero(v) for v in frame_f1_f01)
    collinear = all(frame_zero(v) for v in frame_f0_f1)

    a1 = not is_zero(d_p) and not is_zero(d_m)
    a2 = is_zero(d_p) and not is_zero(d_pp) and not is_zero(d_m)
    a3 = is_zero(d_m) and not is_zero(d_mm) and not is_zero(d_p)
    a4 = is_zero(d_p) and is_zero(d_pp) and not is_zero(d_ppp) and not is_zero(d_m)
    a5 = is_zero(d_m) and is_zero(d_mm) and not is_zero(d_mmm) and not is_zero(d_p)
    a6 = (
        not frame_ok
        and not is_zero(dets["1,+01,-01"])
        and not is_zero(dets["1,+01,++01"])
        and not is_zero(dets["1,-01,--01"])
    )
    w = is_zero(d_p) and is_zero(d_m) and frame_ok

    return PointClass(a1, a2, a3, a4, a5, a6, w, collinear, dets, exact)


@dataclass(frozen=True)
class CollinearDegeneracy:
    """Degeneracy tests where the drift and controlled field align.

    ``in_l_prime``: span{f0, f1, [f0, f1]} at q has dimension <= 1.
    ``in_l_double_prime``: f1(q) != 0, f0(q) = a f1(q), and the frame
    f1, ad_g f1, ..., ad_g^{n-1} f1 with g = f0 + a f1 drops rank at q.
    ``a`` is the proportionality coefficient when one exists.
    """

    in_l_prime: bool
    in_l_double_prime: bool
    a: object = None
    chain_det: object = None


def _proportionality(v0, v1, is_zero):
    """Coefficient a with v0 = a * v1, or None."""
    if all(is_zero(x) for x in v1):
        return None
    if not all(is_zero(m) for m in two_frame_minors(v0, v1)):
        return None
    idx = max(range(len(v1)), key=lambda i: abs(float(v1[i])))
    if isinstance(v0[idx], Fraction) or isinstance(v0[idx], int):
        return Fraction(v0[idx]) / Fraction(v1[idx])
    return float(v0[idx]) / float(v1[idx])


def collinear_degeneracy_test(scenario, q: Sequence, tol: float = 1e-9) -> CollinearDegeneracy:
    """Evaluate the collinear degeneracy sets at a point (exact if q rational)."""
    f0, f1 = scenario.f0, scenario.f1
    n = f0.dim
    exact = all(isinstance(x, (int, Fraction)) for x in q)
    mode = "exact" if exact else "float"
    v0 = eval_at(f0, q, mode)
    v1 = eval_at(f1, q, mode)
    v01 = eval_at(eval_word_field("01", f0, f1), q, mode)

    scale = max([abs(float(x)) for x in list(v0) + list(v1) + list(v01)], default=0.0)
    if exact:
        is_zero = lambda v: v == 0
    else:
        cut = tol * max(scale, 1e-300)
        is_zero = lambda v: abs(float(v)) <= cut

    pairs = (
        two_frame_minors(v0, v1) + two_frame_minors(v0, v01) + two_frame_minors(v1, v01)
    )
    l_prime = all(is_zero(m) for m in pairs)

    a = _proportionality(v0, v1, is_zero)
    l_second = False
    chain_det = None
    if a is not None:
        a_exact = a if isinstance(a, Fraction) else Fraction(a).limit_denominator(10**12)
        g = f0 + a_exact * f1
        chain = [eval_at(ad_power(g, f1, j), q, mode) for j in range(n)]
        chain_det = wedge_det(chain)
        if exact:
            l_second = chain_det == 0
        else:
            norms = 1.0
            for vec in chain:
                norms *= max(max(abs(float(x)) for x in vec), 1e-300)
            l_second = abs(float(chain_det)) <= tol * norms
    return CollinearDegeneracy(l_prime, l_second, a, chain_det)


def collinear_order_chain(scenario, q: Sequence, a, lam: Sequence, k: int) -> list:
    """Pairings <lam, ad_g^j f1(q)> for j = 0..k+2 with g = f0 + a f1."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if all(x == 0 for x in lam):
        raise ValueError("lam must be nonzero")
    g = scenario.f0 + _coerce_scalar(a) * scenario.f1
    out = []
    for j in range(k + 3):
        vec = eval_at(ad_power(g, scenario.f1, j), q)
        out.append(pairing(lam, vec))
    return out


def _coerce_scalar(a):
    if isinstance(a, (int, Fraction)):
        return Fraction(a)
    return Fraction(a).limit_denominator(10**12)


@dataclass(frozen=True)
class BranchReport:
    """Which fourth-order degeneracy alternative holds at a 3-D state.

    branch is 'h0101-zero' when <lam, f_0101(q)> vanishes, 'determinant-zero'
    when h_0001 h_1101 - h_0101^2 does, and None when neither is within
    tolerance.  Both residuals are always reported.
    """

    branch: str | None
    residuals: dict


def fourth_order_branch_test(state, cache: BracketCache, tol: float = 1e-9) -> BranchReport:
    """Evaluate the depth-4 bracket alternative at a state (n = 3 only)."""
    if cache.dim != 3:
        raise ValueError("the fourth-order test is specific to 3-D systems")
    q, lam = state.q, state.lam
    if all(x == 0 for x in lam):
        raise ValueError("lam must be nonzero")
    exact = all(isinstance(x, (int, Fraction)) for x in list(q) + list(lam))
    mode = "exact" if exact else "float"

    def h(word):
        return pairing(lam, cache.eval(word, q, mode))

    h0101 = h("0101")
    h0001 = h("0001")
    h1101 = h("1101")
    combo = h0001 * h1101 - h0101 * h0101

    if exact:
        first = h0101 == 0
        second = combo == 0
    else:
        lam_norm = max(abs(float(x)) for x in lam)

        def gauge(word):
            vec = cache.eval(word, q, "float")
            return lam_norm * max((abs(float(v)) for v in vec), default=0.0)

        g0101, g0001, g1101 = gauge("0101"), gauge("0001"), gauge("1101")
        first = abs(float(h0101)) <= tol * max(g0101, 1e-300)
        second = abs(float(combo)) <= tol * max(g0001 * g1101 + g0101**2, 1e-300)

    branch = "h0101-zero" if first else ("determinant-zero" if second else None)
    return BranchReport(branch, {"h0101": h0101, "determinant": combo})
