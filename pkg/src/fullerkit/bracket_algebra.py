"""Exact polynomial vector fields and iterated Lie brackets.

Everything symbolic in this package is built on multivariate polynomials
with Fraction coefficients, so algebraic identities (antisymmetry, Jacobi,
word decompositions) can be tested with exact equality.  Floating point
enters only when a field is evaluated at a numeric point.

Bracket convention, fixed once for the whole package:

    [f, g] = (Dg) f - (Df) g      componentwise
    [f, g]^j = sum_i (f^i d_i g^j - g^i d_i f^j)

Iterated brackets are named by words over the alphabet ``{0, 1, +, -}``:
the word ``(i1 ... id)`` denotes the right-nested bracket
``[f_{i1}, [..., [f_{i_{d-1}}, f_{i_d}] ...]]`` with ``f_0``, ``f_1`` the
drift and controlled field and ``f_+/- = f_0 +/- f_1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "Exponents",
    "Polynomial",
    "PolyVectorField",
    "BracketWord",
    "Decomposition",
    "BracketCache",
    "ALPHABET",
    "as_word",
    "lie_bracket",
    "eval_word_field",
    "decompose_word",
    "ad_power",
    "eval_at",
    "pairing",
    "wedge_det",
    "two_frame_minors",
]

Exponents = tuple[int, ...]
ALPHABET = "01+-"

# Letter order used for canonical word comparisons: 0 < 1 < + < -
_LETTER_RANK = {"0": 0, "1": 1, "+": 2, "-": 3}


def _frac(value) -> Fraction:
    """Coerce ints, Fractions and 'p/q' strings to Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"not an exact rational value: {value!r}")


def _is_exact_point(point) -> bool:
    return all(isinstance(x, (int, Fraction)) for x in point)


class Polynomial:
    """Sparse multivariate polynomial over Q.

    Terms are stored as a dict mapping exponent tuples to nonzero Fraction
    coefficients; the ``terms`` property returns them in graded
    lexicographic order, which is also the canonical serialization order.
    Instances are treated as immutable.
    """

    __slots__ = ("dim", "_terms", "_compiled")

    def __init__(self, dim: int, terms=None):
        if dim < 1:
            raise ValueError("polynomial dimension must be >= 1")
        self.dim = int(dim)
        clean: dict[Exponents, Fraction] = {}
        if terms:
            items = terms.items() if isinstance(terms, Mapping) else terms
            for exps, coeff in items:
                exps = tuple(int(e) for e in exps)
                if len(exps) != self.dim:
                    raise ValueError(
                        f"exponent tuple {exps} has length {len(exps)}, expected {self.dim}"
                    )
                if any(e < 0 for e in exps):
                    raise ValueError(f"negative exponent in {exps}")
                c = clean.get(exps, Fraction(0)) + _frac(coeff)
                if c == 0:
                    clean.pop(exps, None)
                else:
                    clean[exps] = c
        self._terms = clean
        self._compiled = None

    # -- constructors ---------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> "Polynomial":
        return cls(dim)

    @classmethod
    def constant(cls, dim: int, value) -> "Polynomial":
        return cls(dim, {(0,) * dim: _frac(value)})

    @classmethod
    def variable(cls, dim: int, index: int) -> "Polynomial":
        if not 0 <= index < dim:
            raise ValueError(f"variable index {index} out of range for dim {dim}")
        exps = [0] * dim
        exps[index] = 1
        return cls(dim, {tuple(exps): Fraction(1)})

    # -- inspection ------------------------------------------------------

    @property
    def terms(self) -> tuple[tuple[Exponents, Fraction], ...]:
        """Terms sorted in graded lexicographic order."""
        return tuple(
            (e, self._terms[e]) for e in sorted(self._terms, key=lambda e: (sum(e), e))
        )

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self._terms:
            return -1
        return max(sum(e) for e in self._terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.dim == other.dim and self._terms == other._terms

    def __repr__(self) -> str:
        if self.is_zero():
            return "0"
        parts = []
        for exps, coeff in self.terms:
            mono = "*".join(f"x{i+1}^{e}" if e > 1 else f"x{i+1}" for i, e in enumerate(exps) if e)
            parts.append(f"{coeff}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)

    # -- arithmetic ------------------------------------------------------

    def _check_dim(self, other: "Polynomial"):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check_dim(other)
        out = dict(self._terms)
        for e, c in other._terms.items():
            s = out.get(e, Fraction(0)) + c
            if s == 0:
                out.pop(e, None)
            else:
                out[e] = s
        return Polynomial(self.dim, out)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.dim, {e: -c for e, c in self._terms.items()})

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check_dim(other)
            out: dict[Exponents, Fraction] = {}
            for e1, c1 in self._terms.items():
                for e2, c2 in other._terms.items():
                    e = tuple(a + b for a, b in zip(e1, e2))
                    s = out.get(e, Fraction(0)) + c1 * c2
                    if s == 0:
                        out.pop(e, None)
                    else:
                        out[e] = s
            return Polynomial(self.dim, out)
        coeff = _frac(other)
        return Polynomial(self.dim, {e: c * coeff for e, c in self._terms.items()})

    __rmul__ = __mul__

    def partial(self, index: int) -> "Polynomial":
        """Partial derivative with respect to variable ``index``."""
        out: dict[Exponents, Fraction] = {}
        for exps, coeff in self._terms.items():
            k = exps[index]
            if k == 0:
                continue
            e = list(exps)
            e[index] = k - 1
            out[tuple(e)] = coeff * k
        return Polynomial(self.dim, out)

    # -- evaluation -------------------------------------------------------

    def eval_exact(self, point: Sequence) -> Fraction:
        if len(point) != self.dim:
            raise ValueError("point dimension mismatch")
        pt = [_frac(x) for x in point]
        total = Fraction(0)
        for exps, coeff in self._terms.items():
            term = coeff
            for x, e in zip(pt, exps):
                if e:
                    term *= x**e
            total += term
        return total

    def eval_float(self, point) -> float:
        if self._compiled is None:
            self._compiled = [(e, float(c)) for e, c in self._terms.items()]
        total = 0.0
        for exps, coeff in self._compiled:
            term = coeff
            for x, e in zip(point, exps):
                if e == 1:
                    term *= x
                elif e:
                    term *= x**e
            total += term
        return total

    # -- serialization ----------------------------------------------------

    def to_payload(self) -> list[dict]:
        return [{"exponents": list(e), "coeff": str(c)} for e, c in self.terms]

    @classmethod
    def from_payload(cls, dim: int, payload: Iterable[Mapping]) -> "Polynomial":
        terms = []
        for item in payload:
            try:
                coeff = Fraction(str(item["coeff"]))
            except (ZeroDivisionError, ValueError) as exc:
                raise ValueError(f"bad coefficient {item.get('coeff')!r}: {exc}") from None
            terms.append((tuple(item["exponents"]), coeff))
        return cls(dim, terms)


class PolyVectorField:
    """Vector field on R^n with polynomial components."""

    __slots__ = ("dim", "components")

    def __init__(self, components: Sequence[Polynomial]):
        components = tuple(components)
        if not components:
            raise ValueError("a vector field needs at least one component")
        dim = components[0].dim
        if len(components) != dim or any(p.dim != dim for p in components):
            raise ValueError("need exactly n components, each a polynomial in n variables")
        self.dim = dim
        self.components = components

    @classmethod
    def zero(cls, dim: int) -> "PolyVectorField":
        return cls([Polynomial.zero(dim) for _ in range(dim)])

    @classmethod
    def from_payload(cls, dim: int, payload) -> "PolyVectorField":
        return cls([Polynomial.from_payload(dim, comp) for comp in payload])

    def to_payload(self) -> list:
        return [p.to_payload() for p in self.components]

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.components)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        return self.components == other.components

    def __repr__(self) -> str:
        return "(" + ", ".join(repr(p) for p in self.components) + ")"

    def __add__(self, other: "PolyVectorField") -> "PolyVectorField":
        return PolyVectorField([a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other: "PolyVectorField") -> "PolyVectorField":
        return PolyVectorField([a - b for a, b in zip(self.components, other.components)])

    def __neg__(self) -> "PolyVectorField":
        return PolyVectorField([-p for p in self.components])

    def __mul__(self, scalar) -> "PolyVectorField":
        return PolyVectorField([p * scalar for p in self.components])

    __rmul__ = __mul__

    def eval_exact(self, point: Sequence) -> tuple[Fraction, ...]:
        return tuple(p.eval_exact(point) for p in self.components)

    def eval_float(self, point) -> np.ndarray:
        return np.array([p.eval_float(point) for p in self.components], dtype=float)

    def jacobian(self) -> tuple[tuple[Polynomial, ...], ...]:
        """Matrix of partials, row i = d/dx_i of every component."""
        return tuple(
            tuple(comp.partial(i) for comp in self.components) for i in range(self.dim)
        )


# ---------------------------------------------------------------------------
# bracket words


@dataclass(frozen=True)
class BracketWord:
    """Word over {0, 1, +, -} naming an iterated bracket."""

    letters: str

    def __post_init__(self):
        if not self.letters:
            raise ValueError("bracket word must be nonempty")
        bad = set(self.letters) - set(ALPHABET)
        if bad:
            raise ValueError(f"invalid letters {sorted(bad)} in word {self.letters!r}")

    def __str__(self) -> str:
        return self.letters

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def sort_key(self) -> tuple[int, ...]:
        """Lexicographic key under the letter order 0 < 1 < + < -."""
        return tuple(_LETTER_RANK[c] for c in self.letters)


WordLike = Union[str, BracketWord]


def as_word(word: WordLike) -> BracketWord:
    return word if isinstance(word, BracketWord) else BracketWord(word)


# ---------------------------------------------------------------------------
# operations


def lie_bracket(f: PolyVectorField, g: PolyVectorField) -> PolyVectorField:
    """Lie bracket [f, g] = (Dg) f - (Df) g, exact."""
    if f.dim != g.dim:
        raise ValueError(f"dimension mismatch: {f.dim} vs {g.dim}")
    n = f.dim
    comps = []
    for j in range(n):
        acc = Polynomial.zero(n)
        gj = g.components[j]
        fj = f.components[j]
        for i in range(n):
            acc = acc + f.components[i] * gj.partial(i) - g.components[i] * fj.partial(i)
        comps.append(acc)
    return PolyVectorField(comps)


def _base_field(letter: str, f0: PolyVectorField, f1: PolyVectorField) -> PolyVectorField:
    if letter == "0":
        return f0
    if letter == "1":
        return f1
    if letter == "+":
        return f0 + f1
    return f0 - f1


def eval_word_field(
    word: WordLike, f0: PolyVectorField, f1: PolyVectorField
) -> PolyVectorField:
    """Right-nested bracket named by ``word``, with f_+/- = f0 +/- f1."""
    if f0.dim != f1.dim:
        raise ValueError("f0 and f1 must share a dimension")
    letters = as_word(word).letters
    field = _base_field(letters[-1], f0, f1)
    for letter in reversed(letters[:-1]):
        field = lie_bracket(_base_field(letter, f0, f1), field)
    return field


@dataclass(frozen=True)
class Decomposition:
    """Signed expansion of a word's +/- letters into words over {0, 1}.

    ``j_max_zeros`` / ``j_max_ones`` are the unique expansion words with the
    most 0 letters and the most 1 letters respectively (only identified for
    words ending in the two-letter suffix 01).
    """

    terms: tuple[tuple[BracketWord, int], ...]
    j_max_zeros: BracketWord | None = None
    j_max_ones: BracketWord | None = None


def decompose_word(word: WordLike, identify_extremes: bool = True) -> Decomposition:
    """Expand each +/- letter of ``word`` into 0 and 1 with signs.

    Expanding ``+`` contributes both letters with sign +1; expanding ``-``
    contributes the 0 branch with +1 and the 1 branch with -1.  All
    expansion words are distinct, so no collection of signs collapses.
    With ``identify_extremes`` the word must end in "01" and the two
    distinguished expansion words are returned alongside.
    """
    w = as_word(word)
    if identify_extremes and not w.letters.endswith("01"):
        raise ValueError(f"word {w.letters!r} does not end in '01'")
    signed = [("", 1)]
    for letter in w.letters:
        if letter in "01":
            signed = [(prefix + letter, sign) for prefix, sign in signed]
        elif letter == "+":
            signed = [
                (prefix + branch, sign) for prefix, sign in signed for branch in "01"
            ]
        else:  # '-': the 1 branch flips the sign
            signed = [
                (prefix + branch, sign * (1 if branch == "0" else -1))
                for prefix, sign in signed
                for branch in "01"
            ]
    terms = tuple((BracketWord(text), sign) for text, sign in signed)
    if not identify_extremes:
        return Decomposition(terms)
    zero_counts = [t.letters.count("0") for t, _ in terms]
    one_counts = [t.letters.count("1") for t, _ in terms]
    if zero_counts.count(max(zero_counts)) != 1 or one_counts.count(max(one_counts)) != 1:
        raise ValueError(f"extreme expansion words of {w.letters!r} are not unique")
    j1 = terms[zero_counts.index(max(zero_counts))][0]
    j2 = terms[one_counts.index(max(one_counts))][0]
    return Decomposition(terms, j1, j2)


def ad_power(g: PolyVectorField, h: PolyVectorField, k: int) -> PolyVectorField:
    """k-fold adjoint action ad_g^k(h); k = 0 returns h."""
    if k < 0:
        raise ValueError("k must be >= 0")
    out = h
    for _ in range(k):
        out = lie_bracket(g, out)
    return out


def eval_at(field: PolyVectorField, point: Sequence, mode: str = "auto"):
    """Evaluate a field at a point.

    ``mode`` is "exact", "float" or "auto"; auto evaluates exactly when every
    coordinate is an int or Fraction.
    """
    if mode not in ("auto", "exact", "float"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "exact" or (mode == "auto" and _is_exact_point(point)):
        return field.eval_exact(point)
    return field.eval_float([float(x) for x in point])


def pairing(lam: Sequence, vec: Sequence):
    """Covector/vector pairing sum_i lam_i v_i (exact or float per inputs)."""
    if len(lam) != len(vec):
        raise ValueError("dimension mismatch in pairing")
    if isinstance(lam, np.ndarray) and isinstance(vec, np.ndarray):
        return float(np.dot(lam, vec))
    total = None
    for a, b in zip(lam, vec):
        term = a * b
        total = term if total is None else total + term
    return total


def _det_exact(rows: list[list[Fraction]]) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    n = len(rows)
    m = [row[:] for row in rows]
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            m[col], m[pivot] = m[pivot], m[col]
            det = -det
        det *= m[col][col]
        inv = m[col][col]
        for r in range(col + 1, n):
            if m[r][col] == 0:
                continue
            factor = m[r][col] / inv
            m[r] = [a - factor * b for a, b in zip(m[r], m[col])]
    return det


def wedge_det(vectors: Sequence[Sequence]):
    """Determinant of the matrix whose columns are the given n vectors.

    Exact when every entry is an int or Fraction, floating point otherwise.
    """
    n = len(vectors)
    if n == 0 or any(len(v) != n for v in vectors):
        raise ValueError("need exactly n vectors of dimension n")
    if all(_is_exact_point(v) for v in vectors):
        rows = [[_frac(v[i]) for v in vectors] for i in range(n)]
        return _det_exact(rows)
    mat = np.array([[float(x) for x in v] for v in vectors], dtype=float).T
    return float(np.linalg.det(mat))


def two_frame_minors(v: Sequence, w: Sequence) -> list:
    """All 2x2 minors of the 2xn matrix [v; w]; v ^ w = 0 iff all vanish."""
    if len(v) != len(w):
        raise ValueError("dimension mismatch")
    n = len(v)
    return [v[i] * w[j] - v[j] * w[i] for i in range(n) for j in range(i + 1, n)]


class BracketCache:
    """Memoized bracket-word fields over a fixed pair (f0, f1).

    Lookups equal fresh recomputation; the cache itself does no locking, so
    share across threads only behind an external guard.
    """

    def __init__(self, f0: PolyVectorField, f1: PolyVectorField):
        if f0.dim != f1.dim:
            raise ValueError("f0 and f1 must share a dimension")
        self.f0 = f0
        self.f1 = f1
        self.dim = f0.dim
        self._fields: dict[str, PolyVectorField] = {}

    def field(self, word: WordLike) -> PolyVectorField:
        key = as_word(word).letters
        cached = self._fields.get(key)
        if cached is None:
            cached = eval_word_field(key, self.f0, self.f1)
            self._fields[key] = cached
        return cached

    def eval(self, word: WordLike, point: Sequence, mode: str = "auto"):
        return eval_at(self.field(word), point, mode)

    def __len__(self) -> int:
        return len(self._fields)
