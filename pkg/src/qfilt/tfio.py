"""Rational transfer matrices: parsing, doubled-up assembly, evaluation, JSON I/O.

Polynomials are stored as coefficient tuples in ascending powers of ``s``.
The Laplace variable follows the convention ``f(s) = int e^{+st} f(t) dt`` used
throughout the package, so a stable pole sits at positive ``s`` in the
state-space picture (see :mod:`qfilt.statespace`).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

TRIM_RTOL = 1e-12
POLE_ATOL = 1e-12


class ParseError(ValueError):
    """Malformed expression; ``position`` is the 0-based character offset."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class UnresolvedSymbolError(ValueError):
    pass


class PoleError(ZeroDivisionError):
    """Evaluation point lies on (or within tolerance of) a pole."""

    def __init__(self, index: tuple[int, int] | None, s: complex, pole: complex):
        self.index = index
        self.s = s
        self.pole = pole
        where = f"entry {index}" if index is not None else "function"
        super().__init__(f"s={s!r} is within tolerance of pole {pole!r} of {where}")


class SchemaError(ValueError):
    """Document does not match the expected layout; ``path`` names the field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _trim(coeffs: Sequence[complex]) -> tuple[complex, ...]:
    c = np.asarray(coeffs, dtype=complex).ravel()
    if c.size == 0:
        return (0j,)
    scale = np.max(np.abs(c))
    if scale == 0:
        return (0j,)
    keep = len(c)
    while keep > 1 and abs(c[keep - 1]) <= TRIM_RTOL * scale:
        keep -= 1
    return tuple(complex(v) for v in c[:keep])


def _is_zero_poly(c: Sequence[complex]) -> bool:
    return all(v == 0 for v in c)


@dataclass(frozen=True)
class RationalFunction:
    """num(s)/den(s) with complex coefficients in ascending powers."""

    num: tuple[complex, ...]
    den: tuple[complex, ...] = (1 + 0j,)

    def __post_init__(self) -> None:
        num, den = _trim(self.num), _trim(self.den)
        for c in num + den:
            if not (math.isfinite(c.real) and math.isfinite(c.imag)):
                raise ValueError("coefficients must be finite")
        if _is_zero_poly(den):
            raise ZeroDivisionError("denominator is the zero polynomial")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @classmethod
    def constant(cls, value: complex) -> "RationalFunction":
        return cls((complex(value),), (1 + 0j,))

    @property
    def num_degree(self) -> int:
        return -1 if _is_zero_poly(self.num) else len(self.num) - 1

    @property
    def den_degree(self) -> int:
        return len(self.den) - 1

    @property
    def is_proper(self) -> bool:
        return self.num_degree <= self.den_degree

    def poles(self) -> np.ndarray:
        if self.den_degree == 0:
            return np.zeros(0, dtype=complex)
        return P.polyroots(np.asarray(self.den))

    def zeros(self) -> np.ndarray:
        if self.num_degree <= 0:
            return np.zeros(0, dtype=complex)
        return P.polyroots(np.asarray(self.num))

    def __call__(self, s: complex) -> complex:
        s = complex(s)
        for pole in self.poles():
            if abs(s - pole) <= POLE_ATOL * max(1.0, abs(pole)):
                raise PoleError(None, s, complex(pole))
        return complex(P.polyval(s, np.asarray(self.num)) / P.polyval(s, np.asarray(self.den)))

    def conj_coeffs(self) -> "RationalFunction":
        """Coefficient-conjugate image: the creation-channel partner of this entry."""
        return RationalFunction(tuple(np.conj(self.num)), tuple(np.conj(self.den)))

    def scale_variable(self, k: float) -> "RationalFunction":
        """Return s -> g(k s)."""
        powers = k ** np.arange(max(len(self.num), len(self.den)))
        return RationalFunction(
            tuple(np.asarray(self.num) * powers[: len(self.num)]),
            tuple(np.asarray(self.den) * powers[: len(self.den)]),
        )

    def reflect(self) -> "RationalFunction":
        """Return s -> g(-s)."""
        return self.scale_variable(-1.0)

    def reduced(self, tol: float = TRIM_RTOL) -> "RationalFunction":
        """Cancel common polynomial factors whose roots agree within ``tol``."""
        num = np.asarray(self.num)
        den = np.asarray(self.den)
        if self.num_degree <= 0 or self.den_degree == 0:
            return self
        zeros = list(P.polyroots(num))
        common = []
        for pole in P.polyroots(den):
            scale = max(1.0, abs(pole))
            hits = [i for i, z in enumerate(zeros) if abs(z - pole) <= max(tol, 1e-8) * scale]
            if hits:
                best = min(hits, key=lambda i: abs(zeros[i] - pole))
                common.append(0.5 * (zeros.pop(best) + pole))
        if not common:
            return self
        factor = P.polyfromroots(common)
        qn, rn = P.polydiv(num, factor)
        qd, rd = P.polydiv(den, factor)
        if np.max(np.abs(rn), initial=0) > 1e-8 * np.max(np.abs(num)) or np.max(
            np.abs(rd), initial=0
        ) > 1e-8 * np.max(np.abs(den)):
            return self
        return RationalFunction(tuple(qn), tuple(qd))

    def to_text(self) -> str:
        """Expression string that :func:`parse_rational` maps back to this value."""
        return f"({_poly_text(self.num)})/({_poly_text(self.den)})"


def _complex_text(c: complex) -> str:
    sign = "-" if (c.imag < 0 or (c.imag == 0 and math.copysign(1, c.imag) < 0)) else "+"
    return f"({c.real!r}{sign}{abs(c.imag)!r}i)"


def _poly_text(coeffs: Sequence[complex]) -> str:
    return " + ".join(f"{_complex_text(c)}*s^{k}" for k, c in enumerate(coeffs))


# --------------------------------------------------------------------------- parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<imag>[ij](?![A-Za-z0-9_]))?"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, Any, int]]:
    tokens: list[tuple[str, Any, int]] = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        start = m.start(m.lastgroup) if m.lastgroup != "imag" else m.start("num")
        if m.group("num") is not None:
            value: complex = float(m.group("num"))
            if m.group("imag"):
                value = complex(0.0, value)
            tokens.append(("num", value, start))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), start))
        else:
            tokens.append(("op", m.group("op"), start))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


# A parsed value is a pair (numerator, denominator) of ascending coefficient arrays.
_Rat = tuple[np.ndarray, np.ndarray]


def _const(c: complex) -> _Rat:
    return np.array([c], dtype=complex), np.array([1.0], dtype=complex)


def _is_const(p: np.ndarray) -> bool:
    return len(_trim(p)) == 1


def _add(a: _Rat, b: _Rat, sign: float = 1.0) -> _Rat:
    (n1, d1), (n2, d2) = a, b
    if len(d1) == len(d2) and np.array_equal(d1, d2):
        return P.polyadd(n1, sign * n2), d1
    return P.polyadd(P.polymul(n1, d2), sign * P.polymul(n2, d1)), P.polymul(d1, d2)


def _mul(a: _Rat, b: _Rat) -> _Rat:
    return P.polymul(a[0], b[0]), P.polymul(a[1], b[1])


def _div(a: _Rat, b: _Rat, pos: int, text: str) -> _Rat:
    if _is_zero_poly(_trim(b[0])):
        raise ParseError("division by the zero polynomial", pos, text)
    return P.polymul(a[0], b[1]), P.polymul(a[1], b[0])


class _Parser:
    def __init__(self, text: str, symbols: Mapping[str, float]):
        self.text = text
        self.symbols = symbols
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, Any, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, Any, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op: str) -> None:
        kind, value, pos = self.take()
        if kind != "op" or value != op:
            raise ParseError(f"expected {op!r}", pos, self.text)

    def parse(self) -> _Rat:
        value = self.expr()
        kind, _, pos = self.peek()
        if kind != "end":
            raise ParseError("unexpected trailing input", pos, self.text)
        return value

    def expr(self) -> _Rat:
        value = self.term()
        while True:
            kind, op, _ = self.peek()
            if kind == "op" and op in "+-":
                self.take()
                value = _add(value, self.term(), 1.0 if op == "+" else -1.0)
            else:
                return value

    def term(self) -> _Rat:
        value = self.unary()
        while True:
            kind, op, pos = self.peek()
            if kind == "op" and op == "*":
                self.take()
                value = _mul(value, self.unary())
            elif kind == "op" and op == "/":
                self.take()
                value = _div(value, self.unary(), pos, self.text)
            else:
                return value

    def unary(self) -> _Rat:
        kind, op, _ = self.peek()
        if kind == "op" and op in "+-":
            self.take()
            n, d = self.unary()
            return (-n if op == "-" else n), d
        return self.power()

    def power(self) -> _Rat:
        base = self.atom()
        kind, op, pos = self.peek()
        if not (kind == "op" and op == "^"):
            return base
        self.take()
        sign = 1
        kind, op, epos = self.peek()
        if kind == "op" and op in "+-":
            self.take()
            sign = -1 if op == "-" else 1
        kind, value, epos = self.take()
        if kind == "op" and value == "(":
            kind, value, epos = self.take()
            if kind == "op" and value in "+-":
                sign *= -1 if value == "-" else 1
                kind, value, epos = self.take()
            self.expect(")")
        if kind != "num" or value.imag != 0 or value.real != int(value.real):
            raise ParseError("exponent must be an integer literal", epos, self.text)
        k = sign * int(value.real)
        n, d = base
        if k < 0:
            if _is_zero_poly(_trim(n)):
                raise ParseError("negative power of zero", pos, self.text)
            n, d, k = d, n, -k
        return P.polypow(n, k), P.polypow(d, k)

    def atom(self) -> _Rat:
        kind, value, pos = self.take()
        if kind == "num":
            return _const(value)
        if kind == "name":
            if value == "s":
                return np.array([0.0, 1.0], dtype=complex), np.array([1.0], dtype=complex)
            if value in ("i", "j"):
                return _const(1j)
            if value not in self.symbols:
                raise UnresolvedSymbolError(f"unresolved symbol {value!r} at position {pos}")
            return _const(float(self.symbols[value]))
        if kind == "op" and value == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        if kind == "end":
            raise ParseError("unexpected end of expression", pos, self.text)
        raise ParseError(f"unexpected token {value!r}", pos, self.text)


def parse_rational(
    text: str, symbols: Mapping[str, float] | None = None, reduce: bool = False
) -> RationalFunction:
    """Parse an expression in ``s`` into an expanded :class:`RationalFunction`.

    The grammar covers real and imaginary literals (``2.5``, ``3i``, ``i``),
    named symbols resolved from ``symbols``, ``s``, ``+ - * /``, integer
    powers with ``^`` and parentheses. Common factors are kept unless
    ``reduce`` is true.

    >>> parse_rational("(s - s0)/(s + s0)", {"s0": 1.0}).num
    ((-1+0j), (1+0j))
    """
    num, den = _Parser(text, symbols or {}).parse()
    if _is_zero_poly(_trim(den)):
        raise ParseError("zero denominator polynomial", 0, text)
    # keep a constant denominator of 1 when the expression had no division
    rf = RationalFunction(tuple(num), tuple(den))
    return rf.reduced() if reduce else rf


# ------------------------------------------------------------------ transfer matrices

Grid = tuple[tuple[RationalFunction, ...], ...]


@dataclass(frozen=True)
class TransferMatrix:
    """m-channel transfer matrix given by its annihilation block (and optionally
    an explicit creation block). ``entries``/``creation_entries`` hold the source
    expressions so a document re-serializes byte for byte."""

    m: int
    entries: tuple[tuple[str, ...], ...]
    symbols: Mapping[str, float] = field(default_factory=dict)
    creation_entries: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", _freeze_grid(self.entries))
        if self.creation_entries is not None:
            object.__setattr__(self, "creation_entries", _freeze_grid(self.creation_entries))
        object.__setattr__(self, "symbols", {k: float(v) for k, v in self.symbols.items()})
        _check_shape(self.entries, self.m, "entries")
        if self.creation_entries is not None:
            _check_shape(self.creation_entries, self.m, "creation_entries")

    @classmethod
    def from_functions(
        cls,
        block: Sequence[Sequence[RationalFunction]],
        creation: Sequence[Sequence[RationalFunction]] | None = None,
    ) -> "TransferMatrix":
        text = [[g.to_text() for g in row] for row in block]
        ctext = None if creation is None else [[g.to_text() for g in row] for row in creation]
        return cls(m=len(block), entries=text, creation_entries=ctext)

    @property
    def annihilation_block(self) -> Grid:
        return tuple(tuple(parse_rational(e, self.symbols) for e in row) for row in self.entries)

    @property
    def creation_block(self) -> Grid | None:
        if self.creation_entries is None:
            return None
        return tuple(
            tuple(parse_rational(e, self.symbols) for e in row) for row in self.creation_entries
        )


def _freeze_grid(grid: Sequence[Sequence[str]]) -> tuple[tuple[str, ...], ...]:
    return tuple(tuple(row) for row in grid)


def _check_shape(grid: Sequence[Sequence[Any]], m: int, path: str) -> None:
    if len(grid) != m or any(len(row) != m for row in grid):
        raise SchemaError(path, f"expected a {m}x{m} grid")


def assemble_doubled_up(tm: TransferMatrix) -> Grid:
    """Interleave annihilation and creation channels into a 2m x 2m grid.

    Row/column 2k is channel k's annihilation operator and 2k+1 its creation
    partner. Without an explicit creation block the creation entries are the
    coefficient conjugates of the annihilation entries.
    """
    ann = tm.annihilation_block
    cre = tm.creation_block
    m = tm.m
    zero = RationalFunction.constant(0)
    grid = [[zero] * (2 * m) for _ in range(2 * m)]
    for k in range(m):
        for l in range(m):
            grid[2 * k][2 * l] = ann[k][l]
            grid[2 * k + 1][2 * l + 1] = cre[k][l] if cre is not None else ann[k][l].conj_coeffs()
    return tuple(tuple(row) for row in grid)


def evaluate(grid: Sequence[Sequence[RationalFunction]], s: complex) -> np.ndarray:
    """Entrywise evaluation of a rational grid at ``s``."""
    rows = len(grid)
    cols = len(grid[0]) if rows else 0
    out = np.zeros((rows, cols), dtype=complex)
    for i, row in enumerate(grid):
        for j, g in enumerate(row):
            try:
                out[i, j] = g(s)
            except PoleError as exc:
                raise PoleError((i, j), exc.s, exc.pole) from None
    return out


def scale_grid(grid: Grid, k: float) -> Grid:
    """Substitute s -> k s in every entry."""
    return tuple(tuple(g.scale_variable(k) for g in row) for row in grid)


def normalize_grid(grid: Grid, rate: float) -> Grid:
    """Express the grid in the dimensionless variable s' with s = (rate/2) s'."""
    if rate <= 0:
        raise ValueError("normalization rate must be positive")
    return scale_grid(grid, rate / 2.0)


# ------------------------------------------------------------------ JSON documents

def encode_matrix(a: np.ndarray) -> dict[str, Any]:
    a = np.asarray(a, dtype=complex)
    rows, cols = a.shape
    return {
        "rows": rows,
        "cols": cols,
        "data": [[float(v.real), float(v.imag)] for v in a.ravel()],
    }


def decode_matrix(doc: Any, path: str) -> np.ndarray:
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected an object with rows, cols, data")
    try:
        rows, cols, data = doc["rows"], doc["cols"], doc["data"]
    except KeyError as exc:
        raise SchemaError(path, f"missing field {exc.args[0]!r}") from None
    if not (isinstance(rows, int) and isinstance(cols, int) and rows >= 0 and cols >= 0):
        raise SchemaError(path, "rows and cols must be non-negative integers")
    if not isinstance(data, list) or len(data) != rows * cols:
        raise SchemaError(path, f"data must hold rows*cols = {rows * cols} entries")
    values = []
    for idx, pair in enumerate(data):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)
        ):
            raise SchemaError(f"{path}.data[{idx}]", "expected [re, im]")
        values.append(complex(pair[0], pair[1]))
    return np.array(values, dtype=complex).reshape(rows, cols)


def _dumps(doc: dict[str, Any]) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def transfer_matrix_to_doc(tm: TransferMatrix) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "m": tm.m,
        "symbols": dict(tm.symbols),
        "entries": [list(row) for row in tm.entries],
    }
    if tm.creation_entries is not None:
        doc["creation_entries"] = [list(row) for row in tm.creation_entries]
    return doc


def transfer_matrix_from_doc(doc: Any) -> TransferMatrix:
    if not isinstance(doc, dict):
        raise SchemaError("$", "expected an object")
    m = doc.get("m")
    if not isinstance(m, int) or m < 1:
        raise SchemaError("m", "expected a positive integer")
    symbols = doc.get("symbols", {})
    if not isinstance(symbols, dict) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in symbols.values()
    ):
        raise SchemaError("symbols", "expected a name -> real map")
    for key in ("entries", "creation_entries"):
        grid = doc.get(key)
        if grid is None and key == "creation_entries":
            continue
        if not isinstance(grid, list) or not all(
            isinstance(row, list) and all(isinstance(e, str) for e in row) for row in grid
        ):
            raise SchemaError(key, "expected a grid of expression strings")
    tm = TransferMatrix(
        m=m,
        entries=doc["entries"],
        symbols=symbols,
        creation_entries=doc.get("creation_entries"),
    )
    # parse eagerly so bad expressions surface at load time
    tm.annihilation_block
    tm.creation_block
    return tm


def serialize_transfer_matrix(tm: TransferMatrix) -> str:
    return _dumps(transfer_matrix_to_doc(tm))


def deserialize_transfer_matrix(text: str) -> TransferMatrix:
    return transfer_matrix_from_doc(json.loads(text))


def serialize_state_space(ss: Any) -> str:
    from qfilt.statespace import state_space_to_doc

    return _dumps(state_space_to_doc(ss))


def deserialize_state_space(text: str) -> Any:
    from qfilt.statespace import state_space_from_doc

    return state_space_from_doc(json.loads(text))


def serialize_oscillator(goo: Any) -> str:
    from qfilt.oscillator import oscillator_to_doc

    return _dumps(oscillator_to_doc(goo))


def deserialize_oscillator(text: str) -> Any:
    from qfilt.oscillator import oscillator_from_doc

    return oscillator_from_doc(json.loads(text))


def serialize_realization(pr: Any) -> str:
    from qfilt.synthesis import realization_to_doc

    return _dumps(realization_to_doc(pr))


def deserialize_realization(text: str) -> Any:
    from qfilt.synthesis import realization_from_doc

    return realization_from_doc(json.loads(text))


def dumps(doc: dict[str, Any]) -> str:
    """Canonical JSON text used for every document the package writes."""
    return _dumps(doc)


def load_document(text: str) -> tuple[str, Any]:
    """Load any supported document, returning ``(kind, value)``."""
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise SchemaError("$", "expected an object")
    kind = doc.get("kind")
    if kind is None and "entries" in doc:
        return "transfer_matrix", transfer_matrix_from_doc(doc)
    if kind == "state_space":
        from qfilt.statespace import state_space_from_doc

        return kind, state_space_from_doc(doc)
    if kind == "oscillator":
        from qfilt.oscillator import oscillator_from_doc

        return kind, oscillator_from_doc(doc)
    if kind == "physical_realization":
        from qfilt.synthesis import realization_from_doc

        return kind, realization_from_doc(doc)
    raise SchemaError("kind", f"unknown document kind {kind!r}")
