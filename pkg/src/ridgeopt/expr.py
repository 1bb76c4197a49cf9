"""Piecewise-smooth objectives F(x, y) as small expression programs.

The DSL covers +, -, *, integer powers, abs, min and max over two variable
blocks ``x0..x{p-1}`` and ``y0..y{r-1}``.  Every expressible function is
piecewise polynomial, locally Lipschitz and semialgebraic.  min/max are
lowered to abs internally (min(a,b) = (a+b-|a-b|)/2, max likewise), so a
single kink mechanism serves all nonsmooth primitives: a kink is active at
a query point exactly when the argument of one of the lowered abs nodes
vanishes (up to ``eps_kink``).  Gradients of individual smooth selections
are obtained by fixing a sign for each active abs node and running forward
differentiation; every such selection gradient is an element of the Clarke
subdifferential of F.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np


class ExprError(ValueError):
    """Base error for expression parsing and evaluation."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# AST nodes.  Frozen dataclasses give structural equality/hashing, which the
# kink machinery relies on: two structurally identical abs subtrees describe
# the same kink surface and must receive the same sign in a selection.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    block: str  # "x" or "y"
    index: int


@dataclass(frozen=True)
class Neg:
    a: "Node"


@dataclass(frozen=True)
class Add:
    a: "Node"
    b: "Node"


@dataclass(frozen=True)
class Sub:
    a: "Node"
    b: "Node"


@dataclass(frozen=True)
class Mul:
    a: "Node"
    b: "Node"


@dataclass(frozen=True)
class Pow:
    a: "Node"
    n: int


@dataclass(frozen=True)
class Abs:
    a: "Node"


@dataclass(frozen=True)
class Min:
    a: "Node"
    b: "Node"


@dataclass(frozen=True)
class Max:
    a: "Node"
    b: "Node"


Node = Union[Const, Var, Neg, Add, Sub, Mul, Pow, Abs, Min, Max]


@dataclass
class GradElement:
    """Gradient of one smooth selection of F at a query point.

    ``u`` is the x-block, ``v`` the y-block.  ``branch_id`` records the sign
    chosen at each active kink ('-', '+', or '0' for the averaged pair), in
    the deterministic preorder of the lowered abs nodes; it is empty at
    smooth points.
    """

    u: np.ndarray
    v: np.ndarray
    branch_id: str


@dataclass
class SubdiffSample:
    """Finite inner approximation of the Clarke subdifferential at a point.

    ``incomplete`` is set when the active kinks admit more selections than
    ``max_branches`` allowed to enumerate; the returned elements are still
    valid subdifferential members.
    """

    elements: list[GradElement]
    incomplete: bool

    def __iter__(self):
        return iter(self.elements)

    def __len__(self):
        return len(self.elements)


@dataclass(frozen=True)
class ExprProgram:
    root: Node
    dim_x: int
    dim_y: int

    def __post_init__(self):
        if self.dim_x < 1 or self.dim_y < 1:
            raise ExprError("dim_x and dim_y must be >= 1")
        _validate(self.root, self.dim_x, self.dim_y)

    @cached_property
    def lowered(self) -> Node:
        """min/max rewritten through abs; used by all derivative machinery."""
        return _lower(self.root)

    @cached_property
    def abs_nodes(self) -> tuple[Abs, ...]:
        """Unique abs subtrees of the lowered program, in preorder."""
        seen: dict[Abs, None] = {}
        _collect_abs(self.lowered, seen)
        return tuple(seen)

    def __str__(self) -> str:
        return to_text(self.root)


def _validate(node: Node, p: int, r: int) -> None:
    if isinstance(node, Const):
        return
    if isinstance(node, Var):
        dim = p if node.block == "x" else r
        if node.block not in ("x", "y"):
            raise ExprError(f"unknown variable block {node.block!r}")
        if not 0 <= node.index < dim:
            raise ExprError(
                f"variable {node.block}{node.index} out of range (dim {dim})")
        return
    if isinstance(node, (Neg, Abs)):
        _validate(node.a, p, r)
        return
    if isinstance(node, Pow):
        if not isinstance(node.n, int) or node.n < 1:
            raise ExprError(f"pow exponent must be a positive integer, got {node.n!r}")
        _validate(node.a, p, r)
        return
    if isinstance(node, (Add, Sub, Mul, Min, Max)):
        _validate(node.a, p, r)
        _validate(node.b, p, r)
        return
    raise ExprError(f"unknown node type {type(node).__name__}")


def _lower(node: Node) -> Node:
    if isinstance(node, (Const, Var)):
        return node
    if isinstance(node, Neg):
        return Neg(_lower(node.a))
    if isinstance(node, Abs):
        return Abs(_lower(node.a))
    if isinstance(node, Pow):
        return Pow(_lower(node.a), node.n)
    a, b = _lower(node.a), _lower(node.b)
    if isinstance(node, Add):
        return Add(a, b)
    if isinstance(node, Sub):
        return Sub(a, b)
    if isinstance(node, Mul):
        return Mul(a, b)
    if isinstance(node, Min):
        return Mul(Const(0.5), Sub(Add(a, b), Abs(Sub(a, b))))
    if isinstance(node, Max):
        return Mul(Const(0.5), Add(Add(a, b), Abs(Sub(a, b))))
    raise ExprError(f"unknown node type {type(node).__name__}")


def _collect_abs(node: Node, seen: dict[Abs, None]) -> None:
    if isinstance(node, Abs):
        if node not in seen:
            seen[node] = None
        _collect_abs(node.a, seen)
    elif isinstance(node, (Neg,)):
        _collect_abs(node.a, seen)
    elif isinstance(node, Pow):
        _collect_abs(node.a, seen)
    elif isinstance(node, (Add, Sub, Mul, Min, Max)):
        _collect_abs(node.a, seen)
        _collect_abs(node.b, seen)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_NUM_RE = re.compile(r"\d+(?:\.\d*)?(?:[eE][+-]?\d+)?")
_NAME_RE = re.compile(r"[A-Za-z]+")
_INT_RE = re.compile(r"\d+$")


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _line_col(self, pos: int) -> tuple[int, int]:
        line = self.text.count("\n", 0, pos) + 1
        start = self.text.rfind("\n", 0, pos) + 1
        return line, pos - start + 1

    def error(self, message: str, pos: int | None = None):
        line, col = self._line_col(self.pos if pos is None else pos)
        raise ExprSyntaxError(message, line, col)

    def _skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str | None:
        self._skip_ws()
        if self.pos >= len(self.text):
            return None
        return self.text[self.pos]

    def next_token(self) -> tuple[str, str, int]:
        """Returns (kind, value, pos); kind in num|name|op|end."""
        self._skip_ws()
        if self.pos >= len(self.text):
            return ("end", "", self.pos)
        start = self.pos
        ch = self.text[start]
        if ch in "+-*(),":
            self.pos += 1
            return ("op", ch, start)
        m = _NUM_RE.match(self.text, start)
        if m:
            self.pos = m.end()
            return ("num", m.group(), start)
        m = _NAME_RE.match(self.text, start)
        if m:
            self.pos = m.end()
            return ("name", m.group(), start)
        self.error(f"unexpected character {ch!r}")

    def expect(self, value: str):
        kind, tok, pos = self.next_token()
        if tok != value:
            self.error(f"expected {value!r}, got {tok!r}" if tok else f"expected {value!r}",
                       pos)


class _Parser:
    def __init__(self, text: str, dim_x: int, dim_y: int):
        self.tk = _Tokenizer(text)
        self.dim_x = dim_x
        self.dim_y = dim_y

    def parse(self) -> Node:
        node = self.expr()
        kind, tok, pos = self.tk.next_token()
        if kind != "end":
            self.tk.error(f"unexpected trailing input {tok!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tk.peek() in ("+", "-"):
            _, op, _ = self.tk.next_token()
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.tk.peek() == "*":
            self.tk.next_token()
            node = Mul(node, self.factor())
        return node

    def factor(self) -> Node:
        if self.tk.peek() == "-":
            self.tk.next_token()
            a = self.atom()
            # fold literals so negative constants round-trip exactly
            if isinstance(a, Const):
                return Const(-a.value)
            return Neg(a)
        return self.atom()

    def atom(self) -> Node:
        kind, tok, pos = self.tk.next_token()
        if kind == "num":
            return Const(float(tok))
        if kind == "op" and tok == "(":
            node = self.expr()
            self.tk.expect(")")
            return node
        if kind == "name":
            if tok in ("x", "y"):
                return self._variable(tok, pos)
            if tok == "abs":
                self.tk.expect("(")
                a = self.expr()
                self.tk.expect(")")
                return Abs(a)
            if tok in ("min", "max"):
                self.tk.expect("(")
                a = self.expr()
                self.tk.expect(",")
                b = self.expr()
                self.tk.expect(")")
                return Min(a, b) if tok == "min" else Max(a, b)
            if tok == "pow":
                self.tk.expect("(")
                a = self.expr()
                self.tk.expect(",")
                nk, ntok, npos = self.tk.next_token()
                if nk != "num" or not _INT_RE.match(ntok):
                    self.tk.error("pow exponent must be a positive integer", npos)
                n = int(ntok)
                if n < 1:
                    self.tk.error("pow exponent must be a positive integer", npos)
                self.tk.expect(")")
                return Pow(a, n)
            self.tk.error(f"unknown function or variable {tok!r}", pos)
        self.tk.error(f"expected an atom, got {tok!r}" if tok else "unexpected end of input",
                      pos)

    def _variable(self, block: str, pos: int) -> Var:
        # index digits must be adjacent to the block letter: "x0", "y12"
        m = re.match(r"\d+", self.tk.text[self.tk.pos:])
        if not m:
            self.tk.error(f"variable {block!r} requires an index, e.g. {block}0", pos)
        self.tk.pos += m.end()
        index = int(m.group())
        dim = self.dim_x if block == "x" else self.dim_y
        if index >= dim:
            self.tk.error(f"variable {block}{index} out of range (dim {dim})", pos)
        return Var(block, index)


def parse(text: str, dim_x: int, dim_y: int) -> ExprProgram:
    """Parse a DSL string into an ExprProgram.

    Raises ExprSyntaxError with line/column on malformed input, and on
    variable indices outside [0, dim) or non-positive-integer exponents.
    """
    root = _Parser(text, dim_x, dim_y).parse()
    return ExprProgram(root, dim_x, dim_y)


# ---------------------------------------------------------------------------
# Printing (round-trips through parse)
# ---------------------------------------------------------------------------

_LVL_EXPR, _LVL_TERM, _LVL_FACTOR = 0, 1, 2


def _fmt(node: Node, level: int) -> str:
    if isinstance(node, Const):
        s = repr(node.value)
        if node.value < 0 and level > _LVL_FACTOR:
            return f"({s})"
        return s
    if isinstance(node, Var):
        return f"{node.block}{node.index}"
    if isinstance(node, Abs):
        return f"abs({_fmt(node.a, _LVL_EXPR)})"
    if isinstance(node, Min):
        return f"min({_fmt(node.a, _LVL_EXPR)}, {_fmt(node.b, _LVL_EXPR)})"
    if isinstance(node, Max):
        return f"max({_fmt(node.a, _LVL_EXPR)}, {_fmt(node.b, _LVL_EXPR)})"
    if isinstance(node, Pow):
        return f"pow({_fmt(node.a, _LVL_EXPR)}, {node.n})"
    if isinstance(node, Neg):
        s = "-" + _fmt(node.a, _LVL_FACTOR + 1)
        return s if level <= _LVL_FACTOR else f"({s})"
    if isinstance(node, (Add, Sub)):
        op = "+" if isinstance(node, Add) else "-"
        s = f"{_fmt(node.a, _LVL_EXPR)} {op} {_fmt(node.b, _LVL_TERM)}"
        return s if level <= _LVL_EXPR else f"({s})"
    if isinstance(node, Mul):
        s = f"{_fmt(node.a, _LVL_TERM)}*{_fmt(node.b, _LVL_FACTOR)}"
        return s if level <= _LVL_TERM else f"({s})"
    raise ExprError(f"unknown node type {type(node).__name__}")


def to_text(node: Node | ExprProgram) -> str:
    if isinstance(node, ExprProgram):
        node = node.root
    return _fmt(node, _LVL_EXPR)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _check_dims(prog: ExprProgram, x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] != prog.dim_x or y.shape[0] != prog.dim_y:
        raise ExprError(
            f"dimension mismatch: expected ({prog.dim_x}, {prog.dim_y}), "
            f"got ({x.shape[0]}, {y.shape[0]})")
    return x, y


def _eval_node(node: Node, x, y):
    # Works elementwise when x/y rows are arrays (used for grid evaluation).
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return x[node.index] if node.block == "x" else y[node.index]
    if isinstance(node, Neg):
        return -_eval_node(node.a, x, y)
    if isinstance(node, Add):
        return _eval_node(node.a, x, y) + _eval_node(node.b, x, y)
    if isinstance(node, Sub):
        return _eval_node(node.a, x, y) - _eval_node(node.b, x, y)
    if isinstance(node, Mul):
        return _eval_node(node.a, x, y) * _eval_node(node.b, x, y)
    if isinstance(node, Pow):
        return _eval_node(node.a, x, y) ** node.n
    if isinstance(node, Abs):
        return np.abs(_eval_node(node.a, x, y))
    if isinstance(node, Min):
        return np.minimum(_eval_node(node.a, x, y), _eval_node(node.b, x, y))
    if isinstance(node, Max):
        return np.maximum(_eval_node(node.a, x, y), _eval_node(node.b, x, y))
    raise ExprError(f"unknown node type {type(node).__name__}")


def eval(prog: ExprProgram, x, y) -> float:  # noqa: A001 - deliberate shadow
    """Evaluate F(x, y) by exact recursive descent (native min/max)."""
    x, y = _check_dims(prog, x, y)
    return float(_eval_node(prog.root, x, y))


def eval_many(prog: ExprProgram, x, ys: np.ndarray) -> np.ndarray:
    """Evaluate F(x, y) for each row of ``ys`` (shape (N, r)) at fixed x."""
    x = np.asarray(x, dtype=float)
    cols = [ys[:, j] for j in range(ys.shape[1])]
    out = _eval_node(prog.root, x, cols)
    return np.broadcast_to(np.asarray(out, dtype=float), (ys.shape[0],)).copy()


# ---------------------------------------------------------------------------
# Selection gradients
# ---------------------------------------------------------------------------

def _eval_grad(node: Node, x, y, signs: dict[Abs, float], dim: int,
               xoff: int, yoff: int):
    """Forward-mode value+gradient of one smooth selection (lowered tree)."""
    if isinstance(node, Const):
        return node.value, np.zeros(dim)
    if isinstance(node, Var):
        g = np.zeros(dim)
        if node.block == "x":
            g[xoff + node.index] = 1.0
            return x[node.index], g
        g[yoff + node.index] = 1.0
        return y[node.index], g
    if isinstance(node, Neg):
        v, g = _eval_grad(node.a, x, y, signs, dim, xoff, yoff)
        return -v, -g
    if isinstance(node, Add):
        va, ga = _eval_grad(node.a, x, y, signs, dim, xoff, yoff)
        vb, gb = _eval_grad(node.b, x, y, signs, dim, xoff, yoff)
        return va + vb, ga + gb
    if isinstance(node, Sub):
        va, ga = _eval_grad(node.a, x, y, signs, dim, xoff, yoff)
        vb, gb = _eval_grad(node.b, x, y, signs, dim, xoff, yoff)
        return va - vb, ga - gb
    if isinstance(node, Mul):
        va, ga = _eval_grad(node.a, x, y, signs, dim, xoff, yoff)
        vb, gb = _eval_grad(node.b, x, y, signs, dim, xoff, yoff)
        return va * vb, vb * ga + va * gb
    if isinstance(node, Pow):
        va, ga = _eval_grad(node.a, x, y, signs, dim, xoff, yoff)
        return va ** node.n, node.n * va ** (node.n - 1) * ga
    if isinstance(node, Abs):
        va, ga = _eval_grad(node.a, x, y, signs, dim, xoff, yoff)
        if node in signs:
            s = signs[node]
        else:
            s = 1.0 if va > 0 else (-1.0 if va < 0 else 0.0)
        return abs(va), s * ga
    raise ExprError(f"unknown node type {type(node).__name__}")


def kink_args(prog: ExprProgram, x, y) -> list[float]:
    """Argument values of the unique abs kinks at (x, y), in preorder."""
    x, y = _check_dims(prog, x, y)
    return [float(_eval_node(node.a, x, y)) for node in prog.abs_nodes]


def _active_kinks(prog: ExprProgram, x, y, eps_kink: float) -> list[Abs]:
    vals = kink_args(prog, x, y)
    return [node for node, v in zip(prog.abs_nodes, vals) if abs(v) <= eps_kink]


_TIE_SIGMA = {"left": -1.0, "right": 1.0, "zero": 0.0}
_SIGMA_CHAR = {-1.0: "-", 1.0: "+", 0.0: "0"}


def grad_select(prog: ExprProgram, x, y, tie_policy: str = "zero",
                eps_kink: float = 0.0) -> GradElement:
    """One conservative-gradient element of F at (x, y).

    At active kinks the sign is fixed by ``tie_policy``: 'left' (-1),
    'right' (+1) or 'zero' (average of the two one-sided selections, itself
    a convex combination of limiting gradients and hence a Clarke element).
    Away from kinks this is the classical gradient.
    """
    x, y = _check_dims(prog, x, y)
    if tie_policy not in _TIE_SIGMA:
        raise ExprError(f"tie_policy must be one of {sorted(_TIE_SIGMA)}")
    sigma = _TIE_SIGMA[tie_policy]
    active = _active_kinks(prog, x, y, eps_kink)
    signs = {node: sigma for node in active}
    dim = prog.dim_x + prog.dim_y
    _, g = _eval_grad(prog.lowered, x, y, signs, dim, 0, prog.dim_x)
    branch_id = _SIGMA_CHAR[sigma] * len(active)
    return GradElement(u=g[:prog.dim_x].copy(), v=g[prog.dim_x:].copy(),
                       branch_id=branch_id)


def subdiff_sample(prog: ExprProgram, x, y, max_branches: int,
                   eps_kink: float = 0.0) -> SubdiffSample:
    """Enumerate smooth-selection gradients by flipping every active kink.

    Branches are enumerated in binary order over the active kinks (bit j set
    means sign +1 at kink j), so the output is deterministic.  When 2^k
    exceeds ``max_branches`` the enumeration is truncated (the all-plus
    branch is still forced in, so both one-sided grad_select elements are
    always present) and the sample is marked incomplete.
    """
    x, y = _check_dims(prog, x, y)
    if max_branches < 1:
        raise ExprError("max_branches must be >= 1")
    active = _active_kinks(prog, x, y, eps_kink)
    k = len(active)
    total = 1 << k
    incomplete = total > max_branches
    indices = list(range(min(total, max_branches)))
    if incomplete and (total - 1) not in indices:
        indices.append(total - 1)

    dim = prog.dim_x + prog.dim_y
    elements: list[GradElement] = []
    seen: set[bytes] = set()
    for idx in indices:
        signs = {}
        chars = []
        for j, node in enumerate(active):
            s = 1.0 if (idx >> j) & 1 else -1.0
            signs[node] = s
            chars.append(_SIGMA_CHAR[s])
        _, g = _eval_grad(prog.lowered, x, y, signs, dim, 0, prog.dim_x)
        key = g.tobytes()
        if key in seen:
            continue
        seen.add(key)
        elements.append(GradElement(u=g[:prog.dim_x].copy(),
                                    v=g[prog.dim_x:].copy(),
                                    branch_id="".join(chars)))
    return SubdiffSample(elements=elements, incomplete=incomplete)


def fd_check(prog: ExprProgram, x, y, h: float) -> float:
    """Max relative discrepancy between grad_select and central differences.

    The caller must keep (x, y) at least h away from every kink surface;
    this is checked by sampling: if any abs argument changes sign (or dies)
    across the stencil, an ExprError is raised.
    """
    x, y = _check_dims(prog, x, y)
    base_args = kink_args(prog, x, y)
    base_signs = [math.copysign(1.0, a) if a != 0 else 0.0 for a in base_args]
    if any(s == 0.0 for s in base_signs):
        raise ExprError("query point lies on a kink surface")

    g = grad_select(prog, x, y)
    grad = np.concatenate([g.u, g.v])
    p, r = prog.dim_x, prog.dim_y
    fd = np.zeros(p + r)
    for i in range(p + r):
        def shifted(sign):
            xs, ys = x.copy(), y.copy()
            if i < p:
                xs[i] += sign * h
            else:
                ys[i - p] += sign * h
            return xs, ys

        for s in (+1, -1):
            xs, ys = shifted(s)
            args = kink_args(prog, xs, ys)
            for a, bs in zip(args, base_signs):
                if a == 0.0 or math.copysign(1.0, a) != bs:
                    raise ExprError("kink surface within h of the FD stencil")
        xp, yp = shifted(+1)
        xm, ym = shifted(-1)
        fd[i] = (eval(prog, xp, yp) - eval(prog, xm, ym)) / (2 * h)
    denom = np.maximum(1.0, np.maximum(np.abs(grad), np.abs(fd)))
    return float(np.max(np.abs(grad - fd) / denom))
