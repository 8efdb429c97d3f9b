"""Binary equation ASTs: parsing, prefix serialization, numeric evaluation.

Equations are strictly binary trees over the operators ``+ - * / ^`` with
number-slot tokens (``n1``, ``n2``, ...) and literal constants at the
leaves. The space-joined prefix serialization of a tree doubles as its
template key; two problems share a template iff the serializations are
identical.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import (
    DivisionByZero,
    EquationSyntaxError,
    EvaluationError,
    MissingSlot,
    UnknownToken,
)

OPERATORS = ("+", "-", "*", "/", "^")
PI = 3.141592653589793
PI_TOKEN = "pi"
ANS_TOKEN = "ans"

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}
_RIGHT_ASSOC = frozenset("^")
_SLOT_RE = re.compile(r"n_?([1-9]\d*)$")
_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?$")

# unicode operator spellings accepted on input, normalized to ASCII
_OP_ALIASES = {"−": "-", "×": "*", "÷": "/", "·": "*", "π": PI_TOKEN}


@dataclass(frozen=True)
class EquationTree:
    """One AST node: an operator with exactly two children, or a leaf."""

    label: str
    children: tuple["EquationTree", ...] = ()

    def __post_init__(self):
        if self.children:
            if len(self.children) != 2:
                raise ValueError("operator nodes take exactly two children")
            if self.label not in OPERATORS:
                raise ValueError(f"unknown operator {self.label!r}")

    @property
    def is_leaf(self) -> bool:
        return not self.children


def op_node(op: str, left: EquationTree, right: EquationTree) -> EquationTree:
    return EquationTree(op, (left, right))


def leaf(label: str) -> EquationTree:
    return EquationTree(label)


def number_leaf(value: float) -> EquationTree:
    return EquationTree(format_number(value))


def format_number(value: float) -> str:
    """Canonical label for a numeric literal: '2' not '2.0', else repr."""
    value = float(value)
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def is_slot(label: str) -> bool:
    return _SLOT_RE.match(label) is not None


def slot_index(label: str) -> int:
    m = _SLOT_RE.match(label)
    if m is None:
        raise ValueError(f"not a slot token: {label!r}")
    return int(m.group(1))


def slot_name(index: int) -> str:
    return f"n{index}"


def node_count(tree: EquationTree) -> int:
    total = 1
    for child in tree.children:
        total += node_count(child)
    return total


def iter_nodes(tree: EquationTree):
    yield tree
    for child in tree.children:
        yield from iter_nodes(child)


def slot_names(tree: EquationTree) -> list[str]:
    """Slot tokens referenced by the tree, in left-to-right appearance order."""
    seen: list[str] = []
    for node in iter_nodes(tree):
        if node.is_leaf and is_slot(node.label) and node.label not in seen:
            seen.append(node.label)
    return seen


def map_slots(tree: EquationTree, mapping: dict[str, str]) -> EquationTree:
    """Rewrite leaves through ``mapping``; everything else is untouched."""
    if tree.is_leaf:
        if tree.label in mapping:
            return EquationTree(mapping[tree.label])
        return tree
    return EquationTree(tree.label, tuple(map_slots(c, mapping) for c in tree.children))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<slot>n_?[1-9]\d*)"
    r"|(?P<num>\d+(?:\.\d+)?)"
    r"|(?P<pi>pi|π)"
    r"|(?P<ans>ans)"
    r"|(?P<op>[+\-*/^×÷−·])"
    r"|(?P<lparen>\()"
    r"|(?P<rparen>\))"
    r")"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise UnknownToken(f"unknown token {rest.split()[0]!r} at position {pos}")
        kind = m.lastgroup
        value = m.group(kind)
        if kind == "op":
            value = _OP_ALIASES.get(value, value)
        elif kind == "slot":
            value = slot_name(int(_SLOT_RE.match(value).group(1)))
        elif kind == "pi":
            value = PI_TOKEN
        tokens.append((kind, value, m.start(kind)))
        pos = m.end()
    return tokens


class _Parser:
    """Precedence-climbing parser; unary minus is rewritten to (0 - x)."""

    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None, None)

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def parse(self) -> EquationTree:
        tree = self.expr(1)
        kind, value, position = self.peek()
        if kind is not None:
            raise EquationSyntaxError(f"unexpected {value!r}", position)
        return tree

    def expr(self, min_prec: int) -> EquationTree:
        left = self.atom()
        while True:
            kind, value, _ = self.peek()
            if kind != "op" or value not in _PRECEDENCE:
                break
            prec = _PRECEDENCE[value]
            if prec < min_prec:
                break
            self.next()
            next_min = prec if value in _RIGHT_ASSOC else prec + 1
            right = self.expr(next_min)
            left = op_node(value, left, right)
        return left

    def atom(self) -> EquationTree:
        kind, value, position = self.next()
        if kind == "op" and value == "-":
            # unary minus: keep the tree strictly binary
            operand = self.expr(_PRECEDENCE["^"])
            return op_node("-", leaf("0"), operand)
        if kind == "lparen":
            inner = self.expr(1)
            kind, value, position = self.next()
            if kind != "rparen":
                raise EquationSyntaxError("expected ')'", position)
            return inner
        if kind == "num":
            return number_leaf(float(value))
        if kind in ("slot", "pi", "ans"):
            return leaf(value)
        if kind is None:
            raise EquationSyntaxError("unexpected end of input")
        raise EquationSyntaxError(f"unexpected {value!r}", position)


def parse_equation(text: str) -> EquationTree:
    """Parse an infix equation string into an :class:`EquationTree`.

    Standard precedence (``^`` above ``* /`` above ``+ -``), left
    associativity except for ``^``, parentheses honored.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise EquationSyntaxError("empty equation")
    return _Parser(tokens).parse()


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def to_prefix(tree: EquationTree) -> list[str]:
    out: list[str] = []

    def walk(node: EquationTree):
        out.append(node.label)
        for child in node.children:
            walk(child)

    walk(tree)
    return out


def template_key(tree: EquationTree) -> str:
    return " ".join(to_prefix(tree))


def parse_prefix(tokens) -> EquationTree:
    """Inverse of :func:`to_prefix`; accepts a token list or a joined string."""
    if isinstance(tokens, str):
        tokens = tokens.split()
    pos = 0

    def take() -> EquationTree:
        nonlocal pos
        if pos >= len(tokens):
            raise EquationSyntaxError("truncated prefix expression")
        label = tokens[pos]
        pos += 1
        if label in OPERATORS:
            left = take()
            right = take()
            return op_node(label, left, right)
        if is_slot(label):
            return leaf(slot_name(slot_index(label)))
        if label in (PI_TOKEN, "π"):
            return leaf(PI_TOKEN)
        if label == ANS_TOKEN:
            return leaf(ANS_TOKEN)
        if _NUMBER_RE.match(label):
            return number_leaf(float(label))
        raise UnknownToken(f"unknown prefix token {label!r}")

    tree = take()
    if pos != len(tokens):
        raise EquationSyntaxError(f"trailing prefix tokens: {tokens[pos:]}")
    return tree


def render_infix(tree: EquationTree) -> str:
    """Infix rendering with minimal parentheses; parses back to the same tree."""

    def render(node: EquationTree, parent_prec: int, is_right: bool) -> str:
        if node.is_leaf:
            return node.label
        prec = _PRECEDENCE[node.label]
        left = render(node.children[0], prec, node.label in _RIGHT_ASSOC)
        right = render(node.children[1], prec, node.label not in _RIGHT_ASSOC)
        text = f"{left}{node.label}{right}"
        if prec < parent_prec or (prec == parent_prec and is_right):
            return f"({text})"
        return text

    return render(tree, 0, False)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def leaf_value(label: str, assignment: dict[str, float]) -> float:
    if is_slot(label) or label == ANS_TOKEN:
        if label not in assignment:
            raise MissingSlot(f"no value for {label!r}")
        return float(assignment[label])
    if label == PI_TOKEN:
        return PI
    if _NUMBER_RE.match(label):
        return float(label)
    raise UnknownToken(f"cannot evaluate leaf {label!r}")


def evaluate(tree: EquationTree, assignment: dict[str, float]) -> float:
    """Evaluate the tree under a slot assignment; plain float arithmetic."""
    if tree.is_leaf:
        return leaf_value(tree.label, assignment)
    left = evaluate(tree.children[0], assignment)
    right = evaluate(tree.children[1], assignment)
    op = tree.label
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        if right == 0.0:
            raise DivisionByZero(f"{left} / 0")
        return left / right
    if op == "^":
        try:
            result = left ** right
        except ZeroDivisionError:
            raise DivisionByZero(f"0 ^ {right}") from None
        except OverflowError as exc:
            raise EvaluationError(str(exc)) from None
        if isinstance(result, complex):
            raise EvaluationError(f"complex result for {left} ^ {right}")
        return result
    raise UnknownToken(f"unknown operator {op!r}")
