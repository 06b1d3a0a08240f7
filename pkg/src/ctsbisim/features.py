"""Feature universes, configurations, and propositional guard expressions.

The universe fixes the feature names (which double as the default BDD
variable order) and the subset of upgrade features.  Configurations are
frozensets of feature names; switching an upgrade feature *on* moves a
configuration *down* in the upgrade order.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Collection, Iterable, Iterator

from .errors import ExprError, UnknownFeature

Config = frozenset


@dataclass(frozen=True)
class FeatureUniverse:
    features: tuple[str, ...]
    upgrade: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "upgrade", frozenset(self.upgrade))
        if len(set(self.features)) != len(self.features):
            raise UnknownFeature("duplicate feature names: %r" % (self.features,))
        stray = self.upgrade - set(self.features)
        if stray:
            raise UnknownFeature("upgrade features not declared: %s" % sorted(stray))

    def __len__(self) -> int:
        return len(self.features)

    def configurations(self) -> Iterator[Config]:
        """All subsets of the features (exponential; keep universes small)."""
        for r in range(len(self.features) + 1):
            for combo in combinations(self.features, r):
                yield frozenset(combo)


def upgrade_leq(c: Collection[str], c_prime: Collection[str], universe: FeatureUniverse) -> bool:
    """C <= C': C' with some upgrade features switched on, all else equal."""
    c, c_prime = frozenset(c), frozenset(c_prime)
    upgrade = universe.upgrade
    if not (c_prime & upgrade) <= c:
        return False
    return c - upgrade == c_prime - upgrade


def config_name(config: Collection[str]) -> str:
    """Canonical printable name of a configuration, e.g. ``{enc,ssl}``."""
    return "{%s}" % ",".join(sorted(config))


def sort_configs(configs: Iterable[Config]) -> list[Config]:
    """Deterministic configuration order: by size, then by sorted names."""
    return sorted(configs, key=lambda c: (len(c), tuple(sorted(c))))


# --- expression AST -----------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Not:
    arg: "FeatureExpr"


@dataclass(frozen=True)
class And:
    left: "FeatureExpr"
    right: "FeatureExpr"


@dataclass(frozen=True)
class Or:
    left: "FeatureExpr"
    right: "FeatureExpr"


@dataclass(frozen=True)
class Imp:
    left: "FeatureExpr"
    right: "FeatureExpr"


FeatureExpr = Atom | Const | Not | And | Or | Imp

TRUE = Const(True)
FALSE = Const(False)


def evaluate(expr: FeatureExpr, config: Collection[str]) -> bool:
    if isinstance(expr, Atom):
        return expr.name in config
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Not):
        return not evaluate(expr.arg, config)
    if isinstance(expr, And):
        return evaluate(expr.left, config) and evaluate(expr.right, config)
    if isinstance(expr, Or):
        return evaluate(expr.left, config) or evaluate(expr.right, config)
    if isinstance(expr, Imp):
        return (not evaluate(expr.left, config)) or evaluate(expr.right, config)
    raise TypeError("not a feature expression: %r" % (expr,))


def atoms(expr: FeatureExpr) -> frozenset[str]:
    if isinstance(expr, Atom):
        return frozenset((expr.name,))
    if isinstance(expr, Const):
        return frozenset()
    if isinstance(expr, Not):
        return atoms(expr.arg)
    return atoms(expr.left) | atoms(expr.right)


def check_atoms(expr: FeatureExpr, universe: FeatureUniverse) -> None:
    stray = atoms(expr) - set(universe.features)
    if stray:
        raise UnknownFeature("undeclared features in expression: %s" % sorted(stray))


def to_text(expr: FeatureExpr) -> str:
    """Render back to the input grammar (parenthesized binary operators)."""
    if isinstance(expr, Atom):
        return expr.name
    if isinstance(expr, Const):
        return "true" if expr.value else "false"
    if isinstance(expr, Not):
        arg = to_text(expr.arg)
        if isinstance(expr.arg, (Atom, Const, Not)):
            return "!" + arg
        return "!(%s)" % arg
    op = {And: "&", Or: "|", Imp: "->"}[type(expr)]
    return "(%s %s %s)" % (to_text(expr.left), op, to_text(expr.right))


# --- parser --------------------------------------------------------------------
#
# expr := atom | "true" | "false" | "!" expr | expr "&" expr
#       | expr "|" expr | expr "->" expr | "(" expr ")"
# precedence ! > & > | > ->, with "->" right-associative.

_SYMBOLS = ("->", "(", ")", "!", "&", "|")


def _tokenize(text: str) -> list[str]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if text.startswith("->", i):
            tokens.append("->")
            i += 2
            continue
        if ch in "()!&|":
            tokens.append(ch)
            i += 1
            continue
        if ch.isalnum() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_."):
                j += 1
            tokens.append(text[i:j])
            i = j
            continue
        raise ExprError("unexpected character %r at position %d in %r" % (ch, i, text))
    return tokens


class _Parser:
    def __init__(self, tokens: list[str], text: str):
        self.tokens = tokens
        self.pos = 0
        self.text = text

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ExprError("unexpected end of expression in %r" % self.text)
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.take()
        if got != tok:
            raise ExprError("expected %r but found %r in %r" % (tok, got, self.text))

    def parse_imp(self) -> FeatureExpr:
        left = self.parse_or()
        if self.peek() == "->":
            self.take()
            return Imp(left, self.parse_imp())
        return left

    def parse_or(self) -> FeatureExpr:
        node = self.parse_and()
        while self.peek() == "|":
            self.take()
            node = Or(node, self.parse_and())
        return node

    def parse_and(self) -> FeatureExpr:
        node = self.parse_unary()
        while self.peek() == "&":
            self.take()
            node = And(node, self.parse_unary())
        return node

    def parse_unary(self) -> FeatureExpr:
        tok = self.take()
        if tok == "!":
            return Not(self.parse_unary())
        if tok == "(":
            inner = self.parse_imp()
            self.expect(")")
            return inner
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        if tok in _SYMBOLS:
            raise ExprError("unexpected token %r in %r" % (tok, self.text))
        return Atom(tok)


def parse_expr(text: str) -> FeatureExpr:
    parser = _Parser(_tokenize(text), text)
    expr = parser.parse_imp()
    if parser.peek() is not None:
        raise ExprError("trailing input %r in %r" % (parser.peek(), text))
    return expr
