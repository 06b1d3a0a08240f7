"""Transition-system models: conditional, lattice, and featured variants.

All three classes are immutable after validation and convert into each
other along the duality between monotone condition maps and
downward-closed guard sets.  Featured systems additionally carry a feature
universe; their admissible configurations, ordered by upgrades, become the
condition poset of the derived lattice system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from . import features as ft
from .errors import (
    GuardNotDownwardClosed,
    ModelError,
    UnknownCondition,
)
from .features import FeatureExpr, FeatureUniverse, upgrade_leq
from .poset import ConditionPoset, LatticeElement, iter_bits


def _check_names(kind: str, names) -> tuple[str, ...]:
    names = tuple(names)
    if not all(isinstance(n, str) and n for n in names):
        raise ModelError("%s must be non-empty strings: %r" % (kind, names))
    if len(set(names)) != len(names):
        raise ModelError("duplicate %s: %r" % (kind, names))
    return names


def close_precedence(pairs: Iterable[tuple[str, str]], alphabet: Iterable[str]) -> frozenset:
    """Transitive closure of (higher, lower) pairs; must stay irreflexive."""
    alphabet = set(alphabet)
    closed = set()
    for hi, lo in pairs:
        if hi not in alphabet or lo not in alphabet:
            raise ModelError("precedence pair (%r, %r) references unknown actions" % (hi, lo))
        closed.add((hi, lo))
    changed = True
    while changed:
        changed = False
        for a, b in list(closed):
            for c, d in list(closed):
                if b == c and (a, d) not in closed:
                    closed.add((a, d))
                    changed = True
    for a, b in closed:
        if a == b:
            raise ModelError("precedence is not a strict order: %r > %r" % (a, b))
    return frozenset(closed)


@dataclass(frozen=True)
class Lts:
    """A plain labelled transition system (one instantiated condition)."""

    states: tuple[str, ...]
    alphabet: tuple[str, ...]
    moves: Mapping[tuple[str, str], frozenset]

    def successors(self, x: str, a: str) -> frozenset:
        return self.moves.get((x, a), frozenset())


class Cts:
    """Conditional transition system: per-condition successor sets.

    The transition function must be monotone, i.e. upgrading (moving to a
    smaller condition) can only add successors.  Equivalently, the guard
    set of every (source, action, target) triple is downward-closed; that
    is what validation checks.
    """

    def __init__(self, states, alphabet, poset: ConditionPoset, trans, precedence=()):
        self.states = _check_names("states", states)
        self.alphabet = _check_names("alphabet", alphabet)
        self.poset = poset
        self.precedence = close_precedence(precedence, self.alphabet)
        state_set = set(self.states)
        normalized: dict[tuple[str, str, str], frozenset] = {}
        for (x, a, cond), targets in trans.items():
            if x not in state_set:
                raise ModelError("unknown source state %r" % (x,))
            if a not in self.alphabet:
                raise ModelError("unknown action %r" % (a,))
            if cond not in poset.index:
                raise UnknownCondition("unknown condition %r" % (cond,))
            targets = frozenset(targets)
            stray = targets - state_set
            if stray:
                raise ModelError("unknown target states %s" % sorted(stray))
            if targets:
                normalized[(x, a, cond)] = targets
        self.trans = normalized
        self._guards = self._guard_bits()
        for (x, a, y), bits in self._guards.items():
            if not poset.is_down_closed_bits(bits):
                raise ModelError(
                    "transition function is not monotone: guard of (%s, %s, %s) is {%s}"
                    % (x, a, y, ", ".join(poset.names_of_bits(bits)))
                )

    def _guard_bits(self) -> dict[tuple[str, str, str], int]:
        guards: dict[tuple[str, str, str], int] = {}
        for (x, a, cond), targets in self.trans.items():
            bit = 1 << self.poset.index[cond]
            for y in targets:
                guards[(x, a, y)] = guards.get((x, a, y), 0) | bit
        return guards

    def successors(self, x: str, a: str, cond: str) -> frozenset:
        if cond not in self.poset.index:
            raise UnknownCondition("unknown condition %r" % (cond,))
        return self.trans.get((x, a, cond), frozenset())

    def instantiate(self, cond: str) -> Lts:
        """The labelled transition system active under one condition."""
        if cond not in self.poset.index:
            raise UnknownCondition("unknown condition %r" % (cond,))
        moves = {
            (x, a): targets
            for (x, a, c), targets in self.trans.items()
            if c == cond
        }
        return Lts(self.states, self.alphabet, moves)

    def instantiate_prec(self, cond: str) -> Lts:
        """Instantiation with action precedence: a transition survives only
        if no higher-priority action is enabled at the same source."""
        plain = self.instantiate(cond)
        if not self.precedence:
            return plain
        higher = {}
        for hi, lo in self.precedence:
            higher.setdefault(lo, set()).add(hi)
        moves = {}
        for (x, a), targets in plain.moves.items():
            blocked = any(plain.successors(x, hi) for hi in higher.get(a, ()))
            if not blocked:
                moves[(x, a)] = targets
        return Lts(self.states, self.alphabet, moves)

    def __eq__(self, other):
        if not isinstance(other, Cts):
            return NotImplemented
        return (
            self.states == other.states
            and self.alphabet == other.alphabet
            and self.poset == other.poset
            and self.trans == other.trans
            and self.precedence == other.precedence
        )


class Lats:
    """Lattice transition system: guards are downward-closed condition sets."""

    def __init__(self, states, alphabet, poset: ConditionPoset, alpha, precedence=(), close=False):
        self.states = _check_names("states", states)
        self.alphabet = _check_names("alphabet", alphabet)
        self.poset = poset
        self.precedence = close_precedence(precedence, self.alphabet)
        state_set = set(self.states)
        guards: dict[tuple[str, str, str], int] = {}
        for (x, a, y), guard in alpha.items():
            if x not in state_set or y not in state_set:
                raise ModelError("transition (%r, %r, %r) references unknown states" % (x, a, y))
            if a not in self.alphabet:
                raise ModelError("unknown action %r" % (a,))
            if isinstance(guard, LatticeElement):
                if guard.poset != poset:
                    raise ModelError("guard of (%s, %s, %s) uses a different poset" % (x, a, y))
                bits = guard.bits
            elif isinstance(guard, int):
                bits = guard
            else:
                bits = poset.bits_of_names(guard)
            if close:
                bits = poset.close_down_bits(bits)
            elif not poset.is_down_closed_bits(bits):
                raise GuardNotDownwardClosed(
                    "guard of (%s, %s, %s) is not downward-closed: {%s}"
                    % (x, a, y, ", ".join(poset.names_of_bits(bits)))
                )
            if bits:
                guards[(x, a, y)] = bits
        self.alpha = guards

    def guard_bits(self, x: str, a: str, y: str) -> int:
        return self.alpha.get((x, a, y), 0)

    def guard(self, x: str, a: str, y: str) -> LatticeElement:
        return LatticeElement(self.poset, self.guard_bits(x, a, y))

    def __eq__(self, other):
        if not isinstance(other, Lats):
            return NotImplemented
        return (
            self.states == other.states
            and self.alphabet == other.alphabet
            and self.poset == other.poset
            and self.alpha == other.alpha
            and self.precedence == other.precedence
        )


@dataclass(frozen=True)
class Fts:
    """Featured transition system plus its feature diagram."""

    universe: FeatureUniverse
    states: tuple[str, ...]
    alphabet: tuple[str, ...]
    trans: Mapping[tuple[str, str, str], FeatureExpr]
    diagram: FeatureExpr = ft.TRUE
    precedence: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "states", _check_names("states", self.states))
        object.__setattr__(self, "alphabet", _check_names("alphabet", self.alphabet))
        object.__setattr__(self, "trans", dict(self.trans))
        object.__setattr__(
            self, "precedence", close_precedence(self.precedence, self.alphabet)
        )
        state_set = set(self.states)
        ft.check_atoms(self.diagram, self.universe)
        for (x, a, y), expr in self.trans.items():
            if x not in state_set or y not in state_set:
                raise ModelError("transition (%r, %r, %r) references unknown states" % (x, a, y))
            if a not in self.alphabet:
                raise ModelError("unknown action %r" % (a,))
            ft.check_atoms(expr, self.universe)

    def admissible_configs(self) -> list[ft.Config]:
        """Configurations satisfying the diagram, in canonical order."""
        return ft.sort_configs(
            c for c in self.universe.configurations() if ft.evaluate(self.diagram, c)
        )


# --- conversions -----------------------------------------------------------------


def cts_to_lats(c: Cts) -> Lats:
    """Guard of (x, a, y) is the set of conditions enabling it; monotonicity
    of the transition function makes every guard downward-closed."""
    return Lats(c.states, c.alphabet, c.poset, dict(c._guards), precedence=c.precedence)


def lats_to_cts(l: Lats) -> Cts:
    trans: dict[tuple[str, str, str], set] = {}
    for (x, a, y), bits in l.alpha.items():
        for i in iter_bits(bits):
            trans.setdefault((x, a, l.poset.elements[i]), set()).add(y)
    return Cts(l.states, l.alphabet, l.poset, trans, precedence=l.precedence)


def config_poset(configs: list[ft.Config], universe: FeatureUniverse) -> ConditionPoset:
    """The upgrade order on a set of configurations, as a condition poset.

    Condition names are the canonical configuration strings.  Order rows
    are computed directly; the upgrade order is a partial order by
    construction, so the generic closure validation is skipped.
    """
    feature_pos = {f: i for i, f in enumerate(universe.features)}
    umask = sum(1 << feature_pos[f] for f in universe.upgrade)
    enc = [sum(1 << feature_pos[f] for f in c) for c in configs]
    n = len(configs)
    up = [0] * n
    for i in range(n):
        ci = enc[i]
        ci_static = ci & ~umask
        row = 0
        for j in range(n):
            cj = enc[j]
            # configs[i] <= configs[j]: j's upgrades are on in i, rest equal
            if cj & umask & ~ci == 0 and cj & ~umask == ci_static:
                row |= 1 << j
        up[i] = row
    names = [ft.config_name(c) for c in configs]
    return ConditionPoset._from_up_rows(names, up)


def fts_to_lats(f: Fts, close: bool = False) -> Lats:
    """Conditions are the admissible configurations under the upgrade order;
    the guard of a transition collects the configurations satisfying its
    expression.  Guards must be downward-closed (more upgrades cannot lose
    a transition) unless ``close`` requests their downward closure."""
    configs = f.admissible_configs()
    poset = config_poset(configs, f.universe)
    alpha: dict[tuple[str, str, str], int] = {}
    for (x, a, y), expr in f.trans.items():
        bits = 0
        for i, c in enumerate(configs):
            if ft.evaluate(expr, c):
                bits |= 1 << i
        if not bits:
            continue
        if not poset.is_down_closed_bits(bits):
            if close:
                bits = poset.close_down_bits(bits)
            else:
                have = bits
                culprit = next(
                    (i, j)
                    for i in iter_bits(have)
                    for j in iter_bits(poset.down[i] & ~have)
                )
                raise GuardNotDownwardClosed(
                    "guard of (%s, %s, %s) holds at %s but not at the upgrade %s"
                    % (
                        x,
                        a,
                        y,
                        ft.config_name(configs[culprit[0]]),
                        ft.config_name(configs[culprit[1]]),
                    )
                )
        alpha[(x, a, y)] = bits
    return Lats(f.states, f.alphabet, poset, alpha, precedence=f.precedence)


def fts_to_cts(f: Fts, close: bool = False) -> Cts:
    return lats_to_cts(fts_to_lats(f, close=close))


def instantiate(c: Cts, cond: str) -> Lts:
    return c.instantiate(cond)


def instantiate_prec(c: Cts, cond: str) -> Lts:
    return c.instantiate_prec(cond)


# --- benchmark family ---------------------------------------------------------------


def gen_benchmark_fts(n: int) -> tuple[Fts, Fts]:
    """The scaling family: per feature one disconnected three-state component;
    the two systems differ only in the guard of the 0 -> 2 transition."""
    if n < 1:
        raise ModelError("benchmark size must be >= 1, got %r" % (n,))
    feature_names = tuple("f%d" % i for i in range(1, n + 1))
    universe = FeatureUniverse(feature_names, frozenset(feature_names))
    states = tuple("s%d_%d" % (i, k) for i in range(1, n + 1) for k in range(3))
    alphabet = ("b", "c")
    left: dict[tuple[str, str, str], FeatureExpr] = {}
    right: dict[tuple[str, str, str], FeatureExpr] = {}
    for i, fname in enumerate(feature_names, start=1):
        s0, s1, s2 = ("s%d_0" % i, "s%d_1" % i, "s%d_2" % i)
        atom = ft.Atom(fname)
        for tr in (left, right):
            tr[(s0, "b", s1)] = atom
            tr[(s0, "b", s0)] = atom
            tr[(s2, "c", s0)] = atom
        left[(s0, "b", s2)] = ft.TRUE
        right[(s0, "b", s2)] = atom
    make = lambda tr: Fts(universe, states, alphabet, tr, ft.TRUE)
    return make(left), make(right)


def gen_benchmark(n: int) -> tuple[Lats, Lats]:
    f1, f2 = gen_benchmark_fts(n)
    return fts_to_lats(f1), fts_to_lats(f2)
