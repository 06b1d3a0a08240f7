"""A from-scratch ROBDD manager over a feature universe.

Nodes are triples (variable level, high, low) interned in a unique table,
so semantic equality of functions coincides with handle equality.  On top
of the usual connectives the manager implements the lattice layer used for
upgrade orderings: the downward-closure test (at every upgrade-labelled
node the low successor must imply the high successor), the approximation
of an arbitrary Boolean function by its largest downward-closed part, and
the residuum inside the lattice carved out by a feature diagram.

A manager is a single-writer object: constructing operations must be
serialized externally; read-only queries on an unchanging manager may run
concurrently.  Handles are plain ints and travel with their manager.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Collection, Sequence

from . import features as ft
from .errors import ManagerMismatch, PreconditionViolation, UnknownFeature
from .features import FeatureExpr, FeatureUniverse

FALSE = 0
TRUE = 1


class BddManager:
    def __init__(self, universe: FeatureUniverse, var_order: Sequence[str] | None = None):
        self.universe = universe
        if var_order is None:
            order = tuple(universe.features)
        else:
            order = tuple(var_order)
            if sorted(order) != sorted(universe.features):
                raise UnknownFeature(
                    "variable order %r is not a permutation of the universe %r"
                    % (list(order), list(universe.features))
                )
        self.order = order
        self.level_of = {name: i for i, name in enumerate(order)}
        self.n_levels = len(order)
        self._upgrade_levels = frozenset(self.level_of[f] for f in universe.upgrade)
        # handles 0/1 are the terminals; their level sorts below every variable
        self._level = [self.n_levels, self.n_levels]
        self._hi = [0, 1]
        self._lo = [0, 1]
        self._unique: dict[tuple[int, int, int], int] = {}
        self._and_memo: dict[tuple[int, int], int] = {}
        self._or_memo: dict[tuple[int, int], int] = {}
        self._not_memo: dict[int, int] = {}
        self._approx_memo: dict[int, int] = {0: 0, 1: 1}
        self._approx_up_memo: dict[int, int] = {0: 0, 1: 1}
        self._dc_memo: dict[int, bool] = {0: True, 1: True}
        self._residuum_memo: dict[tuple[int, int, int], int] = {}
        self._minterm_memo: dict[tuple[int, int], int] = {}

    def __len__(self) -> int:
        return len(self._level)

    # --- node construction -------------------------------------------------

    def mk(self, level: int, hi: int, lo: int) -> int:
        if hi == lo:
            return hi
        key = (level, hi, lo)
        handle = self._unique.get(key)
        if handle is None:
            handle = len(self._level)
            self._level.append(level)
            self._hi.append(hi)
            self._lo.append(lo)
            self._unique[key] = handle
        return handle

    def var(self, name: str) -> int:
        if name not in self.level_of:
            raise UnknownFeature("unknown feature %r" % (name,))
        return self.mk(self.level_of[name], TRUE, FALSE)

    def from_expr(self, expr: FeatureExpr) -> int:
        ft.check_atoms(expr, self.universe)
        return self._from_expr(expr)

    def _from_expr(self, expr: FeatureExpr) -> int:
        if isinstance(expr, ft.Atom):
            return self.var(expr.name)
        if isinstance(expr, ft.Const):
            return TRUE if expr.value else FALSE
        if isinstance(expr, ft.Not):
            return self.neg(self._from_expr(expr.arg))
        if isinstance(expr, ft.And):
            return self.conj(self._from_expr(expr.left), self._from_expr(expr.right))
        if isinstance(expr, ft.Or):
            return self.disj(self._from_expr(expr.left), self._from_expr(expr.right))
        if isinstance(expr, ft.Imp):
            return self.disj(self.neg(self._from_expr(expr.left)), self._from_expr(expr.right))
        raise TypeError("not a feature expression: %r" % (expr,))

    # --- connectives --------------------------------------------------------

    def conj(self, u: int, v: int) -> int:
        if u == FALSE or v == FALSE:
            return FALSE
        if u == TRUE:
            return v
        if v == TRUE or u == v:
            return u
        if u > v:
            u, v = v, u
        key = (u, v)
        cached = self._and_memo.get(key)
        if cached is not None:
            return cached
        level_u, level_v = self._level[u], self._level[v]
        top = level_u if level_u < level_v else level_v
        u_hi, u_lo = (self._hi[u], self._lo[u]) if level_u == top else (u, u)
        v_hi, v_lo = (self._hi[v], self._lo[v]) if level_v == top else (v, v)
        result = self.mk(top, self.conj(u_hi, v_hi), self.conj(u_lo, v_lo))
        self._and_memo[key] = result
        return result

    def disj(self, u: int, v: int) -> int:
        if u == TRUE or v == TRUE:
            return TRUE
        if u == FALSE:
            return v
        if v == FALSE or u == v:
            return u
        if u > v:
            u, v = v, u
        key = (u, v)
        cached = self._or_memo.get(key)
        if cached is not None:
            return cached
        level_u, level_v = self._level[u], self._level[v]
        top = level_u if level_u < level_v else level_v
        u_hi, u_lo = (self._hi[u], self._lo[u]) if level_u == top else (u, u)
        v_hi, v_lo = (self._hi[v], self._lo[v]) if level_v == top else (v, v)
        result = self.mk(top, self.disj(u_hi, v_hi), self.disj(u_lo, v_lo))
        self._or_memo[key] = result
        return result

    def neg(self, u: int) -> int:
        if u <= TRUE:
            return 1 - u
        cached = self._not_memo.get(u)
        if cached is not None:
            return cached
        result = self.mk(self._level[u], self.neg(self._hi[u]), self.neg(self._lo[u]))
        self._not_memo[u] = result
        self._not_memo[result] = u
        return result

    def imp(self, u: int, v: int) -> int:
        return self.disj(self.neg(u), v)

    def leq(self, u: int, v: int) -> bool:
        """u implies v."""
        return self.conj(u, self.neg(v)) == FALSE

    # --- queries -------------------------------------------------------------

    def evaluate(self, u: int, config: Collection[str]) -> bool:
        present = frozenset(config)
        while u > TRUE:
            if self.order[self._level[u]] in present:
                u = self._hi[u]
            else:
                u = self._lo[u]
        return u == TRUE

    def reachable(self, u: int) -> set[int]:
        seen: set[int] = set()
        stack = [u]
        while stack:
            h = stack.pop()
            if h in seen:
                continue
            seen.add(h)
            if h > TRUE:
                stack.append(self._hi[h])
                stack.append(self._lo[h])
        return seen

    def node_counts(self, u: int) -> tuple[int, int]:
        """(inner nodes, terminal nodes) reachable from u."""
        seen = self.reachable(u)
        terminals = len([h for h in seen if h <= TRUE])
        return len(seen) - terminals, terminals

    def sat_count(self, u: int) -> int:
        """Number of satisfying configurations over the whole universe."""
        memo: dict[tuple[int, int], int] = {}

        def count(h: int, level: int) -> int:
            if level == self.n_levels:
                return 1 if h == TRUE else 0
            key = (h, level)
            if key in memo:
                return memo[key]
            if self._level[h] > level:
                result = 2 * count(h, level + 1)
            else:
                result = count(self._hi[h], level + 1) + count(self._lo[h], level + 1)
            memo[key] = result
            return result

        return count(u, 0)

    def sat_minterms(self, u: int) -> int:
        """Bitset of satisfying configurations.

        Configuration index i has the feature at order position k iff bit
        (n-1-k) of i is set; use ``config_of_index`` to decode.
        """
        return self._minterms(u, 0)

    def _minterms(self, u: int, level: int) -> int:
        n = self.n_levels
        if level == n:
            return 1 if u == TRUE else 0
        key = (u, level)
        cached = self._minterm_memo.get(key)
        if cached is not None:
            return cached
        half = 1 << (n - level - 1)
        if self._level[u] > level:
            sub = self._minterms(u, level + 1)
            result = sub | (sub << half)
        else:
            result = self._minterms(self._lo[u], level + 1) | (
                self._minterms(self._hi[u], level + 1) << half
            )
        self._minterm_memo[key] = result
        return result

    def config_of_index(self, i: int) -> ft.Config:
        n = self.n_levels
        return frozenset(self.order[k] for k in range(n) if i >> (n - 1 - k) & 1)

    def index_of_config(self, config: Collection[str]) -> int:
        n = self.n_levels
        i = 0
        for name in config:
            i |= 1 << (n - 1 - self.level_of[name])
        return i

    def sat_configs(self, u: int) -> list[ft.Config]:
        from .poset import iter_bits

        return [self.config_of_index(i) for i in iter_bits(self.sat_minterms(u))]

    # --- lattice layer ---------------------------------------------------------

    def is_downward_closed(self, u: int) -> bool:
        """Every node with an upgrade variable has low implying high."""
        cached = self._dc_memo.get(u)
        if cached is not None:
            return cached
        hi, lo = self._hi[u], self._lo[u]
        ok = self.is_downward_closed(hi) and self.is_downward_closed(lo)
        if ok and self._level[u] in self._upgrade_levels:
            ok = self.leq(lo, hi)
        self._dc_memo[u] = ok
        return ok

    def approx(self, u: int) -> int:
        """Largest downward-closed function below u.

        At upgrade-labelled nodes the low branch is strengthened to the
        conjunction of both approximated branches; elsewhere the recursion
        just descends.  Memoized per node, so each node is rebuilt once.
        """
        cached = self._approx_memo.get(u)
        if cached is not None:
            return cached
        hi = self.approx(self._hi[u])
        lo = self.approx(self._lo[u])
        level = self._level[u]
        if level in self._upgrade_levels:
            result = self.mk(level, hi, self.conj(hi, lo))
        else:
            result = self.mk(level, hi, lo)
        self._approx_memo[u] = result
        return result

    def approx_up(self, u: int) -> int:
        """Largest upward-closed function below u (order-dual of approx)."""
        cached = self._approx_up_memo.get(u)
        if cached is not None:
            return cached
        hi = self.approx_up(self._hi[u])
        lo = self.approx_up(self._lo[u])
        level = self._level[u]
        if level in self._upgrade_levels:
            result = self.mk(level, self.conj(hi, lo), lo)
        else:
            result = self.mk(level, hi, lo)
        self._approx_up_memo[u] = result
        return result

    def close_down_within(self, u: int, d: int) -> int:
        """Downward closure of u inside the order restricted to d."""
        return self.conj(d, self.neg(self.approx_up(self.disj(self.neg(u), self.neg(d)))))

    def is_downward_closed_within(self, u: int, d: int) -> bool:
        """Downward-closed w.r.t. the order restricted to the diagram d."""
        return self.conj(self.approx(self.disj(u, self.neg(d))), d) == u

    def residuum(self, b1: int, b2: int, d: int) -> int:
        """The residuum b1 -> b2 inside the lattice of d's configurations.

        Both arguments must be downward-closed and imply d.  When d itself
        is downward-closed the computation drops the ``or not d`` term.
        """
        key = (b1, b2, d)
        cached = self._residuum_memo.get(key)
        if cached is not None:
            return cached
        for name, b in (("b1", b1), ("b2", b2)):
            if not self.leq(b, d):
                raise PreconditionViolation("%s does not imply the diagram" % name)
            if not self.is_downward_closed_within(b, d):
                raise PreconditionViolation("%s is not downward-closed within the diagram" % name)
        core = self.disj(self.neg(b1), b2)
        if not self.is_downward_closed(d):
            core = self.disj(core, self.neg(d))
        result = self.conj(self.approx(core), d)
        self._residuum_memo[key] = result
        return result

    # --- export -----------------------------------------------------------------

    def to_dot(self, u: int, name: str = "robdd") -> str:
        """Graphviz output: circles for variables, boxes for terminals,
        solid edges for high successors and dashed for low."""
        seen = sorted(self.reachable(u))
        lines = ["digraph %s {" % name]
        for h in seen:
            if h <= TRUE:
                lines.append('  n%d [label="%d", shape=box];' % (h, h))
            else:
                lines.append('  n%d [label="%s", shape=circle];' % (h, self.order[self._level[h]]))
        for h in seen:
            if h > TRUE:
                lines.append("  n%d -> n%d [style=solid];" % (h, self._hi[h]))
                lines.append("  n%d -> n%d [style=dashed];" % (h, self._lo[h]))
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Bdd:
    """A root handle tied to its manager; the safe public face of a node."""

    manager: BddManager
    handle: int

    def _peer(self, other: "Bdd") -> int:
        if other.manager is not self.manager:
            raise ManagerMismatch("operands belong to different BDD managers")
        return other.handle

    def __and__(self, other: "Bdd") -> "Bdd":
        return Bdd(self.manager, self.manager.conj(self.handle, self._peer(other)))

    def __or__(self, other: "Bdd") -> "Bdd":
        return Bdd(self.manager, self.manager.disj(self.handle, self._peer(other)))

    def __invert__(self) -> "Bdd":
        return Bdd(self.manager, self.manager.neg(self.handle))

    def implies(self, other: "Bdd") -> bool:
        return self.manager.leq(self.handle, self._peer(other))

    def evaluate(self, config: Collection[str]) -> bool:
        return self.manager.evaluate(self.handle, config)

    def is_downward_closed(self) -> bool:
        return self.manager.is_downward_closed(self.handle)

    def approximate(self) -> "Bdd":
        return Bdd(self.manager, self.manager.approx(self.handle))

    def residuum(self, other: "Bdd", diagram: "Bdd") -> "Bdd":
        return Bdd(
            self.manager,
            self.manager.residuum(self.handle, self._peer(other), self._peer(diagram)),
        )

    def sat_configs(self) -> list[ft.Config]:
        return self.manager.sat_configs(self.handle)

    def node_counts(self) -> tuple[int, int]:
        return self.manager.node_counts(self.handle)

    def to_dot(self, name: str = "robdd") -> str:
        return self.manager.to_dot(self.handle, name)


def from_expr(manager: BddManager, expr: FeatureExpr | str) -> Bdd:
    if isinstance(expr, str):
        expr = ft.parse_expr(expr)
    return Bdd(manager, manager.from_expr(expr))


def apply_and(b1: Bdd, b2: Bdd) -> Bdd:
    return b1 & b2


def apply_or(b1: Bdd, b2: Bdd) -> Bdd:
    return b1 | b2


def apply_not(b: Bdd) -> Bdd:
    return ~b


def evaluate(b: Bdd, config: Collection[str]) -> bool:
    return b.evaluate(config)


def is_downward_closed(b: Bdd) -> bool:
    return b.is_downward_closed()


def approx_bdd(b: Bdd) -> Bdd:
    return b.approximate()


def residuum_bdd(b1: Bdd, b2: Bdd, d: Bdd) -> Bdd:
    return b1.residuum(b2, d)
