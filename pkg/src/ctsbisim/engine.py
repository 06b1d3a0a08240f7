"""Greatest-bisimulation computation on lattice transition systems.

The engine iterates a transfer operator on condition-valued relation
matrices, starting from the all-top relation and descending to the
greatest fixpoint.  The operator is evaluated through residuated matrix
multiplication; on Boolean (discrete) condition sets it degenerates to
complement-and-multiply.  Matrix entries are opaque lattice elements
handled through an ops object, so the same iteration runs on explicit
bitsets and on ROBDD handles.

Each iteration may in principle compute its matrix entries in parallel
from the immutable previous matrix; whether that is safe is advertised by
``ops.parallel_entries`` (true for the pure bitset backend, false for the
single-writer BDD manager).  The iteration here is sequential.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Callable, Sequence

from . import features as ft
from .bdd import BddManager
from .errors import (
    CapExceeded,
    DimensionMismatch,
    GuardNotDownwardClosed,
    ModelMismatch,
    PosetMismatch,
    PrecedenceMismatch,
    PreconditionViolation,
    SafeguardExceeded,
)
from .features import FeatureUniverse
from .models import Cts, Fts, Lats, cts_to_lats, fts_to_cts, fts_to_lats, lats_to_cts
from .poset import ConditionPoset, LatticeElement, iter_bits


# --- lattice backends --------------------------------------------------------------


class ExplicitOps:
    """Bitset lattice over a condition poset."""

    kind = "explicit"
    parallel_entries = True  # pure functions of immutable masks

    def __init__(self, poset: ConditionPoset):
        self.poset = poset
        self.top = poset.full_mask
        self.bottom = 0

    def meet(self, a, b):
        return a & b

    def join(self, a, b):
        return a | b

    def leq(self, a, b):
        return a & ~b == 0

    def residuum(self, a, b):
        return self.poset.residuum_bits(a, b)

    def complement(self, a):
        return self.top ^ a

    def std_mul(self, U, V):
        Vt = list(zip(*V)) if V else []
        out = []
        for row in U:
            orow = []
            for col in Vt:
                acc = 0
                for u, v in zip(row, col):
                    acc |= u & v
                orow.append(acc)
            out.append(orow)
        return out

    def otimes_mul(self, U, V):
        up = self.poset.up
        full = self.top
        Vt = list(zip(*V)) if V else []
        out = []
        for row in U:
            orow = []
            for col in Vt:
                acc = full
                for l, m in zip(row, col):
                    viol = l & ~m
                    if viol:
                        bad = 0
                        while viol:
                            low = viol & -viol
                            bad |= up[low.bit_length() - 1]
                            viol ^= low
                        acc &= ~bad
                        if not acc:
                            break
                orow.append(acc)
            out.append(orow)
        return out


class BooleanOps(ExplicitOps):
    """The Boolean algebra of all condition subsets (discrete residuum)."""

    kind = "boolean"

    def residuum(self, a, b):
        return (self.top ^ a) | b

    def otimes_mul(self, U, V):
        full = self.top
        Vt = list(zip(*V)) if V else []
        out = []
        for row in U:
            orow = []
            for col in Vt:
                acc = full
                for l, m in zip(row, col):
                    acc &= (full ^ l) | m
                    if not acc:
                        break
                orow.append(acc)
            out.append(orow)
        return out


class BddOps:
    """ROBDD lattice of downward-closed sets within a feature diagram."""

    kind = "bdd"
    parallel_entries = False  # apply mutates the shared manager

    def __init__(self, manager: BddManager, diagram: int):
        self.manager = manager
        self.diagram = diagram
        self.top = diagram
        self.bottom = 0
        self.meet = manager.conj
        self.join = manager.disj
        self.leq = manager.leq

    def residuum(self, a, b):
        return self.manager.residuum(a, b, self.diagram)

    # guard matrices are sparse; zero operands short-circuit exactly
    # (0 meet v = 0, residuum(0, v) = top, and entries below top = diagram)

    def std_mul(self, U, V):
        meet, join = self.manager.conj, self.manager.disj
        Vt = list(zip(*V)) if V else []
        out = []
        for row in U:
            orow = []
            for col in Vt:
                acc = 0
                for u, v in zip(row, col):
                    if u and v:
                        acc = join(acc, meet(u, v))
                orow.append(acc)
            out.append(orow)
        return out

    def otimes_mul(self, U, V):
        residuum, meet = self.residuum, self.manager.conj
        Vt = list(zip(*V)) if V else []
        out = []
        for row in U:
            orow = []
            for col in Vt:
                acc = self.top
                for u, v in zip(row, col):
                    if u:
                        acc = meet(acc, residuum(u, v))
                        if not acc:
                            break
                orow.append(acc)
            out.append(orow)
        return out


# --- matrix helpers ------------------------------------------------------------------


def transpose(M):
    return [list(col) for col in zip(*M)] if M else []


def _check_inner(U, V):
    inner = len(U[0]) if U else 0
    if inner != len(V):
        raise DimensionMismatch(
            "inner dimensions differ: %d columns vs %d rows" % (inner, len(V))
        )


def std_mul_ops(ops, U, V):
    """(U.V)(x,z) = join over y of U(x,y) meet V(y,z); empty inner gives bottom."""
    _check_inner(U, V)
    fast = getattr(ops, "std_mul", None)
    if fast is not None:
        return fast(U, V)
    meet, join, bottom = ops.meet, ops.join, ops.bottom
    Vt = transpose(V)
    out = []
    for row in U:
        orow = []
        for col in Vt:
            acc = bottom
            for u, v in zip(row, col):
                acc = join(acc, meet(u, v))
            orow.append(acc)
        out.append(orow)
    return out


def otimes_mul_ops(ops, U, V):
    """(U (x) V)(x,z) = meet over y of U(x,y) -> V(y,z); empty inner gives top."""
    _check_inner(U, V)
    fast = getattr(ops, "otimes_mul", None)
    if fast is not None:
        return fast(U, V)
    meet, residuum, top = ops.meet, ops.residuum, ops.top
    Vt = transpose(V)
    out = []
    for row in U:
        orow = []
        for col in Vt:
            acc = top
            for u, v in zip(row, col):
                acc = meet(acc, residuum(u, v))
            orow.append(acc)
        out.append(orow)
    return out


def meet_mats(ops, A, B):
    meet = ops.meet
    return [[meet(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def mats_leq(ops, A, B) -> bool:
    leq = ops.leq
    return all(leq(a, b) for ra, rb in zip(A, B) for a, b in zip(ra, rb))


def top_matrix(ops, nx: int, ny: int):
    top = ops.top
    return [[top] * ny for _ in range(nx)]


def _element_matrix_bits(M):
    poset = None
    rows = []
    for row in M:
        bits_row = []
        for e in row:
            if not isinstance(e, LatticeElement):
                raise TypeError("matrix entries must be LatticeElement, got %r" % (e,))
            if poset is None:
                poset = e.poset
            elif e.poset != poset:
                raise PosetMismatch("matrix entries use different posets")
            bits_row.append(e.bits)
        rows.append(bits_row)
    return poset, rows


def _wrap_matrix(poset, rows):
    return [[LatticeElement(poset, bits) for bits in row] for row in rows]


def std_mul(U, V, poset: ConditionPoset | None = None):
    """Standard lattice matrix product on LatticeElement matrices."""
    pu, ubits = _element_matrix_bits(U)
    pv, vbits = _element_matrix_bits(V)
    poset = pu or pv or poset
    if pu and pv and pu != pv:
        raise PosetMismatch("operand matrices use different posets")
    if poset is None:
        raise DimensionMismatch("cannot infer the poset of empty matrices")
    return _wrap_matrix(poset, std_mul_ops(ExplicitOps(poset), ubits, vbits))


def otimes_mul(U, V, poset: ConditionPoset | None = None):
    """Residuated matrix product on LatticeElement matrices."""
    pu, ubits = _element_matrix_bits(U)
    pv, vbits = _element_matrix_bits(V)
    poset = pu or pv or poset
    if pu and pv and pu != pv:
        raise PosetMismatch("operand matrices use different posets")
    if poset is None:
        raise DimensionMismatch("cannot infer the poset of empty matrices")
    return _wrap_matrix(poset, otimes_mul_ops(ExplicitOps(poset), ubits, vbits))


# --- conditional relations -----------------------------------------------------------


def relation_report(states_x, states_y, names_of_pair) -> dict:
    pairs = []
    for x in states_x:
        for y in states_y:
            pairs.append({"left": x, "right": y, "conditions": sorted(names_of_pair(x, y))})
    return {"pairs": pairs}


def report_bytes(report: dict) -> bytes:
    return (json.dumps(report, indent=2, sort_keys=True) + "\n").encode()


def report_checksum(report: dict) -> str:
    return hashlib.sha256(report_bytes(report)).hexdigest()


class ConditionalRelation:
    """A matrix of downward-closed condition sets indexed by state pairs."""

    def __init__(self, poset, states_x, states_y, rows, left=None, right=None):
        self.poset = poset
        self.states_x = tuple(states_x)
        self.states_y = tuple(states_y)
        if len(rows) != len(self.states_x) or any(len(r) != len(self.states_y) for r in rows):
            raise DimensionMismatch("relation matrix does not match the state sets")
        for row in rows:
            for bits in row:
                if not poset.is_down_closed_bits(bits):
                    raise GuardNotDownwardClosed(
                        "relation entry {%s} is not downward-closed"
                        % ", ".join(poset.names_of_bits(bits))
                    )
        self.rows = [list(r) for r in rows]
        self._ix = {x: i for i, x in enumerate(self.states_x)}
        self._iy = {y: i for i, y in enumerate(self.states_y)}
        self.left = left
        self.right = right

    @classmethod
    def top(cls, poset, states_x, states_y, **kw):
        full = poset.full_mask
        rows = [[full] * len(tuple(states_y)) for _ in tuple(states_x)]
        return cls(poset, states_x, states_y, rows, **kw)

    @classmethod
    def from_mapping(cls, poset, states_x, states_y, mapping, close=False, **kw):
        rows = []
        for x in states_x:
            row = []
            for y in states_y:
                bits = poset.bits_of_names(mapping.get((x, y), ()))
                row.append(poset.close_down_bits(bits) if close else bits)
            rows.append(row)
        return cls(poset, states_x, states_y, rows, **kw)

    def bits_at(self, xi: int, yi: int) -> int:
        return self.rows[xi][yi]

    def entry(self, x: str, y: str) -> LatticeElement:
        return LatticeElement(self.poset, self.rows[self._ix[x]][self._iy[y]])

    def holds(self, x: str, y: str, cond: str) -> bool:
        return bool(self.rows[self._ix[x]][self._iy[y]] & (1 << self.poset.element_index(cond)))

    def conditions(self, x: str, y: str) -> tuple[str, ...]:
        return tuple(sorted(self.poset.names_of_bits(self.rows[self._ix[x]][self._iy[y]])))

    def leq(self, other: "ConditionalRelation") -> bool:
        return all(
            a & ~b == 0 for ra, rb in zip(self.rows, other.rows) for a, b in zip(ra, rb)
        )

    def join(self, other: "ConditionalRelation") -> "ConditionalRelation":
        rows = [[a | b for a, b in zip(ra, rb)] for ra, rb in zip(self.rows, other.rows)]
        return ConditionalRelation(self.poset, self.states_x, self.states_y, rows)

    def meet(self, other: "ConditionalRelation") -> "ConditionalRelation":
        rows = [[a & b for a, b in zip(ra, rb)] for ra, rb in zip(self.rows, other.rows)]
        return ConditionalRelation(self.poset, self.states_x, self.states_y, rows)

    def report(self) -> dict:
        return relation_report(self.states_x, self.states_y, self.conditions)

    def checksum(self) -> str:
        return report_checksum(self.report())

    def __eq__(self, other):
        if not isinstance(other, ConditionalRelation):
            return NotImplemented
        return (
            self.poset == other.poset
            and self.states_x == other.states_x
            and self.states_y == other.states_y
            and self.rows == other.rows
        )


# --- problem preparation ---------------------------------------------------------------


@dataclass
class Problem:
    ops: object
    alphabet: tuple[str, ...]
    states_x: tuple[str, ...]
    states_y: tuple[str, ...]
    amats: dict
    bmats: dict
    cond_count: int
    entry_names: Callable[[object], tuple[str, ...]]
    precedence: frozenset
    precedence_on: bool
    left: object
    right: object
    poset: ConditionPoset | None = None
    manager: BddManager | None = None
    discrete: bool = False


def _guard_matrices(lats: Lats) -> dict:
    n = len(lats.states)
    pos = {s: i for i, s in enumerate(lats.states)}
    mats = {}
    for a in lats.alphabet:
        mats[a] = [[0] * n for _ in range(n)]
    for (x, a, y), bits in lats.alpha.items():
        mats[a][pos[x]][pos[y]] = bits
    return mats


def _check_common(left, right, precedence):
    if set(left.alphabet) != set(right.alphabet):
        raise ModelMismatch(
            "alphabets differ: %r vs %r" % (sorted(left.alphabet), sorted(right.alphabet))
        )
    if precedence and left.precedence != right.precedence:
        raise PrecedenceMismatch("the two models carry different precedence orders")


def _poset_feature_encoding(poset: ConditionPoset, manager: BddManager):
    """Encode poset conditions as configurations over one feature per condition.

    Condition c maps to the configuration switching on every feature whose
    condition is *not* below c; with all features upgrades this reverses
    set inclusion, so the configuration order restricted to the image is
    order-isomorphic to the poset.
    """
    n = len(poset.elements)
    minterms = []
    for i in range(n):
        absent = poset.down[i]
        handle = 1
        for lvl, name in enumerate(manager.order):
            j = poset.index[name]
            v = manager.var(name)
            handle = manager.conj(handle, manager.neg(v) if absent & (1 << j) else v)
        minterms.append(handle)
    diagram = 0
    for handle in minterms:
        diagram = manager.disj(diagram, handle)
    index_to_name = {}
    for i in range(n):
        config = frozenset(
            poset.elements[j] for j in range(n) if not poset.down[i] & (1 << j)
        )
        index_to_name[manager.index_of_config(config)] = poset.elements[i]
    return minterms, diagram, index_to_name


def build_problem(
    left,
    right,
    backend: str = "explicit",
    precedence: bool = False,
    var_order: Sequence[str] | None = None,
    close: bool = False,
) -> Problem:
    if backend not in ("explicit", "bdd"):
        raise ModelMismatch("unknown backend %r" % (backend,))
    if isinstance(left, Cts):
        left = cts_to_lats(left)
    if isinstance(right, Cts):
        right = cts_to_lats(right)

    if isinstance(left, Fts) and isinstance(right, Fts):
        if left.universe != right.universe:
            raise ModelMismatch("feature universes differ")
        _check_common(left, right, precedence)
        if backend == "explicit":
            l1 = fts_to_lats(left, close=close)
            l2 = fts_to_lats(right, close=close)
            if l1.poset != l2.poset:
                raise ModelMismatch("feature diagrams carve out different configurations")
            return _explicit_problem(l1, l2, precedence, left, right)
        manager = BddManager(left.universe, var_order)
        d1 = manager.from_expr(left.diagram)
        d2 = manager.from_expr(right.diagram)
        if d1 != d2:
            raise ModelMismatch("feature diagrams carve out different configurations")
        diagram = d1
        ops = BddOps(manager, diagram)

        def guard_handles(model: Fts):
            n = len(model.states)
            pos = {s: i for i, s in enumerate(model.states)}
            mats = {a: [[0] * n for _ in range(n)] for a in model.alphabet}
            for (x, a, y), expr in model.trans.items():
                g = manager.conj(manager.from_expr(expr), diagram)
                if not manager.is_downward_closed_within(g, diagram):
                    if close:
                        g = manager.close_down_within(g, diagram)
                    else:
                        raise GuardNotDownwardClosed(
                            "guard of (%s, %s, %s) is not downward-closed under the upgrade order"
                            % (x, a, y)
                        )
                mats[a][pos[x]][pos[y]] = g
            return mats

        amats = guard_handles(left)
        bmats = guard_handles(right)

        def entry_names(handle):
            return tuple(
                ft.config_name(manager.config_of_index(i))
                for i in iter_bits(manager.sat_minterms(handle))
            )

        return Problem(
            ops=ops,
            alphabet=tuple(left.alphabet),
            states_x=left.states,
            states_y=right.states,
            amats=amats,
            bmats=bmats,
            cond_count=manager.sat_count(diagram),
            entry_names=entry_names,
            precedence=left.precedence,
            precedence_on=precedence,
            left=left,
            right=right,
            manager=manager,
        )

    if isinstance(left, Lats) and isinstance(right, Lats):
        if left.poset != right.poset:
            raise ModelMismatch("condition posets differ")
        _check_common(left, right, precedence)
        if backend == "explicit":
            return _explicit_problem(left, right, precedence, left, right)
        poset = left.poset
        universe = FeatureUniverse(poset.elements, frozenset(poset.elements))
        manager = BddManager(universe, var_order)
        minterms, diagram, index_to_name = _poset_feature_encoding(poset, manager)
        ops = BddOps(manager, diagram)

        def guard_handle(bits):
            handle = 0
            for i in iter_bits(bits):
                handle = manager.disj(handle, minterms[i])
            return handle

        def handle_matrices(lats):
            n = len(lats.states)
            pos = {s: i for i, s in enumerate(lats.states)}
            mats = {a: [[0] * n for _ in range(n)] for a in lats.alphabet}
            for (x, a, y), bits in lats.alpha.items():
                mats[a][pos[x]][pos[y]] = guard_handle(bits)
            return mats

        def entry_names(handle):
            return tuple(
                index_to_name[i] for i in iter_bits(manager.sat_minterms(handle))
            )

        return Problem(
            ops=ops,
            alphabet=tuple(left.alphabet),
            states_x=left.states,
            states_y=right.states,
            amats=handle_matrices(left),
            bmats=handle_matrices(right),
            cond_count=len(poset),
            entry_names=entry_names,
            precedence=left.precedence,
            precedence_on=precedence,
            left=left,
            right=right,
            manager=manager,
        )

    raise ModelMismatch(
        "cannot compare %s with %s" % (type(left).__name__, type(right).__name__)
    )


def _explicit_problem(l1: Lats, l2: Lats, precedence: bool, left, right) -> Problem:
    poset = l1.poset
    ops = ExplicitOps(poset)

    def entry_names(bits):
        return poset.names_of_bits(bits)

    return Problem(
        ops=ops,
        alphabet=tuple(l1.alphabet),
        states_x=l1.states,
        states_y=l2.states,
        amats=_guard_matrices(l1),
        bmats=_guard_matrices(l2),
        cond_count=len(poset),
        entry_names=entry_names,
        precedence=l1.precedence,
        precedence_on=precedence,
        left=left,
        right=right,
        poset=poset,
        discrete=poset.is_discrete,
    )


# --- transfer operators ------------------------------------------------------------------


def apply_F_matrix_ops(problem: Problem, R):
    """F through residuated matrix products (the engine default)."""
    ops = problem.ops
    acc = top_matrix(ops, len(problem.states_x), len(problem.states_y))
    for a in problem.alphabet:
        alpha_a = problem.amats[a]
        beta_a = problem.bmats[a]
        t1 = otimes_mul_ops(ops, alpha_a, std_mul_ops(ops, R, transpose(beta_a)))
        t2 = transpose(otimes_mul_ops(ops, beta_a, transpose(std_mul_ops(ops, alpha_a, R))))
        acc = meet_mats(ops, acc, meet_mats(ops, t1, t2))
    return acc


def apply_F_boolean_ops(problem: Problem, R):
    """Boolean shortcut for discrete condition sets: residuum collapses to
    complement-join, so only standard products and negations remain."""
    ops = problem.ops
    neg = ops.complement

    def neg_mat(M):
        return [[neg(e) for e in row] for row in M]

    acc = top_matrix(ops, len(problem.states_x), len(problem.states_y))
    for a in problem.alphabet:
        alpha_a = problem.amats[a]
        beta_a = problem.bmats[a]
        beta_t = transpose(beta_a)
        t1 = neg_mat(std_mul_ops(ops, alpha_a, neg_mat(std_mul_ops(ops, R, beta_t))))
        t2 = neg_mat(std_mul_ops(ops, neg_mat(std_mul_ops(ops, alpha_a, R)), beta_t))
        acc = meet_mats(ops, acc, meet_mats(ops, t1, t2))
    return acc


def apply_F_direct_ops(problem: Problem, R):
    """Literal evaluation of both transfer directions; the oracle for the
    matrix form."""
    ops = problem.ops
    meet, join, residuum = ops.meet, ops.join, ops.residuum
    top, bottom = ops.top, ops.bottom
    nx, ny = len(problem.states_x), len(problem.states_y)
    out = []
    for xi in range(nx):
        row = []
        for yi in range(ny):
            acc = top
            for a in problem.alphabet:
                alpha_a = problem.amats[a]
                beta_a = problem.bmats[a]
                for x2 in range(nx):
                    g = alpha_a[xi][x2]
                    if g == bottom:
                        continue
                    sup = bottom
                    for y2 in range(ny):
                        sup = join(sup, meet(beta_a[yi][y2], R[x2][y2]))
                    acc = meet(acc, residuum(g, sup))
                for y2 in range(ny):
                    g = beta_a[yi][y2]
                    if g == bottom:
                        continue
                    sup = bottom
                    for x2 in range(nx):
                        sup = join(sup, meet(alpha_a[xi][x2], R[x2][y2]))
                    acc = meet(acc, residuum(g, sup))
            row.append(acc)
        out.append(row)
    return out


def _escape_terms(problem: Problem):
    """Per (state, action): the join of all guards on strictly higher actions."""
    ops = problem.ops
    join, bottom = ops.join, ops.bottom
    higher: dict[str, set] = {}
    for hi, lo in problem.precedence:
        higher.setdefault(lo, set()).add(hi)

    def build(mats, n):
        esc = {}
        for a in problem.alphabet:
            for i in range(n):
                acc = bottom
                for a2 in higher.get(a, ()):
                    for g in mats[a2][i]:
                        acc = join(acc, g)
                esc[(i, a)] = acc
        return esc

    return (
        build(problem.amats, len(problem.states_x)),
        build(problem.bmats, len(problem.states_y)),
    )


def apply_G_ops(problem: Problem, R, esc_a, esc_b):
    """The deactivating variant: an unmatched move is excused exactly when a
    strictly higher-priority action is enabled at its source, and the
    escape join must live inside the residuum."""
    ops = problem.ops
    meet, join, residuum = ops.meet, ops.join, ops.residuum
    top, bottom = ops.top, ops.bottom
    nx, ny = len(problem.states_x), len(problem.states_y)
    out = []
    for xi in range(nx):
        row = []
        for yi in range(ny):
            acc = top
            for a in problem.alphabet:
                alpha_a = problem.amats[a]
                beta_a = problem.bmats[a]
                esc1 = esc_a[(xi, a)]
                esc2 = esc_b[(yi, a)]
                for x2 in range(nx):
                    g = alpha_a[xi][x2]
                    if g == bottom:
                        continue
                    sup = esc1
                    for y2 in range(ny):
                        sup = join(sup, meet(beta_a[yi][y2], R[x2][y2]))
                    acc = meet(acc, residuum(g, sup))
                for y2 in range(ny):
                    g = beta_a[yi][y2]
                    if g == bottom:
                        continue
                    sup = esc2
                    for x2 in range(nx):
                        sup = join(sup, meet(alpha_a[xi][x2], R[x2][y2]))
                    acc = meet(acc, residuum(g, sup))
            row.append(acc)
        out.append(row)
    return out


# --- fixpoint ---------------------------------------------------------------------------


@dataclass
class FixpointTrace:
    """Strictly descending snapshots R_0 (all top) .. R_n (the fixpoint)."""

    poset: ConditionPoset
    states_x: tuple[str, ...]
    states_y: tuple[str, ...]
    matrices: list
    left: object
    right: object

    @property
    def iterations(self) -> int:
        return len(self.matrices) - 1

    def member(self, i: int, xi: int, yi: int, ci: int) -> bool:
        return bool(self.matrices[i][xi][yi] & (1 << ci))


class BisimResult:
    def __init__(self, problem: Problem, matrix, trace_matrices, iterations: int):
        self.problem = problem
        self.matrix = matrix
        self._trace_matrices = trace_matrices
        self.iterations = iterations
        self._ix = {x: i for i, x in enumerate(problem.states_x)}
        self._iy = {y: i for i, y in enumerate(problem.states_y)}

    @property
    def backend(self) -> str:
        return self.problem.ops.kind

    @property
    def relation(self) -> ConditionalRelation | None:
        if self.problem.poset is None:
            return None
        return ConditionalRelation(
            self.problem.poset,
            self.problem.states_x,
            self.problem.states_y,
            self.matrix,
            left=self.problem.left,
            right=self.problem.right,
        )

    @property
    def trace(self) -> FixpointTrace | None:
        if self.problem.poset is None or self._trace_matrices is None:
            return None
        return FixpointTrace(
            self.problem.poset,
            self.problem.states_x,
            self.problem.states_y,
            self._trace_matrices,
            self.problem.left,
            self.problem.right,
        )

    def conditions(self, x: str, y: str) -> tuple[str, ...]:
        entry = self.matrix[self._ix[x]][self._iy[y]]
        return tuple(sorted(self.problem.entry_names(entry)))

    def holds(self, x: str, y: str, cond: str) -> bool:
        return cond in self.conditions(x, y)

    def report(self) -> dict:
        return relation_report(self.problem.states_x, self.problem.states_y, self.conditions)

    def checksum(self) -> str:
        return report_checksum(self.report())


def greatest_bisimulation(
    left,
    right,
    precedence: bool = False,
    backend: str = "explicit",
    var_order: Sequence[str] | None = None,
    close: bool = False,
    keep_trace: bool = True,
) -> BisimResult:
    """Iterate the transfer operator from the all-top relation down to the
    greatest fixpoint.  Descent from top makes the equality test equivalent
    to the post-fixpoint test; the safeguard bound turns any monotonicity
    bug into a loud failure instead of divergence.
    """
    problem = build_problem(
        left, right, backend=backend, precedence=precedence, var_order=var_order, close=close
    )
    use_g = problem.precedence_on and problem.precedence
    if use_g:
        esc_a, esc_b = _escape_terms(problem)
        step = lambda R: apply_G_ops(problem, R, esc_a, esc_b)
    elif problem.discrete:
        step = lambda R: apply_F_boolean_ops(problem, R)
    else:
        step = lambda R: apply_F_matrix_ops(problem, R)

    nx, ny = len(problem.states_x), len(problem.states_y)
    bound = nx * ny * problem.cond_count + 1
    R = top_matrix(problem.ops, nx, ny)
    trace = [R] if keep_trace else None
    iterations = 0
    while True:
        nxt = step(R)
        if nxt == R:
            break
        iterations += 1
        if iterations >= bound:
            raise SafeguardExceeded(
                "fixpoint did not converge within %d iterations; the operator is "
                "not deflating (engine bug)" % bound
            )
        if trace is not None:
            trace.append(nxt)
        R = nxt
    return BisimResult(problem, R, trace, iterations)


# --- checks against the definitions ---------------------------------------------------------


def _relation_matrix_for(R: ConditionalRelation, problem: Problem):
    if R.states_x != problem.states_x or R.states_y != problem.states_y:
        raise ModelMismatch("relation states do not match the models")
    if problem.poset is not None and R.poset != problem.poset:
        raise ModelMismatch("relation poset does not match the models")
    return R.rows


def is_bisimulation(R: ConditionalRelation, l1, l2, precedence: bool = False) -> bool:
    """Post-fixpoint test: R is a bisimulation iff R is below its own image."""
    problem = build_problem(l1, l2, backend="explicit", precedence=precedence)
    rows = _relation_matrix_for(R, problem)
    if problem.precedence_on and problem.precedence:
        esc_a, esc_b = _escape_terms(problem)
        image = apply_G_ops(problem, rows, esc_a, esc_b)
    else:
        image = apply_F_direct_ops(problem, rows)
    return mats_leq(problem.ops, rows, image)


@dataclass(frozen=True)
class TransferViolation:
    left: str
    right: str
    action: str
    condition: str
    direction: str  # "left-to-right" | "right-to-left"


def check_transfer(R: ConditionalRelation, l1, l2) -> list[TransferViolation]:
    """Enumerate failures of the irreducible-indexed transfer properties."""
    problem = build_problem(l1, l2, backend="explicit")
    rows = _relation_matrix_for(R, problem)
    poset = problem.poset
    nx, ny = len(problem.states_x), len(problem.states_y)
    violations = []
    for xi in range(nx):
        for yi in range(ny):
            bits = rows[xi][yi]
            for ci in iter_bits(bits):
                bit = 1 << ci
                for a in problem.alphabet:
                    alpha_a = problem.amats[a]
                    beta_a = problem.bmats[a]
                    for x2 in range(nx):
                        if alpha_a[xi][x2] & bit and not any(
                            beta_a[yi][y2] & bit and rows[x2][y2] & bit for y2 in range(ny)
                        ):
                            violations.append(
                                TransferViolation(
                                    problem.states_x[xi],
                                    problem.states_y[yi],
                                    a,
                                    poset.elements[ci],
                                    "left-to-right",
                                )
                            )
                            break
                    for y2 in range(ny):
                        if beta_a[yi][y2] & bit and not any(
                            alpha_a[xi][x2] & bit and rows[x2][y2] & bit for x2 in range(nx)
                        ):
                            violations.append(
                                TransferViolation(
                                    problem.states_x[xi],
                                    problem.states_y[yi],
                                    a,
                                    poset.elements[ci],
                                    "right-to-left",
                                )
                            )
                            break
    return violations


# --- brute-force oracle (per-condition, no lattice machinery) ------------------------------


def _classical_gfp(rel: set, lts1, lts2, alphabet) -> set:
    """Greatest bisimulation between two plain transition systems, by
    repeated removal of pairs violating the transfer property."""
    rel = set(rel)
    while True:
        keep = set()
        for x, y in rel:
            ok = True
            for a in alphabet:
                for x2 in lts1.successors(x, a):
                    if not any((x2, y2) in rel for y2 in lts2.successors(y, a)):
                        ok = False
                        break
                if not ok:
                    break
                for y2 in lts2.successors(y, a):
                    if not any((x2, y2) in rel for x2 in lts1.successors(x, a)):
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                keep.add((x, y))
        if keep == rel:
            return rel
        rel = keep


def brute_force_oracle(c1, c2, precedence: bool = False, cap: int = 250_000) -> ConditionalRelation:
    """Conditional bisimilarity straight from its definition.

    Works per condition on the instantiated plain transition systems and
    computes the greatest anti-monotone family of classical bisimulations:
    classical refinement at every condition is interleaved with pruning a
    pair from a condition whenever it is gone from some smaller condition,
    until the family is simultaneously stable.  A single pruning pass after
    independent per-condition refinement would be too weak: removing a pair
    at an upgrade can invalidate its matches at larger conditions.
    """
    if isinstance(c1, Fts):
        c1 = fts_to_cts(c1)
    if isinstance(c2, Fts):
        c2 = fts_to_cts(c2)
    if isinstance(c1, Lats):
        c1 = lats_to_cts(c1)
    if isinstance(c2, Lats):
        c2 = lats_to_cts(c2)
    if c1.poset != c2.poset:
        raise ModelMismatch("condition posets differ")
    if set(c1.alphabet) != set(c2.alphabet):
        raise ModelMismatch("alphabets differ")
    if precedence and c1.precedence != c2.precedence:
        raise PrecedenceMismatch("the two models carry different precedence orders")
    poset = c1.poset
    size = len(c1.states) * len(c2.states) * max(len(poset), 1)
    if size > cap:
        raise CapExceeded("instance size %d exceeds the oracle cap %d" % (size, cap))

    conds = poset.elements
    instantiate = (lambda m, c: m.instantiate_prec(c)) if precedence else (lambda m, c: m.instantiate(c))
    lts1 = {c: instantiate(c1, c) for c in conds}
    lts2 = {c: instantiate(c2, c) for c in conds}
    below = {
        c: [conds[j] for j in iter_bits(poset.down[poset.index[c]])] for c in conds
    }
    full = {(x, y) for x in c1.states for y in c2.states}
    family = {c: set(full) for c in conds}
    changed = True
    while changed:
        changed = False
        for c in conds:
            refined = _classical_gfp(family[c], lts1[c], lts2[c], c1.alphabet)
            if refined != family[c]:
                family[c] = refined
                changed = True
        for c in conds:
            pruned = family[c]
            for smaller in below[c]:
                pruned = pruned & family[smaller]
            if pruned != family[c]:
                family[c] = pruned
                changed = True

    rows = []
    for x in c1.states:
        row = []
        for y in c2.states:
            bits = 0
            for i, c in enumerate(conds):
                if (x, y) in family[c]:
                    bits |= 1 << i
            row.append(bits)
        rows.append(row)
    return ConditionalRelation(poset, c1.states, c2.states, rows, left=c1, right=c2)


# --- cross-check operators -------------------------------------------------------------------


def boolean_vs_lattice(R: ConditionalRelation, l1, l2) -> dict:
    """Relate the lattice transfer operator with its Boolean counterpart:
    the approximation of the Boolean image must equal the lattice image,
    and the greatest Boolean bisimulation may strictly exceed the lattice
    one (witnesses are reported when it does)."""
    problem = build_problem(l1, l2, backend="explicit")
    rows = _relation_matrix_for(R, problem)
    poset = problem.poset
    bool_problem = Problem(**{**problem.__dict__, "ops": BooleanOps(poset)})

    f_l = apply_F_matrix_ops(problem, rows)
    f_b = apply_F_matrix_ops(bool_problem, rows)
    approx_f_b = [[poset.approx_bits(e) for e in row] for row in f_b]
    matches = approx_f_b == f_l

    nx, ny = len(problem.states_x), len(problem.states_y)
    lattice_star = greatest_bisimulation(l1, l2).matrix
    bool_star = top_matrix(bool_problem.ops, nx, ny)
    while True:
        nxt = apply_F_matrix_ops(bool_problem, bool_star)
        if nxt == bool_star:
            break
        bool_star = nxt

    witnesses = []
    for xi in range(nx):
        for yi in range(ny):
            extra = bool_star[xi][yi] & ~lattice_star[xi][yi]
            for ci in iter_bits(extra):
                witnesses.append(
                    (problem.states_x[xi], problem.states_y[yi], poset.elements[ci])
                )
    return {
        "approximation_matches": matches,
        "boolean_strictly_coarser": bool(witnesses),
        "witnesses": witnesses[:20],
    }


def fitting_check(l: Lats, R: ConditionalRelation) -> bool:
    """Matrix-inequality characterization for single-label systems over a
    Boolean (discrete) condition algebra: R.alpha <= alpha.R and
    R^T.alpha <= alpha.R^T."""
    if len(l.alphabet) != 1:
        raise PreconditionViolation("fitting_check requires a single-label system")
    if not l.poset.is_discrete:
        raise PreconditionViolation("fitting_check requires a discrete condition order")
    problem = build_problem(l, l, backend="explicit")
    rows = _relation_matrix_for(R, problem)
    ops = problem.ops
    alpha = problem.amats[l.alphabet[0]]
    rt = transpose(rows)
    return mats_leq(ops, std_mul_ops(ops, rows, alpha), std_mul_ops(ops, alpha, rows)) and mats_leq(
        ops, std_mul_ops(ops, rt, alpha), std_mul_ops(ops, alpha, rt)
    )
