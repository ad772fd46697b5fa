"""Sound-incomplete real-arithmetic backend.

Obligations are universally quantified implications between quantifier-free
formulas.  `prove_implication` first tries cheap symbolic certificates
(inconsistent hypothesis, reduction modulo hypothesis equalities, positive
combinations of hypothesis atoms, exact division by a hypothesis atom with a
sign-definite quotient) and then falls back to interval branch-and-bound over
a rational box.  All interval arithmetic is exact over `Fraction`, so the
prover needs no rounding tolerance: Valid is never returned for an obligation
that is falsifiable over its box.

`falsify` samples exact rational points and can only ever answer Falsified or
Unknown; counterexamples re-verify by rational evaluation.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from random import Random
from typing import Optional

from .normal import (
    NormAtom,
    atoms_of,
    contradictory,
    equality_polys,
    nnf,
    partial_atoms,
)
from .symbolic import Polynomial, poly_divmod, primitive, reduce_mod_equalities
from .syntax import (
    And,
    BoolLit,
    Cmp,
    Formula,
    Implies,
    Not,
    Or,
    conj,
    conjuncts,
    disjuncts,
    formula_variables,
    is_quantifier_free,
    print_formula,
)

# ---------------------------------------------------------------------------
# Intervals


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def width(self) -> Fraction:
        return self.hi - self.lo

    def contains(self, x: Fraction) -> bool:
        return self.lo <= x <= self.hi

    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2


def _iv_add(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo + b.lo, a.hi + b.hi)


def _iv_mul(a: Interval, b: Interval) -> Interval:
    prods = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return Interval(min(prods), max(prods))


def _iv_pow(a: Interval, e: int) -> Interval:
    if e == 0:
        return Interval(Fraction(1), Fraction(1))
    if e % 2 == 1:
        return Interval(a.lo**e, a.hi**e)
    if a.lo <= 0 <= a.hi:
        return Interval(Fraction(0), max(a.lo**e, a.hi**e))
    if a.hi < 0:
        return Interval(a.hi**e, a.lo**e)
    return Interval(a.lo**e, a.hi**e)


Box = dict  # dict[str, Interval]


def interval_of_poly(p: Polynomial, box: Box) -> Interval:
    """Exact interval enclosure of p over the box, monomial by monomial."""
    total = Interval(Fraction(0), Fraction(0))
    for m, c in p.terms.items():
        term = Interval(Fraction(c), Fraction(c))
        for v, e in m:
            term = _iv_mul(term, _iv_pow(box[v], e))
        total = _iv_add(total, term)
    return total


# three-valued formula evaluation: +1 certainly true, -1 certainly false, 0 unknown
def eval_formula3(f: Formula, box: Box) -> int:
    if isinstance(f, BoolLit):
        return 1 if f.value else -1
    if isinstance(f, Cmp):
        iv = interval_of_poly(f.lhs - f.rhs, box)
        if f.op == ">=":
            return 1 if iv.lo >= 0 else (-1 if iv.hi < 0 else 0)
        if f.op == ">":
            return 1 if iv.lo > 0 else (-1 if iv.hi <= 0 else 0)
        if f.op == "<=":
            return 1 if iv.hi <= 0 else (-1 if iv.lo > 0 else 0)
        if f.op == "<":
            return 1 if iv.hi < 0 else (-1 if iv.lo >= 0 else 0)
        if f.op == "=":
            if iv.lo == iv.hi == 0:
                return 1
            return -1 if (iv.lo > 0 or iv.hi < 0) else 0
        if f.op == "!=":
            if iv.lo > 0 or iv.hi < 0:
                return 1
            return -1 if iv.lo == iv.hi == 0 else 0
    if isinstance(f, Not):
        return -eval_formula3(f.arg, box)
    if isinstance(f, And):
        a, b = eval_formula3(f.left, box), eval_formula3(f.right, box)
        return -1 if -1 in (a, b) else min(a, b)
    if isinstance(f, Or):
        a, b = eval_formula3(f.left, box), eval_formula3(f.right, box)
        return 1 if 1 in (a, b) else max(a, b)
    if isinstance(f, Implies):
        return eval_formula3(Or(Not(f.left), f.right), box)
    raise TypeError(f"cannot interval-evaluate {f!r}")


def eval_formula_exact(f: Formula, point: dict) -> bool:
    """Exact rational truth of a quantifier-free formula at a point."""
    if isinstance(f, BoolLit):
        return f.value
    if isinstance(f, Cmp):
        d = (f.lhs - f.rhs).eval_rational(point)
        return {"=": d == 0, "!=": d != 0, ">=": d >= 0, ">": d > 0, "<=": d <= 0, "<": d < 0}[f.op]
    if isinstance(f, Not):
        return not eval_formula_exact(f.arg, point)
    if isinstance(f, And):
        return eval_formula_exact(f.left, point) and eval_formula_exact(f.right, point)
    if isinstance(f, Or):
        return eval_formula_exact(f.left, point) or eval_formula_exact(f.right, point)
    if isinstance(f, Implies):
        return (not eval_formula_exact(f.left, point)) or eval_formula_exact(f.right, point)
    raise TypeError(f"cannot evaluate {f!r}")


def _eval_float(f: Formula, point: dict) -> bool:
    """Float screen for sampling; candidates are confirmed exactly afterwards."""
    if isinstance(f, BoolLit):
        return f.value
    if isinstance(f, Cmp):
        try:
            d = (f.lhs - f.rhs).eval_float(point)
        except OverflowError:
            return True  # suspicious; let the exact check decide
        if f.op == "=":
            return abs(d) <= 1e-9  # permissive: exact confirmation decides
        if f.op == "!=":
            return abs(d) > 1e-12
        return {">=": d >= 0, ">": d > 0, "<=": d <= 0, "<": d < 0}[f.op]
    if isinstance(f, Not):
        return not _eval_float(f.arg, point)
    if isinstance(f, And):
        return _eval_float(f.left, point) and _eval_float(f.right, point)
    if isinstance(f, Or):
        return _eval_float(f.left, point) or _eval_float(f.right, point)
    if isinstance(f, Implies):
        return (not _eval_float(f.left, point)) or _eval_float(f.right, point)
    raise TypeError(f"cannot evaluate {f!r}")


# ---------------------------------------------------------------------------
# Obligations and verdicts


@dataclass(frozen=True)
class ArithObligation:
    """forall universals (hypothesis -> conclusion), bodies quantifier-free."""

    universals: tuple
    hypothesis: Formula
    conclusion: Formula

    def __post_init__(self):
        for part in (self.hypothesis, self.conclusion):
            if not is_quantifier_free(part):
                raise ValueError("obligation bodies must be quantifier- and modality-free")
        free = formula_variables(self.hypothesis) | formula_variables(self.conclusion)
        if not free <= set(self.universals):
            raise ValueError(f"free variables {sorted(free - set(self.universals))} not quantified")

    def describe(self) -> str:
        return f"{print_formula(self.hypothesis)} -> {print_formula(self.conclusion)}"


VALID = "valid"
FALSIFIED = "falsified"
UNKNOWN = "unknown"


@dataclass
class ArithVerdict:
    status: str
    counterexample: Optional[dict] = None
    trace: dict = field(default_factory=dict)

    @property
    def is_valid(self) -> bool:
        return self.status == VALID


@dataclass(frozen=True)
class Budget:
    max_cells: int = 200_000
    max_seconds: float = 10.0


# ---------------------------------------------------------------------------
# Box extraction from hypothesis atoms


def _root_upper(x: Fraction, k: int) -> Fraction:
    """Smallest n/64 with (n/64)^k >= x, for x >= 0 (outward rational root)."""
    if x <= 0:
        return Fraction(0)
    n = max(1, math.ceil(64 * float(x) ** (1.0 / k)))
    while Fraction(n, 64) ** k < x:
        n += 1
    while n > 1 and Fraction(n - 1, 64) ** k >= x:
        n -= 1
    return Fraction(n, 64)


def _linear_parts(p: Polynomial) -> Optional[tuple[str, Fraction, Fraction]]:
    """Decompose a*v + b; None if p is not linear in a single variable."""
    names = p.variables()
    if len(names) != 1:
        return None
    (v,) = names
    if p.degree() != 1:
        return None
    a = p.coefficient(((v, 1),))
    b = p.coefficient(())
    return v, a, b


def _sum_of_even_powers(p: Polynomial) -> Optional[tuple[Fraction, dict]]:
    """Match C - sum(c_i * v_i^(2k_i)) with all c_i > 0; returns (C, {v: (c, 2k)})."""
    bound = p.coefficient(())
    body = {}
    for m, c in p.terms.items():
        if not m:
            continue
        if len(m) != 1:
            return None
        v, e = m[0]
        if e % 2 != 0 or c >= 0 or v in body:
            return None
        body[v] = (-c, e)
    if not body:
        return None
    return bound, body


def extract_box(hypothesis: Formula, universals) -> tuple[Optional[Box], list]:
    """Per-variable bounds entailed by hypothesis conjuncts.

    Returns (box, unbounded_names); box is None when some universal has no
    finite bound.  An empty dict for `unbounded` with box=None signals an
    inconsistent set of bounds (the hypothesis is unsatisfiable).
    """
    atoms, _ = partial_atoms(hypothesis)
    lows: dict = {}
    highs: dict = {}

    def note_low(v, x):
        lows[v] = max(lows.get(v, x), x)

    def note_high(v, x):
        highs[v] = min(highs.get(v, x), x)

    for a in atoms:
        polys = [a.poly] if a.op in (">=", ">") else ([a.poly, -a.poly] if a.op == "=" else [])
        for e in polys:
            lin = _linear_parts(e)
            if lin is not None:
                v, coef, off = lin
                if coef > 0:
                    note_low(v, -off / coef)
                else:
                    note_high(v, -off / coef)
                continue
            sq = _sum_of_even_powers(e)
            if sq is not None:
                bound, body = sq
                if bound < 0:
                    return None, []  # unsatisfiable: sum of even powers <= negative
                for v, (c, k) in body.items():
                    r = _root_upper(bound / c, k)
                    note_low(v, -r)
                    note_high(v, r)
    box: Box = {}
    unbounded = []
    for v in universals:
        if v in lows and v in highs:
            if lows[v] > highs[v]:
                return None, []
            box[v] = Interval(lows[v], highs[v])
        else:
            unbounded.append(v)
    if unbounded:
        return None, unbounded
    return box, []


EMPTY_BOX = "empty"  # sentinel: the intersected bounds are inconsistent


def intersect_boxes(a, b):
    if a is None:
        return b
    if b is None:
        return a
    if a == EMPTY_BOX or b == EMPTY_BOX:
        return EMPTY_BOX
    out = {}
    for v in set(a) | set(b):
        if v in a and v in b:
            lo, hi = max(a[v].lo, b[v].lo), min(a[v].hi, b[v].hi)
            if lo > hi:
                return EMPTY_BOX
            out[v] = Interval(lo, hi)
        else:
            out[v] = a.get(v, b.get(v))
    return out


# ---------------------------------------------------------------------------
# Symbolic certificates (pre-checks before branch and bound)


def _trivially_nonneg(p: Polynomial) -> bool:
    """Every term a nonnegative multiple of even powers: p >= 0 everywhere."""
    if p.is_zero():
        return True
    return all(c > 0 and all(e % 2 == 0 for _, e in m) for m, c in p.terms.items())


def _derive_atom(goal: NormAtom, atoms: list, box: Optional[Box]) -> bool:
    """Does the atom conjunction entail `goal` (op in >=, >, =)?"""
    eqs = equality_polys(atoms)
    e = reduce_mod_equalities(goal.poly, eqs)
    strict = goal.op == ">"

    if goal.op == "=":
        return e.is_zero()

    c = e.constant_value()
    if c is not None:
        return c > 0 if strict else c >= 0

    if not strict and _trivially_nonneg(e):
        return True

    # usable nonnegative facts: inequalities, plus both signs of equalities
    facts: list[tuple[Polynomial, bool]] = []  # (poly >= 0, is_strict)
    neq_polys = set()
    for a in atoms:
        if a.op in (">=", ">"):
            facts.append((a.poly, a.op == ">"))
        elif a.op == "=":
            facts.append((a.poly, False))
            facts.append((-a.poly, False))
        else:
            neq_polys.add(primitive(a.poly))

    ep = primitive(e)
    candidates = [(f, s) for f, s in facts]
    for i in range(len(facts)):
        for j in range(i + 1, len(facts)):
            s = facts[i][0] + facts[j][0]
            if not s.is_zero():
                candidates.append((s, facts[i][1] or facts[j][1]))

    from .normal import _canonical_sign

    for fpoly, fstrict in candidates:
        if fpoly.is_zero():
            continue
        if primitive(fpoly) == ep:
            if not strict or fstrict:
                return True
            # e >= 0 known; strictness from a disequality on the same polynomial
            if _canonical_sign(ep) in neq_polys or primitive(_canonical_sign(ep)) in neq_polys:
                return True
        r = e - fpoly
        rc = r.constant_value()
        if rc is not None and rc >= 0:
            if not strict or fstrict or rc > 0:
                return True

    # division: e = a*q + r with a >= 0 from hypothesis, q sign-definite on box
    for fpoly, fstrict in facts:
        if fpoly.is_constant() or fpoly.degree() > e.degree():
            continue
        q, r = poly_divmod(e, fpoly)
        rc = r.constant_value()
        if rc is None or rc < 0 or q.is_zero():
            continue
        qc = q.constant_value()
        if qc is not None:
            q_nonneg, q_pos = qc >= 0, qc > 0
        elif box is not None and all(v in box for v in q.variables()):
            iv = interval_of_poly(q, box)
            q_nonneg, q_pos = iv.lo >= 0, iv.lo > 0
        else:
            continue
        if not q_nonneg:
            continue
        if not strict:
            return True
        if rc > 0 or (fstrict and q_pos):
            return True
    return False


def _symbolic_valid(ob: ArithObligation, box: Optional[Box]) -> Optional[str]:
    """Try symbolic certificates; returns a reason string when valid."""
    hyp_atoms, _ = partial_atoms(ob.hypothesis)
    if contradictory(hyp_atoms):
        return "inconsistent-hypothesis"
    concl_atoms = atoms_of(ob.conclusion)
    if concl_atoms is None:
        return None
    if all(_derive_atom(a, hyp_atoms, box) for a in concl_atoms):
        return "positive-combination"
    return None


# ---------------------------------------------------------------------------
# Branch and bound


def prove_implication(
    ob: ArithObligation,
    box: Optional[Box] = None,
    budget: Optional[Budget] = None,
) -> ArithVerdict:
    """Valid / Falsified(counterexample) / Unknown over a rational box.

    When `box` is not supplied it is extracted from hypothesis atoms of the
    shapes l <= v, v <= u, or C - sum of even powers >= 0; if some universal
    stays unbounded the verdict is Unknown.  A supplied box restricts the
    claim to that box; the caller owns the interpretation.
    """
    budget = budget or Budget()
    if not ob.universals:
        # closed obligation: decide by direct evaluation
        if not eval_formula_exact(ob.hypothesis, {}) or eval_formula_exact(ob.conclusion, {}):
            return ArithVerdict(VALID, trace={"method": "closed-evaluation", "cells": 0})
        return ArithVerdict(FALSIFIED, counterexample={}, trace={"method": "closed-evaluation", "cells": 0})
    auto_box, unbounded = extract_box(ob.hypothesis, ob.universals)
    if auto_box is None and not unbounded and box is None:
        return ArithVerdict(VALID, trace={"method": "empty-box", "cells": 0})
    work_box = intersect_boxes(box, auto_box)
    if work_box == EMPTY_BOX:
        return ArithVerdict(VALID, trace={"method": "empty-box", "cells": 0})

    reason = _symbolic_valid(ob, work_box if isinstance(work_box, dict) and work_box else None)
    if reason is not None:
        return ArithVerdict(VALID, trace={"method": reason, "cells": 0})

    # case split on a top-level disjunction in the hypothesis
    hyp_nnf = nnf(ob.hypothesis)
    split = None
    for g in conjuncts(hyp_nnf):
        if isinstance(g, Or):
            split = g
            break
    if split is not None:
        rest = conj([g for g in conjuncts(hyp_nnf) if g is not split])
        stats = {"method": "case-split", "cells": 0}
        worst = VALID
        for d in disjuncts(split):
            sub = ArithObligation(ob.universals, conj([rest, d]), ob.conclusion)
            v = prove_implication(sub, box=box, budget=budget)
            stats["cells"] += v.trace.get("cells", 0)
            if v.status == FALSIFIED:
                return ArithVerdict(FALSIFIED, counterexample=v.counterexample, trace=stats)
            if v.status == UNKNOWN:
                worst = UNKNOWN
        if worst == VALID:
            return ArithVerdict(VALID, trace=stats)
        return ArithVerdict(UNKNOWN, trace=stats)

    if work_box is None or any(v not in work_box for v in ob.universals):
        missing = [v for v in ob.universals if work_box is None or v not in work_box]
        return ArithVerdict(UNKNOWN, trace={"method": "unbounded-domain", "unbounded": missing, "cells": 0})
    if work_box == {}:
        return ArithVerdict(VALID, trace={"method": "empty-box", "cells": 0})

    names = tuple(sorted(ob.universals))
    start = time.monotonic()
    from collections import deque

    queue = deque([(tuple(work_box[v] for v in names), 0)])
    cells = 0
    max_depth = 0
    while queue:
        cell, depth = queue.popleft()  # breadth-first: balanced refinement
        max_depth = max(max_depth, depth)
        cells += 1
        if cells > budget.max_cells or (cells % 256 == 0 and time.monotonic() - start > budget.max_seconds):
            return ArithVerdict(
                UNKNOWN,
                trace={"method": "budget-exhausted", "cells": cells, "max_depth": max_depth},
            )
        cbox = dict(zip(names, cell))
        if eval_formula3(ob.hypothesis, cbox) == -1:
            continue
        if eval_formula3(ob.conclusion, cbox) == 1:
            continue
        mid = {v: iv.midpoint() for v, iv in cbox.items()}
        if eval_formula_exact(ob.hypothesis, mid) and not eval_formula_exact(ob.conclusion, mid):
            return ArithVerdict(
                FALSIFIED,
                counterexample=mid,
                trace={"method": "branch-and-bound", "cells": cells, "max_depth": max_depth},
            )
        widths = [iv.width() for iv in cell]
        wmax = max(widths)
        if wmax == 0:
            # point cell neither discarded nor falsified: conclusion holds here
            continue
        k = widths.index(wmax)
        iv = cell[k]
        m = iv.midpoint()
        queue.append((cell[:k] + (Interval(iv.lo, m),) + cell[k + 1 :], depth + 1))
        queue.append((cell[:k] + (Interval(m, iv.hi),) + cell[k + 1 :], depth + 1))
    return ArithVerdict(VALID, trace={"method": "branch-and-bound", "cells": cells, "max_depth": max_depth})


# ---------------------------------------------------------------------------
# Falsification by exact sampling


def _sample_grid(n: int, count: int, seed: int):
    """Grid indices in [0, 256] per variable: corners, center, then random
    points with boundary bias.  Exact values are materialized on demand."""
    rng = Random(seed)
    emitted = 0
    corners_cap = min(2**n, 32) if n else 0
    for mask in range(corners_cap):
        if emitted >= count:
            return
        emitted += 1
        yield tuple(0 if (mask >> i) & 1 else 256 for i in range(n))
    if emitted < count:
        emitted += 1
        yield (128,) * n
    while emitted < count:
        ks = [rng.randrange(0, 257) for _ in range(n)]
        if rng.random() < 0.25 and n:
            ks[rng.randrange(n)] = 0 if rng.random() < 0.5 else 256
        emitted += 1
        yield tuple(ks)


def _screen_poly_src(p: Polynomial, names) -> str:
    if p.is_zero():
        return "0.0"
    parts = []
    for m, c in p.sorted_terms():
        factors = [repr(float(c))]
        for v, e in m:
            idx = names.index(v)
            factors.append(f"_a[{idx}]" if e == 1 else f"_a[{idx}]**{e}")
        parts.append("*".join(factors))
    return "(" + " + ".join(parts) + ")"


def _screen_formula_src(f: Formula, names) -> str:
    if isinstance(f, BoolLit):
        return "True" if f.value else "False"
    if isinstance(f, Cmp):
        d = _screen_poly_src(f.lhs - f.rhs, names)
        if f.op == "=":
            return f"(abs({d}) <= 1e-9)"
        if f.op == "!=":
            return f"(abs({d}) > 1e-12)"
        return f"({d} {f.op} 0.0)"
    if isinstance(f, Not):
        return f"(not {_screen_formula_src(f.arg, names)})"
    if isinstance(f, And):
        return f"({_screen_formula_src(f.left, names)} and {_screen_formula_src(f.right, names)})"
    if isinstance(f, Or):
        return f"({_screen_formula_src(f.left, names)} or {_screen_formula_src(f.right, names)})"
    if isinstance(f, Implies):
        return f"((not {_screen_formula_src(f.left, names)}) or {_screen_formula_src(f.right, names)})"
    raise TypeError(f"cannot compile {f!r}")


def _compile_screen(ob: ArithObligation, names):
    """Float predicate 'hypothesis holds and conclusion fails', compiled once."""
    src = (
        "def _screen(_a):\n"
        f"    return {_screen_formula_src(ob.hypothesis, names)} "
        f"and not {_screen_formula_src(ob.conclusion, names)}\n"
    )
    scope: dict = {}
    exec(src, scope)  # generated exclusively from our own AST
    return scope["_screen"]


def falsify(
    ob: ArithObligation,
    samples: int = 2000,
    seed: int = 0,
    box: Optional[Box] = None,
) -> ArithVerdict:
    """Random plus boundary-biased sampling; never returns Valid.

    Candidates are screened with a compiled float predicate and every hit is
    confirmed by exact rational evaluation, so counterexamples are exact.
    """
    auto_box, _ = extract_box(ob.hypothesis, ob.universals)
    work_box = intersect_boxes(box, auto_box)
    if work_box == EMPTY_BOX:
        return ArithVerdict(UNKNOWN, trace={"method": "sampling", "samples": 0})
    names = tuple(sorted(ob.universals))
    default = Interval(Fraction(-10), Fraction(10))
    ivs = [work_box.get(v, default) if work_box else default for v in names]
    los = [iv.lo for iv in ivs]
    spans = [iv.hi - iv.lo for iv in ivs]
    flos = [float(lo) for lo in los]
    fspans = [float(s) for s in spans]
    screen = _compile_screen(ob, names)
    tried = 0
    for ks in _sample_grid(len(names), samples, seed):
        tried += 1
        fpt = tuple(flos[i] + fspans[i] * (k / 256.0) for i, k in enumerate(ks))
        try:
            hit = screen(fpt)
        except OverflowError:
            hit = True
        if hit:
            pt = {v: los[i] + spans[i] * Fraction(k, 256) for i, (v, k) in enumerate(zip(names, ks))}
            if eval_formula_exact(ob.hypothesis, pt) and not eval_formula_exact(ob.conclusion, pt):
                return ArithVerdict(FALSIFIED, counterexample=pt, trace={"method": "sampling", "samples": tried})
    return ArithVerdict(UNKNOWN, trace={"method": "sampling", "samples": tried})


# ---------------------------------------------------------------------------
# SMT-LIB export (QF_NRA)


def _smt_frac(c: Fraction) -> str:
    if c < 0:
        return f"(- {_smt_frac(-c)})"
    if c.denominator == 1:
        return f"{c.numerator}"
    return f"(/ {c.numerator} {c.denominator})"


def _smt_poly(p: Polynomial) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for m, c in p.sorted_terms():
        factors = [] if (c == 1 and m) else [_smt_frac(c)]
        for v, e in m:
            factors.extend([v] * e)
        parts.append(factors[0] if len(factors) == 1 else "(* " + " ".join(factors) + ")")
    if len(parts) == 1:
        return parts[0]
    return "(+ " + " ".join(parts) + ")"


def _smt_formula(f: Formula) -> str:
    if isinstance(f, BoolLit):
        return "true" if f.value else "false"
    if isinstance(f, Cmp):
        l, r = _smt_poly(f.lhs), _smt_poly(f.rhs)
        if f.op == "!=":
            return f"(not (= {l} {r}))"
        return f"({f.op} {l} {r})"
    if isinstance(f, Not):
        return f"(not {_smt_formula(f.arg)})"
    if isinstance(f, And):
        return f"(and {_smt_formula(f.left)} {_smt_formula(f.right)})"
    if isinstance(f, Or):
        return f"(or {_smt_formula(f.left)} {_smt_formula(f.right)})"
    if isinstance(f, Implies):
        return f"(=> {_smt_formula(f.left)} {_smt_formula(f.right)})"
    raise TypeError(f"cannot emit {f!r}")


def emit_smtlib(ob: ArithObligation) -> str:
    """QF_NRA script asserting hypothesis and negated conclusion.

    `unsat` from an external solver certifies the obligation Valid.
    """
    lines = [
        "(set-logic QF_NRA)",
        "(set-info :status unknown)",
    ]
    for v in sorted(ob.universals):
        lines.append(f"(declare-const {v} Real)")
    lines.append(f"(assert {_smt_formula(ob.hypothesis)})")
    lines.append(f"(assert (not {_smt_formula(ob.conclusion)}))")
    lines.append("(check-sat)")
    lines.append("(exit)")
    return "\n".join(lines) + "\n"


def smt_filename(index: int, ob: ArithObligation) -> str:
    digest = hashlib.sha256(emit_smtlib(ob).encode()).hexdigest()[:8]
    return f"ob-{index}-{digest}.smt2"
