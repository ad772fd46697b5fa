"""Numeric semantics: trajectory integration, falsification, counterexamples.

Trajectories are integrated with classic fourth-order Runge-Kutta under
step-halving error control; goal entry, domain exit and suspected blow-up
are located by bisection.  Equalities are evaluated at floats with a 1e-9
absolute tolerance, strict comparisons with none; every event records the
time found by bisection.

Blow-up is detected, not proved: the max-norm threshold (default 1e9)
combined with step-size collapse yields a BlowUpSuspected event.

The built-in catalog reproduces four soundness counterexamples against the
uncorrected side conditions of the derived rules; `run_catalog` checks that
each certificate is refused at the expected gate and that the falsifier
observes the expected trajectory behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from random import Random
from typing import Callable, Optional

from .errors import InsufficientSamples, RuleRefused, UnsamplableInitSet
from .normal import atoms_of
from .symbolic import OdeSystem, Polynomial, lie_derivative
from .syntax import (
    TRUE,
    And,
    BoolLit,
    Cmp,
    Formula,
    Implies,
    Not,
    Or,
    ProblemFile,
    parse_problem,
    print_formula,
)

GOAL_ENTERED = "GoalEntered"
DOMAIN_EXITED = "DomainExited"
BLOWUP_SUSPECTED = "BlowUpSuspected"
HORIZON_REACHED = "HorizonReached"

WITNESS = "WITNESS"
REFUTED = "REFUTED-SAMPLE"
BLOWUP = "BLOWUP"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class IntegratorConfig:
    tol: float = 1e-9
    h0: float = 1e-2
    hmin: float = 1e-12
    blowup: float = 1e9
    event_tol: float = 1e-9
    eq_tol: float = 1e-9
    max_steps: int = 2_000_000


@dataclass(frozen=True)
class State:
    values: dict
    time: float


@dataclass
class Trajectory:
    samples: list
    events: list  # [(time, kind)]
    stats: dict = field(default_factory=dict)

    def final(self) -> State:
        return self.samples[-1]

    def event_time(self, kind) -> Optional[float]:
        for t, k in self.events:
            if k == kind:
                return t
        return None


# ---------------------------------------------------------------------------
# Compiled right-hand sides and float formula evaluation


def _py_expr(p: Polynomial, names) -> str:
    if p.is_zero():
        return "0.0"
    parts = []
    for m, c in p.sorted_terms():
        factors = [repr(float(c))]
        for v, e in m:
            factors.append(f"y[{names.index(v)}]" if e == 1 else f"y[{names.index(v)}]**{e}")
        parts.append("*".join(factors))
    return " + ".join(parts)


def compile_rhs(system: OdeSystem) -> tuple:
    """Returns (state names, params tuple, f(y, par) -> tuple of derivatives)."""
    names = list(system.state_names())
    pnames = tuple(sorted(system.params))
    full = names + list(pnames)
    exprs = [_py_expr(f, full) for f in system.rhs]
    if system.clock is not None:
        exprs.append("1.0")
    src = "def _rhs(y):\n    return (" + ", ".join(exprs) + ("," if len(exprs) == 1 else "") + ")\n"
    scope: dict = {}
    exec(src, scope)  # generated exclusively from our own AST
    return tuple(names), pnames, scope["_rhs"]


def eval_state(f: Formula, vals: dict, eq_tol: float = 1e-9) -> bool:
    """Float truth with absolute tolerance on equalities, none on strict atoms."""
    if isinstance(f, BoolLit):
        return f.value
    if isinstance(f, Cmp):
        d = (f.lhs - f.rhs).eval_float(vals)
        if f.op == "=":
            return abs(d) <= eq_tol
        if f.op == "!=":
            return abs(d) > eq_tol
        return {"<": d < 0, "<=": d <= 0, ">": d > 0, ">=": d >= 0}[f.op]
    if isinstance(f, Not):
        return not eval_state(f.arg, vals, eq_tol)
    if isinstance(f, And):
        return eval_state(f.left, vals, eq_tol) and eval_state(f.right, vals, eq_tol)
    if isinstance(f, Or):
        return eval_state(f.left, vals, eq_tol) or eval_state(f.right, vals, eq_tol)
    if isinstance(f, Implies):
        return (not eval_state(f.left, vals, eq_tol)) or eval_state(f.right, vals, eq_tol)
    raise TypeError(f"cannot evaluate {f!r} numerically")


def eval_state_boundary(f: Formula, vals: dict, margin: float = 1e-9) -> bool:
    """Truth at a located event point: strict atoms need a positive margin,
    non-strict atoms hold on their boundary (closed sets contain limits,
    open ones do not)."""
    if isinstance(f, BoolLit):
        return f.value
    if isinstance(f, Cmp):
        d = (f.lhs - f.rhs).eval_float(vals)
        if f.op == "=":
            return abs(d) <= margin
        if f.op == "!=":
            return abs(d) > margin
        if f.op == "<":
            return d < -margin
        if f.op == ">":
            return d > margin
        if f.op == "<=":
            return d <= margin
        return d >= -margin
    if isinstance(f, Not):
        return not eval_state_boundary(f.arg, vals, margin)
    if isinstance(f, And):
        return eval_state_boundary(f.left, vals, margin) and eval_state_boundary(f.right, vals, margin)
    if isinstance(f, Or):
        return eval_state_boundary(f.left, vals, margin) or eval_state_boundary(f.right, vals, margin)
    if isinstance(f, Implies):
        return (not eval_state_boundary(f.left, vals, margin)) or eval_state_boundary(f.right, vals, margin)
    raise TypeError(f"cannot evaluate {f!r} numerically")


def _atom_polys(f: Formula) -> list:
    """Difference polynomials of every comparison atom in the formula."""
    if isinstance(f, Cmp):
        return [f.lhs - f.rhs]
    if isinstance(f, Not):
        return _atom_polys(f.arg)
    if isinstance(f, (And, Or, Implies)):
        return _atom_polys(f.left) + _atom_polys(f.right)
    return []


# ---------------------------------------------------------------------------
# Integration


def _rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(tuple(a + 0.5 * h * b for a, b in zip(y, k1)))
    k3 = f(tuple(a + 0.5 * h * b for a, b in zip(y, k2)))
    k4 = f(tuple(a + h * b for a, b in zip(y, k3)))
    return tuple(a + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))


def _finite(y) -> bool:
    return all(math.isfinite(a) for a in y)


def _maxnorm(y) -> float:
    return max(abs(a) for a in y) if y else 0.0


def integrate(
    system: OdeSystem,
    init: dict,
    horizon: float,
    cfg: Optional[IntegratorConfig] = None,
    goal: Optional[Formula] = None,
    stop_on_event: bool = True,
    grid: Optional[float] = None,
) -> Trajectory:
    """Integrate from `init` (covering variables and parameters) to `horizon`.

    Detects goal entry, domain exit and suspected blow-up; with `grid` set,
    integration switches to fixed steps landing exactly on multiples of
    `grid` (used by the Lie-derivative consistency check).
    """
    cfg = cfg or IntegratorConfig()
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    names, pnames, f = compile_rhs(system)
    for n in names + pnames:
        if n not in init:
            raise UnsamplableInitSet(f"initial state missing '{n}'")
    par = tuple(float(init[p]) for p in pnames)
    domain = system.domain if system.domain is not None else TRUE

    def mk_vals(y):
        vals = dict(zip(names, y))
        vals.update(zip(pnames, par))
        return vals

    def fwrapped(y):
        try:
            return f(tuple(y) + par) if pnames else f(y)
        except OverflowError:
            return tuple(math.inf for _ in y)

    y = tuple(float(init[n]) for n in names)
    t = 0.0
    samples = [State(mk_vals(y), t)]
    events: list = []
    stats = {"steps": 0, "rejected": 0, "min_h": math.inf}
    domain_atoms = _atom_polys(domain)
    goal_atoms = _atom_polys(goal) if goal is not None else []

    goal_now = eval_state(goal, mk_vals(y), cfg.eq_tol) if goal is not None else False
    domain_now = eval_state(domain, mk_vals(y), cfg.eq_tol)
    if goal is not None and goal_now and domain_now:
        events.append((0.0, GOAL_ENTERED))
        if stop_on_event:
            return Trajectory(samples, events, stats)
    if not domain_now:
        events.append((0.0, DOMAIN_EXITED))
        if stop_on_event:
            return Trajectory(samples, events, stats)

    def locate(pred, y_lo, t_lo, t_hi):
        """Earliest time in (t_lo, t_hi] where pred flips to true, by bisection."""
        lo, hi = t_lo, t_hi
        y_cur = y_lo
        while hi - lo > cfg.event_tol:
            mid = 0.5 * (lo + hi)
            y_mid = _rk4_step(fwrapped, y_cur, mid - lo)
            if not _finite(y_mid) or pred(y_mid):
                hi = mid
            else:
                lo, y_cur = mid, y_mid
        y_hit = _rk4_step(fwrapped, y_cur, hi - lo)
        return hi, y_hit

    h = grid if grid is not None else cfg.h0
    while t < horizon and stats["steps"] < cfg.max_steps:
        h = min(h, horizon - t)
        if grid is not None:
            # land exactly on grid multiples, no adaptation
            k = round(t / grid)
            h = grid * (k + 1) - t if grid * (k + 1) - t > 1e-15 else grid
            y_new = _rk4_step(fwrapped, y, h)
        else:
            while True:
                full = _rk4_step(fwrapped, y, h)
                half = _rk4_step(fwrapped, _rk4_step(fwrapped, y, h / 2), h / 2)
                if not _finite(full) or not _finite(half):
                    err = math.inf
                else:
                    err = max(abs(a - b) / (1.0 + abs(b)) for a, b in zip(full, half))
                if err <= cfg.tol or h <= cfg.hmin:
                    y_new = half if _finite(half) else full
                    break
                h /= 2
                stats["rejected"] += 1
        stats["steps"] += 1
        stats["min_h"] = min(stats["min_h"], h)
        t_new = t + h
        vals_new = mk_vals(y_new)

        blown = (not _finite(y_new)) or _maxnorm(y_new) > cfg.blowup
        if blown:
            tau, y_hit = locate(lambda yy: _maxnorm(yy) > cfg.blowup, y, t, t_new)
            samples.append(State(mk_vals(y_hit), tau))
            events.append((tau, BLOWUP_SUSPECTED))
            return Trajectory(samples, events, stats)

        vals_old = mk_vals(y)
        candidates: dict = {}

        def offer(kind, tau):
            if kind not in candidates or tau < candidates[kind]:
                candidates[kind] = tau

        if goal is not None:
            goal_new = eval_state(goal, vals_new, cfg.eq_tol)
            if goal_new and not goal_now:
                tau, _ = locate(lambda yy: eval_state(goal, mk_vals(yy), cfg.eq_tol), y, t, t_new)
                offer(GOAL_ENTERED, tau)
            goal_now = goal_new
        domain_new = eval_state(domain, vals_new, cfg.eq_tol)
        if not domain_new and domain_now:
            tau, _ = locate(lambda yy: not eval_state(domain, mk_vals(yy), cfg.eq_tol), y, t, t_new)
            offer(DOMAIN_EXITED, tau)
        domain_now = domain_new

        # atom boundary crossings inside the step: measure-zero domain
        # violations and equality-goal contacts that endpoint checks miss
        for poly, owner in [(q, "domain") for q in domain_atoms] + [(q, "goal") for q in goal_atoms]:
            d0, d1 = poly.eval_float(vals_old), poly.eval_float(vals_new)
            if not (math.isfinite(d0) and math.isfinite(d1)) or d0 * d1 >= 0:
                continue
            sign0 = d0 > 0
            tau, y_hit = locate(
                lambda yy, _p=poly, _s=sign0: (_p.eval_float(mk_vals(yy)) > 0) != _s, y, t, t_new
            )
            hit_vals = mk_vals(y_hit)
            if owner == "domain" and not eval_state_boundary(domain, hit_vals, cfg.event_tol):
                offer(DOMAIN_EXITED, tau)
            if owner == "goal" and not goal_now and eval_state_boundary(goal, hit_vals, cfg.event_tol):
                offer(GOAL_ENTERED, tau)

        step_events = sorted(candidates.items(), key=lambda e: (e[1], e[0] != DOMAIN_EXITED))
        step_events = [(tau, kind) for kind, tau in step_events]
        events.extend(step_events)
        samples.append(State(vals_new, t_new))
        y, t = y_new, t_new
        if stop_on_event and step_events:
            return Trajectory(samples, events, stats)
        if grid is None and not stats["rejected"]:
            h = min(h * 2, cfg.h0 * 4, horizon)
        elif grid is None:
            h = min(h * 2, cfg.h0 * 4)

    events.append((t, HORIZON_REACHED))
    return Trajectory(samples, events, stats)


# ---------------------------------------------------------------------------
# Initial-set sampling


def _circle_param(atom_poly: Polynomial) -> Optional[tuple]:
    """Match c1*x^2 + c2*y^2 - C = 0 with c1, c2 > 0 and C > 0."""
    if len(atom_poly.terms) != 3:
        return None
    const = atom_poly.coefficient(())
    rest = {m: c for m, c in atom_poly.terms.items() if m}
    if len(rest) != 2 or const >= 0:
        return None
    coords = []
    for m, c in rest.items():
        if len(m) != 1 or m[0][1] != 2 or c <= 0:
            return None
        coords.append((m[0][0], c))
    coords.sort()
    (x, cx), (yv, cy) = coords
    C = -const
    return x, math.sqrt(float(C / cx)), yv, math.sqrt(float(C / cy))


def sample_initial_states(problem: ProblemFile, count: int, seed: int) -> list:
    """Sample the assume-block set: pinned equalities, circles by angle, boxes
    by rejection (equalities within a 1e-9 band)."""
    from . import arith

    rng = Random(seed)
    names = list(problem.system.vars) + sorted(problem.system.params)
    atoms = []
    for f in problem.assumptions:
        a = atoms_of(f)
        if a is None:
            raise UnsamplableInitSet(f"cannot sample from disjunctive assumption {print_formula(f)}")
        atoms.extend(a)

    pinned: dict = {}
    circles = []
    leftovers = []
    for a in atoms:
        if a.op == "=":
            names_in = sorted(a.poly.variables())
            if len(names_in) == 1 and a.poly.degree() == 1:
                v = names_in[0]
                coef = a.poly.coefficient(((v, 1),))
                off = a.poly.coefficient(())
                pinned[v] = float(-off / coef)
                continue
            circ = _circle_param(a.poly)
            if circ is not None:
                circles.append(circ)
                continue
        leftovers.append(a)

    from .normal import formula_of_atoms

    box, _ = arith.extract_box(
        formula_of_atoms(leftovers) if leftovers else TRUE,
        tuple(n for n in names if n not in pinned),
    )

    free = [
        n
        for n in names
        if n not in pinned and not any(n in (c[0], c[2]) for c in circles)
    ]
    for n in free:
        if box is None or n not in box:
            if leftovers or circles or pinned:
                raise UnsamplableInitSet(f"no finite bounds for '{n}' in the assume block")
            raise UnsamplableInitSet("assume block is empty; nothing to sample")

    out = []
    tries = 0
    while len(out) < count and tries < count * 200:
        tries += 1
        pt = dict(pinned)
        for (x, rx, yv, ry) in circles:
            th = 2 * math.pi * (len(out) / count if count > 1 else 0.5) if tries <= count else 2 * math.pi * rng.random()
            pt[x] = rx * math.cos(th)
            pt[yv] = ry * math.sin(th)
        for n in free:
            iv = box[n]
            pt[n] = float(iv.lo) + (float(iv.hi) - float(iv.lo)) * rng.random()
        ok = all(
            eval_state(a.to_formula(), pt, 1e-9)
            for a in leftovers
        )
        if ok:
            out.append(pt)
    if len(out) < count:
        raise UnsamplableInitSet("rejection sampling failed to populate the initial set")
    return out


# ---------------------------------------------------------------------------
# Liveness falsification


@dataclass
class SampleResult:
    index: int
    classification: str
    t_event: Optional[float]
    final: State
    trajectory: Trajectory


@dataclass
class FalsifyReport:
    counts: dict
    results: list
    seed: int
    horizon: float

    def n(self, kind) -> int:
        return self.counts.get(kind, 0)

    def summary(self) -> str:
        parts = [f"{k}={self.counts.get(k, 0)}" for k in (WITNESS, REFUTED, BLOWUP, INCONCLUSIVE)]
        return f"samples={len(self.results)} " + " ".join(parts)


def classify(traj: Trajectory, tie_tol: float = 1e-6) -> tuple:
    """Classification per the reach-while-staying semantics."""
    t_goal = traj.event_time(GOAL_ENTERED)
    t_exit = traj.event_time(DOMAIN_EXITED)
    t_blow = traj.event_time(BLOWUP_SUSPECTED)
    if t_goal is not None and (t_exit is None or t_goal < t_exit - tie_tol):
        return WITNESS, t_goal
    if t_exit is not None and (t_goal is None or t_exit <= t_goal + tie_tol):
        return REFUTED, t_exit
    if t_blow is not None:
        return BLOWUP, t_blow
    return INCONCLUSIVE, None


def falsify_liveness(
    problem: ProblemFile,
    samples: int = 64,
    seed: int = 0,
    horizon: float = 10.0,
    cfg: Optional[IntegratorConfig] = None,
) -> FalsifyReport:
    if problem.goal is None:
        raise UnsamplableInitSet("problem has no goal block")
    cfg = cfg or IntegratorConfig()
    inits = sample_initial_states(problem, samples, seed)
    results = []
    counts: dict = {}
    for i, init in enumerate(inits):
        traj = integrate(problem.system, init, horizon, cfg, goal=problem.goal, stop_on_event=True)
        cls, t_event = classify(traj)
        counts[cls] = counts.get(cls, 0) + 1
        results.append(SampleResult(i, cls, t_event, traj.final(), traj))
    return FalsifyReport(counts, results, seed, horizon)


def write_report(report: FalsifyReport, problem: ProblemFile, outdir) -> list:
    """CSV per sample plus a plain-text summary; returns written paths."""
    import pathlib

    outdir = pathlib.Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    names = list(problem.system.vars) + sorted(problem.system.params)
    written = []
    for r in report.results:
        path = outdir / f"sample-{r.index:03d}.csv"
        with open(path, "w") as fh:
            fh.write("t," + ",".join(names) + ",event\n")
            ev = dict((t, k) for t, k in r.trajectory.events)
            for s in r.trajectory.samples:
                mark = ev.get(s.time, "")
                fh.write(f"{s.time!r}," + ",".join(repr(s.values[n]) for n in names) + f",{mark}\n")
        written.append(path)
    spath = outdir / "summary.txt"
    with open(spath, "w") as fh:
        fh.write(report.summary() + "\n")
        for r in report.results:
            t = "" if r.t_event is None else f" t={r.t_event!r}"
            fh.write(f"sample {r.index}: {r.classification}{t}\n")
    written.append(spath)
    return written


# ---------------------------------------------------------------------------
# Lie-derivative consistency along a trajectory


def lie_consistency_check(p: Polynomial, system: OdeSystem, traj: Trajectory, h: float) -> dict:
    """Max deviation between centered differences of p along the trajectory
    and the Lie derivative evaluated at the sample states."""
    if len(traj.samples) < 3:
        raise InsufficientSamples("need at least three samples")
    lie = lie_derivative(p, system)
    times = [s.time for s in traj.samples]
    for a, b in zip(times, times[1:]):
        if b - a > h * (1 + 1e-6):
            raise InsufficientSamples(f"sample spacing {b - a} exceeds h={h}")
    worst = 0.0
    count = 0
    for i in range(1, len(traj.samples) - 1):
        prev_s, cur, next_s = traj.samples[i - 1], traj.samples[i], traj.samples[i + 1]
        dt = next_s.time - prev_s.time
        if dt <= 0:
            continue
        diff = (p.eval_float(next_s.values) - p.eval_float(prev_s.values)) / dt
        exact = lie.eval_float(cur.values)
        worst = max(worst, abs(diff - exact))
        count += 1
    if count == 0:
        raise InsufficientSamples("no interior samples")
    return {"max_error": worst, "points": count, "h": h}


# ---------------------------------------------------------------------------
# Counterexample catalog


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    source: str
    broken_rule: str
    expected_gate: Optional[str]  # substring of the refusal label; None for CE-2
    expected_outcome: str  # falsification class expected to dominate
    check: Callable  # (entry, report) -> list of failure strings

    def problem(self) -> ProblemFile:
        return parse_problem(self.source)


def _ce1_check(entry, report) -> list:
    errors = []
    if report.n(BLOWUP) != len(report.results):
        errors.append(f"expected all BLOWUP, got {report.counts}")
    for r in report.results:
        if r.t_event is None or abs(r.t_event - math.pi / 2) > 1e-3:
            errors.append(f"blow-up time {r.t_event} not within 1e-3 of pi/2")
    return errors


def _ce2_check(entry, report) -> list:
    errors = []
    if report.n(REFUTED) != len(report.results):
        errors.append(f"expected all REFUTED-SAMPLE, got {report.counts}")
    for r in report.results:
        if r.t_event is None or abs(r.t_event - 1.0) > 1e-6:
            errors.append(f"domain exit at {r.t_event}, expected 1.0")
    return errors


def _ce3_check(entry, report) -> list:
    errors = []
    if report.n(REFUTED) != len(report.results):
        errors.append(f"expected all REFUTED-SAMPLE, got {report.counts}")
    for r in report.results:
        if r.t_event is None or abs(r.t_event) > 1e-9:
            errors.append(f"domain violation at {r.t_event}, expected time 0")
    return errors


def _ce4_check(entry, report) -> list:
    errors = []
    if report.n(BLOWUP) != len(report.results):
        errors.append(f"expected all BLOWUP, got {report.counts}")
    for r in report.results:
        t_final = r.final.values.get("t")
        if t_final is None or abs(t_final - 2.5) > 1e-3:
            errors.append(f"final t {t_final}, expected 2.5 within 1e-3")
        if t_final is not None and t_final >= 3.0:
            errors.append("goal t > 3 unexpectedly reachable")
    return errors


def catalog() -> list:
    """The built-in soundness counterexamples (reconstructed independently)."""
    return [
        CatalogEntry(
            id="CE-1",
            source="""
# Finite-time blow-up defeats the variant argument without global Lipschitz.
ode { x' = 1 + x^2; t' = 1 }
assume { x = 0, t = 0 }
goal { t >= 2 }
proof { rule dV_geq { p = t - 2; eps = 1 } }
""",
            broken_rule="equational/atomic variant rules stated with only local Lipschitz continuity",
            expected_gate="GlobalLipschitz",
            expected_outcome=BLOWUP,
            check=_ce1_check,
        ),
        CatalogEntry(
            id="CE-2",
            source="""
# Punctured-line domain: the solution must sneak through x = 1 to reach the goal.
ode { x' = 1 }
domain { x < 1 | x > 1 }
assume { x = 0 }
goal { x >= 1 }
""",
            broken_rule="domain refinement with the goal negation added to the box domain",
            expected_gate=None,
            expected_outcome=REFUTED,
            check=_ce2_check,
        ),
        CatalogEntry(
            id="CE-3",
            source="""
# Domain already violated initially; the uncorrected rule would still fire.
ode { x' = 1 }
domain { x <= -1 }
assume { x = 1 }
goal { x >= 0 }
proof { rule dV_geq_dom { p = x; eps = 1 } }
""",
            broken_rule="variant rule with domains, stated without the initial goal-negation assumption",
            expected_gate="InitialState",
            expected_outcome=REFUTED,
            check=_ce3_check,
        ),
        CatalogEntry(
            id="CE-4",
            source="""
# Closed but unbounded level-set region: blow-up beats the clock.
ode { x' = x^2; t' = 1 }
assume { x = 2, t = 2 }
goal { t > 3 }
proof { rule SLyap { p = t - 2; K = true } }
""",
            broken_rule="set Lyapunov argument with a closed rather than compact set",
            expected_gate="Compact",
            expected_outcome=BLOWUP,
            check=_ce4_check,
        ),
    ]


def run_catalog(samples: int = 8, seed: int = 0, horizon: float = 10.0) -> list:
    """Execute every catalog entry; returns per-entry dicts with 'ok' flags."""
    from .rules import Checker, apply_rule

    out = []
    for entry in catalog():
        problem = entry.problem()
        errors = []
        refusal = None
        if entry.expected_gate is not None:
            try:
                apply_rule(problem, problem.certificate[0], Checker())
                errors.append("rule application unexpectedly succeeded")
            except RuleRefused as e:
                refusal = e.gate
                if entry.expected_gate not in e.gate:
                    errors.append(f"refused at {e.gate}, expected {entry.expected_gate}")
        report = falsify_liveness(problem, samples=samples, seed=seed, horizon=horizon)
        errors.extend(entry.check(entry, report))
        out.append(
            {
                "id": entry.id,
                "ok": not errors,
                "errors": errors,
                "refusal": refusal,
                "counts": report.counts,
            }
        )
    return out
