"""Running a proof outline against the interleaving oracle.

The checker reasons statically; this module is its counterweight: it
executes the outline's program with every foreign condition turned into
an operational guard (an action fires only once its stated foreign
condition holds on the executor's foreign trace) and evaluates each
condition row at the points the outline claims it:

* native/spatial parts of a row right after the preceding action
  (or at an initial state for entry rows);
* foreign parts of a row when the next action fires;
* final rows and composition post-conditions at terminal states;
* the root conditions exactly, everything below with a frame, since an
  inner condition describes its component's share of the heap.

The result lists the outline positions refuted by some run.  Acceptance
testing pairs this with check_outline: an outline the checker accepts
must never be refuted here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .assertions import EvalContext, eval_condition
from .checker import collect_branches
from .domains import EnumerationBudgetExceeded
from .engine import (
    Bounds, DEFAULT_BOUNDS, initial_states_for, lower_program, step,
)
from .syntax import (
    ABool, ASep, BTrue, Condition, Outline, OutlineComp, OutlineLeaf,
    ParStruct, PLeaf, PNest, PPar, Seq, SpecFile, Stmt, T_TOP, When,
)


@dataclass(frozen=True)
class RuntimeCheckResult:
    refuted: tuple[str, ...]
    deadlocks: int
    truncated: bool
    vacuous: bool

    @property
    def clean(self) -> bool:
        return not self.refuted and not self.vacuous


def natspat(cond: Condition) -> Condition:
    """The condition with its foreign part dropped."""
    return Condition(T_TOP, cond.groups)


def framed(cond: Condition) -> Condition:
    """Weaken the spatial part to 'holds of some subheap'."""
    groups = tuple((g, ASep(p, ABool(BTrue()))) for g, p in cond.groups)
    return Condition(cond.foreign, groups)


def foreign_only(cond: Condition) -> Condition:
    return Condition(cond.foreign, ((T_TOP, ABool(BTrue())),))


def guarded_program(outline: Outline) -> ParStruct:
    """The outline's program with stated foreign conditions as guards."""
    if isinstance(outline, OutlineComp):
        left = guarded_program(outline.left)
        right = guarded_program(outline.right)
        if outline.kind == "par":
            return PPar(left, right)
        return PNest(outline.level, left, right)
    stmt: Optional[Stmt] = None
    for k, s in enumerate(outline.stmts):
        guard = outline.conds[k][-1].foreign
        wrapped = s if guard == T_TOP else When(guard, s)
        stmt = wrapped if stmt is None else Seq(stmt, wrapped)
    assert stmt is not None
    return PLeaf(stmt)


@dataclass
class _CompRows:
    path: str
    executors: tuple[int, ...]
    pre: tuple[Condition, ...]
    post: tuple[Condition, ...]


def _comp_nodes(outline: Outline) -> list[tuple[str, OutlineComp]]:
    out: list[tuple[str, OutlineComp]] = []

    def walk(node: Outline, path: str):
        if isinstance(node, OutlineComp):
            out.append((path or "/", node))
            walk(node.left, path + "/0")
            walk(node.right, path + "/1")

    walk(outline, "")
    return out


def outline_runtime_check(spec: SpecFile,
                          bounds: Bounds = DEFAULT_BOUNDS) -> RuntimeCheckResult:
    """Execute the guarded outline and collect refuted condition positions."""
    branches = collect_branches(spec.outline)
    if any(inst.composite for b in branches for inst in b.actions):
        raise ValueError("runtime outline checking needs atomic bracketed "
                         "statements")
    systems = lower_program(guarded_program(spec.outline))
    executors_all = tuple(range(len(systems)))
    ctx = EvalContext(split_bound=bounds.split_bound)
    refuted: set[str] = set()
    deadlocks = 0
    truncated = False

    comps = []
    branch_paths = {b.path for b in branches}
    for path, comp in _comp_nodes(spec.outline):
        execs = tuple(b.executor for b in branches
                      if b.path == path or b.path.startswith(path.rstrip("/") + "/"))
        comps.append(_CompRows(path, execs, comp.pre, comp.post))
    root_is_comp = isinstance(spec.outline, OutlineComp)

    def root_rows(post: bool) -> tuple[Condition, ...]:
        node = spec.outline
        if isinstance(node, OutlineLeaf):
            return node.conds[-1] if post else node.conds[0]
        return node.post if post else node.pre

    try:
        initials = initial_states_for(root_rows(False)[0], spec.decls,
                                      systems, bounds)
    except EnumerationBudgetExceeded:
        return RuntimeCheckResult((), 0, True, False)
    if not initials:
        return RuntimeCheckResult((), 0, False, True)

    def check(state, executors, cond: Condition, position: str):
        if not eval_condition(state, executors, cond, ctx):
            refuted.add(position)

    def at_initial(state):
        for r, cond in enumerate(root_rows(False)):
            check(state, executors_all, natspat(cond), f"/#pre-root.{r}")
        for rows in comps:
            if rows.path == "/" and root_is_comp:
                continue  # already covered as root rows
            for r, cond in enumerate(rows.pre):
                check(state, rows.executors, framed(natspat(cond)),
                      f"{rows.path}#pre.{r}")
        for b in branches:
            for r, cond in enumerate(b.leaf.conds[0]):
                check(state, (b.executor,), framed(natspat(cond)),
                      f"{b.path}#c0.{r}")

    def at_terminal(state):
        for r, cond in enumerate(root_rows(True)):
            check(state, executors_all, cond, f"/#post-root.{r}")
        for rows in comps:
            if rows.path == "/" and root_is_comp:
                continue
            for r, cond in enumerate(rows.post):
                check(state, rows.executors, framed(cond),
                      f"{rows.path}#post.{r}")
        for b in branches:
            final = len(b.leaf.stmts)
            for r, cond in enumerate(b.leaf.conds[final]):
                check(state, (b.executor,), framed(cond),
                      f"{b.path}#c{final}.{r}")

    def walk(state, counts: tuple[int, ...], on_path: frozenset):
        nonlocal deadlocks, truncated
        if state.aborted is not None:
            refuted.add("/#abort")
            return
        successors = step(state, systems)
        if not successors:
            finals = [ls.ts.final for ls in systems]
            if list(state.locations) == finals:
                at_terminal(state)
            else:
                deadlocks += 1
            return
        if len(state.temporal) >= bounds.max_steps:
            truncated = True
            return
        progressed = False
        for succ, occ in successors:
            executor = next(iter(occ.executors))
            ordinal = counts[executor]
            branch = branches[executor]
            # foreign parts of the rows before the action, read at fire time
            for r, cond in enumerate(branch.leaf.conds[ordinal]):
                check(state, (executor,), foreign_only(cond),
                      f"{branch.path}#c{ordinal}.{r}")
            # native/spatial parts established right after it; the final
            # row waits for the terminal check instead
            if ordinal + 1 < len(branch.leaf.stmts):
                for r, cond in enumerate(branch.leaf.conds[ordinal + 1]):
                    check(succ, (executor,), framed(natspat(cond)),
                          f"{branch.path}#c{ordinal + 1}.{r}")
            key = succ.dedup_key()
            if key in on_path:
                truncated = True
                continue
            progressed = True
            counts2 = tuple(c + 1 if i == executor else c
                            for i, c in enumerate(counts))
            walk(succ, counts2, on_path | {key})
        if not progressed:
            truncated = True

    for init in initials:
        at_initial(init)
        walk(init, tuple(0 for _ in systems), frozenset({init.dedup_key()}))

    return RuntimeCheckResult(tuple(sorted(refuted)), deadlocks, truncated, False)
