"""Checking proof outlines rule by rule.

The checker walks an outline and justifies:

* every atomic statement by its small rule (skip, assignment, heap
  access, or the channel rules derived from the critical-region rule
  with the per-channel resource invariant);
* every stacked pair of conditions by an enumerated consequence check;
* every native (gamma) formula against the branch's own action history;
* every foreign (Gamma) formula by discharge against the fact world:
  the happens-before relation every run of the guarded program is
  committed to (program order, FIFO send/receive matching, and the
  orderings induced by foreign guards);
* every composition by the matching composition rule, including the
  separating-conjunction shape of the joint conditions and, at system
  level, retention of cross-system foreign conditions.

Spatial premises are decided by enumerating the declared finite
domains; nothing here calls an external prover.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .assertions import EvalContext, eval_assertion, eval_expr
from .domains import (
    EnumerationBudgetExceeded, assertion_vars, buffer_channels,
    build_universe, satisfying_states,
)
from .engine import Bounds, DEFAULT_BOUNDS, lower_program, validate_triple
from .lowering import check_variable_partition, program_variables
from .state import ChannelState, Heap, Stack
from .syntax import (
    AAnd, ABufEmpty, ABufFull, ABufPeek, ANot, AOr, ASep, ActionLabel,
    Assertion, Assign, Condition, Declarations, Expr, HeapRead, HeapWrite,
    If, Outline, OutlineComp, OutlineLeaf, Owned, PLeaf, Receive, Send, Seq,
    Skip, SpecFile, Stmt, TAnd, TBefore, TNot, TOccurred, TTop,
    TemporalFormula, When, While, action_text, outline_par_struct,
    plain_condition, positive_atoms, pp_assertion, pp_temporal, T_TOP, A_TRUE,
)

RULE_SKIP = "Skip Rule"
RULE_ASSIGN = "Assignment Rule"
RULE_HEAP_READ = "Heap Read Rule"
RULE_HEAP_WRITE = "Heap Write Rule"
RULE_CHANNEL_SEND = "Channel Send Rule"
RULE_CHANNEL_RECEIVE = "Channel Receive Rule"
RULE_CRITICAL_REGION = "Critical Region Rule"
RULE_CONSEQUENCE = "Consequence"
RULE_FOREIGN_ENV = "Foreign Environment Rule"
RULE_PARALLEL = "Parallel Composition Rule"
RULE_ENV_COMP = "Environment Composition Rule"
RULE_NEST_ENV_COMP = "Nest Environment Composition Rule"
RULE_NEST_COMP = "Nest Composition Rule"
RULE_CONDITIONAL = "Conditional Rule"
RULE_LOOP = "Loop Rule"
RULE_NONE = "no-applicable-rule"


class StaticEntailmentError(Exception):
    """A formula outside the statically dischargeable fragment."""


@dataclass(frozen=True)
class StepRecord:
    position: str
    rule: str
    status: str  # "ok" | "fail"
    reason: Optional[str] = None


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    steps: tuple[StepRecord, ...]

    @property
    def first_failure(self) -> Optional[StepRecord]:
        for s in self.steps:
            if s.status != "ok":
                return s
        return None


@dataclass(frozen=True)
class ResourceInvariant:
    """Invariant guarding one channel's buffer."""

    channel: str
    formula: Assertion


def default_invariant(channel: str, message: Optional[Expr]) -> ResourceInvariant:
    """Not full, or non-empty with the in-flight message at the head."""
    if message is None:
        return ResourceInvariant(channel, A_TRUE)
    formula = AOr(ANot(ABufFull(channel)),
                  AAnd(ANot(ABufEmpty(channel)), ABufPeek(channel, message)))
    return ResourceInvariant(channel, formula)


# ------------------------------------------------------------------
# Outline survey
# ------------------------------------------------------------------

@dataclass(frozen=True)
class ActionInstance:
    executor: int
    ordinal: int
    stmt: Stmt                      # unwrapped atomic statement
    system: Optional[str]
    when: Optional[TemporalFormula]
    composite: bool                 # if/while statement, checked by oracle

    @property
    def key(self) -> tuple[int, int]:
        return (self.executor, self.ordinal)

    @property
    def label(self) -> Optional[ActionLabel]:
        if self.composite:
            return None
        return ActionLabel(action_text(self.stmt), self.system)


@dataclass
class BranchInfo:
    path: str
    executor: int
    leaf: OutlineLeaf
    actions: list[ActionInstance]


def unwrap_statement(stmt: Stmt) -> tuple[Stmt, Optional[str], Optional[TemporalFormula]]:
    """Strip Owned/When wrappers; returns (core, system, when-guard)."""
    system = None
    when = None
    while isinstance(stmt, (Owned, When)):
        if isinstance(stmt, Owned):
            system = stmt.system
            stmt = stmt.body
        else:
            when = stmt.guard if when is None else TAnd(when, stmt.guard)
            stmt = stmt.body
    return stmt, system, when


def collect_branches(outline: Outline) -> list[BranchInfo]:
    branches: list[BranchInfo] = []

    def walk(node: Outline, path: str):
        if isinstance(node, OutlineComp):
            walk(node.left, path + "/0")
            walk(node.right, path + "/1")
            return
        executor = len(branches)
        actions = []
        for ordinal, stmt in enumerate(node.stmts):
            core, system, when = unwrap_statement(stmt)
            composite = isinstance(core, (If, While, Seq))
            actions.append(ActionInstance(executor, ordinal, core, system,
                                          when, composite))
        branches.append(BranchInfo(path or "/", executor, node, actions))

    walk(outline, "")
    return branches


def subtree_executors(node: Outline, branches: list[BranchInfo],
                      path: str = "") -> set[int]:
    prefix = path or "/"
    out = set()
    for b in branches:
        if b.path == prefix or b.path.startswith(path + "/"):
            out.add(b.executor)
    return out


def subtree_systems(node: Outline) -> set[Optional[str]]:
    """Owners of the atomic actions under a node."""
    systems: set[Optional[str]] = set()

    def walk(n: Outline):
        if isinstance(n, OutlineComp):
            walk(n.left)
            walk(n.right)
            return
        for stmt in n.stmts:
            _, system, _ = unwrap_statement(stmt)
            systems.add(system)

    walk(node)
    return systems


def condition_has_temporal(c: Condition) -> bool:
    if c.foreign != T_TOP:
        return True
    return any(g != T_TOP for g, _ in c.groups)


def outline_is_pure(node: Outline) -> bool:
    if isinstance(node, OutlineLeaf):
        return not any(condition_has_temporal(c)
                       for stack in node.conds for c in stack)
    rows = list(node.pre) + list(node.post)
    if any(condition_has_temporal(c) for c in rows):
        return False
    return outline_is_pure(node.left) and outline_is_pure(node.right)


# ------------------------------------------------------------------
# Fact world
# ------------------------------------------------------------------

InstanceKey = tuple[int, int]


@dataclass
class FactWorld:
    """What every run of the guarded outline is committed to.

    Edges come from program order, FIFO matching of sends to receives on
    single-sender/single-receiver channels, and the gating induced by
    foreign guards (an action fires only after the occurrences its guard
    mentions).  Entailment reads formulas against this closed world.
    """

    instances: dict[InstanceKey, ActionInstance]
    reach: dict[InstanceKey, frozenset[InstanceKey]]
    cycle: Optional[InstanceKey]

    def matching(self, label: ActionLabel,
                 allowed: Optional[set[InstanceKey]] = None) -> list[InstanceKey]:
        out = []
        for key, inst in self.instances.items():
            if allowed is not None and key not in allowed:
                continue
            if inst.label is None:
                continue
            if inst.label.text != label.text:
                continue
            if label.system is not None and label.system != inst.system:
                continue
            out.append(key)
        return out

    def entails(self, f: TemporalFormula,
                allowed: Optional[set[InstanceKey]] = None) -> bool:
        if isinstance(f, TTop):
            return True
        if isinstance(f, TOccurred):
            return bool(self.matching(f.label, allowed))
        if isinstance(f, TBefore):
            firsts = self.matching(f.first, allowed)
            seconds = self.matching(f.second, allowed)
            return any(b in self.reach[a] for a in firsts for b in seconds)
        if isinstance(f, TNot):
            return not self.entails(f.arg, allowed)
        if isinstance(f, TAnd):
            return self.entails(f.left, allowed) and self.entails(f.right, allowed)
        raise StaticEntailmentError(
            f"cannot discharge {type(f).__name__} statically; "
            "only propositional formulas over occurred/ordering atoms are supported")


def build_fact_world(branches: list[BranchInfo]) -> FactWorld:
    instances: dict[InstanceKey, ActionInstance] = {}
    for b in branches:
        for inst in b.actions:
            instances[inst.key] = inst
    edges: set[tuple[InstanceKey, InstanceKey]] = set()

    # program order
    for b in branches:
        for first, second in zip(b.actions, b.actions[1:]):
            edges.add((first.key, second.key))

    # FIFO matching on channels with one sending and one receiving branch
    sends: dict[str, list[ActionInstance]] = {}
    recvs: dict[str, list[ActionInstance]] = {}
    for b in branches:
        for inst in b.actions:
            if isinstance(inst.stmt, Send):
                sends.setdefault(inst.stmt.channel, []).append(inst)
            elif isinstance(inst.stmt, Receive):
                recvs.setdefault(inst.stmt.channel, []).append(inst)
    for chan, ss in sends.items():
        rr = recvs.get(chan, [])
        if not rr:
            continue
        if len({i.executor for i in ss}) != 1 or len({i.executor for i in rr}) != 1:
            continue  # matching order would be ambiguous
        for s, r in zip(ss, rr):
            edges.add((s.key, r.key))

    # gating induced by foreign guards
    def guard_of(b: BranchInfo, inst: ActionInstance) -> Optional[TemporalFormula]:
        pre = b.leaf.conds[inst.ordinal][-1]
        guard = pre.foreign if pre.foreign != T_TOP else None
        if inst.when is not None:
            guard = inst.when if guard is None else TAnd(guard, inst.when)
        return guard

    for b in branches:
        for inst in b.actions:
            guard = guard_of(b, inst)
            if guard is None:
                continue
            for atom in positive_atoms(guard):
                labels = [atom.label] if isinstance(atom, TOccurred) \
                    else [atom.first, atom.second]
                for lab in labels:
                    ms = [k for k in instances
                          if instances[k].label is not None
                          and instances[k].label.text == lab.text
                          and (lab.system is None
                               or lab.system == instances[k].system)]
                    if len(ms) == 1 and ms[0] != inst.key:
                        edges.add((ms[0], inst.key))

    # transitive closure
    succ: dict[InstanceKey, set[InstanceKey]] = {k: set() for k in instances}
    for a, b_ in edges:
        succ[a].add(b_)
    reach: dict[InstanceKey, frozenset[InstanceKey]] = {}
    cycle = None
    for start in instances:
        seen: set[InstanceKey] = set()
        frontier = [start]
        while frontier:
            node = frontier.pop()
            for nxt in succ[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        reach[start] = frozenset(seen)
        if start in seen and cycle is None:
            cycle = start
    return FactWorld(instances, reach, cycle)


# ------------------------------------------------------------------
# Enumerated spatial checks
# ------------------------------------------------------------------

def _state_text(stack: Stack, heap: Heap, chans: tuple[ChannelState, ...]) -> str:
    parts = [f"{k}={v}" for k, v in stack.items]
    parts += [f"[{loc}]={val}" for loc, val in heap.cells]
    parts += [f"{c.name}={list(c.buffer)}" for c in chans]
    return "{" + ", ".join(parts) + "}"


def apply_atomic(stmt: Stmt, stack: Stack, heap: Heap,
                 chans: dict[str, ChannelState],
                 ownership_reads: bool = True
                 ) -> tuple[Stack, Heap, dict[str, ChannelState], Optional[str]]:
    """Checker-side effect of one atomic statement.

    Unlike the run-time engine, a send here performs the ownership read
    of the cell its message expression denotes: sending without the
    points-to fact is a heap fault that refutes the rule premise.
    """
    if isinstance(stmt, Skip):
        return stack, heap, chans, None
    if isinstance(stmt, Assign):
        return stack.set(stmt.target, eval_expr(stmt.expr, stack)), heap, chans, None
    if isinstance(stmt, HeapRead):
        address = eval_expr(stmt.address, stack)
        if address not in heap:
            return stack, heap, chans, f"read of unallocated location {address}"
        return stack.set(stmt.target, heap.get(address)), heap, chans, None
    if isinstance(stmt, HeapWrite):
        address = eval_expr(stmt.address, stack)
        if address not in heap:
            return stack, heap, chans, f"write to unallocated location {address}"
        return stack, heap.write(address, eval_expr(stmt.expr, stack)), chans, None
    if isinstance(stmt, Send):
        chan = chans[stmt.channel]
        value = eval_expr(stmt.expr, stack)
        if ownership_reads:
            address = value
            if address not in heap:
                return stack, heap, chans, (
                    f"sending without ownership of the message cell "
                    f"(location {address} unallocated)")
        updated = dict(chans)
        updated[stmt.channel] = chan.enqueue(value)
        return stack, heap, updated, None
    if isinstance(stmt, Receive):
        chan = chans[stmt.channel]
        value, _, rest = chan.dequeue()
        updated = dict(chans)
        updated[stmt.channel] = rest
        return stack.set(stmt.target, value), heap, updated, None
    raise TypeError(f"not an atomic statement: {stmt!r}")


def forward_premise_check(decls: Declarations, pre: Assertion, stmt: Stmt,
                          post: Assertion, guard: Optional[Assertion] = None,
                          invariant: Optional[ResourceInvariant] = None,
                          extra_vars: Iterable[str] = (),
                          bounds: Bounds = DEFAULT_BOUNDS,
                          ownership_reads: bool = True) -> Optional[str]:
    """Enumerate {pre [* RI] [and guard]} stmt {post [* RI]}; None means ok.

    The returned string describes the refuting state (or the budget
    problem).  Channel statements enumerate that channel's buffers.
    """
    ri = invariant.formula if invariant is not None else None
    constraint: Assertion = pre if ri is None else ASep(pre, ri)
    if guard is not None:
        constraint = AAnd(constraint, guard)
    target: Assertion = post if ri is None else ASep(post, ri)

    formulas = [pre, post] + ([ri] if ri is not None else []) \
        + ([guard] if guard is not None else [])
    channels = set(buffer_channels(formulas))
    if isinstance(stmt, (Send, Receive)):
        channels.add(stmt.channel)
    variables = set(extra_vars)
    for f in formulas:
        variables |= assertion_vars(f)
    variables |= program_variables(stmt)
    ordered_vars = [v for v in decls.variables if v in variables]

    try:
        universe = build_universe(decls, formulas, stmts=[stmt],
                                  variables=ordered_vars,
                                  channels=sorted(channels),
                                  budget=bounds.enum_budget)
        candidates = list(satisfying_states(universe, constraint))
    except EnumerationBudgetExceeded as exc:
        return str(exc)

    for stack, heap, chans in candidates:
        chan_map = {c.name: c for c in chans}
        stack2, heap2, chans2, fault = apply_atomic(
            stmt, stack, heap, chan_map, ownership_reads)
        if fault is not None:
            return f"premise refuted: {fault} in {_state_text(stack, heap, chans)}"
        ctx = EvalContext(split_bound=bounds.split_bound,
                          wand_locations=universe.locations,
                          wand_values=universe.values,
                          channels=chans2)
        if not eval_assertion(stack2, heap2, target, ctx):
            return ("premise refuted: post-state "
                    f"{_state_text(stack2, heap2, tuple(chans2.values()))} "
                    f"fails {pp_assertion(target)}")
    return None


def _sep_parts(a: Assertion) -> list[Assertion]:
    if isinstance(a, ASep):
        return _sep_parts(a.left) + _sep_parts(a.right)
    return [a]


def _same_sep_shape(left: Assertion, right: Assertion) -> bool:
    """Equal as multisets of separating conjuncts (the * is commutative
    and associative, so reordering and regrouping is free)."""
    key = pp_assertion
    return sorted(map(key, _sep_parts(left))) == sorted(map(key, _sep_parts(right)))


def check_spatial_consequence(decls: Declarations, lhs: Condition, rhs: Condition,
                              bounds: Bounds = DEFAULT_BOUNDS) -> Optional[str]:
    """Every enumerated state satisfying lhs's spatial part satisfies rhs's."""
    left = lhs.assertion
    right = rhs.assertion
    if _same_sep_shape(left, right):
        return None
    channels = sorted(set(buffer_channels([left, right])))
    try:
        universe = build_universe(decls, [left, right], channels=channels,
                                  budget=bounds.enum_budget)
        candidates = list(satisfying_states(universe, left))
    except EnumerationBudgetExceeded as exc:
        return str(exc)
    for stack, heap, chans in candidates:
        ctx = EvalContext(split_bound=bounds.split_bound,
                          wand_locations=universe.locations,
                          wand_values=universe.values,
                          channels={c.name: c for c in chans})
        if not eval_assertion(stack, heap, right, ctx):
            return (f"counter-state {_state_text(stack, heap, chans)} satisfies "
                    f"{pp_assertion(left)} but not {pp_assertion(right)}")
    return None


def sep_conjoin(conditions: Iterable[Condition]) -> Condition:
    groups: list = []
    for c in conditions:
        groups.extend(c.groups)
    return Condition(T_TOP, tuple(groups))


# ------------------------------------------------------------------
# The outline checker
# ------------------------------------------------------------------

class OutlineChecker:
    def __init__(self, spec: SpecFile, bounds: Bounds = DEFAULT_BOUNDS,
                 invariants: Optional[dict[str, ResourceInvariant]] = None):
        self.decls = spec.decls
        self.outline = spec.outline
        self.bounds = bounds
        self.invariant_overrides = invariants or {}
        self.steps: list[StepRecord] = []
        self.branches = collect_branches(spec.outline)
        self.world = build_fact_world(self.branches)
        self.sends, self.recvs = self._channel_sequences()

    # -- bookkeeping ---------------------------------------------------

    def record(self, position: str, rule: str, reason: Optional[str]):
        status = "ok" if reason is None else "fail"
        self.steps.append(StepRecord(position, rule, status, reason))

    def _channel_sequences(self):
        sends: dict[str, list[ActionInstance]] = {}
        recvs: dict[str, list[ActionInstance]] = {}
        for b in self.branches:
            for inst in b.actions:
                if isinstance(inst.stmt, Send):
                    sends.setdefault(inst.stmt.channel, []).append(inst)
                elif isinstance(inst.stmt, Receive):
                    recvs.setdefault(inst.stmt.channel, []).append(inst)
        return sends, recvs

    def matched_message(self, inst: ActionInstance) -> Optional[Expr]:
        """The message expression of the send matched to this receive."""
        chan = inst.stmt.channel
        ss = self.sends.get(chan, [])
        rr = self.recvs.get(chan, [])
        if len({i.executor for i in ss}) != 1 or len({i.executor for i in rr}) != 1:
            return None
        try:
            position = rr.index(inst)
        except ValueError:
            return None
        if position < len(ss):
            return ss[position].stmt.expr
        return None

    def invariant_for(self, channel: str, message: Optional[Expr]) -> ResourceInvariant:
        if channel in self.invariant_overrides:
            return self.invariant_overrides[channel]
        return default_invariant(channel, message)

    # -- entry point -----------------------------------------------------

    def run(self) -> Verdict:
        self.check_root_conditions()
        self.visit(self.outline, "")
        accepted = all(s.status == "ok" for s in self.steps)
        return Verdict(accepted, tuple(self.steps))

    def check_root_conditions(self):
        pre = outline_root_rows(self.outline, post=False)
        post = outline_root_rows(self.outline, post=True)
        for name, row in (("pre", pre[0]), ("post", post[-1])):
            if row.foreign != T_TOP:
                self.record(f"/#root-{name}", RULE_NONE,
                            "foreign conditions must be eliminated at the "
                            f"outline root, found {pp_temporal(row.foreign)}")
        if self.world.cycle is not None:
            inst = self.world.instances[self.world.cycle]
            self.record("/#facts", RULE_NONE,
                        "circular foreign-environment dependency through "
                        f"{inst.label}")

    # -- node dispatch ------------------------------------------------------

    def visit(self, node: Outline, path: str):
        if isinstance(node, OutlineLeaf):
            self.visit_leaf(node, path)
        else:
            self.visit_comp(node, path)

    # -- leaves ---------------------------------------------------------------

    def visit_leaf(self, leaf: OutlineLeaf, path: str):
        prefix = path or "/"
        branch = next(b for b in self.branches if b.path == prefix)
        history: set[InstanceKey] = set()
        for k, stack in enumerate(leaf.conds):
            # stacked consequences within the row
            for r in range(1, len(stack)):
                reason = check_spatial_consequence(self.decls, stack[r - 1],
                                                   stack[r], self.bounds)
                self.record(f"{prefix}#c{k}.{r}", RULE_CONSEQUENCE, reason)
            # native formulas against the branch history so far
            for r, cond in enumerate(stack):
                self.check_native_row(cond, set(history), f"{prefix}#c{k}.{r}")
                self.check_foreign_row(cond, f"{prefix}#c{k}.{r}")
            if k < len(leaf.stmts):
                inst = branch.actions[k]
                history.add(inst.key)
                self.check_action(branch, leaf, k, f"{prefix}#s{k}")

    def check_native_row(self, cond: Condition, history: set[InstanceKey],
                         position: str):
        native = cond.native
        if native == T_TOP:
            return
        try:
            ok = self.world.entails(native, history)
        except StaticEntailmentError as exc:
            self.record(position, RULE_CONSEQUENCE, str(exc))
            return
        if not ok:
            self.record(position, RULE_CONSEQUENCE,
                        f"native condition {pp_temporal(native)} is not "
                        "justified by the actions executed so far")

    def check_foreign_row(self, cond: Condition, position: str):
        if cond.foreign == T_TOP:
            return
        try:
            ok = self.world.entails(cond.foreign, None)
        except StaticEntailmentError as exc:
            self.record(position, RULE_FOREIGN_ENV, str(exc))
            return
        reason = None if ok else (
            f"undischarged foreign condition {pp_temporal(cond.foreign)}: "
            "the other components never establish it")
        self.record(position, RULE_FOREIGN_ENV, reason)

    def check_action(self, branch: BranchInfo, leaf: OutlineLeaf, k: int,
                     position: str):
        inst = branch.actions[k]
        pre = leaf.conds[k][-1]
        post = leaf.conds[k + 1][0]
        if inst.when is not None:
            # explicit guard must match the stated foreign pre-condition
            if inst.when != pre.foreign:
                self.record(position, RULE_FOREIGN_ENV,
                            f"when-guard {pp_temporal(inst.when)} differs from "
                            f"the foreign pre-condition {pp_temporal(pre.foreign)}")
        stmt = inst.stmt
        if inst.composite:
            self.check_composite(inst, pre, post, position)
            return
        if isinstance(stmt, Skip):
            reason = forward_premise_check(self.decls, pre.assertion, stmt,
                                           post.assertion, bounds=self.bounds)
            self.record(position, RULE_SKIP, reason)
        elif isinstance(stmt, Assign):
            reason = forward_premise_check(self.decls, pre.assertion, stmt,
                                           post.assertion, bounds=self.bounds)
            self.record(position, RULE_ASSIGN, reason)
        elif isinstance(stmt, HeapRead):
            reason = forward_premise_check(self.decls, pre.assertion, stmt,
                                           post.assertion, bounds=self.bounds)
            self.record(position, RULE_HEAP_READ, reason)
        elif isinstance(stmt, HeapWrite):
            reason = forward_premise_check(self.decls, pre.assertion, stmt,
                                           post.assertion, bounds=self.bounds)
            self.record(position, RULE_HEAP_WRITE, reason)
        elif isinstance(stmt, Send):
            ri = self.invariant_for(stmt.channel, stmt.expr)
            reason = forward_premise_check(
                self.decls, pre.assertion, stmt, post.assertion,
                guard=ANot(ABufFull(stmt.channel)), invariant=ri,
                bounds=self.bounds)
            self.record(position, RULE_CHANNEL_SEND, reason)
        elif isinstance(stmt, Receive):
            message = self.matched_message(inst)
            ri = self.invariant_for(stmt.channel, message)
            extra = assertion_vars(ri.formula)
            reason = forward_premise_check(
                self.decls, pre.assertion, stmt, post.assertion,
                guard=ANot(ABufEmpty(stmt.channel)), invariant=ri,
                extra_vars=extra, bounds=self.bounds)
            self.record(position, RULE_CHANNEL_RECEIVE, reason)
        else:
            self.record(position, RULE_NONE,
                        f"no rule applies to {type(stmt).__name__}")

    def check_composite(self, inst: ActionInstance, pre: Condition,
                        post: Condition, position: str):
        rule = RULE_LOOP if isinstance(inst.stmt, While) else RULE_CONDITIONAL
        if condition_has_temporal(pre) or condition_has_temporal(post):
            self.record(position, rule,
                        "compound statements support pure conditions only")
            return
        stmt = inst.stmt if inst.system is None else Owned(inst.stmt, inst.system)
        systems = lower_program(PLeaf(stmt))
        result = validate_triple(plain_condition(pre.assertion), systems,
                                 plain_condition(post.assertion),
                                 self.decls, self.bounds)
        if result.valid:
            self.record(position, rule, None)
        elif result.status == "inconclusive":
            self.record(position, rule,
                        f"premise could not be validated: {result.reason}")
        else:
            self.record(position, rule, "premise refuted by exploration")

    # -- compositions ------------------------------------------------------------

    def visit_comp(self, comp: OutlineComp, path: str):
        prefix = path or "/"
        for r in range(1, len(comp.pre)):
            reason = check_spatial_consequence(self.decls, comp.pre[r - 1],
                                               comp.pre[r], self.bounds)
            self.record(f"{prefix}#pre.{r}", RULE_CONSEQUENCE, reason)
        for r in range(1, len(comp.post)):
            reason = check_spatial_consequence(self.decls, comp.post[r - 1],
                                               comp.post[r], self.bounds)
            self.record(f"{prefix}#post.{r}", RULE_CONSEQUENCE, reason)

        executors = subtree_executors(comp, self.branches, path)
        allowed = {key for key in self.world.instances if key[0] in executors}
        for r, cond in enumerate(comp.pre):
            self.check_native_row(cond, set(), f"{prefix}#pre.{r}")
            self.check_foreign_row(cond, f"{prefix}#pre.{r}")
        for r, cond in enumerate(comp.post):
            self.check_native_row(cond, allowed, f"{prefix}#post.{r}")
            self.check_foreign_row(cond, f"{prefix}#post.{r}")

        self.visit(comp.left, path + "/0")
        self.visit(comp.right, path + "/1")
        self.check_join(comp, path)

    def check_join(self, comp: OutlineComp, path: str):
        prefix = path or "/"
        position = f"{prefix}#join"
        rule = self.join_rule(comp)

        # variable footprints of the two sides must be disjoint
        try:
            check_variable_partition(outline_par_struct(comp))
        except ValueError as exc:
            self.record(position, rule, f"footprint overlap: {exc}")
            return

        joint_pre = comp.pre[-1]
        joint_post = comp.post[0]
        child_pre = sep_conjoin([outline_first_pre(comp.left),
                                 outline_first_pre(comp.right)])
        child_post = sep_conjoin([outline_last_post(comp.left),
                                  outline_last_post(comp.right)])
        reason = check_spatial_consequence(self.decls, joint_pre, child_pre,
                                           self.bounds)
        if reason is not None:
            self.record(position, rule,
                        f"joint pre-condition does not split: {reason}")
            return
        reason = check_spatial_consequence(self.decls, child_post, joint_post,
                                           self.bounds)
        if reason is not None:
            self.record(position, rule,
                        f"joint post-condition does not combine: {reason}")
            return

        if rule == RULE_PARALLEL:
            self.record(position, rule, None)
            return
        if rule == RULE_ENV_COMP or (rule == RULE_NEST_COMP):
            # composition eliminates the foreign environment
            for name, row in (("pre", joint_pre), ("post", joint_post)):
                if row.foreign != T_TOP:
                    self.record(position, rule,
                                f"joint {name}-condition keeps a foreign part "
                                f"{pp_temporal(row.foreign)}; the composition "
                                "must eliminate it")
                    return
            self.record(position, rule, None)
            return
        # nest environment composition: cross-system conditions are immutable
        self.check_nest_env_join(comp, position)

    def join_rule(self, comp: OutlineComp) -> str:
        if comp.kind == "nest":
            left = subtree_systems(comp.left)
            right = subtree_systems(comp.right)
            if left and right and None not in left and None not in right \
                    and not (left & right):
                return RULE_NEST_COMP
            return RULE_NEST_ENV_COMP  # degenerate same-system nesting
        if outline_is_pure(comp):
            return RULE_PARALLEL
        systems = subtree_systems(comp)
        if None not in systems and len(systems) == 1:
            return RULE_NEST_ENV_COMP
        return RULE_ENV_COMP

    def check_nest_env_join(self, comp: OutlineComp, position: str):
        systems = subtree_systems(comp) - {None}
        native_system = next(iter(systems)) if len(systems) == 1 else None
        joint_post = comp.post[0]
        granted = grant_world(joint_post.foreign)
        for child in (comp.left, comp.right):
            final = outline_last_post(child)
            if final.foreign == T_TOP:
                continue
            cross = [atom for atom in positive_atoms(final.foreign)
                     if _mentions_other_system(atom, native_system)]
            for atom in cross:
                if not granted.entails_atom(atom):
                    self.record(
                        position, RULE_NEST_ENV_COMP,
                        "cross-system condition "
                        f"{pp_temporal(atom)} was eliminated at the join; "
                        "the joint condition must retain it")
                    return
        self.record(position, RULE_NEST_ENV_COMP, None)


def _mentions_other_system(atom: Union[TOccurred, TBefore],
                           system: Optional[str]) -> bool:
    labels = [atom.label] if isinstance(atom, TOccurred) else [atom.first, atom.second]
    return any(lab.system is not None and lab.system != system for lab in labels)


@dataclass
class GrantWorld:
    """Atoms granted by a retained foreign condition."""

    occurred: list[ActionLabel]
    pairs: list[tuple[ActionLabel, ActionLabel]]

    def _covers(self, lab: ActionLabel, granted: ActionLabel) -> bool:
        if lab.text != granted.text:
            return False
        return lab.system == granted.system or lab.system is None

    def entails_atom(self, atom: Union[TOccurred, TBefore]) -> bool:
        if isinstance(atom, TOccurred):
            every = self.occurred + [x for p in self.pairs for x in p]
            return any(self._covers(atom.label, g) for g in every)
        return any(self._covers(atom.first, a) and self._covers(atom.second, b)
                   for a, b in self.pairs)


def grant_world(f: TemporalFormula) -> GrantWorld:
    occurred = []
    pairs = []
    for atom in positive_atoms(f):
        if isinstance(atom, TOccurred):
            occurred.append(atom.label)
        else:
            pairs.append((atom.first, atom.second))
    return GrantWorld(occurred, pairs)


def outline_first_pre(node: Outline) -> Condition:
    return node.conds[0][0] if isinstance(node, OutlineLeaf) else node.pre[0]


def outline_last_post(node: Outline) -> Condition:
    return node.conds[-1][-1] if isinstance(node, OutlineLeaf) else node.post[-1]


def outline_root_rows(node: Outline, post: bool) -> tuple[Condition, ...]:
    if isinstance(node, OutlineLeaf):
        return node.conds[-1] if post else node.conds[0]
    return node.post if post else node.pre


# ------------------------------------------------------------------
# Public operations
# ------------------------------------------------------------------

def check_outline(spec: SpecFile, bounds: Bounds = DEFAULT_BOUNDS,
                  invariants: Optional[dict[str, ResourceInvariant]] = None) -> Verdict:
    """Check every rule application of a proof outline."""
    return OutlineChecker(spec, bounds, invariants).run()


def check_consequence(decls: Declarations, lhs: Condition, rhs: Condition,
                      bounds: Bounds = DEFAULT_BOUNDS) -> Optional[str]:
    """Spatial consequence by enumeration; None means every state passing
    lhs passes rhs."""
    return check_spatial_consequence(decls, lhs, rhs, bounds)


def check_critical_region(decls: Declarations, pre: Assertion, stmt: Stmt,
                          post: Assertion, invariant: ResourceInvariant,
                          guard: Assertion,
                          bounds: Bounds = DEFAULT_BOUNDS) -> Optional[str]:
    """The critical-region premise {(pre * RI) and guard} stmt {post * RI}."""
    return forward_premise_check(decls, pre, stmt, post, guard=guard,
                                 invariant=invariant, bounds=bounds)


def check_channel_send(decls: Declarations, pre: Assertion, stmt: Send,
                       post: Assertion,
                       bounds: Bounds = DEFAULT_BOUNDS) -> Optional[str]:
    ri = default_invariant(stmt.channel, stmt.expr)
    return check_critical_region(decls, pre, stmt, post, ri,
                                 ANot(ABufFull(stmt.channel)), bounds)


def check_channel_receive(decls: Declarations, pre: Assertion, stmt: Receive,
                          post: Assertion, message: Optional[Expr],
                          bounds: Bounds = DEFAULT_BOUNDS) -> Optional[str]:
    ri = default_invariant(stmt.channel, message)
    extra = assertion_vars(ri.formula)
    return forward_premise_check(decls, pre, stmt, post,
                                 guard=ANot(ABufEmpty(stmt.channel)),
                                 invariant=ri, extra_vars=extra, bounds=bounds)


def strip_environment(spec: SpecFile) -> SpecFile:
    """Erase all temporal components, keeping the spatial skeleton."""
    def strip_cond(c: Condition) -> Condition:
        return Condition(T_TOP, tuple((T_TOP, p) for _, p in c.groups))

    def strip(node: Outline) -> Outline:
        if isinstance(node, OutlineLeaf):
            return OutlineLeaf(
                tuple(tuple(strip_cond(c) for c in stack) for stack in node.conds),
                node.stmts)
        return OutlineComp(node.kind, node.level, strip(node.left),
                           strip(node.right),
                           tuple(strip_cond(c) for c in node.pre),
                           tuple(strip_cond(c) for c in node.post))

    return SpecFile(spec.decls, strip(spec.outline))
