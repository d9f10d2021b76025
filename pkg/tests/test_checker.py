import pytest

from sepchan.checker import (
    RULE_CHANNEL_RECEIVE, RULE_CHANNEL_SEND, RULE_ENV_COMP,
    RULE_NEST_COMP, RULE_NEST_ENV_COMP, RULE_PARALLEL,
    ResourceInvariant, check_channel_receive, check_channel_send,
    check_consequence, check_critical_region, check_outline,
    default_invariant, strip_environment,
)
from sepchan.crossval import outline_runtime_check
from sepchan.syntax import (
    ABool, AEmp, APointsTo, ASep, BTrue, Cmp, ChannelDecl, Declarations,
    Lit, Receive, Send, SpecFile, Var, parse_condition_text, parse_spec,
    plain_condition,
)

from conftest import fixture_text

DECLS = Declarations(("m", "v"), (ChannelDecl("c", 1, (0, 3)),))
HEADER = "vars m, v : int;\nchans c : cap=1 dom=0..3;\n"


def rules_at(verdict, position):
    return [s.rule for s in verdict.steps if s.position == position]


class TestGoldenOutlines:
    def test_corollary1_accepted_with_rules(self, corollary1_spec):
        verdict = check_outline(corollary1_spec)
        assert verdict.accepted
        assert rules_at(verdict, "/0#s0") == [RULE_CHANNEL_SEND]
        assert rules_at(verdict, "/1#s0") == [RULE_CHANNEL_RECEIVE]
        assert rules_at(verdict, "/#join") == [RULE_PARALLEL]

    def test_example1_accepted_with_env_composition(self, example1_spec):
        verdict = check_outline(example1_spec)
        assert verdict.accepted
        assert rules_at(verdict, "/#join") == [RULE_ENV_COMP]

    def test_network_accepted_with_nest_rules(self, network_spec):
        verdict = check_outline(network_spec)
        assert verdict.accepted
        assert rules_at(verdict, "/0#join") == [RULE_NEST_ENV_COMP]
        assert rules_at(verdict, "/1#join") == [RULE_NEST_ENV_COMP]
        assert rules_at(verdict, "/#join") == [RULE_NEST_COMP]

    def test_broken_fixture_rejected_at_position(self):
        spec = parse_spec(fixture_text("corollary1_broken.spec"))
        verdict = check_outline(spec)
        assert not verdict.accepted
        failure = verdict.first_failure
        assert failure.position == "/1#s0"
        assert failure.rule == RULE_CHANNEL_RECEIVE


class TestHandMutations:
    def test_mid_condition_wrong_message_rejected(self, example1_spec):
        # the receiver's middle condition claims the wrong equality
        text = fixture_text("example1.spec").replace(
            "{ c!m0 | c?v0 /\\ v0 = m0 }", "{ c!m0 | c?v0 /\\ v0 = m1 }")
        verdict = check_outline(parse_spec(text))
        assert not verdict.accepted
        assert verdict.first_failure.position.startswith("/1")

    def test_reversed_foreign_order_rejected(self, example1_spec):
        text = fixture_text("example1.spec").replace(
            "{ c!m0 < c!m1 | c?v0 /\\ v0 = m0 }",
            "{ c!m1 < c!m0 | c?v0 /\\ v0 = m0 }")
        verdict = check_outline(parse_spec(text))
        assert not verdict.accepted
        assert "undischarged" in verdict.first_failure.reason

    def test_dropped_joint_foreign_rejected(self):
        # erasing the retained condition at the first system join
        text = fixture_text("example2_network.spec").replace(
            "{ c1!n0@N1 < c1!n1@N1 | (c0!m0@N0 < c0!m1@N0 /\\ true) *",
            "{ true | (c0!m0@N0 < c0!m1@N0 /\\ true) *", 1)
        verdict = check_outline(parse_spec(text))
        assert not verdict.accepted
        assert any("eliminated at the join" in (s.reason or "")
                   for s in verdict.steps if s.status == "fail")

    def test_shared_variable_between_branches_rejected(self):
        text = HEADER + (
            "{ true | true /\\ true }\n"
            "( { true | true /\\ true } m := 1 { true | true /\\ true }\n"
            "|| { true | true /\\ true } m := 2 { true | true /\\ true } )\n"
            "{ true | true /\\ true }\n")
        verdict = check_outline(parse_spec(text))
        assert not verdict.accepted
        assert "footprint overlap" in verdict.first_failure.reason

    def test_root_foreign_condition_rejected(self):
        text = HEADER + (
            "{ c!m | true /\\ true }\n"
            "( { true | true /\\ true } send(m, c) { true | true /\\ true }\n"
            "|| { true | true /\\ true } v := receive(c) { true | true /\\ true } )\n"
            "{ true | true /\\ true }\n")
        verdict = check_outline(parse_spec(text))
        assert not verdict.accepted

    def test_circular_guards_rejected(self):
        decls = "vars a, b : int;\nchans c : cap=1 dom=0..1, d : cap=1 dom=0..1;\n"
        text = decls + (
            "{ true | true /\\ true }\n"
            "( { d!b | true /\\ true } send(a, c) { d!b | c!a /\\ true }\n"
            "|| { c!a | true /\\ true } send(b, d) { c!a | d!b /\\ true } )\n"
            "{ true | true /\\ true }\n")
        verdict = check_outline(parse_spec(text))
        assert not verdict.accepted
        assert any("circular" in (s.reason or "") for s in verdict.steps)


class TestRuleOperations:
    def test_send_rule_with_ownership(self):
        reason = check_channel_send(DECLS, APointsTo(Var("m"), None),
                                    Send(Var("m"), "c"), ABool(BTrue()))
        assert reason is None

    def test_send_rule_without_ownership_rejected(self):
        reason = check_channel_send(DECLS, AEmp(), Send(Var("m"), "c"),
                                    ABool(BTrue()))
        assert reason is not None and "ownership" in reason

    def test_receive_rule_learns_message(self):
        reason = check_channel_receive(
            DECLS, APointsTo(Var("v"), None), Receive("v", "c"),
            ABool(Cmp("=", Var("v"), Var("m"))), message=Var("m"))
        assert reason is None

    def test_receive_without_invariant_cannot_learn_message(self):
        # dropping the resource invariant from the premise loses the
        # connection between the buffer head and the sent message
        reason = check_channel_receive(
            DECLS, APointsTo(Var("v"), None), Receive("v", "c"),
            ABool(Cmp("=", Var("v"), Var("m"))), message=None)
        assert reason is not None

    def test_critical_region_send_premise(self):
        from sepchan.syntax import ABufFull, ANot
        ri = default_invariant("c", Var("m"))
        reason = check_critical_region(
            DECLS, APointsTo(Var("m"), None), Send(Var("m"), "c"),
            ABool(BTrue()), ri, ANot(ABufFull("c")))
        assert reason is None

    def test_consequence_reflexive(self):
        cond = parse_condition_text("{ true | true /\\ m |-> - }", DECLS)
        assert check_consequence(DECLS, cond, cond) is None

    def test_consequence_invariant_weakening(self):
        ri = default_invariant("c", Var("m")).formula
        lhs = plain_condition(ri)
        from sepchan.syntax import AAnd
        rhs = plain_condition(AAnd(ri, ABool(BTrue())))
        assert check_consequence(DECLS, lhs, rhs) is None

    def test_consequence_receive_chain(self):
        # after a dequeue: not full together with the learned equality
        # re-establishes the invariant
        from sepchan.syntax import ABufFull, ANot
        lhs = plain_condition(ASep(ANot(ABufFull("c")),
                                   ABool(Cmp("=", Var("v"), Var("m")))))
        ri = default_invariant("c", Var("m")).formula
        rhs = plain_condition(ASep(ri, ABool(Cmp("=", Var("v"), Var("m")))))
        assert check_consequence(DECLS, lhs, rhs) is None

    def test_consequence_counterexample(self):
        lhs = parse_condition_text("{ true | true /\\ true }", DECLS)
        rhs = parse_condition_text("{ true | true /\\ m = 0 }", DECLS)
        reason = check_consequence(DECLS, lhs, rhs)
        assert reason is not None and "counter-state" in reason


class TestForeignEnvironment:
    def test_explicit_when_matching_guard(self):
        text = HEADER + (
            "{ true | true /\\ m |-> - * v |-> - }\n"
            "( { true | true /\\ m |-> - } send(m, c) { true | c!m /\\ true }\n"
            "|| { c!m | true /\\ v |-> - } when c!m do v := receive(c)"
            " { c!m | c?v /\\ v = m } )\n"
            "{ true | (c!m /\\ true) * (c?v /\\ v = m) }\n")
        verdict = check_outline(parse_spec(text))
        assert verdict.accepted

    def test_when_guard_weaker_than_foreign_rejected(self):
        text = HEADER + (
            "{ true | true /\\ m |-> - * v |-> - }\n"
            "( { true | true /\\ m |-> - } send(m, c) { true | c!m /\\ true }\n"
            "|| { c!m | true /\\ v |-> - } when true do v := receive(c)"
            " { c!m | c?v /\\ v = m } )\n"
            "{ true | (c!m /\\ true) * (c?v /\\ v = m) }\n")
        verdict = check_outline(parse_spec(text))
        assert not verdict.accepted
        assert any("when-guard" in (s.reason or "") for s in verdict.steps)

    def test_trivial_foreign_degenerates_to_premise(self):
        text = HEADER + (
            "{ true | true /\\ m |-> - }\n"
            "when true do send(m, c)\n"
            "{ true | c!m /\\ true }\n")
        verdict = check_outline(parse_spec(text))
        assert verdict.accepted


class TestPureReduction:
    def test_strip_preserves_pure_verdicts(self):
        for name in ("corollary1.spec", "corollary1_broken.spec"):
            spec = parse_spec(fixture_text(name))
            stripped = strip_environment(spec)
            assert check_outline(spec).accepted == \
                check_outline(stripped).accepted

    def test_strip_removes_temporal_parts(self, example1_spec):
        from sepchan.assertions import is_pure
        stripped = strip_environment(example1_spec)

        def all_conds(node):
            from sepchan.syntax import OutlineLeaf
            if isinstance(node, OutlineLeaf):
                return [c for stack in node.conds for c in stack]
            return ([c for c in node.pre] + all_conds(node.left)
                    + all_conds(node.right) + [c for c in node.post])

        assert all(is_pure(c) for c in all_conds(stripped.outline))


class TestDegenerateNest:
    def test_single_system_nest_matches_env_composition(self):
        # the same two-column outline joined by ||@0 and by || must agree
        body = (
            "( { true | true /\\ m |-> - } send(m, c) @ N0"
            " { true | c!m@N0 /\\ true }\n"
            "|| { c!m@N0 | true /\\ v |-> - } v := receive(c) @ N0"
            " { c!m@N0 | c?v@N0 /\\ v = m } )\n")
        pre = "{ true | true /\\ m |-> - * v |-> - }\n"
        post = "{ true | (c!m@N0 /\\ true) * (c?v@N0 /\\ v = m) }\n"
        par_spec = parse_spec(HEADER + pre + body + post)
        nest_spec = parse_spec(HEADER + pre + body.replace("||", "||@0", 1)
                               .replace("( {", "( {", 1) + post)
        par_verdict = check_outline(par_spec)
        nest_verdict = check_outline(nest_spec)
        assert par_verdict.accepted == nest_verdict.accepted is True
        assert rules_at(nest_verdict, "/#join") == [RULE_NEST_ENV_COMP]


class TestRuntimeCrossValidation:
    def test_goldens_clean(self):
        for name in ("corollary1.spec", "example1.spec",
                     "example2_network.spec"):
            result = outline_runtime_check(parse_spec(fixture_text(name)))
            assert result.clean, name
            assert result.deadlocks == 0

    def test_broken_fixture_refuted(self):
        result = outline_runtime_check(
            parse_spec(fixture_text("corollary1_broken.spec")))
        assert result.refuted

    def test_guarded_network_orders_sends(self, network_spec):
        # under the stated guards the first outbound send always precedes
        # the first reply
        from sepchan.crossval import guarded_program
        from sepchan.engine import explore, lower_program, make_initial_state, zero_stack
        from sepchan.state import happens_before
        systems = lower_program(guarded_program(network_spec.outline))
        decls = network_spec.decls
        init = make_initial_state(systems, decls,
                                  zero_stack(decls).set("m0", 1).set("n0", 2))
        result = explore(systems, init)
        assert result.deadlocks == ()
        for trace in result.traces:
            first_m = next(o.index for o in trace.occurrences
                           if o.action == "c0!m0")
            first_n = next(o.index for o in trace.occurrences
                           if o.action == "c1!n0")
            assert happens_before(trace, first_m, first_n)
