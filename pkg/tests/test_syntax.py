import random

import pytest

from sepchan.syntax import (
    AEmp, APointsTo, ASep, ActionLabel, Assign, BAnd, BNot, BTrue, BinOp,
    ChannelDecl, Cmp, Condition, Declarations, HeapRead, HeapWrite, If, Lit,
    Owned, OutlineComp, OutlineLeaf, PLeaf, PNest, PPar, ProgramFile,
    Receive, Send, Seq, Skip, SourceError, SpecFile, TBefore, TOccurred,
    T_TOP, Var, When, While, parse_condition_text, parse_program, parse_spec,
    parse_temporal_text, plain_condition, pretty_print,
)

HEADER = "vars m, v, x, y : int;\nchans c : cap=1 dom=0..3;\n"


def parse_body(text: str):
    return parse_program(HEADER + text).body


class TestParseProgram:
    def test_skip(self):
        assert parse_body("skip") == PLeaf(Skip())

    def test_owned_send_sequence(self):
        # two owned sends in sequence, the shape used by network columns
        text = "vars m0, m1 : int;\nchans c0 : cap=1 dom=0..3;\n" \
               "send(m0, c0) @ N0 ; send(m1, c0) @ N0"
        body = parse_program(text).body
        assert body == PLeaf(Seq(Owned(Send(Var("m0"), "c0"), "N0"),
                                 Owned(Send(Var("m1"), "c0"), "N0")))

    def test_send_parallel_receive(self):
        body = parse_body("send(m, c) || v := receive(c)")
        assert body == PPar(PLeaf(Send(Var("m"), "c")),
                            PLeaf(Receive("v", "c")))

    def test_if_else(self):
        body = parse_body("if x = 1 then skip else v := 2")
        assert body == PLeaf(If(Cmp("=", Var("x"), Lit(1)), Skip(),
                                Assign("v", Lit(2))))

    def test_while(self):
        body = parse_body("while x < 3 do x := x + 1")
        assert isinstance(body.stmt, While)

    def test_heap_ops(self):
        body = parse_body("x := [y]; [x] := y + 1")
        assert body == PLeaf(Seq(HeapRead("x", Var("y")),
                                 HeapWrite(Var("x"), BinOp("+", Var("y"), Lit(1)))))

    def test_nest_levels(self):
        text = "vars a, b, d, e : int;\nchans c : cap=1 dom=0..1;\n" \
               "(a := 1 || b := 1) ||@0 (d := 1 || e := 1)"
        body = parse_program(text).body
        assert isinstance(body, PNest) and body.level == 0
        assert isinstance(body.left, PPar)

    def test_undeclared_variable(self):
        with pytest.raises(SourceError) as err:
            parse_body("q := 1")
        assert "undeclared variable" in str(err.value)

    def test_undeclared_channel(self):
        with pytest.raises(SourceError) as err:
            parse_body("send(m, nosuch)")
        assert "undeclared channel" in str(err.value)

    def test_nest_level_must_decrease_inward(self):
        text = HEADER + "(m := 0 ||@1 v := 0) ||@0 x := 0"
        with pytest.raises(SourceError) as err:
            parse_program(text)
        assert "nest level" in str(err.value)

    def test_par_cannot_contain_nest(self):
        text = HEADER + "(m := 0 ||@0 v := 0) || x := 0"
        with pytest.raises(SourceError) as err:
            parse_program(text)
        assert "'||@'" in str(err.value)

    def test_infinite_capacity_rejected(self):
        with pytest.raises(SourceError) as err:
            parse_program("chans c : cap=inf dom=0..1;\nskip")
        assert "bounded" in str(err.value)

    def test_syntax_error_carries_position(self):
        with pytest.raises(SourceError) as err:
            parse_program(HEADER + "send(m c)")
        assert err.value.line >= 3 and err.value.col > 0

    def test_when_rejected_in_programs(self):
        with pytest.raises(SourceError):
            parse_program(HEADER + "when c!m do v := receive(c)")


class TestParseConditions:
    def test_plain(self):
        cond = parse_condition_text("{ true | true /\\ emp }")
        assert cond == plain_condition(AEmp())

    def test_implicit_native_formula(self):
        cond = parse_condition_text("{ true | emp }")
        assert cond == plain_condition(AEmp())

    def test_points_to_wildcard_star(self):
        cond = parse_condition_text("{ true | true /\\ m |-> - * v |-> - }")
        assert cond.assertion == ASep(APointsTo(Var("m"), None),
                                      APointsTo(Var("v"), None))

    def test_group_form(self):
        cond = parse_condition_text(
            "{ true | (c!m0 < c!m1 /\\ true) * (c?v0 < c?v1 /\\ v0 = m0) }")
        assert len(cond.groups) == 2
        assert cond.groups[0][0] == TBefore(ActionLabel("c!m0"), ActionLabel("c!m1"))

    def test_foreign_part(self):
        cond = parse_condition_text("{ c!m0 | c?v0 /\\ v0 = m0 }")
        assert cond.foreign == TOccurred(ActionLabel("c!m0"))
        assert cond.groups[0][0] == TOccurred(ActionLabel("c?v0"))

    def test_system_labels(self):
        cond = parse_condition_text("{ c0!m0@N0 < c1!n0@N1 | true /\\ emp }")
        assert cond.foreign == TBefore(ActionLabel("c0!m0", "N0"),
                                       ActionLabel("c1!n0", "N1"))

    def test_occurred_wrapper(self):
        f = parse_temporal_text("G(occurred(c!m) -> F occurred(c?v))")
        g = parse_temporal_text("G(c!m -> F c?v)")
        assert f == g

    def test_malformed_assertion(self):
        with pytest.raises(SourceError):
            parse_condition_text("{ true | true /\\ m |-> }")


class TestParseSpec:
    def test_identity_outline(self):
        spec = parse_spec(HEADER + "{ true | true /\\ emp } skip "
                          "{ true | true /\\ emp }")
        leaf = spec.outline
        assert isinstance(leaf, OutlineLeaf)
        assert leaf.stmts == (Skip(),)
        assert len(leaf.conds) == 2

    def test_corollary1_shape(self, corollary1_spec):
        outline = corollary1_spec.outline
        assert isinstance(outline, OutlineComp) and outline.kind == "par"
        # joint pre: the ownership of the message cell
        assert outline.pre[0] == plain_condition(APointsTo(Var("m"), None))
        # joint post: the received value equals the sent one
        from sepchan.syntax import ABool
        assert outline.post[-1] == plain_condition(
            ABool(Cmp("=", Var("v"), Var("m"))))

    def test_example1_joint_post_groups(self, example1_spec):
        post = example1_spec.outline.post[-1]
        assert len(post.groups) == 2
        assert post.groups[0][0] == TBefore(ActionLabel("c!m0"), ActionLabel("c!m1"))
        assert post.groups[1][0] == TBefore(ActionLabel("c?v0"), ActionLabel("c?v1"))

    def test_missing_condition_between_statements(self):
        text = HEADER + "{ true | true /\\ emp } skip skip { true | true /\\ emp }"
        with pytest.raises(SourceError):
            parse_spec(text)


class TestRoundTrip:
    def test_skip_pretty(self):
        assert pretty_print(PLeaf(Skip())) == "skip"

    def test_fixture_round_trips(self):
        from conftest import fixture_text
        for name in ("corollary1.ecsl", "example1.ecsl", "example2_network.ecsl"):
            first = parse_program(fixture_text(name))
            again = parse_program(pretty_print(first))
            assert again == first, name
        for name in ("corollary1.spec", "example1.spec", "example2_network.spec"):
            first = parse_spec(fixture_text(name))
            again = parse_spec(pretty_print(first))
            assert again == first, name

    def test_generated_programs_round_trip(self):
        rng = random.Random(20240817)
        for _ in range(1000):
            pf = random_program(rng)
            assert parse_program(pretty_print(pf)) == pf

    def test_generated_specs_round_trip(self):
        rng = random.Random(4711)
        for _ in range(300):
            sf = random_spec(rng)
            assert parse_spec(pretty_print(sf)) == sf


# ----------------------------------------------------------------
# Random AST generators (canonical shapes: sequences left-nested)
# ----------------------------------------------------------------

DECLS = Declarations(("m", "v", "x", "y"),
                     (ChannelDecl("c", 1, (0, 3)), ChannelDecl("d", 2, (0, 1))))
VARS = list(DECLS.variables)
CHANS = [c.name for c in DECLS.channels]


def random_expr(rng, depth=0):
    if depth > 1 or rng.random() < 0.5:
        return rng.choice([Var(rng.choice(VARS)), Lit(rng.randrange(4))])
    return BinOp(rng.choice(["+", "-"]), random_expr(rng, depth + 1),
                 random_expr(rng, depth + 1))


def random_bool(rng, depth=0):
    roll = rng.random()
    if depth > 1 or roll < 0.5:
        return Cmp(rng.choice(["=", "!=", "<", "<=", ">", ">="]),
                   random_expr(rng, 2), random_expr(rng, 2))
    if roll < 0.7:
        return BNot(random_bool(rng, depth + 1))
    if roll < 0.8:
        return BTrue()
    return BAnd(random_bool(rng, depth + 1), random_bool(rng, depth + 1))


def random_atomic(rng):
    choice = rng.randrange(6)
    if choice == 0:
        return Skip()
    if choice == 1:
        return Assign(rng.choice(VARS), random_expr(rng))
    if choice == 2:
        return HeapRead(rng.choice(VARS), random_expr(rng, 2))
    if choice == 3:
        return HeapWrite(random_expr(rng, 2), random_expr(rng, 2))
    if choice == 4:
        return Send(random_expr(rng, 2), rng.choice(CHANS))
    return Receive(rng.choice(VARS), rng.choice(CHANS))


def random_stmt(rng, depth=0):
    roll = rng.random()
    if depth >= 2 or roll < 0.45:
        stmt = random_atomic(rng)
    elif roll < 0.6:
        stmt = If(random_bool(rng), random_stmt(rng, depth + 1),
                  random_stmt(rng, depth + 1))
    elif roll < 0.7:
        stmt = While(random_bool(rng), random_stmt(rng, depth + 1))
    else:
        stmt = random_stmt(rng, depth + 1)
        for _ in range(rng.randrange(1, 3)):
            stmt = Seq(stmt, random_stmt(rng, depth + 1))
    if rng.random() < 0.2 and not isinstance(stmt, (Seq, If, While)):
        stmt = Owned(stmt, rng.choice(["N0", "N1"]))
    return stmt


def random_par(rng, depth=0, level=3):
    roll = rng.random()
    if depth >= 2 or roll < 0.5:
        return PLeaf(random_stmt(rng))
    if roll < 0.85 or level == 0:
        return PPar(random_leafy(rng, depth + 1), random_leafy(rng, depth + 1))
    inner = level - 1
    return PNest(inner, random_par(rng, depth + 1, inner),
                 random_par(rng, depth + 1, inner))


def random_leafy(rng, depth):
    # sides of a program-level || must stay nest-free
    if depth >= 2 or rng.random() < 0.6:
        return PLeaf(random_stmt(rng))
    return PPar(PLeaf(random_stmt(rng)), PLeaf(random_stmt(rng)))


def random_program(rng) -> ProgramFile:
    return ProgramFile(DECLS, random_par(rng))


def random_label(rng):
    action = rng.choice([f"c!{rng.choice(VARS)}", f"c?{rng.choice(VARS)}",
                         f"d!{rng.choice(VARS)}"])
    system = rng.choice([None, "N0", "N1"])
    return ActionLabel(action, system)


def random_temporal(rng, depth=0):
    from sepchan.syntax import TAnd, TNext, TNot, TUntil
    roll = rng.random()
    if depth >= 2 or roll < 0.45:
        if rng.random() < 0.5:
            return TOccurred(random_label(rng))
        return TBefore(random_label(rng), random_label(rng))
    if roll < 0.6:
        return TNot(random_temporal(rng, depth + 1))
    if roll < 0.7:
        return TNext(random_temporal(rng, depth + 1))
    if roll < 0.85:
        return TAnd(random_temporal(rng, depth + 1), random_temporal(rng, depth + 1))
    return TUntil(random_temporal(rng, depth + 1), random_temporal(rng, depth + 1))


def random_assertion(rng, depth=0):
    from sepchan.syntax import AAnd, ABool, ANot, AOr
    roll = rng.random()
    if depth >= 2 or roll < 0.5:
        choice = rng.randrange(4)
        if choice == 0:
            return AEmp()
        if choice == 1:
            return APointsTo(random_expr(rng, 2),
                             None if rng.random() < 0.5 else random_expr(rng, 2))
        if choice == 2:
            return ABool(Cmp("=", random_expr(rng, 2), random_expr(rng, 2)))
        return ABool(BTrue())
    ctor = rng.choice([AAnd, AOr, ASep])
    if rng.random() < 0.1:
        return ANot(random_assertion(rng, depth + 1))
    return ctor(random_assertion(rng, depth + 1), random_assertion(rng, depth + 1))


def random_condition(rng):
    if rng.random() < 0.25:
        groups = tuple((random_temporal(rng, 2), random_assertion(rng, 2))
                       for _ in range(rng.randrange(2, 4)))
        return Condition(random_temporal(rng, 2), groups)
    return Condition(rng.random() < 0.5 and random_temporal(rng, 1) or T_TOP,
                     ((rng.random() < 0.5 and random_temporal(rng, 2) or T_TOP,
                       random_assertion(rng)),))


def random_outline(rng, depth=0):
    if depth >= 2 or rng.random() < 0.6:
        n = rng.randrange(1, 4)
        conds = tuple(tuple(random_condition(rng)
                            for _ in range(rng.randrange(1, 3)))
                      for _ in range(n + 1))
        stmts = tuple(random_atomic(rng) for _ in range(n))
        return OutlineLeaf(conds, stmts)
    return OutlineComp("par", None,
                       random_outline(rng, depth + 1),
                       random_outline(rng, depth + 1),
                       (random_condition(rng),),
                       (random_condition(rng),))


def random_spec(rng) -> SpecFile:
    return SpecFile(DECLS, random_outline(rng))
