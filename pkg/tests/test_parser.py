import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronoscope.lang.ast import Assign, Call, Print, Ret, Branch
from chronoscope.lang.parser import (
    LangSyntaxError,
    UndefinedFunctionError,
    parse_expression,
    parse_program,
)

import gen


def test_fixture_parses(fact_iter):
    assert set(fact_iter.functions) == {"main"}
    assert fact_iter.entry == "main"


def test_call_with_and_without_target():
    prog = parse_program(
        "fn f(a) {\n  return a;\n}\n\nfn main() {\n  x = f(1);\n  f(2);\n}\n", "t"
    )
    calls = [i for i in prog.functions["main"].code if isinstance(i, Call)]
    assert [c.target for c in calls] == ["x", None]


def test_statement_lines_strictly_increase():
    prog = parse_program("fn main() {\n  a = 1;\n  b = 2;\n}\n", "t")
    lines = [i.line for i in prog.functions["main"].code if not i.__class__.__name__ == "Jump"]
    assert lines == sorted(set(lines))


def test_two_statements_on_one_line_rejected():
    with pytest.raises(LangSyntaxError):
        parse_program("fn main() {\n  a = 1; b = 2;\n}\n", "t")


def test_syntax_error_carries_position():
    with pytest.raises(LangSyntaxError) as exc:
        parse_program("fn main() {\n  a = ;\n}\n", "t")
    assert exc.value.line == 2


def test_undefined_function():
    with pytest.raises(UndefinedFunctionError):
        parse_program("fn main() {\n  ghost(1);\n}\n", "t")


def test_expression_precedence():
    # * binds tighter than +, comparisons tighter than and/or
    e = parse_expression("1 + 2 * 3")
    assert e == ("bin", "+", ("num", 1), ("bin", "*", ("num", 2), ("num", 3)))
    e = parse_expression("1 < 2 and true")
    assert e[0] == "bin" and e[1] == "and"


def test_unary_and_parens():
    assert parse_expression("-(3)") == ("un", "-", ("num", 3))
    assert parse_expression("not false") == ("un", "not", ("bool", False))


def test_bad_expression():
    with pytest.raises(LangSyntaxError):
        parse_expression("1 +")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_random_programs_parse(seed):
    import random

    src = gen.random_program_source(random.Random(seed))
    prog = parse_program(src, "gen.tvm")
    assert "main" in prog.functions
    # plain statements appear in source order (control-flow jumps may
    # legitimately point backwards)
    for fn in prog.functions.values():
        lines = [i.line for i in fn.code if isinstance(i, (Assign, Call, Print, Ret))]
        assert all(a < b for a, b in zip(lines, lines[1:]))
