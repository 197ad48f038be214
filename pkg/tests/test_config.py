from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from setid.config import (
    evaluate,
    format_expression,
    parse_expression,
    parse_matrix,
    parse_model_text,
    parse_run_config,
    read_sections,
    serialize_model,
)
from setid.errors import ConfigError, DimensionMismatch, ParseError, UnknownParameterName
from setid.model import investment_polynomial, solve_re

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def ar1_text():
    return (CONFIGS / "ar1.cfg").read_text()


def test_ar1_round_trips_through_serializer():
    m = parse_model_text(ar1_text())
    assert [p.name for p in m.params] == ["rho", "sigma"]
    again = parse_model_text(serialize_model(m))
    assert again == m
    assert serialize_model(again) == serialize_model(m)


def test_rbc_config_matches_hand_coefficients():
    spec = parse_model_text((CONFIGS / "rbc_investment.cfg").read_text()).to_spec()
    m = spec.matrices(spec.params.values)
    # s/a = 0.2/0.33; g = 1 + (0.67*0.8 + 0.4)/(0.33*2)
    assert m.F[0, 0] == pytest.approx(0.2 / 0.33, rel=1e-14)
    assert m.G[0, 0] == pytest.approx(1 + 0.936 / 0.66, rel=1e-14)
    assert m.L[0, 0] == pytest.approx(-1 / 0.33, rel=1e-14)
    np.testing.assert_allclose([m.F[0, 0], -m.G[0, 0], m.H[0, 0]], investment_polynomial(0.33, 0.2, 2.0),
                               rtol=1e-14)
    assert abs(solve_re(spec, spec.params.values).P_star[0, 0]) < 1


def test_double_plus_fails_at_exact_offset():
    with pytest.raises(ParseError) as exc:
        parse_expression("α ++ 1")
    assert exc.value.offset == 3
    assert exc.value.column == 4


def test_unknown_name_rejected():
    with pytest.raises(UnknownParameterName):
        parse_model_text(ar1_text().replace("H = [rho]", "H = [rhoo]"))


def test_matrix_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        parse_model_text(ar1_text().replace("H = [rho]", "H = [rho, 1]"))


def test_parse_error_reports_line_and_column():
    text = ar1_text().replace("H = [rho]", "H = [rho * (1]")
    line = text.splitlines().index("H = [rho * (1]") + 1
    with pytest.raises(ParseError) as exc:
        parse_model_text(text)
    assert exc.value.line == line
    assert exc.value.column == len("H = [rho * (1]")


def test_missing_required_matrix():
    with pytest.raises(ConfigError):
        parse_model_text(ar1_text().replace("G = [1]\n", ""))


def test_operators_and_precedence():
    env = {"a": 2.0, "b": 3.0}
    assert evaluate(parse_expression("a + b × 2 ÷ 4"), env) == pytest.approx(3.5)
    assert evaluate(parse_expression("2^3^2"), {}) == 512.0
    assert evaluate(parse_expression("-a^2"), env) == -4.0
    assert evaluate(parse_expression("(a - b) * -1"), env) == 1.0
    assert evaluate(parse_expression("1.5e-1 + .5"), {}) == pytest.approx(0.65)


def test_matrix_literal_shapes():
    rows = parse_matrix("[1, a; b, 2]")
    assert len(rows) == 2 and len(rows[0]) == 2
    assert len(parse_matrix("a + 1")) == 1


def test_sections_track_lines():
    secs = read_sections("# c\n[model]\nn_x = 1\n\n[matrices]\nG = [1,\n 2]\n")
    assert secs["model"][0].line == 3
    assert secs["matrices"][0].key == "G"


def test_run_config_resolves_paths_and_settings():
    cfg = parse_run_config(CONFIGS / "consumption_toy.cfg")
    assert cfg.seed == 42
    assert cfg.data_path.exists() and cfg.survey_path.exists()
    assert cfg.lag_depth == 1 and not cfg.include_constant
    assert cfg.recenter == "point"
    assert cfg.with_seed(7).seed == 7
    assert len(cfg.sha256) == 64


def test_run_config_requires_seed(tmp_path):
    p = tmp_path / "m.cfg"
    p.write_text(ar1_text().replace("[run]\nseed = 0", "[run]"))
    with pytest.raises(ConfigError):
        parse_run_config(p, require_data=False)


def test_run_config_missing_data_file(tmp_path):
    p = tmp_path / "m.cfg"
    p.write_text(ar1_text() + "\n[data]\npath = nowhere.csv\n")
    with pytest.raises(ConfigError):
        parse_run_config(p)


names = st.sampled_from(["a", "b", "c"])
leaves = st.one_of(names.map(lambda n: n), st.integers(0, 9).map(str))


@st.composite
def expressions(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(leaves)
    op = draw(st.sampled_from(["+", "-", "*", "/"]))
    return f"({draw(expressions(depth - 1))} {op} {draw(expressions(depth - 1))})"


@pytest.mark.invariant
@given(text=expressions())
def test_formatting_round_trips_value(text):
    env = {"a": 1.5, "b": -2.0, "c": 0.25}
    node = parse_expression(text)
    again = parse_expression(format_expression(node))
    try:
        v = evaluate(node, env)
    except ZeroDivisionError:
        return
    assert evaluate(again, env) == pytest.approx(v, rel=1e-12, abs=1e-12)
