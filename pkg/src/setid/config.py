"""Sectioned text configuration for models and runs.

A configuration file is a list of ``[section]`` headers followed by
``key = value`` lines.  ``#`` starts a comment.  A value continues onto the
following lines while it has an unclosed ``[``.  Matrix entries are
arithmetic expressions over parameter names and numeric literals; they are
compiled once into a single Python function that fills a preallocated
buffer.

Grammar (ABNF sketch)::

    file        = *( blank / comment / section )
    section     = "[" name "]" EOL *( blank / comment / entry )
    entry       = key *WSP "=" *WSP value EOL
    key         = name *( "." name )
    value       = matrix / list / expr / text
    matrix      = "[" row *( ";" row ) "]"
    row         = expr *( "," expr )
    list        = item *( *WSP "," *WSP item )
    expr        = term *( ( "+" / "-" ) term )
    term        = unary *( ( "*" / "/" / "x" / "%x00F7" ) unary )
    unary       = "-" unary / power
    power       = atom [ "^" unary ]
    atom        = number / name / "(" expr ")"
    number      = 1*DIGIT [ "." *DIGIT ] [ ( "e" / "E" ) [ "+" / "-" ] 1*DIGIT ]
    name        = ( ALPHA / "_" / UNICODE-LETTER ) *( ALPHA / DIGIT / "_" / UNICODE-LETTER )
    param-value = expr "in" "[" expr "," expr "]" [ "friction" ]

``x`` above stands for the multiplication sign U+00D7.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError, DimensionMismatch, ParseError, UnknownParameterName

# ---------------------------------------------------------------------------
# expressions


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_OPS = {"+": "+", "-": "-", "*": "*", "/": "/", "^": "^", "×": "*", "÷": "/"}
_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NAME = re.compile(r"[^\W\d]\w*")


def _position(source: str | None, offset: int) -> tuple[int, int]:
    if source is None:
        return 1, offset + 1
    line = source.count("\n", 0, offset) + 1
    col = offset - (source.rfind("\n", 0, offset) + 1) + 1
    return line, col


def _tokenize(text: str, base: int, source: str | None):
    toks = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _OPS or ch in "()[],;":
            toks.append((_OPS.get(ch, ch), i))
            i += 1
            continue
        m = _NUMBER.match(text, i)
        if m:
            toks.append((float(m.group(0)), i))
            i = m.end()
            continue
        m = _NAME.match(text, i)
        if m:
            toks.append((Var(m.group(0)), i))
            i = m.end()
            continue
        line, col = _position(source, base + i)
        raise ParseError(f"unexpected character {ch!r}", base + i, line, col)
    toks.append((None, len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, base: int = 0, source: str | None = None):
        self.text = text
        self.base = base
        self.source = source
        self.toks = _tokenize(text, base, source)
        self.k = 0

    def error(self, msg: str, pos: int | None = None):
        off = self.base + (self.toks[self.k][1] if pos is None else pos)
        line, col = _position(self.source, off)
        return ParseError(msg, off, line, col)

    @property
    def tok(self):
        return self.toks[self.k][0]

    def eat(self, want):
        if self.tok != want:
            got = "end of input" if self.tok is None else repr(self._show(self.tok))
            raise self.error(f"expected {want!r}, found {got}")
        self.k += 1

    @staticmethod
    def _show(t):
        if isinstance(t, Var):
            return t.name
        return t

    def expr(self):
        node = self.term()
        while self.tok in ("+", "-"):
            op = self.tok
            self.k += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok in ("*", "/"):
            op = self.tok
            self.k += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok == "-":
            self.k += 1
            arg = self.unary()
            if isinstance(arg, Num):
                return Num(-arg.value)
            return Neg(arg)
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok == "^":
            self.k += 1
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        t = self.tok
        if isinstance(t, float):
            self.k += 1
            return Num(t)
        if isinstance(t, Var):
            self.k += 1
            return t
        if t == "(":
            self.k += 1
            node = self.expr()
            self.eat(")")
            return node
        if t is None:
            raise self.error("unexpected end of expression")
        raise self.error(f"unexpected token {self._show(t)!r}")

    def done(self):
        if self.tok is not None:
            raise self.error(f"unexpected token {self._show(self.tok)!r}")

    def matrix(self):
        if self.tok != "[":
            node = self.expr()
            self.done()
            return ((node,),)
        self.k += 1
        rows, row = [], [self.expr()]
        while True:
            if self.tok == ",":
                self.k += 1
                row.append(self.expr())
            elif self.tok == ";":
                self.k += 1
                rows.append(tuple(row))
                row = [self.expr()]
            elif self.tok == "]":
                self.k += 1
                rows.append(tuple(row))
                break
            else:
                raise self.error("expected ',', ';' or ']'")
        self.done()
        if len({len(r) for r in rows}) != 1:
            raise DimensionMismatch("matrix rows have different lengths")
        return tuple(rows)


def parse_expression(text: str, base: int = 0, source: str | None = None):
    """Parse one arithmetic expression.

    Raises
    ------
    ParseError
        With the zero-based ``offset`` of the offending token.
    """
    p = _Parser(text, base, source)
    node = p.expr()
    p.done()
    return node


def parse_matrix(text: str, base: int = 0, source: str | None = None) -> tuple[tuple[object, ...], ...]:
    """Parse ``[a, b; c, d]`` (or a bare expression for a 1 x 1 matrix)."""
    return _Parser(text, base, source).matrix()


def format_expression(node, parent: int = 0, right: bool = False) -> str:
    """Canonical text with the minimal parentheses."""
    if isinstance(node, Num):
        s = _fmt_num(node.value)
        return f"({s})" if node.value < 0 and parent > 0 else s
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        s = "-" + format_expression(node.arg, 3)
        return f"({s})" if parent > 0 else s
    prec = _PREC[node.op]
    if node.op == "^":
        s = f"{format_expression(node.left, 5)}^{format_expression(node.right, 3)}"
    else:
        s = f"{format_expression(node.left, prec)} {node.op} {format_expression(node.right, prec, True)}"
    need = prec < parent or (right and prec == parent)
    return f"({s})" if need else s


def _fmt_num(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def expression_names(node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Neg):
        return expression_names(node.arg)
    if isinstance(node, BinOp):
        return expression_names(node.left) | expression_names(node.right)
    return set()


def _py(node, slots: Mapping[str, int]) -> str:
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        if node.name not in slots:
            raise UnknownParameterName(f"unknown name '{node.name}'")
        return f"v[{slots[node.name]}]"
    if isinstance(node, Neg):
        return f"(-{_py(node.arg, slots)})"
    op = "**" if node.op == "^" else node.op
    return f"({_py(node.left, slots)} {op} {_py(node.right, slots)})"


def evaluate(node, env: Mapping[str, float]) -> float:
    """Direct tree evaluation, used for constants and by tests as a reference."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name not in env:
            raise UnknownParameterName(f"unknown name '{node.name}'")
        return float(env[node.name])
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    a, b = evaluate(node.left, env), evaluate(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return a ** b


class CompiledMatrices:
    """All matrix entries compiled into one function of the value vector.

    Calling the object fills one preallocated buffer and returns views into
    it, so each evaluation allocates a single array copy.
    """

    def __init__(self, matrices: Mapping[str, tuple], names: list[str],
                 derived: list[tuple[str, object]] | None = None):
        slots = {n: i for i, n in enumerate(names)}
        lines = ["def _fill(v, out):"]
        k = len(names)
        for dname, dexpr in derived or []:
            lines.append(f"    v[{k}] = {_py(dexpr, slots)}")
            slots[dname] = k
            k += 1
        self.n_values = k
        self.layout = {}
        pos = 0
        for key, rows in matrices.items():
            shape = (len(rows), len(rows[0]) if rows else 0)
            self.layout[key] = (pos, shape)
            for row in rows:
                for e in row:
                    lines.append(f"    out[{pos}] = {_py(e, slots)}")
                    pos += 1
        if len(lines) == 1:
            lines.append("    pass")
        ns: dict = {}
        exec(compile("\n".join(lines), "<setid-config>", "exec"), {}, ns)
        self._fill = ns["_fill"]
        self.size = pos
        self.n_params = len(names)

    def __call__(self, values) -> dict[str, NDArray]:
        v = [0.0] * self.n_values
        v[: self.n_params] = [float(x) for x in np.asarray(values, dtype=float).reshape(-1)]
        out = np.empty(self.size)
        try:
            self._fill(v, out)
        except ZeroDivisionError as exc:
            raise ConfigError("division by zero while evaluating the model matrices") from exc
        return {k: out[p: p + s[0] * s[1]].reshape(s) for k, (p, s) in self.layout.items()}


# ---------------------------------------------------------------------------
# sectioned text


@dataclass(frozen=True)
class Entry:
    key: str
    value: str
    offset: int  # absolute offset of the value in the source text
    line: int


def read_sections(text: str) -> dict[str, list[Entry]]:
    """Split configuration text into sections of ``key = value`` entries."""
    sections: dict[str, list[Entry]] = {}
    current: list[Entry] | None = None
    lines = text.splitlines(keepends=True)
    starts = np.cumsum([0] + [len(s) for s in lines]).tolist()
    i = 0
    while i < len(lines):
        raw = lines[i]
        body = raw.split("#", 1)[0]
        stripped = body.strip()
        off0 = starts[i]
        if not stripped:
            i += 1
            continue
        if stripped.startswith("[") and stripped.endswith("]") and "=" not in stripped:
            name = stripped[1:-1].strip()
            if not re.fullmatch(r"[A-Za-z_][\w.]*", name):
                col = body.index("[") + 1
                raise ParseError(f"bad section name {name!r}", off0 + col - 1, i + 1, col)
            if name in sections:
                raise ParseError(f"duplicate section [{name}]", off0, i + 1, 1)
            current = sections[name] = []
            i += 1
            continue
        if "=" not in body:
            col = len(body) - len(body.lstrip()) + 1
            raise ParseError("expected 'key = value'", off0 + col - 1, i + 1, col)
        if current is None:
            raise ParseError("entry outside a section", off0, i + 1, 1)
        key, val = body.split("=", 1)
        key = key.strip()
        if not re.fullmatch(r"[^\W\d][\w.]*", key):
            col = len(body) - len(body.lstrip()) + 1
            raise ParseError(f"bad key {key!r}", off0 + col - 1, i + 1, col)
        vstart = off0 + body.index("=") + 1
        vstart += len(val) - len(val.lstrip())
        value = val.strip()
        line_no = i + 1
        depth = value.count("[") - value.count("]")
        # bracketed values continue on following lines; the value keeps the
        # source layout (comments blanked) so offsets still point into the file
        end = vstart + len(value)
        while depth > 0 and i + 1 < len(lines):
            i += 1
            more = lines[i].split("#", 1)[0].rstrip("\r\n")
            gap = text[end: starts[i]]
            value += re.sub(r"[^\s]", " ", gap).replace("\n", " ").replace("\r", " ") + more
            value = value.rstrip()
            end = vstart + len(value)
            depth = value.count("[") - value.count("]")
        if any(e.key == key for e in current):
            raise ParseError(f"duplicate key '{key}'", off0, line_no, 1)
        current.append(Entry(key, value, vstart, line_no))
        i += 1
    return sections


# ---------------------------------------------------------------------------
# model configuration


MATRIX_KEYS = ("G", "F", "H", "L", "R", "Sigma")


@dataclass(frozen=True)
class ParamDecl:
    name: str
    value: float
    lower: float
    upper: float
    friction: bool = False


@dataclass(frozen=True)
class ModelConfig:
    """Parsed model section of a configuration file."""

    n_x: int
    n_z: int
    params: tuple[ParamDecl, ...]
    matrices: tuple[tuple[str, tuple], ...]
    obs_names: tuple[str, ...]
    selector: tuple
    signs: tuple[int, ...]
    state_names: tuple[str, ...] = ()
    derived: tuple[tuple[str, object], ...] = ()
    measurement_cov: tuple | None = None

    @property
    def param_names(self) -> list[str]:
        return [p.name for p in self.params]

    def compile(self) -> CompiledMatrices:
        return CompiledMatrices(dict(self.matrices), self.param_names, list(self.derived))

    def to_spec(self):
        """Build a :class:`~setid.model.ModelSpec`."""
        from .model import ModelSpec, ParamVector

        comp = self.compile()
        names = self.param_names
        params = ParamVector(tuple(names), np.array([p.value for p in self.params]),
                             np.array([[p.lower, p.upper] for p in self.params]),
                             np.array([p.friction for p in self.params]))
        sel = _const_matrix(self.selector, "selector")
        mcov = None if self.measurement_cov is None else _const_matrix(self.measurement_cov, "measurement_cov")
        return ModelSpec(n_x=self.n_x, n_z=self.n_z, matrix_map=comp, params=params, selector=sel,
                         friction_signs=np.array(self.signs), obs_names=self.obs_names,
                         state_names=self.state_names, measurement_cov=mcov)


def _const_matrix(rows, what: str) -> NDArray:
    try:
        return np.array([[evaluate(e, {}) for e in r] for r in rows], dtype=float)
    except UnknownParameterName as exc:
        raise ConfigError(f"{what} must be numeric: {exc}") from exc


def _get(sec: list[Entry], key: str, required: bool = True) -> Entry | None:
    for e in sec:
        if e.key == key:
            return e
    if required:
        raise ConfigError(f"missing key '{key}'")
    return None


def _split_list(e: Entry) -> list[str]:
    v = e.value.strip()
    if v.startswith("[") and v.endswith("]"):
        v = v[1:-1]
    return [s.strip() for s in re.split(r"[,\s]+", v) if s.strip()]


def _int(e: Entry, source: str) -> int:
    node = parse_expression(e.value, e.offset, source)
    val = evaluate(node, {})
    if not float(val).is_integer():
        raise ConfigError(f"'{e.key}' must be an integer")
    return int(val)


def _num(e: Entry, source: str) -> float:
    return float(evaluate(parse_expression(e.value, e.offset, source), {}))


_PARAM = re.compile(r"^(?P<val>.+?)\s+in\s+\[(?P<lo>[^,\]]+),(?P<hi>[^\]]+)\](?P<rest>.*)$")


def _param(e: Entry, source: str) -> ParamDecl:
    m = _PARAM.match(e.value)
    if not m:
        line, col = _position(source, e.offset)
        raise ParseError(f"parameter '{e.key}' needs 'value in [lower, upper]'", e.offset, line, col)
    rest = m.group("rest").strip()
    if rest not in ("", "friction"):
        off = e.offset + m.start("rest") + (len(m.group("rest")) - len(m.group("rest").lstrip()))
        line, col = _position(source, off)
        raise ParseError(f"unexpected text {rest!r}", off, line, col)
    vals = [float(evaluate(parse_expression(m.group(g), e.offset + m.start(g), source), {}))
            for g in ("val", "lo", "hi")]
    if not vals[1] <= vals[0] <= vals[2]:
        raise ConfigError(f"parameter '{e.key}' starts outside its bounds")
    return ParamDecl(e.key, vals[0], vals[1], vals[2], rest == "friction")


def parse_model_text(text: str) -> ModelConfig:
    """Parse the ``[model]``, ``[parameters]``, ``[derived]``, ``[matrices]``
    and ``[observables]`` sections of a configuration text."""
    secs = read_sections(text)
    for s in ("model", "parameters", "matrices", "observables"):
        if s not in secs:
            raise ConfigError(f"missing section [{s}]")
    mdl = secs["model"]
    n_x = _int(_get(mdl, "n_x"), text)
    n_z = _int(_get(mdl, "n_z"), text)
    st = _get(mdl, "states", required=False)
    states = tuple(_split_list(st)) if st else ()
    params = tuple(_param(e, text) for e in secs["parameters"])
    if not params:
        raise ConfigError("at least one parameter is required")
    known = {p.name for p in params}
    derived = []
    for e in secs.get("derived", []):
        node = parse_expression(e.value, e.offset, text)
        bad = expression_names(node) - known
        if bad:
            raise UnknownParameterName(f"unknown name '{sorted(bad)[0]}' in derived '{e.key}' (line {e.line})")
        derived.append((e.key, node))
        known.add(e.key)
    mats = []
    shapes = {"G": (n_x, n_x), "F": (n_x, n_x), "H": (n_x, n_x), "L": (n_x, n_z), "R": (n_z, n_z),
              "Sigma": (n_z, n_z)}
    for e in secs["matrices"]:
        if e.key not in MATRIX_KEYS:
            raise ConfigError(f"unknown matrix '{e.key}' (line {e.line})")
        rows = parse_matrix(e.value, e.offset, text)
        if (len(rows), len(rows[0])) != shapes[e.key]:
            raise DimensionMismatch(f"matrix {e.key} is {len(rows)}x{len(rows[0])}, expected "
                                    f"{shapes[e.key][0]}x{shapes[e.key][1]} (line {e.line})")
        for r in rows:
            for node in r:
                bad = expression_names(node) - known
                if bad:
                    raise UnknownParameterName(f"unknown name '{sorted(bad)[0]}' in {e.key} (line {e.line})")
        mats.append((e.key, rows))
    have = {k for k, _ in mats}
    for k in ("G", "F", "L", "Sigma"):
        if k not in have:
            raise ConfigError(f"matrix {k} is required")
    mats.sort(key=lambda kv: MATRIX_KEYS.index(kv[0]))
    obs = secs["observables"]
    names = tuple(_split_list(_get(obs, "names")))
    sel_e = _get(obs, "selector")
    sel = parse_matrix(sel_e.value, sel_e.offset, text)
    if (len(sel), len(sel[0])) != (len(names), n_x):
        raise DimensionMismatch("selector must be n_obs x n_x")
    signs = tuple(int(s) for s in _split_list(_get(obs, "signs")))
    if len(signs) != len(names):
        raise DimensionMismatch("one sign per observable is required")
    mc = _get(obs, "measurement_cov", required=False)
    mcov = parse_matrix(mc.value, mc.offset, text) if mc else None
    return ModelConfig(n_x=n_x, n_z=n_z, params=params, matrices=tuple(mats), obs_names=names,
                       selector=sel, signs=signs, state_names=states, derived=tuple(derived),
                       measurement_cov=mcov)


def parse_model_config(path) -> "object":
    """Read a model configuration file and return a :class:`~setid.model.ModelSpec`."""
    return parse_model_text(Path(path).read_text(encoding="utf-8")).to_spec()


def _fmt_matrix(rows) -> str:
    if len(rows) == 1 and len(rows[0]) == 1:
        return format_expression(rows[0][0])
    return "[" + "; ".join(", ".join(format_expression(e) for e in r) for r in rows) + "]"


def serialize_model(cfg: ModelConfig) -> str:
    """Canonical text for a :class:`ModelConfig`; ``parse`` of it returns ``cfg``."""
    out = ["[model]", f"n_x = {cfg.n_x}", f"n_z = {cfg.n_z}"]
    if cfg.state_names:
        out.append("states = " + ", ".join(cfg.state_names))
    out += ["", "[parameters]"]
    for p in cfg.params:
        line = f"{p.name} = {_fmt_num(p.value)} in [{_fmt_num(p.lower)}, {_fmt_num(p.upper)}]"
        out.append(line + (" friction" if p.friction else ""))
    if cfg.derived:
        out += ["", "[derived]"]
        out += [f"{k} = {format_expression(v)}" for k, v in cfg.derived]
    out += ["", "[matrices]"]
    out += [f"{k} = {_fmt_matrix(rows)}" for k, rows in cfg.matrices]
    out += ["", "[observables]", "names = " + ", ".join(cfg.obs_names),
            "selector = " + _fmt_matrix(cfg.selector), "signs = " + ", ".join(f"{s:+d}" if s else "0" for s in cfg.signs)]
    if cfg.measurement_cov is not None:
        out.append("measurement_cov = " + _fmt_matrix(cfg.measurement_cov))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class SimulateSettings:
    T: int = 500
    burn: int = 200
    regime_prob: float = 0.0
    wedges: tuple[tuple[str, object], ...] = ()


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run needs; paths are resolved against the config file."""

    path: Path
    text: str
    model: ModelConfig
    seed: int
    data_path: Path | None = None
    survey_path: Path | None = None
    survey_targets: tuple[int, ...] = (0,)
    lag_depth: int = 1
    include_constant: bool = True
    chains: int = 2
    steps: int = 2_000
    burn_in: int = 500
    retained: int | None = None
    blocks: tuple[tuple[int, ...], ...] | None = None
    cutoff: str | float = "2log_n"
    bootstrap_B: int = 999
    bootstrap_alpha: float = 0.05
    block_length: int | None = None
    recenter: str = "projection"
    theta_complete: tuple[float, ...] | None = None
    max_wedge_draws: int = 100
    simulate: SimulateSettings = field(default_factory=SimulateSettings)
    out_dir: Path | None = None

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    def with_seed(self, seed: int) -> "RunConfig":
        from dataclasses import replace

        return replace(self, seed=int(seed))


def _path(base: Path, e: Entry | None, must_exist: bool = True) -> Path | None:
    if e is None:
        return None
    p = Path(e.value)
    p = p if p.is_absolute() else base / p
    if must_exist and not p.exists():
        raise ConfigError(f"file not found: {p} (line {e.line})")
    return p


def parse_run_config(path, require_data: bool = True) -> RunConfig:
    """Parse a full run configuration.

    Parameters
    ----------
    path : path-like
    require_data : bool
        When False, missing data files are accepted (the ``simulate``
        command creates them).
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    model = parse_model_text(text)
    secs = read_sections(text)
    base = path.parent
    names = model.param_names
    run = secs.get("run", [])
    seed_e = _get(run, "seed", required=False)
    if seed_e is None:
        raise ConfigError("a seed is required in [run]")
    kw: dict = {"seed": _int(seed_e, text)}
    data = secs.get("data", [])
    kw["data_path"] = _path(base, _get(data, "path", required=False), require_data)
    kw["survey_path"] = _path(base, _get(data, "survey", required=False), require_data)
    tgt = _get(data, "survey_targets", required=False)
    if tgt is not None:
        kw["survey_targets"] = tuple(model.obs_names.index(s) if s in model.obs_names else int(s)
                                     for s in _split_list(tgt))
    inst = secs.get("instruments", [])
    if (e := _get(inst, "lag_depth", required=False)) is not None:
        kw["lag_depth"] = _int(e, text)
    if (e := _get(inst, "constant", required=False)) is not None:
        kw["include_constant"] = _bool(e)
    mc = secs.get("mcmc", [])
    for key in ("chains", "steps", "burn_in", "retained"):
        if (e := _get(mc, key, required=False)) is not None:
            kw[key] = _int(e, text)
    if (e := _get(mc, "blocks", required=False)) is not None:
        blocks = []
        for grp in e.value.split(";"):
            idx = []
            for nm in re.split(r"[,\s]+", grp.strip()):
                if not nm:
                    continue
                if nm not in names:
                    raise UnknownParameterName(f"unknown parameter '{nm}' in blocks (line {e.line})")
                idx.append(names.index(nm))
            if idx:
                blocks.append(tuple(idx))
        kw["blocks"] = tuple(blocks)
    cut = secs.get("cutoff", [])
    if (e := _get(cut, "nu", required=False)) is not None:
        kw["cutoff"] = e.value.strip() if e.value.strip() in ("log_n", "2log_n", "sqrt_n") else _num(e, text)
    bs = secs.get("bootstrap", [])
    if (e := _get(bs, "B", required=False)) is not None:
        kw["bootstrap_B"] = _int(e, text)
    if (e := _get(bs, "alpha", required=False)) is not None:
        kw["bootstrap_alpha"] = _num(e, text)
    if (e := _get(bs, "block_length", required=False)) is not None:
        kw["block_length"] = _int(e, text)
    if (e := _get(bs, "recenter", required=False)) is not None:
        if e.value not in ("projection", "point"):
            raise ConfigError("recenter must be 'projection' or 'point'")
        kw["recenter"] = e.value
    if (e := _get(bs, "theta_complete", required=False)) is not None:
        vals = tuple(float(evaluate(parse_expression(s), {})) for s in _split_list(e))
        if len(vals) != len(names):
            raise DimensionMismatch("theta_complete needs one value per parameter")
        kw["theta_complete"] = vals
    wd = secs.get("wedges", [])
    if (e := _get(wd, "max_draws", required=False)) is not None:
        kw["max_wedge_draws"] = _int(e, text)
    sim = secs.get("simulate", [])
    if sim:
        skw: dict = {}
        if (e := _get(sim, "T", required=False)) is not None:
            skw["T"] = _int(e, text)
        if (e := _get(sim, "burn", required=False)) is not None:
            skw["burn"] = _int(e, text)
        if (e := _get(sim, "regime_prob", required=False)) is not None:
            skw["regime_prob"] = _num(e, text)
        allowed = set(names) | {k for k, _ in model.derived} | {"regime"}
        allowed |= {f"{s}_lag" for s in (model.state_names or [f"x{i + 1}" for i in range(model.n_x)])}
        wedges = []
        for e in sim:
            if e.key.startswith("wedge."):
                node = parse_expression(e.value, e.offset, text)
                bad = expression_names(node) - allowed
                if bad:
                    raise UnknownParameterName(f"unknown name '{sorted(bad)[0]}' in {e.key} (line {e.line})")
                wedges.append((e.key[len("wedge."):], node))
        skw["wedges"] = tuple(wedges)
        kw["simulate"] = SimulateSettings(**skw)
    outp = secs.get("output", [])
    if (e := _get(outp, "dir", required=False)) is not None:
        kw["out_dir"] = _path(base, e, must_exist=False)
    cfg = RunConfig(path=path, text=text, model=model, **kw)
    if cfg.retained is not None and cfg.retained > cfg.steps:
        raise ConfigError("retained must not exceed steps")
    if cfg.burn_in < 0 or cfg.steps < 1:
        raise ConfigError("steps must be positive and burn_in nonnegative")
    return cfg


def _bool(e: Entry) -> bool:
    v = e.value.strip().lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ConfigError(f"'{e.key}' must be true or false")


__all__ = ["Num", "Var", "Neg", "BinOp", "parse_expression", "parse_matrix", "format_expression",
           "evaluate", "CompiledMatrices", "read_sections", "ParamDecl", "ModelConfig",
           "parse_model_text", "parse_model_config", "serialize_model", "RunConfig",
           "SimulateSettings", "parse_run_config"]
