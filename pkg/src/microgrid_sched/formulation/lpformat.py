"""CPLEX LP-format export/import and the plain-text solution file used by solver plugins.

Solution files look like::

    status: optimal
    objective: 123.5
    P_g1_0_0_0 40
    ...
"""

from __future__ import annotations

import math
import re
from pathlib import Path
from typing import NamedTuple

from .model import BINARY, CONTINUOUS, MilpModel

_MAX_LINE = 200


def _num(x: float) -> str:
    if x == 0:
        return "0"
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _expression(pairs) -> list[str]:
    """Render ``(coef, name)`` pairs as wrapped lines of ``+ 3 x - 2 y`` tokens."""
    lines, cur = [], ""
    for coef, name in pairs:
        sign = "-" if coef < 0 else "+"
        tok = f" {sign} {_num(abs(coef))} {name}"
        if len(cur) + len(tok) > _MAX_LINE:
            lines.append(cur)
            cur = ""
        cur += tok
    if cur:
        lines.append(cur)
    return lines


def lp_text(model: MilpModel) -> str:
    names = [v.name for v in model.variables]
    if len(set(names)) != len(names):
        raise ValueError("column names must be unique for LP export")
    out = [f"\\ {model.name}", "Minimize"]
    obj = [(a, names[j]) for j, a in sorted(model.objective.items()) if a != 0]
    if obj:
        lines = _expression(obj)
        out.append(" obj:" + lines[0])
        out.extend(lines[1:])
    else:
        out.append(" obj:")
    out.append("Subject To")
    for con in model.constraints:
        sense = {"<=": "<=", ">=": ">=", "=": "="}[con.sense]
        pairs = [(a, names[j]) for j, a in zip(con.cols, con.coefs)]
        if not pairs:
            continue
        lines = _expression(pairs)
        lines[-1] += f" {sense} {_num(con.rhs)}"
        out.append(f" {con.name}:" + lines[0])
        out.extend(lines[1:])
    out.append("Bounds")
    for v in model.variables:
        if v.lb == v.ub:
            out.append(f" {v.name} = {_num(v.lb)}")
        elif math.isinf(v.lb) and v.lb < 0 and math.isinf(v.ub):
            out.append(f" {v.name} free")
        else:
            out.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    binaries = [v.name for v in model.variables if v.kind == BINARY]
    if binaries:
        out.append("Binaries")
        for i in range(0, len(binaries), 8):
            out.append(" " + " ".join(binaries[i : i + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


def write_lp(model: MilpModel, path) -> Path:
    path = Path(path)
    path.write_text(lp_text(model))
    return path


_SECTION = re.compile(
    r"^(minimize|minimum|min|maximize|maximum|max|subject to|such that|st|s\.t\.|bounds|bound|"
    r"binaries|binary|bin|generals|general|gen|end)$",
    re.IGNORECASE,
)


def _parse_linear(text: str) -> dict[str, float]:
    terms: dict[str, float] = {}
    pos = 0
    text = text.strip()
    tok = re.compile(r"\s*([+-]?)\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*([A-Za-z_][A-Za-z0-9_]*)")
    while pos < len(text):
        m = tok.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise ValueError(f"cannot parse expression near {text[pos:pos + 30]!r}")
            break
        sign = -1.0 if m.group(1) == "-" else 1.0
        coef = float(m.group(2)) if m.group(2) else 1.0
        terms[m.group(3)] = terms.get(m.group(3), 0.0) + sign * coef
        pos = m.end()
    return terms


def _parse_value(s: str) -> float:
    s = s.strip().lower()
    if s in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    if s in ("-inf", "-infinity"):
        return -math.inf
    return float(s)


def read_lp(path_or_text) -> MilpModel:
    """Parse the LP subset produced by :func:`write_lp` (minimisation only)."""
    text = Path(path_or_text).read_text() if isinstance(path_or_text, Path) else str(path_or_text)
    sections: dict[str, list[str]] = {"obj": [], "st": [], "bounds": [], "bin": []}
    current = None
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            word = m.group(1).lower()
            if word.startswith("max"):
                raise ValueError("only minimisation models are supported")
            current = {"min": "obj", "minimize": "obj", "minimum": "obj", "subject to": "st", "such that": "st",
                       "st": "st", "s.t.": "st", "bounds": "bounds", "bound": "bounds", "binaries": "bin",
                       "binary": "bin", "bin": "bin", "end": None}.get(word, "unsupported")
            if current == "unsupported":
                raise ValueError(f"unsupported section {line!r}")
            continue
        if current is None:
            continue
        sections[current].append(line)

    model = MilpModel(name="lp")
    cols: dict[str, int] = {}

    def col(name: str) -> int:
        if name not in cols:
            cols[name] = model.add_variable(name, CONTINUOUS, 0.0, math.inf)
        return cols[name]

    # bounds first so columns keep the writer's order
    for line in sections["bounds"]:
        parts = line.split()
        if len(parts) == 2 and parts[1].lower() == "free":
            v = model.variables[col(parts[0])]
            v.lb, v.ub = -math.inf, math.inf
        elif len(parts) == 3 and parts[1] == "=":
            v = model.variables[col(parts[0])]
            v.lb = v.ub = _parse_value(parts[2])
        elif len(parts) == 5 and parts[1] == "<=" and parts[3] == "<=":
            v = model.variables[col(parts[2])]
            v.lb, v.ub = _parse_value(parts[0]), _parse_value(parts[4])
        elif len(parts) == 3 and parts[1] in ("<=", ">="):
            v = model.variables[col(parts[0])]
            if parts[1] == "<=":
                v.ub = _parse_value(parts[2])
            else:
                v.lb = _parse_value(parts[2])
        else:
            raise ValueError(f"unsupported bound line {line!r}")
    obj_text = " ".join(sections["obj"])
    if ":" in obj_text:
        obj_text = obj_text.split(":", 1)[1]
    for name, a in _parse_linear(obj_text).items():
        model.add_cost(col(name), a)

    # constraints may span several lines; a row ends at its sense and rhs
    buf = ""
    row_re = re.compile(r"^\s*(?:([A-Za-z_][A-Za-z0-9_]*)\s*:)?(.*?)(<=|>=|=<|=>|=|<|>)\s*(\S+)\s*$")
    for line in sections["st"]:
        buf += " " + line
        if re.search(r"(<=|>=|=<|=>|=|<|>)\s*\S+\s*$", buf):
            m = row_re.match(buf)
            if not m:
                raise ValueError(f"cannot parse constraint {buf!r}")
            name, expr, sense, rhs = m.groups()
            sense = {"=<": "<=", "<": "<=", "=>": ">=", ">": ">="}.get(sense, sense)
            terms = [(col(n), a) for n, a in _parse_linear(expr).items()]
            model.add_constraint(terms, sense, float(rhs), name=name or "")
            buf = ""
    if buf.strip():
        raise ValueError(f"dangling constraint text {buf!r}")

    for line in sections["bin"]:
        for name in line.split():
            v = model.variables[col(name)]
            v.kind = BINARY
            if v.lb == 0.0 and math.isinf(v.ub):
                v.ub = 1.0
    return model


class SolutionFile(NamedTuple):
    status: str
    objective: float | None
    values: dict[str, float]
    bound: float | None = None


def write_solution(path, status: str, objective: float | None, values: dict[str, float],
                   bound: float | None = None) -> Path:
    path = Path(path)
    lines = [f"status: {status}", f"objective: {_num(objective) if objective is not None else 'none'}"]
    if bound is not None:
        lines.append(f"bound: {_num(bound)}")
    lines += [f"{name} {_num(val)}" for name, val in values.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_lp_solution(path) -> SolutionFile:
    status, objective, bound, values = None, None, None, {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("status:"):
            status = line.split(":", 1)[1].strip()
        elif line.startswith("objective:") or line.startswith("bound:"):
            key, raw = line.split(":", 1)
            raw = raw.strip()
            value = None if raw == "none" else _parse_value(raw)
            if key == "objective":
                objective = value
            else:
                bound = value
        else:
            name, val = line.rsplit(None, 1)
            values[name] = float(val)
    if status is None:
        raise ValueError(f"{path}: missing status line")
    return SolutionFile(status, objective, values, bound)
