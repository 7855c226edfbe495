"""Generic sparse MILP container and the semantic column index."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Hashable, NamedTuple

import numpy as np
import scipy.sparse as sp

CONTINUOUS = "continuous"
BINARY = "binary"
SENSES = ("<=", "=", ">=")


class ModelError(ValueError):
    """Structurally malformed model (bad index, non-finite coefficient, ...)."""


@dataclass
class Variable:
    name: str
    kind: str
    lb: float
    ub: float


@dataclass
class Constraint:
    name: str
    cols: list[int]
    coefs: list[float]
    sense: str
    rhs: float
    family: str = ""


@dataclass
class MilpModel:
    """Minimisation MILP with sparse rows. Columns are addressed by position."""

    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    objective_constant: float = 0.0
    name: str = "model"

    def add_variable(self, name: str, kind: str = CONTINUOUS, lb: float = 0.0, ub: float = math.inf,
                     cost: float = 0.0) -> int:
        self.variables.append(Variable(name, kind, float(lb), float(ub)))
        j = len(self.variables) - 1
        if cost:
            self.objective[j] = self.objective.get(j, 0.0) + float(cost)
        return j

    def add_constraint(self, terms, sense: str, rhs: float, name: str = "", family: str = "") -> int:
        cols, coefs = [], []
        merged: dict[int, float] = {}
        for j, a in terms:
            merged[j] = merged.get(j, 0.0) + float(a)
        for j, a in merged.items():
            if a != 0.0:
                cols.append(j)
                coefs.append(a)
        i = len(self.constraints)
        self.constraints.append(Constraint(name or f"r{i}", cols, coefs, sense, float(rhs), family))
        return i

    def add_cost(self, j: int, c: float) -> None:
        if c:
            self.objective[j] = self.objective.get(j, 0.0) + float(c)

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def binary_columns(self) -> list[int]:
        return [j for j, v in enumerate(self.variables) if v.kind == BINARY]

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for j, a in self.objective.items():
            c[j] = a
        return c

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return lb, ub

    def matrix(self) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for i, con in enumerate(self.constraints):
            rows.extend([i] * len(con.cols))
            cols.extend(con.cols)
            vals.extend(con.coefs)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_constraints, self.n_vars))

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Two-sided form ``lo <= A x <= hi``."""
        lo = np.full(self.n_constraints, -np.inf)
        hi = np.full(self.n_constraints, np.inf)
        for i, con in enumerate(self.constraints):
            if con.sense in ("<=", "="):
                hi[i] = con.rhs
            if con.sense in (">=", "="):
                lo[i] = con.rhs
        return lo, hi

    def objective_value(self, x) -> float:
        return self.objective_constant + sum(a * x[j] for j, a in self.objective.items())

    def check(self) -> None:
        """Raise :class:`ModelError` if the model is malformed."""
        n = self.n_vars
        for j, v in enumerate(self.variables):
            if v.kind not in (CONTINUOUS, BINARY):
                raise ModelError(f"variable {v.name}: unknown kind {v.kind!r}")
            if math.isnan(v.lb) or math.isnan(v.ub):
                raise ModelError(f"variable {v.name}: NaN bound")
            if v.kind == BINARY and not (0.0 <= v.lb and v.ub <= 1.0):
                raise ModelError(f"variable {v.name}: binary bounds must lie in [0, 1]")
        for con in self.constraints:
            if con.sense not in SENSES:
                raise ModelError(f"constraint {con.name}: unknown sense {con.sense!r}")
            if not math.isfinite(con.rhs):
                raise ModelError(f"constraint {con.name}: non-finite rhs")
            for j, a in zip(con.cols, con.coefs):
                if not 0 <= j < n:
                    raise ModelError(f"constraint {con.name}: column {j} out of range")
                if not math.isfinite(a):
                    raise ModelError(f"constraint {con.name}: non-finite coefficient")
        for j, a in self.objective.items():
            if not 0 <= j < n:
                raise ModelError(f"objective: column {j} out of range")
            if not math.isfinite(a):
                raise ModelError("objective: non-finite coefficient")

    def row_activity(self, x) -> np.ndarray:
        return self.matrix() @ np.asarray(x, dtype=float)

    def max_violation(self, x) -> float:
        """Largest absolute row or bound violation at ``x``."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.n_constraints:
            act = self.row_activity(x)
            lo, hi = self.row_bounds()
            worst = max(worst, float(np.max(np.maximum(lo - act, 0.0))), float(np.max(np.maximum(act - hi, 0.0))))
        if self.n_vars:
            lb, ub = self.bounds()
            worst = max(worst, float(np.max(np.maximum(lb - x, 0.0))), float(np.max(np.maximum(x - ub, 0.0))))
        return worst


class ModelStats(NamedTuple):
    n_vars: int
    n_binaries: int
    n_constraints: int
    n_nonzeros: int


def model_stats(model: MilpModel) -> ModelStats:
    return ModelStats(
        model.n_vars,
        len(model.binary_columns()),
        model.n_constraints,
        sum(len(c.cols) for c in model.constraints),
    )


_SAFE = re.compile(r"[^A-Za-z0-9_]")


def column_name(key: tuple) -> str:
    """LP-format-safe name for a semantic key, e.g. ``("P", "g1", 0, 2, 1)`` -> ``P_g1_0_2_1``."""
    parts = [_SAFE.sub("_", str(p)) for p in key]
    return "_".join(parts)


class VariableIndex:
    """Bijection between semantic keys and column positions."""

    def __init__(self):
        self._by_key: dict[Hashable, int] = {}
        self._keys: list[Hashable] = []

    def add(self, key: Hashable, col: int) -> None:
        if key in self._by_key:
            raise ModelError(f"duplicate key {key!r}")
        if col != len(self._keys):
            raise ModelError("columns must be registered in order")
        self._by_key[key] = col
        self._keys.append(key)

    def __getitem__(self, key) -> int:
        return self._by_key[key]

    def get(self, key, default=None):
        return self._by_key.get(key, default)

    def __contains__(self, key) -> bool:
        return key in self._by_key

    def key(self, col: int):
        return self._keys[col]

    def __len__(self) -> int:
        return len(self._keys)

    def keys(self) -> list:
        return list(self._keys)

    def family(self, name: str) -> list[tuple]:
        return [k for k in self._keys if k[0] == name]
