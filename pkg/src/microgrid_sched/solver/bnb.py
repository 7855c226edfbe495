"""Best-bound branch-and-bound over binary columns."""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..formulation.model import MilpModel
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, LpData, solve_lp_data

log = logging.getLogger(__name__)

MILP_OPTIMAL = "optimal"
MILP_INFEASIBLE = "infeasible"
GAP_LIMIT = "gap_limit"
NODE_LIMIT = "node_limit"
MILP_TIME_LIMIT = "time_limit"
MILP_UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class SolverConfig:
    gap_tol: float = 1e-6
    integrality_tol: float = 1e-6
    node_limit: int | None = None
    time_limit: float | None = None
    branching: str = "most_fractional"
    node_order: str = "best_bound"

    def __post_init__(self):
        if not (self.gap_tol > 0 and self.integrality_tol > 0):
            raise ValueError("tolerances must be > 0")
        if self.branching != "most_fractional":
            raise ValueError(f"unsupported branching rule {self.branching!r}")
        if self.node_order != "best_bound":
            raise ValueError(f"unsupported node order {self.node_order!r}")


@dataclass
class MilpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    bound: float = -math.inf
    nodes: int = 0
    lp_iterations: int = 0
    wall_time: float = 0.0
    solver: str = "embedded"

    @property
    def gap(self) -> float:
        if self.objective is None or not math.isfinite(self.bound):
            return math.inf
        return max(0.0, self.objective - self.bound) / max(1.0, abs(self.objective))

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None


def _gap(obj: float, bound: float) -> float:
    return max(0.0, obj - bound) / max(1.0, abs(obj))


def most_fractional(x: np.ndarray, binaries: np.ndarray, tol: float) -> int | None:
    """Binary column with the largest distance to integrality; ties go to the lowest index."""
    vals = x[binaries]
    frac = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
    best = -1
    best_frac = tol
    for j, f in zip(binaries, frac):
        if f > best_frac:
            best, best_frac = int(j), f
    return None if best < 0 else best


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    x: np.ndarray = field(compare=False)
    depth: int = field(compare=False, default=0)


def solve_milp(model: MilpModel, cfg: SolverConfig | None = None) -> MilpSolution:
    """Exact MILP solve by branch-and-bound on the embedded simplex.

    Nodes are evaluated when created; the open node with the smallest LP bound is
    expanded next (FIFO among equal bounds). Deterministic for a given model and config.
    """
    cfg = cfg or SolverConfig()
    model.check()
    start = time.monotonic()
    deadline = start + cfg.time_limit if cfg.time_limit is not None else None
    data = LpData.from_model(model)
    binaries = np.array(model.binary_columns(), dtype=int)
    # round binary bounds inward
    if binaries.size:
        data.lb[binaries] = np.ceil(data.lb[binaries] - cfg.integrality_tol)
        data.ub[binaries] = np.floor(data.ub[binaries] + cfg.integrality_tol)

    seq = itertools.count()
    nodes = 0
    lp_iters = 0
    incumbent_x: np.ndarray | None = None
    incumbent = math.inf
    heap: list[_Node] = []

    def finish(status: str, bound: float) -> MilpSolution:
        if incumbent_x is not None:
            bound = min(bound, incumbent)
        return MilpSolution(status, incumbent_x, None if incumbent_x is None else incumbent, bound, nodes,
                            lp_iters, time.monotonic() - start)

    def evaluate(lb, ub, depth):
        """Solve a node LP; returns a node to push, or None. Updates the incumbent."""
        nonlocal nodes, lp_iters, incumbent, incumbent_x
        sol = solve_lp_data(LpData(data.A, data.lo, data.hi, data.c, lb, ub, data.constant), deadline=deadline)
        nodes += 1
        lp_iters += sol.iterations
        if sol.status in (INFEASIBLE,):
            return None
        if sol.status == UNBOUNDED:
            raise _Unbounded
        if sol.status != OPTIMAL:
            raise _OutOfTime
        if sol.objective >= incumbent - 1e-12 * max(1.0, abs(incumbent)):
            return None
        j = most_fractional(sol.x, binaries, cfg.integrality_tol) if binaries.size else None
        if j is None:
            x = sol.x.copy()
            if binaries.size:
                x[binaries] = np.round(x[binaries])
            incumbent = float(model.objective_value(x))
            incumbent_x = x
            log.debug("incumbent %.10g at node %d", incumbent, nodes)
            return None
        return _Node(sol.objective, next(seq), lb, ub, sol.x, depth)

    try:
        root = evaluate(data.lb.copy(), data.ub.copy(), 0)
    except _Unbounded:
        return finish(MILP_UNBOUNDED, -math.inf)
    except _OutOfTime:
        return finish(MILP_TIME_LIMIT, -math.inf)
    if root is not None:
        heapq.heappush(heap, root)

    while heap:
        best_bound = heap[0].bound
        if incumbent_x is not None and _gap(incumbent, best_bound) <= cfg.gap_tol:
            return finish(MILP_OPTIMAL, best_bound)
        if cfg.node_limit is not None and nodes >= cfg.node_limit:
            return finish(NODE_LIMIT, best_bound)
        if deadline is not None and time.monotonic() > deadline:
            return finish(MILP_TIME_LIMIT, best_bound)
        node = heapq.heappop(heap)
        if node.bound >= incumbent - 1e-12 * max(1.0, abs(incumbent)):
            continue
        j = most_fractional(node.x, binaries, cfg.integrality_tol)
        for value in (0.0, 1.0):
            lb, ub = node.lb.copy(), node.ub.copy()
            lb[j] = ub[j] = value
            try:
                child = evaluate(lb, ub, node.depth + 1)
            except _OutOfTime:
                heapq.heappush(heap, node)
                return finish(MILP_TIME_LIMIT, heap[0].bound)
            except _Unbounded:
                return finish(MILP_UNBOUNDED, -math.inf)
            if child is not None:
                heapq.heappush(heap, child)

    if incumbent_x is None:
        return finish(MILP_INFEASIBLE, math.inf)
    return finish(MILP_OPTIMAL, incumbent)


class _Unbounded(Exception):
    pass


class _OutOfTime(Exception):
    pass


__all__ = ["MilpSolution", "SolverConfig", "solve_milp", "most_fractional"]
