"""Monte Carlo scenarios for renewable/load forecast error and islanding, plus reduction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import MicrogridSpec, TimeGrid


class InvalidConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    n_scenarios: int = 10
    renewable_band: float = 0.1
    load_band: float = 0.1
    islanding_prob_per_hour: float = 0.0
    max_island_hours: int = 1
    seed: int = 0

    def check(self) -> None:
        if self.n_scenarios < 1:
            raise InvalidConfigError("n_scenarios must be >= 1")
        if self.renewable_band < 0 or self.load_band < 0:
            raise InvalidConfigError("error bands must be >= 0")
        if not 0 <= self.islanding_prob_per_hour <= 1:
            raise InvalidConfigError("islanding_prob_per_hour must lie in [0, 1]")
        if self.max_island_hours < 1 and self.islanding_prob_per_hour > 0:
            raise InvalidConfigError("max_island_hours must be >= 1")


@dataclass(frozen=True, eq=False)
class Scenario:
    """One realisation of the uncertain inputs.

    ``renewables`` has shape (n_renewables, n_steps), ``loads`` (n_fixed_loads, n_steps),
    ``grid_connected`` (n_steps,) with 1 = connected and 0 = islanded.
    """

    id: str
    probability: float
    renewables: np.ndarray
    loads: np.ndarray
    grid_connected: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.id == other.id
            and self.probability == other.probability
            and np.array_equal(self.renewables, other.renewables)
            and np.array_equal(self.loads, other.loads)
            and np.array_equal(self.grid_connected, other.grid_connected)
        )

    __hash__ = None

    def with_probability(self, p: float) -> "Scenario":
        return Scenario(self.id, p, self.renewables, self.loads, self.grid_connected)

    def feature_vector(self, islanding_scale: float = 1.0) -> np.ndarray:
        return np.concatenate(
            [self.renewables.ravel(), self.loads.ravel(), islanding_scale * self.grid_connected.astype(float)]
        )

    @property
    def has_islanding(self) -> bool:
        return bool(np.any(self.grid_connected == 0))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "probability": self.probability,
            "renewables": self.renewables.tolist(),
            "loads": self.loads.tolist(),
            "grid_connected": self.grid_connected.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, n_steps: int | None = None) -> "Scenario":
        ren = np.asarray(d["renewables"], dtype=float)
        loads = np.asarray(d["loads"], dtype=float)
        steps = n_steps if n_steps is not None else len(d["grid_connected"])
        return cls(
            id=str(d["id"]),
            probability=float(d["probability"]),
            renewables=ren.reshape(-1, steps) if ren.size else np.zeros((0, steps)),
            loads=loads.reshape(-1, steps) if loads.size else np.zeros((0, steps)),
            grid_connected=np.asarray(d["grid_connected"], dtype=int),
        )


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: list[Scenario] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    def __getitem__(self, i):
        return self.scenarios[i]

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([s.probability for s in self.scenarios])

    def check(self, tol: float = 1e-9) -> list[str]:
        problems = []
        ids = [s.id for s in self.scenarios]
        if len(set(ids)) != len(ids):
            problems.append("scenario ids not unique")
        if self.scenarios and abs(self.probabilities.sum() - 1.0) > tol:
            problems.append(f"probabilities sum to {self.probabilities.sum()!r}")
        for s in self.scenarios:
            if not 0 <= s.probability <= 1:
                problems.append(f"{s.id}: probability outside [0, 1]")
            if np.any(s.renewables < 0) or np.any(s.loads < 0):
                problems.append(f"{s.id}: negative power")
        return problems

    def to_dict(self) -> dict:
        return {"scenarios": [s.to_dict() for s in self.scenarios]}

    @classmethod
    def from_dict(cls, d: dict, n_steps: int | None = None) -> "ScenarioSet":
        return cls([Scenario.from_dict(s, n_steps) for s in d["scenarios"]])


def forecast_scenario(spec: MicrogridSpec, probability: float = 1.0, scenario_id: str = "s0",
                      grid_connected: np.ndarray | None = None) -> Scenario:
    """Scenario equal to the forecast, optionally with a given islanding pattern."""
    n = spec.time_grid.n_steps
    ren = np.array([r.forecast for r in spec.nondispatchable_units], dtype=float).reshape(-1, n)
    loads = np.array([fl.forecast for fl in spec.fixed_loads], dtype=float).reshape(-1, n)
    u = np.ones(n, dtype=int) if grid_connected is None else np.asarray(grid_connected, dtype=int)
    return Scenario(scenario_id, probability, ren, loads, u)


def islanding_pattern(grid: TimeGrid, rng: np.random.Generator, prob: float, max_hours: int) -> np.ndarray:
    """Hourly outage blocks expanded to sub-period resolution."""
    hourly = np.ones(grid.n_hours, dtype=int)
    for t in range(grid.n_hours):
        if rng.random() < prob:
            duration = int(rng.integers(1, max_hours + 1))
            hourly[t : t + duration] = 0
    return np.repeat(hourly, grid.subperiods_per_hour)


def generate_scenarios(spec: MicrogridSpec, cfg: ScenarioConfig) -> ScenarioSet:
    """Uniform multiplicative forecast errors, independent per point, with hourly islanding blocks.

    Each scenario draws from its own child of ``SeedSequence(cfg.seed)`` so the result does not
    depend on the order in which scenarios are produced.
    """
    cfg.check()
    base = forecast_scenario(spec)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_scenarios)
    p = 1.0 / cfg.n_scenarios
    scenarios = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        e_ren = rng.uniform(-cfg.renewable_band, cfg.renewable_band, size=base.renewables.shape)
        e_load = rng.uniform(-cfg.load_band, cfg.load_band, size=base.loads.shape)
        ren = np.maximum(base.renewables * (1.0 + e_ren), 0.0)
        loads = np.maximum(base.loads * (1.0 + e_load), 0.0)
        u = islanding_pattern(spec.time_grid, rng, cfg.islanding_prob_per_hour, cfg.max_island_hours)
        scenarios.append(Scenario(f"s{i}", p, ren, loads, u))
    return ScenarioSet(scenarios)


def _distance_matrix(set_: ScenarioSet, islanding_scale: float) -> np.ndarray:
    x = np.stack([s.feature_vector(islanding_scale) for s in set_.scenarios])
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(np.maximum(d2, 0.0))


def reduce_scenarios(set_: ScenarioSet, k: int, islanding_scale: float = 1.0) -> ScenarioSet:
    """Fast-forward selection of ``k`` scenarios under the Euclidean transport distance.

    The islanding indicator enters the distance multiplied by ``islanding_scale``
    (the pipeline passes the line limit). Discarded probability goes to the nearest
    kept scenario; ties resolve to the lowest index. Output keeps input order.
    """
    n = len(set_)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if k == n:
        return ScenarioSet(list(set_.scenarios))

    dist = _distance_matrix(set_, islanding_scale)
    prob = set_.probabilities
    current = dist.copy()
    remaining = list(range(n))
    selected: list[int] = []
    for _ in range(k):
        best, best_z = -1, np.inf
        for u in remaining:
            others = [i for i in remaining if i != u]
            z = float(np.dot(prob[others], current[others, u]))
            if z < best_z:
                best, best_z = u, z
        selected.append(best)
        remaining.remove(best)
        current = np.minimum(current, current[:, [best]])

    selected.sort()
    new_prob = {j: prob[j] for j in selected}
    for i in remaining:
        nearest = min(selected, key=lambda j: (dist[i, j], j))
        new_prob[nearest] += prob[i]
    return ScenarioSet([set_.scenarios[j].with_probability(float(new_prob[j])) for j in selected])
