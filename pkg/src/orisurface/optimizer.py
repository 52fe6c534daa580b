"""Black-box search over the eight manipulation parameters against simulated
episode cost.

Two strategies ship behind one interface: uniform random sampling and a
(mu + lambda) evolution strategy: population 16, truncation selection of the
top 4 evaluated points, log-rank weighted intermediate recombination of the
parents, Gaussian mutation with per-dimension step 0.15 x interval width
annealed by 0.95 each generation, reflection at the box bounds. Both are
seeded and replay exactly. Parameter sets whose commands fail the kinematic
feasibility screen cost a flat +10 penalty without running the simulator, as
do aborted episodes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cpg import CpgParams, PARAM_BOUNDS, command_extremes_feasible
from .dynamics import (ContactParams, EnergyBlowupError, InvalidPlacementError,
                       ObjectLostError, ObjectSpec, SimConfig, simulate_episode)
from .kinematics import CanfieldGeometry
from .metrics import CostWeights, compute_metrics, cost
from .surface import ManipulationMode, ModuleGrid, build_plan, parse_mode

PENALTY_COST = 10.0

PARAM_NAMES = tuple(PARAM_BOUNDS)  # canonical ordering of the 8 dimensions

POPULATION = 16
PARENTS = 4
MUTATION_STEP = 0.15
MUTATION_ANNEAL = 0.95
# log-rank recombination weights over the sorted parents
_PARENT_WEIGHTS = np.log(PARENTS + 0.5) - np.log(np.arange(1, PARENTS + 1))
_PARENT_WEIGHTS /= _PARENT_WEIGHTS.sum()


@dataclass(frozen=True)
class SearchSpace:
    """Closed per-parameter intervals; fixed parameters have zero width."""

    bounds: tuple  # tuple of (low, high) in PARAM_NAMES order

    def __post_init__(self):
        if len(self.bounds) != len(PARAM_NAMES):
            raise ValueError("bounds must cover all parameters")
        for name, (lo, hi) in zip(PARAM_NAMES, self.bounds):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ValueError(f"bad interval for {name}: [{lo}, {hi}]")

    @staticmethod
    def default():
        return SearchSpace(bounds=tuple(PARAM_BOUNDS[n] for n in PARAM_NAMES))

    def with_overrides(self, **intervals):
        """Replace intervals by name; a scalar fixes the parameter."""
        table = dict(zip(PARAM_NAMES, self.bounds))
        for name, iv in intervals.items():
            if name not in table:
                raise KeyError(f"unknown parameter {name}")
            table[name] = (iv, iv) if np.isscalar(iv) else (iv[0], iv[1])
        return SearchSpace(bounds=tuple(table[n] for n in PARAM_NAMES))

    @property
    def lows(self):
        return np.array([b[0] for b in self.bounds])

    @property
    def highs(self):
        return np.array([b[1] for b in self.bounds])

    def sample(self, rng, n=1):
        return rng.uniform(self.lows, self.highs, size=(n, len(PARAM_NAMES)))

    def reflect(self, x):
        """Fold out-of-box coordinates back inside by reflection at the
        bounds; zero-width dimensions pin to their fixed value."""
        lo, hi = self.lows, self.highs
        width = hi - lo
        y = np.array(x, float, copy=True)
        free = width > 0.0
        period = 2.0 * width[free]
        z = np.mod(y[..., free] - lo[free], period)
        z = np.where(z > width[free], period - z, z)
        y[..., free] = lo[free] + z
        y[..., ~free] = lo[~free]
        return y

    def contains(self, x):
        return bool(np.all(x >= self.lows - 1e-12) and np.all(x <= self.highs + 1e-12))

    def to_params(self, x) -> CpgParams:
        return CpgParams(**dict(zip(PARAM_NAMES, (float(v) for v in x))))


def mode_presets(mode: ManipulationMode):
    """Cost weights and search-space overrides for a manipulation mode.

    fast: maximize speed, phi pinned to pi to maximize contact time.
    smooth: trade speed against yaw, tilt and vertical motion; phi free.
    rotation: reward yaw, penalize translation; phi pinned to pi.
    The sigma half-range encodes the push direction along the axis.
    """
    if mode.kind == "rotate":
        weights = CostWeights(alpha=1.0, beta=-1.0, gamma=0.0, varsigma=0.0)
        space = SearchSpace.default().with_overrides(phi=math.pi, sigma=(0.0, math.pi))
        return weights, space
    sigma_iv = (0.0, math.pi) if mode.sign > 0 else (math.pi, 2.0 * math.pi)
    if mode.profile == "fast":
        weights = CostWeights(alpha=-1.0, beta=0.0, gamma=0.0, varsigma=0.0)
        space = SearchSpace.default().with_overrides(phi=math.pi, sigma=sigma_iv)
    else:
        weights = CostWeights(alpha=-0.2, beta=0.3, gamma=0.3, varsigma=0.3)
        space = SearchSpace.default().with_overrides(sigma=sigma_iv)
    return weights, space


def evaluate(params: CpgParams, mode: ManipulationMode, obj_spec: ObjectSpec,
             cfg: SimConfig, grid: ModuleGrid = ModuleGrid(),
             geom: CanfieldGeometry = CanfieldGeometry(),
             contact: ContactParams = ContactParams(), weights: CostWeights = None):
    """Episode objective: simulate, measure, weigh. Returns (metrics, J);
    infeasible parameter sets and aborted episodes return (None, +10)."""
    if weights is None:
        weights, _ = mode_presets(mode)
    plan = build_plan(grid, mode)
    live = ~plan.rest
    combos = sorted({(float(d), int(s))
                     for d, s in zip(plan.delta_cmd[live], plan.sign[live])})
    deltas = sorted({d for d, _ in combos})
    signs = sorted({s for _, s in combos})
    if not command_extremes_feasible(params, geom, delta_cmds=deltas, signs=signs):
        return None, PENALTY_COST
    try:
        log = simulate_episode(cfg, mode, params, obj_spec, grid=grid, geom=geom,
                               contact=contact)
    except (EnergyBlowupError, InvalidPlacementError, ObjectLostError):
        return None, PENALTY_COST
    m = compute_metrics(log)
    return m, cost(m, weights)


def _episode_objective(x, mode=None, obj_spec=None, cfg=None, grid=None,
                       geom=None, contact=None, weights=None, space=None):
    params = space.to_params(x)
    return evaluate(params, mode, obj_spec, cfg, grid=grid, geom=geom,
                    contact=contact, weights=weights)


@dataclass
class Campaign:
    """Full record of one optimization run."""

    mode: str
    obj: dict
    budget: int
    seed: int
    kind: str
    history: list = field(default_factory=list)  # {"params", "metrics", "J"}
    best_index: int = -1

    def record(self, params: CpgParams, metrics, j):
        self.history.append({
            "params": params.as_dict(),
            "metrics": metrics.as_dict() if metrics is not None else None,
            "J": float(j),
        })
        if self.best_index < 0 or j < self.history[self.best_index]["J"]:
            self.best_index = len(self.history) - 1

    @property
    def best(self):
        return self.history[self.best_index]

    @property
    def best_J(self):
        return self.best["J"]

    def best_params(self) -> CpgParams:
        return CpgParams(**self.best["params"])

    def best_so_far(self):
        js = np.array([h["J"] for h in self.history])
        return np.minimum.accumulate(js)

    def to_json(self, path=None):
        doc = {"mode": self.mode, "object": self.obj, "budget": self.budget,
               "seed": self.seed, "optimizer": self.kind,
               "best_index": self.best_index, "history": self.history}
        text = json.dumps(doc, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @staticmethod
    def from_json(path):
        with open(path) as fh:
            doc = json.load(fh)
        c = Campaign(mode=doc["mode"], obj=doc["object"], budget=doc["budget"],
                     seed=doc["seed"], kind=doc["optimizer"],
                     history=doc["history"], best_index=doc["best_index"])
        return c


def _evaluate_batch(xs, objective, jobs):
    if jobs <= 1 or len(xs) <= 1:
        return [objective(x) for x in xs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(objective, x) for x in xs]
        return [f.result() for f in futures]


def _feasibility_screen(mode, grid, geom):
    """Cheap per-candidate kinematic screen for one mode's command set."""
    plan = build_plan(grid, mode)
    live = ~plan.rest
    combos = sorted({(float(d), int(s))
                     for d, s in zip(plan.delta_cmd[live], plan.sign[live])})
    deltas = tuple(sorted({d for d, _ in combos}))
    signs = tuple(sorted({s for _, s in combos}))

    def screen(x, space):
        try:
            params = space.to_params(x)
        except ValueError:
            return False
        return command_extremes_feasible(params, geom, delta_cmds=deltas,
                                         signs=signs)
    return screen


SCREEN_RETRIES = 25


def optimize(space: SearchSpace, mode, obj_spec: ObjectSpec = None, budget=200,
             seed=0, kind="evolutionary", cfg: SimConfig = None,
             grid: ModuleGrid = ModuleGrid(), geom: CanfieldGeometry = CanfieldGeometry(),
             contact: ContactParams = ContactParams(), weights: CostWeights = None,
             objective=None, jobs=1) -> Campaign:
    """Run one seeded campaign and return its full history.

    mode may be a ManipulationMode or a mode string. objective overrides the
    simulation objective (for synthetic tests): a callable x -> J or
    x -> (metrics, J) on parameter vectors in PARAM_NAMES order.

    The evolution strategy pre-rejects candidates that fail the kinematic
    feasibility screen (redrawing up to SCREEN_RETRIES times) so that the
    evaluation budget concentrates on simulatable parameter sets; random
    search stays uniform i.i.d. and records such samples as penalties.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if kind not in ("random", "evolutionary"):
        raise ValueError("optimizer kind must be 'random' or 'evolutionary'")
    if isinstance(mode, str):
        mode = parse_mode(mode)
    if weights is None and mode is not None:
        weights, _ = mode_presets(mode)

    screen = None
    if objective is None:
        if obj_spec is None:
            raise ValueError("either an object spec or an objective is required")
        from functools import partial
        from dataclasses import replace as _replace
        cfg = cfg or SimConfig()
        sim_cfg = cfg if cfg.seed == seed else _replace(cfg, seed=seed)
        objective = partial(_episode_objective, mode=mode, obj_spec=obj_spec,
                            cfg=sim_cfg, grid=grid, geom=geom, contact=contact,
                            weights=weights, space=space)
        screen = _feasibility_screen(mode, grid, geom)

    rng = np.random.default_rng(seed)
    campaign = Campaign(mode=mode.label if mode is not None else "objective",
                        obj=obj_spec.as_dict() if obj_spec is not None else {},
                        budget=budget, seed=seed, kind=kind)

    def record_batch(xs):
        for x, out in zip(xs, _evaluate_batch(list(xs), objective, jobs)):
            metrics, j = out if isinstance(out, tuple) else (None, float(out))
            campaign.record(space.to_params(x), metrics, j)
            yield float(j), x

    def sample_screened(n):
        xs = space.sample(rng, n)
        if screen is None:
            return xs
        for i in range(n):
            for _ in range(SCREEN_RETRIES):
                if screen(xs[i], space):
                    break
                xs[i] = space.sample(rng, 1)[0]
        return xs

    if kind == "random":
        list(record_batch(space.sample(rng, budget)))
        return campaign

    width = space.highs - space.lows
    step = MUTATION_STEP
    evaluated = []  # (J, x), plus-selection pool

    remaining = budget
    generation_x = sample_screened(min(POPULATION, remaining))
    while remaining > 0:
        evaluated.extend(record_batch(generation_x))
        remaining -= len(generation_x)
        if remaining <= 0:
            break
        evaluated.sort(key=lambda t: t[0])
        n_children = min(POPULATION, remaining)
        if evaluated[0][0] >= PENALTY_COST:
            # nothing feasible found yet: penalty points carry no gradient,
            # so keep sampling the box instead of recombining them
            generation_x = sample_screened(n_children)
            continue
        parents = np.array([x for _, x in evaluated[:PARENTS]])
        center = np.average(parents, axis=0, weights=_PARENT_WEIGHTS[:len(parents)])
        step *= MUTATION_ANNEAL
        children = np.empty((n_children, len(PARAM_NAMES)))
        for i in range(n_children):
            child = space.reflect(center + rng.normal(0.0, 1.0, len(PARAM_NAMES))
                                  * (step * width))
            if screen is not None:
                for _ in range(SCREEN_RETRIES):
                    if screen(child, space):
                        break
                    child = space.reflect(center + rng.normal(0.0, 1.0, len(PARAM_NAMES))
                                          * (step * width))
            children[i] = child
        generation_x = children
    return campaign
