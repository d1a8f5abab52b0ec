"""Experiment orchestration: benchmark sweeps, validation, and allocation runs.

Implements the simulation protocol used throughout the package benchmarks:
random fixed-edge-count networks, binary covariates drawn fair-coin per
unit, L1-distance similarity, a 30 percent treatment capacity, and
per-person welfare averaged over replications. Every random stream is
derived from one master seed, so full runs are reproducible bit for bit.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import allocate as alloc
from . import bounds as bnd
from . import dynamics, exact, meanfield
from .model import Allocation, Instance, ThetaParams, make_instance, weights
from .network import SimilarityKernel, erdos_renyi, load_covariates, load_network

EVALUATORS = ("exact", "va", "mcmc")
METHODS = ("brute", "bfva", "greedy", "random", "none")


def derive_seed(master: int, *key) -> int:
    """Stable child seed from a master seed and an integer key path."""
    entropy = [int(master)] + [int(k) for k in key]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def simulation_instance(
    n: int,
    density: float,
    theta: ThetaParams,
    seed: int,
    kernel: SimilarityKernel | None = None,
) -> Instance:
    """One benchmark instance: random network plus binary covariates."""
    net = erdos_renyi(n, density, seed=derive_seed(seed, 0))
    rng = np.random.default_rng(derive_seed(seed, 1))
    x = rng.integers(0, 2, size=(n, 1)).astype(float)
    return make_instance(net, x, theta, kernel=kernel or SimilarityKernel.abs_diff())


def capacity(n: int, kappa: int | None, kappa_frac: float) -> int:
    return kappa if kappa is not None else int(math.floor(kappa_frac * n))


@dataclass(frozen=True)
class SamplerSettings:
    sweeps: int = 10_000
    burn_in: int = 5_000
    steps_per_sweep: int | None = None


@dataclass(frozen=True)
class Tolerances:
    stationarity: float = 1e-12
    va_mcmc: float = 0.01
    kl_nonneg: float = -1e-10
    pinsker_slack: float = 1e-9


@dataclass
class ExperimentConfig:
    """Settings for a run; unknown config keys are rejected to catch typos."""

    param_sets: tuple = (1,)
    densities: tuple = (0.3,)
    sizes: tuple = (15,)
    methods: tuple = ("greedy", "random", "none")
    evaluators: tuple = ("va",)
    replications: int = 100
    seed: int = 0
    kappa: int | None = None
    kappa_frac: float = 0.3
    theta: dict | None = None
    a_n: float | None = None
    kernel: str = "absdiff"
    sparse: bool | None = None
    random_draws: int | None = None
    exact_cap: int = 15
    solver: meanfield.SolverSettings = field(default_factory=meanfield.SolverSettings)
    sampler: SamplerSettings = field(default_factory=SamplerSettings)
    tolerances: Tolerances = field(default_factory=Tolerances)
    workers: int = 1
    out: str | None = None
    network_file: str | None = None
    covariates_file: str | None = None
    method: str = "greedy"
    mcmc_check: bool = False

    def __post_init__(self):
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods: {sorted(bad)}")
        bad = set(self.evaluators) - set(EVALUATORS)
        if bad:
            raise ValueError(f"unknown evaluators: {sorted(bad)}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        kwargs = {}
        for sub_name, sub_cls in (
            ("solver", meanfield.SolverSettings),
            ("sampler", SamplerSettings),
            ("tolerances", Tolerances),
        ):
            if sub_name in raw:
                kwargs[sub_name] = sub_cls(**raw.pop(sub_name))
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in ("param_sets", "densities", "sizes", "methods", "evaluators"):
            if key in raw:
                raw[key] = tuple(raw[key])
        kwargs.update(raw)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def resolved_theta(self, set_id: int, n: int, generated: bool) -> ThetaParams:
        """Parameters for one cell, applying the spillover-scaling default:
        1/N for generated (dense) networks, 1 for declared-sparse data."""
        if self.theta is not None:
            theta = ThetaParams.from_dict(self.theta)
            if "a_n" not in self.theta and self.a_n is None:
                theta = theta.replace_a_n(self._default_a_n(n, generated))
        else:
            theta = ThetaParams.from_set(set_id, a_n=self._default_a_n(n, generated))
        if self.a_n is not None:
            theta = theta.replace_a_n(self.a_n)
        return theta

    def _default_a_n(self, n: int, generated: bool) -> float:
        sparse = (not generated) if self.sparse is None else self.sparse
        return 1.0 if sparse else 1.0 / n

    def draws_for(self, n: int) -> int:
        if self.random_draws is not None:
            return self.random_draws
        return 50 if n <= 15 else 10


def sig6(x) -> str:
    return f"{float(x):.6g}"


def _round6(obj):
    """Round every float in a JSON-ready structure to 6 significant digits."""
    if isinstance(obj, float):
        return float(f"{obj:.6g}")
    if isinstance(obj, dict):
        return {k: _round6(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round6(v) for v in obj]
    return obj


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_round6(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

SIMULATE_COLUMNS = (
    "param_set",
    "density",
    "n",
    "method",
    "evaluator",
    "mean",
    "stderr",
    "replications",
    "reason",
)


def _cell_key(set_id: int, density: float, n: int) -> tuple:
    return (set_id, int(round(density * 1000)), n)


def _replication_task(payload) -> dict:
    """Welfare of every requested (method, evaluator) pair for one replication.

    Returns per-person values keyed by (method, evaluator); infeasible pairs
    map to a reason string instead of a number.
    """
    cfg: ExperimentConfig = payload["cfg"]
    set_id, density, n, rep = payload["cell"] + (payload["rep"],)
    key = _cell_key(set_id, density, n)
    theta = cfg.resolved_theta(set_id, n, generated=True)
    inst_seed = derive_seed(cfg.seed, *key, rep, 0)
    instance = simulation_instance(n, density, theta, seed=inst_seed)
    kappa = capacity(n, cfg.kappa, cfg.kappa_frac)
    exact_ok = n <= cfg.exact_cap

    def evaluate(d, tag: int):
        values = {}
        for ev in cfg.evaluators:
            if ev == "exact":
                if exact_ok:
                    values[ev] = exact.exact_welfare(d, instance, max_units=cfg.exact_cap) / n
                else:
                    values[ev] = "exact_infeasible"
            elif ev == "va":
                values[ev] = (
                    meanfield.approx_welfare(
                        d, instance, cfg.solver,
                        seed=derive_seed(cfg.seed, *key, rep, 10 + tag),
                    )
                    / n
                )
            elif ev == "mcmc":
                est, _ = dynamics.mcmc_welfare(
                    d,
                    instance,
                    sweeps=cfg.sampler.sweeps,
                    burn_in=cfg.sampler.burn_in,
                    seed=derive_seed(cfg.seed, *key, rep, 20 + tag),
                    steps_per_sweep=cfg.sampler.steps_per_sweep,
                )
                values[ev] = est
            else:
                raise ValueError(f"unknown evaluator {ev!r}")
        return values

    out = {}
    for method in cfg.methods:
        if method == "none":
            d = np.zeros(n, dtype=np.int8)
            out[method] = evaluate(d, 0)
        elif method == "greedy":
            allocation, _ = alloc.greedy(
                instance, kappa, cfg.solver, seed=derive_seed(cfg.seed, *key, rep, 1)
            )
            out[method] = evaluate(allocation.d, 1)
        elif method == "bfva":
            try:
                allocation, _ = alloc.bfva(
                    instance, kappa, cfg.solver,
                    seed=derive_seed(cfg.seed, *key, rep, 2),
                )
            except ValueError:
                out[method] = {ev: "enumeration_infeasible" for ev in cfg.evaluators}
                continue
            out[method] = evaluate(allocation.d, 2)
        elif method == "brute":
            if not exact_ok:
                out[method] = {ev: "exact_infeasible" for ev in cfg.evaluators}
                continue
            allocation, _ = exact.brute_force_optimal(instance, kappa, max_units=cfg.exact_cap)
            out[method] = evaluate(allocation.d, 3)
        elif method == "random":
            draws = cfg.draws_for(n)
            rand_seed = derive_seed(cfg.seed, *key, rep, 4)
            values = {}
            for j, ev in enumerate(cfg.evaluators):
                if ev == "exact" and not exact_ok:
                    values[ev] = "exact_infeasible"
                    continue
                evaluator = _single_evaluator(
                    ev, instance, cfg, derive_seed(cfg.seed, *key, rep, 30 + j)
                )
                values[ev] = (
                    alloc.random_allocation_welfare(
                        instance, kappa, draws, rand_seed, evaluator
                    )
                    / n
                )
            out[method] = values
        else:
            raise ValueError(f"unknown method {method!r}")
    return out


def _single_evaluator(ev: str, instance: Instance, cfg: ExperimentConfig, seed: int):
    if ev == "exact":
        return lambda d: exact.exact_welfare(d, instance, max_units=cfg.exact_cap)
    if ev == "va":
        return lambda d: meanfield.approx_welfare(d, instance, cfg.solver, seed=seed)
    if ev == "mcmc":
        return lambda d: dynamics.mcmc_welfare(
            d,
            instance,
            sweeps=cfg.sampler.sweeps,
            burn_in=cfg.sampler.burn_in,
            seed=seed,
            steps_per_sweep=cfg.sampler.steps_per_sweep,
        )[0] * instance.n
    raise ValueError(f"unknown evaluator {ev!r}")


def run_simulate(cfg: ExperimentConfig) -> list[dict]:
    """Benchmark sweep over the configured grid; one CSV row per cell,
    method, and evaluator, aggregated across replications."""
    rows = []
    for set_id in cfg.param_sets:
        for density in cfg.densities:
            for n in cfg.sizes:
                payloads = [
                    {"cfg": cfg, "cell": (set_id, density, n), "rep": r}
                    for r in range(cfg.replications)
                ]
                if cfg.workers > 1:
                    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                        results = list(pool.map(_replication_task, payloads))
                else:
                    results = [_replication_task(p) for p in payloads]
                for method in cfg.methods:
                    for ev in cfg.evaluators:
                        cell = [res[method][ev] for res in results]
                        reasons = [v for v in cell if isinstance(v, str)]
                        if reasons:
                            rows.append(
                                {
                                    "param_set": set_id,
                                    "density": density,
                                    "n": n,
                                    "method": method,
                                    "evaluator": ev,
                                    "mean": "NA",
                                    "stderr": "NA",
                                    "replications": cfg.replications,
                                    "reason": reasons[0],
                                }
                            )
                            continue
                        values = np.array(cell, dtype=float)
                        stderr = (
                            float(values.std(ddof=1) / math.sqrt(values.size))
                            if values.size > 1
                            else 0.0
                        )
                        rows.append(
                            {
                                "param_set": set_id,
                                "density": density,
                                "n": n,
                                "method": method,
                                "evaluator": ev,
                                "mean": float(values.mean()),
                                "stderr": stderr,
                                "replications": cfg.replications,
                                "reason": "",
                            }
                        )
    return rows


def write_simulate_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SIMULATE_COLUMNS)
        writer.writeheader()
        for row in rows:
            formatted = dict(row)
            for col in ("mean", "stderr"):
                if not isinstance(formatted[col], str):
                    formatted[col] = sig6(formatted[col])
            formatted["density"] = sig6(formatted["density"])
            writer.writerow(formatted)


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def run_validate(cfg: ExperimentConfig) -> tuple[dict, bool]:
    """Cross-check the approximation stack on the configured grid.

    Per instance: agreement of mean-field, sampled, and (small networks)
    exact welfare; stationarity of the enumerated distribution under the
    simulation kernel; nonnegativity and boundedness of the exact KL
    divergence; the greedy guarantee inequality. Returns the report and an
    overall pass flag.
    """
    tol = cfg.tolerances
    entries = []
    for set_id in cfg.param_sets:
        for density in cfg.densities:
            for n in cfg.sizes:
                key = _cell_key(set_id, density, n)
                for rep in range(cfg.replications):
                    theta = cfg.resolved_theta(set_id, n, generated=True)
                    instance = simulation_instance(
                        n, density, theta, seed=derive_seed(cfg.seed, *key, rep, 0)
                    )
                    kappa = capacity(n, cfg.kappa, cfg.kappa_frac)
                    entry = {
                        "param_set": set_id,
                        "density": density,
                        "n": n,
                        "replication": rep,
                        "checks": {},
                    }
                    checks = entry["checks"]
                    g_alloc, _ = alloc.greedy(
                        instance, kappa, cfg.solver,
                        seed=derive_seed(cfg.seed, *key, rep, 1),
                    )
                    rules = {"greedy": g_alloc.d, "none": np.zeros(n, dtype=np.int8)}
                    solutions = {
                        name: meanfield.solve_allocation(
                            instance, d, cfg.solver,
                            seed=derive_seed(cfg.seed, *key, rep, 2),
                        )
                        for name, d in rules.items()
                    }
                    if "mcmc" in cfg.evaluators:
                        for name, d in rules.items():
                            est, _ = dynamics.mcmc_welfare(
                                d,
                                instance,
                                sweeps=cfg.sampler.sweeps,
                                burn_in=cfg.sampler.burn_in,
                                seed=derive_seed(cfg.seed, *key, rep, 3),
                                steps_per_sweep=cfg.sampler.steps_per_sweep,
                            )
                            gap = abs(solutions[name].welfare / n - est)
                            checks[f"va_vs_mcmc_{name}"] = {
                                "value": gap,
                                "pass": bool(gap <= tol.va_mcmc),
                            }
                    if n <= cfg.exact_cap:
                        klub = bnd.kl_upper_bound(instance)
                        for name, d in rules.items():
                            sol = solutions[name]
                            dist = exact.enumerate_gibbs(
                                weights(instance, d), max_units=cfg.exact_cap
                            )
                            kl = exact.exact_kl(sol.mu, dist)
                            checks[f"kl_bounds_{name}"] = {
                                "value": kl,
                                "upper": klub,
                                "pass": bool(tol.kl_nonneg <= kl <= klub),
                            }
                            gap = abs(dist.welfare - sol.welfare)
                            pinsker = math.sqrt(max(2.0 * kl, 0.0)) + tol.pinsker_slack
                            checks[f"va_vs_exact_{name}"] = {
                                "value": gap / n,
                                "upper": pinsker / n,
                                "pass": bool(gap <= pinsker),
                            }
                        if n <= 12:
                            stat = dynamics.stationarity_check(
                                instance, rules["greedy"], max_units=12
                            )
                            checks["stationarity"] = {
                                "value": stat,
                                "pass": bool(stat <= tol.stationarity),
                            }
                        report = bnd.bounds_report(instance)
                        if report.positivity_holds and report.sample_size_ok:
                            _, bf_w = alloc.bfva(
                                instance, kappa, cfg.solver,
                                seed=derive_seed(cfg.seed, *key, rep, 5),
                            )
                            checks["greedy_guarantee"] = {
                                "value": solutions["greedy"].welfare,
                                "lower": report.guarantee_factor * bf_w,
                                "pass": bool(
                                    solutions["greedy"].welfare
                                    >= report.guarantee_factor * bf_w - 1e-9
                                ),
                            }
                    entries.append(entry)
    failed = sum(
        1
        for e in entries
        for c in e["checks"].values()
        if not c["pass"]
    )
    total = sum(len(e["checks"]) for e in entries)
    report = {
        "instances": entries,
        "summary": {"checks": total, "failed": failed, "passed": failed == 0},
    }
    return report, failed == 0


# ---------------------------------------------------------------------------
# allocate / bounds on user data
# ---------------------------------------------------------------------------


def load_instance(cfg: ExperimentConfig) -> Instance:
    if not cfg.network_file or not cfg.covariates_file:
        raise ValueError("allocate/bounds runs need network_file and covariates_file")
    net = load_network(cfg.network_file)
    x = load_covariates(cfg.covariates_file)
    if cfg.theta is None:
        raise ValueError("allocate/bounds runs need explicit theta parameters")
    theta = cfg.resolved_theta(set_id=1, n=net.n, generated=False)
    return make_instance(net, x, theta, kernel=SimilarityKernel.parse(cfg.kernel))


def run_allocate(cfg: ExperimentConfig) -> dict:
    """Compute an allocation for user-supplied network and covariate files.

    Returns the allocation record (with per-round trace) plus the bounds
    report; optionally cross-checks the final welfare by simulation.
    """
    instance = load_instance(cfg)
    n = instance.n
    kappa = capacity(n, cfg.kappa, cfg.kappa_frac)
    trace_out = []
    if cfg.method == "greedy":
        allocation, trace = alloc.greedy(
            instance, kappa, cfg.solver, seed=derive_seed(cfg.seed, 1)
        )
        trace_out = [
            {"round": s.round, "unit": s.unit, "delta": s.delta} for s in trace
        ]
        welfare = meanfield.approx_welfare(
            allocation.d, instance, cfg.solver, seed=derive_seed(cfg.seed, 2)
        )
    elif cfg.method == "bfva":
        allocation, welfare = alloc.bfva(
            instance, kappa, cfg.solver, seed=derive_seed(cfg.seed, 1)
        )
    elif cfg.method == "brute":
        allocation, _ = exact.brute_force_optimal(instance, kappa, max_units=cfg.exact_cap)
        welfare = meanfield.approx_welfare(
            allocation.d, instance, cfg.solver, seed=derive_seed(cfg.seed, 2)
        )
    elif cfg.method == "none":
        allocation = Allocation.zeros(n)
        welfare = meanfield.approx_welfare(
            allocation.d, instance, cfg.solver, seed=derive_seed(cfg.seed, 2)
        )
    else:
        raise ValueError(f"unknown allocation method {cfg.method!r}")
    record = {
        "n": n,
        "kappa": kappa,
        "treated": list(allocation.treated),
        "welfare_va": welfare,
        "trace": trace_out,
    }
    if cfg.mcmc_check:
        est, se = dynamics.mcmc_welfare(
            allocation.d,
            instance,
            sweeps=cfg.sampler.sweeps,
            burn_in=cfg.sampler.burn_in,
            seed=derive_seed(cfg.seed, 3),
            steps_per_sweep=cfg.sampler.steps_per_sweep,
        )
        record["welfare_mcmc"] = est * n
        record["welfare_mcmc_stderr"] = se * n
    bounds = bnd.bounds_report(instance).to_dict()
    return {"allocation": record, "bounds": bounds}


def run_bounds(cfg: ExperimentConfig) -> dict:
    """Bounds report (with asymptotic constants) for a file-based instance."""
    instance = load_instance(cfg)
    report = bnd.bounds_report(instance).to_dict()
    report["asymptotic_constants"] = bnd.asymptotic_kl_constants(instance)
    return report
