"""Distance sweeps over the four protocol variants with optimized emissions."""

from __future__ import annotations

import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .exceptions import ConfigError
from .optimize import OptimizationProblem, optimize_direct, optimize_hybrid
from .swaps import SwapTopology
from .timing import ScenarioConfig

PROTOCOLS = ("direct", "direct-repeater", "hybrid", "hybrid-repeater")

CSV_COLUMNS = ("distance_km", "duration_s", "fidelity", "alpha1_sq", "beta1_sq",
               "gamma1_sq", "feasible")


@dataclass
class SweepSpec:
    """One protocol variant swept over a list of distances."""

    protocol: str
    distances_km: list[float]
    scenario: ScenarioConfig
    seed: int = 20240817
    n_starts: int = 4
    threads: int = 1

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"must be one of {PROTOCOLS}", field="protocol")
        if not self.distances_km:
            raise ConfigError("distance list must not be empty", field="distances_km")
        prev = 0.0
        for d in self.distances_km:
            if d <= prev:
                raise ConfigError("distances must be positive and strictly increasing",
                                  field="distances_km")
            prev = d
        if self.threads < 1:
            raise ConfigError("must be >= 1", field="threads")


@dataclass
class SweepRow:
    distance_km: float
    feasible: bool
    duration_s: float | None = None
    fidelity: float | None = None
    alpha1_sq: float | None = None
    beta1_sq: float | None = None
    gamma1_sq: float | None = None

    def as_dict(self) -> dict:
        return {
            "distance_km": self.distance_km,
            "duration_s": self.duration_s,
            "fidelity": self.fidelity,
            "alpha1_sq": self.alpha1_sq,
            "beta1_sq": self.beta1_sq,
            "gamma1_sq": self.gamma1_sq,
            "feasible": self.feasible,
        }


def _scenario_at(spec: SweepSpec, distance_km: float) -> ScenarioConfig:
    topo = (SwapTopology.with_repeater() if spec.protocol == "hybrid-repeater"
            else SwapTopology.without_repeater())
    return replace(spec.scenario, total_distance_km=distance_km, topology=topo)


def _run_point(spec: SweepSpec, distance_km: float) -> SweepRow:
    scenario = _scenario_at(spec, distance_km)
    if spec.protocol in ("direct", "direct-repeater"):
        out = optimize_direct(scenario, ion_repeater=(spec.protocol == "direct-repeater"))
    else:
        problem = OptimizationProblem(scenario=scenario, n_starts=spec.n_starts,
                                      seed=spec.seed)
        out = optimize_hybrid(scenario, problem)
    if not out.feasible or out.result is None:
        return SweepRow(distance_km=distance_km, feasible=False)
    r = out.result
    return SweepRow(
        distance_km=distance_km,
        feasible=True,
        duration_s=r.total_s,
        fidelity=r.fidelity,
        alpha1_sq=r.alpha1_sq,
        beta1_sq=r.beta1_sq,
        gamma1_sq=r.gamma1_sq,
    )


def run_sweep(spec: SweepSpec) -> list[SweepRow]:
    """Optimize every distance point; rows come back ordered by distance."""
    if spec.threads > 1 and len(spec.distances_km) > 1:
        with ProcessPoolExecutor(max_workers=spec.threads) as pool:
            rows = list(pool.map(_run_point, [spec] * len(spec.distances_km),
                                 spec.distances_km))
    else:
        rows = [_run_point(spec, d) for d in spec.distances_km]
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return f"{value:.12g}"


def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for row in rows:
        d = row.as_dict()
        buf.write(",".join(_fmt(d[c]) for c in CSV_COLUMNS) + "\n")
    return buf.getvalue()


def rows_to_json(rows: list[SweepRow], meta: dict | None = None) -> str:
    payload = {
        "columns": list(CSV_COLUMNS),
        "rows": [row.as_dict() for row in rows],
    }
    if meta:
        payload["meta"] = meta
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
