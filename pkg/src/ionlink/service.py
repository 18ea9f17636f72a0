"""HTTP service exposing optimization, sweeps and validation.

Thin wrapper around the core package: pydantic request/response models
mirror the scenario and sweep structures, and every endpoint is a pure
function of its request body plus the packaged preset defaults.
"""

from __future__ import annotations

from dataclasses import replace

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .config import scenario_from_dict
from .exceptions import ConfigError
from .optimize import OptimizationProblem, optimize_direct, optimize_hybrid
from .swaps import SwapTopology
from .sweeps import PROTOCOLS, SweepSpec, run_sweep
from .validation import run_validation

app = FastAPI(
    title="ionlink",
    description="Hybrid ion / SPDC+memory entanglement-link simulator and optimizer",
    version=__version__,
)


class EfficienciesModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    eta: float | None = None
    eta0_prime: float | None = None
    eta_fc: float | None = None
    eta_m: float | None = None


class ScenarioModel(BaseModel):
    """Scenario overrides; unset fields fall back to the packaged preset."""

    model_config = ConfigDict(extra="forbid")

    total_distance_km: float | None = None
    with_repeater: bool | None = None
    n_bb_modes: int | None = None
    attenuation_db_per_km: float | None = None
    c_fiber_km_per_s: float | None = None
    ion_pulse_duration_s: float | None = None
    time_bin_duration_s: float | None = None
    correlation_time_s: float | None = None
    detector_resolution_s: float | None = None
    dark_rate_hz: float | None = None
    fidelity_target: float | None = None
    reset_time_s: float | None = None
    fock_cutoff: int | None = None
    efficiencies: EfficienciesModel | None = None

    def overrides(self) -> dict:
        data = self.model_dump(exclude_none=True)
        if "efficiencies" in data and not data["efficiencies"]:
            del data["efficiencies"]
        return data


def _build_scenario(model: ScenarioModel | None):
    try:
        return scenario_from_dict(model.overrides() if model else {})
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from None


class OptimizeRequest(BaseModel):
    protocol: str = Field(default="hybrid-repeater")
    scenario: ScenarioModel | None = None
    seed: int = 20240817
    n_starts: int = 4


class PointResult(BaseModel):
    feasible: bool
    duration_s: float | None = None
    single_link_s: float | None = None
    fidelity: float | None = None
    rate_hz: float | None = None
    alpha1_sq: float | None = None
    beta1_sq: float | None = None
    gamma1_sq: float | None = None
    p_en: float | None = None
    p_bb_per_mode: float | None = None
    p_s1_left: float | None = None
    p_s1_right: float | None = None
    p_s2: float | None = None
    p_purify: float | None = None


class OptimizeResponse(BaseModel):
    protocol: str
    result: PointResult
    n_evaluations: int


class SweepRequest(BaseModel):
    protocol: str = Field(default="hybrid-repeater")
    distances_km: list[float]
    scenario: ScenarioModel | None = None
    seed: int = 20240817
    n_starts: int = 4
    threads: int = 1


class SweepRowModel(BaseModel):
    distance_km: float
    feasible: bool
    duration_s: float | None = None
    fidelity: float | None = None
    alpha1_sq: float | None = None
    beta1_sq: float | None = None
    gamma1_sq: float | None = None


class SweepResponse(BaseModel):
    protocol: str
    rows: list[SweepRowModel]


class ValidateRequest(BaseModel):
    checks: list[str] | None = None
    fock_cutoff: int = 2


class CheckModel(BaseModel):
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""


class ValidateResponse(BaseModel):
    all_passed: bool
    checks: list[CheckModel]


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/api/optimize", response_model=OptimizeResponse)
def api_optimize(req: OptimizeRequest) -> OptimizeResponse:
    if req.protocol not in PROTOCOLS:
        raise HTTPException(status_code=400, detail=f"protocol must be one of {PROTOCOLS}")
    scenario = _build_scenario(req.scenario)
    if req.protocol in ("direct", "direct-repeater"):
        out = optimize_direct(scenario, ion_repeater=(req.protocol == "direct-repeater"))
    else:
        topo = (SwapTopology.with_repeater() if req.protocol == "hybrid-repeater"
                else SwapTopology.without_repeater())
        scenario = replace(scenario, topology=topo)
        problem = OptimizationProblem(scenario=scenario, seed=req.seed, n_starts=req.n_starts)
        out = optimize_hybrid(scenario, problem)
    if not out.feasible or out.result is None:
        body = PointResult(feasible=False)
    else:
        r = out.result
        body = PointResult(
            feasible=True, duration_s=r.total_s, single_link_s=r.single_link_s,
            fidelity=r.fidelity, rate_hz=r.rate_hz, alpha1_sq=r.alpha1_sq,
            beta1_sq=r.beta1_sq, gamma1_sq=r.gamma1_sq, p_en=r.p_en,
            p_bb_per_mode=r.p_bb_per_mode, p_s1_left=r.p_s1_left,
            p_s1_right=r.p_s1_right, p_s2=r.p_s2, p_purify=r.p_purify,
        )
    return OptimizeResponse(protocol=req.protocol, result=body, n_evaluations=out.n_evaluations)


@app.post("/api/sweep", response_model=SweepResponse)
def api_sweep(req: SweepRequest) -> SweepResponse:
    scenario = _build_scenario(req.scenario)
    try:
        spec = SweepSpec(protocol=req.protocol, distances_km=list(req.distances_km),
                         scenario=scenario, seed=req.seed, n_starts=req.n_starts,
                         threads=req.threads)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from None
    rows = run_sweep(spec)
    return SweepResponse(
        protocol=req.protocol,
        rows=[SweepRowModel(**row.as_dict()) for row in rows],
    )


@app.post("/api/validate", response_model=ValidateResponse)
def api_validate(req: ValidateRequest) -> ValidateResponse:
    try:
        results = run_validation(cutoff=req.fock_cutoff, checks=req.checks)
    except KeyError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from None
    return ValidateResponse(
        all_passed=all(r.passed for r in results),
        checks=[CheckModel(**r.as_dict()) for r in results],
    )
