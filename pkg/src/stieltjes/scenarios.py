"""Scenario configuration, built-in scenarios and batch runs.

Scenarios are JSON documents validated against a strict schema (unknown keys
are rejected). A file may also hold the short form
``{"builtin": "<id>", "params": {...}}``, which expands to the full builtin
scenario with the given parameter overrides.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Discriminator, Field, Tag, ValidationError, model_validator

from . import catalog, exprdsl
from .derivator import ContinuousPiece, Derivator, JumpList, Linear, PeriodicJumps, Plateau, PointKind, Smooth
from .errors import ConfigError, ExprSyntaxError, StieltjesError
from .gcalc import TwoBranchScalar
from .lyapunov import (FD_STEP, CertificateReport, ClassK, LyapunovCandidate, _terms,
                       central_difference_gradient, check_asymptotic_certificate,
                       check_decay_certificate, empirical_stability_probe, ordered_map)
from .solver import DomainSpec, Trajectory, VectorField, solve_ivp, write_key_values


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="strings")


def _builtin_or_expr(v):
    if isinstance(v, dict):
        return "<builtin>" if "builtin" in v else "<expr>"
    return "<builtin>" if isinstance(v, (BuiltinRef, CandidateRef)) else "<expr>"


def _jump_kind(v):
    kind = v.get("kind") if isinstance(v, dict) else getattr(v, "kind", None)
    return "<periodic>" if kind == "periodic" else "<list>"


class PieceConfig(_Strict):
    start: float
    end: float
    kind: Literal["linear", "plateau", "smooth"]
    slope: float | None = None
    value: str | None = None
    derivative: str | None = None

    @model_validator(mode="after")
    def _fields_match_kind(self):
        if self.kind == "linear" and self.slope is None:
            raise ValueError("a linear piece needs 'slope'")
        if self.kind == "smooth" and (self.value is None or self.derivative is None):
            raise ValueError("a smooth piece needs 'value' and 'derivative'")
        if self.kind != "linear" and self.slope is not None:
            raise ValueError("'slope' only applies to linear pieces")
        if self.kind != "smooth" and (self.value is not None or self.derivative is not None):
            raise ValueError("'value'/'derivative' only apply to smooth pieces")
        return self


class JumpListConfig(_Strict):
    kind: Literal["list"] = "list"
    events: list[tuple[float, float]]


class PeriodicJumpConfig(_Strict):
    kind: Literal["periodic"]
    period: float = Field(gt=0)
    offsets: list[float]
    gaps: list[float]
    origin: float = 0.0


JumpConfig = Annotated[
    Union[Annotated[JumpListConfig, Tag("<list>")], Annotated[PeriodicJumpConfig, Tag("<periodic>")]],
    Discriminator(_jump_kind),
]


class DerivatorConfig(_Strict):
    pieces: list[PieceConfig] = Field(min_length=1)
    jumps: JumpConfig | None = None
    period: float | None = None
    anchor: float = 0.0
    constants: dict[str, float] = {}


class BuiltinRef(_Strict):
    builtin: str
    params: dict[str, float] = {}

    @model_validator(mode="after")
    def _known(self):
        if self.builtin not in catalog.BUILTINS:
            raise ValueError(f"unknown builtin {self.builtin!r}; choose one of {sorted(catalog.BUILTINS)}")
        defaults = catalog.BUILTINS[self.builtin].defaults
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ValueError(f"unknown parameter(s) {sorted(unknown)} for {self.builtin}")
        self.params = {**defaults, **self.params}
        return self


class CandidateRef(BuiltinRef):
    pass


class ExprSystem(_Strict):
    continuous: list[str] = Field(min_length=1)
    jump: list[str] | None = None
    constants: dict[str, float] = {}


class ExprCandidate(_Strict):
    V: str
    grad: list[str] | None = None
    dvdt: str | None = None
    dvdt_jump: str | None = None
    a: str
    b: str | None = None
    rate: str | None = None
    weight: str | None = None
    weight_jump: str | None = None
    constants: dict[str, float] = {}


SystemConfig = Annotated[
    Union[Annotated[BuiltinRef, Tag("<builtin>")], Annotated[ExprSystem, Tag("<expr>")]],
    Discriminator(_builtin_or_expr),
]
CandidateConfig = Annotated[
    Union[Annotated[CandidateRef, Tag("<builtin>")], Annotated[ExprCandidate, Tag("<expr>")]],
    Discriminator(_builtin_or_expr),
]


class DomainConfig(_Strict):
    t0: float = 0.0
    horizon: float
    center: list[float] = Field(min_length=1)
    r0: float = math.inf
    r: float | None = None
    blowup_threshold: float = 1e8


class RadialGrid(_Strict):
    radii: list[float] = Field(min_length=1)
    directions: list[list[float]] | None = None


class InitialConfig(_Strict):
    states: list[list[float]] = []
    radial: RadialGrid | None = None


class StabilityConfig(_Strict):
    t0_grid: list[float] = [0.0]
    horizons: list[float] = [2.0 ** k for k in range(1, 9)]
    eps: list[float] = []
    rays: list[list[float]] = []
    divergence_target: float | None = None
    annulus_inner: float | None = None
    far_factors: list[float] = [1.0, 10.0, 100.0, 1000.0]
    record_every: int = Field(10, ge=1)


class OutputConfig(_Strict):
    directory: str = "out"
    emit_candidate: bool = True
    record_every: int = Field(1, ge=1)


class ScenarioConfig(_Strict):
    name: str
    description: str = ""
    derivator: DerivatorConfig
    system: SystemConfig
    domain: DomainConfig
    initial: InitialConfig = InitialConfig()
    step: float = Field(1e-3, gt=0)
    candidate: CandidateConfig | None = None
    stability: StabilityConfig = StabilityConfig()
    outputs: OutputConfig = OutputConfig()

    @property
    def dimension(self) -> int:
        if isinstance(self.system, BuiltinRef):
            return catalog.BUILTINS[self.system.builtin].dimension
        return len(self.system.continuous)

    @property
    def constants(self) -> dict[str, float]:
        if isinstance(self.system, BuiltinRef):
            return dict(self.system.params)
        return dict(self.system.constants)

    @model_validator(mode="after")
    def _consistent(self):
        n = self.dimension
        checks = [("domain.center", self.domain.center)]
        checks += [(f"initial.states.{i}", s) for i, s in enumerate(self.initial.states)]
        if self.initial.radial and self.initial.radial.directions:
            checks += [(f"initial.radial.directions.{i}", s) for i, s in enumerate(self.initial.radial.directions)]
        checks += [(f"stability.rays.{i}", s) for i, s in enumerate(self.stability.rays)]
        if isinstance(self.system, ExprSystem) and self.system.jump is not None:
            checks.append(("system.jump", self.system.jump))
        if isinstance(self.candidate, ExprCandidate) and self.candidate.grad is not None:
            checks.append(("candidate.grad", self.candidate.grad))
        for where, vec in checks:
            if len(vec) != n:
                raise ValueError(f"dimension mismatch at {where}: expected {n}, got {len(vec)}")
        if isinstance(self.candidate, CandidateRef) and isinstance(self.system, BuiltinRef) \
                and self.candidate.builtin != self.system.builtin:
            raise ValueError("a builtin candidate must match the builtin system")
        return self


# -- loading -------------------------------------------------------------------------

def _config_error(exc: ValidationError) -> ConfigError:
    err = exc.errors()[0]
    path = ".".join(str(p) for p in err["loc"] if not (isinstance(p, str) and p.startswith("<")))
    msg = err["msg"].removeprefix("Value error, ")
    return ConfigError(msg, path)


def validate_config(raw: dict) -> ScenarioConfig:
    if isinstance(raw, dict) and "builtin" in raw and "derivator" not in raw:
        extra = set(raw) - {"builtin", "params"}
        if extra:
            raise ConfigError(f"unexpected key(s) {sorted(extra)} in builtin reference", sorted(extra)[0])
        return builtin_config(raw["builtin"], raw.get("params"))
    try:
        cfg = ScenarioConfig.model_validate(raw)
    except ValidationError as exc:
        raise _config_error(exc) from None
    # surface expression and derivator errors at load time
    d = build_derivator(cfg)
    build_field(cfg)
    build_candidate(cfg, d)
    build_domain(cfg)
    return cfg


def builtin_config(bid: str, params: dict | None = None) -> ScenarioConfig:
    if bid not in catalog.BUILTINS:
        raise ConfigError(f"unknown builtin {bid!r}; choose one of {sorted(catalog.BUILTINS)}", "builtin")
    b = catalog.BUILTINS[bid]
    unknown = set(params or {}) - set(b.defaults)
    if unknown:
        raise ConfigError(f"unknown parameter(s) {sorted(unknown)} for {bid}", f"params.{sorted(unknown)[0]}")
    p = {**b.defaults, **(params or {})}
    raw = b.scenario(p)
    raw["description"] = b.description
    raw["system"] = {"builtin": bid, "params": p}
    raw["candidate"] = {"builtin": bid, "params": p}
    return validate_config(raw)


def load_scenario(source) -> ScenarioConfig:
    """Load a builtin by id or a JSON scenario file."""
    s = str(source)
    if s in catalog.BUILTINS:
        return builtin_config(s)
    path = Path(s)
    if not path.is_file():
        raise ConfigError(f"{s!r} is neither a builtin id nor a readable file")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
    return validate_config(raw)


def dump_scenario(cfg: ScenarioConfig) -> str:
    return cfg.model_dump_json(indent=2, exclude_none=True)


def with_overrides(cfg: ScenarioConfig, *, step=None, horizon=None, states=None, out=None,
                   record_every=None) -> ScenarioConfig:
    raw = json.loads(cfg.model_dump_json())
    if step is not None:
        raw["step"] = step
    if horizon is not None:
        raw["domain"]["horizon"] = horizon
    if states is not None:
        raw["initial"] = {"states": [list(s) for s in states]}
    if out is not None:
        raw["outputs"]["directory"] = str(out)
    if record_every is not None:
        raw["outputs"]["record_every"] = record_every
    return validate_config(raw)


# -- building runtime objects --------------------------------------------------------

def _expr_guard(path: str, fn, *args):
    try:
        return fn(*args)
    except ExprSyntaxError as exc:
        raise ConfigError(str(exc), path) from None


def build_derivator(cfg: ScenarioConfig) -> Derivator:
    dc = cfg.derivator
    pieces = []
    for i, p in enumerate(dc.pieces):
        if p.kind == "linear":
            prof = Linear(p.slope)
        elif p.kind == "plateau":
            prof = Plateau()
        else:
            prof = _expr_guard(f"derivator.pieces.{i}", Smooth.from_exprs, p.value, p.derivative, dc.constants)
        pieces.append(ContinuousPiece(p.start, p.end, prof))
    jumps = None
    try:
        if isinstance(dc.jumps, JumpListConfig):
            jumps = JumpList(tuple(tuple(e) for e in dc.jumps.events))
        elif isinstance(dc.jumps, PeriodicJumpConfig):
            j = dc.jumps
            jumps = PeriodicJumps(j.period, tuple(j.offsets), tuple(j.gaps), j.origin)
        return Derivator(pieces, jumps, dc.anchor, dc.period)
    except ValueError as exc:
        raise ConfigError(str(exc), "derivator") from None


def build_field(cfg: ScenarioConfig) -> VectorField:
    if isinstance(cfg.system, BuiltinRef):
        return catalog.builtin_field(cfg.system.builtin, cfg.system.params)
    s = cfg.system
    return _expr_guard("system", VectorField.from_exprs, s.continuous, s.jump, s.constants)


def build_dsl_field(cfg: ScenarioConfig) -> VectorField:
    """The system as pure DSL (for builtins, their expression twin)."""
    if isinstance(cfg.system, BuiltinRef):
        return catalog.builtin_dsl_field(cfg.system.builtin, cfg.system.params)
    return build_field(cfg)


def build_domain(cfg: ScenarioConfig, t0: float | None = None) -> DomainSpec:
    dm = cfg.domain
    try:
        return DomainSpec(dm.t0 if t0 is None else t0, dm.horizon, tuple(dm.center), dm.r0, dm.r,
                          dm.blowup_threshold)
    except ValueError as exc:
        raise ConfigError(str(exc), "domain") from None


def build_candidate(cfg: ScenarioConfig, d: Derivator) -> LyapunovCandidate | None:
    c = cfg.candidate
    if c is None:
        return None
    r = cfg.domain.r if cfg.domain.r is not None else cfg.domain.r0
    if isinstance(c, CandidateRef):
        return catalog.BUILTINS[c.builtin].candidate(c.params, d, r)
    n = cfg.dimension
    consts = {**cfg.constants, **c.constants}

    def state_fn(src, path):
        return exprdsl.to_callable(_expr_guard(path, exprdsl.parse, src, n, consts))

    def envelope(src, path):
        return _expr_guard(path, ClassK.from_expr, src, consts)

    V = state_fn(c.V, "candidate.V")
    source = {"V": c.V}
    if c.grad is None:
        grad = central_difference_gradient(V, n)
        source["grad"] = f"central finite difference (h={FD_STEP:g})"
    else:
        gfs = [state_fn(g, f"candidate.grad.{i}") for i, g in enumerate(c.grad)]
        grad = lambda t, x: [g(t, x) for g in gfs]  # noqa: E731
    weight = None
    if c.weight is not None:
        we = _expr_guard("candidate.weight", exprdsl.parse, c.weight, 0, consts)
        wj = _expr_guard("candidate.weight_jump", exprdsl.parse, c.weight_jump, 0, consts) \
            if c.weight_jump is not None else we
        if isinstance(we, exprdsl.Num) and isinstance(wj, exprdsl.Num):
            weight = TwoBranchScalar.const(we.value, wj.value)
        else:
            fc, fj = exprdsl.to_callable(we), exprdsl.to_callable(wj)
            weight = TwoBranchScalar(lambda t: fc(t, ()), lambda t: fj(t, ()))
    return LyapunovCandidate(
        V, grad, envelope(c.a, "candidate.a"),
        envelope(c.b, "candidate.b") if c.b else None,
        envelope(c.rate, "candidate.rate") if c.rate else None,
        weight,
        state_fn(c.dvdt, "candidate.dvdt") if c.dvdt else None,
        state_fn(c.dvdt_jump, "candidate.dvdt_jump") if c.dvdt_jump else None,
        source=source,
    )


def initial_states(cfg: ScenarioConfig) -> list[list[float]]:
    out = [list(s) for s in cfg.initial.states]
    rg = cfg.initial.radial
    if rg is not None:
        n = cfg.dimension
        dirs = rg.directions
        if dirs is None:
            dirs = []
            for i in range(n):
                for s in (1.0, -1.0):
                    e = [0.0] * n
                    e[i] = s
                    dirs.append(e)
        center = cfg.domain.center
        for rad in rg.radii:
            for u in dirs:
                nu = max(abs(v) for v in u)
                out.append([c + rad * v / nu for c, v in zip(center, u)])
    return out


# -- running ----------------------------------------------------------------------------

@dataclass
class RunResult:
    config: ScenarioConfig
    trajectories: list[Trajectory | None]
    errors: list[str | None]
    report: CertificateReport | None = None
    files: list[Path] = field(default_factory=list)


def candidate_columns(d: Derivator, f: VectorField, cand: LyapunovCandidate, tr: Trajectory):
    """V and V'_g at every sample (V'_g is nan inside plateaus)."""
    v = np.empty(len(tr))
    vd = np.empty(len(tr))
    has_plateaus = d.largest_plateau() > 0
    for i, t in enumerate(tr.times):
        t = float(t)
        v[i] = cand.value(t, tr.x_left[i])
        jumped = bool(tr.is_jump[i])
        if not jumped and has_plateaus and d.classify(t) is PointKind.PLATEAU_INTERIOR:
            vd[i] = math.nan
            continue
        try:
            vd[i] = _terms(d, f, cand, t, tr.x_left[i], d.jump_at(t) if jumped else 0.0, False)[0]
        except (StieltjesError, ArithmeticError):
            vd[i] = math.nan
    return v, vd


def certificate_grid(cfg: ScenarioConfig) -> list[tuple[float, list[float]]]:
    states = initial_states(cfg)
    return [(t0, s) for t0 in cfg.stability.t0_grid if t0 < cfg.domain.horizon for s in states]


def run_certificate(cfg: ScenarioConfig, d: Derivator | None = None, f: VectorField | None = None,
                    workers: int | None = None) -> CertificateReport | None:
    d = d or build_derivator(cfg)
    f = f or build_field(cfg)
    cand = build_candidate(cfg, d)
    if cand is None:
        return None
    dom = build_domain(cfg)
    grid = certificate_grid(cfg)
    st = cfg.stability
    if cand.rate is not None and cand.weight is not None:
        return check_asymptotic_certificate(
            d, f, dom, cand, grid, st.horizons, st.t0_grid, cfg.step, st.divergence_target,
            st.annulus_inner, st.far_factors, workers=workers, record_every=st.record_every)
    return check_decay_certificate(d, f, dom, cand, grid, cfg.step, workers=workers,
                                   record_every=st.record_every)


def run_probe(cfg: ScenarioConfig, eps=None, t0_grid=None, rays=None, workers=None):
    d = build_derivator(cfg)
    f = build_field(cfg)
    st = cfg.stability
    return empirical_stability_probe(d, f, build_domain(cfg), eps or st.eps, t0_grid or st.t0_grid,
                                     rays or st.rays or [[1.0] * cfg.dimension], cfg.step, workers=workers)


def run_scenario(cfg: ScenarioConfig, out_dir=None, workers: int | None = None,
                 certificate: bool = True) -> RunResult:
    """Simulate every initial state, write CSV/meta files and a summary.

    A trajectory that raises is recorded in its meta file and in the summary;
    the rest of the batch is unaffected.
    """
    d = build_derivator(cfg)
    f = build_field(cfg)
    dom = build_domain(cfg)
    cand = build_candidate(cfg, d) if cfg.outputs.emit_candidate else None
    states = initial_states(cfg)
    out = Path(out_dir if out_dir is not None else cfg.outputs.directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.json").write_text(dump_scenario(cfg) + "\n")

    def one(x0):
        try:
            return solve_ivp(d, f, dom, x0, cfg.step, cfg.outputs.record_every), None
        except StieltjesError as exc:
            return None, f"{type(exc).__name__}: {exc}"

    results = ordered_map(one, states, workers)
    res = RunResult(cfg, [r[0] for r in results], [r[1] for r in results])
    res.files.append(out / "scenario.json")
    summary = {"scenario": cfg.name, "trajectories": len(states)}
    for i, (x0, (tr, err)) in enumerate(zip(states, results)):
        stem = out / f"traj_{i:03d}"
        meta = {"index": i, "x0": " ".join(format(v, ".17g") for v in x0)}
        if tr is not None:
            extra = None
            if cand is not None:
                try:
                    v, vd = candidate_columns(d, f, cand, tr)
                    extra = {"V": v, "Vdot_g": vd}
                except StieltjesError as exc:
                    meta["candidate_error"] = str(exc)
            tr.to_csv(stem.with_suffix(".csv"), extra)
            res.files.append(stem.with_suffix(".csv"))
            meta.update(tr.summary())
            summary[f"traj_{i:03d}.termination"] = tr.termination.value
            summary[f"traj_{i:03d}.omega_estimate"] = tr.omega
        else:
            meta["error"] = err
            summary[f"traj_{i:03d}.error"] = err
        write_key_values(stem.with_suffix(".meta"), meta)
        res.files.append(stem.with_suffix(".meta"))
    if certificate and cfg.candidate is not None:
        try:
            res.report = run_certificate(cfg, d, f, workers)
        except StieltjesError as exc:
            summary["certificate.error"] = str(exc)
    if res.report is not None:
        summary["certificate.verdict"] = res.report.verdict.value
        res.report.write(out / "certificate.txt")
        res.files.append(out / "certificate.txt")
    write_key_values(out / "summary.txt", summary)
    res.files.append(out / "summary.txt")
    if res.report is not None:
        with open(out / "summary.txt", "a") as fh:
            fh.write("\n" + res.report.to_text() + "\n")
    return res


def list_scenarios() -> list[tuple[str, str]]:
    return [(b.id, b.description) for b in catalog.BUILTINS.values()]
