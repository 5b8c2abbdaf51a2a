"""Seeded two-phase experiments: freeze the opponents, then generate and score runs.

Runs are produced in fixed-size chunks. Each chunk reduces its records to
a few arrays right away, so memory stays flat for large run counts. Chunks
may run on worker threads; results are merged by chunk index, so the
report does not depend on the worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .adversary import (
    CheatingControl,
    EvaluationTable,
    check_roster,
    default_suite,
    evaluation_table,
    run_estimates,
)
from .distill import distill_chain, estimate_bsc
from .protocol import ProtocolParams, calibrate_tau, run_instance
from .rng import stream

SCOPE_NOTE = (
    "Opponent comparison covers the listed strategies only; "
    "it does not quantify over every restricted strategy."
)
REFERENCE = "B"


@dataclass(frozen=True)
class DistillParams:
    L: int = 3
    block: int = 16
    passes: int = 4
    out_len: int = 64

    def __post_init__(self):
        if self.L < 1 or self.block < 2 or self.passes < 1 or self.out_len < 0:
            raise ValueError("distillation needs L >= 1, block >= 2, passes >= 1, out_len >= 0")

    def to_json(self) -> dict:
        return {"L": self.L, "block": self.block, "passes": self.passes, "out_len": self.out_len}


_CONFIG_KEYS = {
    "protocol", "runs", "master_seed", "calibration_runs", "strategies", "distill",
    "target_error", "target_leak", "workers", "chunk", "output",
}


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    runs: int = 10_000
    master_seed: int = 0
    calibration_runs: int = 2000
    strategies: tuple | None = None  # None = the full default suite
    distill: DistillParams = field(default_factory=DistillParams)
    target_error: float = 1e-3
    target_leak: float = 0.1
    workers: int = 1
    chunk: int = 500
    output: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.calibration_runs < 1 and self.protocol.tau is None:
            raise ValueError("calibration_runs must be >= 1 when tau is not fixed")
        if self.workers < 1 or self.chunk < 1:
            raise ValueError("workers and chunk must be >= 1")
        for name in ("target_error", "target_leak"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentConfig":
        unknown = set(doc) - _CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(doc)
        if "protocol" in kw:
            kw["protocol"] = ProtocolParams.from_json(kw["protocol"])
        if "distill" in kw:
            kw["distill"] = DistillParams(**kw["distill"])
        if kw.get("strategies") is not None:
            kw["strategies"] = tuple(kw["strategies"])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def with_seed(self, seed: int) -> "ExperimentConfig":
        doc = self.to_json()
        doc["master_seed"] = int(seed)
        return ExperimentConfig.from_json(doc)

    def to_json(self) -> dict:
        return {
            "protocol": self.protocol.to_json(),
            "runs": self.runs,
            "master_seed": self.master_seed,
            "calibration_runs": self.calibration_runs,
            "strategies": list(self.strategies) if self.strategies is not None else None,
            "distill": self.distill.to_json(),
            "target_error": self.target_error,
            "target_leak": self.target_leak,
            "workers": self.workers,
            "chunk": self.chunk,
            "output": dict(self.output),
        }


@dataclass(frozen=True)
class Elaboration:
    """Everything fixed before the first run exists."""

    strategies: tuple
    controls: tuple
    params: ProtocolParams


def elaborate(cfg: ExperimentConfig) -> Elaboration:
    p = cfg.protocol
    suite = default_suite(p.n, p.k)
    if cfg.strategies is not None:
        by_name = {s.name: s for s in suite}
        missing = [name for name in cfg.strategies if name not in by_name]
        if missing:
            raise ValueError(f"unknown strategies {missing}; available: {sorted(by_name)}")
        suite = [by_name[name] for name in cfg.strategies]
    controls = (CheatingControl(k=p.k),)
    check_roster(suite, controls, REFERENCE)
    tau = p.tau if p.tau is not None else calibrate_tau(p, cfg.calibration_runs, cfg.master_seed)
    return Elaboration(tuple(suite), controls, p.with_tau(tau))


@dataclass
class ChunkResult:
    va: np.ndarray
    vb: np.ndarray
    favorable: np.ndarray
    estimates: dict
    psi_regenerations: int
    run_regenerations: int


def _run_chunk(elab: Elaboration, master_seed: int, start: int, stop: int) -> ChunkResult:
    va, vb, fav, per = [], [], [], []
    psi_regen = run_regen = 0
    for r in range(start, stop):
        rec = run_instance(elab.params, stream(master_seed, "run", r))
        va.append(rec.vA)
        vb.append(rec.vB)
        fav.append(rec.favorable)
        per.append(run_estimates(elab.strategies, elab.controls, rec))
        psi_regen += rec.alice.psi_regenerations + rec.bob.psi_regenerations
        run_regen += rec.alice.run_regenerations + rec.bob.run_regenerations
    names = [s.name for s in elab.strategies] + [c.name for c in elab.controls]
    est = {name: np.array([e[name] for e in per]) for name in names}
    return ChunkResult(np.array(va), np.array(vb), np.array(fav, dtype=bool), est, psi_regen, run_regen)


def instantiate(cfg: ExperimentConfig, elab: Elaboration) -> ChunkResult:
    bounds = [(s, min(s + cfg.chunk, cfg.runs)) for s in range(0, cfg.runs, cfg.chunk)]
    if cfg.workers == 1:
        parts = [_run_chunk(elab, cfg.master_seed, a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(lambda ab: _run_chunk(elab, cfg.master_seed, *ab), bounds))
    return ChunkResult(
        np.concatenate([p.va for p in parts]),
        np.concatenate([p.vb for p in parts]),
        np.concatenate([p.favorable for p in parts]),
        {name: np.concatenate([p.estimates[name] for p in parts]) for name in parts[0].estimates},
        sum(p.psi_regenerations for p in parts),
        sum(p.run_regenerations for p in parts),
    )


@dataclass
class StatsReport:
    config: ExperimentConfig
    tau: float
    favorable_rate: float
    evaluation: EvaluationTable
    bsc: dict
    distillation: dict | None
    psi_regenerations: int
    run_regenerations: int
    version: str = __version__

    @property
    def key_len(self) -> int:
        return 0 if self.distillation is None else int(self.distillation["key_len"])

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "master_seed": self.config.master_seed,
            "config": self.config.to_json(),
            "tau": self.tau,
            "runs": self.evaluation.runs,
            "favorable_runs": self.evaluation.favorable_runs,
            "favorable_rate": self.favorable_rate,
            "evaluation": self.evaluation.to_json(),
            "bsc": self.bsc,
            "distillation": self.distillation,
            "key_len": self.key_len,
            "psi_regenerations": self.psi_regenerations,
            "run_regenerations": self.run_regenerations,
            "scope": SCOPE_NOTE,
        }


def _finite_or_none(v):
    return None if v is None or (isinstance(v, float) and not math.isfinite(v)) else v


def run_experiment(cfg: ExperimentConfig, distill: bool = True) -> StatsReport:
    """Elaborate, instantiate, aggregate, then distill the favorable runs' bits.

    Distillation reads the favorable flag, which real parties never learn;
    it measures what the favorable-case channel could yield.
    """
    elab = elaborate(cfg)
    tau = float(elab.params.tau)
    res = instantiate(cfg, elab)
    estimates = {REFERENCE: res.vb, **res.estimates}
    table = evaluation_table(res.va, estimates, res.favorable, tau)

    fav = res.favorable
    bits_a = (res.va[fav] >= tau).astype(np.uint8)
    bits_b = (res.vb[fav] >= tau).astype(np.uint8)
    eve = {s.name: (res.estimates[s.name][fav] >= tau).astype(np.uint8) for s in elab.strategies}
    bsc = {}
    if bits_a.size:
        bsc["A-B"] = estimate_bsc(bits_a, bits_b).to_json()
        for name, e in eve.items():
            bsc[f"A-E:{name}"] = estimate_bsc(bits_a, e).to_json()

    report_distill = None
    if distill and bits_a.size:
        d = cfg.distill
        rep = distill_chain(bits_a, bits_b, d.L, d.block, d.passes, d.out_len, cfg.master_seed, eve)
        report_distill = rep.to_json()
        eve_bias = max((1 - 2 * e for e in rep.err_e.values() if math.isfinite(e)), default=0.0)
        report_distill["eve_advantage"] = max(0.0, eve_bias)
        report_distill["meets_target_error"] = rep.residual_rate <= cfg.target_error
        report_distill["meets_target_leak"] = report_distill["eve_advantage"] <= cfg.target_leak
        report_distill["err_e"] = {k: _finite_or_none(v) for k, v in rep.err_e.items()}
        report_distill["err_b"] = _finite_or_none(rep.err_b)

    return StatsReport(
        cfg, tau, float(fav.mean()), table, bsc, report_distill, res.psi_regenerations, res.run_regenerations
    )


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit_report(report: StatsReport, path, fmt: str = "json") -> Path:
    path = Path(path)
    if fmt == "json":
        text = canonical_json(report.to_json())
    elif fmt == "csv":
        text = report.evaluation.to_csv()
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path.write_text(text)
    return path
