"""Scenario runner, result tables and regression fixtures."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .circuits import BeamSplitter, CircuitSpec, interferometer_model, two_tritter_circuit
from .config import ConfigError, ScenarioConfig, load_config
from .estimate import Scenario, candidate_grid, fit_convergence_constant, run_estimation
from .fisher import qfi_matrix, weighted_bound
from .hilbert import FockState, wrap_phase
from .measure import born_fi_matrix, find_saturation_point, optimal_basis, optimal_povm, probe_adapted_povm
from .probes import (
    CoherentBenchmark,
    GeneralizedNoonSpec,
    coherent_qfi_matrix,
    generalized_noon_qfi,
    make_generalized_noon,
    optimal_alpha_sq,
    separate_noon_qfi,
)

COLUMNS = ("scenario", "config_hash", "sweep", "quantity", "value", "tol_lo", "tol_hi", "provenance")


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    config_hash: str
    sweep: str
    quantity: str
    value: float
    tol_lo: float
    tol_hi: float
    provenance: str

    def accepts(self, value: float) -> bool:
        """Closed band [value - tol_lo, value + tol_hi] around this row's value."""
        if math.isnan(self.value):
            return math.isnan(value)
        return self.value - self.tol_lo <= value <= self.value + self.tol_hi


@dataclass
class ResultTable:
    scenario: str
    config_hash: str
    rows: list[ResultRow] = field(default_factory=list)

    def add(self, sweep: dict, quantity: str, value: float, tolerance: float, provenance: str) -> None:
        value = float(value)
        tol = tolerance * max(1.0, abs(value)) if math.isfinite(value) else 0.0
        self.rows.append(ResultRow(self.scenario, self.config_hash, _sweep_key(sweep), quantity,
                                   value, tol, tol, provenance))

    def lookup(self) -> dict[tuple[str, str], ResultRow]:
        return {(r.sweep, r.quantity): r for r in self.rows}

    def data_lines(self) -> list[str]:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in self.rows:
            writer.writerow([r.scenario, r.config_hash, r.sweep, r.quantity,
                             repr(r.value), repr(r.tol_lo), repr(r.tol_hi), r.provenance])
        return buf.getvalue().splitlines(keepends=True)

    def to_csv(self, timestamp: str | None = None) -> str:
        timestamp = timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
        header = [f"# generated: {timestamp}\n", f"# config_hash: {self.config_hash}\n"]
        return "".join(header + self.data_lines())

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r), sort_keys=True) + "\n" for r in self.rows)

    @classmethod
    def from_csv(cls, text: str) -> ResultTable:
        lines = [line for line in text.splitlines() if line and not line.startswith("#")]
        rows = []
        for rec in csv.DictReader(lines):
            rows.append(ResultRow(rec["scenario"], rec["config_hash"], rec["sweep"], rec["quantity"],
                                  float(rec["value"]), float(rec["tol_lo"]), float(rec["tol_hi"]),
                                  rec["provenance"]))
        if not rows:
            raise ValueError("result table has no data rows")
        return cls(rows[0].scenario, rows[0].config_hash, rows)


def _sweep_key(sweep: dict) -> str:
    return ";".join(f"{k}={_fmt(v)}" for k, v in sweep.items())


def _fmt(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


def _axis(cfg: ScenarioConfig, name: str, default) -> list:
    values = cfg.sweep.get(name, default)
    return [int(v) if float(v).is_integer() else float(v) for v in values]


# -- scenarios ----------------------------------------------------------------

def _scaling_laws(cfg: ScenarioConfig, table: ResultTable) -> None:
    for d in _axis(cfg, "d", range(1, 7)):
        for n in _axis(cfg, "energy", [1, 2, 4, 8]):
            key = {"d": d, "energy": n}
            coherent = weighted_bound(coherent_qfi_matrix(CoherentBenchmark.equal(d, n)))
            # Each NOON pair carries N photons with mean probing energy N/2.
            separate = weighted_bound(separate_noon_qfi([2 * n / d] * d))
            a = optimal_alpha_sq(d)
            general = weighted_bound(generalized_noon_qfi(d, n / a, a))
            table.add(key, "coherent_equal", coherent, cfg.tolerance, "numeric:qfi")
            table.add(key, "separate_noon", separate, cfg.tolerance, "numeric:qfi")
            table.add(key, "generalized_noon_optimal", general, cfg.tolerance, "numeric:qfi")
            table.add(key, "ratio_simultaneous_sequential", general / separate, cfg.tolerance, "numeric:qfi")


def _hong_benchmark(cfg: ScenarioConfig, table: ResultTable) -> None:
    d, N = cfg.probe.d, cfg.probe.N
    weights = {"uniform": d / (d + 1), "optimal": optimal_alpha_sq(d)}
    if cfg.probe.alpha_sq is not None:
        weights["configured"] = cfg.probe.alpha_sq
    for name, alpha_sq in weights.items():
        state = make_generalized_noon(GeneralizedNoonSpec(d, N, alpha_sq))
        key = {"d": d, "N": N, "weights": name}
        table.add(key, "alpha_sq", alpha_sq, cfg.tolerance, "closed-form")
        table.add(key, "trace_qfi_inverse", weighted_bound(qfi_matrix(state)), cfg.tolerance, "numeric:qfi")


def _povm_saturation(cfg: ScenarioConfig, table: ResultTable) -> None:
    N = cfg.probe.N
    for d in _axis(cfg, "d", [cfg.probe.d]):
        alpha_sq = cfg.probe.alpha_sq or optimal_alpha_sq(d)
        state = make_generalized_noon(GeneralizedNoonSpec(d, N, alpha_sq))
        povm = optimal_povm(d) if cfg.povm == "optimal" else probe_adapted_povm(state)
        key = {"d": d, "N": N, "povm": cfg.povm}
        basis = optimal_basis(d)
        table.add(key, "orthonormality_error", np.max(np.abs(basis @ basis.T - np.eye(d + 1))), cfg.tolerance, "numeric")
        table.add(key, "completeness_error", povm.completeness_error(), cfg.tolerance, "numeric")
        found = find_saturation_point(state, povm)
        if found is None:
            table.add(key, "saturated", 0.0, 0.0, "numeric:born-fi")
            phases = 1e-4 * np.arange(1, d + 1) / d
            fi = born_fi_matrix(state, povm, phases)
        else:
            table.add(key, "saturated", 1.0, 0.0, "numeric:born-fi")
            phases, fi = found
        q = qfi_matrix(state).matrix
        table.add(key, "saturation_phase_norm", np.linalg.norm(phases), cfg.tolerance, "numeric:born-fi")
        table.add(key, "max_abs_fi_minus_qfi", np.max(np.abs(fi.matrix - q)), 1e-6, "numeric:born-fi")


def _hom_dip(cfg: ScenarioConfig, table: ResultTable) -> None:
    spec = CircuitSpec(2, (BeamSplitter(0, 1, 0.5),))
    for v in _axis(cfg, "visibility", [0.0, 0.5, 0.95, 1.0]):
        model = interferometer_model(spec, FockState.fock((1, 1)), visibility=v)
        p = model(np.zeros(0))
        table.add({"visibility": v}, "coincidence", p[model.labels.index((1, 1))], cfg.tolerance, "numeric:permanent")


def _estimation_model(cfg: ScenarioConfig):
    est = cfg.estimator
    spec = two_tritter_circuit(with_controls=True)
    if len(est.input_state) != spec.mode_count:
        raise ConfigError(f"estimator.input_state needs {spec.mode_count} entries")
    if len(est.true_phases) != spec.phase_dim:
        raise ConfigError(f"estimator.true_phases needs {spec.phase_dim} entries")
    return interferometer_model(spec, FockState.fock(tuple(est.input_state)), est.visibility)


def _scenarios(cfg: ScenarioConfig, model, kind: str) -> list[Scenario]:
    est = cfg.estimator
    candidates = candidate_grid(model.control_dim, est.candidates_per_dim) if est.candidates_per_dim else None
    return [Scenario(model, est.true_phases, est.repetitions, cfg.seed + r, estimator=kind,
                     particle_count=est.particles, candidates=candidates,
                     fixed_controls=est.fixed_controls) for r in range(est.runs)]


def _smc_convergence(cfg: ScenarioConfig, table: ResultTable) -> None:
    model = _estimation_model(cfg)
    runs = [run_estimation(sc) for sc in _scenarios(cfg, model, "smc")]
    tag = f"simulation:seed={cfg.seed}+run"
    for i in range(cfg.estimator.repetitions):
        key = {"nu": i + 1}
        table.add(key, "mean_trace_cov", np.mean([r[i].utility for r in runs]), cfg.tolerance, tag)
        table.add(key, "mean_crb", np.mean([r[i].crb for r in runs]), cfg.tolerance, tag)
    final = {"nu": cfg.estimator.repetitions}
    within = np.mean([r[-1].utility <= 1.5 * r[-1].crb for r in runs])
    table.add(final, "fraction_within_1.5_crb", within, cfg.tolerance, tag)
    mean_records = [replace(r0, utility=float(np.mean([r[i].utility for r in runs])),
                            crb=float(np.mean([r[i].crb for r in runs])))
                    for i, r0 in enumerate(runs[0])]
    table.add(final, "convergence_tau", fit_convergence_constant(mean_records), cfg.tolerance, tag)


def _mle_benchmark(cfg: ScenarioConfig, table: ResultTable) -> None:
    model = _estimation_model(cfg)
    truth = np.asarray(cfg.estimator.true_phases)
    records = [run_estimation(sc)[0] for sc in _scenarios(cfg, model, "mle")]
    err_sq = np.array([np.sum(wrap_phase(r.estimate - truth) ** 2) for r in records])
    crb = np.array([r.crb for r in records])
    tag = f"simulation:seed={cfg.seed}+run"
    key = {"shots": cfg.estimator.repetitions}
    table.add(key, "fraction_within_3sigma", np.mean(np.sqrt(err_sq) <= 3 * np.sqrt(crb)), cfg.tolerance, tag)
    table.add(key, "mean_error_sq_over_crb", np.mean(err_sq / crb), cfg.tolerance, tag)


RUNNERS = {
    "scaling-laws": _scaling_laws,
    "hong-benchmark": _hong_benchmark,
    "povm-saturation": _povm_saturation,
    "hom-dip": _hom_dip,
    "smc-convergence": _smc_convergence,
    "mle-benchmark": _mle_benchmark,
}


def run_scenario(cfg: ScenarioConfig) -> ResultTable:
    """Execute a scenario; the same config always yields the same rows."""
    table = ResultTable(cfg.scenario, cfg.config_hash())
    try:
        RUNNERS[cfg.scenario](cfg, table)
    except ConfigError:
        raise
    except Exception as exc:
        raise RuntimeError(f"scenario {cfg.scenario!r} (seed {cfg.seed}) failed: {exc}") from exc
    return table


def write_table(table: ResultTable, out_dir, stem: str, formats=("csv", "jsonl")) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for fmt in formats:
        path = out_dir / f"{stem}.{fmt}"
        path.write_text(table.to_csv() if fmt == "csv" else table.to_jsonl())
        paths.append(path)
    return paths


# -- fixtures -----------------------------------------------------------------

@dataclass
class FixtureResult:
    name: str
    passed: bool
    messages: list[str] = field(default_factory=list)


def compare_tables(golden: ResultTable, actual: ResultTable) -> list[str]:
    problems = []
    if golden.config_hash != actual.config_hash:
        problems.append(f"config hash {actual.config_hash} differs from golden {golden.config_hash}")
    found = actual.lookup()
    for (sweep, quantity), row in golden.lookup().items():
        got = found.get((sweep, quantity))
        if got is None:
            problems.append(f"missing row {quantity} at {sweep}")
        elif not row.accepts(got.value):
            problems.append(f"{quantity} at {sweep}: {got.value!r} outside "
                            f"[{row.value - row.tol_lo!r}, {row.value + row.tol_hi!r}]")
    return problems


def verify_fixtures(path) -> list[FixtureResult]:
    """Rerun every ``<name>.yaml`` in ``path`` against its golden ``<name>.csv``."""
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"fixture directory {path} does not exist")
    configs = sorted(path.glob("*.yaml"))
    results = []
    for cfg_path in configs:
        name = cfg_path.stem
        golden_path = cfg_path.with_suffix(".csv")
        if not golden_path.exists():
            results.append(FixtureResult(name, False, [f"golden file {golden_path.name} is missing"]))
            continue
        try:
            golden = ResultTable.from_csv(golden_path.read_text())
            actual = run_scenario(load_config(cfg_path))
        except (ConfigError, RuntimeError, ValueError) as exc:
            results.append(FixtureResult(name, False, [str(exc)]))
            continue
        problems = compare_tables(golden, actual)
        results.append(FixtureResult(name, not problems, problems))
    for golden_path in sorted(path.glob("*.csv")):
        if not golden_path.with_suffix(".yaml").exists():
            results.append(FixtureResult(golden_path.stem, False, [f"config {golden_path.stem}.yaml is missing"]))
    return results
