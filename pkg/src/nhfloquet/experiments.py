"""Fan experiments out over disorder realizations and write CSV tables."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import config as cfgmod
from .afai import Drive, DriveParams, Lattice, default_particle_sites, occupation_matrix, run_baseline, sample_disorder
from .dephase_loc import LocalizationConfig, run_localization
from .nhdrive import NHNoise, run_nh_afai
from .qcore import random_density_matrix
from .regfix import PauliNoise, TargetSpec, run_correction_protocol

WORKERS_ENV = "NHFLOQUET_WORKERS"


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[tuple]

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])


def realization_seed(base_seed: int, realization: int) -> np.random.SeedSequence:
    """Independent stream per realization; adding realizations never changes earlier ones."""
    return np.random.SeedSequence((base_seed, realization))


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def write_csv(path: Path, table: ResultTable) -> None:
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("# columns: " + ",".join(table.columns) + "\n")
            fh.write(",".join(table.columns) + "\n")
            for row in table.rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def aggregate_q(cycles: np.ndarray, qs: np.ndarray) -> ResultTable:
    """Mean and standard error of Q over realizations; ``qs`` has shape (realizations, cycles)."""
    r = qs.shape[0]
    mean = qs.mean(axis=0)
    err = qs.std(axis=0, ddof=1) / np.sqrt(r) if r > 1 else np.zeros(qs.shape[1])
    return ResultTable(["cycle", "mean_Q", "stderr_Q"], [(int(c), m, e) for c, m, e in zip(cycles, mean, err)])


def _drive(cfg: cfgmod.ExperimentConfig, realization: int) -> Drive:
    lattice = Lattice(cfg.geometry.Lx, cfg.geometry.Ly)
    p = cfg.physics
    params = DriveParams(p.J, p.delta, p.T)
    disorder = sample_disorder(lattice, p.W, p.W_T, realization_seed(cfg.run.base_seed, realization), cfg.run.cycles)
    return Drive(lattice, params, disorder)


def _check_rows(rows: np.ndarray, particles: float, what: str) -> None:
    if rows.size and np.max(np.abs(rows.sum(axis=1) - particles)) > 1e-9:
        raise RuntimeError(f"{what}: row occupations no longer sum to {particles}")


def _task_baseline(cfg, r):
    drive = _drive(cfg, r)
    lattice = drive.lattice
    if cfg.run.initial == "top-half":
        sites = lattice.top_half()
    else:
        sites = cfg.run.sites or default_particle_sites(lattice)
    res = run_baseline(drive, occupation_matrix(sites, lattice), cfg.run.cycles, cfg.run.M_q)
    _check_rows(res.rows, len(sites), "baseline")
    return res


def _task_nh(cfg, r):
    drive = _drive(cfg, r)
    noise = NHNoise(cfg.physics.gamma, cfg.physics.gamma2)
    res = run_nh_afai(drive, cfg.run.cycles, noise, cfg.run.sites, cfg.run.correction_enabled, cfg.run.M_q)
    _check_rows(res.green.rows, 2, "nh sweep")
    _check_rows(res.blue.rows, 2, "baseline")
    return res


def _task_localization(cfg, r):
    drive = _drive(cfg, r)
    loc = cfg.localization
    base = dict(M=cfg.run.M, cycles=cfg.run.cycles, record_stride=loc.record_stride, x0=loc.x0, y0=loc.y0, method=loc.method)
    dephased = run_localization(drive, LocalizationConfig(dephase=True, **base))
    plain = run_localization(drive, LocalizationConfig(dephase=False, **base))
    _check_rows(dephased.rows, 1, "dephased localization")
    _check_rows(plain.rows, 1, "baseline localization")
    return dephased, plain


_TASKS = {
    "afai-baseline": _task_baseline,
    "nh-afai": _task_nh,
    "zero-disorder-test": _task_nh,
    "localization": _task_localization,
}


def _run_task(args):
    cfg, r = args
    with threadpool_limits(1):
        try:
            return _TASKS[cfg.experiment](cfg, r)
        except Exception as exc:
            raise RuntimeError(f"realization {r} aborted: {exc}") from exc


def _fan_out(cfg, workers: int):
    jobs = [(cfg, r) for r in range(cfg.run.realizations)]
    if workers <= 1:
        return [_run_task(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, jobs))


def _workers_from_env() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise cfgmod.ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
    if n < 1:
        raise cfgmod.ConfigError(f"{WORKERS_ENV} must be >= 1")
    return n


def _cycle_table(results, ly: int) -> ResultTable:
    cols = ["realization", "cycle", "Q"] + [f"occ_row{y}" for y in range(ly)]
    rows = []
    for r, res in enumerate(results):
        for c in range(len(res.Q)):
            rows.append((r, c + 1, res.Q[c], *res.rows[c]))
    return ResultTable(cols, rows)


def _q_matrix(results, cycles: int) -> np.ndarray:
    return np.array([res.Q for res in results]).reshape(len(results), cycles)


def run_experiment(cfg: cfgmod.ExperimentConfig, workers: int | None = None, write: bool = True) -> dict[str, ResultTable]:
    """Run the configured experiment and return its tables keyed by output file name.

    With ``write=True`` every table goes to ``cfg.output.directory``.
    Realizations are merged in index order, so the output does not depend on
    ``workers`` (default from the ``NHFLOQUET_WORKERS`` environment variable).
    """
    cfgmod.validate(cfg)
    cfg = cfgmod.effective(cfg)
    workers = _workers_from_env() if workers is None else workers
    name = cfg.experiment
    ly = cfg.geometry.Ly
    cycles = np.arange(1, cfg.run.cycles + 1)
    tables: dict[str, ResultTable] = {}

    if name == "correction-demo":
        tables[f"{name}.csv"] = _correction_demo(cfg)
    elif name == "afai-baseline":
        results = _fan_out(cfg, workers)
        tables[f"{name}.csv"] = _cycle_table(results, ly)
        tables[f"{name}_aggregate.csv"] = aggregate_q(cycles, _q_matrix(results, cfg.run.cycles))
    elif name in ("nh-afai", "zero-disorder-test"):
        results = _fan_out(cfg, workers)
        green = [res.green for res in results]
        blue = [res.blue for res in results]
        tables[f"{name}_green.csv"] = _cycle_table(green, ly)
        tables[f"{name}_blue.csv"] = _cycle_table(blue, ly)
        ga = aggregate_q(cycles, _q_matrix(green, cfg.run.cycles))
        ba = aggregate_q(cycles, _q_matrix(blue, cfg.run.cycles))
        tables[f"{name}_green_aggregate.csv"] = ga
        tables[f"{name}_blue_aggregate.csv"] = ba
        top_g = np.mean([res.top_half_fraction("green") for res in results], axis=0).reshape(-1)
        top_b = np.mean([res.top_half_fraction("blue") for res in results], axis=0).reshape(-1)
        comp = [
            (int(c), g[1], g[2], b[1], b[2], tg, tb)
            for c, g, b, tg, tb in zip(cycles, ga.rows, ba.rows, top_g, top_b)
        ]
        tables[f"{name}_comparison.csv"] = ResultTable(
            ["cycle", "mean_Q_green", "stderr_Q_green", "mean_Q_blue", "stderr_Q_blue", "top_half_green", "top_half_blue"],
            comp,
        )
    elif name == "localization":
        results = _fan_out(cfg, workers)
        for label, idx in (("dephased", 0), ("baseline", 1)):
            series = [res[idx] for res in results]
            cols = ["realization", "substep", "time"] + [f"occ_y{j}" for j in range(ly)]
            rows = [
                (r, int(k), t, *occ)
                for r, s in enumerate(series)
                for k, t, occ in zip(s.substeps, s.times, s.rows)
            ]
            tables[f"{name}_{label}.csv"] = ResultTable(cols, rows)
        agg_rows = []
        for label, idx in (("dephased", 0), ("baseline", 1)):
            series = [res[idx] for res in results]
            times = np.mean([s.times for s in series], axis=0)
            occ = np.mean([s.rows for s in series], axis=0)
            for k, t, o in zip(series[0].substeps, times, occ):
                agg_rows.append((label, int(k), t, *o))
        tables[f"{name}_aggregate.csv"] = ResultTable(
            ["run", "substep", "mean_time"] + [f"mean_occ_y{j}" for j in range(ly)], agg_rows
        )

    if write:
        out = Path(cfg.output.directory)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
        for fname, table in tables.items():
            write_csv(out / fname, table)
    return tables


def _correction_demo(cfg) -> ResultTable:
    c = cfg.correction
    rng = np.random.default_rng(realization_seed(cfg.run.base_seed, 0))
    specs, inputs = [], []
    for _ in range(c.qubits):
        if c.target == "zero":
            spec = TargetSpec(np.array([1, 0]), np.array([0, 1]))
        else:
            spec = TargetSpec.from_good(rng.normal(size=2) + 1j * rng.normal(size=2))
        if c.input == "mixed":
            rho = np.eye(2, dtype=complex) / 2
        elif c.input == "bad":
            rho = np.outer(spec.bad, spec.bad.conj())
        else:
            rho = random_density_matrix(2, rng)
        specs.append(spec)
        inputs.append(rho)
    report = run_correction_protocol(inputs, specs, PauliNoise(c.p_x, c.p_y, c.p_z), c.placement)
    rows = [
        (i, f, s1, s2)
        for i, (f, s1, s2) in enumerate(zip(report.fidelity, report.reg1_entropy, report.reg2_entropy))
    ]
    return ResultTable(["qubit", "fidelity", "reg1_entropy_bits", "reg2_entropy_bits"], rows)
