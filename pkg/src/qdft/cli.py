"""Experiment runner: sweeps with a classical baseline next to every record.

Subcommands reproduce the package's benchmark studies end to end:

* ``qdft soft``      - U/t sweep of the 8-site Hubbard ramp chain
* ``qdft dft``       - molecular bundles (one record per bundle file)
* ``qdft map-check`` - spectrum-preservation trials of the qubit mapping

Config can come from ``--config file.json`` (same field names as the
flags); explicit flags win.  Results are written as CSV and JSON with
floats at 12 significant digits; identical config and seed produce
byte-identical files.  Exit codes: 0 success, 2 invalid config,
3 divergence (partial results flushed).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import rng as rngmod
from .auxmap import KsMatrix, aux_to_dense, map_ks_to_aux
from .hubbard import HubbardSpec, build_hubbard_onebody, run_soft_scf
from .moldft import BundleError, load_bundle, run_dft_scf
from .pauli import group_commuting
from .rng import rng_stream
from .scf import ScfDivergenceError, ScfLimits
from .solvers import make_solver
from .vqe import SpsaConfig

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

_SOLVERS = ("classical", "quantum-exact", "quantum-sampled")
_DEFAULT_U_GRID = (0.0, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0)


@dataclass
class ExperimentConfig:
    kind: str = "soft-hubbard"
    solver: str = "classical"
    shots: int = 10**6
    seed: int = 0
    n_layers: int = 4
    optimizer: str = "quasi-newton"
    spsa_iterations: int = 5000
    mixing: float = 0.4
    allocation: str = "per-group"
    out: str = "results"
    # soft-hubbard
    u_grid: tuple[float, ...] = _DEFAULT_U_GRID
    n_sites: int = 8
    n_electrons: int = 4
    # mol-dft
    bundles: tuple[str, ...] = ()
    # map-check
    map_n: int = 8
    map_trials: int = 50

    def validate(self) -> None:
        if self.kind not in ("soft-hubbard", "mol-dft", "map-check"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.solver not in _SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; choose from {_SOLVERS}")
        if self.kind == "mol-dft" and not self.bundles:
            raise ValueError("mol-dft needs at least one --bundle file")
        if self.shots < 1:
            raise ValueError("shots must be positive")
        if self.n_layers < 0:
            raise ValueError("layers must be nonnegative")
        if not 0.0 < self.mixing <= 1.0:
            raise ValueError("mixing must lie in (0, 1]")
        if self.optimizer not in ("quasi-newton", "spsa"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.solver == "quantum-sampled" and self.optimizer != "spsa":
            raise ValueError("quantum-sampled runs use the SPSA optimizer")
        if self.map_trials < 1 or self.map_n < 2:
            raise ValueError("map-check needs N >= 2 and at least one trial")


@dataclass
class ResultRecord:
    sweep_name: str
    sweep_value: float
    solver: str
    shots: int
    seed: int
    e0: float
    e0_classical: float
    iterations: int
    n_pauli_terms: int
    n_groups: int
    orbital_energies: tuple[float, ...] = ()
    occupations: tuple[float, ...] = ()
    wall_time_s: float = 0.0  # logged, never written (keeps files byte-identical)

    @property
    def abs_error(self) -> float:
        return abs(self.e0 - self.e0_classical)


def _fmt(x: float) -> str:
    return f"{float(x):.12g}"


def emit_results(records: list[ResultRecord], fmt: str, path) -> None:
    """Write records with a stable column order and 12-significant-digit floats."""
    if not records:
        raise ValueError("no records to emit")
    sweep_name = records[0].sweep_name
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [sweep_name, "solver", "shots", "seed", "E0", "E0_classical", "abs_error",
                 "iterations", "n_pauli_terms", "n_groups", "orbital_energies", "occupations"]
            )
            for r in records:
                writer.writerow(
                    [_fmt(r.sweep_value), r.solver, r.shots, r.seed, _fmt(r.e0),
                     _fmt(r.e0_classical), _fmt(r.abs_error), r.iterations,
                     r.n_pauli_terms, r.n_groups,
                     ";".join(_fmt(e) for e in r.orbital_energies),
                     ";".join(_fmt(n) for n in r.occupations)]
                )
    elif fmt == "json":
        payload = [
            {
                sweep_name: float(_fmt(r.sweep_value)),
                "solver": r.solver,
                "shots": r.shots,
                "seed": r.seed,
                "E0": float(_fmt(r.e0)),
                "E0_classical": float(_fmt(r.e0_classical)),
                "abs_error": float(_fmt(r.abs_error)),
                "iterations": r.iterations,
                "n_pauli_terms": r.n_pauli_terms,
                "n_groups": r.n_groups,
                "orbital_energies": [float(_fmt(e)) for e in r.orbital_energies],
                "occupations": [float(_fmt(n)) for n in r.occupations],
            }
            for r in records
        ]
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _count_terms(ks: KsMatrix) -> tuple[int, int]:
    aux = map_ks_to_aux(ks)
    return aux.pauli.num_terms, len(group_commuting(aux.pauli))


def _solver_for(config: ExperimentConfig, point_seed: int):
    if config.solver == "classical":
        return make_solver("classical")
    kwargs = dict(n_layers=config.n_layers, seed=point_seed)
    if config.solver == "quantum-sampled":
        kwargs.update(
            shots=config.shots,
            allocation=config.allocation,
            spsa=SpsaConfig(max_iterations=config.spsa_iterations),
        )
    return make_solver(config.solver, **kwargs)


def _soft_records(config: ExperimentConfig) -> list[ResultRecord]:
    records = []
    for idx, u in enumerate(config.u_grid):
        point_seed = config.seed + idx
        spec = HubbardSpec.ramp_chain(float(u), config.n_sites, config.n_electrons)
        started = time.perf_counter()
        try:
            classical = run_soft_scf(spec, mixing=config.mixing)
            if config.solver == "classical":
                state = classical
            else:
                state = run_soft_scf(
                    spec, solver=_solver_for(config, point_seed), mixing=config.mixing
                )
        except ScfDivergenceError as err:
            err.partial_records = records
            raise
        wall = time.perf_counter() - started
        terms = state.diagnostics.get("pauli_terms")
        groups = state.diagnostics.get("measurement_groups")
        if terms is None:
            terms, groups = _count_terms(build_hubbard_onebody(spec, state.occupations))
        records.append(
            ResultRecord(
                sweep_name="U_over_t",
                sweep_value=float(u),
                solver=config.solver,
                shots=config.shots if config.solver == "quantum-sampled" else 0,
                seed=point_seed,
                e0=state.total_energy,
                e0_classical=classical.total_energy,
                iterations=state.iterations,
                n_pauli_terms=terms,
                n_groups=groups,
                orbital_energies=tuple(float(e) for e in state.orbital_energies),
                occupations=tuple(float(n) for n in state.occupations),
                wall_time_s=wall,
            )
        )
        log.info("U/t=%g done in %.2fs (abs_error %.3e)", u, wall, records[-1].abs_error)
    return records


def _dft_records(config: ExperimentConfig) -> list[ResultRecord]:
    records = []
    for idx, path in enumerate(config.bundles):
        point_seed = config.seed + idx
        bundle = load_bundle(path)
        sweep_value = float((bundle.metadata or {}).get("distance", idx))
        started = time.perf_counter()
        try:
            classical = run_dft_scf(bundle, mixing=config.mixing)
            if config.solver == "classical":
                state = classical
            else:
                state = run_dft_scf(
                    bundle, solver=_solver_for(config, point_seed), mixing=config.mixing
                )
        except ScfDivergenceError as err:
            err.partial_records = records
            raise
        wall = time.perf_counter() - started
        terms = state.diagnostics.get("pauli_terms")
        groups = state.diagnostics.get("measurement_groups")
        if terms is None:
            terms, groups = 0, 0
        records.append(
            ResultRecord(
                sweep_name="distance",
                sweep_value=sweep_value,
                solver=config.solver,
                shots=config.shots if config.solver == "quantum-sampled" else 0,
                seed=point_seed,
                e0=state.total_energy,
                e0_classical=classical.total_energy,
                iterations=state.iterations,
                n_pauli_terms=terms,
                n_groups=groups,
                orbital_energies=tuple(float(e) for e in state.orbital_energies),
                occupations=tuple(float(n) for n in state.occupations),
                wall_time_s=wall,
            )
        )
        log.info("bundle %s done in %.2fs (abs_error %.3e)", path, wall, records[-1].abs_error)
    return records


def _map_check_records(config: ExperimentConfig) -> list[ResultRecord]:
    records = []
    dim = 1 << max(1, int(np.ceil(np.log2(config.map_n))))
    for trial in range(config.map_trials):
        rng = rng_stream(config.seed, rngmod.POINT, trial)
        a = rng.normal(size=(config.map_n, config.map_n))
        ks = KsMatrix(h=a + a.T)
        aux = map_ks_to_aux(ks)
        rebuilt = np.sort(np.linalg.eigvalsh(aux_to_dense(aux)))
        expected = np.sort(
            np.concatenate(
                [np.linalg.eigvalsh(ks.h), [aux.padding_value] * (dim - config.map_n)]
            )
        )
        deviation = float(np.max(np.abs(rebuilt - expected)))
        records.append(
            ResultRecord(
                sweep_name="trial",
                sweep_value=float(trial),
                solver="map",
                shots=0,
                seed=config.seed,
                e0=float(rebuilt[0]),
                e0_classical=float(expected[0]),
                iterations=0,
                n_pauli_terms=aux.pauli.num_terms,
                n_groups=len(group_commuting(aux.pauli)),
                orbital_energies=(deviation,),
            )
        )
    return records


def run_experiment(config: ExperimentConfig) -> list[ResultRecord]:
    """Execute the sweep sequentially; per-point seeds advance from config.seed."""
    config.validate()
    if config.kind == "soft-hubbard":
        return _soft_records(config)
    if config.kind == "mol-dft":
        return _dft_records(config)
    return _map_check_records(config)


def _write_outputs(records: list[ResultRecord], out_base: str) -> None:
    base = out_base
    for suffix in (".csv", ".json"):
        if base.endswith(suffix):
            base = base[: -len(suffix)]
    emit_results(records, "csv", base + ".csv")
    emit_results(records, "json", base + ".json")
    log.info("wrote %s.csv and %s.json", base, base)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdft", description=__doc__)
    parser.add_argument("--verbose", "-v", action="store_true", help="INFO logging to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--solver", choices=_SOLVERS)
        p.add_argument("--shots", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--layers", type=int, dest="n_layers")
        p.add_argument("--optimizer", choices=("quasi-newton", "spsa"))
        p.add_argument("--spsa-iterations", type=int, dest="spsa_iterations")
        p.add_argument("--mixing", type=float)
        p.add_argument("--allocation", choices=("per-group", "per-term"))
        p.add_argument("--out")

    soft = sub.add_parser("soft", help="Hubbard ramp-chain sweep")
    common(soft)
    soft.add_argument("--U-grid", dest="u_grid", help="comma-separated U/t values")
    soft.add_argument("--sites", type=int, dest="n_sites")
    soft.add_argument("--electrons", type=int, dest="n_electrons")

    dft = sub.add_parser("dft", help="molecular bundle sweep")
    common(dft)
    dft.add_argument("--bundle", nargs="+", dest="bundles", help="bundle JSON files")

    check = sub.add_parser("map-check", help="spectrum preservation trials")
    common(check)
    check.add_argument("--N", type=int, dest="map_n")
    check.add_argument("--trials", type=int, dest="map_trials")

    return parser


_KIND_BY_COMMAND = {"soft": "soft-hubbard", "dft": "mol-dft", "map-check": "map-check"}


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if args.config:
        with open(args.config) as fh:
            values.update(json.load(fh))
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    values["kind"] = _KIND_BY_COMMAND[args.command]
    for name in known:
        cli_value = getattr(args, name, None)
        if cli_value is not None:
            values[name] = cli_value
    if isinstance(values.get("u_grid"), str):
        values["u_grid"] = tuple(float(x) for x in values["u_grid"].split(","))
    if "u_grid" in values:
        values["u_grid"] = tuple(float(x) for x in values["u_grid"])
    if "bundles" in values:
        values["bundles"] = tuple(str(b) for b in values["bundles"])
    if values.get("solver") == "quantum-sampled" and "optimizer" not in values:
        values["optimizer"] = "spsa"
    return ExperimentConfig(**values)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = _config_from_args(args)
        config.validate()
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as err:
        print(f"invalid config: {err}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        records = run_experiment(config)
    except BundleError as err:
        print(f"invalid config: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ScfDivergenceError as err:
        print(f"diverged: {err}", file=sys.stderr)
        partial = getattr(err, "partial_records", None)
        if partial:
            _write_outputs(partial, config.out)
        return EXIT_DIVERGED

    _write_outputs(records, config.out)
    for r in records:
        log.info("%s=%g wall %.2fs", r.sweep_name, r.sweep_value, r.wall_time_s)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
