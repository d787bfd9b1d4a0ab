"""Command-line front end: ``ffstlab <command> [--config PATH] [--set KEY=VALUE ...]``.

Exit codes: 0 success, 1 configuration error, 2 numeric failure.
Data files are byte-identical across reruns with the same configuration and
seed; the wall-clock timestamp lives only in the ``*.meta.json`` sidecar.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .chain import ChainSpec, DisorderModel, build_coupling_matrix, make_uniform_spec, sample_disorder
from .config import ConfigError, ExperimentConfig, atomic_write, csv_text, json_text, load_config
from .disorder import EnsembleSpec, compensation_study, localization_profile, run_ensemble
from .errors import InvalidArgument, NumericFailure
from .fermions import (
    analytic_infidelity,
    analyze_modes,
    infidelity_bound,
    leakage,
    max_coupling,
    pick_resonant_mode,
    transfer_time,
)
from .oracle import Ensemble, average_fidelity, encoded_transfer, jw_spectrum_check, single_transfer_channel

log = logging.getLogger("ffstlab")

SCHEMA_VERSION = 1
MODES_COLUMNS = ("k", "energy", "t_left", "t_right", "participation", "resonant")
SWEEP_COLUMNS = ("g_over_kappa", "tau", "analytic", "bound", "leakage", "oracle")
SCALING_COLUMNS = ("n_chain", "g_max", "tau_min")


class Context:
    def __init__(self, config: ExperimentConfig, out: Path, seed: int, threads: int, argv: list[str]):
        self.config = config
        self.out = out
        self.seed = seed
        self.threads = threads
        self.argv = argv
        self.written: list[Path] = []
        self.notes: dict = {}

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        atomic_write(path, text)
        meta = {
            "schema_version": SCHEMA_VERSION,
            "command": self.config.command,
            "argv": self.argv,
            "seed": self.seed,
            "version": __version__,
            "written_at": datetime.now(timezone.utc).isoformat(),
            **self.notes,
        }
        atomic_write(self.out / f"{name}.meta.json", json_text(meta))
        self.written.append(path)
        return path


# ---------------------------------------------------------------------------
# config -> domain objects


def chain_from_config(cfg: ExperimentConfig) -> ChainSpec:
    if cfg.has("spec_file"):
        path = Path(cfg.get_str("spec_file"))
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read spec_file {path}: {exc}") from exc
        return ChainSpec.from_json(text) if path.suffix == ".json" else ChainSpec.from_keyvalue(text)
    N = cfg.get_int("n_chain")
    if N < 1:
        raise ConfigError(f"{cfg.origin.get('n_chain', 'default')}: n_chain must be positive")
    kappa = cfg.get_float_list("kappa", [1.0])
    if len(kappa) == 1:
        kappa = kappa * (N - 1)
    g = cfg.get_float("g", 0.01 * float(np.mean(kappa)) if kappa else 0.01)
    return ChainSpec(
        n_chain=N,
        kappa=kappa,
        onsite=cfg.get_float_list("onsite", [0.0] * N),
        g_left=cfg.get_float("g_left", g),
        g_right=cfg.get_float("g_right", g),
        delta=cfg.get_float("delta", 0.0),
    )


def disorder_from_config(cfg: ExperimentConfig, seed: int) -> DisorderModel:
    return DisorderModel(
        kind=cfg.get_str("disorder_kind", "coupling"),
        distribution=cfg.get_str("disorder_distribution", "uniform-relative"),
        strength=cfg.get_float("disorder_strength", 0.0),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# commands


def cmd_modes(ctx: Context) -> None:
    cfg = ctx.config
    spec = chain_from_config(cfg)
    model = disorder_from_config(cfg, ctx.seed)
    spec = sample_disorder(spec, model, cfg.get_int("realization", 0))
    modes = analyze_modes(build_coupling_matrix(spec))
    try:
        resonant = pick_resonant_mode(modes, spec.delta).k
    except NumericFailure as exc:
        log.warning("no unique resonant mode: %s", exc)
        resonant = None
    rows = [
        (k, float(modes.energies[k - 1]), float(modes.t_left[k - 1]), float(modes.t_right[k - 1]),
         float(modes.participation[k - 1]), k == resonant)
        for k in range(1, modes.n_chain + 1)
    ]
    text = csv_text(MODES_COLUMNS, rows)
    ctx.write("modes.csv", text)
    sys.stdout.write(text)


def _g_grid(cfg: ExperimentConfig) -> list[float]:
    if cfg.has("g_values"):
        return cfg.grid("g_values", cfg.get_float_list("g_values"))
    lo, hi = cfg.get_float("g_min", 0.005), cfg.get_float("g_max", 0.1)
    points = cfg.get_int("g_points", 20)
    if not (0 < lo and points >= 1 and (hi > lo or points == 1)):
        raise ConfigError(f"{cfg.origin.get('g_min', 'default')}: invalid log grid g_min={lo}, g_max={hi}, g_points={points}")
    return cfg.grid("g_min", [float(x) for x in np.geomspace(lo, hi, points)])


def sweep_row(N: int, kappa: float, ratio: float, with_oracle: bool, threads: int = 1) -> tuple:
    """One row of the infidelity-versus-coupling table."""
    spec = make_uniform_spec(N, kappa, ratio * kappa)
    K = build_coupling_matrix(spec)
    modes = analyze_modes(K)
    z = pick_resonant_mode(modes, spec.delta).k
    tau = transfer_time(modes, z)
    oracle = encoded_transfer(spec, tau, threads=threads).infidelity if with_oracle else None
    return (ratio, tau, analytic_infidelity(modes, z, tau), infidelity_bound(modes, z), leakage(K, tau), oracle)


def cmd_sweep_g(ctx: Context) -> None:
    cfg = ctx.config
    N = cfg.get_int("n_chain", 7)
    if N % 2 == 0:
        raise ConfigError(f"{cfg.origin.get('n_chain', 'default')}: sweep-g needs an odd chain length")
    kappa = cfg.get_float("kappa", 1.0)
    grid = _g_grid(cfg)
    feasible = cfg.get_bool("oracle", True) and N + 4 <= cfg.get_int("oracle_cap", 16)
    budget = cfg.get_float("oracle_budget_s", 600.0)
    start = time.monotonic()
    rows = []
    for ratio in grid:
        use_oracle = feasible and time.monotonic() - start <= budget
        if feasible and not use_oracle and "partial" not in ctx.notes:
            log.warning("oracle budget of %.0f s exhausted; remaining oracle cells left empty", budget)
            ctx.notes["partial"] = True
        rows.append(sweep_row(N, kappa, ratio, use_oracle, ctx.threads))
    ctx.write("sweep_g.csv", csv_text(SWEEP_COLUMNS, rows))
    print(f"sweep-g: {len(rows)} points, oracle {'on' if feasible else 'off'}")


def scaling_table(n_values: list[int], epsilon0: float, kappa: float = 1.0) -> list[tuple[int, float, float]]:
    rows = []
    for N in n_values:
        modes = analyze_modes(build_coupling_matrix(make_uniform_spec(N, kappa, 1.0)))
        limit = max_coupling(modes, pick_resonant_mode(modes, 0.0).k, epsilon0)
        rows.append((N, limit.g_max, limit.tau_min))
    return rows


def linear_fit(x, y) -> dict:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - float(np.sum(residual**2) / total) if total > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2}


def cmd_scaling(ctx: Context) -> None:
    cfg = ctx.config
    if cfg.has("n_values"):
        n_values = cfg.get_int_list("n_values")
    else:
        n_values = list(range(cfg.get_int("n_min", 5), cfg.get_int("n_max", 41) + 1, 2))
    cfg.grid("n_values", [float(n) for n in n_values])
    if any(n % 2 == 0 or n < 1 for n in n_values):
        raise ConfigError(f"{cfg.origin.get('n_values', 'default')}: scaling needs positive odd chain lengths")
    epsilon0 = cfg.get_float("epsilon0", 1e-3)
    rows = scaling_table(n_values, epsilon0, cfg.get_float("kappa", 1.0))
    fit = linear_fit([r[0] for r in rows], [r[2] for r in rows]) if len(rows) > 1 else None
    footer = [] if fit is None else [f"fit slope={fit['slope']!r} intercept={fit['intercept']!r} r2={fit['r2']!r}"]
    ctx.write("scaling.csv", csv_text(SCALING_COLUMNS, rows, footer))
    ctx.write("scaling_summary.json", json_text({"schema_version": SCHEMA_VERSION, "epsilon0": epsilon0, "fit": fit}))
    print(f"scaling: {len(rows)} chain lengths" + ("" if fit is None else f", R^2 = {fit['r2']:.6f}"))


def cmd_disorder(ctx: Context) -> None:
    cfg = ctx.config
    spec = EnsembleSpec(
        base=chain_from_config(cfg),
        model=disorder_from_config(cfg, ctx.seed),
        realizations=cfg.get_int("realizations", 100),
        epsilon0=cfg.get_float("epsilon0", 1e-3),
        compensate=cfg.get_bool("compensate", False),
    )
    study = cfg.get_str("study", "ensemble")
    if study == "ensemble":
        stats = run_ensemble(spec, ctx.threads)
        ctx.write("disorder.csv", stats.to_csv())
        ctx.write("disorder_summary.json", json_text(stats.summary_dict()))
        print(f"disorder: median leakage {stats.summary['leakage'].median!r}, failure rate {stats.failure_rate!r}")
    elif study == "compensation":
        paired = compensation_study(spec, ctx.threads)
        ctx.write("disorder_compensated.csv", paired.compensated.to_csv())
        ctx.write("disorder_uncompensated.csv", paired.uncompensated.to_csv())
        summary = {
            "schema_version": SCHEMA_VERSION,
            "compensated": paired.compensated.summary_dict(),
            "uncompensated": paired.uncompensated.summary_dict(),
            "improved_fraction": paired.improved_fraction,
        }
        ctx.write("disorder_summary.json", json_text(summary))
        print(f"disorder: compensation improves or ties {paired.improved_fraction:.3f} of realizations")
    elif study == "profile":
        table = localization_profile(spec, ctx.threads)
        ctx.write("localization_profile.csv", csv_text(("k", "median_participation"), table))
        print(f"disorder: participation profile over {len(table)} modes")
    else:
        raise ConfigError(f"{cfg.origin.get('study', 'default')}: study must be ensemble, compensation or profile")


def cmd_oracle_compare(ctx: Context) -> None:
    cfg = ctx.config
    base = chain_from_config(cfg)
    model = disorder_from_config(cfg, ctx.seed)
    realizations = cfg.get_int("realizations", 0)
    tol = cfg.get_float("tolerance", 1e-9)
    checks = [("clean", base)] + [(f"realization-{i}", sample_disorder(base, model, i)) for i in range(realizations)]
    entries = []
    for label, spec in checks:
        result = jw_spectrum_check(spec, tol)
        entries.append({"label": label, "n_chain": spec.n_chain, "max_deviation": result.max_deviation,
                        "passed": result.passed})
    report = {
        "schema_version": SCHEMA_VERSION,
        "check": "jordan-wigner-spectral-equivalence",
        "tolerance": tol,
        "passed": all(e["passed"] for e in entries),
        "entries": entries,
    }
    ctx.write("oracle_compare.json", json_text(report))
    print(f"oracle-compare: {'pass' if report['passed'] else 'FAIL'} ({len(entries)} spectra)")


def cmd_encoded(ctx: Context) -> None:
    cfg = ctx.config
    spec = chain_from_config(cfg)
    modes = analyze_modes(build_coupling_matrix(spec))
    z = pick_resonant_mode(modes, spec.delta).k
    tau = cfg.get_float("tau", transfer_time(modes, z))
    samples = cfg.get_int("ensemble_samples", 0)
    ensemble = Ensemble() if samples == 0 else Ensemble.sampled(samples, ctx.seed)
    result = encoded_transfer(spec, tau, ensemble, decode=cfg.get_bool("decode", True), threads=ctx.threads)
    report = result.to_dict()
    report["tau"] = tau
    report["mode_index"] = z
    report["infidelity_bound"] = infidelity_bound(modes, z)
    report["analytic_infidelity"] = analytic_infidelity(modes, z, tau)
    if cfg.get_bool("single", True):
        single = single_transfer_channel(spec, tau, ensemble, threads=ctx.threads)
        report["single_transfer"] = {"average_fidelity": average_fidelity(single), "channel": single.to_dict()}
    ctx.write("encoded.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"encoded: F = {result.average_fidelity!r}")


COMMANDS = {
    "modes": cmd_modes,
    "sweep-g": cmd_sweep_g,
    "scaling": cmd_scaling,
    "disorder": cmd_disorder,
    "oracle-compare": cmd_oracle_compare,
    "encoded": cmd_encoded,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ffstlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="key=value (sections per command) or JSON config file")
    parser.add_argument("--seed", type=int, help="unsigned 64-bit seed for disorder and sampling (default: config 'seed' or 0)")
    parser.add_argument("--out", default=".", help="output directory (default: current directory)")
    parser.add_argument("--threads", type=int, default=None, help="worker threads, 0 = one per CPU (default 1)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key; may be repeated")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config, args.command, args.overrides)
        seed = args.seed if args.seed is not None else cfg.get_int("seed", 0)
        threads = args.threads if args.threads is not None else cfg.get_int("threads", 1)
        if not 0 <= seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if threads < 0:
            raise ConfigError("--threads must be >= 0")
        ctx = Context(cfg, Path(args.out), seed, threads, argv)
        COMMANDS[args.command](ctx)
    except NumericFailure as exc:
        log.error("numeric failure: %s", exc)
        return 2
    except (InvalidArgument, ValueError) as exc:
        log.error("configuration error: %s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
