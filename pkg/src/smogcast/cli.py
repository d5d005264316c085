"""Command-line surface wiring the pipeline together.

Subcommands: simulate, fit, predict, alerts, exceed, evaluate. Every run
writes its outputs as CSV plus a run manifest (inputs with digests, seeds,
package versions); given the same config and seed, reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .alerts import (
    collect_regional_maxima,
    exceedance_profiles,
    maaqs_exceedance,
    phase_day_counts,
    phase_probabilities,
)
from .config import default_config_text, load_config
from .forecast import PredictiveDraws, prospective_driver, retrospective_driver
from .gibbs import ChainOutput, run_chain
from .panel import load_panel, nearest_station_impute, write_panel
from .scoring import holdout_experiment, write_score_reports
from .spatial import build_car, pairwise_distances
from .synthetic import SynthSpec, generate


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(out_dir: Path, command: str, cfg, seeds: dict, inputs: list) -> None:
    import scipy

    manifest = {
        "command": command,
        "config": cfg.values,
        "seeds": seeds,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "versions": {
            "smogcast": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
        },
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_input_panel(cfg, impute_override=None):
    stations_path = cfg.get("data", "stations")
    obs_path = cfg.get("data", "observations")
    panel = load_panel(stations_path, obs_path, cfg.get_int("data", "warmup_hours"))
    impute = cfg.get_bool("data", "impute") if impute_override is None else impute_override
    if impute and np.any(panel.missing):
        spatial = build_car(pairwise_distances(panel.stations))
        panel = nearest_station_impute(panel, spatial)
    return panel, [stations_path, obs_path]


def _concat_draws(blocks: list) -> PredictiveDraws:
    first = blocks[0]
    return PredictiveDraws(
        target_hours=np.concatenate([b.target_hours for b in blocks]),
        timestamps=[ts for b in blocks for ts in b.timestamps],
        station_ids=first.station_ids,
        region_index=first.region_index,
        o3=np.concatenate([b.o3 for b in blocks]),
        pm=np.concatenate([b.pm for b in blocks]),
        o3_model=np.concatenate([b.o3_model for b in blocks]),
        pm_model=np.concatenate([b.pm_model for b in blocks]),
        pm24=np.concatenate([b.pm24 for b in blocks]),
        o3_8h=np.concatenate([b.o3_8h for b in blocks]),
    )


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else cfg.get_int("simulate", "seed")
    spec = SynthSpec(
        n_stations=cfg.get_int("simulate", "n_stations"),
        n_hours=cfg.get_int("simulate", "n_hours"),
        warmup_hours=cfg.get_int("simulate", "warmup_hours"),
        lag_config=cfg.lag_config(),
        transforms=cfg.transforms(),
        sigma2=(cfg.get_float("simulate", "sigma2_ozone"), cfg.get_float("simulate", "sigma2_pm10")),
        seed=seed,
    )
    panel, truth = generate(spec)
    write_panel(panel, out / "stations.csv", out / "observations.csv")
    truth.save(out / "truth.npz")
    _write_manifest(out, "simulate", cfg, {"simulate": seed}, [])
    print(f"wrote synthetic panel ({panel.n_stations} stations x {panel.n_hours_total} hours) to {out}")
    return 0


def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    panel, inputs = _load_input_panel(cfg)
    chain_cfg = cfg.chain_config(desk_scale=args.desk_scale, seed=args.seed)
    chain = run_chain(
        panel,
        cfg.lag_config(),
        cfg.transforms(),
        chain_cfg,
        checkpoint_path=out / "checkpoint.npz",
        resume_from=args.resume,
    )
    chain.save(out / "chain.npz")
    chain.to_csv(out / "draws.csv")
    if args.resume:
        inputs.append(args.resume)
    _write_manifest(out, "fit", cfg, {"chain": chain_cfg.seed}, inputs)
    print(f"retained {len(chain)} draws -> {out / 'chain.npz'}")
    for name, stats in chain.diagnostics.items():
        print(f"  {name}: mean={stats['mean']:.4g} sd={stats['sd']:.4g} ess~{stats['ess']:.0f}")
    return 0


def cmd_predict(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    panel, inputs = _load_input_panel(cfg)
    chain = ChainOutput.load(args.chain)
    seed = args.seed if args.seed is not None else cfg.get_int("predict", "seed")
    draws = retrospective_driver(chain, panel, hours=cfg.get_int_list("predict", "hours"), seed=seed)
    draws.to_csv(out / "predictions.csv")
    _write_manifest(out, "predict", cfg, {"predict": seed}, inputs + [args.chain])
    print(f"{len(draws.target_hours)} target hours x {draws.n_draws} draws -> {out / 'predictions.csv'}")
    return 0


def cmd_alerts(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    panel, inputs = _load_input_panel(cfg)
    chain = ChainOutput.load(args.chain)
    seed = args.seed if args.seed is not None else cfg.get_int("predict", "seed")
    draws = retrospective_driver(chain, panel, hours=cfg.get_int_list("predict", "hours"), seed=seed)
    maxima = collect_regional_maxima(draws)
    thresholds = cfg.thresholds()
    phase_probabilities(maxima, thresholds).to_csv(out / "phase_probabilities.csv")
    phase_day_counts(maxima, thresholds).to_csv(out / "phase_counts.csv")
    _write_manifest(out, "alerts", cfg, {"predict": seed}, inputs + [args.chain])
    print(f"phase summaries for {len(maxima.day_keys)} days -> {out}")
    return 0


def cmd_exceed(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    panel, inputs = _load_input_panel(cfg)
    chain_cfg = cfg.chain_config(desk_scale=args.desk_scale, seed=args.seed)
    monthly = prospective_driver(
        panel, cfg.lag_config(), cfg.transforms(), chain_cfg, workers=args.workers
    )
    combined = _concat_draws([draws for _, draws in monthly])
    maxima = collect_regional_maxima(combined)
    thresholds = cfg.thresholds()
    maaqs_exceedance(maxima, thresholds).to_csv(out / "exceedance.csv")
    exceedance_profiles(maxima, thresholds).to_csv(out / "exceedance_profiles.csv")
    _write_manifest(out, "exceed", cfg, {"chain": chain_cfg.seed}, inputs)
    months = ", ".join(label for label, _ in monthly)
    print(f"prospective exceedance for months {months} -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    panel, inputs = _load_input_panel(cfg)
    chain_cfg = cfg.chain_config(desk_scale=args.desk_scale, seed=None)
    seed = args.seed if args.seed is not None else cfg.get_int("holdout", "seed")
    reports = holdout_experiment(
        panel,
        cfg.holdout_candidates(),
        cfg.transforms(),
        chain_cfg,
        fraction=cfg.get_float("holdout", "fraction"),
        seed=seed,
        workers=args.workers,
    )
    write_score_reports(reports, out / "evaluation.csv")
    _write_manifest(out, "evaluate", cfg, {"holdout": seed}, inputs)
    best = min(range(len(reports)), key=lambda j: reports[j].es)
    print(f"best energy score: model {best + 1} lags {reports[best].lags} -> {out / 'evaluation.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smogcast", description=__doc__)
    parser.add_argument("--print-config", action="store_true", help="print the default config and exit")
    sub = parser.add_subparsers(dest="command")

    def common(p, workers=False, chain=False, resume=False):
        p.add_argument("--config", default=None, help="key=value config file (defaults used when omitted)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--desk-scale", action="store_true", help="use the small desk-scale chain settings")
        if workers:
            p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        if chain:
            p.add_argument("--chain", required=True, help="chain.npz from a fit run")
        if resume:
            p.add_argument("--resume", default=None, help="checkpoint.npz to continue from")

    common(sub.add_parser("simulate", help="generate a synthetic panel with known truth"))
    common(sub.add_parser("fit", help="fit the model to a panel"), resume=True)
    common(sub.add_parser("predict", help="one-hour-ahead draws at the evaluation hours"), chain=True)
    common(sub.add_parser("alerts", help="phase probabilities and counts"), chain=True)
    common(sub.add_parser("exceed", help="prospective monthly exceedance analysis"), workers=True)
    common(sub.add_parser("evaluate", help="hold-out lag-selection experiment"), workers=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_config:
        print(default_config_text(), end="")
        return 0
    handlers = {
        "simulate": cmd_simulate,
        "fit": cmd_fit,
        "predict": cmd_predict,
        "alerts": cmd_alerts,
        "exceed": cmd_exceed,
        "evaluate": cmd_evaluate,
    }
    if args.command is None:
        parser.print_help()
        return 2
    return handlers[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
