"""Command line: train | run | openloop | report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 run failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .metrics.openloop import OpenLoopScores, open_loop_scores
from .prediction.data import DataError, generate_synthetic_crowd, load_eth_format, sliding_windows
from .prediction.history import PedestrianHistory
from .prediction.imle import fit
from .prediction.network import init_model, load_model, save_model
from .prediction.predictors import CvPredictor, LearnedPredictor
from .report import build_report, format_table, write_report
from .simulation.runner import run_closed_loop
from .simulation.simlog import SimLogError, read_simlog

log = logging.getLogger("crowdnav_mpc")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUN = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _learned(cfg: RunConfig, model_path: str | None, seed: int) -> LearnedPredictor:
    path = model_path or cfg.predictor.model
    if not path:
        raise DataError("the learned predictor needs a model file (--model or predictor.model in the config)")
    if not Path(path).is_file():
        raise DataError(f"model file not found: {path}")
    try:
        model = load_model(path)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot load model {path}: {exc}") from exc
    return LearnedPredictor(model, seed)


def make_predictor(kind: str, cfg: RunConfig, model_path: str | None = None, seed: int | None = None):
    seed = cfg.seed if seed is None else seed
    if kind == "cv":
        return CvPredictor(cfg.predictor.m, cfg.predictor.sigma_v, seed)
    if kind == "learned":
        return _learned(cfg, model_path, seed)
    raise UsageError(f"unknown predictor {kind!r}")


# ---- train ---------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = _config(args)
    tr = cfg.training
    tcfg = tr.config if args.epochs is None else replace(tr.config, epochs=args.epochs)
    n_h, n = cfg.sim.n_h, cfg.sim.n_pred
    if args.source == "synthetic":
        syn = tr.synthetic
        ds = generate_synthetic_crowd(syn, cfg.seed, n_h, n)
        hist, fut, source = ds.hist, ds.future, "synthetic"
    else:
        data = load_eth_format(args.source)
        hist, fut, _ = sliding_windows(data.tracks, n_h, n)
        source = str(args.source)
    if len(hist) == 0:
        raise DataError("no training windows of length n_h + n")
    model = init_model(tuple(tr.hidden), tr.noise_dim, n_h, n, m=cfg.predictor.m, seed=cfg.seed,
                       dt_obs=cfg.sim.dt_obs)
    try:
        trained, report = fit(model, hist, fut, tcfg, seed=cfg.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(trained, out)
    doc = {"source": source, "seed": cfg.seed, "epochs_requested": tcfg.epochs, **report.as_dict()}
    if tcfg.epochs == 0:
        doc["note"] = "zero training epochs; model equals its initialization"
    rpt = out.with_suffix(".report.json")
    rpt.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    print(f"model: {out} ({report.n_params} parameters)")
    print(f"validation loss {report.val_loss[0]:.4f} -> best {min(report.val_loss):.4f} "
          f"(epoch {report.best_epoch}, stopped {report.stopped_epoch})")
    print(f"report: {rpt}")
    return EXIT_OK


# ---- run -----------------------------------------------------------------

def _select(cfg: RunConfig, scenario: str, seed: int):
    pool = cfg.seeded_scenarios(seed)
    if scenario == "all":
        return pool
    by_name = {s.name: s for s in pool}
    chosen = []
    for name in scenario.split(","):
        if name not in by_name:
            raise UsageError(f"unknown scenario {name!r}; valid names: all, {', '.join(by_name)}")
        chosen.append(by_name[name])
    return chosen


def _one_run(job):
    scenario, predictor, cfg, path = job
    lg = run_closed_loop(scenario, predictor, cfg.planner, cfg.sim, cfg.layout)
    lg.write(path)
    solve = np.array([s for _, _, s in lg.timing]) if lg.timing else np.zeros(1)
    return {"scenario": scenario.name, "predictor": predictor.name, "n_peds": lg.n_peds, "seed": scenario.seed,
            "log": path.name, "verdict": lg.verdict, "n_cycles": len(lg.cycles), "digest": lg.digest(),
            "diagnostics": lg.diagnostics}, (float(solve.mean()), float(np.percentile(solve, 95)))


def cmd_run(args) -> int:
    cfg = _config(args)
    kinds = ["learned", "cv"] if args.predictor == "both" else [args.predictor]
    scenarios = _select(cfg, args.scenario, cfg.seed)
    predictors = [make_predictor(k, cfg, args.model) for k in kinds]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(sc, p, cfg, out / f"{sc.name}__{p.name}.jsonl") for sc in scenarios for p in predictors]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as ex:
            results = list(ex.map(_one_run, jobs))
    else:
        results = [_one_run(j) for j in jobs]
    manifest = {"seed": cfg.seed, "runs": [r for r, _ in results]}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    failed = 0
    for r, (mean_s, p95_s) in results:
        print(f"{r['scenario']:>10} {r['predictor']:>8}  {r['verdict']:<13} cycles {r['n_cycles']:>4}  "
              f"solve mean {mean_s * 1e3:6.1f} ms  p95 {p95_s * 1e3:6.1f} ms")
        failed += r["verdict"] == "failed"
    print(f"{len(results)} runs written to {out}")
    return EXIT_RUN if failed else EXIT_OK


# ---- openloop ------------------------------------------------------------

def dataset_scores(predictor, hist: np.ndarray, fut: np.ndarray, dt_obs: float):
    """Mean open-loop scores of ``predictor`` over (history, future) windows."""
    if len(hist) == 0:
        raise DataError("no windows long enough for n_h + n frames")
    n_h = hist.shape[1]
    hists = [PedestrianHistory(i, hist[i], n_h, dt_obs) for i in range(len(hist))]
    preds = predictor.predict(hists, fut.shape[1], 0)
    rows = [open_loop_scores(p.samples, fut[i]) for i, p in enumerate(preds)]
    a = np.array([[r.ade, r.fde, r.amd, r.amv] for r in rows])
    return OpenLoopScores(*(float(x) for x in a.mean(axis=0)))


def _eth_windows(path, cfg: RunConfig):
    data = load_eth_format(path)
    hist, fut, _ = sliding_windows(data.tracks, cfg.sim.n_h, cfg.sim.n_pred)
    if len(hist) == 0:
        raise DataError(f"{path}: no windows of {cfg.sim.n_h + cfg.sim.n_pred} consecutive frames")
    return hist, fut


def cmd_openloop(args) -> int:
    cfg = _config(args)
    hist, fut = _eth_windows(args.data, cfg)
    kind = "learned" if args.model else args.predictor
    pred = make_predictor(kind, cfg, args.model)
    scores = dataset_scores(pred, hist, fut, cfg.sim.dt_obs)
    doc = {"predictor": kind, "windows": int(len(hist)), **scores.as_dict()}
    text = json.dumps(doc, indent=1, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK


# ---- report --------------------------------------------------------------

def cmd_report(args) -> int:
    cfg = _config(args)
    logs_dir = Path(args.logs)
    paths = sorted(logs_dir.glob("*.jsonl"))
    if not paths:
        raise DataError(f"no SimLogs (*.jsonl) in {logs_dir}")
    logs = [read_simlog(p) for p in paths]
    dataset = None
    if args.eth:
        hist, fut = _eth_windows(args.eth, cfg)
        dataset = {"cv": dataset_scores(make_predictor("cv", cfg), hist, fut, cfg.sim.dt_obs)}
        if args.model or cfg.predictor.model:
            dataset["learned"] = dataset_scores(make_predictor("learned", cfg, args.model), hist, fut, cfg.sim.dt_obs)
    report = build_report(logs, dataset)
    written = write_report(report, args.out)
    print("open loop\n" + format_table(report["open_loop"]))
    print("closed loop\n" + format_table(report["closed_loop"]))
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    p = _Parser(prog="crowdnav-mpc", description="Crowd navigation with MPC and pedestrian prediction.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", parents=[common], help="train the learned predictor")
    t.add_argument("--source", default="synthetic", help="'synthetic' or an ETH-format file")
    t.add_argument("--out", default="model.json", help="model file to write")
    t.add_argument("--epochs", type=int, default=None)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("run", parents=[common], help="run closed-loop scenarios")
    r.add_argument("--scenario", default="all", help="scenario name, comma list, or 'all'")
    r.add_argument("--predictor", choices=["cv", "learned", "both"], default="both")
    r.add_argument("--model", help="model file for the learned predictor")
    r.add_argument("--out", default="runs", help="output directory")
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("openloop", parents=[common], help="score a predictor on an ETH-format file")
    o.add_argument("--data", required=True, help="ETH-format file")
    o.add_argument("--model", help="model file; omit to score CV")
    o.add_argument("--predictor", choices=["cv", "learned"], default="cv")
    o.add_argument("--out", help="optional JSON output file")
    o.set_defaults(func=cmd_openloop)

    rp = sub.add_parser("report", parents=[common], help="build metric tables from SimLogs")
    rp.add_argument("--logs", default="runs", help="directory of SimLogs")
    rp.add_argument("--out", default="report", help="output directory")
    rp.add_argument("--eth", help="ETH-format file for the open-loop vs closed-loop comparison")
    rp.add_argument("--model", help="model file for the dataset comparison")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, DataError, SimLogError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # anything else is a failed run
        log.debug("run failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
