"""Command-line pipeline: synth, strengths, featurize, train, evaluate, predict, explain.

Every subcommand works inside one run directory (``--out``). Stages read
the subdirectories written by earlier stages and write only their own::

    <out>/data/         synth        matches.csv, teams.csv, players.csv
    <out>/strengths/    strengths    strengths.csv
    <out>/features/     featurize    {train,test}_{classical,sel}.csv, imputation.json
    <out>/models/       train        {task}_{model}_{features}.json
    <out>/reports/      evaluate     {task}_report.csv / .json
    <out>/predictions/  predict      {task}_{model}_{features}.csv
    <out>/explain/      explain      force and importance CSVs

Each stage also writes a manifest with the resolved configuration, its
hash, the seed and SHA-256 digests of every input and output file. Failures
print a JSON error report on stderr and exit non-zero.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import replace
from datetime import date
from pathlib import Path

import numpy as np

from . import __version__
from .cmp import FitConfig
from .data import load_dataset, parse_matches, temporal_split
from .errors import ConfigError, EmptyInputError, HandselError, MissingInputError, UnknownMatchError
from .explain import export_force_data, rank_importance, shap_matrix, tree_shap, write_importance
from .features import (
    CLASSICAL_FEATURES,
    FEATURE_NAMES,
    Dataset,
    MatchContext,
    Outcome,
    assemble_dataset,
    fit_imputation,
)
from .learners import (
    FOREST_DEFAULTS,
    GBT_DEFAULTS,
    TRAINERS,
    TrainConfig,
    TwoTargetModel,
    load_model,
    save_model,
    scoreline,
    train_two_target,
)
from .metrics import ablation_report, format_table, write_report
from .strength import MIN_WINDOW, StrengthProvider
from .synth import SynthConfig, generate_synthetic

logger = logging.getLogger("handsel")

FEATURE_SETS = {"classical": CLASSICAL_FEATURES, "sel": FEATURE_NAMES}
FEATURE_LABELS = {"classical": "classical", "sel": "classical+SEL"}
MODELS = ("forest", "gbt")
TASKS = ("classify", "regress")

EXIT_DOMAIN = 1
EXIT_CONFIG = 2
EXIT_IO = 3

DEFAULTS = {
    "seed": 42,
    "cutoff": None,
    "features": "both",
    "model": "both",
    "task": "classify",
    "data": None,
    "min_window": MIN_WINDOW,
    "synth": {},
    "cmp": {},
    "forest": {},
    "gbt": {},
    "fixtures": None,
    "match_id": None,
    "importance": False,
    "importance_split": "test",
}


# --- configuration -----------------------------------------------------------

def _load_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the ``--config`` file, then explicit flags."""
    cfg = json.loads(json.dumps(DEFAULTS))
    if args.config:
        file_cfg = _load_json(args.config)
        unknown = sorted(set(file_cfg) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        cfg.update(file_cfg)
    for key in ("seed", "cutoff", "features", "model", "task", "data"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if cfg["features"] not in ("classical", "sel", "both"):
        raise ConfigError(f"features must be classical, sel or both, got {cfg['features']!r}")
    if cfg["model"] not in ("forest", "gbt", "both"):
        raise ConfigError(f"model must be forest, gbt or both, got {cfg['model']!r}")
    if cfg["task"] not in TASKS:
        raise ConfigError(f"task must be classify or regress, got {cfg['task']!r}")
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        raise ConfigError(f"seed must be an integer, got {cfg['seed']!r}")
    if cfg["cutoff"] is not None:
        _parse_date(cfg["cutoff"])
    if cfg["importance_split"] not in ("test", "train"):
        raise ConfigError(f"importance_split must be test or train, got {cfg['importance_split']!r}")
    for section in ("synth", "cmp", "forest", "gbt"):
        if not isinstance(cfg[section], dict):
            raise ConfigError(f"config section {section!r} must be an object")
    return cfg


def _parse_date(text) -> date:
    try:
        return date.fromisoformat(str(text))
    except ValueError:
        raise ConfigError(f"invalid date {text!r}; expected YYYY-MM-DD") from None


def _selected(value: str, options) -> list[str]:
    return list(options) if value == "both" else [value]


def _synth_config(cfg) -> SynthConfig:
    try:
        return SynthConfig.from_dict({**cfg["synth"], "seed": cfg["seed"]})
    except TypeError as exc:
        raise ConfigError(f"synth: {exc}") from None


def _fit_config(cfg) -> FitConfig:
    try:
        return FitConfig(**cfg["cmp"])
    except TypeError as exc:
        raise ConfigError(f"cmp: {exc}") from None


def _train_config(cfg, model: str) -> TrainConfig:
    base = FOREST_DEFAULTS if model == "forest" else GBT_DEFAULTS
    try:
        return replace(base, **{**cfg[model], "seed": cfg["seed"]})
    except TypeError as exc:
        raise ConfigError(f"{model}: {exc}") from None


# --- run directory and manifests ---------------------------------------------

def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _rel(path: Path, root: Path) -> str:
    try:
        return path.resolve().relative_to(root.resolve()).as_posix()
    except ValueError:
        return path.as_posix()


class Run:
    """One invocation: resolved config, run root and the files it touched."""

    def __init__(self, command: str, cfg: dict, out: Path):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []
        self.notes: dict = {}
        self._fixture_cache: dict = {}

    def stage_dir(self, name: str) -> Path:
        d = self.out / name
        d.mkdir(parents=True, exist_ok=True)
        return d

    def need(self, path: Path) -> Path:
        if not path.is_file():
            raise MissingInputError(f"required input not found: {path}")
        if path not in self.inputs:
            self.inputs.append(path)
        return path

    def wrote(self, path: Path) -> Path:
        self.outputs.append(path)
        return path

    def data_dir(self) -> Path:
        return Path(self.cfg["data"]) if self.cfg["data"] else self.out / "data"

    def manifest(self, stage: str, name: str = "manifest.json") -> Path:
        cfg = dict(self.cfg)
        for key in ("data", "fixtures"):
            if cfg.get(key):
                cfg[key] = _rel(Path(cfg[key]), self.out)
        canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
        doc = {
            "command": self.command,
            "version": __version__,
            "seed": self.cfg["seed"],
            "config": cfg,
            "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
            "inputs": {_rel(p, self.out): _digest(p) for p in self.inputs},
            "outputs": {_rel(p, self.out): _digest(p) for p in self.outputs},
        }
        if self.notes:
            doc["notes"] = self.notes
        path = self.stage_dir(stage) / name
        path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _load_inputs(run: Run):
    d = run.data_dir()
    for name in ("matches.csv", "teams.csv", "players.csv"):
        run.need(d / name)
    return load_dataset(d)


def _default_cutoff(matches) -> date:
    # April 1 of the final calendar year leaves the season run-in as test set
    return date(max(m.day for m in matches).year, 4, 1)


def _cutoff(run: Run, matches) -> date:
    c = run.cfg["cutoff"]
    return _parse_date(c) if c is not None else _default_cutoff(matches)


def _context(run: Run, matches, teams, players) -> MatchContext:
    provider = StrengthProvider(matches, _fit_config(run.cfg), run.cfg["min_window"])
    return MatchContext(teams, players, provider)


# --- subcommands -------------------------------------------------------------

def cmd_synth(run: Run) -> None:
    cfg = _synth_config(run.cfg)
    league = generate_synthetic(cfg)
    d = run.stage_dir("data")
    for path in league.write(d).values():
        run.wrote(path)
    run.wrote(_write_json(d / "synth_config.json", cfg.to_dict()))
    run.notes = {"matches": len(league.matches), "teams": len(league.teams), "players": len(league.players)}
    run.manifest("data")
    logger.info("wrote %d matches to %s", len(league.matches), d)


STRENGTH_COLUMNS = [
    "match_id", "date", "side", "team_id", "s_attack", "s_defense",
    "attack_lambda", "attack_nu", "defense_lambda", "defense_nu", "n_matches", "window",
]


def cmd_strengths(run: Run) -> None:
    matches, _, _ = _load_inputs(run)
    provider = StrengthProvider(matches, _fit_config(run.cfg), run.cfg["min_window"])
    path = run.stage_dir("strengths") / "strengths.csv"
    skipped = 0
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STRENGTH_COLUMNS)
        for m in sorted(matches, key=lambda m: (m.start_time, m.match_id)):
            for side, team in (("home", m.home_team_id), ("away", m.away_team_id)):
                try:
                    s = provider.get(team, m.day)
                except HandselError:
                    skipped += 1
                    continue
                a, dfn = s.attack_params, s.defense_params
                w.writerow([
                    m.match_id, m.day.isoformat(), side, team, repr(s.s_attack), repr(s.s_defense),
                    repr(a.lam) if a else "", repr(a.nu) if a else "",
                    repr(dfn.lam) if dfn else "", repr(dfn.nu) if dfn else "",
                    s.n_matches, s.window,
                ])
    run.wrote(path)
    run.notes = {"skipped_sides": skipped}
    run.manifest("strengths")


def cmd_featurize(run: Run) -> None:
    matches, teams, players = _load_inputs(run)
    scored = [m for m in matches if m.has_score]
    train, test = temporal_split(scored, _cutoff(run, scored))
    ctx = _context(run, matches, teams, players)
    ctx.imputation = fit_imputation(train, ctx)
    full_train = assemble_dataset(train, ctx, include_sel=True)
    full_test = assemble_dataset(test, ctx, include_sel=True)
    d = run.stage_dir("features")
    for fs in _selected(run.cfg["features"], FEATURE_SETS):
        names = FEATURE_SETS[fs]
        run.wrote(full_train.select(names).write_csv(d / f"train_{fs}.csv"))
        run.wrote(full_test.select(names).write_csv(d / f"test_{fs}.csv"))
    run.wrote(_write_json(d / "imputation.json", ctx.imputation))
    dropped = d / "dropped.csv"
    with dropped.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["split", "match_id", "code", "message"])
        for split, ds in (("train", full_train), ("test", full_test)):
            for row in ds.errors:
                w.writerow([split, *row])
    run.wrote(dropped)
    run.notes = {
        "cutoff": _cutoff(run, scored).isoformat(),
        "train_rows": len(full_train),
        "test_rows": len(full_test),
        "dropped": len(full_train.errors) + len(full_test.errors),
    }
    run.manifest("features")


def _read_features(run: Run, split: str, fs: str) -> Dataset:
    return Dataset.read_csv(run.need(run.out / "features" / f"{split}_{fs}.csv"))


def _model_path(run: Run, task: str, model: str, fs: str) -> Path:
    return run.out / "models" / f"{task}_{model}_{fs}.json"


def cmd_train(run: Run) -> None:
    task = run.cfg["task"]
    d = run.stage_dir("models")
    imputation = json.loads(run.need(run.out / "features" / "imputation.json").read_text(encoding="utf-8"))
    log = {}
    for fs in _selected(run.cfg["features"], FEATURE_SETS):
        data = _read_features(run, "train", fs)
        for name in _selected(run.cfg["model"], MODELS):
            config = _train_config(run.cfg, name)
            trainer = TRAINERS[name]
            if task == "classify":
                model = trainer(data.X, data.outcome, config, "classification", n_classes=3,
                                feature_names=data.feature_names)
                parts = [model]
            else:
                model = train_two_target(data.X, data.home_goals, data.away_goals, trainer, config,
                                         data.feature_names)
                parts = [model.home, model.away]
            for part in parts:
                part.metadata.update({"feature_set": fs, "imputation": imputation,
                                      "cmp": run.cfg["cmp"], "min_window": run.cfg["min_window"]})
            run.wrote(save_model(model, _model_path(run, task, name, fs)))
            log[f"{name}_{fs}"] = {
                "rows": len(data),
                "train_config": config.to_dict(),
                "train_loss": [p.metadata.get("train_loss", [])[-1:] for p in parts],
            }
    run.wrote(_write_json(d / f"train_log_{task}.json", log))
    run.manifest("models", f"manifest_{task}.json")


def _combos(run: Run):
    for name in _selected(run.cfg["model"], MODELS):
        for fs in _selected(run.cfg["features"], FEATURE_SETS):
            yield name, fs


def cmd_evaluate(run: Run) -> None:
    task = run.cfg["task"]
    models, datasets = {}, {}
    for name, fs in _combos(run):
        models[(name, FEATURE_LABELS[fs])] = load_model(run.need(_model_path(run, task, name, fs)))
        datasets[FEATURE_LABELS[fs]] = _read_features(run, "test", fs)
    reports = ablation_report(models, datasets, task)
    d = run.stage_dir("reports")
    run.wrote(write_report(reports, d / f"{task}_report.csv", task))
    run.wrote(write_report(reports, d / f"{task}_report.json", task))
    run.manifest("reports", f"manifest_{task}.json")
    print(format_table(reports, task))


def _fixture_dataset(run: Run, model) -> Dataset:
    """Features for the fixture file, using the imputation stored with the model."""
    part = model.home if isinstance(model, TwoTargetModel) else model
    imputation = part.metadata.get("imputation", {})
    key = json.dumps(imputation, sort_keys=True)
    if key not in run._fixture_cache:
        matches, teams, players = _load_inputs(run)
        fixtures = parse_matches(run.need(Path(run.cfg["fixtures"])))
        ctx = _context(run, matches, teams, players)
        ctx.imputation = imputation
        data = assemble_dataset(fixtures, ctx, include_sel=True, require_targets=False)
        run.notes["dropped"] = [list(e) for e in data.errors]
        run._fixture_cache[key] = data
    return run._fixture_cache[key].select(part.feature_names)


def cmd_predict(run: Run) -> None:
    if not run.cfg.get("fixtures"):
        raise ConfigError("predict needs --fixtures")
    task = run.cfg["task"]
    d = run.stage_dir("predictions")
    for name, fs in _combos(run):
        model = load_model(run.need(_model_path(run, task, name, fs)))
        data = _fixture_dataset(run, model)
        path = d / f"{task}_{name}_{fs}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if task == "classify":
                labels = [o.label for o in Outcome]
                w.writerow(["match_id", *(f"p_{lab}" for lab in labels), "predicted"])
                P = model.predict_proba(data.X) if len(data) else np.zeros((0, 3))
                for mid, p in zip(data.match_ids, P):
                    w.writerow([mid, *(repr(float(v)) for v in p), labels[int(np.argmax(p))]])
            else:
                w.writerow(["match_id", "home_goals", "away_goals", "scoreline"])
                Y = model.predict(data.X) if len(data) else np.zeros((0, 2))
                for mid, (h, a) in zip(data.match_ids, Y):
                    w.writerow([mid, repr(float(h)), repr(float(a)), scoreline(h, a)])
        run.wrote(path)
    run.manifest("predictions", f"manifest_{task}.json")


def _find_row(run: Run, model, fs: str, match_id: str) -> np.ndarray:
    if run.cfg.get("fixtures"):
        data = _fixture_dataset(run, model)
        if match_id in data.match_ids:
            return data.row(match_id)
    for split in ("test", "train"):
        path = run.out / "features" / f"{split}_{fs}.csv"
        if path.is_file():
            data = Dataset.read_csv(path)
            if match_id in data.match_ids:
                run.need(path)
                return data.row(match_id)
    raise UnknownMatchError(f"match {match_id!r} not found in fixtures or feature matrices")


def cmd_explain(run: Run) -> None:
    match_id = run.cfg.get("match_id")
    if not match_id:
        raise ConfigError("explain needs --match-id")
    task = run.cfg["task"]
    d = run.stage_dir("explain")
    for name, fs in _combos(run):
        model = load_model(run.need(_model_path(run, task, name, fs)))
        x = _find_row(run, model, fs, match_id)
        if isinstance(model, TwoTargetModel):
            targets = [("home_goals", model.home, 0, "goals"), ("away_goals", model.away, 0, "goals")]
        else:
            unit = "log-odds" if model.kind == "boosted_sum" else "probability"
            targets = [(o.label, model, int(o), unit) for o in Outcome]
        phi = {}
        for label, ensemble, k, unit in targets:
            expl = tree_shap(ensemble, x)
            path = d / f"force_{match_id}_{task}_{name}_{fs}_{label}.csv"
            run.wrote(export_force_data(expl, path, output=k, unit=unit))
            if run.cfg.get("importance"):
                if id(ensemble) not in phi:
                    rows = _read_features(run, run.cfg["importance_split"], fs)
                    if not len(rows):
                        raise EmptyInputError(f"no {run.cfg['importance_split']} rows for global importance")
                    phi[id(ensemble)] = shap_matrix(ensemble, rows.X)
                ranking = rank_importance(phi[id(ensemble)], ensemble.feature_names, output=k)
                run.wrote(write_importance(ranking, d / f"importance_{task}_{name}_{fs}_{label}.csv"))
    run.manifest("explain", f"manifest_{match_id}_{task}.json")


COMMANDS = {
    "synth": cmd_synth,
    "strengths": cmd_strengths,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "explain": cmd_explain,
}


# --- entry point -------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file; flags override its values")
    common.add_argument("--out", required=True, help="run directory")
    common.add_argument("--data", help="input data directory (default: <out>/data)")
    common.add_argument("--seed", type=int)
    common.add_argument("--cutoff", help="temporal split date, YYYY-MM-DD")
    common.add_argument("--features", choices=["classical", "sel", "both"])
    common.add_argument("--model", choices=["forest", "gbt", "both"])
    common.add_argument("--task", choices=list(TASKS))
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="handsel", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"handsel {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "synth": "generate a synthetic league",
        "strengths": "write as-of team strengths for every match side",
        "featurize": "write train/test feature matrices with targets",
        "train": "fit the selected models",
        "evaluate": "score models on the test split (ablation table)",
        "predict": "predict unscored fixtures",
        "explain": "SHAP force data for one match, optional global importance",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        if name in ("predict", "explain"):
            p.add_argument("--fixtures", help="matches CSV of fixtures to score")
        if name == "explain":
            p.add_argument("--match-id", required=True)
            p.add_argument("--importance", action="store_true", default=None,
                           help="also write global importance")
            p.add_argument("--importance-split", choices=["test", "train"],
                           help="rows averaged for global importance (default: test)")
    return parser


def _error_report(exc: BaseException, code: str) -> dict:
    report = {"error": {"code": code, "type": type(exc).__name__, "message": str(exc)}}
    for attr in ("field", "value", "line"):
        v = getattr(exc, attr, None)
        if v is not None:
            report["error"][attr] = v if isinstance(v, (int, float, str)) else repr(v)
    return report


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args)
        for extra in ("fixtures", "match_id", "importance", "importance_split"):
            if getattr(args, extra, None) is not None:
                cfg[extra] = getattr(args, extra)
        run = Run(args.command, cfg, Path(args.out))
        COMMANDS[args.command](run)
        return 0
    except ConfigError as exc:
        status, report = EXIT_CONFIG, _error_report(exc, exc.code)
    except HandselError as exc:
        status = EXIT_IO if isinstance(exc, MissingInputError) else EXIT_DOMAIN
        report = _error_report(exc, exc.code)
    except OSError as exc:
        status, report = EXIT_IO, _error_report(exc, "io_error")
    print(json.dumps(report, sort_keys=True), file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
