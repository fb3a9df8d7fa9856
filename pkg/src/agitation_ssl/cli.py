"""``agitation`` command line: one subcommand per pipeline stage.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path


from .config import RunConfig
from .data.cohort import generate_cohort
from .data.events import aggregate_log, parse_event_log
from .data.matrix import Normalizer, labels_of, load_dataset, save_dataset, stack_counts
from .errors import MissingArtifactError, NumericalError, ValidationError
from .evaluation.crossval import cross_validate, holdout_evaluate
from .evaluation.reports import (alert_rates_csv, comparison_table, curves_csv, dumps_json, plot_alert_rates,
                                 plot_curves, plot_losses)
from .nn.gradcheck import run_suite
from .nn.io import load_weights, save_weights
from .pipeline import AgitationModel, model_factory, pretrain_autoencoders, train_selfsup
from .selfsup import ENCODER_SPECS, FrozenFeatureExtractor, build_autoencoder

TRAIN_DATA = "train.adm1"
HOLDOUT_DATA = "holdout.adm1"
COHORT_INFO = "cohort.json"
TRANSFORM = "transform.nnw"
EXTRACTOR = "extractor.nnw"
MODEL = "model.nnw"


class Context:
    def __init__(self, config, quiet=False):
        self.config = config
        self.quiet = quiet
        self.data = Path(config["paths.data"])
        self.artifacts = Path(config["paths.artifacts"])
        self.reports = Path(config["paths.reports"])

    def log(self, msg):
        if not self.quiet:
            print(msg, file=sys.stderr, flush=True)

    def out(self, directory, name):
        directory.mkdir(parents=True, exist_ok=True)
        return directory / name


def _lineage_error(path, stage, found, expected):
    return ValidationError(f"{path} was produced under config hash {found}, but the current config "
                           f"expects {expected}; rerun `agitation {stage}`")


def autoencoder_file(index):
    return f"autoencoder_{index:02d}.nnw"


def _load_artifact(ctx, name, stage):
    path = ctx.artifacts / name
    if not path.exists():
        raise MissingArtifactError(str(path), stage)
    arrays, meta = load_weights(path)
    expected = ctx.config.stage_hash(stage)
    if meta.get("config_hash") != expected:
        raise _lineage_error(path, stage, meta.get("config_hash"), expected)
    return arrays, meta


def _load_data(ctx, name):
    info_path = ctx.data / COHORT_INFO
    path = ctx.data / name
    if not path.exists() or not info_path.exists():
        raise MissingArtifactError(str(path), "simulate")
    info = json.loads(info_path.read_text())
    expected = ctx.config.stage_hash("simulate")
    if info.get("config_hash") != expected:
        raise _lineage_error(path, "simulate", info.get("config_hash"), expected)
    return load_dataset(path), info


def _meta(ctx, stage, inputs=()):
    return {"stage": stage, "config_hash": ctx.config.stage_hash(stage),
            "inputs": {s: ctx.config.stage_hash(s) for s in inputs}}


def cmd_simulate(ctx, args):
    train = generate_cohort(ctx.config.cohort_spec())
    hold = generate_cohort(ctx.config.holdout_spec())
    save_dataset(ctx.out(ctx.data, TRAIN_DATA), train.labelled + train.unlabelled)
    save_dataset(ctx.out(ctx.data, HOLDOUT_DATA), hold.labelled + hold.unlabelled)
    info = {**_meta(ctx, "simulate"),
            "train": {"days": len(train.labelled) + len(train.unlabelled), "labelled": len(train.labelled),
                      "positive": int(labels_of(train.labelled).sum()), "home_tags": train.home_tags},
            "holdout": {"days": len(hold.labelled) + len(hold.unlabelled), "labelled": len(hold.labelled),
                        "positive": int(labels_of(hold.labelled).sum()), "home_tags": hold.home_tags}}
    ctx.out(ctx.data, COHORT_INFO).write_text(dumps_json(info))
    ctx.log(f"simulate: {info['train']['days']} training days ({info['train']['labelled']} labelled), "
            f"{info['holdout']['days']} hold-out days -> {ctx.data}")


def cmd_aggregate(ctx, args):
    with open(args.events, "rb") as fh:
        events = parse_event_log(fh)
    matrices = aggregate_log(events)
    save_dataset(args.out, matrices)
    ctx.log(f"aggregate: {len(events)} events -> {len(matrices)} daily matrices in {args.out}")


def _split(matrices):
    labelled = [m for m in matrices if m.labelled]
    unlabelled = [m for m in matrices if not m.labelled]
    return labelled, unlabelled


def cmd_pretrain(ctx, args):
    matrices, _ = _load_data(ctx, TRAIN_DATA)
    _, unlabelled = _split(matrices)
    normalizer, aes = pretrain_autoencoders(stack_counts(unlabelled), ctx.config.seed,
                                            ctx.config["selfsup.ae_epochs"], ctx.log)
    meta = _meta(ctx, "pretrain", ["simulate"])
    for ae in aes:
        arrays = {**ae.state(), "normalizer.divisors": normalizer.divisors}
        save_weights(ctx.out(ctx.artifacts, autoencoder_file(ae.spec.encoder_index)), arrays,
                     {**meta, "spec": ae.spec.to_dict(), "history": ae.history})


def cmd_train_selfsup(ctx, args):
    matrices, _ = _load_data(ctx, TRAIN_DATA)
    _, unlabelled = _split(matrices)
    aes, histories = [], {}
    for spec in ENCODER_SPECS:
        arrays, ae_meta = _load_artifact(ctx, autoencoder_file(spec.encoder_index), "pretrain")
        ae = build_autoencoder(spec, ctx.config.seed)
        ae.load(arrays)
        ae.history = ae_meta["history"]
        histories[str(spec.encoder_index)] = ae.history
        aes.append(ae)
    normalizer = Normalizer(arrays["normalizer.divisors"])
    cfg = ctx.config
    t0 = time.perf_counter()
    clf, accuracy = train_selfsup(normalizer, aes, stack_counts(unlabelled), cfg.seed, cfg["selfsup.transform_epochs"],
                                  cfg["selfsup.holdout_fraction"], cfg["selfsup.learning_rate"],
                                  cfg["selfsup.batch_size"], ctx.log)
    ctx.log(f"train-selfsup: held-out transformation accuracy {accuracy:.4f} "
            f"({time.perf_counter() - t0:.0f} s)")
    meta = _meta(ctx, "train-selfsup", ["simulate", "pretrain"])
    save_weights(ctx.out(ctx.artifacts, TRANSFORM), clf.state(),
                 {**meta, "loss_history": clf.loss_history, "accuracy_history": clf.accuracy_history})
    extractor = FrozenFeatureExtractor.from_classifier(clf)
    save_weights(ctx.out(ctx.artifacts, EXTRACTOR),
                 {**{f"cnn.{k}": v for k, v in extractor.state().items()},
                  "normalizer.divisors": normalizer.divisors}, meta)
    report = {**meta, "seed": cfg.seed, "holdout_accuracy": accuracy, "chance": 1 / 11,
              "transformation_loss": clf.loss_history, "transformation_accuracy": clf.accuracy_history,
              "autoencoder_loss": histories}
    ctx.out(ctx.reports, "selfsup.json").write_text(dumps_json(report))
    plot_losses({f"encoder {k}": v for k, v in histories.items()},
                ctx.out(ctx.reports, "autoencoder_losses.png"), "Autoencoder reconstruction loss")


def _extractor(ctx):
    arrays, _ = _load_artifact(ctx, EXTRACTOR, "train-selfsup")
    cnn = {k[4:]: v for k, v in arrays.items() if k.startswith("cnn.")}
    return FrozenFeatureExtractor(cnn), Normalizer(arrays["normalizer.divisors"])


def _labelled(matrices):
    labelled, _ = _split(matrices)
    if not labelled:
        raise ValidationError("no labelled days in the training cohort")
    return labelled, stack_counts(labelled), labels_of(labelled)


def cmd_train_ensemble(ctx, args):
    matrices, _ = _load_data(ctx, TRAIN_DATA)
    extractor, normalizer = _extractor(ctx)
    _, counts, y = _labelled(matrices)
    cfg = ctx.config
    model = AgitationModel(extractor, normalizer, cfg.seed, cfg.fusion_config(), cfg.classifier_options())
    model.fit(counts, y)
    meta = _meta(ctx, "train-ensemble", ["simulate", "pretrain", "train-selfsup"])
    meta["fusion_log"] = model.fusion.log
    meta["train_homes"] = sorted({m.home_id for m in matrices})
    save_weights(ctx.out(ctx.artifacts, MODEL), model.state(), meta)
    ctx.out(ctx.reports, "fusion_log.json").write_text(dumps_json({**_meta(ctx, "train-ensemble"),
                                                                   "iterations": model.fusion.log}))
    ctx.log(f"train-ensemble: {len(y)} labelled days, {len(model.fusion.log)} EM iterations")


def _load_model(ctx, path=None):
    if path is None:
        arrays, meta = _load_artifact(ctx, MODEL, "train-ensemble")
    else:
        arrays, meta = load_weights(path)
    model = AgitationModel.from_state(arrays, ctx.config.fusion_config(), ctx.config.seed)
    return model, meta


def _factories(ctx, normalizer, extractor):
    cfg = ctx.config
    baseline_options = {"random-forest": {"n_trees": cfg["baselines.rf_trees"]},
                        "lstm": {"epochs": cfg["baselines.lstm_epochs"]}}
    return {m: model_factory(m, normalizer, extractor, cfg.fusion_config(), cfg.classifier_options(),
                             baseline_options) for m in cfg.models()}


def cmd_crossval(ctx, args):
    matrices, _ = _load_data(ctx, TRAIN_DATA)
    extractor, normalizer = _extractor(ctx)
    _, counts, y = _labelled(matrices)
    k = ctx.config["eval.k"]
    if k > len(y):
        raise ValidationError(f"eval.k={k} exceeds the {len(y)} labelled days")
    meta = _meta(ctx, "evaluate", ["simulate", "pretrain", "train-selfsup"])
    reports = []
    for model_id, factory in _factories(ctx, normalizer, extractor).items():
        t0 = time.perf_counter()
        r = cross_validate(factory, counts, y, k, ctx.config.seed, model_id, meta["config_hash"])
        ctx.log(f"crossval {model_id}: f1 {r.mean['f1']:.4f} recall {r.mean['recall']:.4f} "
                f"({time.perf_counter() - t0:.0f} s)")
        reports.append(r)
    ctx.out(ctx.reports, "crossval.json").write_text(dumps_json({**meta, "models": [r.to_dict() for r in reports]}))
    ctx.out(ctx.reports, "crossval.txt").write_text(comparison_table(reports))
    ctx.out(ctx.reports, "crossval_curves.csv").write_text(curves_csv(reports))
    plot_curves(reports, ctx.out(ctx.reports, "crossval_curves.png"))
    if not ctx.quiet:
        sys.stdout.write(comparison_table(reports))


def cmd_holdout(ctx, args):
    matrices, _ = _load_data(ctx, TRAIN_DATA)
    hold, _ = _load_data(ctx, HOLDOUT_DATA)
    train_homes = sorted({m.home_id for m in matrices})
    extractor, normalizer = _extractor(ctx)
    _, counts, y = _labelled(matrices)
    meta = _meta(ctx, "evaluate", ["simulate", "pretrain", "train-selfsup", "train-ensemble"])
    reports, alerts = [], {}
    for model_id, factory in _factories(ctx, normalizer, extractor).items():
        if model_id == "proposed":
            model, model_meta = _load_model(ctx)
            train_homes = sorted(set(train_homes) | set(model_meta.get("train_homes", [])))
        else:
            model = factory(ctx.config.seed).fit(counts, y)
        r, a = holdout_evaluate(model, train_homes, hold, model_id, ctx.config.seed, meta["config_hash"])
        reports.append(r)
        alerts[model_id] = a
        ctx.log(f"holdout {model_id}: alert rate {a.to_dict()['overall_rate']:.4f}")
    body = {**meta, "models": [{**r.to_dict(), "alerts": alerts[r.model_id].to_dict()} for r in reports]}
    ctx.out(ctx.reports, "holdout.json").write_text(dumps_json(body))
    ctx.out(ctx.reports, "holdout.txt").write_text(comparison_table(reports))
    ctx.out(ctx.reports, "holdout_alerts.csv").write_text(alert_rates_csv(alerts))
    ctx.out(ctx.reports, "holdout_curves.csv").write_text(curves_csv(reports))
    plot_alert_rates(alerts, ctx.out(ctx.reports, "holdout_alerts.png"))


def cmd_predict(ctx, args):
    model, _ = _load_model(ctx, args.model)
    matrices = load_dataset(args.matrices)
    if not matrices:
        raise ValidationError(f"{args.matrices} holds no matrices")
    post, alert = model.predict(stack_counts(matrices), args.threshold)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["home_id", "date", "p_not_agitation", "p_agitation", "alert"])
    for m, p, a in zip(matrices, post, alert):
        w.writerow([m.home_id, m.date.isoformat(), repr(float(p[0])), repr(float(p[1])), int(a)])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def cmd_gradcheck(ctx, args):
    t0 = time.perf_counter()
    results = run_suite(args.seed)
    for name, err, ok in results:
        print(f"{'ok  ' if ok else 'FAIL'} {name:32s} {err:.3e}")
    failed = [name for name, _, ok in results if not ok]
    print(f"{len(results) - len(failed)}/{len(results)} passed in {time.perf_counter() - t0:.2f} s")
    if failed:
        raise NumericalError(f"gradient check failed for: {', '.join(failed)}")


STAGES = ("simulate", "pretrain", "train-selfsup", "train-ensemble", "crossval", "holdout")


def cmd_all(ctx, args):
    for stage in STAGES:
        ctx.log(f"== {stage}")
        COMMANDS[stage](ctx, args)


COMMANDS = {
    "simulate": cmd_simulate, "aggregate": cmd_aggregate, "pretrain": cmd_pretrain,
    "train-selfsup": cmd_train_selfsup, "train-ensemble": cmd_train_ensemble, "crossval": cmd_crossval,
    "holdout": cmd_holdout, "predict": cmd_predict, "gradcheck": cmd_gradcheck, "all": cmd_all,
}

HELP = {
    "simulate": "generate the synthetic training and hold-out cohorts",
    "aggregate": "turn a sensor event log into a daily-matrix dataset",
    "pretrain": "train the ten autoencoders",
    "train-selfsup": "train the transformation classifier and export the frozen CNN block",
    "train-ensemble": "train the base classifiers and the fusion layer",
    "crossval": "k-fold comparison of every registered model",
    "holdout": "evaluate on the unseen hold-out cohort, with per-home alert rates",
    "predict": "posteriors and alert flags for a dataset, as CSV",
    "gradcheck": "finite-difference gradient checks of every layer and loss",
    "all": "run simulate through holdout in order",
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("-q", "--quiet", action="store_true", help="suppress progress messages")
    parser = argparse.ArgumentParser(prog="agitation", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=HELP[name])
        if name == "aggregate":
            p.add_argument("events", help="CSV event log: timestamp,home_id,sensor")
            p.add_argument("out", help="output dataset file")
        elif name == "predict":
            p.add_argument("matrices", help="dataset file to score")
            p.add_argument("--model", help="model file (default: artifacts/model.nnw)")
            p.add_argument("--threshold", type=float, help="alert threshold (default from config)")
            p.add_argument("--out", help="CSV output path (default: stdout)")
        elif name == "gradcheck":
            p.add_argument("--seed", type=int, default=0)
    return parser


def _overrides(pairs):
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        ctx = Context(RunConfig.load(args.config, _overrides(args.set)), args.quiet)
        COMMANDS[args.command](ctx, args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
