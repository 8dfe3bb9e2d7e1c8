"""Command-line front end.

Every command reads one flat ``key=value`` config (``--config FILE``), then
``FADV_<KEY>`` environment variables, then ``--key value`` flags, later
sources winning. Unknown keys are rejected. Each run writes its resolved
config (``config.txt``) next to its outputs, in ``run_dir`` or, when that is
empty, in ``<out>/<timestamp>-<config hash>``.

Exit codes: 0 success, 2 configuration or input error, 3 I/O error during a run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

from fadv import attack as A
from fadv import corpus as C
from fadv import evaluation as E
from fadv import fada as F
from fadv import innermax as I
from fadv import model as M
from fadv import training as T

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3

COMMANDS = ("prepare", "train", "augment", "attack", "evaluate", "figure1", "sweep", "pipeline", "toy")

# name -> (type, default, help); type is int, float, str, bool or "floats"
KEYS = {
    "data": (str, "", "corpus file, or directory holding train/dev/test.tsv"),
    "synonyms": (str, "", "synonym file: word<TAB>syn1,syn2,..."),
    "similarity": (str, "", "word vectors for the attack similarity floor (default: model embeddings)"),
    "embeddings": (str, "", "initial model embeddings (default: seeded random)"),
    "cache": (str, "", "prepare cache directory (default: <out>/cache)"),
    "out": (str, "runs", "root for run directories"),
    "run_dir": (str, "", "exact output directory (default: <out>/<timestamp>-<hash>)"),
    "seed": (int, 0, "master seed"),
    "workers": (int, 0, "attack worker processes (0: all cores)"),
    "max_len": (int, 40, "truncate sentences to this many tokens"),
    "min_freq": (int, 1, "vocabulary frequency cutoff"),
    "syn_cap": (int, 50, "maximum synonyms kept per word when loading"),
    "dim": (int, 50, "embedding size"),
    "hidden": (int, 64, "hidden layer size"),
    "mode": (str, "natural", "training mode: " + ", ".join(T.MODES)),
    "inner": (str, "fgm", "inner maximisation: " + ", ".join(I.METHODS)),
    "epsilon": (float, 0.03, "perturbation radius"),
    "alpha": (float, 0.003, "pgd/ascent step size"),
    "steps": (int, 1, "pgd/ascent steps"),
    "norm": (str, "l2", "projection norm: l2 or linf"),
    "project": (bool, False, "project pgd iterates onto the norm ball"),
    "epochs": (int, 10, "training epochs"),
    "batch_size": (int, 64, "mini-batch size"),
    "lr": (float, 0.5, "SGD learning rate"),
    "weight_decay": (float, 0.0, "L2 weight decay"),
    "augmentation": (str, "", "augmentation file for ada/fada/*_only/gat modes"),
    "kind": (str, "fada", "augmentation kind: fada or ada"),
    "checkpoint": (str, "", "model checkpoint"),
    "defense": (str, "", "defense name in reports (default: the checkpoint's mode)"),
    "p_max": ("floats", [0.15], "max fraction of words substituted (comma list for evaluate)"),
    "eps_min": (float, 0.84, "sentence similarity floor"),
    "k_syn": (int, 50, "synonym candidates per word"),
    "max_queries": (int, 0, "per-example query cap (0: 50 * length)"),
    "split": (str, "", "split to use (default: train for augment, test otherwise)"),
    "sample_size": (int, 500, "examples drawn for attacks"),
    "trace": (bool, False, "write a per-commit attack trace"),
    "sweep_kind": (str, "epochs", "sweep: " + ", ".join(E.SWEEP_KINDS)),
    "grid": ("floats", [1.0, 2.0, 3.0], "sweep grid, comma separated"),
    "plots": (bool, True, "render PNG figures next to the CSV outputs"),
}
CHOICES = {
    "mode": T.MODES,
    "inner": I.METHODS,
    "norm": I.NORMS,
    "kind": ("fada", "ada"),
    "split": ("", "train", "dev", "test"),
    "sweep_kind": E.SWEEP_KINDS,
}
FILE_KEYS = ("data", "synonyms", "similarity", "embeddings", "augmentation", "checkpoint")


class UsageError(Exception):
    """Bad configuration or missing input; exit code 2."""


# -- configuration -----------------------------------------------------------

def _parse_value(key, raw):
    kind = KEYS[key][0]
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "floats":
            vals = [float(v) for v in raw.split(",") if v.strip()]
            if not vals:
                raise ValueError(raw)
            return vals
        return kind(raw)
    except ValueError:
        raise UsageError(f"bad value for {key}: {raw!r}") from None


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(repr(v) for v in value)
    return str(value)


def read_config_file(path) -> dict:
    if not os.path.isfile(path):
        raise UsageError(f"config file not found: {path}")
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            if key in out:
                raise UsageError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = _parse_value(key, raw)
    return out


def resolve_config(config_path=None, overrides=None, environ=None) -> dict:
    """Defaults < config file < FADV_* environment < flag overrides."""
    cfg = {k: spec[1] for k, spec in KEYS.items()}
    if config_path:
        cfg.update(read_config_file(config_path))
    environ = os.environ if environ is None else environ
    for name, raw in environ.items():
        if name.startswith("FADV_"):
            key = name[5:].lower()
            if key not in KEYS:
                raise UsageError(f"unknown key {key!r} from environment variable {name}")
            cfg[key] = _parse_value(key, raw)
    for key, raw in (overrides or {}).items():
        if key not in KEYS:
            raise UsageError(f"unknown key {key!r}")
        cfg[key] = _parse_value(key, raw)
    for key, allowed in CHOICES.items():
        if cfg[key] not in allowed:
            raise UsageError(f"{key} must be one of {', '.join(a for a in allowed if a)}, got {cfg[key]!r}")
    if cfg["workers"] <= 0:
        cfg["workers"] = os.cpu_count() or 1
    if not cfg["cache"]:
        cfg["cache"] = os.path.join(cfg["out"], "cache")
    return cfg


def config_text(cfg: dict) -> str:
    return "".join(f"{k}={_format_value(cfg[k])}\n" for k in sorted(cfg))


def train_config(cfg) -> T.TrainConfig:
    try:
        inner = I.PerturbationConfig(cfg["epsilon"], cfg["alpha"], cfg["steps"], cfg["norm"], cfg["project"])
        return T.TrainConfig(cfg["mode"], cfg["inner"], inner, cfg["epochs"], cfg["batch_size"], cfg["lr"],
                             cfg["weight_decay"], cfg["seed"], cfg["dim"], cfg["hidden"])
    except ValueError as e:
        raise UsageError(str(e)) from None


def attack_configs(cfg) -> list[A.AttackConfig]:
    try:
        return [A.AttackConfig(p, cfg["eps_min"], cfg["k_syn"], cfg["max_queries"] or None) for p in cfg["p_max"]]
    except ValueError as e:
        raise UsageError(str(e)) from None


def single_attack(cfg) -> A.AttackConfig:
    cfgs = attack_configs(cfg)
    if len(cfgs) != 1:
        raise UsageError("this command takes a single p_max value")
    return cfgs[0]


def _require(cfg, *keys):
    for key in keys:
        if not cfg[key]:
            raise UsageError(f"missing required key {key!r}")


def _check_files(cfg):
    for key in FILE_KEYS:
        if cfg[key] and not os.path.exists(cfg[key]):
            raise UsageError(f"{key}: no such file: {cfg[key]}")


def make_run_dir(cfg, command) -> Path:
    if cfg["run_dir"]:
        path = Path(cfg["run_dir"])
        path.mkdir(parents=True, exist_ok=True)
    else:
        digest = hashlib.sha256((command + "\n" + config_text(cfg)).encode()).hexdigest()[:8]
        stamp = time.strftime("%Y%m%d-%H%M%S")
        path = Path(cfg["out"]) / f"{stamp}-{digest}"
        k = 1
        while path.exists():
            path = Path(cfg["out"]) / f"{stamp}-{digest}-{k}"
            k += 1
        path.mkdir(parents=True)
    (path / "config.txt").write_text(f"# fadv {command}\n" + config_text(cfg), encoding="utf-8")
    return path


# -- shared resources --------------------------------------------------------

def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _corpus_files(data) -> list[str]:
    if os.path.isdir(data):
        return [os.path.join(data, f"{s}.tsv") for s in ("train", "dev", "test")
                if os.path.exists(os.path.join(data, f"{s}.tsv"))]
    return [data]


def _vector_dim(path) -> int:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if parts:
                return len(parts) - 1
    raise UsageError(f"{path}: empty vector file")


def cache_fingerprint(cfg) -> dict:
    inputs = {p: _sha256_file(p) for p in _corpus_files(cfg["data"])}
    for key in ("synonyms", "similarity", "embeddings"):
        if cfg[key]:
            inputs[cfg[key]] = _sha256_file(cfg[key])
    settings = {k: cfg[k] for k in ("data", "synonyms", "similarity", "embeddings", "max_len", "min_freq",
                                     "syn_cap", "dim", "seed")}
    return {"inputs": inputs, "settings": settings}


def prepare_cache(cfg) -> tuple[Path, bool]:
    """Write vocab/lexicon/embedding caches; returns (dir, rewritten)."""
    _require(cfg, "data", "synonyms")
    _check_files(cfg)
    cache = Path(cfg["cache"])
    fingerprint = cache_fingerprint(cfg)
    manifest = cache / "manifest.json"
    if manifest.exists():
        try:
            if json.loads(manifest.read_text(encoding="utf-8")) == fingerprint:
                return cache, False
        except ValueError:
            pass
    corpus = C.load_corpus(cfg["data"], cfg["max_len"])
    vocab = C.build_vocab(corpus, cfg["min_freq"])
    lexicon = C.load_synonyms(cfg["synonyms"], cfg["syn_cap"])
    embed = C.load_embeddings(cfg["embeddings"] or None, vocab, cfg["dim"], cfg["seed"])
    cache.mkdir(parents=True, exist_ok=True)
    vocab.save(cache / "vocab.txt")
    lexicon.save(cache / "synonyms.tsv")
    embed.save(cache / "embeddings.txt", vocab)
    if cfg["similarity"]:
        sim = C.load_embeddings(cfg["similarity"], vocab, _vector_dim(cfg["similarity"]), cfg["seed"])
        sim.save(cache / "similarity.txt", vocab)
    (cache / "config.txt").write_text("# fadv prepare\n" + config_text(cfg), encoding="utf-8")
    manifest.write_text(json.dumps(fingerprint, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return cache, True


class Resources:
    def __init__(self, cfg):
        cache, _ = prepare_cache(cfg)
        self.corpus = C.load_corpus(cfg["data"], cfg["max_len"])
        self.vocab = C.Vocab.load(cache / "vocab.txt")
        self.lexicon = C.load_synonyms(cache / "synonyms.tsv", cfg["syn_cap"])
        self.embed = C.load_embeddings(str(cache / "embeddings.txt"), self.vocab, cfg["dim"], cfg["seed"])
        self.sim = None
        if cfg["similarity"]:
            path = str(cache / "similarity.txt")
            self.sim = C.load_embeddings(path, self.vocab, _vector_dim(path), cfg["seed"])

    def split(self, name):
        examples = self.corpus.split(name)
        if not examples:
            raise UsageError(f"split {name!r} is empty")
        return examples

    def load_model(self, path):
        params, header = M.load_checkpoint(path)
        if params.embed.shape[0] != len(self.vocab):
            raise UsageError(f"{path}: checkpoint vocabulary size {params.embed.shape[0]} != {len(self.vocab)}")
        return params, header


def _load_augmentation(cfg, mode):
    if mode not in T.AUGMENTED_MODES:
        return None
    _require(cfg, "augmentation")
    try:
        return F.load_augmentation(cfg["augmentation"])
    except ValueError as e:
        raise UsageError(str(e)) from None


# -- output helpers -----------------------------------------------------------

def _emit(command, run_dir, lines):
    print(f"== fadv {command} ==")
    print(f"run_dir={run_dir}")
    for line in lines:
        print(line)
    print(f"== end {command} ==")


def _csv_lines(path):
    return Path(path).read_text(encoding="utf-8").splitlines()


def _write_jsonl(path, records):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _plot(cfg, fn, *args):
    if cfg["plots"]:
        from fadv import plotting

        getattr(plotting, fn)(*args)


def _train_and_save(cfg, res, tcfg, augmentation, run_dir, stem):
    params, report = T.train(res.corpus.train, res.vocab, tcfg, augmentation, res.corpus.num_classes,
                             res.embed, dev=res.corpus.dev or None)
    meta = {"mode": tcfg.mode, "inner_method": tcfg.inner_method, "train_config": T.config_dict(tcfg)}
    report.checkpoint_id = M.save_checkpoint(params, run_dir / f"{stem}.ckpt", tcfg.seed, meta)
    report.write(run_dir / f"{stem}_report.jsonl", run_dir / f"{stem}_timing.jsonl")
    _plot(cfg, "plot_training", report, run_dir / f"{stem}_curve.png")
    return params, report


# -- commands -----------------------------------------------------------------

def cmd_prepare(cfg):
    """Build the vocab, lexicon and similarity caches (idempotent)."""
    cache, wrote = prepare_cache(cfg)
    _emit("prepare", cache, [f"status={'written' if wrote else 'up-to-date'}"])


def cmd_train(cfg):
    """Train one model in the chosen mode and save its checkpoint."""
    tcfg = train_config(cfg)
    aug = _load_augmentation(cfg, tcfg.mode)
    res = Resources(cfg)
    run_dir = make_run_dir(cfg, "train")
    params, report = _train_and_save(cfg, res, tcfg, aug, run_dir, "model")
    _emit("train", run_dir, [f"checkpoint={run_dir / 'model.ckpt'}", f"checkpoint_id={report.checkpoint_id}",
                             f"final_loss={report.loss[-1]!r}", f"train_acc={report.train_acc[-1]!r}",
                             f"dev_acc={report.dev_acc[-1]!r}"])


def cmd_augment(cfg):
    """Generate friendly (or adversarial) augmentation from a checkpoint."""
    _require(cfg, "checkpoint")
    acfg = single_attack(cfg)
    res = Resources(cfg)
    params, header = res.load_model(cfg["checkpoint"])
    split = res.split(cfg["split"] or "train")
    run_dir = make_run_dir(cfg, "augment")
    build = F.augment_dataset if cfg["kind"] == "fada" else F.generate_ada
    aug = build(params, split, res.lexicon, acfg, res.vocab, res.sim, cfg["seed"], header["id"],
                workers=cfg["workers"])
    path = run_dir / "augmentation.tsv"
    F.save_augmentation(aug, path)
    _emit("augment", run_dir, [f"augmentation={path}", f"kind={aug.kind}", f"n={aug.meta['n']}",
                               f"n_derived={aug.meta['n_derived']}"])


def cmd_attack(cfg):
    """Run the greedy substitution attack and write per-example outcomes."""
    _require(cfg, "checkpoint")
    acfg = single_attack(cfg)
    res = Resources(cfg)
    params, header = res.load_model(cfg["checkpoint"])
    split = res.split(cfg["split"] or "test")
    if cfg["sample_size"] > len(split):
        raise UsageError(f"sample_size {cfg['sample_size']} > split size {len(split)}")
    run_dir = make_run_dir(cfg, "attack")
    outcomes = []
    counter = M.QueryCounter()
    entry = E.robust_evaluate(params, split, res.lexicon, acfg, cfg["sample_size"], cfg["seed"], res.vocab,
                              res.sim, counter, cfg["workers"], outcomes)
    idx = E.sample_indices(len(split), cfg["sample_size"], cfg["seed"])
    _write_jsonl(run_dir / "attack.jsonl", (
        {"index": int(i), "attempted": o.attempted, "success": o.success, "truncated": o.truncated,
         "queries": o.queries, "modifications": o.modifications, "x_adv": C.detokenize(o.x_adv)}
        for i, o in zip(idx, outcomes)))
    summary = {"checkpoint_id": header["id"], "counter_queries": counter.count, **asdict(entry)}
    (run_dir / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    if cfg["trace"]:
        A.write_trace(run_dir / "trace.txt", outcomes)
    _emit("attack", run_dir, [f"{k}={summary[k]!r}" for k in ("ra", "asr", "mean_queries", "n_attacked", "n_eval")])


def cmd_evaluate(cfg):
    """Clean accuracy, RA, ASR and queries for a checkpoint, one row per p_max."""
    _require(cfg, "checkpoint")
    attacks = {f"aws_p{c.p_max:g}": c for c in attack_configs(cfg)}
    res = Resources(cfg)
    params, header = res.load_model(cfg["checkpoint"])
    split = res.split(cfg["split"] or "test")
    if cfg["sample_size"] > len(split):
        raise UsageError(f"sample_size {cfg['sample_size']} > split size {len(split)}")
    run_dir = make_run_dir(cfg, "evaluate")
    name = cfg["defense"] or header.get("meta", {}).get("mode", "model")
    report = E.evaluate_defense(name, params, split, res.lexicon, attacks, cfg["sample_size"], cfg["seed"],
                                res.vocab, res.sim, workers=cfg["workers"],
                                config={"checkpoint_id": header["id"], "split": cfg["split"] or "test"})
    report.write(run_dir / "report.jsonl", run_dir / "report.csv")
    rows = list(_csv_rows(report))
    _plot(cfg, "plot_defense", rows, run_dir / "report.png")
    _emit("evaluate", run_dir, _csv_lines(run_dir / "report.csv"))


def _csv_rows(report):
    for n, e in report.attacks.items():
        yield {"defense": report.defense, "attack": n, "clean": report.clean_acc, "ra": e.ra, "asr": e.asr,
               "mean_queries": e.mean_queries}


def cmd_figure1(cfg):
    """Natural vs adversarial-only vs friendly-only training on the same attack outcomes."""
    tcfg = replace(train_config(cfg), mode="natural")
    acfg = single_attack(cfg)
    res = Resources(cfg)
    if not res.corpus.test:
        raise UsageError("figure1 needs a test split")
    run_dir = make_run_dir(cfg, "figure1")
    base, _ = _train_and_save(cfg, res, tcfg, None, run_dir, "natural")
    result = E.figure1_experiment(res.corpus, res.vocab, res.lexicon, tcfg, acfg, res.sim, res.embed,
                                  cfg["workers"], base=base)
    for kind, aug in result["augmentations"].items():
        F.save_augmentation(aug, run_dir / f"{kind}.tsv")
    for mode in ("ada_only", "fada_only"):
        M.save_checkpoint(result["models"][mode], run_dir / f"{mode}.ckpt", tcfg.seed,
                          {"mode": mode, "train_config": T.config_dict(replace(tcfg, mode=mode))})
    rows = result["rows"]
    _write_jsonl(run_dir / "figure1.jsonl", [{"model": m, **r} for m, r in rows.items()]
                 + [{"generation": result["generation"]}])
    E.write_csv(run_dir / "figure1.csv", [{"model": m, **r} for m, r in rows.items()],
                ("model", "n_train", "train_acc", "test_acc"))
    _plot(cfg, "plot_figure1", rows, run_dir / "figure1.png")
    _emit("figure1", run_dir, _csv_lines(run_dir / "figure1.csv"))


def cmd_sweep(cfg):
    """Clean accuracy and RA across a grid of steps, step sizes or epochs."""
    tcfg = train_config(cfg)
    acfg = single_attack(cfg)
    aug = _load_augmentation(cfg, tcfg.mode)
    kind = cfg["sweep_kind"]
    grid = [int(g) for g in cfg["grid"]] if kind in ("steps", "epochs") else cfg["grid"]
    if kind in ("steps", "epochs") and any(g != int(g) or g < 1 for g in cfg["grid"]):
        raise UsageError(f"{kind} grid values must be positive integers")
    if kind == "steps" and tcfg.inner_method in ("fgm", "fgsm") and grid != [1]:
        raise UsageError("a steps sweep needs inner=pgd or inner=ascent")
    if kind == "step_size" and tcfg.inner_method in ("fgm", "fgsm"):
        raise UsageError("fgm/fgsm ignore the step size; sweep it with inner=pgd or inner=ascent")
    res = Resources(cfg)
    if cfg["sample_size"] > len(res.split("test")):
        raise UsageError(f"sample_size {cfg['sample_size']} > test split size")
    run_dir = make_run_dir(cfg, "sweep")
    rows = E.sweep(kind, grid, tcfg, res.corpus, res.vocab, res.lexicon, acfg, aug, cfg["sample_size"],
                   cfg["seed"], res.sim, res.embed, cfg["workers"])
    _write_jsonl(run_dir / "sweep.jsonl", rows)
    E.write_csv(run_dir / "sweep.csv", rows, E.SWEEP_COLUMNS)
    _plot(cfg, "plot_sweep", rows, run_dir / "sweep.png")
    _emit("sweep", run_dir, _csv_lines(run_dir / "sweep.csv"))


def cmd_pipeline(cfg):
    """Natural base -> friendly augmentation of train -> GAT -> evaluate both."""
    tcfg = train_config(cfg)
    attacks = {f"aws_p{c.p_max:g}": c for c in attack_configs(cfg)}
    gen_attack = next(iter(attacks.values()))
    res = Resources(cfg)
    test = res.split("test")
    if cfg["sample_size"] > len(test):
        raise UsageError(f"sample_size {cfg['sample_size']} > test split size {len(test)}")
    run_dir = make_run_dir(cfg, "pipeline")
    base, base_report = _train_and_save(cfg, res, replace(tcfg, mode="natural"), None, run_dir, "natural")
    aug = F.augment_dataset(base, res.corpus.train, res.lexicon, gen_attack, res.vocab, res.sim, cfg["seed"],
                            base_report.checkpoint_id, workers=cfg["workers"])
    F.save_augmentation(aug, run_dir / "fada.tsv")
    gat, gat_report = _train_and_save(cfg, res, replace(tcfg, mode="gat"), aug, run_dir, "gat")
    rows = []
    records = []
    for name, params, rep in (("natural", base, base_report), (f"gat_{tcfg.inner_method}", gat, gat_report)):
        report = E.evaluate_defense(name, params, test, res.lexicon, attacks, cfg["sample_size"], cfg["seed"],
                                    res.vocab, res.sim, workers=cfg["workers"],
                                    config={"checkpoint_id": rep.checkpoint_id, "split": "test"})
        records.extend(report.records())
        rows.extend(_csv_rows(report))
    _write_jsonl(run_dir / "report.jsonl", records)
    E.write_csv(run_dir / "report.csv", rows, E.CSV_COLUMNS)
    _plot(cfg, "plot_defense", rows, run_dir / "report.png")
    _emit("pipeline", run_dir, _csv_lines(run_dir / "report.csv"))


def cmd_toy(cfg):
    """Write the seeded synthetic corpus (train/dev/test, synonyms, similarity vectors) to ``data``."""
    from fadv import toydata

    _require(cfg, "data")
    spec = replace(toydata.ToySpec(), seed=cfg["seed"])
    out = Path(cfg["data"])
    files = toydata.write_toy_corpus(out, spec)
    (out / "toy_config.txt").write_text(
        "".join(f"{k}={v}\n" for k, v in sorted(asdict(spec).items())), encoding="utf-8")
    _emit("toy", out, [f"{k}={v}" for k, v in sorted(files.items())])


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fadv", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        doc = globals()[f"cmd_{name}"].__doc__
        p = sub.add_parser(name, help=doc.split("\n")[0] if doc else None)
        p.add_argument("--config", help="flat key=value config file")
        for key, (_, default, help_) in KEYS.items():
            flags = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
            p.add_argument(*flags, dest=key, default=argparse.SUPPRESS, metavar="V",
                           help=f"{help_} (default: {_format_value(default)})")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    overrides = {k: v for k, v in vars(args).items() if k in KEYS}
    handler = globals()[f"cmd_{args.command}"]
    try:
        cfg = resolve_config(args.config, overrides)
        if args.command != "toy":  # toy writes to ``data``
            _check_files(cfg)
        handler(cfg)
    except (UsageError, T.ConfigError, C.CorpusFormatError, C.EmptyCorpusError) as e:
        print(f"fadv: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"fadv: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
