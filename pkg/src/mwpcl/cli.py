"""Command-line front end: one subcommand per pipeline stage, driven by a
flat key=value config file with per-invocation overrides.

Artifacts are reproducible: every output file starts with a provenance
header (tool version, config hash, seed) and re-running a subcommand with
identical inputs and seeds writes identical bytes.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import __version__, augment, corpus, retrieval, trainer
from .errors import ConfigError, DataError, MwpclError, NumericError
from .similarity import TED_BACKEND, build_similarity_matrix, load_embedding_table


@dataclass
class PipelineConfig:
    raw_path: str = ""
    train_path: str = ""
    augments_path: str = ""
    embeddings_path: str = ""
    triplets_path: str = ""
    checkpoint_path: str = ""
    out_dir: str = "out"

    question_markers: str = ""   # comma-separated marker phrases; empty = defaults
    question_phrase: str = "how many"
    require_question: bool = False

    augment_methods: str = "qr,roda"
    augment_targets: str = "all"
    augment_seed: int = 13
    challenge_size: int = 100
    challenge_seed: int = 7

    retrieval_strategy: str = "em"
    retrieval_metric: str = "bibleu"
    retrieval_seed: int = 0
    retrieval_include_augments: bool = False
    include_augments_as_anchors: bool = False

    trainer_dim: int = 64
    trainer_tau: float = 0.1
    trainer_alpha: float = 0.5
    trainer_batch_size: int = 16
    trainer_lr: float = 0.5
    trainer_steps: int = 500
    trainer_classes: int = 5
    trainer_seed: int = 0
    grid_steps: int = 100

    def rules(self) -> corpus.TextRules:
        markers = tuple(m.strip() for m in self.question_markers.split(",") if m.strip())
        base = corpus.DEFAULT_RULES
        return corpus.TextRules(
            question_markers=markers or base.question_markers,
            question_phrase=self.question_phrase,
            require_question=self.require_question,
        )

    def train_config(self) -> trainer.TrainConfig:
        return trainer.TrainConfig(
            tau=self.trainer_tau,
            alpha=self.trainer_alpha,
            batch_size=self.trainer_batch_size,
            learning_rate=self.trainer_lr,
            steps=self.trainer_steps,
            include_augments_as_anchors=self.include_augments_as_anchors,
        )


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(key: str, value: str):
    kind = _FIELD_TYPES.get(key)
    if kind is None:
        raise ConfigError(f"unknown config key {key!r}")
    value = value.strip()
    if kind == "bool":
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind}, got {value!r}") from None
    return value


def load_config(path: str | None, overrides=()) -> PipelineConfig:
    config = PipelineConfig()
    pairs = []
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        for line_no, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"config line {line_no}: expected key = value")
            key, value = line.split("=", 1)
            pairs.append((key.strip(), value))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected key=value")
        key, value = item.split("=", 1)
        pairs.append((key.strip(), value))
    for key, value in pairs:
        setattr(config, key, _coerce(key, value))
    _validate(config)
    return config


def _validate(config: PipelineConfig):
    if config.retrieval_strategy not in retrieval.EQ_STRATEGIES:
        raise ConfigError(f"retrieval_strategy must be one of {retrieval.EQ_STRATEGIES}")
    if config.retrieval_metric not in retrieval.TEXT_METRICS:
        raise ConfigError(f"retrieval_metric must be one of {retrieval.TEXT_METRICS}")
    if config.augment_targets not in ("all", "random"):
        raise ConfigError("augment_targets must be 'all' or 'random'")
    for method in _methods(config):
        if method not in ("QR", "RODA"):
            raise ConfigError(f"unknown augment method {method!r}")
    try:
        config.train_config()
    except DataError as exc:
        raise ConfigError(str(exc)) from exc


def _methods(config: PipelineConfig) -> tuple[str, ...]:
    return tuple(m.strip().upper() for m in config.augment_methods.split(",") if m.strip())


def config_hash(config: PipelineConfig) -> str:
    canonical = "\n".join(f"{f.name}={getattr(config, f.name)}"
                          for f in fields(PipelineConfig))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def provenance(config: PipelineConfig, seed) -> list[str]:
    return [f"mwpcl {__version__} config={config_hash(config)} seed={seed}"]


# ---------------------------------------------------------------------------
# shared loading helpers
# ---------------------------------------------------------------------------

def _require(config: PipelineConfig, attr: str) -> str:
    value = getattr(config, attr)
    if not value:
        raise ConfigError(f"config key {attr!r} is required for this subcommand")
    return value


def _out_path(config: PipelineConfig, name: str) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _load_train_corpus(config: PipelineConfig) -> corpus.Corpus:
    try:
        return corpus.load_corpus(_require(config, "train_path"))
    except OSError as exc:
        raise DataError(str(exc)) from exc


def _load_augments(config: PipelineConfig) -> list[corpus.ProblemRecord]:
    if not config.augments_path:
        return []
    try:
        return corpus.load_corpus(config.augments_path).records
    except OSError as exc:
        raise DataError(str(exc)) from exc


def _pool_records(config: PipelineConfig):
    records = list(_load_train_corpus(config).records)
    if config.retrieval_include_augments or config.include_augments_as_anchors:
        records.extend(_load_augments(config))
    return records


def _build_pool(config: PipelineConfig) -> retrieval.CandidatePool:
    embeddings = None
    if config.embeddings_path:
        embeddings = load_embedding_table(config.embeddings_path)
    return retrieval.CandidatePool.build(_pool_records(config), embeddings)


def _anchors(pool: retrieval.CandidatePool, config: PipelineConfig):
    if config.include_augments_as_anchors:
        return list(pool.records)
    return [r for r in pool.records if r.origin == "train"]


def _save_augments(augments, path, header):
    with open(path, "w", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        for item in augments:
            extra = {
                "base_id": item.base_id,
                "method": item.method,
                "slot_permutation": sorted(item.slot_permutation.items()),
                "target_var": item.target_var,
            }
            fh.write(corpus.record_to_json(item.record, extra) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_ingest(config: PipelineConfig) -> int:
    loaded, lossy = corpus.ingest_corpus(_require(config, "raw_path"),
                                         rules=config.rules())
    path = _out_path(config, "corpus.jsonl")
    corpus.save_corpus(loaded, path, provenance(config, "-"))
    print(f"ingested {len(loaded)} records -> {path}")
    if lossy:
        print(f"fraction slotting lost surface forms for {len(lossy)} records: "
              + " ".join(lossy[:10]) + (" ..." if len(lossy) > 10 else ""))
    return 0


def cmd_simmatrix(config: PipelineConfig) -> int:
    loaded = _load_train_corpus(config)
    matrix = build_similarity_matrix(list(loaded.template_index))
    path = _out_path(config, "simmatrix.txt")
    matrix.save(path, provenance(config, "-"))
    print(f"{len(matrix.keys)} templates ({TED_BACKEND} TED backend) -> {path}")
    return 0


def cmd_augment(config: PipelineConfig) -> int:
    loaded = _load_train_corpus(config)
    augments = augment.augment_corpus(
        loaded, methods=_methods(config), targets=config.augment_targets,
        seed=config.augment_seed, rules=config.rules())
    path = _out_path(config, "augments.jsonl")
    _save_augments(augments, path, provenance(config, config.augment_seed))
    coverage = augment.roda_coverage(loaded)
    print(f"{len(augments)} augments -> {path}")
    print(f"roda coverage: {coverage:.3f} of records have an eligible target")
    return 0


def cmd_challenge_set(config: PipelineConfig) -> int:
    loaded = _load_train_corpus(config)
    sample = augment.generate_challenge_set(
        loaded, seed=config.challenge_seed, size=config.challenge_size,
        methods=_methods(config), rules=config.rules())
    path = _out_path(config, "challenge.jsonl")
    _save_augments(sample, path, provenance(config, config.challenge_seed))
    print(f"{len(sample)} challenge records -> {path}")
    return 0


def cmd_retrieve(config: PipelineConfig) -> int:
    pool = _build_pool(config)
    triplets, failures = retrieval.retrieve_all(
        pool, config.retrieval_strategy, config.retrieval_metric,
        seed=config.retrieval_seed, anchors=_anchors(pool, config))
    path = _out_path(config, "triplets.jsonl")
    retrieval.save_triplets(triplets, path, provenance(config, config.retrieval_seed))
    print(f"{len(triplets)} triplets ({config.retrieval_strategy}/{config.retrieval_metric}) -> {path}")
    if failures:
        print(f"{len(failures)} anchors skipped, e.g. {failures[0][0]}: {failures[0][1]}")
    return 0


def _load_triplets_for(config: PipelineConfig) -> list[retrieval.TripletPair]:
    path = config.triplets_path or str(Path(config.out_dir) / "triplets.jsonl")
    try:
        return retrieval.load_triplets(path)
    except OSError as exc:
        raise DataError(str(exc)) from exc


def cmd_train(config: PipelineConfig) -> int:
    records = list(_load_train_corpus(config).records) + _load_augments(config)
    by_id = {r.id: r for r in records}
    triplets = _load_triplets_for(config)
    params = trainer.init_params(records, dim=config.trainer_dim,
                                 template_classes=config.trainer_classes,
                                 seed=config.trainer_seed)
    lines: list[str] = []
    params = trainer.train(triplets, by_id, params, config.train_config(),
                           metrics_sink=lines.append)
    header = provenance(config, config.trainer_seed)
    ckpt = _out_path(config, "checkpoint.txt")
    trainer.save_checkpoint(params, ckpt, header)
    metrics_path = _out_path(config, "metrics.txt")
    with open(metrics_path, "w", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("".join(line + "\n" for line in lines))
    print(f"trained {config.trainer_steps} steps -> {ckpt}")
    if lines:
        print(f"final: {lines[-1]}")
    return 0


def _eval_metrics(config: PipelineConfig, params) -> dict:
    records = list(_load_train_corpus(config).records) + _load_augments(config)
    triplets = _load_triplets_for(config)
    return trainer.eval_representation(records, triplets, params)


def cmd_eval(config: PipelineConfig) -> int:
    params = trainer.load_checkpoint(_require(config, "checkpoint_path"))
    metrics = _eval_metrics(config, params)
    path = _out_path(config, "eval.txt")
    with open(path, "w", encoding="utf-8") as fh:
        for line in provenance(config, "-"):
            fh.write(f"# {line}\n")
        for key, value in metrics.items():
            fh.write(f"{key} {value:.9g}\n")
            print(f"{key} {value:.9g}")
    return 0


def cmd_dump_embeddings(config: PipelineConfig) -> int:
    records = list(_load_train_corpus(config).records) + _load_augments(config)
    if config.checkpoint_path:
        params = trainer.load_checkpoint(config.checkpoint_path)
    else:
        params = trainer.init_params(records, dim=config.trainer_dim,
                                     template_classes=config.trainer_classes,
                                     seed=config.trainer_seed)
    path = _out_path(config, "embeddings.txt")
    trainer.dump_embeddings(records, params, path, provenance(config, params.rng_seed))
    print(f"{len(records)} embeddings (dim {params.dim}) -> {path}")
    return 0


def cmd_strategy_grid(config: PipelineConfig) -> int:
    """Run the retrieval-strategy ablation grid: {em,nn} equation
    strategies crossed with {random, embedcos, bibleu} text metrics; each
    cell retrieves, trains briefly and reports representation metrics."""
    pool = _build_pool(config)
    anchors = _anchors(pool, config)
    by_id = {r.id: r for r in pool.records}
    out_lines = []
    for eq_strategy in retrieval.EQ_STRATEGIES:
        for metric in ("random", "embedcos", "bibleu"):
            triplets, failures = retrieval.retrieve_all(
                pool, eq_strategy, metric,
                seed=config.retrieval_seed, anchors=anchors)
            if not triplets:
                out_lines.append(f"eq={eq_strategy} text={metric} skipped (no triplets)")
                continue
            params = trainer.init_params(pool.records, dim=config.trainer_dim,
                                         template_classes=config.trainer_classes,
                                         seed=config.trainer_seed)
            cell_config = config.train_config()
            cell_config.steps = config.grid_steps
            params = trainer.train(triplets, by_id, params, cell_config)
            metrics = trainer.eval_representation(pool.records, triplets, params)
            out_lines.append(
                f"eq={eq_strategy} text={metric} triplets={len(triplets)} "
                f"skipped={len(failures)} gap={metrics['gap']:.4f} "
                f"retrieval@1={metrics['same_template_retrieval_at_1']:.4f}")
    path = _out_path(config, "grid.txt")
    with open(path, "w", encoding="utf-8") as fh:
        for line in provenance(config, config.retrieval_seed):
            fh.write(f"# {line}\n")
        fh.write("".join(line + "\n" for line in out_lines))
    for line in out_lines:
        print(line)
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "simmatrix": cmd_simmatrix,
    "augment": cmd_augment,
    "challenge-set": cmd_challenge_set,
    "retrieve": cmd_retrieve,
    "train": cmd_train,
    "eval": cmd_eval,
    "dump-embeddings": cmd_dump_embeddings,
    "strategy-grid": cmd_strategy_grid,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mwpcl",
        description="Hard-triplet contrastive learning pipeline for math word problems.")
    parser.add_argument("--version", action="version", version=f"mwpcl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        cmd = sub.add_parser(name, help=func.__doc__ or name)
        cmd.add_argument("--config", help="flat key=value config file")
        cmd.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                         help="override a config key (repeatable)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, args.set)
        return COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except MwpclError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
