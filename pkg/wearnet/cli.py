"""
`wearnet` command line: dataset generation, training, k-fold evaluation, pairwise prediction,
triplet composition, config schema and the attention ablation.

Results go to stdout; logs and diagnostics go to stderr. Exit codes: 0 success, 1 failed
operation (I/O, dataset or checkpoint problems), 2 usage error (bad flags or values).
"""

import json
import logging
import sys
from pathlib import Path
from typing import Annotated, List, Optional, Sequence

import numpy as np
import pandas as pd
import pydantic
from pydantic import Field

from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import fold_split, read_dataset, read_scene, select, write_dataset
from .decorators import command
from .dispatch import CommandDispatch
from .evaluation import ABLATION_VARIANTS, kfold_eval, run_ablation, write_ablation
from .models import GeneratorConfig, RunConfig, TrainConfig, load_run_config
from .network import build_model
from .relation import compose_triplet, confidence_matrix
from .synth import generate_samples
from .train import train
from .utils import CommandError, WearnetError, validation_error_to_diagnostic, write_json

logger = logging.getLogger(__name__)

Probability = Annotated[float, Field(ge=0.0, le=1.0)]
Threads = Annotated[int, Field(ge=1)]


def _merge(model: type, base: pydantic.BaseModel, **overrides):
    """Validated copy of `base` with the non-None overrides applied."""
    values = base.model_dump()
    values.update({key: value for key, value in overrides.items() if value is not None})
    return model.model_validate(values)


@command
def cmd_gen_data(
    out: Path,
    count: Optional[int] = None,
    seed: Optional[int] = None,
    image_size: Optional[int] = None,
    unworn_ratio: Optional[float] = None,
    config: Optional[Path] = None,
    threads: Threads = 1,
):
    """Generate a synthetic person/clothing dataset.

    Args:
        out: Directory to write the dataset into.
        count: Number of pair samples (default 2000).
        seed: Generator seed (default 0).
        image_size: Square image size in pixels (default 64).
        unworn_ratio: Share of unworn samples (default 11126/29852).
        config: Run config JSON whose `generator` section provides the defaults.
        threads: Worker threads; results are identical for any value.
    """
    cfg = _merge(
        GeneratorConfig,
        load_run_config(config).generator,
        count=count,
        seed=seed,
        image_size=image_size,
        unworn_ratio=unworn_ratio,
    )
    manifest = write_dataset(generate_samples(cfg, threads=threads), out, cfg)
    for label, total in manifest.class_counts().items():
        print(f"{label}\t{total}")
    print(f"val folds\t{' '.join(str(n) for n in manifest.fold_sizes().values())}")


def _check_compatible(run: RunConfig, manifest) -> None:
    size = manifest.generator.image_size
    if size != run.model.input_size:
        raise CommandError(
            f"dataset images are {size}x{size} but model.input_size is {run.model.input_size}; "
            f"set model.input_size to {size} in the run config"
        )


@command
def cmd_train(
    data: Path,
    out: Path,
    config: Optional[Path] = None,
    seed: Optional[int] = None,
    epochs: Optional[int] = None,
):
    """Train a classifier and keep the epoch with the best validation accuracy.

    Args:
        data: Dataset directory written by gen-data.
        out: Directory for the checkpoint, history.json and the run config used.
        config: Run config JSON; built-in defaults when omitted.
        seed: Overrides train.seed (initialisation, shuffling, dropout).
        epochs: Overrides train.epochs.
    """
    run = load_run_config(config)
    train_cfg = _merge(TrainConfig, run.train, seed=seed, epochs=epochs)
    run = run.model_copy(update={"train": train_cfg})
    manifest, samples = read_dataset(data)
    _check_compatible(run, manifest)
    model = build_model(run.model, seed=train_cfg.seed)
    result = train(
        model,
        select(manifest, samples, "train"),
        select(manifest, samples, fold_split(train_cfg.val_fold)),
        train_cfg,
    )
    save_checkpoint(
        model,
        out,
        state=result.best_state,
        metadata={"best_epoch": result.best_epoch, "best_val_accuracy": result.best_val_accuracy},
    )
    write_json(Path(out) / "history.json", result.history_rows())
    Path(out, "run_config.json").write_text(run.model_dump_json(indent=2) + "\n")
    print(f"best epoch {result.best_epoch}: val accuracy {result.best_val_accuracy:.4f}")


@command
def cmd_eval(
    model: Path,
    data: Path,
    folds: Annotated[int, Field(ge=1)] = 10,
    roc: Optional[Path] = None,
    out: Optional[Path] = None,
    threshold: Probability = 0.5,
    threads: Threads = 1,
):
    """Evaluate a checkpoint on every validation fold and print mean ± std per metric.

    Args:
        model: Checkpoint directory written by train.
        data: Dataset directory with fold assignments.
        folds: Number of validation folds to evaluate.
        roc: CSV file for the pooled ROC curve (threshold,fpr,tpr).
        out: Directory for report.json and folds.csv.
        threshold: Scores at or above this predict worn.
        threads: Worker threads for per-fold scoring.
    """
    net = load_checkpoint(model)
    manifest, samples = read_dataset(data)
    report = kfold_eval(net, manifest, samples, k=folds, threshold=threshold, threads=threads)
    print(report.table())
    if report.roc is not None:
        print(f"AUC {report.roc.auc:.4f}")
    if roc is not None:
        report.write_roc_csv(roc)
    if out is not None:
        report.write(out)


def _broadcast(name: str, values: Optional[List[float]], size: int) -> Optional[np.ndarray]:
    if values is None:
        return None
    if len(values) == 1:
        return np.full(size, values[0])
    if len(values) != size:
        raise CommandError(f"--{name} takes 1 or {size} values, got {len(values)}")
    return np.asarray(values, dtype=np.float64)


def _matrix_frame(matrix: np.ndarray) -> pd.DataFrame:
    rows, cols = matrix.shape
    return pd.DataFrame(
        matrix,
        index=[f"person {i}" for i in range(rows)],
        columns=[f"clothing {j}" for j in range(cols)],
    )


@command
def cmd_predict(
    model: Path,
    scene: Path,
    ps: Optional[List[Probability]] = None,
    po: Optional[List[Probability]] = None,
    out: Optional[Path] = None,
):
    """Pairwise worn-confidence matrix for every person and clothing mask in a scene.

    Args:
        model: Checkpoint directory written by train.
        scene: Scene JSON file (e.g. <dataset>/scenes/000000.json).
        ps: Person detector confidences p(S|I); one value for all persons or one per person.
        po: Clothing detector confidences p(O|I); one value for all or one per clothing mask.
        out: CSV file for the matrix; the joint matrix goes next to it with a `.joint` suffix.
    """
    net = load_checkpoint(model)
    sc = read_scene(scene)
    pairs = [(i, j) for i in range(len(sc.persons)) for j in range(len(sc.clothes))]
    scores = net.predict(
        np.stack([sc.image] * len(pairs)),
        np.stack([sc.persons[i] for i, _ in pairs]),
        np.stack([sc.clothes[j] for _, j in pairs]),
    )
    matrix = scores.reshape(len(sc.persons), len(sc.clothes))
    frames = {"p(P|S,O,I)": _matrix_frame(matrix)}
    if ps is not None or po is not None:
        joint = confidence_matrix(
            matrix, _broadcast("ps", ps, matrix.shape[0]), _broadcast("po", po, matrix.shape[1])
        )
        frames["p(S,P,O|I)"] = _matrix_frame(joint)
    for title, frame in frames.items():
        print(title)
        print(frame.to_string(float_format=lambda v: f"{v:.4f}"))
    if out is not None:
        out = Path(out)
        frames["p(P|S,O,I)"].to_csv(out, float_format="%.10g")
        if "p(S,P,O|I)" in frames:
            frames["p(S,P,O|I)"].to_csv(out.with_suffix(".joint" + out.suffix), float_format="%.10g")


@command
def cmd_compose(ps: Probability, po: Probability, pp: Probability):
    """Joint triplet confidence p(S,P,O|I) = p(S|I) × p(O|I) × p(P|S,O,I).

    Args:
        ps: Person detector confidence p(S|I).
        po: Clothing detector confidence p(O|I).
        pp: Predicate probability p(P|S,O,I).
    """
    print(compose_triplet(ps, po, pp).model_dump_json())


@command
def cmd_schema():
    """Print the JSON schema of the run config document."""
    print(json.dumps(RunConfig.model_json_schema(), indent=2))


@command
def cmd_ablate(
    data: Path,
    out: Path,
    config: Optional[Path] = None,
    variants: Optional[List[str]] = None,
    seeds: Optional[List[int]] = None,
    folds: Optional[int] = None,
):
    """Train and evaluate each attention variant on the same data and seeds.

    Args:
        data: Dataset directory written by gen-data.
        out: Directory for ablation.csv and ablation_summary.json.
        config: Run config JSON shared by every variant.
        variants: Subset of soft-all, soft-first, hard, box-all, box-first, none.
        seeds: Training seeds (default 0).
        folds: Validation folds to evaluate (default: all in the manifest).
    """
    run = load_run_config(config)
    manifest, samples = read_dataset(data)
    _check_compatible(run, manifest)
    frame = run_ablation(
        manifest,
        samples,
        run,
        variants=variants or tuple(ABLATION_VARIANTS),
        seeds=seeds or (0,),
        k=folds,
    )
    write_ablation(frame, out)
    print(frame.to_string(index=False, float_format=lambda v: f"{v:.4f}"))


def build_dispatch() -> CommandDispatch:
    dispatch = CommandDispatch(
        cmd_gen_data,
        cmd_train,
        cmd_eval,
        cmd_predict,
        cmd_compose,
        cmd_schema,
        cmd_ablate,
        prog="wearnet",
        description="Person/clothing worn-relationship classification with soft attention.",
    )
    dispatch.add_global_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level.")
    return dispatch


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    dispatch = build_dispatch()
    try:
        name, kwargs, options = dispatch.parse(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(
        level=logging.DEBUG if options.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        dispatch[name](**kwargs)
    except pydantic.ValidationError as exc:
        print(validation_error_to_diagnostic(exc, prefix=f"wearnet {name}: invalid arguments"), file=sys.stderr)
        return 2
    except (WearnetError, OSError) as exc:
        print(f"wearnet {name}: error: {exc}", file=sys.stderr)
        return 1
    return 0
