"""
Pipeline Engine

Runs the pipeline stages over the manifest and run-directory layout:

    <runs>/stage1/fold_<k>/{best.afck,last.afck,metrics.jsonl}
    <scores>/fold_<k>.csv            fold-k predictions: its held-out train videos plus val/test
    <scores>/vectors/<video_id>.csv  fold score vectors [V1..VK, A1..AK]
    <runs>/stage2/{best.afck,metrics.jsonl,predictions.csv}
    <runs>/au/{best.afck,metrics.jsonl}

Stage-1 folds are independent and may train in parallel worker threads.

Fold score vectors of train videos are out-of-fold: every one of the K slots
holds the prediction of the single fold model that held the video out, so
no stage-2 training input comes from a model that saw the video. Val and
test videos get one slot per fold model.
"""

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import structlog

from .config import TrainConfig
from .data.afb1 import VideoRecord
from .data.manifest import Manifest, load_records, read_manifest, write_manifest
from .data.scores import read_fold_scores, read_scores, write_fold_scores, write_scores
from .ensemble import (
    FoldAssignment,
    FoldScoreSequence,
    average_folds,
    build_fold_scores,
    kfold_split,
)
from .errors import AffectError, ConfigurationError, MissingFoldError
from .metrics import CccResult, ccc_va
from .registry import TrainerRegistry
from .training import (
    BEST_CHECKPOINT,
    AuTrainer,
    EvaluationReport,
    Stage1Trainer,
    Stage2Trainer,
    TrainingResult,
    load_checkpoint,
    score_records,
)
from .training.evaluate import au_report

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]


def fold_run_dir(runs_dir: PathLike, fold: int) -> Path:
    return Path(runs_dir) / "stage1" / f"fold_{fold}"


def fold_score_file(scores_dir: PathLike, fold: int) -> Path:
    return Path(scores_dir) / f"fold_{fold}.csv"


def vector_file(scores_dir: PathLike, video_id: str) -> Path:
    return Path(scores_dir) / "vectors" / f"{video_id}.csv"


def _manifest(manifest: Union[Manifest, PathLike]) -> Manifest:
    return manifest if isinstance(manifest, Manifest) else read_manifest(manifest)


def split_folds(manifest_path: PathLike, k: int = 5, seed: int = 0) -> Manifest:
    """
    Assign the manifest's train videos to ``k`` folds and rewrite it in place.

    Returns:
        The updated manifest
    """
    manifest = read_manifest(manifest_path)
    assignment = kfold_split(manifest.ids("train"), k=k, seed=seed)
    updated = manifest.with_folds(assignment.folds)
    write_manifest(manifest_path, updated)
    return updated


def _input_dim(records: Dict[str, VideoRecord]) -> int:
    dims = {r.feat_dim for r in records.values()}
    if len(dims) != 1:
        raise ConfigurationError("Videos differ in feature width", key="input_dim",
                                 widths=", ".join(str(d) for d in sorted(dims)))
    return dims.pop()


def _fold_assignment(manifest: Manifest, k: int) -> FoldAssignment:
    """
    The manifest's train-video folds as an assignment over ``k`` folds.

    Raises:
        ConfigurationError: If train videos lack a fold or a fold is not below k
    """
    if not manifest.has_folds():
        raise ConfigurationError("Train videos have no fold assignment; run split first",
                                 key="k_folds")
    train = manifest.by_split("train")
    outside = sorted({e.fold for e in train if not 0 <= e.fold < k})
    if outside:
        raise ConfigurationError(f"Manifest folds {outside} are outside 0..{k - 1}",
                                 key="k_folds", expected=str(k))
    return FoldAssignment(k, {e.video_id: e.fold for e in train})


def _train_fold(config: TrainConfig, fold: int, records: Dict[str, VideoRecord],
                assignment: FoldAssignment, runs_dir: PathLike) -> TrainingResult:
    train = [records[vid] for vid in assignment.folds if assignment.fold_of(vid) != fold]
    held_out = [records[vid] for vid in assignment.videos_in(fold)]
    trainer = Stage1Trainer(config, _input_dim(records), run_dir=fold_run_dir(runs_dir, fold))
    trainer.logger = trainer.logger.bind(fold=fold)
    return trainer.fit(train, held_out or None)


def train_stage1(config: TrainConfig, manifest: Union[Manifest, PathLike],
                 runs_dir: PathLike, folds: Optional[Sequence[int]] = None,
                 max_workers: int = 1) -> Dict[int, TrainingResult]:
    """
    Train one stage-1 model per fold.

    Fold k trains on the train videos outside fold k and selects its best
    epoch on the held-out fold k videos.

    Args:
        config: Stage-1 configuration
        manifest: Manifest (or its path) with fold assignments
        runs_dir: Root run directory
        folds: Folds to train (all when omitted)
        max_workers: Folds trained concurrently

    Returns:
        Map of fold index to training result

    Raises:
        ConfigurationError: If the train videos are not assigned to folds
    """
    manifest = _manifest(manifest)
    assignment = _fold_assignment(manifest, config.k_folds)
    available = manifest.folds()
    if len(available) != config.k_folds:
        raise ConfigurationError(
            f"Manifest has {len(available)} folds, config expects {config.k_folds}",
            key="k_folds", expected=str(len(available)))
    folds = list(folds) if folds is not None else available
    unknown = sorted(set(folds) - set(available))
    if unknown:
        raise MissingFoldError("Requested folds are not in the manifest", folds=unknown)

    records = load_records(manifest, "train")
    results: Dict[int, TrainingResult] = {}
    logger.info("Stage-1 training started", folds=folds, workers=max_workers)
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as executor:
        future_to_fold = {
            executor.submit(_train_fold, config, fold, records, assignment, runs_dir): fold
            for fold in folds
        }
        for future in as_completed(future_to_fold):
            fold = future_to_fold[future]
            try:
                results[fold] = future.result()
            except AffectError as e:
                logger.error("Fold training failed", fold=fold, error=str(e))
                raise
            logger.info("Fold training completed", fold=fold,
                        best_score=results[fold].best_score,
                        best_epoch=results[fold].best_epoch)
    return dict(sorted(results.items()))


def _fold_checkpoints(runs_dir: PathLike, k: int) -> Dict[int, Path]:
    paths = {fold: fold_run_dir(runs_dir, fold) / BEST_CHECKPOINT for fold in range(k)}
    missing = [fold for fold, path in paths.items() if not path.exists()]
    if missing:
        raise MissingFoldError("Stage-1 checkpoints are missing", folds=missing,
                               runs_dir=str(runs_dir))
    return paths


def infer_folds(manifest: Union[Manifest, PathLike], runs_dir: PathLike, scores_dir: PathLike,
                k: Optional[int] = None, max_workers: int = 1) -> Dict[str, FoldScoreSequence]:
    """
    Build the stage-2 input vectors from the fold models.

    Fold model k scores the train videos it held out plus every val and
    test video, written to ``fold_<k>.csv``. A train video's vector repeats
    its own fold model's prediction in all K slots; a val or test video's
    vector holds all K fold models' predictions. One vector file is written
    per video.

    Returns:
        Map of video id to its fold score vectors

    Raises:
        ConfigurationError: If the train videos' folds do not fit ``k``
        MissingFoldError: Listing the folds without a best checkpoint
    """
    manifest = _manifest(manifest)
    k = k if k is not None else len(manifest.folds())
    assignment = _fold_assignment(manifest, k)
    paths = _fold_checkpoints(runs_dir, k)
    records = load_records(manifest)
    unseen = [vid for vid in records if vid not in assignment.folds]

    def predict_fold(fold: int) -> Dict[str, np.ndarray]:
        trainer = Stage1Trainer.from_checkpoint(paths[fold])
        predictions = {vid: trainer.predict(records[vid])
                       for vid in assignment.videos_in(fold) + unseen}
        write_scores(fold_score_file(scores_dir, fold), predictions)
        return predictions

    per_fold: Dict[int, Dict[str, np.ndarray]] = {}
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as executor:
        future_to_fold = {executor.submit(predict_fold, fold): fold for fold in range(k)}
        for future in as_completed(future_to_fold):
            fold = future_to_fold[future]
            per_fold[fold] = future.result()
            logger.info("Fold inference completed", fold=fold, videos=len(per_fold[fold]))

    sequences = {}
    for vid in records:
        if vid in assignment.folds:
            streams = [per_fold[assignment.fold_of(vid)][vid]] * k
        else:
            streams = [per_fold[fold][vid] for fold in range(k)]
        sequence = build_fold_scores(vid, streams)
        write_fold_scores(vector_file(scores_dir, vid), sequence)
        sequences[vid] = sequence
    logger.info("Fold score vectors written", videos=len(sequences), k=k,
                scores_dir=str(scores_dir))
    return sequences


def load_fold_sequences(manifest: Manifest, scores_dir: PathLike,
                        k: int, split: Optional[str] = None) -> List[FoldScoreSequence]:
    """
    Read the fold score vector files of a manifest's videos.

    Raises:
        MissingFoldError: If per-fold score files are missing, naming the folds
    """
    missing = [fold for fold in range(k) if not fold_score_file(scores_dir, fold).exists()]
    if missing:
        raise MissingFoldError("Fold score files are missing", folds=missing,
                               scores_dir=str(scores_dir))
    ids = manifest.ids(split)
    return [read_fold_scores(vector_file(scores_dir, vid), video_id=vid) for vid in ids]


def _va_labels(manifest: Manifest, split: Optional[str] = None) -> Dict[str, np.ndarray]:
    records = load_records(manifest, split)
    return {vid: r.labels for vid, r in records.items() if r.labels is not None}


def train_stage2(config: TrainConfig, manifest: Union[Manifest, PathLike],
                 scores_dir: PathLike, runs_dir: PathLike,
                 run_name: str = "stage2") -> TrainingResult:
    """
    Train the stacker on the fold score vectors of the train split.

    The best checkpoint's predictions for every video are written to
    ``predictions.csv`` in the run directory.

    Raises:
        MissingFoldError: If any fold score file is missing
    """
    manifest = _manifest(manifest)
    sequences = load_fold_sequences(manifest, scores_dir, config.k_folds)
    labels = _va_labels(manifest)
    records = {r.video_id: r for r in score_records(sequences, labels)}
    train = [records[vid] for vid in manifest.ids("train")]
    val = [records[vid] for vid in manifest.ids("val")]

    run_dir = Path(runs_dir) / run_name
    trainer = Stage2Trainer(config, 2 * sequences[0].k, run_dir=run_dir)
    result = trainer.fit(train, val or None)

    best = Stage2Trainer.from_checkpoint(run_dir / BEST_CHECKPOINT)
    write_scores(run_dir / "predictions.csv",
                 {vid: best.predict(record) for vid, record in records.items()})
    return result


def train_au(config: TrainConfig, manifest: Union[Manifest, PathLike],
             runs_dir: PathLike) -> TrainingResult:
    """Train the AU detector on the train split, selecting on val when present."""
    manifest = _manifest(manifest)
    train = list(load_records(manifest, "train").values())
    val = list(load_records(manifest, "val").values()) if manifest.ids("val") else None
    if not train:
        raise ConfigurationError("No videos in the train split", key="split", task="au")
    trainer = AuTrainer(config, train[0].feat_dim, run_dir=Path(runs_dir) / "au")
    return trainer.fit(train, val)


def evaluate_checkpoint(checkpoint: PathLike, manifest: Union[Manifest, PathLike],
                        split: str = "val",
                        scores_dir: Optional[PathLike] = None) -> EvaluationReport:
    """
    Per-video and pooled metrics of a checkpoint on one manifest split.

    Stage-2 checkpoints read their inputs from ``scores_dir``.

    Raises:
        ConfigurationError: If the split's labels do not fit the checkpoint's task
    """
    manifest = _manifest(manifest)
    state = load_checkpoint(checkpoint)
    trainer_class = TrainerRegistry().get(state.spec.task)
    trainer = trainer_class(state.config, state.spec.input_dim).restore(state)
    if state.spec.task == "stage2":
        if scores_dir is None:
            raise ConfigurationError("Stage-2 evaluation needs the fold score directory",
                                     key="scores_dir")
        sequences = load_fold_sequences(manifest, scores_dir, state.config.k_folds, split)
        records = score_records(sequences, _va_labels(manifest, split))
    else:
        records = list(load_records(manifest, split).values())
    report = trainer.evaluate_records(records)
    logger.info("Checkpoint evaluated", checkpoint=str(checkpoint), split=split,
                task=state.spec.task, **report.pooled)
    return report


@dataclass
class ReportRow:
    """One line of the results table."""

    label: str
    valence: Optional[float] = None
    arousal: Optional[float] = None
    combined: Optional[float] = None
    f1: Optional[float] = None

    @classmethod
    def from_ccc(cls, label: str, result: CccResult) -> "ReportRow":
        return cls(label, result.ccc_v, result.ccc_a, result.combined)


@dataclass
class PipelineReport:
    """Fold table, method comparison and (optionally) AU results."""

    split: str
    folds: List[ReportRow] = field(default_factory=list)
    methods: List[ReportRow] = field(default_factory=list)
    au: List[ReportRow] = field(default_factory=list)
    per_au: Dict[str, float] = field(default_factory=dict)


def build_report(manifest: Union[Manifest, PathLike], scores_dir: PathLike,
                 split: str = "val", k: Optional[int] = None,
                 stage2_checkpoints: Optional[Dict[str, PathLike]] = None,
                 au_checkpoint: Optional[PathLike] = None,
                 au_manifest: Optional[Union[Manifest, PathLike]] = None) -> PipelineReport:
    """
    Assemble the results tables.

    Fold rows score each fold's predictions on ``split``; the Average row
    scores the per-frame mean of all folds. The method table lists the best
    single fold ("GRU + Transformer") and each given stage-2 checkpoint
    (labelled by its key, e.g. "GRU" and "GRU + Attention").

    Args:
        manifest: Manifest or its path
        scores_dir: Directory written by ``infer_folds``
        split: "val" or "test"; train videos are scored by one fold model only
        k: Fold count (from the manifest when omitted)
        stage2_checkpoints: Row label to stage-2 checkpoint
        au_checkpoint: AU checkpoint for the AU table
        au_manifest: Manifest of the AU-labelled videos (``manifest`` when omitted)

    Returns:
        PipelineReport
    """
    manifest = _manifest(manifest)
    if split not in ("val", "test"):
        raise ConfigurationError("Fold tables score videos every fold model predicts",
                                 key="split", expected="val or test")
    k = k if k is not None else len(manifest.folds())
    labels = _va_labels(manifest, split)
    if not labels:
        raise ConfigurationError(f"No VA-labelled videos in the {split} split", key="split")
    missing = [fold for fold in range(k) if not fold_score_file(scores_dir, fold).exists()]
    if missing:
        raise MissingFoldError("Fold score files are missing", folds=missing)

    ids = list(labels)
    label_stack = np.concatenate([labels[vid] for vid in ids])
    report = PipelineReport(split)
    fold_predictions = []
    for fold in range(k):
        scores = read_scores(fold_score_file(scores_dir, fold))
        prediction = np.concatenate([scores[vid] for vid in ids])
        fold_predictions.append(prediction)
        report.folds.append(ReportRow.from_ccc(str(fold + 1), ccc_va(prediction, label_stack)))
    averaged = average_folds(build_fold_scores("pooled", fold_predictions))
    report.folds.append(ReportRow.from_ccc("Average", ccc_va(averaged, label_stack)))

    best = max(report.folds[:k], key=lambda row: row.combined)
    report.methods.append(ReportRow("GRU + Transformer", best.valence, best.arousal,
                                    best.combined))
    for name, path in (stage2_checkpoints or {}).items():
        result = evaluate_checkpoint(path, manifest, split, scores_dir)
        report.methods.append(ReportRow(name, result.pooled["valence"],
                                        result.pooled["arousal"], result.pooled["combined"]))

    if au_checkpoint is not None:
        trainer = AuTrainer.from_checkpoint(au_checkpoint)
        au_source = _manifest(au_manifest) if au_manifest is not None else manifest
        au_records = [r for r in load_records(au_source, split).values()
                      if r.label_kind == "au"]
        if not au_records:
            raise ConfigurationError(f"No AU-labelled videos in the {split} split", key="split")
        au_labels = {r.video_id: r.labels for r in au_records}
        full = trainer.evaluate_records(au_records)
        t1_only = au_report({r.video_id: trainer.predict_t1(r) for r in au_records}, au_labels,
                            trainer.config.threshold, trainer.config.f1_average)
        report.au = [ReportRow("Dual Transformer", f1=full.score),
                     ReportRow("T1 only", f1=t1_only.score)]
        report.per_au = full.per_class
    return report
