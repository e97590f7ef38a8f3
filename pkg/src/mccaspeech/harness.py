"""Speaker-independent cross-validation and experiment drivers.

Every speaker lands in exactly one test fold; fold ``i`` validates on test
group ``i + 1`` (cyclically) and trains on the rest, giving an 80/10/10
split with ten folds. Speaker-level decisions come from soft voting: the
mean of a speaker's segment probabilities, pathological iff >= 0.5.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import classify
from .classify import FeatureRanking, MlpConfig, SampleTable
from .decomp import DEFAULT_EPSILON, reduce_segment
from .dsp import StftConfig
from .errors import ArgumentError, ConfigError, MccaSpeechError, PersistenceError
from .matrixio import FeatureMatrix, Manifest, read_fmx, read_wav
from .segmentation import SegmentSpec, segment_utterance, spectrogram_segments

log = logging.getLogger(__name__)


# --- datasets -------------------------------------------------------------------

@dataclass(eq=False)
class Dataset:
    """Segments with per-segment label and speaker."""

    segments: list  # FeatureMatrix or 2-D arrays, all the same shape
    labels: np.ndarray
    speaker_ids: list[str]

    def __post_init__(self):
        self.labels = np.array(self.labels, dtype=np.int64)
        if not (len(self.segments) == self.labels.shape[0] == len(self.speaker_ids)):
            raise ArgumentError("segments, labels and speaker_ids differ in length")

    def speaker_labels(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for spk, lab in zip(self.speaker_ids, self.labels):
            if out.setdefault(spk, int(lab)) != lab:
                raise ArgumentError(f"speaker {spk!r} carries both labels")
        return out

    @classmethod
    def from_synth(cls, data) -> Dataset:
        return cls(list(data.segments), data.labels, list(data.speaker_ids))


def load_dataset(manifest: Manifest, segment_spec: SegmentSpec | None = None,
                 stft_config: StftConfig = StftConfig()) -> Dataset:
    """Load every manifest entry into segments.

    ``.wav`` entries are segmented (default 500 ms, 50% overlap) and each
    segment is transformed with the STFT. ``.fmx`` entries are used as-is,
    unless ``segment_spec`` is given, in which case they are cut along
    their columns.
    """
    segments, labels, speakers = [], [], []
    for entry in manifest:
        path = Path(entry.path)
        if path.suffix.lower() == ".wav":
            segs = spectrogram_segments(read_wav(path), segment_spec or SegmentSpec(), stft_config)
        else:
            m = read_fmx(path)
            segs = segment_utterance(m, segment_spec) if segment_spec else [m]
        segments.extend(segs)
        labels.extend([int(entry.label)] * len(segs))
        speakers.extend([entry.speaker_id] * len(segs))
    if not segments:
        raise ArgumentError("manifest produced no segments")
    return Dataset(segments, labels, speakers)


# --- configuration ---------------------------------------------------------------

@dataclass
class PipelineConfig:
    representation: str = "spectrogram"
    reduction: str = "mcca"
    chunks: int = 8
    components: int = 5
    epsilon: float = DEFAULT_EPSILON
    center: bool = False
    classifier: str = "logreg"
    grid: list[dict] | None = None
    n_folds: int = 10
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    fold_seed: int = 0
    standardize: bool = True

    def __post_init__(self):
        if self.reduction not in ("mcca", "pca", "none"):
            raise ConfigError(f"reduction must be mcca, pca or none, got {self.reduction!r}")
        if self.classifier not in ("logreg", "mlp"):
            raise ConfigError(f"classifier must be logreg or mlp, got {self.classifier!r}")
        if self.reduction == "mcca" and self.chunks < 1:
            raise ConfigError(f"chunks must be >= 1, got {self.chunks}")
        if self.reduction != "none" and self.components < 1:
            raise ConfigError(f"components must be >= 1, got {self.components}")
        if self.n_folds < 3:
            raise ConfigError("at least 3 folds are needed for train/validation/test")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.grid is None:
            self.grid = [{"l2": 1e-2}] if self.classifier == "logreg" else [dict(g) for g in classify.MLP_GRID]
        if not self.grid:
            raise ConfigError("grid must not be empty")
        for entry in self.grid:
            self._model_kwargs(entry)
        self.seeds = [int(s) for s in self.seeds]

    def _model_kwargs(self, entry: dict) -> dict:
        allowed = {"l2"} if self.classifier == "logreg" else set(MlpConfig.__dataclass_fields__)
        unknown = set(entry) - allowed
        if unknown:
            raise ConfigError(f"unknown {self.classifier} grid keys: {sorted(unknown)}")
        if self.classifier == "mlp":
            MlpConfig(**entry)
        return entry

    @classmethod
    def from_dict(cls, d: dict) -> PipelineConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> PipelineConfig:
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)

    def label(self) -> str:
        if self.reduction == "none":
            red = "none"
        elif self.reduction == "pca":
            red = f"pca-t{self.components}"
        else:
            red = f"mcca-M{self.chunks}-t{self.components}"
        return f"{self.representation}/{red}/{self.classifier}"

    @property
    def seed_sensitive(self) -> bool:
        # logistic regression trains deterministically from zero weights
        return self.classifier == "mlp"


def reduce_dataset(dataset: Dataset, config: PipelineConfig) -> SampleTable:
    """Apply the configured reduction to every segment and flatten."""
    reduced = [
        reduce_segment(seg, config.reduction, config.chunks, config.components,
                       config.epsilon, config.center)
        for seg in dataset.segments
    ]
    return classify.table_from_matrices(reduced, dataset.labels, dataset.speaker_ids)


# --- folds ---------------------------------------------------------------------

@dataclass(frozen=True)
class Fold:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[Fold, ...]
    n_folds: int
    seed: int


def _speaker_label_map(source) -> dict[str, int]:
    if isinstance(source, Manifest):
        return {k: int(v) for k, v in source.speakers().items()}
    if isinstance(source, Dataset):
        return source.speaker_labels()
    return {str(k): int(v) for k, v in dict(source).items()}


def stratified_folds(source, n_folds: int = 10, seed: int = 0) -> FoldPlan:
    """Speaker-level stratified folds from a Manifest, Dataset or {speaker: label}.

    Speakers of each class are sorted, shuffled with ``seed`` and dealt
    round-robin into ``n_folds`` test groups (the second class continues
    where the first stopped, keeping group sizes balanced).
    """
    labels = _speaker_label_map(source)
    if n_folds < 3:
        raise ArgumentError("need at least 3 folds")
    rng = np.random.default_rng(seed)
    groups: list[list[str]] = [[] for _ in range(n_folds)]
    pos = 0
    for cls in (0, 1):
        members = sorted(s for s, lab in labels.items() if lab == cls)
        if len(members) < n_folds:
            raise ArgumentError(
                f"class {cls} has {len(members)} speakers, fewer than the {n_folds} folds"
            )
        for i in rng.permutation(len(members)):
            groups[pos % n_folds].append(members[i])
            pos += 1
    folds = []
    for i in range(n_folds):
        test = groups[i]
        val = groups[(i + 1) % n_folds]
        held = set(test) | set(val)
        train = [s for s in sorted(labels) if s not in held]
        folds.append(Fold(tuple(sorted(train)), tuple(sorted(val)), tuple(sorted(test))))
    return FoldPlan(tuple(folds), n_folds, seed)


def speaker_accuracy(segment_probs, labels) -> float:
    """Soft-voting speaker accuracy.

    ``segment_probs`` is an iterable of ``(speaker_id, prob)``; ``labels``
    maps each speaker to 0/1. Speakers without a probability are an error.
    """
    per_speaker: dict[str, list[float]] = {}
    for spk, p in segment_probs:
        per_speaker.setdefault(spk, []).append(float(p))
    missing = [s for s in labels if s not in per_speaker]
    if missing:
        raise ArgumentError(f"no segment probabilities for speakers {missing[:5]}")
    correct = 0
    for spk, lab in labels.items():
        probs = per_speaker[spk]
        # correctly rounded sum: order-independent, and (0.6, 0.7, 0.2) is an exact tie
        decided = math.fsum(probs) >= 0.5 * len(probs)
        correct += int(decided == bool(lab))
    return correct / len(labels)


# --- experiment ------------------------------------------------------------------

@dataclass(eq=False)
class ExperimentReport:
    config: dict
    per_fold_per_seed: np.ndarray  # n_folds x n_seeds test speaker accuracies
    n_features: int
    selections: list[dict] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return self.per_fold_per_seed.reshape(-1)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        # population standard deviation (divisor N)
        return float(np.std(self.values))

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "n_features": self.n_features,
            "per_fold_per_seed": self.per_fold_per_seed.tolist(),
            "mean": self.mean,
            "std": self.std,
            "std_kind": "population",
            "selections": self.selections,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def csv_row(self) -> str:
        label = self.config.get("label", "")
        return f"{label},{self.mean!r},{self.std!r}"


def _standardize(train: np.ndarray, *others: np.ndarray):
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd[sd == 0] = 1.0
    return [(x - mu) / sd for x in (train, *others)]


def _fit(config: PipelineConfig, table: SampleTable, entry: dict, seed: int,
         validation: SampleTable | None):
    if config.classifier == "logreg":
        return classify.train_logreg(table, seed=seed, **entry)
    return classify.train_mlp(table, MlpConfig(**entry), seed=seed, validation=validation)


def _speaker_acc(model, table: SampleTable, labels: dict[str, int]) -> float:
    probs = classify.predict_proba(model, table.features)
    spk = sorted(set(table.speaker_ids))
    return speaker_accuracy(zip(table.speaker_ids, probs), {s: labels[s] for s in spk})


@dataclass(eq=False)
class _Split:
    train: SampleTable
    val: SampleTable
    test: SampleTable


def _split(table: SampleTable, fold: Fold, standardize: bool) -> _Split:
    spk = np.array(table.speaker_ids)
    masks = [np.isin(spk, list(group)) for group in (fold.train, fold.val, fold.test)]
    # speaker independence
    assert not (set(fold.train) & set(fold.val) or set(fold.train) & set(fold.test)
                or set(fold.val) & set(fold.test))
    assert not np.any((masks[0] & masks[1]) | (masks[0] & masks[2]) | (masks[1] & masks[2]))
    parts = [table.rows(m) for m in masks]
    if standardize:
        scaled = _standardize(*(p.features for p in parts))
        parts = [SampleTable(x, p.labels, p.speaker_ids, p.feature_names) for x, p in zip(scaled, parts)]
    return _Split(*parts)


def _run_cell(config: PipelineConfig, table: SampleTable, fold: Fold, seed: int,
              labels: dict[str, int], fold_index: int) -> dict:
    try:
        split = _split(table, fold, config.standardize)
        best = None
        for g, entry in enumerate(config.grid):
            model = _fit(config, split.train, entry, seed, split.val)
            val_acc = _speaker_acc(model, split.val, labels)
            if best is None or val_acc > best[0]:
                best = (val_acc, g, model)
        val_acc, g, model = best
        return {
            "fold": fold_index, "seed": seed, "grid_index": g, "val_accuracy": val_acc,
            "test_accuracy": _speaker_acc(model, split.test, labels), "model": model,
            "split": split,
        }
    except MccaSpeechError as exc:
        raise type(exc)(f"fold {fold_index}, seed {seed}: {exc}") from exc


def _cells(config: PipelineConfig, table: SampleTable, plan: FoldPlan, labels, threads: int):
    tasks = []
    for i, fold in enumerate(plan.folds):
        seeds = config.seeds if config.seed_sensitive else config.seeds[:1]
        tasks.extend((i, fold, s) for s in seeds)

    def work(task):
        i, fold, s = task
        return _run_cell(config, table, fold, s, labels, i)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]
    by_key = {(r["fold"], r["seed"]): r for r in results}
    out = []
    for i in range(plan.n_folds):
        row = []
        for s in config.seeds:
            key = (i, s) if config.seed_sensitive else (i, config.seeds[0])
            r = dict(by_key[key])
            r["seed"] = s
            row.append(r)
        out.append(row)
    return out


def _as_dataset(data) -> Dataset:
    if isinstance(data, Dataset):
        return data
    if isinstance(data, Manifest):
        return load_dataset(data)
    if hasattr(data, "segments") and hasattr(data, "templates"):
        return Dataset.from_synth(data)
    raise ArgumentError(f"cannot build a dataset from {type(data).__name__}")


def _config_echo(config: PipelineConfig, table: SampleTable, dataset: Dataset) -> dict:
    echo = config.to_dict()
    first = dataset.segments[0]
    echo["input_shape"] = list(np.shape(first.data if isinstance(first, FeatureMatrix) else first))
    echo["n_features"] = table.n_features
    echo["n_segments"] = table.n_samples
    echo["label"] = config.label()
    return echo


def _report(config, table, dataset, cells) -> ExperimentReport:
    acc = np.array([[c["test_accuracy"] for c in row] for row in cells])
    selections = [
        {"fold": c["fold"], "seed": c["seed"], "grid_index": c["grid_index"],
         "val_accuracy": c["val_accuracy"], "test_accuracy": c["test_accuracy"]}
        for row in cells for c in row
    ]
    return ExperimentReport(_config_echo(config, table, dataset), acc, table.n_features, selections)


def run_experiment(data, config: PipelineConfig | dict, threads: int = 1,
                   table: SampleTable | None = None) -> ExperimentReport:
    """Cross-validated speaker accuracy over folds x seeds.

    ``data`` is a Manifest, Dataset or synthetic dataset. Grid entries are
    selected per fold and seed on validation speaker accuracy (first entry
    wins ties).
    """
    if isinstance(config, dict):
        config = PipelineConfig.from_dict(config)
    dataset = _as_dataset(data)
    if table is None:
        table = reduce_dataset(dataset, config)
    labels = dataset.speaker_labels()
    plan = stratified_folds(labels, config.n_folds, config.fold_seed)
    cells = _cells(config, table, plan, labels, threads)
    return _report(config, table, dataset, cells)


@dataclass(eq=False)
class SweepResult:
    rows: list[tuple[int, int, ExperimentReport]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["M", "t", "mean", "std"])
        for m, t, rep in self.rows:
            w.writerow([m, t, repr(rep.mean), repr(rep.std)])
        return buf.getvalue()

    def best(self, t: int | None = None) -> int:
        """Chunk count with the highest mean (smallest M on ties)."""
        rows = [r for r in self.rows if t is None or r[1] == t]
        return max(rows, key=lambda r: (r[2].mean, -r[0]))[0]


def sweep_chunks(data, m_values, t_values, config: PipelineConfig | dict | None = None,
                 threads: int = 1) -> SweepResult:
    """One MCCA experiment per (M, t) pair."""
    if config is None:
        config = PipelineConfig()
    elif isinstance(config, dict):
        config = PipelineConfig.from_dict(config)
    dataset = _as_dataset(data)
    rows = []
    for m in m_values:
        for t in t_values:
            cfg = PipelineConfig.from_dict({**config.to_dict(), "reduction": "mcca",
                                            "chunks": int(m), "components": int(t)})
            rows.append((int(m), int(t), run_experiment(dataset, cfg, threads)))
    return SweepResult(rows)


# --- feature selection ------------------------------------------------------------

@dataclass(eq=False)
class SelectionResult:
    baseline: ExperimentReport
    percents: list[float]
    reports: list[ExperimentReport]
    ranking: FeatureRanking  # scores averaged over all folds x seeds

    def to_dict(self) -> dict:
        return {
            "baseline": {"mean": self.baseline.mean, "std": self.baseline.std},
            "percents": self.percents,
            "results": [{"percent": p, "mean": r.mean, "std": r.std,
                         "per_fold_per_seed": r.per_fold_per_seed.tolist()}
                        for p, r in zip(self.percents, self.reports)],
            "top_features": self.ranking.top(min(50, self.ranking.order.size)),
        }


def feature_selection_experiment(data, config: PipelineConfig | dict, percents,
                                 repeats: int = 10, threads: int = 1) -> SelectionResult:
    """Rank features by permutation importance and retrain on top-k subsets.

    Within each fold x seed, the model chosen on validation is ranked by
    permutation importance on its training split; the top ``percent`` of
    that fold's ranking is then retrained with the same hyperparameters and
    scored on the fold's test speakers, so no test speaker informs its own
    selection.
    """
    if isinstance(config, dict):
        config = PipelineConfig.from_dict(config)
    dataset = _as_dataset(data)
    table = reduce_dataset(dataset, config)
    labels = dataset.speaker_labels()
    plan = stratified_folds(labels, config.n_folds, config.fold_seed)
    cells = _cells(config, table, plan, labels, threads)
    baseline = _report(config, table, dataset, cells)

    percents = [float(p) for p in percents]
    acc = np.zeros((len(percents), plan.n_folds, len(config.seeds)))
    score_sum = np.zeros(table.n_features)
    cache: dict[tuple, tuple] = {}
    for i, row in enumerate(cells):
        for j, cell in enumerate(row):
            seed = cell["seed"]
            key = (i, seed if config.seed_sensitive else None)
            if key not in cache:
                split = cell["split"]
                ranking = classify.permutation_importance(cell["model"], split.train, repeats, seed)
                entry = config.grid[cell["grid_index"]]
                scores = []
                for p in percents:
                    k = classify.top_k_count(table.n_features, p)
                    cols = ranking.order[:k]
                    model = _fit(config, split.train.columns(cols), entry, seed, split.val.columns(cols))
                    scores.append(_speaker_acc(model, split.test.columns(cols), labels))
                cache[key] = (ranking, scores)
            ranking, scores = cache[key]
            score_sum += ranking.scores
            acc[:, i, j] = scores

    reports = []
    for pi, p in enumerate(percents):
        echo = dict(baseline.config, top_percent=p)
        reports.append(ExperimentReport(echo, acc[pi], classify.top_k_count(table.n_features, p)))
    n_cells = plan.n_folds * len(config.seeds)
    avg = FeatureRanking.from_scores(score_sum / n_cells, feature_names=table.feature_names)
    return SelectionResult(baseline, percents, reports, avg)


def write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc
