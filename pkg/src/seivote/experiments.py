"""Dataset construction and the quantitative experiment harness.

Covers: synthesizing the labeled feature-image corpus, the accuracy sweep
(observed wrong-winner rate vs acceptable error threshold), the certainty
sweep (votes needed vs threshold, with its linear fit against log10 of the
threshold), the bagging/boosting comparison, and CSV persistence.  Every
trial draws its randomness from a stream keyed by (seed, purpose, indices)
so whole sweeps replay byte-identically.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterator, Protocol, Sequence

import numpy as np

from . import __version__
from .bispectrum import BispectrumImage, featurize, read_feature, write_feature
from .classifier import Classifier, ImageSet
from .rng import derive_seed, substream
from .signals import (
    EmitterProfile,
    IqSignal,
    SubsampleSpec,
    extract_subsample,
    synthesize_emitter_signal,
)
from .voting import Decision, StoppingConfig, decide_sequential

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class CaseLabel:
    """One experimental condition: an emitter at an SNR in one run."""

    case_id: int
    emitter_index: int
    snr_db: float
    run: int


@dataclass(frozen=True)
class DatasetManifest:
    """Everything needed to rebuild a dataset bit-for-bit."""

    emitters: tuple[EmitterProfile, ...]
    snr_levels_db: tuple[float, ...]
    runs_per_setup: int
    samples_per_case: int
    subsample_length: int
    seed: int
    signal_length: int
    block: int = 5
    log_power: bool = False

    def __post_init__(self):
        if not self.emitters:
            raise ValueError("manifest needs at least one emitter")
        if not self.snr_levels_db:
            raise ValueError("manifest needs at least one SNR level")
        if self.runs_per_setup < 1 or self.samples_per_case < 1:
            raise ValueError("runs_per_setup and samples_per_case must be positive")
        if self.subsample_length % self.block != 0:
            raise ValueError(
                f"subsample_length {self.subsample_length} not divisible by block {self.block}"
            )
        if self.signal_length < self.subsample_length:
            raise ValueError("signal_length must be at least subsample_length")
        object.__setattr__(self, "emitters", tuple(self.emitters))
        object.__setattr__(self, "snr_levels_db", tuple(float(s) for s in self.snr_levels_db))

    @property
    def num_cases(self) -> int:
        return len(self.emitters) * len(self.snr_levels_db) * self.runs_per_setup

    @property
    def image_side(self) -> int:
        return self.subsample_length // self.block

    def cases(self) -> list[CaseLabel]:
        out = []
        case_id = 0
        for e_idx in range(len(self.emitters)):
            for snr in self.snr_levels_db:
                for run in range(self.runs_per_setup):
                    out.append(CaseLabel(case_id, e_idx, snr, run))
                    case_id += 1
        return out

    def to_json(self) -> dict:
        d = asdict(self)
        d["emitters"] = [
            {
                "emitter_id": p.emitter_id,
                "poly_coeffs": list(p.poly_coeffs),
                "iq_gain_imbalance": p.iq_gain_imbalance,
                "iq_phase_skew_rad": p.iq_phase_skew_rad,
                "dc_offset": [p.dc_offset.real, p.dc_offset.imag],
            }
            for p in self.emitters
        ]
        d["version"] = __version__
        return d

    @classmethod
    def from_json(cls, d: dict) -> "DatasetManifest":
        d = dict(d)
        d.pop("version", None)
        emitters = tuple(
            EmitterProfile(
                emitter_id=e["emitter_id"],
                poly_coeffs=tuple(e["poly_coeffs"]),
                iq_gain_imbalance=e["iq_gain_imbalance"],
                iq_phase_skew_rad=e["iq_phase_skew_rad"],
                dc_offset=complex(e["dc_offset"][0], e["dc_offset"][1]),
            )
            for e in d.pop("emitters")
        )
        return cls(emitters=emitters, **{k: d[k] for k in d})


def case_signal(manifest: DatasetManifest, case: CaseLabel) -> IqSignal:
    """Synthesize the full recording for one case."""
    profile = manifest.emitters[case.emitter_index]
    return synthesize_emitter_signal(
        profile,
        manifest.signal_length,
        case.snr_db,
        rng_seed=derive_seed(manifest.seed, "signal", case.case_id),
    )


def build_dataset(manifest: DatasetManifest, out_dir: str | Path) -> dict:
    """Synthesize, subsample and featurize every case into train/val/test.

    Layout: one directory per split holding {case_id}_{index}.bsp files,
    plus manifest.json at the root.  Splits use disjoint stream keys so no
    window sequence is shared between them.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    counts = {}
    for split in SPLITS:
        (out_dir / split).mkdir(exist_ok=True)
    for case in manifest.cases():
        signal = case_signal(manifest, case)
        for split in SPLITS:
            spec = SubsampleSpec(
                length_points=manifest.subsample_length,
                rng_seed=derive_seed(manifest.seed, "subsample", split, case.case_id),
            )
            for idx in range(manifest.samples_per_case):
                window = extract_subsample(signal, spec, idx)
                image = featurize(window, block=manifest.block, log_power=manifest.log_power)
                name = f"{case.case_id:04d}_{idx:04d}.bsp"
                write_feature(image, out_dir / split / name)
            counts[split] = counts.get(split, 0) + manifest.samples_per_case
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest.to_json(), indent=2))
    return {"dataset_dir": str(out_dir), "counts": counts, "manifest": str(manifest_path)}


def load_manifest(dataset_dir: str | Path) -> DatasetManifest:
    path = Path(dataset_dir) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"dataset manifest not found: {path}")
    return DatasetManifest.from_json(json.loads(path.read_text()))


def load_split(dataset_dir: str | Path, split: str) -> tuple[ImageSet, np.ndarray]:
    """Load a split as (images labeled by emitter index, case ids)."""
    dataset_dir = Path(dataset_dir)
    manifest = load_manifest(dataset_dir)
    emitter_of_case = {c.case_id: c.emitter_index for c in manifest.cases()}
    split_dir = dataset_dir / split
    if not split_dir.is_dir():
        raise FileNotFoundError(f"split directory not found: {split_dir}")
    pixels, labels, case_ids = [], [], []
    for path in sorted(split_dir.glob("*.bsp")):
        case_id = int(path.stem.split("_")[0])
        image = read_feature(path)
        pixels.append(image.pixels)
        labels.append(emitter_of_case[case_id])
        case_ids.append(case_id)
    if not pixels:
        raise FileNotFoundError(f"no feature files in {split_dir}")
    return ImageSet(np.stack(pixels), np.asarray(labels)), np.asarray(case_ids)


class VoteSource(Protocol):
    """Anything that can emit an endless vote stream for a true case."""

    def stream(self, true_case: int, *decision_key: int | str) -> Iterator[int]: ...


@dataclass
class DatasetVoter:
    """Votes by classifying random test images of the true case."""

    model: Classifier
    images_by_case: dict[int, np.ndarray]
    rng_seed: int = 0

    @classmethod
    def from_split(
        cls, model: Classifier, dataset_dir: str | Path, split: str = "test", rng_seed: int = 0
    ) -> "DatasetVoter":
        images, case_ids = load_split(dataset_dir, split)
        by_case: dict[int, list] = {}
        for pix, cid in zip(images.pixels, case_ids):
            by_case.setdefault(int(cid), []).append(pix)
        return cls(
            model=model,
            images_by_case={c: np.stack(v) for c, v in by_case.items()},
            rng_seed=rng_seed,
        )

    def stream(self, true_case: int, *decision_key: int | str) -> Iterator[int]:
        pool = self.images_by_case[true_case]
        rng = substream(self.rng_seed, "dataset-voter", true_case, *decision_key)
        while True:
            idx = int(rng.integers(0, pool.shape[0]))
            yield self.model.classify(BispectrumImage(pixels=pool[idx]))


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    trials: int
    wrong: int
    inconclusive: int
    max_votes_used: int
    mean_votes_used: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]

    def __post_init__(self):
        thresholds = [r.threshold for r in self.rows]
        if any(t2 >= t1 for t1, t2 in zip(thresholds, thresholds[1:])):
            raise ValueError("thresholds must be strictly decreasing")
        if any(r.wrong > r.trials for r in self.rows):
            raise ValueError("wrong count cannot exceed trials")
        object.__setattr__(self, "rows", tuple(self.rows))


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float


def _validated_thresholds(thresholds: Sequence[float]) -> list[float]:
    out = [float(t) for t in thresholds]
    if any(not (0.0 < t < 0.5) for t in out):
        raise ValueError(f"thresholds must lie in (0, 0.5): {out}")
    return sorted(out, reverse=True)


def accuracy_sweep(
    voter: VoteSource,
    truth: Sequence[int],
    thresholds: Sequence[float],
    trials_per_threshold: int,
    rule: str = "preponderance",
    seed: int = 0,
    max_votes: int = 10000,
) -> SweepResult:
    """Observed error statistics per acceptable-error threshold.

    ``truth`` maps case index -> true class; each trial draws a uniform
    case, runs a sequential decision on a fresh vote stream and scores the
    winner against the case's true class.
    """
    thresholds = _validated_thresholds(thresholds)
    if trials_per_threshold < 1:
        raise ValueError("trials_per_threshold must be positive")
    truth = list(truth)
    num_classes = max(truth) + 1
    rows = []
    for t_idx, threshold in enumerate(thresholds):
        config = StoppingConfig(acceptable_error=threshold, rule=rule, max_votes=max_votes)
        case_rng = substream(seed, "case-draw", t_idx)
        wrong = inconclusive = 0
        votes = np.empty(trials_per_threshold, dtype=np.int64)
        for trial in range(trials_per_threshold):
            case = int(case_rng.integers(0, len(truth)))
            stream = voter.stream(case, "accuracy", seed, t_idx, trial)
            decision = decide_sequential(stream, num_classes, config)
            votes[trial] = decision.votes_used
            if not decision.conclusive:
                inconclusive += 1
            elif decision.winner != truth[case]:
                wrong += 1
        rows.append(
            SweepRow(
                threshold=threshold,
                trials=trials_per_threshold,
                wrong=wrong,
                inconclusive=inconclusive,
                max_votes_used=int(votes.max()),
                mean_votes_used=float(votes.mean()),
            )
        )
    return SweepResult(rows=tuple(rows))


def certainty_sweep(
    voter: VoteSource,
    thresholds: Sequence[float],
    truth: Sequence[int],
    repeats: int = 1,
    rule: str = "preponderance",
    seed: int = 0,
    max_votes: int = 10000,
) -> SweepResult:
    """Votes needed per threshold, one decision per case per repeat.

    Wrong or inconclusive outcomes are recorded (both expected to be zero
    for any sound voter over reachable thresholds).
    """
    thresholds = _validated_thresholds(thresholds)
    truth = list(truth)
    num_classes = max(truth) + 1
    rows = []
    for t_idx, threshold in enumerate(thresholds):
        config = StoppingConfig(acceptable_error=threshold, rule=rule, max_votes=max_votes)
        wrong = inconclusive = 0
        votes = []
        for case, true_class in enumerate(truth):
            for rep in range(repeats):
                stream = voter.stream(case, "certainty", seed, t_idx, rep)
                decision = decide_sequential(stream, num_classes, config)
                votes.append(decision.votes_used)
                if not decision.conclusive:
                    inconclusive += 1
                elif decision.winner != true_class:
                    wrong += 1
        rows.append(
            SweepRow(
                threshold=threshold,
                trials=len(votes),
                wrong=wrong,
                inconclusive=inconclusive,
                max_votes_used=int(max(votes)),
                mean_votes_used=float(np.mean(votes)),
            )
        )
    return SweepResult(rows=tuple(rows))


def linear_fit(points: Sequence[tuple[float, float]]) -> FitResult:
    """Ordinary least squares y = slope x + intercept with R^2."""
    if len(points) < 2:
        raise ValueError("linear_fit needs at least 2 points")
    x = np.array([p[0] for p in points], dtype=np.float64)
    y = np.array([p[1] for p in points], dtype=np.float64)
    if np.all(x == x[0]):
        raise ValueError("all x values are equal; fit is degenerate")
    x_mean = x.mean()
    y_mean = y.mean()
    slope = float(np.sum((x - x_mean) * (y - y_mean)) / np.sum((x - x_mean) ** 2))
    intercept = float(y_mean - slope * x_mean)
    residuals = y - (slope * x + intercept)
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((y - y_mean) ** 2))
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res == 0.0 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    return FitResult(slope=slope, intercept=intercept, r_squared=r_squared)


def bagging_comparison(n: int) -> tuple[float, float]:
    """Error-reduction factors of n Gaussian-averaged models vs n voted
    subsamples: (1/sqrt(n), 10^(-n/8))."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return 1.0 / math.sqrt(n), 10.0 ** (-n / 8.0)


_SWEEP_HEADER = ["threshold", "trials", "wrong", "inconclusive", "max_votes_used", "mean_votes_used"]
_FIT_HEADER = ["slope", "intercept", "r_squared"]


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def persist_results(result: SweepResult | FitResult, path: str | Path) -> Path:
    """Write a result as CSV with a fixed header; floats keep 17 digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if isinstance(result, FitResult):
                writer.writerow(_FIT_HEADER)
                writer.writerow([_fmt(result.slope), _fmt(result.intercept), _fmt(result.r_squared)])
            else:
                writer.writerow(_SWEEP_HEADER)
                for r in result.rows:
                    writer.writerow(
                        [
                            _fmt(r.threshold),
                            r.trials,
                            r.wrong,
                            r.inconclusive,
                            r.max_votes_used,
                            _fmt(r.mean_votes_used),
                        ]
                    )
    except OSError as exc:
        raise OSError(f"failed to write results to {path}: {exc}") from exc
    return path


def read_sweep_csv(path: str | Path) -> SweepResult:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _SWEEP_HEADER:
            raise ValueError(f"{path}: unexpected sweep CSV header {header}")
        rows = tuple(
            SweepRow(
                threshold=float(r[0]),
                trials=int(r[1]),
                wrong=int(r[2]),
                inconclusive=int(r[3]),
                max_votes_used=int(r[4]),
                mean_votes_used=float(r[5]),
            )
            for r in reader
        )
    return SweepResult(rows=rows)


def log_spaced_thresholds(low: float, high: float, count: int) -> list[float]:
    """Logarithmically spaced thresholds, descending from high to low."""
    if not (0.0 < low < high < 0.5):
        raise ValueError(f"need 0 < low < high < 0.5, got low={low}, high={high}")
    if count < 2:
        raise ValueError("count must be at least 2")
    return list(np.logspace(math.log10(high), math.log10(low), count))


def identify_signal(
    model: Classifier,
    signal: IqSignal,
    subsample_length: int,
    config: StoppingConfig,
    block: int = 5,
    log_power: bool = False,
    seed: int = 0,
) -> Decision:
    """Sequentially identify a signal: subsample -> featurize -> classify."""
    spec = SubsampleSpec(length_points=subsample_length, rng_seed=seed)

    def votes() -> Iterator[int]:
        draw = 0
        while True:
            window = extract_subsample(signal, spec, draw)
            image = featurize(window, block=block, log_power=log_power)
            yield model.classify(image)
            draw += 1

    return decide_sequential(votes(), model.num_classes, config)
