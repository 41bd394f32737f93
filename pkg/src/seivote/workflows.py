"""Command-level orchestration shared by the service endpoints and the CLI."""

from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path

from .classifier import (
    ConfusionVoter,
    SoftmaxModel,
    load_model,
    save_model,
    train_softmax,
)
from .config import RunSettings
from .experiments import (
    DatasetVoter,
    FitResult,
    build_dataset,
    case_signal,
    certainty_sweep,
    accuracy_sweep,
    identify_signal,
    linear_fit,
    load_manifest,
    load_split,
    log_spaced_thresholds,
    persist_results,
    read_sweep_csv,
)
from .signals import read_iq32, write_iq32
from .voting import StoppingConfig


def generate_signals(settings: RunSettings, out_dir: str | Path) -> dict:
    """Synthesize one iq32 recording per case into out_dir/signals."""
    manifest = settings.manifest()
    signals_dir = Path(out_dir) / "signals"
    signals_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for case in manifest.cases():
        signal = case_signal(manifest, case)
        path = signals_dir / f"case_{case.case_id:04d}.iq32"
        write_iq32(signal, path)
        paths.append(str(path))
    manifest_path = signals_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest.to_json(), indent=2))
    return {"signal_paths": paths, "manifest_path": str(manifest_path)}


def run_build_dataset(settings: RunSettings, out_dir: str | Path) -> dict:
    return build_dataset(settings.manifest(), Path(out_dir) / "dataset")


def run_train(settings: RunSettings, dataset_dir: str | Path, out_dir: str | Path) -> dict:
    train_set, _ = load_split(dataset_dir, "train")
    val_set, _ = load_split(dataset_dir, "val")
    model, history = train_softmax(train_set, val_set, settings.training)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = out_dir / "model.bin"
    save_model(model, model_path)
    return {
        "model_path": str(model_path),
        "validation_accuracy": history["validation_accuracy"],
        "per_class_accuracy": history["per_class_accuracy"],
        "epochs_accepted": len(history["loss"]) - 1,
        "final_loss": history["loss"][-1],
    }


def _geometry_from_model(model: SoftmaxModel, block: int) -> int:
    side = model.pooling * int(round(math.sqrt(model.feature_dim / 3)))
    if 3 * (side // model.pooling) ** 2 != model.feature_dim:
        raise ValueError(f"model feature_dim {model.feature_dim} is not a pooled square image")
    return side * block


def run_identify(
    model_path: str | Path,
    signal_path: str | Path,
    acceptable_error: float,
    rule: str = "preponderance",
    max_votes: int = 10000,
    seed: int = 0,
    block: int = 5,
    log_power: bool = False,
    out_dir: str | Path | None = None,
) -> dict:
    """Stream subsamples of a recorded signal through the model to a decision."""
    model = load_model(model_path)
    signal = read_iq32(signal_path)
    subsample_length = _geometry_from_model(model, block)
    config = StoppingConfig(acceptable_error=acceptable_error, rule=rule, max_votes=max_votes)
    decision = identify_signal(
        model,
        signal,
        subsample_length=subsample_length,
        config=config,
        block=block,
        log_power=log_power,
        seed=seed,
    )
    report = {
        "winner": decision.winner,
        "votes_used": decision.votes_used,
        "achieved_certainty": decision.achieved_certainty,
        "rule": decision.rule,
        "conclusive": decision.conclusive,
        "exhausted": decision.exhausted,
        "acceptable_error": acceptable_error,
        "true_emitter_id": signal.emitter_id,
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "decision.json").write_text(json.dumps(report, indent=2))
        report["decision_path"] = str(out_dir / "decision.json")
    return report


def _confusion_voter(settings: RunSettings) -> tuple[ConfusionVoter, list[int]]:
    voter = ConfusionVoter.symmetric(
        num_classes=settings.sweep.confusion_classes,
        diagonal=settings.sweep.confusion_diagonal,
        rng_seed=settings.seed,
    )
    return voter, list(range(voter.num_classes))


def _dataset_voter(
    settings: RunSettings, model_path: str | Path, dataset_dir: str | Path
) -> tuple[DatasetVoter, list[int]]:
    model = load_model(model_path)
    voter = DatasetVoter.from_split(model, dataset_dir, "test", rng_seed=settings.seed)
    manifest = load_manifest(dataset_dir)
    emitter_of_case = {c.case_id: c.emitter_index for c in manifest.cases()}
    case_ids = sorted(voter.images_by_case)
    voter.images_by_case = {i: voter.images_by_case[c] for i, c in enumerate(case_ids)}
    truth = [emitter_of_case[c] for c in case_ids]
    return voter, truth


def _make_voter(settings, voter_kind, model_path, dataset_dir):
    if voter_kind == "confusion":
        return _confusion_voter(settings)
    if voter_kind == "model":
        if model_path is None or dataset_dir is None:
            raise ValueError("voter 'model' needs model_path and dataset_dir")
        return _dataset_voter(settings, model_path, dataset_dir)
    raise ValueError(f"unknown voter kind {voter_kind!r}")


def run_accuracy_sweep(
    settings: RunSettings,
    out_dir: str | Path,
    voter_kind: str = "confusion",
    model_path: str | Path | None = None,
    dataset_dir: str | Path | None = None,
) -> dict:
    voter, truth = _make_voter(settings, voter_kind, model_path, dataset_dir)
    result = accuracy_sweep(
        voter,
        truth,
        thresholds=settings.sweep.thresholds,
        trials_per_threshold=settings.sweep.trials_per_threshold,
        rule=settings.rule,
        seed=settings.seed,
        max_votes=settings.max_votes,
    )
    path = persist_results(result, Path(out_dir) / "accuracy_sweep.csv")
    return {"csv_path": str(path), "rows": [asdict(r) for r in result.rows]}


def run_certainty_sweep(
    settings: RunSettings,
    out_dir: str | Path,
    voter_kind: str = "confusion",
    model_path: str | Path | None = None,
    dataset_dir: str | Path | None = None,
) -> dict:
    voter, truth = _make_voter(settings, voter_kind, model_path, dataset_dir)
    thresholds = log_spaced_thresholds(
        settings.sweep.certainty_threshold_low,
        settings.sweep.certainty_threshold_high,
        settings.sweep.certainty_threshold_count,
    )
    result = certainty_sweep(
        voter,
        thresholds,
        truth,
        repeats=settings.sweep.certainty_repeats,
        rule=settings.rule,
        seed=settings.seed,
        max_votes=settings.max_votes,
    )
    path = persist_results(result, Path(out_dir) / "certainty_sweep.csv")
    return {"csv_path": str(path), "rows": [asdict(r) for r in result.rows]}


def run_report(results_dir: str | Path, out_dir: str | Path | None = None) -> dict:
    """Aggregate sweep CSVs; fit max votes against log10(threshold)."""
    results_dir = Path(results_dir)
    lines: list[str] = []
    fit: FitResult | None = None
    accuracy_path = results_dir / "accuracy_sweep.csv"
    if accuracy_path.exists():
        acc = read_sweep_csv(accuracy_path)
        lines.append(f"accuracy sweep: {len(acc.rows)} thresholds")
        for r in acc.rows:
            observed = (r.wrong + r.inconclusive) / r.trials
            lines.append(
                f"  E_AT={r.threshold:.6g}: observed error rate "
                f"{observed:.6g} over {r.trials} trials "
                f"(wrong={r.wrong}, inconclusive={r.inconclusive})"
            )
    certainty_path = results_dir / "certainty_sweep.csv"
    if certainty_path.exists():
        cert = read_sweep_csv(certainty_path)
        lines.append(
            f"certainty sweep: {len(cert.rows)} thresholds, "
            f"{sum(r.wrong for r in cert.rows)} wrong, "
            f"{sum(r.inconclusive for r in cert.rows)} inconclusive"
        )
        for r in cert.rows:
            lines.append(
                f"  E_AT={r.threshold:.6g}: max votes {r.max_votes_used}, "
                f"mean votes {r.mean_votes_used:.3f}"
            )
        points = [(math.log10(r.threshold), float(r.max_votes_used)) for r in cert.rows]
        if len({p[0] for p in points}) >= 2:
            fit = linear_fit(points)
            lines.append(
                f"fit: max_votes = {fit.slope:.4g} * log10(E_AT) + {fit.intercept:.4g} "
                f"(R^2 = {fit.r_squared:.4g})"
            )
            lines.append(f"votes per decade of error reduction: {-fit.slope:.4g}")
        else:
            lines.append("fit skipped: need at least two distinct thresholds")
    if not lines:
        raise FileNotFoundError(f"no sweep results found in {results_dir}")
    out = {
        "lines": lines,
        "fit": asdict(fit) if fit else None,
        "votes_per_decade": -fit.slope if fit else None,
    }
    if fit is not None and out_dir is not None:
        fit_path = persist_results(fit, Path(out_dir) / "report_fit.csv")
        out["fit_csv_path"] = str(fit_path)
    return out
