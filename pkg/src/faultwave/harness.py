"""Experiment drivers and the command-line interface.

Every command resolves its configuration, hashes it, and writes artifacts
under <out>/<command>_<hash8>/ together with a run.json capturing the
resolved configuration; re-running an identical configuration rewrites the
same directory bit-identically, while any config change lands in a fresh
directory so stale artifacts are never silently reused.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import dataclass, replace

import numpy as np

from . import evalkit, features, imaging, net, relay, selection, semisup, synth

FD_CLASSES = ("no_fault", "fault")
FL_CLASSES = synth.POSITION_TAGS
PS_CLASSES = ("a", "b", "c", "ab", "bc", "ca", "abc")
PS_POSITIONS = ("p4", "p5")

SSL_ALPHA_GRID = (0.2, 0.6, 0.8)
SSL_K_GRID = (5, 10, 20)
SSL_GAMMA_GRID = (0.001, 0.01, 0.1)
SSL_TAU_GRID = (0.7, 0.8, 0.9)
SSL_FU_GRID = (0.2, 0.5, 0.8)


class ConfigError(ValueError):
    """Bad or inconsistent run configuration."""


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:8]


def _atomic_json(path, payload) -> None:
    directory = os.path.dirname(path) or "."
    with tempfile.NamedTemporaryFile("w", dir=directory, delete=False, suffix=".tmp") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=str)
        tmp = fh.name
    os.replace(tmp, path)


def prepare_run_dir(out: str, command: str, cfg: dict) -> str:
    """Content-addressed run directory plus its run.json."""
    run = os.path.join(out, f"{command}_{config_hash(cfg)}")
    os.makedirs(run, exist_ok=True)
    _atomic_json(os.path.join(run, "run.json"),
                 {"command": command, "config": cfg, "config_hash": config_hash(cfg)})
    return run


# ---------------------------------------------------------------------------
# pipeline stages


def feature_matrix(records) -> np.ndarray:
    """Stack the 207-feature vector of every record."""
    return np.vstack([features.extract_all(r).values for r in records])


def task_labels(records, task: str) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Record indices, integer labels, and class names for one task."""
    if task == "fd":
        keep = np.arange(len(records))
        y = np.array([FD_CLASSES.index(r.label) for r in records])
        return keep, y, FD_CLASSES
    if task == "fl":
        keep = np.array([i for i, r in enumerate(records) if r.label == "fault"], dtype=int)
        y = np.array([FL_CLASSES.index(records[i].location_label) for i in keep])
        return keep, y, tuple(FL_CLASSES)
    if task == "ps":
        keep = np.array([i for i, r in enumerate(records)
                         if r.label == "fault" and r.location_label in PS_POSITIONS], dtype=int)
        y = np.array([PS_CLASSES.index("".join(sorted(records[i].phase_label))) for i in keep])
        return keep, y, PS_CLASSES
    raise ConfigError(f"unknown task {task!r}")


def select_top_features(X: np.ndarray, y: np.ndarray, iterations: int = 200,
                        seed: int = 0, n_select: int = 5) -> tuple[list[str], selection.FeatureRanking, np.ndarray]:
    """ReliefF on the 207-feature matrix, aggregated to per-phase scores.

    Returns the top per-phase feature ids, the full 207 ranking, and the 69
    aggregated scores.
    """
    cfg = selection.ReliefConfig(iterations=min(iterations, X.shape[0]), seed=seed)
    ranking = selection.relieff_rank(X, y, cfg)
    per_phase = selection.aggregate_per_phase(ranking.weights)
    order = np.lexsort((np.arange(per_phase.shape[0]), -per_phase))
    ids = features.phase_feature_ids()
    return [ids[i] for i in order[:n_select]], ranking, per_phase


def selected_matrix(X: np.ndarray, selection_ids) -> np.ndarray:
    """Slice the 15 selected columns (5 ids x 3 phases) out of the 207 matrix."""
    all_ids = features.record_feature_ids()
    index = {fid: i for i, fid in enumerate(all_ids)}
    cols = [index[f"i{ph}_{fid}"] for ph in synth.PHASES for fid in selection_ids]
    return X[:, cols]


def vectors_to_images(vectors: np.ndarray, kind: str = "rp") -> list[imaging.ImageTensor]:
    return [imaging.transform(v, kind) for v in vectors]


@dataclass
class PipelineResult:
    task: str
    imaging_kind: str
    selection_ids: list[str]
    report: evalkit.MetricsReport
    history: list[dict]
    model: net.ModelState
    train_idx: np.ndarray
    test_idx: np.ndarray


def run_task_pipeline(records, task: str = "fd", imaging_kind: str = "rp",
                      netcfg: net.NetConfig | None = None, seed: int = 0,
                      ratio: float = 0.7, smote_balance: bool = False,
                      relieff_iterations: int = 200,
                      X207: np.ndarray | None = None) -> PipelineResult:
    """Feature extraction, ReliefF selection, imaging, training, evaluation.

    Selection runs on the training split only; a precomputed 207-feature
    matrix can be passed to avoid re-extraction across imaging variants.
    """
    keep, y, classes = task_labels(records, task)
    if keep.shape[0] == 0:
        raise ConfigError(f"no records available for task {task!r}")
    if X207 is None:
        X207 = feature_matrix([records[i] for i in keep])
    else:
        X207 = X207[keep]
    if netcfg is None:
        netcfg = net.NetConfig(n_classes=len(classes), seed=seed)
    elif netcfg.n_classes != len(classes):
        netcfg = replace(netcfg, n_classes=len(classes))
    tr, te = evalkit.split_indices(y, ratio=ratio, stratified=True, seed=seed)
    ids, _, _ = select_top_features(X207[tr], y[tr], iterations=relieff_iterations, seed=seed)
    X15 = selected_matrix(X207, ids)
    X_tr, y_tr = X15[tr], y[tr]
    if smote_balance:
        balanced = evalkit.smote(X_tr, y_tr, k=min(5, np.bincount(y_tr).min() - 1), seed=seed)
        X_tr, y_tr = balanced.X, balanced.y
    train_images = vectors_to_images(X_tr, imaging_kind)
    test_images = vectors_to_images(X15[te], imaging_kind)
    model = net.build(netcfg, train_images[0].n, train_images[0].n)
    model, history = net.train(model, train_images, y_tr)
    probs = net.predict_proba_batch(model, test_images)
    y_pred = np.argmax(probs, axis=1)
    scores = probs[:, 1] if len(classes) == 2 else probs
    report = evalkit.metrics(y[te], y_pred, scores=scores, classes=range(len(classes)))
    return PipelineResult(task=task, imaging_kind=imaging_kind, selection_ids=ids,
                          report=report, history=history, model=model,
                          train_idx=keep[tr], test_idx=keep[te])


def run_imaging_comparison(records, netcfg: net.NetConfig | None = None, seed: int = 0,
                           task: str = "fd", X207: np.ndarray | None = None) -> dict[str, PipelineResult]:
    """The rp/gasf/mtf three-way comparison on a shared split and selection."""
    if X207 is None:
        X207 = feature_matrix(records)
    return {kind: run_task_pipeline(records, task=task, imaging_kind=kind, netcfg=netcfg,
                                    seed=seed, X207=X207)
            for kind in imaging.IMAGE_KINDS}


# ---------------------------------------------------------------------------
# semi-supervised experiment


def mask_labels(y: np.ndarray, unlabeled_fraction: float, seed: int = 0) -> np.ndarray:
    """Return y with a seeded random fraction replaced by -1.

    Every class keeps at least one labeled member.
    """
    if not 0.0 <= unlabeled_fraction < 1.0:
        raise ConfigError("unlabeled fraction must lie in [0, 1)")
    masked = np.asarray(y).copy()
    if unlabeled_fraction == 0.0:
        return masked
    rng = np.random.default_rng(seed)
    n = masked.shape[0]
    hide = rng.choice(n, size=int(round(unlabeled_fraction * n)), replace=False)
    masked[hide] = -1
    for c in np.unique(y):
        if not np.any(masked == c):
            candidates = np.flatnonzero(np.asarray(y) == c)
            masked[candidates[0]] = c
    return masked


def _teacher_grid(method: str) -> list[dict]:
    if method == "ls":
        grid = []
        for alpha in SSL_ALPHA_GRID:
            for k in SSL_K_GRID:
                grid.append({"kernel": "knn", "k": k, "alpha": alpha})
            for gamma in SSL_GAMMA_GRID:
                grid.append({"kernel": "rbf", "gamma": gamma, "alpha": alpha})
        return grid
    if method == "lp":
        grid = [{"kernel": "knn", "k": k} for k in SSL_K_GRID]
        grid += [{"kernel": "rbf", "gamma": g} for g in SSL_GAMMA_GRID]
        return grid
    if method == "st":
        return [{"threshold": t} for t in SSL_TAU_GRID]
    raise ConfigError(f"unknown SSL method {method!r}")


def _teacher_pseudo_labels(method: str, params: dict, X: np.ndarray,
                           y_masked: np.ndarray) -> np.ndarray:
    """Pseudo-labels (aligned to X rows) from one teacher configuration."""
    unlabeled = y_masked == -1
    if method in ("ls", "lp"):
        graph = semisup.build_affinity(X, kernel=params["kernel"],
                                       gamma=params.get("gamma"), k=params.get("k"))
        if method == "ls":
            lm = semisup.label_spreading(graph, y_masked, alpha=params["alpha"])
        else:
            lm = semisup.label_propagation(graph, y_masked)
        return lm.hard_labels(fill=-1)
    cfg = semisup.SelfTrainConfig(threshold=params["threshold"])
    result = semisup.self_train(X[~unlabeled], y_masked[~unlabeled], X[unlabeled], cfg)
    pseudo = y_masked.copy()
    pseudo[unlabeled] = result.pseudo_labels
    return pseudo


def _teacher_validation_accuracy(method: str, params: dict, X: np.ndarray,
                                 y_masked: np.ndarray, y_val_truth: np.ndarray,
                                 val_idx: np.ndarray) -> float:
    """Accuracy of the teacher on a hidden quarter of the labeled seeds."""
    y_train = y_masked.copy()
    y_train[val_idx] = -1
    pseudo = _teacher_pseudo_labels(method, params, X, y_train)
    predicted = pseudo[val_idx]
    valid = predicted != -1
    if not valid.any():
        return 0.0
    return float(np.mean(predicted[valid] == y_val_truth[valid]))


def run_ssl_experiment(records, unlabeled_fraction: float, method: str,
                       netcfg: net.NetConfig | None = None, seed: int = 0,
                       ratio: float = 0.7, grid: list[dict] | None = None,
                       X207: np.ndarray | None = None,
                       selection_ids: list[str] | None = None) -> dict:
    """One SSL row: teacher grid search, label fusion, student training, metrics.

    unlabeled_fraction 0 bypasses the teacher and degenerates to supervised
    training.
    """
    keep, y, classes = task_labels(records, "fd")
    if X207 is None:
        X207 = feature_matrix(records)
    if netcfg is None:
        netcfg = net.NetConfig(n_classes=len(classes), seed=seed)
    tr, te = evalkit.split_indices(y, ratio=ratio, stratified=True, seed=seed)
    if selection_ids is None:
        selection_ids, _, _ = select_top_features(X207[tr], y[tr], seed=seed)
    X15 = selected_matrix(X207, selection_ids)
    images_all = vectors_to_images(X15, "rp")
    flat = np.vstack([images_all[i].data.ravel() for i in tr])
    mu, sd = flat.mean(axis=0), flat.std(axis=0)
    sd = np.where(sd == 0, 1.0, sd)
    flat = (flat - mu) / sd

    y_masked = mask_labels(y[tr], unlabeled_fraction, seed=seed + 7)
    best_params: dict = {}
    teacher_val_acc = None
    if unlabeled_fraction == 0.0 or method == "supervised":
        fused, kept_mask = y[tr], np.ones(tr.shape[0], dtype=bool)
        method = "supervised"
    else:
        labeled_idx = np.flatnonzero(y_masked != -1)
        rng = np.random.default_rng(seed + 11)
        val_idx = rng.choice(labeled_idx, size=max(1, labeled_idx.shape[0] // 4), replace=False)
        best_score = -1.0
        for params in (grid if grid is not None else _teacher_grid(method)):
            score = _teacher_validation_accuracy(method, params, flat, y_masked,
                                                 y[tr][val_idx], val_idx)
            if score > best_score:
                best_score, best_params = score, params
        teacher_val_acc = best_score
        pseudo = _teacher_pseudo_labels(method, best_params, flat, y_masked)
        fused, kept_mask = semisup.fuse_labels(y_masked, pseudo)

    train_images = [images_all[i] for i in tr[kept_mask]]
    model = net.build(netcfg, images_all[0].n, images_all[0].n)
    model, _ = net.train(model, train_images, fused[kept_mask])
    probs = net.predict_proba_batch(model, [images_all[i] for i in te])
    y_pred = np.argmax(probs, axis=1)
    report = evalkit.metrics(y[te], y_pred, scores=probs[:, 1], classes=range(len(classes)))
    pseudo_correct = None
    if method != "supervised":
        hidden = y_masked == -1
        if hidden.any():
            agree = fused[hidden] == y[tr][hidden]
            covered = fused[hidden] != -1
            pseudo_correct = float(np.mean(agree[covered])) if covered.any() else None
    return {
        "f_u": unlabeled_fraction,
        "method": method,
        "kernel": best_params.get("kernel"),
        "params": best_params,
        "teacher_val_acc": teacher_val_acc,
        "pseudo_label_acc": pseudo_correct,
        "n_train_used": int(kept_mask.sum()),
        "metrics": report.to_dict(),
    }


# ---------------------------------------------------------------------------
# robustness sweeps


def run_noise_sweep(records, snr_list, netcfg=None, seed: int = 0) -> list[dict]:
    """FD accuracy per SNR level; noise is applied to every record, then the
    whole pipeline reruns."""
    rows = []
    for snr in snr_list:
        noisy = [synth.apply_noise(r, snr, seed=seed + 101 + i) for i, r in enumerate(records)]
        result = run_task_pipeline(noisy, task="fd", netcfg=netcfg, seed=seed)
        rows.append({"snr_db": None if np.isinf(snr) else snr,
                     "accuracy": result.report.accuracy})
    return rows


def run_sampling_sweep(base_kwargs: dict, fs_list, netcfg=None, seed: int = 0) -> list[dict]:
    """FD accuracy per sampling rate; records are regenerated natively."""
    rows = []
    for fs in fs_list:
        params = synth.SignalModelParams(sampling_freq_hz=fs)
        records = synth.make_detection_dataset(params=params, seed=seed, **base_kwargs)
        result = run_task_pipeline(records, task="fd", netcfg=netcfg, seed=seed)
        rows.append({"sampling_freq_hz": fs, "accuracy": result.report.accuracy})
    return rows


def run_window_sweep(base_kwargs: dict, window_list, netcfg=None, seed: int = 0) -> list[dict]:
    """FD accuracy per analysis window length in cycles."""
    rows = []
    for w in window_list:
        records = synth.make_detection_dataset(window_cycles=w, seed=seed, **base_kwargs)
        result = run_task_pipeline(records, task="fd", netcfg=netcfg, seed=seed)
        rows.append({"window_cycles": w, "accuracy": result.report.accuracy})
    return rows


# ---------------------------------------------------------------------------
# CLI commands


def _netcfg_from_args(args, n_classes: int = 2) -> net.NetConfig:
    return net.NetConfig(depth=args.depth, n_filters=args.filters, base_kernel=args.kernel,
                         bottleneck=args.bottleneck, n_classes=n_classes, epochs=args.epochs,
                         batch_size=args.batch_size, learning_rate=args.lr,
                         ensemble=args.ensemble, seed=args.seed)


def cmd_gen(args) -> int:
    cfg = {"preset": args.preset, "n_fault": args.n_fault, "n_switch": args.n_switch,
           "window_cycles": args.window_cycles, "fs": args.fs, "snr_db": args.snr,
           "seed": args.seed}
    run = prepare_run_dir(args.out, "gen", cfg)
    params = synth.SignalModelParams(sampling_freq_hz=args.fs)
    if args.preset == "fd-default":
        records = synth.make_detection_dataset(
            n_fault=args.n_fault, n_switch=args.n_switch, params=params,
            window_cycles=args.window_cycles, snr_db=args.snr, seed=args.seed)
    elif args.preset == "fault-grid":
        specs = synth.fault_grid()
        records = [synth.synthesize(s, params, args.window_cycles) for s in specs]
    elif args.preset == "switch-grid":
        specs = synth.switching_grid()
        records = [synth.synthesize(s, params, args.window_cycles) for s in specs]
    elif args.preset == "relay-demo":
        records = [
            synth.synthesize_relay_record(fault_type=None, onset_time_s=None, seed=args.seed),
            synth.synthesize_relay_record(fault_type="ag", distance_frac=0.5,
                                          fault_resistance_ohm=0.01, seed=args.seed),
            synth.synthesize_relay_record(fault_type="ag", distance_frac=1.0,
                                          fault_resistance_ohm=10.0, infeed_scale=0.25,
                                          apparent_rf_gain=8.0, seed=args.seed),
        ]
    else:
        raise ConfigError(f"unknown preset {args.preset!r}")
    dataset_dir = os.path.join(run, "dataset")
    synth.write_dataset(records, dataset_dir)
    n_fault = sum(1 for r in records if r.label == "fault")
    print(f"wrote {len(records)} records ({n_fault} fault / {len(records) - n_fault} no_fault) "
          f"to {dataset_dir}")
    return 0


def _load_records(path) -> list:
    if not os.path.isdir(path) or not os.path.exists(os.path.join(path, "manifest.json")):
        raise ConfigError(f"dataset directory {path!r} missing or lacks manifest.json")
    return synth.read_dataset(path)


def cmd_features(args) -> int:
    records = _load_records(args.dataset)
    cfg = {"dataset": args.dataset}
    run = prepare_run_dir(args.out, "features", cfg)
    rows = [(f"rec_{i:04d}", rec, features.extract_all(rec)) for i, rec in enumerate(records)]
    path = os.path.join(run, "features.csv")
    features.write_feature_table(path, rows)
    print(f"wrote {len(rows)} x {len(rows[0][2])} feature table to {path}")
    return 0


def cmd_select(args) -> int:
    if not os.path.exists(args.features):
        raise ConfigError(f"feature table {args.features!r} not found")
    cfg = {"features": args.features, "iterations": args.iterations, "seed": args.seed,
           "forward_curve": args.forward_curve}
    run = prepare_run_dir(args.out, "select", cfg)
    _, labels, _, _, X, feature_ids = features.read_feature_table(args.features)
    y = np.array([FD_CLASSES.index(v) for v in labels])
    ids, ranking, per_phase = select_top_features(X, y, iterations=args.iterations,
                                                  seed=args.seed)
    selection.write_ranking_csv(os.path.join(run, "ranking.csv"), ranking,
                                features.record_feature_ids())
    phase_order = np.lexsort((np.arange(per_phase.shape[0]), -per_phase))
    rank_payload = {"selected": ids,
                    "per_phase_scores": {fid: float(per_phase[i]) for i, fid
                                         in enumerate(features.phase_feature_ids())},
                    "per_phase_order": [features.phase_feature_ids()[i] for i in phase_order]}
    _atomic_json(os.path.join(run, "selection.json"), rank_payload)
    if args.forward_curve:
        netcfg = net.NetConfig(n_classes=len(set(y.tolist())), epochs=args.epochs,
                               seed=args.seed)
        evaluator = make_net_evaluator(netcfg, seed=args.seed)
        curve = selection.forward_selection_curve(
            X, y, ranking, evaluator, ns=[n for n in (3, 6, 9, 12, 15, 18, 21)])
        _atomic_json(os.path.join(run, "forward_curve.json"),
                     [{"n_features": n, "accuracy": a} for n, a in curve])
    print(f"selected per-phase features: {', '.join(ids)}")
    return 0


def make_net_evaluator(netcfg: net.NetConfig, ratio: float = 0.7, seed: int = 0):
    """Train/score closure over the classifier for the forward-selection curve."""

    def evaluate(X_subset: np.ndarray, y: np.ndarray) -> float:
        tr, te = evalkit.split_indices(y, ratio=ratio, stratified=True, seed=seed)
        imgs = vectors_to_images(X_subset, "rp")
        model = net.build(netcfg, imgs[0].n, imgs[0].n)
        model, _ = net.train(model, [imgs[i] for i in tr], y[tr])
        pred = net.predict(model, [imgs[i] for i in te])
        return float(np.mean(pred == y[te]))

    return evaluate


def cmd_image(args) -> int:
    if not os.path.exists(args.features):
        raise ConfigError(f"feature table {args.features!r} not found")
    selection_ids = None
    if args.selection:
        with open(args.selection) as fh:
            selection_ids = json.load(fh)["selected"]
    cfg = {"features": args.features, "kind": args.kind, "selection": selection_ids,
           "seed": args.seed}
    run = prepare_run_dir(args.out, "image", cfg)
    record_ids, labels, phase_labels, locations, X, _ = features.read_feature_table(args.features)
    if selection_ids is None:
        y = np.array([FD_CLASSES.index(v) for v in labels])
        selection_ids, _, _ = select_top_features(X, y, seed=args.seed)
    X15 = selected_matrix(X, selection_ids)
    images = vectors_to_images(X15, args.kind)
    imaging.write_image_dataset(os.path.join(run, "images.bin"), images)
    with open(os.path.join(run, "labels.csv"), "w") as fh:
        fh.write("record_id,label,phase_label,location_label\n")
        for rid, lab, ph, loc in zip(record_ids, labels, phase_labels, locations):
            fh.write(f"{rid},{lab},{ph},{loc}\n")
    print(f"wrote {len(images)} {args.kind} images ({images[0].n}x{images[0].n})")
    return 0


def _read_labels_csv(path, task: str) -> np.ndarray:
    rows = []
    with open(path) as fh:
        header = fh.readline()
        for line in fh:
            rows.append(line.rstrip("\n").split(","))
    if task == "fd":
        return np.array([FD_CLASSES.index(r[1]) for r in rows])
    if task == "fl":
        return np.array([FL_CLASSES.index(r[3]) for r in rows])
    return np.array([PS_CLASSES.index(r[2]) for r in rows])


def cmd_train(args) -> int:
    for path in (args.images, args.labels):
        if not os.path.exists(path):
            raise ConfigError(f"input {path!r} not found")
    cfg = {"images": args.images, "labels": args.labels, "task": args.task,
           "net": _netcfg_from_args(args).to_dict()}
    run = prepare_run_dir(args.out, "train", cfg)
    images = imaging.read_image_dataset(args.images)
    y = _read_labels_csv(args.labels, args.task)
    netcfg = _netcfg_from_args(args, n_classes=int(y.max()) + 1 if args.task != "fd" else 2)
    model = net.build(netcfg, images[0].n, images[0].n)
    model, history = net.train(model, images, y)
    net.save_model(os.path.join(run, "model.bin"), model)
    net.write_loss_curve(os.path.join(run, "loss_curve.csv"), history)
    print(f"final loss {history[-1]['loss']:.6f}, train acc {history[-1]['train_acc']:.4f}")
    return 0


def cmd_eval(args) -> int:
    for path in (args.model, args.images, args.labels):
        if not os.path.exists(path):
            raise ConfigError(f"input {path!r} not found")
    cfg = {"model": args.model, "images": args.images, "labels": args.labels,
           "task": args.task}
    run = prepare_run_dir(args.out, "eval", cfg)
    model = net.load_model(args.model)
    images = imaging.read_image_dataset(args.images)
    y = _read_labels_csv(args.labels, args.task)
    probs = net.predict_proba_batch(model, images)
    pred = np.argmax(probs, axis=1)
    scores = probs[:, 1] if model.cfg.n_classes == 2 else probs
    report = evalkit.metrics(y, pred, scores=scores, classes=range(model.cfg.n_classes))
    evalkit.write_metrics_json(os.path.join(run, "metrics.json"), report)
    evalkit.write_confusion_csv(os.path.join(run, "confusion.csv"), report)
    print(f"accuracy {report.accuracy:.4f}")
    return 0


def cmd_pipeline(args) -> int:
    records = _load_records(args.dataset)
    cfg = {"dataset": args.dataset, "imaging": args.imaging, "task": args.task,
           "net": _netcfg_from_args(args).to_dict(), "seed": args.seed}
    run = prepare_run_dir(args.out, "pipeline", cfg)
    tasks = ("fd", "fl", "ps") if args.task == "all" else (args.task,)
    kinds = imaging.IMAGE_KINDS if args.imaging == "all" else (args.imaging,)
    X207 = feature_matrix(records)
    summary = {}
    for task in tasks:
        for kind in kinds:
            try:
                result = run_task_pipeline(records, task=task, imaging_kind=kind,
                                           netcfg=_netcfg_from_args(args), seed=args.seed,
                                           X207=X207)
            except ConfigError as exc:
                raise ConfigError(f"stage {task}/{kind}: {exc}") from exc
            tag = f"{task}_{kind}"
            evalkit.write_metrics_json(os.path.join(run, f"metrics_{tag}.json"), result.report)
            evalkit.write_confusion_csv(os.path.join(run, f"confusion_{tag}.csv"), result.report)
            net.write_loss_curve(os.path.join(run, f"loss_{tag}.csv"), result.history)
            summary[tag] = result.report.accuracy
            print(f"{tag}: accuracy {result.report.accuracy:.4f}")
    _atomic_json(os.path.join(run, "summary.json"), summary)
    return 0


def cmd_ssl(args) -> int:
    records = _load_records(args.dataset)
    cfg = {"dataset": args.dataset, "fu": args.fu, "method": args.method,
           "net": _netcfg_from_args(args).to_dict(), "seed": args.seed}
    run = prepare_run_dir(args.out, "ssl", cfg)
    methods = ("ls", "lp", "st") if args.method == "all" else (args.method,)
    fus = tuple(args.fu) if args.fu else SSL_FU_GRID
    X207 = feature_matrix(records)
    rows = []
    for fu in fus:
        for method in methods:
            row = run_ssl_experiment(records, fu, method, netcfg=_netcfg_from_args(args),
                                     seed=args.seed, X207=X207)
            rows.append(row)
            print(f"f_u={fu} {row['method']}: accuracy {row['metrics']['accuracy']:.4f}")
    _atomic_json(os.path.join(run, "ssl_report.json"), rows)
    return 0


def cmd_relay_trace(args) -> int:
    records = _load_records(args.dataset)
    cfg = {"dataset": args.dataset}
    run = prepare_run_dir(args.out, "relay-trace", cfg)
    settings = relay.RelaySettings()
    summary = []
    traced = 0
    for i, rec in enumerate(records):
        if rec.voltages is None:
            raise ConfigError(f"record {i} lacks voltage channels")
        traj = relay.trajectory(rec, settings)
        relay.write_trajectory_csv(os.path.join(run, f"trajectory_{i:04d}.csv"), traj, settings)
        entries = relay.zone_entries(traj, settings)
        summary.append({"record": i, "label": rec.label, "zone1_entry": entries})
        traced += 1
    _atomic_json(os.path.join(run, "zone_entries.json"), summary)
    print(f"traced {traced} records")
    return 0


def cmd_sweep(args) -> int:
    cfg = {"sweep": args.sweep, "n_fault": args.n_fault, "n_switch": args.n_switch,
           "levels": args.levels, "net": _netcfg_from_args(args).to_dict(), "seed": args.seed}
    run = prepare_run_dir(args.out, "sweep", cfg)
    base = {"n_fault": args.n_fault, "n_switch": args.n_switch}
    netcfg = _netcfg_from_args(args)
    if args.sweep == "noise":
        levels = [float(v) for v in args.levels] if args.levels else [np.inf, 40.0, 30.0, 20.0]
        records = synth.make_detection_dataset(seed=args.seed, **base)
        rows = run_noise_sweep(records, levels, netcfg=netcfg, seed=args.seed)
    elif args.sweep == "sampling":
        levels = [float(v) for v in args.levels] if args.levels else list(synth.SAMPLING_FREQS_HZ)
        rows = run_sampling_sweep(base, levels, netcfg=netcfg, seed=args.seed)
    elif args.sweep == "window":
        levels = [float(v) for v in args.levels] if args.levels else list(synth.WINDOW_CYCLES)
        rows = run_window_sweep(base, levels, netcfg=netcfg, seed=args.seed)
    else:
        raise ConfigError(f"unknown sweep {args.sweep!r}")
    _atomic_json(os.path.join(run, "sweep.json"), rows)
    for row in rows:
        print(row)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_net_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--filters", type=int, default=8)
    p.add_argument("--kernel", type=int, default=12)
    p.add_argument("--bottleneck", type=int, default=8)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--ensemble", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="faultwave",
                                     description="fault classification pipeline experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a waveform dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--preset", default="fd-default",
                   choices=["fd-default", "fault-grid", "switch-grid", "relay-demo"])
    p.add_argument("--n-fault", type=int, default=400)
    p.add_argument("--n-switch", type=int, default=400)
    p.add_argument("--window-cycles", type=float, default=1.0)
    p.add_argument("--fs", type=float, default=7680.0)
    p.add_argument("--snr", type=float, default=np.inf)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("features", help="extract the 207-feature table")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("select", help="rank features and pick the top 5 per phase")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--forward-curve", action="store_true")
    p.add_argument("--epochs", type=int, default=30)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("image", help="turn selected features into image tensors")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", default="rp", choices=list(imaging.IMAGE_KINDS))
    p.add_argument("--selection", default=None, help="selection.json from the select step")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_image)

    p = sub.add_parser("train", help="train the classifier on an image dataset")
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--task", default="fd", choices=["fd", "fl", "ps"])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_net_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--task", default="fd", choices=["fd", "fl", "ps"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="end-to-end feature/select/image/train/eval run")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--imaging", default="rp", choices=list(imaging.IMAGE_KINDS) + ["all"])
    p.add_argument("--task", default="fd", choices=["fd", "fl", "ps", "all"])
    p.add_argument("--seed", type=int, default=0)
    _add_net_args(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("ssl", help="semi-supervised teacher/student experiments")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fu", type=float, nargs="*", default=None)
    p.add_argument("--method", default="all", choices=["ls", "lp", "st", "supervised", "all"])
    p.add_argument("--seed", type=int, default=0)
    _add_net_args(p)
    p.set_defaults(func=cmd_ssl)

    p = sub.add_parser("relay-trace", help="distance-relay impedance trajectories")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_relay_trace)

    p = sub.add_parser("sweep", help="robustness sweeps (noise / sampling / window)")
    p.add_argument("--sweep", required=True, choices=["noise", "sampling", "window"])
    p.add_argument("--out", required=True)
    p.add_argument("--levels", nargs="*", default=None)
    p.add_argument("--n-fault", type=int, default=150)
    p.add_argument("--n-switch", type=int, default=150)
    p.add_argument("--seed", type=int, default=0)
    _add_net_args(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, synth.ScenarioError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
