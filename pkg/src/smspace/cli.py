"""Experiment orchestration: generate / train / evaluate / verify / experiment.

Every run is reproducible from its configuration alone: datasets,
checkpoints, and reports are deterministic functions of the seeds, and a
``manifest.json`` in each output directory records a sha256 digest of
every produced file (plus wall-clock timings, which are informational
and not part of the reproducibility contract).

Configuration comes from defaults, an optional ``--preset``, an optional
plain-text ``key=value`` config file, and command-line flags, in that
order of increasing precedence.

Exit codes: 0 success, 1 runtime failure (including failed hard
invariants in ``verify``), 2 usage error.

The environment variable ``SMSEED_THREADS`` caps the number of worker
processes ``experiment`` may use for independent (mode, seed) runs;
results are bitwise independent of the worker count.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import multiprocessing
import os
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DegenerateInputError, SmspaceError
from .explorer import ExplorationMode, collect, load_dataset, save_dataset, save_provenance
from .kinematics import forward
from .metrics import (
    DEFAULT_ALPHAS,
    align,
    dissimilarity,
    dissimilarity_naive,
    evaluate,
    motor_grid,
    sample_grid,
    write_report_csv,
)
from .neuralnet import (
    Mlp,
    TrainConfig,
    gradient,
    load_networks,
    numeric_gradient,
    random_toy_instance,
    save_networks,
    train,
)
from .equivalence import (
    run_metric_class_suite,
    run_position_class_suite,
    verify_compensability_suite,
    write_verification_csv,
)

PRESETS = {
    "full": {},
    "small": {"env_count": 3, "per_env": 2000, "epochs": 20, "num_seeds": 5},
}

MODE_NAMES = ("nominal", "dynamic", "static")


@dataclass
class RunConfig:
    """Resolved settings for one pipeline run; defaults mirror the experiment scale."""

    mode: str = "nominal"
    env_count: int = 10
    per_env: int = 10000
    seed: int = 0
    epochs: int = 50
    batch_size: int = 128
    learning_rate: float = 1e-3
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    output_dir: str = "out"
    num_seeds: int = 30
    keep_datasets: bool = True

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["alphas"] = list(self.alphas)
        return d


_CONFIG_PARSERS = {
    "mode": str,
    "env_count": int,
    "per_env": int,
    "seed": int,
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "alphas": lambda s: tuple(float(a) for a in s.split(",") if a.strip()),
    "output_dir": str,
    "num_seeds": int,
    "keep_datasets": lambda s: s.strip().lower() in ("1", "true", "yes"),
}


def parse_config_file(path) -> dict:
    """Read ``key=value`` lines; '#' starts a comment, blank lines ignored."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SmspaceError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key == "preset":
            values[key] = value.strip()
            continue
        if key not in _CONFIG_PARSERS:
            raise SmspaceError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _CONFIG_PARSERS[key](value.strip())
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then preset, then config file, then explicit flags."""
    merged: dict = {}
    file_values = parse_config_file(args.config) if getattr(args, "config", None) else {}
    preset = getattr(args, "preset", None) or file_values.get("preset")
    if preset:
        if preset not in PRESETS:
            raise SmspaceError(f"unknown preset {preset!r} (choose from {sorted(PRESETS)})")
        merged.update(PRESETS[preset])
    merged.update({k: v for k, v in file_values.items() if k != "preset"})
    for key in _CONFIG_PARSERS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    cfg = RunConfig(**merged)
    if cfg.mode not in MODE_NAMES:
        raise SmspaceError(f"unknown mode {cfg.mode!r} (choose from {MODE_NAMES})")
    return cfg


def file_digest(path) -> dict:
    h = hashlib.sha256()
    size = 0
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
            size += len(chunk)
    return {"sha256": h.hexdigest(), "bytes": size}


def update_manifest(outdir: Path, config: RunConfig | None, files: dict[str, Path],
                    timings: dict[str, float]) -> dict:
    """Merge digests and timings into ``manifest.json`` under ``outdir``."""
    path = outdir / "manifest.json"
    manifest = json.loads(path.read_text()) if path.exists() else {
        "version": __version__, "files": {}, "timings": {},
    }
    if config is not None:
        manifest["config"] = config.to_dict()
    for name, fpath in files.items():
        manifest["files"][name] = file_digest(fpath)
    manifest["timings"].update({k: round(v, 3) for k, v in timings.items()})
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    t0 = time.perf_counter()
    dataset = collect(ExplorationMode.parse(cfg.mode), cfg.env_count, cfg.per_env, cfg.seed)
    data_path = out / "dataset.smds"
    prov_path = out / "dataset.smpr"
    save_dataset(dataset, data_path)
    save_provenance(dataset, prov_path)
    update_manifest(out, cfg, {"dataset.smds": data_path, "dataset.smpr": prov_path},
                    {"generate_s": time.perf_counter() - t0})
    print(f"wrote {data_path} ({len(dataset)} transitions, mode={cfg.mode}, seed={cfg.seed})")
    return 0


def cmd_train(cfg: RunConfig, dataset_path) -> int:
    out = _outdir(cfg)
    dataset_path = Path(dataset_path)
    t0 = time.perf_counter()
    dataset = load_dataset(dataset_path)
    net1, net2, curve = train(dataset, cfg.train_config())
    ckpt_path = out / "checkpoint.smnn"
    save_networks((net1, net2), ckpt_path)
    loss_path = out / "loss.csv"
    with open(loss_path, "w") as fh:
        fh.write("epoch,mean_loss\n")
        for epoch, loss in enumerate(curve, 1):
            fh.write(f"{epoch},{loss:.17g}\n")
    sidecar_path = out / "checkpoint.json"
    sidecar = {
        "train_config": {"epochs": cfg.epochs, "batch_size": cfg.batch_size,
                         "learning_rate": cfg.learning_rate, "seed": cfg.seed},
        "dataset": {"path": str(dataset_path), "mode": dataset.mode.name.lower(),
                    "master_seed": dataset.master_seed, "n": len(dataset),
                    **file_digest(dataset_path)},
    }
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    update_manifest(out, cfg, {"checkpoint.smnn": ckpt_path, "loss.csv": loss_path,
                               "checkpoint.json": sidecar_path},
                    {"train_s": time.perf_counter() - t0})
    final = curve[-1] if curve else float("nan")
    print(f"wrote {ckpt_path} ({cfg.epochs} epochs, final loss {final:.6g})")
    return 0


class _TrueForwardEncoder:
    """Exact reference encoder h = (x, y, 0) for sanity checks."""

    def __call__(self, motors) -> np.ndarray:
        p = forward(motors)
        return np.concatenate([p, np.zeros((len(p), 1))], axis=1)


def _load_encoder(checkpoint, stub: str | None):
    if stub == "true-forward":
        return _TrueForwardEncoder()
    if stub is not None:
        raise SmspaceError(f"unknown stub {stub!r} (only 'true-forward')")
    if checkpoint is None:
        raise SmspaceError("evaluate needs a checkpoint path (or --stub true-forward)")
    return load_networks(checkpoint)[0]


def _scatter_export(encoder, out: Path) -> dict[str, Path]:
    """Write scatter.csv and scatter.svg for the evaluation grid."""
    sample = sample_grid(encoder)
    amap = align(sample)
    qs = sample.ps @ amap.matrix.T
    grid = motor_grid()

    csv_path = out / "scatter.csv"
    with open(csv_path, "w") as fh:
        fh.write("m1,m2,m3,h1,h2,h3,x,y,ap1,ap2,ap3\n")
        for m, h, p, q in zip(grid, sample.hs, sample.ps, qs):
            row = list(m[:3]) + list(h) + list(p) + list(q)
            fh.write(",".join(f"{v:.10g}" for v in row) + "\n")

    # Project both sets on the representation cloud's two principal axes.
    center = sample.hs.mean(axis=0)
    _, _, vt = np.linalg.svd(sample.hs - center, full_matrices=False)
    h2 = (sample.hs - center) @ vt[:2].T
    q2 = (qs - qs.mean(axis=0)) @ vt[:2].T
    svg_path = out / "scatter.svg"
    _write_scatter_svg(svg_path, h2, q2)
    return {"scatter.csv": csv_path, "scatter.svg": svg_path}


def _write_scatter_svg(path, h2: np.ndarray, q2: np.ndarray) -> None:
    size, margin = 640, 50
    both = np.vstack([h2, q2])
    lo = both.min(axis=0)
    span = np.maximum(both.max(axis=0) - lo, 1e-12)
    scale = (size - 2 * margin) / span.max()

    def sx(v):
        return margin + (v - lo[0]) * scale

    def sy(v):
        return size - margin - (v - lo[1]) * scale

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<text x="{margin}" y="24" font-family="sans-serif" font-size="14">'
        "learned representation (blue) vs aligned positions (orange), principal-axis projection</text>",
    ]
    for x, y in q2:
        parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3.2" '
                     'fill="none" stroke="#e07b28" stroke-width="1"/>')
    for x, y in h2:
        parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.2" '
                     'fill="#3b6fb3" fill-opacity="0.75"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def cmd_evaluate(cfg: RunConfig, checkpoint, stub: str | None) -> int:
    out = _outdir(cfg)
    t0 = time.perf_counter()
    encoder = _load_encoder(checkpoint, stub)
    try:
        reports = evaluate(encoder, cfg.alphas, mode=cfg.mode, seed=cfg.seed)
        files = _scatter_export(encoder, out)
    except DegenerateInputError as exc:
        print(f"evaluation failure: {exc}", file=sys.stderr)
        return 1
    report_path = out / "report.csv"
    write_report_csv(reports, report_path)
    files["report.csv"] = report_path
    update_manifest(out, cfg, files, {"evaluate_s": time.perf_counter() - t0})
    for r in reports:
        print(f"D_{r.alpha:g} = {r.value:.6g}  (N={r.n})")
    return 0


def cmd_export_scatter(cfg: RunConfig, checkpoint, stub: str | None) -> int:
    out = _outdir(cfg)
    encoder = _load_encoder(checkpoint, stub)
    files = _scatter_export(encoder, out)
    update_manifest(out, cfg, files, {})
    print(f"wrote {files['scatter.csv']} and {files['scatter.svg']}")
    return 0


def _verify_gradients(seed: int, trials: int, out: Path) -> tuple[Path, bool]:
    """Analytic vs central finite-difference gradients on toy instances."""
    rows = []
    ok = True
    rng = np.random.default_rng(seed)
    for trial in range(trials):
        nets, batch = random_toy_instance(rng)
        (grads, _) = gradient(nets, batch)
        fd = numeric_gradient(nets, batch)
        worst = 0.0
        for (aw, ab), (fw, fb) in zip(grads, fd):
            for a, f in zip(aw + ab, fw + fb):
                rel = np.abs(a - f) / np.maximum(1e-8, np.abs(f))
                worst = max(worst, float(rel.max()))
        passed = worst <= 1e-4
        ok = ok and passed
        rows.append((trial, seed, worst, passed))
    path = out / "verify_gradients.csv"
    with open(path, "w") as fh:
        fh.write("trial,seed,max_rel_error,pass\n")
        for trial, s, worst, passed in rows:
            fh.write(f"{trial},{s},{worst:.17g},{int(passed)}\n")
    return path, ok


def _verify_dalpha(seed: int, trials: int, out: Path) -> tuple[Path, bool]:
    """Production D_alpha vs the naive double loop, plus its invariances."""
    rng = np.random.default_rng(seed)
    rows = []
    ok = True
    for trial in range(trials):
        n = int(rng.integers(5, 201))
        hs = rng.normal(0.0, 1.0, (n, 3))
        qs = rng.normal(0.0, 1.0, (n, 2))
        alphas = (0.0, 1.0, 5.0, 10.0)
        values = [dissimilarity(hs, qs, a) for a in alphas]
        max_diff = max(abs(v - dissimilarity_naive(hs, qs, a))
                       for v, a in zip(values, alphas))
        monotone = all(values[i + 1] <= values[i] + 1e-15 for i in range(len(values) - 1))
        # Random similarity transform of hs must leave D unchanged.
        theta = rng.uniform(0.0, 2.0 * np.pi)
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
        rot = np.eye(3) + np.sin(theta) * k + (1 - np.cos(theta)) * (k @ k)
        hs_moved = (hs * rng.uniform(0.1, 10.0)) @ rot.T + rng.normal(0.0, 5.0, 3)
        invariance = abs(dissimilarity(hs_moved, qs, 10.0) - values[-1])
        passed = max_diff <= 1e-12 and monotone and invariance <= 1e-9
        ok = ok and passed
        rows.append((trial, seed, n, max_diff, monotone, invariance, passed))
    path = out / "verify_dalpha.csv"
    with open(path, "w") as fh:
        fh.write("trial,seed,n,max_abs_diff,monotone,invariance_error,pass\n")
        for trial, s, n, diff, mono, inv, passed in rows:
            fh.write(f"{trial},{s},{n},{diff:.17g},{int(mono)},{inv:.17g},{int(passed)}\n")
    return path, ok


def cmd_verify(cfg: RunConfig, suite: str, trials: int) -> int:
    out = _outdir(cfg)
    t0 = time.perf_counter()
    if suite == "compensability":
        rows, summary = verify_compensability_suite([cfg.seed], trials)
        path = out / "verify_compensability.csv"
        write_verification_csv(rows, path)
        ok = summary.passed
        print(f"compensability: {summary.trials} trials, max deviation "
              f"{summary.max_deviation:.3g}, {summary.boundary_pixels} boundary pixels excluded")
    elif suite == "position-class":
        rows, ok = run_position_class_suite(cfg.seed, trials)
        path = out / "verify_position_class.csv"
        write_verification_csv(rows, path)
        print(f"position-class: {len(rows)} rows, pass={ok}")
    elif suite == "metric-class":
        rows, summary = run_metric_class_suite(cfg.seed, trials)
        path = out / "verify_metric_class.csv"
        write_verification_csv(rows, path)
        ok = summary.passed
        print(f"metric-class: pass fraction {summary.pair_pass_fraction:.3f}, "
              f"distractor bit-exact={summary.distractor_bit_exact}, "
              f"negative/matched ratio {summary.negative_ratio:.3g} "
              f"(kappa={summary.kappa:.3g})")
    elif suite == "gradients":
        path, ok = _verify_gradients(cfg.seed, trials, out)
        print(f"gradients: {trials} instances, pass={ok}")
    elif suite == "dalpha-oracle":
        path, ok = _verify_dalpha(cfg.seed, trials, out)
        print(f"dalpha-oracle: {trials} sets, pass={ok}")
    else:  # pragma: no cover - argparse choices guard this
        raise SmspaceError(f"unknown suite {suite!r}")
    update_manifest(out, cfg, {path.name: path}, {f"verify_{suite}_s": time.perf_counter() - t0})
    if not ok:
        print(f"verify {suite}: FAILED", file=sys.stderr)
        return 1
    return 0


def run_pipeline(mode: str, seed: int, cfg: RunConfig, run_dir: Path) -> list[dict]:
    """generate -> train -> evaluate for one (mode, seed); returns report rows."""
    run_dir.mkdir(parents=True, exist_ok=True)
    run_cfg = replace(cfg, mode=mode, seed=seed, output_dir=str(run_dir))
    t0 = time.perf_counter()
    dataset = collect(ExplorationMode.parse(mode), cfg.env_count, cfg.per_env, seed)
    data_path = run_dir / "dataset.smds"
    prov_path = run_dir / "dataset.smpr"
    save_dataset(dataset, data_path)
    save_provenance(dataset, prov_path)
    update_manifest(run_dir, run_cfg, {"dataset.smds": data_path, "dataset.smpr": prov_path},
                    {"generate_s": time.perf_counter() - t0})

    t1 = time.perf_counter()
    net1, net2, curve = train(dataset, run_cfg.train_config())
    del dataset
    ckpt_path = run_dir / "checkpoint.smnn"
    save_networks((net1, net2), ckpt_path)
    loss_path = run_dir / "loss.csv"
    with open(loss_path, "w") as fh:
        fh.write("epoch,mean_loss\n")
        for epoch, loss in enumerate(curve, 1):
            fh.write(f"{epoch},{loss:.17g}\n")
    update_manifest(run_dir, None, {"checkpoint.smnn": ckpt_path, "loss.csv": loss_path},
                    {"train_s": time.perf_counter() - t1})

    t2 = time.perf_counter()
    reports = evaluate(net1, cfg.alphas, mode=mode, seed=seed)
    report_path = run_dir / "report.csv"
    write_report_csv(reports, report_path)
    files = _scatter_export(net1, run_dir)
    files["report.csv"] = report_path
    update_manifest(run_dir, None, files, {"evaluate_s": time.perf_counter() - t2})

    if not cfg.keep_datasets:
        data_path.unlink()
        prov_path.unlink()
    return [{"mode": mode, "seed": seed, "alpha": r.alpha, "D": r.value, "N": r.n}
            for r in reports]


def _pipeline_worker(payload) -> list[dict]:
    mode, seed, cfg_dict, run_dir = payload
    cfg_dict = dict(cfg_dict)
    cfg_dict["alphas"] = tuple(cfg_dict["alphas"])
    return run_pipeline(mode, seed, RunConfig(**cfg_dict), Path(run_dir))


def _worker_cap(n_runs: int) -> int:
    env = os.environ.get("SMSEED_THREADS", "")
    try:
        cap = int(env) if env else 1
    except ValueError:
        raise SmspaceError(f"SMSEED_THREADS must be an integer, got {env!r}") from None
    return max(1, min(cap, n_runs))


def cmd_experiment(cfg: RunConfig, modes: list[str], seeds: list[int]) -> int:
    out = _outdir(cfg)
    jobs = [(mode, seed, cfg.to_dict(), str(out / "runs" / f"{mode}_seed{seed}"))
            for mode in modes for seed in seeds]
    workers = _worker_cap(len(jobs))
    t0 = time.perf_counter()
    results: list[dict] = []
    if workers == 1:
        for job in jobs:
            results.extend(_pipeline_worker(job))
            print(f"run {job[0]} seed {job[1]} done", flush=True)
    else:
        # Single-threaded BLAS in the children; the parent env is restored.
        saved = {k: os.environ.get(k) for k in
                 ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")}
        os.environ.update({k: "1" for k in saved})
        try:
            ctx = multiprocessing.get_context("spawn")
            with concurrent.futures.ProcessPoolExecutor(workers, mp_context=ctx) as pool:
                futures = {pool.submit(_pipeline_worker, job): job for job in jobs}
                for fut in concurrent.futures.as_completed(futures):
                    job = futures[fut]
                    results.extend(fut.result())
                    print(f"run {job[0]} seed {job[1]} done", flush=True)
        finally:
            for k, v in saved.items():
                if v is None:
                    os.environ.pop(k, None)
                else:
                    os.environ[k] = v

    results.sort(key=lambda r: (MODE_NAMES.index(r["mode"]), r["seed"], r["alpha"]))
    runs_path = out / "runs.csv"
    with open(runs_path, "w") as fh:
        fh.write("mode,seed,alpha,D,N\n")
        for r in results:
            fh.write(f"{r['mode']},{r['seed']},{r['alpha']:g},{r['D']:.17g},{r['N']}\n")

    stats_path = out / "stats.csv"
    with open(stats_path, "w") as fh:
        fh.write("mode,alpha,q1,median,q3,runs\n")
        for mode in modes:
            for alpha in cfg.alphas:
                vals = [r["D"] for r in results if r["mode"] == mode and r["alpha"] == alpha]
                q1, med, q3 = np.percentile(vals, [25, 50, 75])
                fh.write(f"{mode},{alpha:g},{q1:.17g},{med:.17g},{q3:.17g},{len(vals)}\n")

    update_manifest(out, cfg, {"runs.csv": runs_path, "stats.csv": stats_path},
                    {"experiment_s": time.perf_counter() - t0})
    print(f"experiment complete: {len(jobs)} runs, stats in {stats_path}")
    return 0


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named parameter preset")
    p.add_argument("--mode", choices=MODE_NAMES, help="exploration mode")
    p.add_argument("--env-count", dest="env_count", type=int)
    p.add_argument("--per-env", dest="per_env", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--alphas", type=lambda s: tuple(float(a) for a in s.split(",")))
    p.add_argument("--output-dir", dest="output_dir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smspace",
        description="Sensorimotor-space experiment pipeline",
    )
    parser.add_argument("--version", action="version", version=f"smspace {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="collect a transition dataset")
    _add_config_flags(p)

    p = sub.add_parser("train", help="train the predictor on a dataset")
    _add_config_flags(p)
    p.add_argument("dataset", help="path to a .smds file")

    p = sub.add_parser("evaluate", help="compute D_alpha reports for a checkpoint")
    _add_config_flags(p)
    p.add_argument("checkpoint", nargs="?", help="path to a .smnn file")
    p.add_argument("--stub", help="replace the encoder (true-forward)")

    p = sub.add_parser("export-scatter", help="write scatter.csv/scatter.svg only")
    _add_config_flags(p)
    p.add_argument("checkpoint", nargs="?", help="path to a .smnn file")
    p.add_argument("--stub", help="replace the encoder (true-forward)")

    p = sub.add_parser("verify", help="run a verification suite")
    _add_config_flags(p)
    p.add_argument("suite", choices=["compensability", "position-class", "metric-class",
                                     "gradients", "dalpha-oracle"])
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("experiment", help="full pipeline over modes x seeds")
    _add_config_flags(p)
    p.add_argument("--modes", default=",".join(MODE_NAMES),
                   help="comma-separated mode list")
    p.add_argument("--seeds", help="comma-separated seed list (default 0..num_seeds-1)")
    p.add_argument("--num-seeds", dest="num_seeds", type=int)
    p.add_argument("--discard-datasets", action="store_true",
                   help="delete per-run datasets after digesting and training")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "train":
            return cmd_train(cfg, args.dataset)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.checkpoint, args.stub)
        if args.command == "export-scatter":
            return cmd_export_scatter(cfg, args.checkpoint, args.stub)
        if args.command == "verify":
            return cmd_verify(cfg, args.suite, args.trials)
        if args.command == "experiment":
            modes = [m.strip() for m in args.modes.split(",") if m.strip()]
            for m in modes:
                if m not in MODE_NAMES:
                    raise SmspaceError(f"unknown mode {m!r}")
            if args.seeds:
                seeds = [int(s) for s in args.seeds.split(",")]
            else:
                seeds = list(range(cfg.num_seeds))
            if args.discard_datasets:
                cfg = replace(cfg, keep_datasets=False)
            return cmd_experiment(cfg, modes, seeds)
        raise SmspaceError(f"unhandled command {args.command}")  # pragma: no cover
    except SmspaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
