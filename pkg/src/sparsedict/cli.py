"""Command-line frontend: dataset I/O, experiment orchestration, report emission.

Subcommands: learn (penalized dictionary learning), constrained-fit (sparsest
codes under a fit budget), hardness (densest-cut claim verification on a
graph file), denoise (single-image experiment with optional Monte Carlo
trials), and bench (the sigma-grid comparison table).

Exit codes: 0 success (solver converged / all claims verified), 2 solver hit
its iteration cap, 1 any error including usage. All randomness derives from
the manifest seed through spawned generator streams, so identical manifests
reproduce identical reports (wall-clock fields aside).

Matrix CSV files are plain numeric rows without headers. Graph files carry
the vertex count on the first line and one 'u v' edge per line. The
SPARSEDICT_THREADS environment variable caps worker threads for --trials
runs; unset means single-threaded.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    NonnegL1Atom,
    NonnegTotalNorm,
    PerAtomNorm,
    SolverConfig,
    StopReason,
    TotalNorm,
    TrainingMatrix,
)
from .bsum import BsumProblem, solve_case1, solve_case2, solve_case3, solve_case4
from .denoise import (
    DenoiseConfig,
    GrayImage,
    Learner,
    PatchConfig,
    denoise_image,
    psnr,
    read_pgm,
    write_pgm,
)
from .hardness import load_graph, verify_claims
from .sca import solve_constrained_fit

THREAD_ENV_VAR = "SPARSEDICT_THREADS"
_DEFAULT_BENCH_SIGMAS = (20.0, 60.0, 100.0, 140.0, 180.0)


class CliUsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract is exit 1
        raise CliUsageError(message)


@dataclass
class RunManifest:
    command: str
    input_path: Path | None = None
    out_dir: Path = Path(".")
    case: int = 1
    beta: float = 1.0
    betas: tuple[float, ...] | None = None
    theta: float = 1.0
    lam: float = 0.1
    alpha: float | None = None
    atoms: int | None = None
    sigma: float | None = None
    learner: str = "alg2"
    trials: int = 1
    seed: int = 0
    max_iters: int | None = None
    tol: float | None = None
    sigmas: tuple[float, ...] = _DEFAULT_BENCH_SIGMAS
    pre_noised: bool = False
    extras: dict = field(default_factory=dict)


def read_matrix_csv(path) -> np.ndarray:
    """Read a headerless numeric CSV matrix; errors name the offending row."""
    rows: list[list[float]] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = [p for p in line.split(",")]
            try:
                values = [float(p) for p in parts]
            except ValueError as exc:
                raise ValueError(f"{path}: row {lineno}: non-numeric value") from exc
            if rows and len(values) != len(rows[0]):
                raise ValueError(
                    f"{path}: row {lineno}: expected {len(rows[0])} values, found {len(values)}"
                )
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: empty matrix")
    return np.array(rows, dtype=np.float64)


def write_matrix_csv(path, matrix: np.ndarray) -> None:
    np.savetxt(path, np.asarray(matrix, dtype=np.float64), delimiter=",", fmt="%.17g")


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _trace_dict(trace) -> dict:
    return {
        "objective_history": list(trace.objective_history),
        "tau_x_history": list(trace.tau_x_history),
        "tau_a_history": list(trace.tau_a_history),
        "iterations": trace.iterations,
        "stop_reason": trace.stop_reason.value,
    }


def _solver_config(manifest: RunManifest) -> SolverConfig:
    return SolverConfig(
        max_iters=manifest.max_iters if manifest.max_iters is not None else 5000,
        rel_obj_tol=manifest.tol if manifest.tol is not None else 1e-8,
        seed=manifest.seed,
    )


def _regime_for_case(manifest: RunManifest, k: int):
    if manifest.case == 1:
        return TotalNorm(manifest.beta)
    if manifest.case == 2:
        betas = manifest.betas if manifest.betas is not None else (manifest.beta,) * k
        if len(betas) != k:
            raise ValueError(f"--betas lists {len(betas)} bounds but the dictionary has {k} atoms")
        return PerAtomNorm(betas)
    if manifest.case == 3:
        return NonnegTotalNorm(manifest.beta)
    return NonnegL1Atom(manifest.theta)


_CASE_SOLVERS = {1: solve_case1, 2: solve_case2, 3: solve_case3, 4: solve_case4}


def cmd_learn(manifest: RunManifest) -> int:
    Y = TrainingMatrix(read_matrix_csv(manifest.input_path))
    k = manifest.atoms if manifest.atoms is not None else 2 * Y.signal_dim
    problem = BsumProblem(
        Y=Y,
        k=k,
        lam=manifest.lam,
        regime=_regime_for_case(manifest, k),
        config=_solver_config(manifest),
    )
    result = _CASE_SOLVERS[manifest.case](problem)
    out = manifest.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(out / "A.csv", result.A.atoms)
    write_matrix_csv(out / "X.csv", result.X.codes)
    _write_json(
        out / "trace.json",
        {
            "command": "learn",
            "case": manifest.case,
            "stationarity_residual": result.stationarity_residual,
            **_trace_dict(result.trace),
        },
    )
    return 0 if result.trace.stop_reason is StopReason.CONVERGED else 2


def cmd_constrained_fit(manifest: RunManifest) -> int:
    if manifest.alpha is None or manifest.alpha <= 0:
        raise CliUsageError("constrained-fit requires --alpha > 0")
    Y = TrainingMatrix(read_matrix_csv(manifest.input_path))
    k = manifest.atoms if manifest.atoms is not None else 2 * Y.signal_dim
    result = solve_constrained_fit(
        Y, k, manifest.alpha, TotalNorm(manifest.beta), _solver_config(manifest)
    )
    out = manifest.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(out / "A.csv", result.A.atoms)
    write_matrix_csv(out / "X.csv", result.X.codes)
    _write_json(
        out / "trace.json",
        {
            "command": "constrained-fit",
            "alpha": manifest.alpha,
            "stationarity_residual": result.stationarity_residual,
            **_trace_dict(result.trace),
        },
    )
    return 0 if result.trace.stop_reason is StopReason.CONVERGED else 2


def cmd_hardness(manifest: RunManifest) -> int:
    graph = load_graph(manifest.input_path)
    if graph.vertex_count > 10:
        print(
            f"error: graph has {graph.vertex_count} vertices; claim verification is capped at 10",
            file=sys.stderr,
        )
        return 1
    report = verify_claims(graph)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0 if report.all_claims_passed else 1


def _load_image(path: Path) -> GrayImage:
    if path.suffix.lower() == ".png":
        try:
            from PIL import Image
        except ImportError as exc:
            raise RuntimeError("PNG support requires Pillow; use PGM instead") from exc
        return GrayImage(np.asarray(Image.open(path).convert("L"), dtype=np.float64))
    return read_pgm(path)


def _denoise_trial(args):
    clean, manifest, trial_seed = args
    cfg = DenoiseConfig(
        sigma=manifest.sigma,
        learner=Learner.KSVD if manifest.learner in ("ksvd", "dct") else Learner.ALG2,
        learn_iters=0 if manifest.learner == "dct" else manifest.max_iters,
    )
    if manifest.pre_noised:
        noisy, reference = clean, None
    else:
        rng = np.random.default_rng(trial_seed)
        noisy = GrayImage(clean.pixels + rng.normal(0.0, manifest.sigma, clean.shape))
        reference = clean
    denoised, report = denoise_image(noisy, cfg, PatchConfig(), reference=reference)
    psnr_noisy = psnr(noisy, reference) if reference is not None else None
    return denoised, report, psnr_noisy


def _run_trials(work: list) -> list:
    threads = int(os.environ.get(THREAD_ENV_VAR, "1") or "1")
    if threads > 1 and len(work) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=min(threads, len(work))) as pool:
            return list(pool.map(_denoise_trial, work))
    return [_denoise_trial(item) for item in work]


def _trial_seeds(seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def _mean(values: list[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def cmd_denoise(manifest: RunManifest) -> int:
    if manifest.sigma is None or manifest.sigma <= 0:
        raise CliUsageError("denoise requires --sigma > 0")
    clean = _load_image(manifest.input_path)
    start = time.perf_counter()
    work = [(clean, manifest, s) for s in _trial_seeds(manifest.seed, manifest.trials)]
    outcomes = _run_trials(work)
    elapsed_ms = (time.perf_counter() - start) * 1000.0

    out = manifest.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_pgm(out / "denoised.pgm", outcomes[0][0])
    per_trial = [
        {"psnr_noisy": noisy_db, "psnr_denoised": rep.psnr_denoised}
        for _, rep, noisy_db in outcomes
    ]
    payload = {
        "psnr_noisy": _mean([t["psnr_noisy"] for t in per_trial]),
        "psnr_denoised": _mean([t["psnr_denoised"] for t in per_trial]),
        "sigma": manifest.sigma,
        "learner": manifest.learner,
        "iters": outcomes[0][1].iters,
        "trials": manifest.trials,
        "seed": manifest.seed,
        "per_trial": per_trial,
        "objective_trace": list(outcomes[0][1].objective_trace),
        "wall_time_ms": elapsed_ms,
    }
    _write_json(out / "report.json", payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_bench(manifest: RunManifest) -> int:
    clean = _load_image(manifest.input_path)
    lines = ["sigma,psnr_noisy,dct,ksvd,alg2"]
    for sigma in manifest.sigmas:
        if sigma <= 0:
            raise CliUsageError("bench sigmas must be positive")
        noisy_dbs: list[float] = []
        per_learner: dict[str, list[float]] = {"dct": [], "ksvd": [], "alg2": []}
        for trial_seed in _trial_seeds(manifest.seed, manifest.trials):
            rng = np.random.default_rng(trial_seed)
            noisy = GrayImage(clean.pixels + rng.normal(0.0, sigma, clean.shape))
            noisy_dbs.append(psnr(noisy, clean))
            for name in ("dct", "ksvd", "alg2"):
                cfg = DenoiseConfig(
                    sigma=sigma,
                    learner=Learner.ALG2 if name == "alg2" else Learner.KSVD,
                    learn_iters=0 if name == "dct" else manifest.max_iters,
                )
                denoised, _ = denoise_image(noisy, cfg, PatchConfig(), reference=clean)
                per_learner[name].append(psnr(denoised, clean))
        lines.append(
            f"{sigma:g},{np.mean(noisy_dbs):.4f},{np.mean(per_learner['dct']):.4f},"
            f"{np.mean(per_learner['ksvd']):.4f},{np.mean(per_learner['alg2']):.4f}"
        )
    table = "\n".join(lines) + "\n"
    sys.stdout.write(table)
    manifest.out_dir.mkdir(parents=True, exist_ok=True)
    with open(manifest.out_dir / "bench.csv", "w", encoding="ascii") as fh:
        fh.write(table)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="sparsedict", description="Sparse dictionary learning experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--max-iters", type=int, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--out", type=Path, default=Path("."))

    learn = sub.add_parser("learn", help="penalized dictionary learning on a CSV matrix")
    learn.add_argument("--input", type=Path, required=True)
    learn.add_argument("--case", type=int, choices=(1, 2, 3, 4), default=1)
    learn.add_argument("--beta", type=float, default=1.0)
    learn.add_argument("--betas", type=str, default=None, help="comma-separated per-atom bounds")
    learn.add_argument("--theta", type=float, default=1.0)
    learn.add_argument("--lambda", dest="lam", type=float, default=0.1)
    learn.add_argument("--atoms", type=int, default=None, help="atom count (default: 2x signal dim)")
    add_common(learn)

    fit = sub.add_parser("constrained-fit", help="sparsest codes under a fit budget")
    fit.add_argument("--input", type=Path, required=True)
    fit.add_argument("--alpha", type=float, required=True)
    fit.add_argument("--beta", type=float, default=1.0)
    fit.add_argument("--atoms", type=int, default=None)
    add_common(fit)

    hard = sub.add_parser("hardness", help="verify the densest-cut reduction claims on a graph")
    hard.add_argument("graph", type=Path)

    den = sub.add_parser("denoise", help="denoise a grayscale image")
    den.add_argument("image", type=Path)
    den.add_argument("--sigma", type=float, required=True)
    den.add_argument("--learner", choices=("alg2", "ksvd", "dct"), default="alg2")
    den.add_argument("--trials", type=int, default=1)
    den.add_argument("--pre-noised", action="store_true", help="treat the input as already noisy")
    add_common(den)

    bench = sub.add_parser("bench", help="sigma-grid comparison table")
    bench.add_argument("image", type=Path)
    bench.add_argument("--sigmas", type=str, default=None, help="comma-separated noise levels")
    bench.add_argument("--learner", choices=("alg2", "ksvd", "dct"), default="alg2")
    bench.add_argument("--trials", type=int, default=1)
    add_common(bench)
    return parser


def _manifest_from_args(args: argparse.Namespace) -> RunManifest:
    manifest = RunManifest(command=args.command)
    manifest.seed = getattr(args, "seed", 0)
    manifest.max_iters = getattr(args, "max_iters", None)
    manifest.tol = getattr(args, "tol", None)
    manifest.out_dir = getattr(args, "out", Path("."))
    if args.command in ("learn", "constrained-fit"):
        manifest.input_path = args.input
        manifest.beta = args.beta
        manifest.atoms = args.atoms
        if args.command == "learn":
            manifest.case = args.case
            manifest.lam = args.lam
            manifest.theta = args.theta
            if args.betas is not None:
                manifest.betas = tuple(float(v) for v in args.betas.split(","))
        else:
            manifest.alpha = args.alpha
    elif args.command == "hardness":
        manifest.input_path = args.graph
    elif args.command in ("denoise", "bench"):
        manifest.input_path = args.image
        manifest.learner = args.learner
        manifest.trials = args.trials
        if args.command == "denoise":
            manifest.sigma = args.sigma
            manifest.pre_noised = args.pre_noised
        elif args.sigmas is not None:
            manifest.sigmas = tuple(float(v) for v in args.sigmas.split(","))
    if manifest.input_path is not None and not manifest.input_path.exists():
        raise CliUsageError(f"input file not found: {manifest.input_path}")
    if manifest.trials < 1:
        raise CliUsageError("--trials must be at least 1")
    return manifest


_COMMANDS = {
    "learn": cmd_learn,
    "constrained-fit": cmd_constrained_fit,
    "hardness": cmd_hardness,
    "denoise": cmd_denoise,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        manifest = _manifest_from_args(args)
        return _COMMANDS[manifest.command](manifest)
    except CliUsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        code = exc.code if exc.code is not None else 0
        return int(code) if isinstance(code, int) else 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
