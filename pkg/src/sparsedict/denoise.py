"""Patch-based grayscale image denoising.

Pipeline: slide fully-contained square patches out of the noisy image, learn
a dictionary on the patch columns (either the per-atom-norm learner with an
L1 penalty scaled to the noise level, or a K-SVD/OMP baseline), then blend
the per-patch reconstructions back with the noisy pixels. The blend solves
(beta I + sum R^T R)^-1 (beta Y + sum R^T A x) in closed form: the patch
operator Gram is diagonal with per-pixel cover counts.

Images are float64 matrices in nominal [0, 255]; quantization to 8-bit
happens only at PGM export.
"""

from __future__ import annotations

import enum
import math
import re
import time
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import (
    Dictionary,
    PerAtomNorm,
    SolverConfig,
    TrainingMatrix,
    as_array,
)
from .bsum import BsumProblem, solve_case2


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Grayscale image, float64, nominal range [0, 255] (not enforced)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be a nonempty 2-D array, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("image has non-finite pixels")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


@dataclass(frozen=True)
class PatchConfig:
    patch_side: int = 8
    stride: int = 1

    def __post_init__(self):
        if self.patch_side < 1 or self.stride < 1:
            raise ValueError("patch_side and stride must be positive")


class Learner(enum.Enum):
    ALG2 = "alg2"
    KSVD = "ksvd"


@dataclass(frozen=True)
class DenoiseConfig:
    sigma: float
    dict_atoms: int = 256
    mu_slope: float = 0.0015
    mu_intercept: float = 0.2
    blend_beta_numerator: float = 30.0
    learner: Learner = Learner.ALG2
    # None picks a per-learner default (200 prox sweeps / 10 K-SVD rounds);
    # 0 freezes the dictionary at its initialization.
    learn_iters: int | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be strictly positive")
        if self.dict_atoms < 1:
            raise ValueError("dict_atoms must be positive")
        if self.learn_iters is not None and self.learn_iters < 0:
            raise ValueError("learn_iters must be nonnegative")

    def resolved_iters(self) -> int:
        if self.learn_iters is not None:
            return self.learn_iters
        return 200 if self.learner is Learner.ALG2 else 10


@dataclass(frozen=True)
class DenoiseReport:
    sigma: float
    learner: str
    iters: int
    wall_time_ms: float
    objective_trace: tuple[float, ...]
    psnr_noisy: float | None = None
    psnr_denoised: float | None = None
    atom_norm_min: float | None = None
    atom_norm_max: float | None = None

    def to_dict(self) -> dict:
        return {
            "psnr_noisy": self.psnr_noisy,
            "psnr_denoised": self.psnr_denoised,
            "sigma": self.sigma,
            "learner": self.learner,
            "iters": self.iters,
            "wall_time_ms": self.wall_time_ms,
            "objective_trace": list(self.objective_trace),
            "atom_norm_min": self.atom_norm_min,
            "atom_norm_max": self.atom_norm_max,
        }


def _grid_shape(image_shape: tuple[int, int], cfg: PatchConfig) -> tuple[int, int]:
    h, w = image_shape
    p = cfg.patch_side
    if p > h or p > w:
        raise ValueError(f"patch side {p} exceeds image shape {image_shape}")
    return (h - p) // cfg.stride + 1, (w - p) // cfg.stride + 1


def extract_patches(img: GrayImage, cfg: PatchConfig) -> TrainingMatrix:
    """Fully-contained patch_side x patch_side windows as columns.

    Columns are ordered row-major over anchor positions; pixels within a
    patch are flattened row-major.
    """
    p = cfg.patch_side
    gh, gw = _grid_shape(img.shape, cfg)
    windows = sliding_window_view(img.pixels, (p, p))[:: cfg.stride, :: cfg.stride]
    return TrainingMatrix(windows.reshape(gh * gw, p * p).T)


def reassemble(patch_codes, A, noisy: GrayImage, cfg: PatchConfig, blend_beta: float) -> GrayImage:
    """Blend per-patch reconstructions with the noisy image.

    Every pixel becomes (beta * noisy + sum of covering reconstructions) /
    (beta + cover count). Pixels with no evidence at all (beta = 0 and never
    covered) pass through unchanged. An empty code set returns the noisy
    image.
    """
    if blend_beta < 0:
        raise ValueError("blend_beta must be nonnegative")
    codes = as_array(patch_codes)
    atoms = as_array(A)
    if codes.shape[1] == 0:
        return GrayImage(noisy.pixels)
    p = cfg.patch_side
    if atoms.shape[0] != p * p:
        raise ValueError(f"atoms have {atoms.shape[0]} rows; expected {p * p} for {p}x{p} patches")
    gh, gw = _grid_shape(noisy.shape, cfg)
    if codes.shape[1] != gh * gw:
        raise ValueError(f"got {codes.shape[1]} patch codes; the patch grid has {gh * gw}")
    recon = atoms @ codes
    numer = blend_beta * noisy.pixels.copy()
    denom = np.full(noisy.shape, blend_beta)
    s = cfg.stride
    for a in range(p):
        for b in range(p):
            rows = slice(a, a + s * (gh - 1) + 1, s)
            cols = slice(b, b + s * (gw - 1) + 1, s)
            numer[rows, cols] += recon[a * p + b].reshape(gh, gw)
            denom[rows, cols] += 1.0
    covered = denom > 0
    out = noisy.pixels.copy()
    out[covered] = numer[covered] / denom[covered]
    return GrayImage(out)


def overcomplete_dct(n_pixels: int, n_atoms: int) -> Dictionary:
    """Separable overcomplete cosine dictionary with unit-norm atoms.

    Builds the 1-D bank D[t, j] = cos(pi * j * (t + 1/2) / m), removes the
    mean of every non-constant column, normalizes, and takes all Kronecker
    pairs. Atom count must be a perfect square at least as large (per side)
    as the pixel count's square side.
    """
    p = math.isqrt(n_pixels)
    m = math.isqrt(n_atoms)
    if p * p != n_pixels or m * m != n_atoms:
        raise ValueError("n_pixels and n_atoms must be perfect squares")
    if p > m:
        raise ValueError("need at least as many 1-D atoms as 1-D pixels")
    t = np.arange(p)
    bank = np.cos(np.pi * np.outer(t + 0.5, np.arange(m)) / m)
    bank[:, 1:] -= bank[:, 1:].mean(axis=0)
    bank /= np.linalg.norm(bank, axis=0)
    atoms = np.kron(bank, bank)
    return Dictionary(atoms, PerAtomNorm((1.0,) * (m * m)))


def mu_schedule(sigma: float, patches, cfg: DenoiseConfig) -> float:
    """Sparsity weight c * (slope * sigma + intercept) with c the mean patch norm."""
    cols = as_array(patches)
    if cols.shape[1] == 0:
        raise ValueError("need at least one patch")
    c = float(np.linalg.norm(cols, axis=0).mean())
    return c * (cfg.mu_slope * sigma + cfg.mu_intercept)


def _omp_single(y, gram, proj, max_atoms: int, residual_tol: float) -> tuple[list[int], np.ndarray]:
    """Greedy selection for one column given precomputed A^T A and A^T y."""
    norm_sq = float(y @ y)
    support: list[int] = []
    coef = np.empty(0)
    corr = proj.copy()
    budget = min(max_atoms, gram.shape[0])
    while len(support) < budget and norm_sq > residual_tol**2:
        corr_abs = np.abs(corr)
        if support:
            corr_abs[support] = 0.0
        j = int(corr_abs.argmax())
        if corr_abs[j] <= 1e-12:
            break
        support.append(j)
        sub = gram[np.ix_(support, support)]
        try:
            coef = np.linalg.solve(sub, proj[support])
        except np.linalg.LinAlgError:
            coef, *_ = np.linalg.lstsq(sub, proj[support], rcond=None)
        norm_sq = max(float(y @ y) - float(coef @ proj[support]), 0.0)
        corr = proj - gram[:, support] @ coef
    return support, coef


def omp(y, A, max_atoms: int, residual_tol: float) -> np.ndarray:
    """Orthogonal matching pursuit for one signal.

    Greedily selects the atom most correlated with the residual and refits
    the active set by least squares, stopping at max_atoms atoms or when the
    residual norm drops to residual_tol.
    """
    atoms = as_array(A)
    vec = np.asarray(y, dtype=np.float64).ravel()
    if atoms.shape[0] != vec.shape[0]:
        raise ValueError(f"signal has {vec.shape[0]} entries; atoms have {atoms.shape[0]} rows")
    support, coef = _omp_single(vec, atoms.T @ atoms, atoms.T @ vec, max_atoms, residual_tol)
    out = np.zeros(atoms.shape[1])
    if support:
        out[support] = coef
    return out


def _omp_batch(Y: np.ndarray, atoms: np.ndarray, max_atoms: int, residual_tol: float) -> np.ndarray:
    gram = atoms.T @ atoms
    proj = atoms.T @ Y
    X = np.zeros((atoms.shape[1], Y.shape[1]))
    for i in range(Y.shape[1]):
        support, coef = _omp_single(Y[:, i], gram, proj[:, i], max_atoms, residual_tol)
        if support:
            X[support, i] = coef
    return X


def _rank1_fit(sub: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Leading unit atom and coefficients of a residual block (power iteration)."""
    rows, cols = sub.shape
    if not sub.any():
        return np.zeros(rows), np.zeros(cols)
    gram = sub.T @ sub if cols <= rows else sub @ sub.T
    dim = gram.shape[0]
    scale = float(np.abs(gram).max())
    for start in [np.full(dim, 1.0 / math.sqrt(dim)), *np.eye(dim)]:
        v = start
        estimate = 0.0
        stalled = False
        for _ in range(200):
            w = gram @ v
            rayleigh = float(v @ w)
            norm_w = float(np.linalg.norm(w))
            if norm_w <= scale * 1e-300:
                stalled = True
                break
            v = w / norm_w
            if abs(rayleigh - estimate) <= 1e-10 * max(abs(rayleigh), 1e-300):
                break
            estimate = rayleigh
        if stalled:
            continue
        u = v if cols > rows else sub @ v / np.linalg.norm(sub @ v)
        if u[np.abs(u).argmax()] < 0:  # deterministic sign
            u = -u
        return u, u @ sub
    return np.zeros(rows), np.zeros(cols)


def ksvd_learn(patches, A0, iters: int, omp_budget: int, residual_tol: float):
    """K-SVD: alternate OMP sparse coding with per-atom rank-one updates.

    Unused atoms are replaced by the currently worst-represented patch,
    normalized. Atom norms stay at one; the fit never increases across the
    atom-update half of an iteration.
    """
    Y = as_array(patches)
    A = as_array(A0).copy()
    k = A.shape[1]
    X = np.zeros((k, Y.shape[1]))
    for _ in range(iters):
        X = _omp_batch(Y, A, omp_budget, residual_tol)
        R = Y - A @ X
        for j in range(k):
            used = np.flatnonzero(X[j])
            if used.size == 0:
                worst = int((R * R).sum(axis=0).argmax())
                norm = float(np.linalg.norm(Y[:, worst]))
                if norm > 0:
                    A[:, j] = Y[:, worst] / norm
                continue
            block = R[:, used] + np.outer(A[:, j], X[j, used])
            u, coeffs = _rank1_fit(block)
            if not u.any():
                continue
            A[:, j] = u
            X[j, used] = coeffs
            R[:, used] = block - np.outer(u, coeffs)
    return A, X


def psnr(a: GrayImage, b: GrayImage) -> float:
    """Peak signal-to-noise ratio in dB against a 255 peak; inf for identical images."""
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    mse = float(((a.pixels - b.pixels) ** 2).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def denoise_image(
    noisy: GrayImage,
    cfg: DenoiseConfig,
    pcfg: PatchConfig | None = None,
    reference: GrayImage | None = None,
) -> tuple[GrayImage, DenoiseReport]:
    """Run the full patch pipeline on a noisy image.

    The per-atom-norm learner starts from the overcomplete cosine dictionary
    with unit atom bounds and the noise-scaled sparsity weight; the K-SVD
    learner codes with an OMP error threshold tied to sigma and recodes once
    with its final dictionary. Reconstruction blends with weight 30/sigma
    (numerator configurable).
    """
    pcfg = pcfg or PatchConfig()
    start = time.perf_counter()
    patches = extract_patches(noisy, pcfg)
    dim = pcfg.patch_side**2
    init = overcomplete_dct(dim, cfg.dict_atoms)
    mu = mu_schedule(cfg.sigma, patches, cfg)
    iters = cfg.resolved_iters()

    if cfg.learner is Learner.ALG2:
        if iters == 0:
            atoms, codes, trace = init.atoms, np.zeros((cfg.dict_atoms, patches.signal_count)), ()
        else:
            # The patch objective penalizes mu*||x||_1 against an unhalved
            # sum-of-squares fit; the solver halves the fit, so the
            # equivalent penalty weight there is mu/2.
            problem = BsumProblem(
                Y=patches,
                k=cfg.dict_atoms,
                lam=0.5 * mu,
                regime=PerAtomNorm((1.0,) * cfg.dict_atoms),
                config=SolverConfig(max_iters=iters, rel_obj_tol=1e-7, seed=0),
            )
            result = solve_case2(problem, initial_atoms=init.atoms)
            atoms, codes = result.A.atoms, result.X.codes
            trace = result.trace.objective_history
    else:
        budget = 32
        tol = math.sqrt(dim) * 1.15 * cfg.sigma
        atoms, _ = ksvd_learn(patches, init.atoms, iters, budget, tol)
        codes = _omp_batch(patches.data, atoms, budget, tol)
        trace = ()

    blend = cfg.blend_beta_numerator / cfg.sigma
    clean = reassemble(codes, atoms, noisy, pcfg, blend)
    elapsed_ms = (time.perf_counter() - start) * 1000.0
    norms = np.linalg.norm(atoms, axis=0)
    report = DenoiseReport(
        sigma=cfg.sigma,
        learner=cfg.learner.value,
        iters=iters,
        wall_time_ms=elapsed_ms,
        objective_trace=tuple(trace),
        psnr_noisy=psnr(noisy, reference) if reference is not None else None,
        psnr_denoised=psnr(clean, reference) if reference is not None else None,
        atom_norm_min=float(norms.min()),
        atom_norm_max=float(norms.max()),
    )
    return clean, report


# --- PGM I/O -------------------------------------------------------------------


def read_pgm(path) -> GrayImage:
    """Read an 8-bit PGM image (P5 binary or P2 ASCII)."""
    with open(path, "rb") as fh:
        data = fh.read()
    header_tokens: list[bytes] = []
    pos = 0
    while len(header_tokens) < 4:
        match = re.compile(rb"\s*(#[^\n]*\n|\S+)").match(data, pos)
        if match is None:
            raise ValueError(f"{path}: truncated PGM header")
        pos = match.end()
        token = match.group(1)
        if not token.startswith(b"#"):
            header_tokens.append(token)
    magic, width, height, maxval = header_tokens
    if magic not in (b"P5", b"P2"):
        raise ValueError(f"{path}: not a PGM file (magic {magic!r})")
    w, h, mv = int(width), int(height), int(maxval)
    if not 1 <= mv <= 255:
        raise ValueError(f"{path}: only 8-bit PGM supported, maxval={mv}")
    if magic == b"P5":
        raw = data[pos + 1 : pos + 1 + w * h]  # single whitespace byte after maxval
        if len(raw) != w * h:
            raise ValueError(f"{path}: expected {w * h} pixel bytes, found {len(raw)}")
        pixels = np.frombuffer(raw, dtype=np.uint8).astype(np.float64).reshape(h, w)
    else:
        values = data[pos:].split()
        if len(values) != w * h:
            raise ValueError(f"{path}: expected {w * h} pixel values, found {len(values)}")
        pixels = np.array([int(v) for v in values], dtype=np.float64).reshape(h, w)
    return GrayImage(pixels)


def write_pgm(path, img: GrayImage, binary: bool = True) -> None:
    """Write an image as 8-bit PGM, clipping to [0, 255] and rounding."""
    quantized = np.clip(np.rint(img.pixels), 0, 255).astype(np.uint8)
    h, w = quantized.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(quantized.tobytes())
        else:
            fh.write(f"P2\n{w} {h}\n255\n".encode("ascii"))
            body = "\n".join(" ".join(str(v) for v in row) for row in quantized)
            fh.write(body.encode("ascii") + b"\n")
