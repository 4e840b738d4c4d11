"""Observation matrices (loading, normalisation) and planted-structure
simulation of sparse vMF mixtures."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import vmf
from .em import MixtureParams, e_step, hard_assign
from .errors import CannotSparsifyError, NotBracketedError, ParseError, ZeroRowError

__all__ = [
    "Dataset",
    "SimulationConfig",
    "GroundTruth",
    "load_matrix",
    "save_matrix",
    "greedy_max_separation",
    "sparsify_means",
    "simulate_mixture",
    "calibrate_overlap",
    "sample_mixture",
    "save_ground_truth",
    "load_ground_truth",
]


@dataclass
class Dataset:
    """Row-major matrix of observations, optionally normalised to unit rows."""

    X: np.ndarray
    row_norms_applied: bool = False
    row_ids: list | None = None

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def density(self) -> float:
        return float(np.count_nonzero(self.X)) / self.X.size


@dataclass
class SimulationConfig:
    K: int
    d: int
    N: int
    overlap_target: float | None = None
    base_kappa: float | None = None
    sparsity: float = 0.0
    alpha: np.ndarray | None = None  # None means balanced 1/K
    kappa_jitter_sd_frac: float = 0.025
    candidate_multiplier: int = 20
    seed: int = 0

    def __post_init__(self):
        if (self.overlap_target is None) == (self.base_kappa is None):
            raise ValueError("exactly one of overlap_target / base_kappa must be given")
        if self.overlap_target is not None and not 0.0 < self.overlap_target < 0.5:
            raise ValueError("overlap_target must be in (0, 0.5)")
        if self.base_kappa is not None and self.base_kappa <= 0:
            raise ValueError("base_kappa must be positive")
        if not 0.0 <= self.sparsity < 1.0:
            raise ValueError("sparsity must be in [0, 1)")
        if self.alpha is not None:
            self.alpha = np.asarray(self.alpha, dtype=float)
            if np.any(self.alpha < 0) or abs(self.alpha.sum() - 1.0) > 1e-10:
                raise ValueError("alpha must be nonnegative and sum to 1")

    def to_dict(self) -> dict:
        return {
            "K": self.K, "d": self.d, "N": self.N,
            "overlap_target": self.overlap_target, "base_kappa": self.base_kappa,
            "sparsity": self.sparsity,
            "alpha": None if self.alpha is None else [float(a) for a in self.alpha],
            "kappa_jitter_sd_frac": self.kappa_jitter_sd_frac,
            "candidate_multiplier": self.candidate_multiplier,
            "seed": self.seed,
        }


@dataclass
class GroundTruth:
    """Planted parameters (after separability rescaling), labels and the
    binary support of the nonzero mean coordinates."""

    params: MixtureParams
    labels: np.ndarray
    support_mask: np.ndarray
    config: SimulationConfig | None = field(default=None, repr=False)


def _parse_dense_csv(path):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            try:
                row = [float(v) for v in fields]
            except ValueError:
                if lineno == 1:
                    continue  # header line
                raise ParseError(f"non-numeric value in {line!r}", line=lineno)
            rows.append(row)
    if not rows:
        raise ParseError("empty file")
    d = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != d:
            raise ParseError(f"expected {d} columns, got {len(row)}", line=i + 1)
    return np.array(rows)


def _parse_sparse_triplet(path):
    entries = []
    shape = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if parts and parts[0] == "shape":
                    shape = (int(parts[1]), int(parts[2]))
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"expected 'row col value', got {line!r}", line=lineno)
            try:
                entries.append((int(parts[0]), int(parts[1]), float(parts[2])))
            except ValueError:
                raise ParseError(f"malformed triplet {line!r}", line=lineno)
    if not entries and shape is None:
        raise ParseError("empty file")
    if shape is None:
        shape = (max(e[0] for e in entries) + 1, max(e[1] for e in entries) + 1)
    X = np.zeros(shape)
    for i, j, v in entries:
        X[i, j] = v
    return X


def load_matrix(path, format: str = "dense-csv", normalize: bool = True) -> Dataset:
    """Load a dense CSV or sparse triplet matrix; optionally normalise rows
    to unit norm (zero rows are rejected with their indices)."""
    if format == "dense-csv":
        X = _parse_dense_csv(path)
    elif format == "sparse-triplet":
        X = _parse_sparse_triplet(path)
    else:
        raise ValueError(f"unknown format {format!r}")
    if normalize:
        norms = np.linalg.norm(X, axis=1)
        zero_rows = np.nonzero(norms == 0)[0]
        if zero_rows.size:
            raise ZeroRowError(zero_rows.tolist())
        X = X / norms[:, None]
    return Dataset(X=X, row_norms_applied=normalize)


def save_matrix(X: np.ndarray, path, format: str = "dense-csv") -> None:
    X = np.asarray(X)
    if format == "dense-csv":
        with open(path, "w") as fh:
            for row in X:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    elif format == "sparse-triplet":
        with open(path, "w") as fh:
            fh.write(f"#shape {X.shape[0]} {X.shape[1]}\n")
            for i, j in zip(*np.nonzero(X)):
                fh.write(f"{i} {j} {float(X[i, j])!r}\n")
    else:
        raise ValueError(f"unknown format {format!r}")


def greedy_max_separation(candidates: np.ndarray, K: int) -> np.ndarray:
    """Pick K vectors with small pairwise inner products: start from the
    candidate pair with the smallest inner product, then repeatedly add the
    candidate whose worst (largest) inner product with the selection is
    smallest. Ties break to the lowest candidate index."""
    candidates = np.asarray(candidates, dtype=float)
    m = candidates.shape[0]
    if m < K:
        raise ValueError(f"need at least K={K} candidates, got {m}")
    if K == m:
        return candidates.copy()
    gram = candidates @ candidates.T
    if K == 1:
        return candidates[:1].copy()
    mask = ~np.tri(m, dtype=bool)
    flat = np.where(mask, gram, np.inf)
    i, j = np.unravel_index(np.argmin(flat), flat.shape)
    chosen = [int(i), int(j)]
    while len(chosen) < K:
        remaining = [c for c in range(m) if c not in chosen]
        worst = gram[np.ix_(remaining, chosen)].max(axis=1)
        chosen.append(remaining[int(np.argmin(worst))])
    return candidates[chosen].copy()


def sparsify_means(means: np.ndarray, sparsity: float, rng: np.random.Generator,
                   max_retries: int = 100) -> np.ndarray:
    """Zero out floor(sparsity*d) random coordinates per mean and renormalise.

    Retries with fresh coordinate subsets until the means are all nonzero and
    pairwise distinct; raises CannotSparsifyError after max_retries."""
    means = np.asarray(means, dtype=float)
    K, d = means.shape
    n_zero = int(np.floor(sparsity * d))
    if n_zero >= d:
        raise CannotSparsifyError("sparsity would zero every coordinate")
    if n_zero == 0:
        return means / np.linalg.norm(means, axis=1, keepdims=True)
    for _ in range(max_retries):
        out = means.copy()
        for k in range(K):
            zeros = rng.choice(d, size=n_zero, replace=False)
            out[k, zeros] = 0.0
        norms = np.linalg.norm(out, axis=1)
        if np.any(norms < 1e-12):
            continue
        out /= norms[:, None]
        distinct = all(
            not np.array_equal(out[a], out[b]) for a in range(K) for b in range(a + 1, K)
        )
        if distinct:
            return out
    raise CannotSparsifyError(f"no valid sparsification after {max_retries} retries")


def sample_mixture(params: MixtureParams, n: int, rng: np.random.Generator):
    """Draw n labeled observations from the mixture."""
    labels = rng.choice(params.K, size=n, p=params.alpha)
    X = np.empty((n, params.d))
    for k in range(params.K):
        idx = np.nonzero(labels == k)[0]
        if idx.size:
            p = vmf.VmfParams(mu=params.means[k], kappa=params.kappas[k])
            X[idx] = vmf.sample(p, idx.size, rng)
    return X, labels


def _rescale_for_separability(means: np.ndarray, kappas: np.ndarray) -> np.ndarray:
    """kappa'_k = 2 kappa_k / (1 - max_{l != k} <mu_k, mu_l>)."""
    gram = means @ means.T
    np.fill_diagonal(gram, -np.inf)
    cross = gram.max(axis=1)
    return 2.0 * kappas / (1.0 - cross)


def _build_truth_params(means, base_kappa, alpha, rng, jitter_sd_frac):
    K = means.shape[0]
    if jitter_sd_frac > 0:
        kappas = np.empty(K)
        for k in range(K):
            while True:  # truncate the jitter at 0
                v = rng.normal(base_kappa, jitter_sd_frac * base_kappa)
                if v > 0:
                    kappas[k] = v
                    break
    else:
        kappas = np.full(K, base_kappa)
    kappas = np.minimum(_rescale_for_separability(means, kappas), vmf.KAPPA_CAP)
    return MixtureParams(alpha=alpha, means=means, kappas=kappas, kappa_mode="free")


def calibrate_overlap(means: np.ndarray, target: float, alpha: np.ndarray,
                      rng: np.random.Generator, n_samples: int = 100_000,
                      max_steps: int = 40) -> float:
    """Find a base kappa whose mixture (jitter off, separability rescaling on)
    has a crisp-assignment error rate close to target, by bisection.

    Stops when |error - target| < 0.1*target or after max_steps bisections.
    Raises NotBracketedError when the target is unreachable in [0.01, 1e4]."""
    if not 0.0 < target < 0.5:
        raise ValueError("target must be in (0, 0.5)")

    def error_at(base_kappa):
        params = _build_truth_params(means, base_kappa, alpha, rng, jitter_sd_frac=0.0)
        X, labels = sample_mixture(params, n_samples, rng)
        pred = hard_assign(e_step(X, params))
        return float(np.mean(pred != labels))

    lo, hi = 0.01, 1e4
    err_lo = error_at(lo)
    err_hi = error_at(hi)
    # Error decreases with kappa: need err_lo >= target >= err_hi.
    if err_lo < target or err_hi > target:
        raise NotBracketedError(
            f"target {target} outside reachable range [{err_hi:.4f}, {err_lo:.4f}]"
        )
    kappa = float(np.sqrt(lo * hi))
    for _ in range(max_steps):
        # Geometric midpoint: kappa acts on a multiplicative scale.
        kappa = float(np.sqrt(lo * hi))
        err = error_at(kappa)
        if abs(err - target) < 0.1 * target:
            return kappa
        if err > target:
            lo = kappa
        else:
            hi = kappa
    return kappa


def simulate_mixture(cfg: SimulationConfig,
                     rng: np.random.Generator | None = None) -> tuple[Dataset, GroundTruth]:
    """Generate a planted sparse vMF mixture dataset.

    Steps: uniform candidates, greedy separation, sparsification, base-kappa
    resolution (given or calibrated), per-component Gaussian jitter truncated
    at 0, separability rescaling, then sampling."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    g = rng.standard_normal((cfg.candidate_multiplier * cfg.K, cfg.d))
    candidates = g / np.linalg.norm(g, axis=1, keepdims=True)
    means = greedy_max_separation(candidates, cfg.K)
    means = sparsify_means(means, cfg.sparsity, rng)
    alpha = cfg.alpha if cfg.alpha is not None else np.full(cfg.K, 1.0 / cfg.K)
    if cfg.base_kappa is not None:
        base_kappa = cfg.base_kappa
    else:
        base_kappa = calibrate_overlap(means, cfg.overlap_target, alpha, rng)
    params = _build_truth_params(means, base_kappa, alpha, rng, cfg.kappa_jitter_sd_frac)
    X, labels = sample_mixture(params, cfg.N, rng)
    support = (params.means != 0.0).astype(int)
    truth = GroundTruth(params=params, labels=labels, support_mask=support, config=cfg)
    return Dataset(X=X, row_norms_applied=True), truth


def save_ground_truth(truth: GroundTruth, path) -> None:
    p = truth.params
    mu_sparse = []
    for row in p.means:
        nz = np.nonzero(row)[0]
        mu_sparse.append([[int(j), float(row[j])] for j in nz])
    doc = {
        "alpha": [float(a) for a in p.alpha],
        "kappa": [float(v) for v in p.kappas],
        "mu": mu_sparse,
        "d": p.d,
        "labels": [int(v) for v in truth.labels],
        "seed": None if truth.config is None else truth.config.seed,
        "config": None if truth.config is None else truth.config.to_dict(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_ground_truth(path) -> GroundTruth:
    with open(path) as fh:
        doc = json.load(fh)
    d = doc["d"]
    K = len(doc["alpha"])
    means = np.zeros((K, d))
    for k, row in enumerate(doc["mu"]):
        for j, v in row:
            means[k, j] = v
    params = MixtureParams(
        alpha=np.array(doc["alpha"]),
        means=means,
        kappas=np.array(doc["kappa"]),
        kappa_mode="free",
    )
    cfg = None
    if doc.get("config"):
        cfg = SimulationConfig(**{k: v for k, v in doc["config"].items()})
    return GroundTruth(
        params=params,
        labels=np.array(doc["labels"]),
        support_mask=(means != 0.0).astype(int),
        config=cfg,
    )
