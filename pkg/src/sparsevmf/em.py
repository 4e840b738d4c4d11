"""Penalized EM for mixtures of von Mises-Fisher distributions.

The M phase couples the directional means and the concentrations through the
l1 penalty, so it is solved approximately by a fixed-point loop that
soft-thresholds each mean and then re-estimates kappa, in that order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DegenerateUniformError,
    EmptyComponentError,
    InitFailureError,
    ZeroMeanError,
)
from .special import log_vmf_normalizer
from .vmf import KAPPA_CAP

__all__ = [
    "MixtureParams",
    "Responsibilities",
    "FitOptions",
    "FitStatus",
    "FitResult",
    "init_random",
    "e_step",
    "soft_threshold_mu",
    "m_step",
    "fit_em",
    "penalized_log_likelihood",
    "hard_assign",
    "save_model",
    "load_model",
]


class FitStatus(str, Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"
    DEGENERATE_UNIFORM = "DegenerateUniform"
    ZERO_MEAN = "ZeroMean"
    EMPTY_COMPONENT = "EmptyComponent"


@dataclass
class MixtureParams:
    """Full parameter vector of a K-component vMF mixture.

    kappa_mode "free" keeps one concentration per component; "shared"
    constrains all components to a single value (kappas then holds K copies
    of it so the shapes stay uniform).
    """

    alpha: np.ndarray
    means: np.ndarray
    kappas: np.ndarray
    kappa_mode: str = "free"

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.kappas = np.atleast_1d(np.asarray(self.kappas, dtype=float))
        if self.kappa_mode not in ("free", "shared"):
            raise ValueError(f"unknown kappa_mode {self.kappa_mode!r}")
        k = self.alpha.shape[0]
        if self.means.shape[0] != k:
            raise ValueError("alpha and means disagree on K")
        if self.kappas.shape[0] == 1 and k > 1:
            self.kappas = np.full(k, self.kappas[0])
        if self.kappas.shape[0] != k:
            raise ValueError("kappas must be scalar or length K")
        if abs(self.alpha.sum() - 1.0) > 1e-10 or np.any(self.alpha < 0):
            raise ValueError("alpha must be nonnegative and sum to 1")
        norms = np.linalg.norm(self.means, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise ValueError("every mean must be unit-norm")
        if np.any(self.kappas <= 0) or np.any(self.kappas > KAPPA_CAP):
            raise ValueError(f"kappas must lie in (0, {KAPPA_CAP:g}]")
        if self.kappa_mode == "shared" and not np.all(self.kappas == self.kappas[0]):
            raise ValueError("shared mode requires a single kappa value")

    @property
    def K(self) -> int:
        return self.alpha.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def copy(self) -> "MixtureParams":
        return MixtureParams(
            self.alpha.copy(), self.means.copy(), self.kappas.copy(), self.kappa_mode
        )


@dataclass
class Responsibilities:
    """Posterior membership probabilities and per-observation log marginals."""

    tau: np.ndarray
    log_marginals: np.ndarray

    @property
    def log_likelihood(self) -> float:
        return float(self.log_marginals.sum())


@dataclass
class FitOptions:
    beta: float = 0.0
    max_em_iters: int = 500
    em_tol: float = 1e-6
    inner_max_iters: int = 100
    inner_tol: float = 1e-8
    kappa_cap: float = KAPPA_CAP
    kappa_mode: str = "free"
    seed: int | None = None

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        for name in ("em_tol", "inner_tol", "kappa_cap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


@dataclass
class FitResult:
    params: MixtureParams
    beta: float
    log_likelihood: float
    penalized_log_likelihood: float
    trace: list = field(default_factory=list)
    n_iters: int = 0
    status: FitStatus = FitStatus.CONVERGED


def init_random(X: np.ndarray, K: int, rng: np.random.Generator,
                kappa_mode: str = "free", kappa_cap: float = KAPPA_CAP) -> MixtureParams:
    """Random initialisation: K distinct observations as means, crisp
    assignment for alpha, and kappa solved from the crisp resultants.

    Raises InitFailureError when a crisp cluster is empty or a resultant is
    degenerate; callers retry with fresh draws.
    """
    from .special import invert_bessel_ratio

    n, d = X.shape
    if n < K:
        raise ValueError("need at least K observations")
    idx = rng.choice(n, size=K, replace=False)
    means = X[idx].copy()
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    labels = np.argmax(X @ means.T, axis=1)
    counts = np.bincount(labels, minlength=K)
    if np.any(counts == 0):
        raise InitFailureError("empty crisp cluster during initialisation")
    alpha = counts / n
    resultants = np.zeros((K, d))
    np.add.at(resultants, labels, X)
    if kappa_mode == "shared":
        # Pooled estimate: rho = (1/N) sum_k <mu_k, r_k>.
        rho = float(np.einsum("kj,kj->", means, resultants)) / n
        if rho <= 0:
            raise InitFailureError("nonpositive pooled resultant during initialisation")
        if rho >= 1.0 - 1e-12:
            kappa = kappa_cap
        else:
            kappa = min(invert_bessel_ratio(d, rho), kappa_cap)
        kappas = np.full(K, kappa)
    else:
        kappas = np.empty(K)
        for k in range(K):
            rho = float(means[k] @ resultants[k]) / counts[k]
            if rho <= 0:
                raise InitFailureError(f"nonpositive resultant for cluster {k}")
            if rho >= 1.0 - 1e-12:
                kappas[k] = kappa_cap
            else:
                kappas[k] = min(invert_bessel_ratio(d, rho), kappa_cap)
    return MixtureParams(alpha=alpha, means=means, kappas=kappas, kappa_mode=kappa_mode)


def _log_component_densities(X: np.ndarray, params: MixtureParams) -> np.ndarray:
    """N x K matrix of log f_k(x_i)."""
    d = params.d
    log_norm = np.array([log_vmf_normalizer(d, k) for k in params.kappas])
    return log_norm[None, :] + (X @ params.means.T) * params.kappas[None, :]


def e_step(X: np.ndarray, params: MixtureParams) -> Responsibilities:
    """Posterior responsibilities tau_ik, computed in log space."""
    with np.errstate(divide="ignore"):
        log_alpha = np.log(params.alpha)
    log_joint = log_alpha[None, :] + _log_component_densities(X, params)
    log_marginals = logsumexp(log_joint, axis=1)
    tau = np.exp(log_joint - log_marginals[:, None])
    return Responsibilities(tau=tau, log_marginals=log_marginals)


def soft_threshold_mu(r_k: np.ndarray, kappa: float, beta: float) -> np.ndarray:
    """Penalized mean update: soft-threshold kappa*|r| at beta and normalize.

    Solves max_{||mu||=1} kappa <mu, r> - beta ||mu||_1 in closed form.
    Raises ZeroMeanError when every coordinate is thresholded away.
    """
    shrunk = np.maximum(kappa * np.abs(r_k) - beta, 0.0)
    norm = np.linalg.norm(shrunk)
    if norm == 0.0:
        raise ZeroMeanError("soft-thresholding produced a zero directional mean")
    return np.sign(r_k) * shrunk / norm


def _kappa_from_rho(rho: float, d: int, kappa_cap: float) -> float:
    if rho <= 0.0:
        raise DegenerateUniformError(f"rho = {rho:g} <= 0: component drifting to uniform")
    if rho >= 1.0 - 1e-12:
        return kappa_cap
    from .special import invert_bessel_ratio

    # Newton-refined solve of the stationarity equation A_d(kappa) = rho; the
    # closed-form estimate alone leaves enough bias to break the monotone
    # ascent of the penalized log-likelihood.
    return min(invert_bessel_ratio(d, rho, refine=True), kappa_cap)


def m_step(X: np.ndarray, resp: Responsibilities, beta: float, kappa_mode: str,
           prev_params: MixtureParams, opts: FitOptions) -> MixtureParams:
    """Approximate M phase: closed-form alpha, then a fixed-point loop that
    updates the means (soft-thresholding) and then the kappas, seeded with the
    previous kappas."""
    tau = resp.tau
    n, d = X.shape
    K = tau.shape[1]
    col_sums = tau.sum(axis=0)
    if np.any(col_sums < 1e-12):
        raise EmptyComponentError("component with vanishing total responsibility")
    alpha = col_sums / n
    r = tau.T @ X  # K x d resultants
    kappas = prev_params.kappas.copy()
    means = prev_params.means.copy()
    for _ in range(opts.inner_max_iters):
        new_means = np.empty_like(means)
        for k in range(K):
            new_means[k] = soft_threshold_mu(r[k], kappas[k], beta)
        if kappa_mode == "shared":
            rho = float(np.einsum("kj,kj->", new_means, r)) / n
            new_kappas = np.full(K, _kappa_from_rho(rho, d, opts.kappa_cap))
        else:
            new_kappas = np.empty(K)
            for k in range(K):
                rho = float(new_means[k] @ r[k]) / col_sums[k]
                new_kappas[k] = _kappa_from_rho(rho, d, opts.kappa_cap)
        dk = np.max(np.abs(new_kappas - kappas) / np.maximum(kappas, 1e-300))
        dm = np.max(np.abs(new_means - means))
        means, kappas = new_means, new_kappas
        if dk <= opts.inner_tol and dm <= opts.inner_tol:
            break
    return MixtureParams(alpha=alpha, means=means, kappas=kappas, kappa_mode=kappa_mode)


def penalized_log_likelihood(X: np.ndarray, params: MixtureParams, beta: float) -> float:
    """Observed log-likelihood minus beta * sum of l1 norms of the means."""
    ll = e_step(X, params).log_likelihood
    return ll - beta * float(np.abs(params.means).sum())


def hard_assign(resp_or_tau) -> np.ndarray:
    """Crisp cluster per observation: argmax responsibility, ties to the
    lowest component index."""
    tau = resp_or_tau.tau if isinstance(resp_or_tau, Responsibilities) else np.asarray(resp_or_tau)
    return np.argmax(tau, axis=1)


def fit_em(X: np.ndarray, K: int, opts: FitOptions,
           init: MixtureParams | None = None,
           rng: np.random.Generator | None = None,
           max_init_retries: int = 50) -> FitResult:
    """Run penalized EM until the relative change of the penalized
    log-likelihood drops below em_tol.

    Degenerate situations (zero mean, uniform drift, empty component) are not
    raised: the result carries the corresponding status and the last valid
    parameters.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < K:
        raise ValueError("need at least K observations")
    if init is None:
        if rng is None:
            rng = np.random.default_rng(opts.seed)
        last_err = None
        for _ in range(max_init_retries):
            try:
                init = init_random(X, K, rng, kappa_mode=opts.kappa_mode,
                                   kappa_cap=opts.kappa_cap)
                break
            except InitFailureError as err:
                last_err = err
        if init is None:
            raise InitFailureError(f"initialisation failed {max_init_retries} times: {last_err}")
    params = init
    trace: list[float] = []
    status = FitStatus.MAX_ITERS
    prev_pll = -np.inf
    ll = -np.inf
    pll = -np.inf
    n_iters = 0
    penalty = lambda p: float(np.abs(p.means).sum())  # noqa: E731
    for it in range(opts.max_em_iters):
        resp = e_step(X, params)
        ll = resp.log_likelihood
        pll = ll - opts.beta * penalty(params)
        trace.append(pll)
        n_iters = it + 1
        if it > 0 and abs(pll - prev_pll) <= opts.em_tol * (abs(prev_pll) + 1e-12):
            status = FitStatus.CONVERGED
            break
        prev_pll = pll
        try:
            params = m_step(X, resp, opts.beta, opts.kappa_mode, params, opts)
        except ZeroMeanError:
            status = FitStatus.ZERO_MEAN
            break
        except DegenerateUniformError:
            status = FitStatus.DEGENERATE_UNIFORM
            break
        except EmptyComponentError:
            status = FitStatus.EMPTY_COMPONENT
            break
    else:
        # MaxIters: re-evaluate at the final parameters.
        resp = e_step(X, params)
        ll = resp.log_likelihood
        pll = ll - opts.beta * penalty(params)
        trace.append(pll)
    return FitResult(
        params=params,
        beta=opts.beta,
        log_likelihood=ll,
        penalized_log_likelihood=pll,
        trace=trace,
        n_iters=n_iters,
        status=status,
    )


def _means_to_sparse(means: np.ndarray) -> list:
    out = []
    for row in means:
        nz = np.nonzero(row)[0]
        out.append([[int(j), float(row[j])] for j in nz])
    return out


def _means_from_sparse(entries: list, d: int) -> np.ndarray:
    means = np.zeros((len(entries), d))
    for k, row in enumerate(entries):
        for j, v in row:
            means[k, j] = v
    return means


def fit_result_to_dict(fit: FitResult, seed=None) -> dict:
    p = fit.params
    kappa = float(p.kappas[0]) if p.kappa_mode == "shared" else [float(v) for v in p.kappas]
    return {
        "K": p.K,
        "d": p.d,
        "kappa_mode": p.kappa_mode,
        "alpha": [float(a) for a in p.alpha],
        "kappa": kappa,
        "means": _means_to_sparse(p.means),
        "beta": fit.beta,
        "log_likelihood": fit.log_likelihood,
        "penalized_log_likelihood": fit.penalized_log_likelihood,
        "status": fit.status.value,
        "n_iters": fit.n_iters,
        "seed": seed,
    }


def fit_result_from_dict(doc: dict) -> FitResult:
    d = doc["d"]
    kappa = doc["kappa"]
    kappas = np.full(doc["K"], kappa) if np.isscalar(kappa) else np.array(kappa)
    params = MixtureParams(
        alpha=np.array(doc["alpha"]),
        means=_means_from_sparse(doc["means"], d),
        kappas=kappas,
        kappa_mode=doc["kappa_mode"],
    )
    return FitResult(
        params=params,
        beta=doc["beta"],
        log_likelihood=doc["log_likelihood"],
        penalized_log_likelihood=doc["penalized_log_likelihood"],
        trace=[],
        n_iters=doc["n_iters"],
        status=FitStatus(doc["status"]),
    )


def save_model(fit: FitResult, path, seed=None) -> None:
    """Write a model JSON; floats use shortest round-trip decimals so loading
    reproduces the parameters bit-for-bit."""
    with open(path, "w") as fh:
        json.dump(fit_result_to_dict(fit, seed=seed), fh, indent=1)


def load_model(path) -> FitResult:
    with open(path) as fh:
        return fit_result_from_dict(json.load(fh))
