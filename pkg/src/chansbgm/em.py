"""Mixture model on sparse coefficients, fit by expectation-maximization.

The model is a K-component zero-mean complex Gaussian mixture with
diagonal per-component covariances diag(gamma_k) on the coefficient
vector s, observed only through y = A D s + n. The E-step needs, per
sample and component, the responsibility and the posterior second-moment
diagonal |mu|^2 + diag(C); the M-step averages those statistics.

Because the noise variance differs per sample, the observation covariance
C_y = W diag(gamma_k) W^H + sigma_i^2 I cannot be factorized once per
component. Instead the sigma-independent part is eigendecomposed once per
component per iteration; shifting its eigenvalues by sigma_i^2 then gives
every per-sample inverse, log-determinant, and quadratic form through a
few dense matrix products. This is algebraically identical to the
per-sample Cholesky route in :mod:`chansbgm.posterior` (tested against
it) but runs vectorized over the whole dataset.

Setting K = 1 recovers multiple-measurement-vector sparse Bayesian
learning; the CLI exposes it under the name ``msbl``.

The coefficient variances may optionally be constrained to a Kronecker
product gamma_k = gamma_t_k kron gamma_f_k (Doppler factor times delay
factor), which has no closed-form M-step; coordinate updates with
closed-form half-steps are used instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .container import read_array, read_json, write_array, write_json
from .dictionary import DelayDopplerGrid, Dictionary
from .errors import InvalidArgumentError, NumericError
from .scenario import ObservationSet
from .utils import content_id, hermitianize

GAMMA_FLOOR = 1e-7

_DEAD_RESPONSIBILITY = 1e-300

FULL = "full"
KRONECKER = "kronecker"


@dataclass
class SbgmModel:
    """Mixture weights plus per-component diagonal coefficient variances.

    ``variances`` holds (K, S) for the full form; the Kronecker form
    stores (K, S_t) and (K, S_f) factors that expand to
    ``kron(doppler, delay)`` rows.
    """

    weights: np.ndarray
    variance_form: str = FULL
    variances: np.ndarray | None = None
    doppler_variances: np.ndarray | None = None
    delay_variances: np.ndarray | None = None
    clip_floor: float = GAMMA_FLOOR

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 1 or len(self.weights) < 1:
            raise InvalidArgumentError("weights must be a nonempty vector")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("weights must be nonnegative and sum to 1")
        if self.variance_form == FULL:
            if self.variances is None:
                raise InvalidArgumentError("full form requires a variances array")
            self.variances = np.asarray(self.variances, dtype=float)
            if self.variances.shape[0] != len(self.weights):
                raise InvalidArgumentError("one variance row per component required")
            if np.any(self.variances < 0):
                raise InvalidArgumentError("variances must be nonnegative")
        elif self.variance_form == KRONECKER:
            if self.doppler_variances is None or self.delay_variances is None:
                raise InvalidArgumentError("kronecker form requires both factor arrays")
            self.doppler_variances = np.asarray(self.doppler_variances, dtype=float)
            self.delay_variances = np.asarray(self.delay_variances, dtype=float)
            k = len(self.weights)
            if self.doppler_variances.shape[0] != k or self.delay_variances.shape[0] != k:
                raise InvalidArgumentError("one factor row per component required")
            if np.any(self.doppler_variances < 0) or np.any(self.delay_variances < 0):
                raise InvalidArgumentError("variance factors must be nonnegative")
        else:
            raise InvalidArgumentError(f"unknown variance form {self.variance_form!r}")

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def n_coefficients(self) -> int:
        if self.variance_form == FULL:
            return self.variances.shape[1]
        return self.doppler_variances.shape[1] * self.delay_variances.shape[1]

    def component_variances(self, k: int) -> np.ndarray:
        if self.variance_form == FULL:
            return self.variances[k]
        return np.kron(self.doppler_variances[k], self.delay_variances[k])

    def expanded_variances(self) -> np.ndarray:
        return np.stack([self.component_variances(k) for k in range(self.n_components)])

    @property
    def content_id(self) -> str:
        chunks = [self.weights.tobytes()]
        if self.variance_form == FULL:
            chunks.append(self.variances.tobytes())
        else:
            chunks.append(self.doppler_variances.tobytes())
            chunks.append(self.delay_variances.tobytes())
        return content_id(*chunks)


@dataclass
class EmTrace:
    """Per-iteration total log-likelihood of the training data."""

    log_likelihoods: np.ndarray
    converged: bool
    n_iterations: int

    def is_monotone(self, rel_slack: float = 1e-8) -> bool:
        ll = self.log_likelihoods
        if len(ll) < 2:
            return True
        floor = ll[:-1] - rel_slack * np.abs(ll[:-1])
        return bool(np.all(ll[1:] >= floor))


class _ComponentCache:
    """Eigendecomposition of W diag(gamma) W^H, reused across all samples.

    With B = U diag(lam) U^H, every per-sample covariance is
    U diag(lam + sigma_i^2) U^H, so inverses and determinants reduce to
    the shifted eigenvalues.
    """

    def __init__(self, gamma: np.ndarray, w: np.ndarray):
        self.gamma = gamma
        b = hermitianize((w * gamma[None, :]) @ w.conj().T)
        lam, u = np.linalg.eigh(b)
        self.lam = np.maximum(lam, 0.0)
        self.u = u
        self.g = w.conj().T @ u  # (S, M)

    def log_marginals(self, samples: np.ndarray, sigma2s: np.ndarray) -> np.ndarray:
        m = samples.shape[1]
        yt = samples @ self.u.conj()
        denom = self.lam[None, :] + sigma2s[:, None]
        quad = np.sum(np.abs(yt) ** 2 / denom, axis=1)
        return -m * math.log(math.pi) - np.sum(np.log(denom), axis=1) - quad

    def moment_stats(self, samples: np.ndarray, sigma2s: np.ndarray) -> np.ndarray:
        """Per-sample |mu|^2 + diag(C) as an (n, S) array."""
        yt = samples @ self.u.conj()
        denom = self.lam[None, :] + sigma2s[:, None]
        mu = (yt / denom) @ self.g.T * self.gamma[None, :]
        quad = (1.0 / denom) @ (np.abs(self.g) ** 2).T
        cov_diag = np.clip(
            self.gamma[None, :] - self.gamma[None, :] ** 2 * quad,
            0.0,
            self.gamma[None, :],
        )
        return np.abs(mu) ** 2 + cov_diag


def _effective_matrix(obs: ObservationSet, dictionary: Dictionary) -> np.ndarray:
    if obs.measurement.shape[1] != dictionary.matrix.shape[0]:
        raise InvalidArgumentError(
            "observation measurement and dictionary have incompatible shapes"
        )
    return obs.measurement @ dictionary.matrix


def _log_weights(weights: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(weights, _DEAD_RESPONSIBILITY))


def csgmm_e_step(
    model: SbgmModel, obs: ObservationSet, dictionary: Dictionary
) -> tuple[np.ndarray, np.ndarray]:
    """Responsibilities (n, K) and posterior statistics (K, n, S).

    The statistics are the per-sample second-moment diagonals
    |mu_ik|^2 + diag(C_ik) needed by the M-step. Responsibilities are
    normalized in the log domain.
    """
    if len(obs) == 0:
        raise InvalidArgumentError("observation set must be nonempty")
    w = _effective_matrix(obs, dictionary)
    caches = [_ComponentCache(model.component_variances(k), w) for k in range(model.n_components)]
    log_marg = np.column_stack([c.log_marginals(obs.samples, obs.noise_vars) for c in caches])
    log_post = log_marg + _log_weights(model.weights)[None, :]
    resp = np.exp(log_post - logsumexp(log_post, axis=1, keepdims=True))
    resp /= resp.sum(axis=1, keepdims=True)
    stats = np.stack([c.moment_stats(obs.samples, obs.noise_vars) for c in caches])
    return resp, stats


def _worst_explained_sample(resp: np.ndarray) -> int:
    return int(np.argmin(resp.max(axis=1)))


def csgmm_m_step(
    resp: np.ndarray, stats: np.ndarray, clip_floor: float = GAMMA_FLOOR
) -> SbgmModel:
    """Closed-form update: weighted means of the posterior statistics.

    A component whose total responsibility underflows is reinitialized
    from the sample the current model explains worst.
    """
    resp = np.asarray(resp, dtype=float)
    stats = np.asarray(stats, dtype=float)
    n, k = resp.shape
    totals = resp.sum(axis=0)
    weights = totals / n
    gammas = np.empty((k, stats.shape[2]))
    dead = totals < _DEAD_RESPONSIBILITY
    for j in range(k):
        if dead[j]:
            gammas[j] = stats[j, _worst_explained_sample(resp)]
        else:
            gammas[j] = resp[:, j] @ stats[j] / totals[j]
    if np.any(dead):
        weights = np.maximum(weights, np.where(dead, 1.0 / n, 0.0))
        weights /= weights.sum()
    return SbgmModel(
        weights=weights,
        variance_form=FULL,
        variances=np.maximum(gammas, clip_floor),
        clip_floor=clip_floor,
    )


def kronecker_q_objective(
    resp: np.ndarray,
    stats: np.ndarray,
    weights: np.ndarray,
    doppler_factors: np.ndarray,
    delay_factors: np.ndarray,
) -> float:
    """Expected complete-data log-likelihood under Kronecker variances.

    Used to verify that the coordinate updates never decrease the
    objective they maximize.
    """
    n, k = resp.shape
    s_t = doppler_factors.shape[1]
    s_f = delay_factors.shape[1]
    s = s_t * s_f
    total = 0.0
    log_w = _log_weights(np.asarray(weights, dtype=float))
    for j in range(k):
        r_j = resp[:, j].sum()
        t_j = (resp[:, j] @ stats[j]).reshape(s_t, s_f)
        gt = doppler_factors[j]
        gf = delay_factors[j]
        total += (
            -r_j * s * math.log(math.pi)
            - r_j * s_f * float(np.sum(np.log(gt)))
            - r_j * s_t * float(np.sum(np.log(gf)))
            - float(np.sum(t_j / np.outer(gt, gf)))
            + r_j * log_w[j]
        )
    return total


def kronecker_m_step(
    resp: np.ndarray,
    stats: np.ndarray,
    doppler_size: int,
    delay_size: int,
    coord_iters: int = 3,
    clip_floor: float = GAMMA_FLOOR,
    init_doppler: np.ndarray | None = None,
    init_delay: np.ndarray | None = None,
) -> SbgmModel:
    """Coordinate-search M-step under gamma = gamma_t kron gamma_f.

    Each sweep updates the Doppler factor given the delay factor and then
    vice versa; both half-steps are constrained global maximizers over
    [clip_floor, inf), so the objective of
    :func:`kronecker_q_objective` never decreases. Pass the previous
    factors as init to warm-start inside an EM loop (required for EM-level
    monotonicity); the default all-ones init recovers exactly Kronecker
    statistics in a single sweep.
    """
    resp = np.asarray(resp, dtype=float)
    stats = np.asarray(stats, dtype=float)
    n, k = resp.shape
    if stats.shape[2] != doppler_size * delay_size:
        raise InvalidArgumentError("stats length must equal doppler_size * delay_size")
    totals = resp.sum(axis=0)
    weights = totals / n
    dead = totals < _DEAD_RESPONSIBILITY
    gts = np.empty((k, doppler_size))
    gfs = np.empty((k, delay_size))
    for j in range(k):
        if dead[j]:
            t_j = stats[j, _worst_explained_sample(resp)].reshape(doppler_size, delay_size)
            r_j = 1.0
        else:
            t_j = (resp[:, j] @ stats[j]).reshape(doppler_size, delay_size)
            r_j = totals[j]
        gt = np.ones(doppler_size) if init_doppler is None else np.array(init_doppler[j])
        gf = np.ones(delay_size) if init_delay is None else np.array(init_delay[j])
        for _ in range(coord_iters):
            gt = np.maximum(t_j @ (1.0 / gf) / (delay_size * r_j), clip_floor)
            gf = np.maximum((1.0 / gt) @ t_j / (doppler_size * r_j), clip_floor)
        gts[j] = gt
        gfs[j] = gf
    if np.any(dead):
        weights = np.maximum(weights, np.where(dead, 1.0 / n, 0.0))
        weights /= weights.sum()
    return SbgmModel(
        weights=weights,
        variance_form=KRONECKER,
        doppler_variances=gts,
        delay_variances=gfs,
        clip_floor=clip_floor,
    )


def total_log_likelihood(
    model: SbgmModel, obs: ObservationSet, dictionary: Dictionary
) -> float:
    """Sum over samples of log sum_k rho_k CN(y_i; 0, C_ik)."""
    w = _effective_matrix(obs, dictionary)
    log_marg = np.column_stack(
        [
            _ComponentCache(model.component_variances(k), w).log_marginals(
                obs.samples, obs.noise_vars
            )
            for k in range(model.n_components)
        ]
    )
    return float(np.sum(logsumexp(log_marg + _log_weights(model.weights)[None, :], axis=1)))


def _init_variances(
    obs: ObservationSet,
    w: np.ndarray,
    n_components: int,
    init: str,
    rng: np.random.Generator,
    clip_floor: float,
) -> np.ndarray:
    """Seeded starting variances, shape (K, S).

    ``"spectrum"`` anchors each component on the matched-filter power
    spectrum of one randomly chosen observation, sharpened (4th power,
    rescaled to keep the total energy) so that each component starts on
    the dominant peaks of that sample. Starting narrow is cheap: EM grows
    variances multiplicatively fast where the data demand it, while
    shrinking an overly wide component takes many iterations. The
    ``"random"`` alternative (i.i.d. uniform around the mean observation
    energy) leaves all components statistically identical, which makes
    symmetry breaking very slow for larger K.
    """
    n = len(obs)
    n_coef = w.shape[1]
    scale = float(np.mean(np.abs(obs.samples) ** 2))
    if init == "random":
        return np.maximum(
            rng.uniform(0.5, 1.5, (n_components, n_coef)) * scale, clip_floor
        )
    if init != "spectrum":
        raise InvalidArgumentError(f"unknown init {init!r}")
    col_norm2 = np.sum(np.abs(w) ** 2, axis=0)
    picks = rng.choice(n, size=min(n_components, n), replace=False)
    gammas = np.empty((n_components, n_coef))
    for k in range(n_components):
        y = obs.samples[picks[k % len(picks)]]
        spectrum = np.abs(w.conj().T @ y) ** 2 / col_norm2**2
        total = spectrum.sum()
        if total == 0.0:
            gammas[k] = scale
            continue
        sharp = spectrum**4
        gammas[k] = sharp * (total / sharp.sum())
    return np.maximum(gammas, clip_floor)


def csgmm_fit(
    obs: ObservationSet,
    dictionary: Dictionary,
    n_components: int,
    *,
    variance_form: str = FULL,
    max_iters: int = 500,
    rel_tol: float = 1e-6,
    seed: int = 0,
    clip_floor: float = GAMMA_FLOOR,
    kron_sweeps: int = 3,
    init: str = "spectrum",
) -> tuple[SbgmModel, EmTrace]:
    """Fit the mixture by EM until the relative log-likelihood change
    drops below ``rel_tol`` or ``max_iters`` is reached.

    Initialization is seeded and data-driven by default (see
    :func:`_init_variances`); weights start uniform. ``n_components=1``
    is the sparse Bayesian learning special case. The returned trace
    holds one log-likelihood per E-step and is non-decreasing up to
    round-off.
    """
    if n_components < 1:
        raise InvalidArgumentError("n_components must be >= 1")
    if len(obs) == 0:
        raise InvalidArgumentError("observation set must be nonempty")
    w = _effective_matrix(obs, dictionary)
    n, m = obs.samples.shape
    n_coef = w.shape[1]
    rng = np.random.default_rng(seed)

    kronecker = variance_form == KRONECKER
    init_gammas = _init_variances(obs, w, n_components, init, rng, clip_floor)
    if kronecker:
        if not isinstance(dictionary.grid, DelayDopplerGrid):
            raise InvalidArgumentError("kronecker variances need a delay-Doppler dictionary")
        s_t, s_f = dictionary.grid.doppler_size, dictionary.grid.delay_size
        # nearest Kronecker factors of the init: row/column energy profiles
        gt = np.empty((n_components, s_t))
        gf = np.empty((n_components, s_f))
        for k in range(n_components):
            table = init_gammas[k].reshape(s_t, s_f)
            gt[k] = np.maximum(table.mean(axis=1), clip_floor)
            gf[k] = np.maximum(table.mean(axis=0) / max(table.mean(), clip_floor), clip_floor)
        model = SbgmModel(
            weights=np.full(n_components, 1.0 / n_components),
            variance_form=KRONECKER,
            doppler_variances=gt,
            delay_variances=gf,
            clip_floor=clip_floor,
        )
    elif variance_form == FULL:
        model = SbgmModel(
            weights=np.full(n_components, 1.0 / n_components),
            variance_form=FULL,
            variances=init_gammas,
            clip_floor=clip_floor,
        )
    else:
        raise InvalidArgumentError(f"unknown variance form {variance_form!r}")

    logliks: list[float] = []
    converged = False
    for iteration in range(max_iters):
        try:
            caches = [
                _ComponentCache(model.component_variances(k), w)
                for k in range(n_components)
            ]
            log_marg = np.column_stack(
                [c.log_marginals(obs.samples, obs.noise_vars) for c in caches]
            )
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"EM iteration {iteration} failed: {exc}") from exc
        log_post = log_marg + _log_weights(model.weights)[None, :]
        norm = logsumexp(log_post, axis=1)
        resp = np.exp(log_post - norm[:, None])
        resp /= resp.sum(axis=1, keepdims=True)
        loglik = float(np.sum(norm))
        logliks.append(loglik)
        if len(logliks) >= 2:
            prev = logliks[-2]
            if abs(loglik - prev) <= rel_tol * max(abs(prev), 1e-12):
                converged = True
                break

        totals = resp.sum(axis=0)
        dead = totals < _DEAD_RESPONSIBILITY
        denoms = np.where(dead, 1.0, totals)
        nums = np.empty((n_components, n_coef))
        for k, cache in enumerate(caches):
            stats_k = cache.moment_stats(obs.samples, obs.noise_vars)
            if dead[k]:
                nums[k] = stats_k[_worst_explained_sample(resp)]
            else:
                nums[k] = resp[:, k] @ stats_k
        weights = resp.sum(axis=0) / n
        if np.any(dead):
            weights = np.maximum(weights, np.where(dead, 1.0 / n, 0.0))
            weights /= weights.sum()
        if kronecker:
            new_gt = np.empty_like(model.doppler_variances)
            new_gf = np.empty_like(model.delay_variances)
            for k in range(n_components):
                t_k = nums[k].reshape(s_t, s_f)
                gt_k = model.doppler_variances[k].copy()
                gf_k = model.delay_variances[k].copy()
                for _ in range(kron_sweeps):
                    gt_k = np.maximum(t_k @ (1.0 / gf_k) / (s_f * denoms[k]), clip_floor)
                    gf_k = np.maximum((1.0 / gt_k) @ t_k / (s_t * denoms[k]), clip_floor)
                new_gt[k] = gt_k
                new_gf[k] = gf_k
            model = SbgmModel(
                weights=weights,
                variance_form=KRONECKER,
                doppler_variances=new_gt,
                delay_variances=new_gf,
                clip_floor=clip_floor,
            )
        else:
            model = SbgmModel(
                weights=weights,
                variance_form=FULL,
                variances=np.maximum(nums / denoms[:, None], clip_floor),
                clip_floor=clip_floor,
            )

    trace = EmTrace(
        log_likelihoods=np.array(logliks), converged=converged, n_iterations=len(logliks)
    )
    return model, trace


def msbl_fit(obs: ObservationSet, dictionary: Dictionary, **options) -> tuple[SbgmModel, EmTrace]:
    """Sparse Bayesian learning fit: the single-component mixture."""
    return csgmm_fit(obs, dictionary, 1, **options)


def save_model(model: SbgmModel, directory: str | Path, extra_meta: dict | None = None) -> None:
    """Write ``model.json`` plus raw arrays for weights and variances."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "kind": "sbgm-model",
        "n_components": model.n_components,
        "variance_form": model.variance_form,
        "clip_floor": model.clip_floor,
        "model_id": model.content_id,
    }
    if model.variance_form == FULL:
        meta["n_coefficients"] = int(model.variances.shape[1])
    else:
        meta["doppler_size"] = int(model.doppler_variances.shape[1])
        meta["delay_size"] = int(model.delay_variances.shape[1])
    if extra_meta:
        meta.update(extra_meta)
    write_array(directory / "weights", model.weights, role="mixture-weights")
    if model.variance_form == FULL:
        write_array(directory / "variances", model.variances, role="component-variances")
    else:
        write_array(
            directory / "doppler_variances", model.doppler_variances, role="doppler-variances"
        )
        write_array(directory / "delay_variances", model.delay_variances, role="delay-variances")
    write_json(directory / "model.json", meta)


def load_model(directory: str | Path) -> tuple[SbgmModel, dict]:
    directory = Path(directory)
    meta = read_json(directory / "model.json")
    weights, _ = read_array(directory / "weights")
    if meta["variance_form"] == FULL:
        variances, _ = read_array(directory / "variances")
        model = SbgmModel(
            weights=weights,
            variance_form=FULL,
            variances=variances,
            clip_floor=meta["clip_floor"],
        )
    else:
        doppler, _ = read_array(directory / "doppler_variances")
        delay, _ = read_array(directory / "delay_variances")
        model = SbgmModel(
            weights=weights,
            variance_form=KRONECKER,
            doppler_variances=doppler,
            delay_variances=delay,
            clip_floor=meta["clip_floor"],
        )
    return model, meta
