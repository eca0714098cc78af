"""Synthetic propagation scenarios and the compressed observation model.

Two generators are provided. The SIMO generator draws a path angle from a
street-canyon style mixture profile and then a channel from a zero-mean
complex Gaussian whose covariance integrates a narrow Laplacian angle
density against the array steering vectors. The OFDM generator draws a
random number of discrete paths with uniform delays/Dopplers and
exponentially decaying gain power, and evaluates the resulting channel
matrix on the time-frequency sampling grid.

Observations follow y = A h + n with a fixed 0/1 selection matrix A (or
identity) and per-sample noise variance derived from a per-sample SNR
drawn uniformly in dB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dictionary import SystemConfig
from .errors import DegenerateInputError, InvalidArgumentError, NumericError
from .utils import complex_standard_normal, hermitianize


@dataclass(frozen=True)
class AngleComponent:
    """One angular region: a Gaussian with std = half_width/3, truncated to
    [center - half_width, center + half_width]. half_width = 0 degenerates
    to a point mass at the center."""

    center: float
    half_width: float
    weight: float


@dataclass(frozen=True)
class AngleProfile:
    """Mixture of truncated angular components; weights sum to one."""

    components: tuple[AngleComponent, ...]

    def __post_init__(self):
        if not self.components:
            raise InvalidArgumentError("profile needs at least one component")
        weights = np.array([c.weight for c in self.components])
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("component weights must be nonnegative and sum to 1")
        for c in self.components:
            if c.half_width < 0:
                raise InvalidArgumentError("half_width must be nonnegative")
            if c.center - c.half_width < -math.pi / 2 or c.center + c.half_width >= math.pi / 2:
                raise InvalidArgumentError("component support must lie within [-pi/2, pi/2)")

    @classmethod
    def street_canyons(cls) -> "AngleProfile":
        """Default four-region profile (centers +-60 and +-20 degrees,
        per-region std 5 degrees, truncated at 3 std)."""
        centers_deg = (-60.0, -20.0, 20.0, 60.0)
        std = math.radians(5.0)
        return cls(
            components=tuple(
                AngleComponent(center=math.radians(c), half_width=3.0 * std, weight=0.25)
                for c in centers_deg
            )
        )

    def support_mask(self, angles: np.ndarray) -> np.ndarray:
        """Boolean mask of which angles fall inside any component support."""
        angles = np.asarray(angles)
        mask = np.zeros(angles.shape, dtype=bool)
        for c in self.components:
            mask |= np.abs(angles - c.center) <= c.half_width + 1e-12
        return mask


def sample_angle(profile: AngleProfile, rng: np.random.Generator, size: int | None = None):
    """Draw path angles from the mixture profile.

    Per-component sampling is a truncated Gaussian realized by rejection;
    the acceptance rate at the 3-std truncation exceeds 99.7%.
    """
    n = 1 if size is None else int(size)
    weights = np.array([c.weight for c in profile.components])
    labels = rng.choice(len(profile.components), size=n, p=weights)
    out = np.empty(n)
    for i, lab in enumerate(labels):
        comp = profile.components[lab]
        if comp.half_width == 0.0:
            out[i] = comp.center
            continue
        std = comp.half_width / 3.0
        while True:
            draw = comp.center + std * rng.standard_normal()
            if abs(draw - comp.center) <= comp.half_width:
                out[i] = draw
                break
    return out[0] if size is None else out


@lru_cache(maxsize=8)
def _reference_gauss_legendre(count: int) -> tuple[np.ndarray, np.ndarray]:
    # leggauss solves an eigenproblem of size `count`; cache the reference
    # nodes since they are reused for every sample drawn
    x, w = np.polynomial.legendre.leggauss(count)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _gauss_legendre_nodes(lo: float, hi: float, count: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _reference_gauss_legendre(count)
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return mid + half * x, half * w


def laplacian_local_covariance(
    center: float,
    std_dev: float,
    n_antennas: int,
    quadrature_points: int = 2048,
) -> np.ndarray:
    """Channel covariance for a Laplacian angle density around ``center``.

    Integrates g(theta) a(theta) a(theta)^H over [center - 10 std,
    center + 10 std] clipped to [-pi, pi]. The window is split at the
    density's kink and each half uses Gauss-Legendre quadrature, so the
    result is converged to near machine precision at the default node
    count (a composite trapezoid rule stalls around 1e-5 because of the
    kink). The truncated tail mass is exp(-10 sqrt(2)), below 1e-6.
    """
    if std_dev <= 0:
        raise InvalidArgumentError("std_dev must be positive")
    if quadrature_points < 64:
        raise InvalidArgumentError("quadrature_points must be >= 64")
    lo = max(center - 10.0 * std_dev, -math.pi)
    hi = min(center + 10.0 * std_dev, math.pi)
    t_lo, w_lo = _gauss_legendre_nodes(lo, center, quadrature_points // 2)
    t_hi, w_hi = _gauss_legendre_nodes(center, hi, quadrature_points - quadrature_points // 2)
    theta = np.concatenate([t_lo, t_hi])
    w = np.concatenate([w_lo, w_hi])
    scale = std_dev / math.sqrt(2.0)
    density = np.exp(-np.abs(theta - center) / scale) / (2.0 * scale)
    idx = np.arange(n_antennas)[:, None]
    steer = np.exp(-1j * math.pi * idx * np.sin(theta)[None, :])
    cov = (steer * (w * density)[None, :]) @ steer.conj().T
    return hermitianize(cov)


def draw_simo_channel(cov: np.ndarray, rng: np.random.Generator, size: int | None = None):
    """Draw circularly symmetric complex Gaussian vectors with covariance ``cov``.

    Uses a Cholesky factor; on a singular (PSD but not PD) covariance a
    single jitter of 1e-12 * trace/N is added before retrying.
    """
    cov = np.asarray(cov)
    n = cov.shape[0]
    count = 1 if size is None else int(size)
    if not np.any(cov):
        draws = np.zeros((count, n), dtype=complex)
        return draws[0] if size is None else draws
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * (np.trace(cov).real / n)
        try:
            factor = np.linalg.cholesky(cov + jitter * np.eye(n))
        except np.linalg.LinAlgError as exc:
            raise NumericError("covariance is not positive semidefinite") from exc
    z = complex_standard_normal(rng, (count, n))
    draws = z @ factor.T  # rows are factor @ z_i
    return draws[0] if size is None else draws


@dataclass(frozen=True)
class OfdmScenario:
    """Parametric multipath scenario for the OFDM system.

    Per realization: the path count is uniform on {1..max_paths}, delays
    and Dopplers are uniform on their ranges, and each path gain has
    squared magnitude exp(-delay * gain_decay_rate) with a phase uniform
    on [0, 2pi).
    """

    config: SystemConfig
    max_paths: int = 8
    delay_range: tuple[float, float] = (0.0, 3e-6)
    doppler_range: tuple[float, float] = (-200.0, 200.0)
    gain_decay_rate: float = 1e6
    # grid bounds the learned representation will use; ranges must fit inside
    doppler_bound: float = 250.0
    delay_bound: float = 6e-6

    def __post_init__(self):
        if self.config.variant != "ofdm":
            raise InvalidArgumentError("OfdmScenario requires an OFDM system config")
        if self.max_paths < 1:
            raise InvalidArgumentError("max_paths must be >= 1")
        lo_d, hi_d = self.delay_range
        if not (0.0 <= lo_d <= hi_d < self.delay_bound):
            raise InvalidArgumentError("delay_range must lie within [0, delay_bound)")
        lo_v, hi_v = self.doppler_range
        if not (-self.doppler_bound <= lo_v <= hi_v <= self.doppler_bound):
            raise InvalidArgumentError("doppler_range must lie within the Doppler bound")


def evaluate_ofdm_channel(
    config: SystemConfig,
    gains: np.ndarray,
    dopplers: np.ndarray,
    delays: np.ndarray,
) -> np.ndarray:
    """Channel matrix (n_subcarriers, n_symbols) as a sum of path terms.

    Entry (j, i) accumulates gain * exp(+j2pi doppler i dT) *
    exp(-j2pi delay j df) over paths, with 0-based sample indices.
    """
    sub = np.arange(config.n_subcarriers)[:, None]
    sym = np.arange(config.n_symbols)[:, None]
    freq = np.exp(-2j * math.pi * sub * (np.asarray(delays) * config.subcarrier_spacing)[None, :])
    time = np.exp(2j * math.pi * sym * (np.asarray(dopplers) * config.symbol_duration)[None, :])
    return (freq * np.asarray(gains)[None, :]) @ time.T


def draw_ofdm_channel(scenario: OfdmScenario, rng: np.random.Generator) -> np.ndarray:
    """One multipath OFDM channel matrix (n_subcarriers, n_symbols)."""
    n_paths = int(rng.integers(1, scenario.max_paths + 1))
    delays = rng.uniform(*scenario.delay_range, size=n_paths)
    dopplers = rng.uniform(*scenario.doppler_range, size=n_paths)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=n_paths)
    amplitudes = np.exp(-0.5 * delays * scenario.gain_decay_rate)
    gains = amplitudes * np.exp(1j * phases)
    return evaluate_ofdm_channel(scenario.config, gains, dopplers, delays)


def simo_ground_truth(
    profile: AngleProfile,
    std_dev: float,
    grid,
    n_antennas: int,
    n_samples: int,
    rng: np.random.Generator,
    quadrature_points: int = 1024,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw channels together with their true on-grid coefficient vectors.

    Each channel is synthesized as an explicit superposition of steering
    vectors at the quadrature nodes of its local angle density (the factor
    form of the covariance used by :func:`draw_simo_channel`), so the true
    path gains are known. Binning those gains to the nearest grid angle
    gives the exact ground-truth coefficient vector, which a dictionary
    inversion could only approximate: with as many antennas as gridpoints
    the square system is numerically singular (the uniform angle grid
    undersamples spatial frequency near broadside), so direct inversion is
    not an option in double precision.

    Returns (channels, coefficients) with shapes (n, n_antennas) and
    (n, grid.size).
    """
    angles = sample_angle(profile, rng, size=n_samples)
    channels = np.empty((n_samples, n_antennas), dtype=complex)
    coefficients = np.zeros((n_samples, grid.size), dtype=complex)
    grid_points = grid.points
    spacing = math.pi / grid.size
    half = quadrature_points // 2
    idx = np.arange(n_antennas)[:, None]
    scale = std_dev / math.sqrt(2.0)
    for i, center in enumerate(angles):
        lo = max(center - 10.0 * std_dev, -math.pi)
        hi = min(center + 10.0 * std_dev, math.pi)
        t_lo, w_lo = _gauss_legendre_nodes(lo, center, half)
        t_hi, w_hi = _gauss_legendre_nodes(center, hi, quadrature_points - half)
        theta = np.concatenate([t_lo, t_hi])
        w = np.concatenate([w_lo, w_hi])
        density = np.exp(-np.abs(theta - center) / scale) / (2.0 * scale)
        gains = np.sqrt(w * density) * complex_standard_normal(rng, quadrature_points)
        steer = np.exp(-1j * math.pi * idx * np.sin(theta)[None, :])
        channels[i] = steer @ gains
        nearest = np.clip(
            np.round((theta - grid_points[0]) / spacing).astype(int), 0, grid.size - 1
        )
        np.add.at(coefficients[i], nearest, gains)
    return channels, coefficients


def random_selection_matrix(m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """0/1 matrix whose rows are m distinct unit vectors drawn uniformly."""
    if not (1 <= m <= n):
        raise InvalidArgumentError("need 1 <= m <= n")
    picks = rng.choice(n, size=m, replace=False)
    matrix = np.zeros((m, n))
    matrix[np.arange(m), picks] = 1.0
    return matrix


def _validate_selection(measurement: np.ndarray) -> None:
    measurement = np.asarray(measurement)
    if measurement.ndim != 2:
        raise InvalidArgumentError("measurement matrix must be 2-D")
    ones = measurement == 1.0
    if not np.array_equal(measurement != 0.0, ones):
        raise InvalidArgumentError("measurement entries must be 0 or 1")
    if not np.all(ones.sum(axis=1) == 1):
        raise InvalidArgumentError("each measurement row must be a unit vector")
    cols = ones.argmax(axis=1)
    if len(np.unique(cols)) != len(cols):
        raise InvalidArgumentError("measurement rows must select distinct entries")


@dataclass
class ObservationSet:
    """Noisy compressed samples with their shared selection matrix.

    samples: (n, M) complex observations, one per row.
    noise_vars: (n,) per-sample noise variance (per complex entry).
    measurement: (M, N) 0/1 selection matrix (identity included).
    snr_db: (n,) the drawn per-sample SNR values.
    """

    samples: np.ndarray
    noise_vars: np.ndarray
    measurement: np.ndarray
    snr_db: np.ndarray | None = None
    dictionary: object | None = field(default=None, repr=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        self.noise_vars = np.asarray(self.noise_vars, dtype=float)
        self.measurement = np.asarray(self.measurement, dtype=float)
        if self.samples.ndim != 2:
            raise InvalidArgumentError("samples must be a 2-D array (n, M)")
        if len(self.samples) != len(self.noise_vars):
            raise InvalidArgumentError("samples and noise_vars must have equal length")
        if np.any(self.noise_vars <= 0):
            raise InvalidArgumentError("noise variances must be positive")
        if self.samples.shape[1] != self.measurement.shape[0]:
            raise InvalidArgumentError("sample length must match measurement row count")
        _validate_selection(self.measurement)

    def __len__(self) -> int:
        return len(self.samples)


def make_observations(
    channels: np.ndarray,
    measurement: np.ndarray,
    snr_range_db: tuple[float, float],
    rng: np.random.Generator,
    *,
    signal_energy: float | None = None,
) -> ObservationSet:
    """Compress channels through ``measurement`` and add per-sample noise.

    The per-sample noise variance is
    signal_energy / (M * 10^(SNR_i/10)) with SNR_i uniform on the given
    dB range and signal_energy defaulting to the dataset mean of
    ||A h||^2.
    """
    channels = np.asarray(channels, dtype=complex)
    if channels.ndim != 2 or len(channels) == 0:
        raise InvalidArgumentError("channels must be a nonempty (n, N) array")
    lo, hi = snr_range_db
    if lo > hi:
        raise InvalidArgumentError("snr_range_db must satisfy lo <= hi")
    measurement = np.asarray(measurement, dtype=float)
    compressed = channels @ measurement.T
    if signal_energy is None:
        signal_energy = float(np.mean(np.sum(np.abs(compressed) ** 2, axis=1)))
    if signal_energy <= 0:
        raise DegenerateInputError("channel set carries no energy under the measurement")
    m = measurement.shape[0]
    snr_db = rng.uniform(lo, hi, size=len(channels))
    noise_vars = signal_energy / (m * 10.0 ** (0.1 * snr_db))
    noise = complex_standard_normal(rng, (len(channels), m)) * np.sqrt(noise_vars)[:, None]
    return ObservationSet(
        samples=compressed + noise,
        noise_vars=noise_vars,
        measurement=measurement,
        snr_db=snr_db,
    )


def normalize_dataset(channels: np.ndarray) -> tuple[np.ndarray, float]:
    """Scale channels so the mean squared norm equals the channel dimension.

    Returns the scaled channels and the applied scale factor.
    """
    channels = np.asarray(channels, dtype=complex)
    if channels.ndim != 2 or len(channels) == 0:
        raise InvalidArgumentError("channels must be a nonempty (n, N) array")
    mean_energy = float(np.mean(np.sum(np.abs(channels) ** 2, axis=1)))
    if mean_energy == 0.0:
        raise DegenerateInputError("cannot normalize an all-zero dataset")
    scale = math.sqrt(channels.shape[1] / mean_energy)
    return channels * scale, scale
