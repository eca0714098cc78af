"""Parameter grids and steering-vector dictionaries.

Two system families are supported:

* SIMO: a half-wavelength uniform linear array samples the spatial domain;
  dictionary columns are array steering vectors on a uniform angle grid.
* OFDM: time/frequency sampling of a doubly dispersive channel; dictionary
  columns are outer products of Doppler and delay steering vectors on a
  uniform delay-Doppler grid, stored as a Kronecker product.

Grids are stored as integer sizes plus bounds (points are derived on
demand), so value equality of grids never depends on floating-point
round-off. Dictionaries are immutable after construction.

Vectorization convention for OFDM: a channel matrix ``H`` of shape
(n_subcarriers, n_symbols) is flattened column-major (frequency index
fastest), which makes ``h = (D_t kron D_f) s`` with coefficient index
``q * S_f + p`` for Doppler bin q and delay bin p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .container import read_array, read_json, write_array, write_json
from .errors import CapacityError, DomainMismatchError, InvalidArgumentError
from .utils import content_id

MAX_DICTIONARY_COLUMNS = 1 << 16

SIMO = "simo"
OFDM = "ofdm"


@dataclass(frozen=True)
class AngleGrid:
    """Uniform angle grid g*pi/size for g = -size/2 .. size/2 - 1 (radians)."""

    size: int

    def __post_init__(self):
        if self.size < 2 or self.size % 2 != 0:
            raise InvalidArgumentError("angle grid size must be a positive even integer")

    @property
    def points(self) -> np.ndarray:
        g = np.arange(-self.size // 2, self.size // 2)
        return g * (math.pi / self.size)


@dataclass(frozen=True)
class DelayDopplerGrid:
    """Uniform product grid over Doppler shift (Hz) and delay (seconds).

    Doppler points: i * 2*doppler_bound/doppler_size, i = -S_t/2 .. S_t/2-1.
    Delay points: j * delay_bound/delay_size, j = 0 .. S_f-1.
    """

    doppler_size: int
    delay_size: int
    doppler_bound: float
    delay_bound: float

    def __post_init__(self):
        if self.doppler_size < 2 or self.doppler_size % 2 != 0:
            raise InvalidArgumentError("doppler_size must be a positive even integer")
        if self.delay_size < 1:
            raise InvalidArgumentError("delay_size must be >= 1")
        if not (self.doppler_bound > 0 and math.isfinite(self.doppler_bound)):
            raise InvalidArgumentError("doppler_bound must be positive and finite")
        if not (self.delay_bound > 0 and math.isfinite(self.delay_bound)):
            raise InvalidArgumentError("delay_bound must be positive and finite")

    @property
    def doppler_points(self) -> np.ndarray:
        i = np.arange(-self.doppler_size // 2, self.doppler_size // 2)
        return i * (2.0 * self.doppler_bound / self.doppler_size)

    @property
    def delay_points(self) -> np.ndarray:
        j = np.arange(self.delay_size)
        return j * (self.delay_bound / self.delay_size)

    @property
    def size(self) -> int:
        return self.doppler_size * self.delay_size


@dataclass(frozen=True)
class SystemConfig:
    """System configuration: either a SIMO array or an OFDM grid.

    Use :meth:`simo` or :meth:`ofdm` to construct.
    """

    variant: str
    n_antennas: int = 0
    n_subcarriers: int = 0
    n_symbols: int = 0
    subcarrier_spacing: float = 0.0
    symbol_duration: float = 0.0

    @classmethod
    def simo(cls, n_antennas: int) -> "SystemConfig":
        if n_antennas < 1:
            raise InvalidArgumentError("n_antennas must be >= 1")
        return cls(variant=SIMO, n_antennas=int(n_antennas))

    @classmethod
    def ofdm(
        cls,
        n_subcarriers: int,
        n_symbols: int,
        subcarrier_spacing: float,
        symbol_duration: float,
    ) -> "SystemConfig":
        if n_subcarriers < 1 or n_symbols < 1:
            raise InvalidArgumentError("subcarrier and symbol counts must be >= 1")
        if not (subcarrier_spacing > 0 and symbol_duration > 0):
            raise InvalidArgumentError("subcarrier_spacing and symbol_duration must be > 0")
        return cls(
            variant=OFDM,
            n_subcarriers=int(n_subcarriers),
            n_symbols=int(n_symbols),
            subcarrier_spacing=float(subcarrier_spacing),
            symbol_duration=float(symbol_duration),
        )

    @property
    def channel_dim(self) -> int:
        if self.variant == SIMO:
            return self.n_antennas
        return self.n_subcarriers * self.n_symbols

    def to_json(self) -> dict:
        if self.variant == SIMO:
            return {"variant": SIMO, "n_antennas": self.n_antennas}
        return {
            "variant": OFDM,
            "n_subcarriers": self.n_subcarriers,
            "n_symbols": self.n_symbols,
            "subcarrier_spacing": self.subcarrier_spacing,
            "symbol_duration": self.symbol_duration,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SystemConfig":
        if doc["variant"] == SIMO:
            return cls.simo(doc["n_antennas"])
        return cls.ofdm(
            doc["n_subcarriers"],
            doc["n_symbols"],
            doc["subcarrier_spacing"],
            doc["symbol_duration"],
        )


@dataclass(frozen=True)
class Dictionary:
    """Dense steering-vector dictionary over a parameter grid.

    ``matrix`` has shape (channel_dim, grid size); every entry is
    unit-modulus. For OFDM the Doppler and delay factors are kept so the
    Kronecker structure stays available to structured algorithms.
    """

    matrix: np.ndarray
    grid: AngleGrid | DelayDopplerGrid
    config: SystemConfig
    doppler_factor: np.ndarray | None = None
    delay_factor: np.ndarray | None = None

    def __post_init__(self):
        self.matrix.flags.writeable = False
        if self.doppler_factor is not None:
            self.doppler_factor.flags.writeable = False
        if self.delay_factor is not None:
            self.delay_factor.flags.writeable = False

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[1]

    @property
    def content_id(self) -> str:
        return content_id(self.matrix.tobytes())


def steering_vector_ula(theta: float, n_antennas: int) -> np.ndarray:
    """Steering vector of a half-wavelength ULA toward angle ``theta``.

    Entry i (1-based) is exp(-j*pi*(i-1)*sin(theta)); entry 1 is always 1.
    """
    if n_antennas < 1:
        raise InvalidArgumentError("n_antennas must be >= 1")
    if not math.isfinite(theta):
        raise InvalidArgumentError("theta must be finite")
    idx = np.arange(n_antennas)
    return np.exp(-1j * math.pi * idx * math.sin(theta))


def doppler_steering(doppler_hz: float, n_symbols: int, symbol_duration: float) -> np.ndarray:
    """Temporal steering vector: entry i is exp(+j*2*pi*doppler*(i-1)*dT)."""
    idx = np.arange(n_symbols)
    return np.exp(2j * math.pi * doppler_hz * idx * symbol_duration)


def delay_steering(delay_s: float, n_subcarriers: int, subcarrier_spacing: float) -> np.ndarray:
    """Spectral steering vector: entry j is exp(-j*2*pi*delay*(j-1)*df)."""
    idx = np.arange(n_subcarriers)
    return np.exp(-2j * math.pi * delay_s * idx * subcarrier_spacing)


def build_simo_dictionary(grid: AngleGrid, config: SystemConfig) -> Dictionary:
    """Columns are ULA steering vectors at the grid angles; shape (N, size)."""
    if config.variant != SIMO:
        raise DomainMismatchError("build_simo_dictionary requires a SIMO config")
    idx = np.arange(config.n_antennas)[:, None]
    matrix = np.exp(-1j * math.pi * idx * np.sin(grid.points)[None, :])
    return Dictionary(matrix=matrix, grid=grid, config=config)


def build_ofdm_dictionary(
    grid: DelayDopplerGrid,
    config: SystemConfig,
    max_columns: int = MAX_DICTIONARY_COLUMNS,
) -> Dictionary:
    """Kronecker dictionary D_t kron D_f over the delay-Doppler grid.

    D_t has shape (n_symbols, doppler_size), D_f (n_subcarriers,
    delay_size); the full matrix has shape (n_symbols*n_subcarriers,
    doppler_size*delay_size).
    """
    if config.variant != OFDM:
        raise DomainMismatchError("build_ofdm_dictionary requires an OFDM config")
    if grid.size > max_columns:
        raise CapacityError(
            f"grid has {grid.size} columns, exceeding the limit of {max_columns}"
        )
    sym = np.arange(config.n_symbols)[:, None]
    sub = np.arange(config.n_subcarriers)[:, None]
    d_t = np.exp(2j * math.pi * sym * (grid.doppler_points * config.symbol_duration)[None, :])
    d_f = np.exp(-2j * math.pi * sub * (grid.delay_points * config.subcarrier_spacing)[None, :])
    matrix = np.kron(d_t, d_f)
    return Dictionary(
        matrix=matrix,
        grid=grid,
        config=config,
        doppler_factor=d_t,
        delay_factor=d_f,
    )


def swap_system_config(dictionary: Dictionary, new_config: SystemConfig) -> Dictionary:
    """Re-evaluate the dictionary for a new system configuration.

    The parameter grid is unchanged; only the sampling of the steering
    vectors (antenna count, or OFDM timing/grid dimensions) changes.
    """
    if isinstance(dictionary.grid, AngleGrid):
        if new_config.variant != SIMO:
            raise DomainMismatchError("angular dictionary cannot take an OFDM config")
        return build_simo_dictionary(dictionary.grid, new_config)
    if new_config.variant != OFDM:
        raise DomainMismatchError("delay-Doppler dictionary cannot take a SIMO config")
    return build_ofdm_dictionary(dictionary.grid, new_config)


def vectorize_channel(channel_matrix: np.ndarray) -> np.ndarray:
    """Flatten an OFDM channel matrix (n_subcarriers, n_symbols) to a vector.

    Column-major: the frequency index varies fastest, matching the
    Kronecker column convention of :func:`build_ofdm_dictionary`.
    """
    return np.asarray(channel_matrix).flatten(order="F")


def unvectorize_channel(h: np.ndarray, config: SystemConfig) -> np.ndarray:
    """Inverse of :func:`vectorize_channel`."""
    if config.variant != OFDM:
        raise DomainMismatchError("unvectorize_channel requires an OFDM config")
    return np.asarray(h).reshape((config.n_subcarriers, config.n_symbols), order="F")


def grid_to_json(grid: AngleGrid | DelayDopplerGrid) -> dict:
    if isinstance(grid, AngleGrid):
        return {"kind": "angle", "size": grid.size}
    return {
        "kind": "delay_doppler",
        "doppler_size": grid.doppler_size,
        "delay_size": grid.delay_size,
        "doppler_bound": grid.doppler_bound,
        "delay_bound": grid.delay_bound,
    }


def grid_from_json(doc: dict) -> AngleGrid | DelayDopplerGrid:
    if doc["kind"] == "angle":
        return AngleGrid(size=doc["size"])
    return DelayDopplerGrid(
        doppler_size=doc["doppler_size"],
        delay_size=doc["delay_size"],
        doppler_bound=doc["doppler_bound"],
        delay_bound=doc["delay_bound"],
    )


def save_dictionary(dictionary: Dictionary, stem: str | Path) -> None:
    """Write ``<stem>.json`` metadata plus the matrix as a raw array pair."""
    stem = Path(stem)
    meta = {
        "kind": "dictionary",
        "grid": grid_to_json(dictionary.grid),
        "system": dictionary.config.to_json(),
        "matrix": stem.name + "_matrix",
    }
    write_array(stem.parent / (stem.name + "_matrix"), dictionary.matrix, role="dictionary-matrix")
    write_json(stem.with_suffix(".json"), meta)


def load_dictionary(stem: str | Path) -> Dictionary:
    stem = Path(stem)
    meta = read_json(stem.with_suffix(".json"))
    grid = grid_from_json(meta["grid"])
    config = SystemConfig.from_json(meta["system"])
    rebuilt = (
        build_simo_dictionary(grid, config)
        if config.variant == SIMO
        else build_ofdm_dictionary(grid, config)
    )
    stored, _ = read_array(stem.parent / meta["matrix"])
    if stored.shape != rebuilt.matrix.shape or not np.array_equal(stored, rebuilt.matrix):
        raise InvalidArgumentError(
            "stored dictionary matrix does not match its grid/system metadata"
        )
    return rebuilt
