"""Sampling coefficient vectors from a fitted model and rendering channels.

Each generated coefficient vector is a draw from the mixture: pick a
component, then draw a zero-mean complex Gaussian with that component's
diagonal covariance. A nonzero entry stands for one propagation path; the
entry index names the grid point (angle, or delay-Doppler tuple) and the
complex value is the path gain. Channels are obtained by multiplying with
any dictionary over the same grid, so the system configuration can differ
from the one used for training.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .container import read_array, read_json, write_array, write_json
from .dictionary import Dictionary
from .em import SbgmModel
from .errors import DomainMismatchError, InvalidArgumentError
from .utils import complex_standard_normal


@dataclass(frozen=True)
class GeneratedBatch:
    """Generated coefficient vectors with component labels and provenance.

    ``channels`` is present if and only if a dictionary has been applied.
    """

    sparse: np.ndarray
    labels: np.ndarray
    channels: np.ndarray | None = None
    provenance: dict | None = None

    def __post_init__(self):
        if self.sparse.ndim != 2:
            raise InvalidArgumentError("sparse must be a 2-D (n, S) array")
        if len(self.sparse) != len(self.labels):
            raise InvalidArgumentError("one label per generated vector required")
        if self.channels is not None and len(self.channels) != len(self.sparse):
            raise InvalidArgumentError("one channel per generated vector required")

    def __len__(self) -> int:
        return len(self.sparse)

    @property
    def n_coefficients(self) -> int:
        return self.sparse.shape[1]


def sample_parameters(
    model: SbgmModel, n: int, rng: np.random.Generator | int
) -> GeneratedBatch:
    """Draw ``n`` coefficient vectors from the fitted mixture.

    Component labels follow the mixture weights; conditioned on the label
    the entries are independent circularly symmetric complex Gaussians
    with the component's variances.
    """
    if n < 0:
        raise InvalidArgumentError("n must be nonnegative")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng)
    s = model.n_coefficients
    labels = rng.choice(model.n_components, size=n, p=model.weights)
    draws = complex_standard_normal(rng, (n, s))
    variances = model.expanded_variances()
    sparse = draws * np.sqrt(variances[labels]) if n else np.zeros((0, s), dtype=complex)
    provenance = {
        "model_id": model.content_id,
        "seed": None if seed is None else int(seed),
        "p_max": None,
    }
    return GeneratedBatch(sparse=sparse, labels=labels, provenance=provenance)


def render_channels(batch: GeneratedBatch, dictionary: Dictionary) -> GeneratedBatch:
    """Return a copy of the batch with channels D s attached.

    Any dictionary over the training grid is accepted; only the column
    count has to match the coefficient dimension.
    """
    if dictionary.n_columns != batch.n_coefficients:
        raise DomainMismatchError(
            f"dictionary has {dictionary.n_columns} columns but the batch has "
            f"{batch.n_coefficients} coefficients"
        )
    channels = batch.sparse @ dictionary.matrix.T
    provenance = dict(batch.provenance or {})
    provenance["dictionary_id"] = dictionary.content_id
    return replace(batch, channels=channels, provenance=provenance)


def limit_paths(s: np.ndarray, p_max: int) -> np.ndarray:
    """Keep the ``p_max`` entries that are largest in squared magnitude.

    All other entries are zeroed; ties are broken toward the lowest
    index. Works on a single vector or on the last axis of a batch.
    """
    if p_max < 1:
        raise InvalidArgumentError("p_max must be >= 1")
    s = np.asarray(s)
    if p_max >= s.shape[-1]:
        return s.copy()
    power = np.abs(s) ** 2
    # stable sort on -power keeps the lowest index first among ties
    order = np.argsort(-power, axis=-1, kind="stable")
    keep = order[..., :p_max]
    mask = np.zeros(s.shape, dtype=bool)
    np.put_along_axis(mask, keep, True, axis=-1)
    return np.where(mask, s, 0.0)


def limit_batch_paths(batch: GeneratedBatch, p_max: int) -> GeneratedBatch:
    """Apply :func:`limit_paths` to every vector of a batch."""
    provenance = dict(batch.provenance or {})
    provenance["p_max"] = int(p_max)
    return GeneratedBatch(
        sparse=limit_paths(batch.sparse, p_max),
        labels=batch.labels,
        channels=None,
        provenance=provenance,
    )


def conditional_covariance(model: SbgmModel, k: int, dictionary: Dictionary) -> np.ndarray:
    """Channel covariance D diag(gamma_k) D^H of component ``k``."""
    if not 0 <= k < model.n_components:
        raise InvalidArgumentError("component index out of range")
    gamma = model.component_variances(k)
    if dictionary.n_columns != len(gamma):
        raise DomainMismatchError("dictionary and model dimensions do not match")
    d = dictionary.matrix
    return (d * gamma[None, :]) @ d.conj().T


def save_batch(batch: GeneratedBatch, directory: str | Path, extra_meta: dict | None = None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "kind": "generated-batch",
        "n_samples": len(batch),
        "n_coefficients": batch.n_coefficients,
        "has_channels": batch.channels is not None,
        "provenance": batch.provenance or {},
    }
    if extra_meta:
        meta.update(extra_meta)
    write_array(directory / "sparse", batch.sparse, role="generated-coefficients")
    write_array(directory / "labels", batch.labels.astype(float), role="component-labels")
    if batch.channels is not None:
        write_array(directory / "channels", batch.channels, role="generated-channels")
    write_json(directory / "batch.json", meta)


def load_batch(directory: str | Path) -> tuple[GeneratedBatch, dict]:
    directory = Path(directory)
    meta = read_json(directory / "batch.json")
    sparse, _ = read_array(directory / "sparse")
    labels, _ = read_array(directory / "labels")
    channels = None
    if meta.get("has_channels"):
        channels, _ = read_array(directory / "channels")
    batch = GeneratedBatch(
        sparse=sparse,
        labels=labels.astype(int),
        channels=channels,
        provenance=meta.get("provenance"),
    )
    return batch, meta
