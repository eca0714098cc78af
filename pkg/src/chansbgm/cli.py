"""Command-line pipeline: synth, fit, generate, metrics, selfcheck.

Every command takes a seed and writes deterministic artifacts; re-running
with the same inputs reproduces every output file byte for byte. Numeric
imports happen after thread configuration so that --threads (or the
CHANSBGM_THREADS environment variable) can cap the linear-algebra thread
pools before they start.

Exit codes: 0 success, 1 unexpected failure, 2 invalid configuration or
input, 3 diagnostic failure (non-monotone fit trace).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BAD_CONFIG = 2
EXIT_DIAGNOSTIC = 3

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)

SYSTEM_SCHEMA = {
    "type": "object",
    "oneOf": [
        {
            "properties": {
                "variant": {"const": "simo"},
                "n_antennas": {"type": "integer", "minimum": 1},
            },
            "required": ["variant", "n_antennas"],
            "additionalProperties": False,
        },
        {
            "properties": {
                "variant": {"const": "ofdm"},
                "n_subcarriers": {"type": "integer", "minimum": 1},
                "n_symbols": {"type": "integer", "minimum": 1},
                "subcarrier_spacing": {"type": "number", "exclusiveMinimum": 0},
                "symbol_duration": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": [
                "variant",
                "n_subcarriers",
                "n_symbols",
                "subcarrier_spacing",
                "symbol_duration",
            ],
            "additionalProperties": False,
        },
    ],
}

_SNR_RANGE = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}

SYNTH_SCHEMA = {
    "type": "object",
    "properties": {
        "scenario": {"enum": ["simo", "ofdm"]},
        "n_train": {"type": "integer", "minimum": 1},
        "snr_range_db": _SNR_RANGE,
        "system": SYSTEM_SCHEMA,
        "grid_size": {"type": "integer", "minimum": 2},
        "angle_profile": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "center_deg": {"type": "number"},
                    "half_width_deg": {"type": "number", "minimum": 0},
                    "weight": {"type": "number", "minimum": 0},
                },
                "required": ["center_deg", "half_width_deg", "weight"],
                "additionalProperties": False,
            },
        },
        "laplacian_std_deg": {"type": "number", "exclusiveMinimum": 0},
        "quadrature_points": {"type": "integer", "minimum": 64},
        "doppler_size": {"type": "integer", "minimum": 2},
        "delay_size": {"type": "integer", "minimum": 1},
        "doppler_bound_hz": {"type": "number", "exclusiveMinimum": 0},
        "delay_bound_s": {"type": "number", "exclusiveMinimum": 0},
        "n_pilots": {"type": "integer", "minimum": 1},
        "paths": {
            "type": "object",
            "properties": {
                "max_paths": {"type": "integer", "minimum": 1},
                "delay_range_s": _SNR_RANGE,
                "doppler_range_hz": _SNR_RANGE,
                "gain_decay_rate": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "normalize": {"type": "boolean"},
    },
    "required": ["scenario", "n_train", "snr_range_db", "system"],
    "additionalProperties": False,
}

EM_OPTIONS_SCHEMA = {
    "type": "object",
    "properties": {
        "max_iters": {"type": "integer", "minimum": 1},
        "rel_tol": {"type": "number", "exclusiveMinimum": 0},
        "clip_floor": {"type": "number", "exclusiveMinimum": 0},
        "kron_sweeps": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}


class ConfigError(Exception):
    pass


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def default_simo_synth_config() -> dict:
    """Street-canyon SIMO dataset at the reference scale."""
    return {
        "scenario": "simo",
        "n_train": 10_000,
        "snr_range_db": [0.0, 20.0],
        "system": {"variant": "simo", "n_antennas": 16},
        "grid_size": 256,
        "laplacian_std_deg": 2.0,
    }


def default_ofdm_synth_config() -> dict:
    """Pilot-masked OFDM dataset at the reference scale."""
    return {
        "scenario": "ofdm",
        "n_train": 10_000,
        "snr_range_db": [5.0, 20.0],
        "system": {
            "variant": "ofdm",
            "n_subcarriers": 24,
            "n_symbols": 14,
            "subcarrier_spacing": 15e3,
            "symbol_duration": 1e-3 / 14,
        },
        "doppler_size": 40,
        "delay_size": 40,
        "doppler_bound_hz": 250.0,
        "delay_bound_s": 6e-6,
        "n_pilots": 30,
        "normalize": True,
    }


def _configure_threads(threads: int | None) -> None:
    if threads is None:
        env = os.environ.get("CHANSBGM_THREADS")
        threads = int(env) if env else None
    if threads is None:
        return
    if "numpy" in sys.modules:
        return  # pools already started; the cap only works at first import
    for var in _THREAD_VARS:
        os.environ[var] = str(int(threads))


def _load_config(path: str | None, schema: dict, default: dict | None = None) -> dict:
    import jsonschema

    if path is None:
        if default is None:
            raise ConfigError("--config is required for this command")
        document = default
    else:
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(document, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config failed schema validation: {exc.message}") from exc
    return document


def _profile_from_config(entries: list[dict] | None):
    from .scenario import AngleComponent, AngleProfile

    if entries is None:
        return AngleProfile.street_canyons()
    return AngleProfile(
        components=tuple(
            AngleComponent(
                center=math.radians(e["center_deg"]),
                half_width=math.radians(e["half_width_deg"]),
                weight=e["weight"],
            )
            for e in entries
        )
    )


def cmd_synth(config_path: str | None, seed: int, out: str) -> int:
    import numpy as np

    from .container import write_array, write_json
    from .dictionary import (
        AngleGrid,
        DelayDopplerGrid,
        SystemConfig,
        build_ofdm_dictionary,
        build_simo_dictionary,
        grid_to_json,
        save_dictionary,
        vectorize_channel,
    )
    from .scenario import (
        OfdmScenario,
        draw_ofdm_channel,
        draw_simo_channel,
        laplacian_local_covariance,
        make_observations,
        normalize_dataset,
        random_selection_matrix,
        sample_angle,
    )

    config = _load_config(config_path, SYNTH_SCHEMA)
    if config["system"]["variant"] != config["scenario"]:
        raise ConfigError("system variant must match the scenario")
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    system = SystemConfig.from_json(config["system"])
    n_train = config["n_train"]
    snr_range = tuple(config["snr_range_db"])
    scale = 1.0

    if config["scenario"] == "simo":
        if "grid_size" not in config:
            raise ConfigError("simo scenario requires grid_size")
        grid = AngleGrid(config["grid_size"])
        dictionary = build_simo_dictionary(grid, system)
        profile = _profile_from_config(config.get("angle_profile"))
        std = math.radians(config.get("laplacian_std_deg", 2.0))
        quad = config.get("quadrature_points", 2048)
        angles = sample_angle(profile, rng, size=n_train)
        channels = np.empty((n_train, system.n_antennas), dtype=complex)
        for i, angle in enumerate(angles):
            cov = laplacian_local_covariance(angle, std, system.n_antennas, quad)
            channels[i] = draw_simo_channel(cov, rng)
        if config.get("normalize", False):
            channels, scale = normalize_dataset(channels)
        measurement = np.eye(system.n_antennas)
    else:
        for key in ("doppler_size", "delay_size", "doppler_bound_hz", "delay_bound_s", "n_pilots"):
            if key not in config:
                raise ConfigError(f"ofdm scenario requires {key}")
        grid = DelayDopplerGrid(
            doppler_size=config["doppler_size"],
            delay_size=config["delay_size"],
            doppler_bound=config["doppler_bound_hz"],
            delay_bound=config["delay_bound_s"],
        )
        dictionary = build_ofdm_dictionary(grid, system)
        paths = config.get("paths", {})
        scenario = OfdmScenario(
            config=system,
            max_paths=paths.get("max_paths", 8),
            delay_range=tuple(paths.get("delay_range_s", (0.0, 0.5 * grid.delay_bound))),
            doppler_range=tuple(
                paths.get("doppler_range_hz", (-0.8 * grid.doppler_bound, 0.8 * grid.doppler_bound))
            ),
            gain_decay_rate=paths.get("gain_decay_rate", 1e6),
            doppler_bound=grid.doppler_bound,
            delay_bound=grid.delay_bound,
        )
        channels = np.stack(
            [vectorize_channel(draw_ofdm_channel(scenario, rng)) for _ in range(n_train)]
        )
        if config.get("normalize", True):
            channels, scale = normalize_dataset(channels)
        measurement = random_selection_matrix(config["n_pilots"], system.channel_dim, rng)

    obs = make_observations(channels, measurement, snr_range, rng)
    save_dictionary(dictionary, out_dir / "dictionary")
    write_array(out_dir / "channels", channels, role="ground-truth-channels")
    write_array(out_dir / "observations", obs.samples, role="observations")
    write_array(out_dir / "noise_vars", obs.noise_vars, role="noise-variances")
    write_array(out_dir / "snr_db", obs.snr_db, role="per-sample-snr-db")
    write_array(out_dir / "selection", measurement, role="selection-matrix")
    write_json(
        out_dir / "scenario.json",
        {
            "kind": "dataset",
            "config": config,
            "seed": int(seed),
            "normalization_scale": scale,
            "grid": grid_to_json(grid),
            "system": system.to_json(),
            "dictionary_id": dictionary.content_id,
            "n_train": n_train,
        },
    )
    print(f"synth: wrote {n_train} samples to {out_dir}")
    return EXIT_OK


def load_dataset(directory: str | Path):
    """Read a dataset directory back into an observation set + dictionary."""
    from .container import read_array, read_json
    from .dictionary import load_dictionary
    from .scenario import ObservationSet

    directory = Path(directory)
    meta = read_json(directory / "scenario.json")
    samples, _ = read_array(directory / "observations")
    noise_vars, _ = read_array(directory / "noise_vars")
    selection, _ = read_array(directory / "selection")
    snr_db, _ = read_array(directory / "snr_db")
    dictionary = load_dictionary(directory / "dictionary")
    obs = ObservationSet(
        samples=samples,
        noise_vars=noise_vars,
        measurement=selection,
        snr_db=snr_db,
        dictionary=dictionary,
    )
    return obs, dictionary, meta


def cmd_fit(
    dataset: str,
    out: str,
    model_kind: str,
    n_components: int | None,
    variance_form: str,
    seed: int,
    config_path: str | None,
) -> int:
    from .container import write_json
    from .em import csgmm_fit, save_model

    options = _load_config(config_path, EM_OPTIONS_SCHEMA, default={})
    if model_kind == "msbl":
        if n_components not in (None, 1):
            raise ConfigError("msbl is the single-component model; omit --K or use --K 1")
        n_components = 1
    elif n_components is None:
        raise ConfigError("csgmm requires --K")

    obs, dictionary, meta = load_dataset(dataset)
    model, trace = csgmm_fit(
        obs,
        dictionary,
        n_components,
        variance_form=variance_form,
        seed=seed,
        **options,
    )
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_model(
        model,
        out_dir,
        extra_meta={
            "seed": int(seed),
            "dataset_id": meta.get("dictionary_id"),
            "grid": meta["grid"],
            "system": meta["system"],
            "converged": trace.converged,
            "n_iterations": trace.n_iterations,
        },
    )
    lines = ["iteration,log_likelihood"]
    lines += [f"{i},{repr(float(v))}" for i, v in enumerate(trace.log_likelihoods)]
    _write_text(out_dir / "trace.csv", "\n".join(lines) + "\n")
    write_json(
        out_dir / "fit.json",
        {
            "converged": trace.converged,
            "n_iterations": trace.n_iterations,
            "final_log_likelihood": float(trace.log_likelihoods[-1]),
            "monotone": trace.is_monotone(),
        },
    )
    print(
        f"fit: {trace.n_iterations} iterations, "
        f"final log-likelihood {trace.log_likelihoods[-1]:.6f}, "
        f"converged={trace.converged}"
    )
    if not trace.is_monotone():
        print("fit: log-likelihood trace decreased beyond tolerance", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    return EXIT_OK


def cmd_generate(
    model_dir: str,
    n: int,
    seed: int,
    out: str,
    render: bool,
    p_max: int | None,
    swap_config_path: str | None,
) -> int:
    from .dictionary import (
        SystemConfig,
        build_ofdm_dictionary,
        build_simo_dictionary,
        grid_from_json,
    )
    from .em import load_model
    from .generation import limit_batch_paths, render_channels, sample_parameters, save_batch

    model, meta = load_model(model_dir)
    batch = sample_parameters(model, n, seed)
    if p_max is not None:
        batch = limit_batch_paths(batch, p_max)
    system_doc = meta["system"]
    if swap_config_path is not None:
        system_doc = _load_config(swap_config_path, SYSTEM_SCHEMA)
    if render:
        grid = grid_from_json(meta["grid"])
        system = SystemConfig.from_json(system_doc)
        if system.variant == "simo":
            dictionary = build_simo_dictionary(grid, system)
        else:
            dictionary = build_ofdm_dictionary(grid, system)
        batch = render_channels(batch, dictionary)
    save_batch(
        batch,
        out,
        extra_meta={"grid": meta["grid"], "system": system_doc, "model_id": meta["model_id"]},
    )
    print(f"generate: wrote {n} samples to {out}")
    return EXIT_OK


def _load_reference(path: str | Path) -> dict:
    """Accept either a generated batch or a dataset directory as reference."""
    from .container import read_array, read_json
    from .generation import load_batch

    path = Path(path)
    if (path / "batch.json").exists():
        batch, meta = load_batch(path)
        return {
            "sparse": batch.sparse,
            "channels": batch.channels,
            "grid": meta.get("grid"),
        }
    if (path / "scenario.json").exists():
        meta = read_json(path / "scenario.json")
        channels, _ = read_array(path / "channels")
        return {"sparse": None, "channels": channels, "grid": meta.get("grid")}
    raise ConfigError(f"{path} is neither a batch nor a dataset directory")


def cmd_metrics(
    batch_dir: str,
    reference: str | None,
    out: str,
    channel_metrics: bool,
) -> int:
    import numpy as np

    from .container import write_json
    from .dictionary import grid_from_json
    from .generation import load_batch
    from .metrics import (
        SPREAD_HIST_BINS,
        SPREAD_HIST_RANGE,
        batch_angular_spreads,
        cosine_similarity,
        histogram_w1,
        nmse,
        power_angular_profile,
        profile_support_leakage,
    )

    batch, meta = load_batch(batch_dir)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    profile, skipped = power_angular_profile(batch.sparse)
    report: dict = {"n_samples": len(batch), "n_skipped_zero_norm": skipped}

    grid_doc = meta.get("grid")
    grid = grid_from_json(grid_doc) if grid_doc else None
    angular = grid_doc is not None and grid_doc.get("kind") == "angle"

    lines = ["grid_index,angle_rad,mass"] if angular else ["grid_index,mass"]
    for idx, mass in enumerate(profile):
        if angular:
            lines.append(f"{idx},{repr(float(grid.points[idx]))},{repr(float(mass))}")
        else:
            lines.append(f"{idx},{repr(float(mass))}")
    _write_text(out_dir / "profile.csv", "\n".join(lines) + "\n")

    spreads = None
    if angular:
        spreads, _ = batch_angular_spreads(batch.sparse, grid)
        edges = np.linspace(*SPREAD_HIST_RANGE, SPREAD_HIST_BINS + 1)
        hist, _ = np.histogram(np.clip(spreads, edges[0], edges[-1]), bins=edges)
        hist = hist / hist.sum()
        hist_lines = ["bin_lo,bin_hi,mass"]
        hist_lines += [
            f"{repr(float(edges[i]))},{repr(float(edges[i + 1]))},{repr(float(hist[i]))}"
            for i in range(SPREAD_HIST_BINS)
        ]
        _write_text(out_dir / "spread_hist.csv", "\n".join(hist_lines) + "\n")
        report["mean_angular_spread"] = float(np.mean(spreads))

    ref = _load_reference(reference) if reference is not None else None
    if ref is not None and ref["sparse"] is not None:
        ref_profile, _ = power_angular_profile(ref["sparse"])
        report["leakage_vs_reference_support"] = profile_support_leakage(
            profile, ref_profile > 1e-12
        )
        if angular:
            ref_spreads, _ = batch_angular_spreads(ref["sparse"], grid)
            report["spread_w1_vs_reference"] = histogram_w1(spreads, ref_spreads)
    else:
        report["leakage_vs_own_support"] = profile_support_leakage(profile, profile > 1e-12)

    can_pair = (
        ref is not None
        and batch.channels is not None
        and ref["channels"] is not None
        and len(ref["channels"]) == len(batch)
        and ref["channels"].shape == batch.channels.shape
    )
    if can_pair:
        report["nmse"] = nmse(batch.channels, ref["channels"])
        report["cosine_similarity"] = cosine_similarity(batch.channels, ref["channels"])
    elif channel_metrics:
        raise ConfigError(
            "channel metrics need a reference with channels aligned to the batch"
        )
    write_json(out_dir / "report.json", report)
    print(f"metrics: wrote report to {out_dir}")
    return EXIT_OK


def _selfcheck_registry():
    import numpy as np

    from . import (
        AngleGrid,
        DelayDopplerGrid,
        SystemConfig,
        build_ofdm_dictionary,
        build_simo_dictionary,
        csgmm_fit,
        csvae_elbo_terms,
        limit_paths,
        make_observations,
        posterior_moments,
        swap_system_config,
        toeplitz_deviation,
    )
    from .utils import complex_standard_normal

    def dictionary_unit_modulus():
        d = build_simo_dictionary(AngleGrid(32), SystemConfig.simo(8))
        assert np.abs(np.abs(d.matrix) - 1).max() < 1e-12

    def ofdm_kron_identity():
        grid = DelayDopplerGrid(4, 4, doppler_bound=200.0, delay_bound=4e-6)
        d = build_ofdm_dictionary(grid, SystemConfig.ofdm(5, 3, 15e3, 1e-3 / 14))
        assert np.abs(d.matrix - np.kron(d.doppler_factor, d.delay_factor)).max() < 1e-12

    def swap_round_trip():
        d = build_simo_dictionary(AngleGrid(16), SystemConfig.simo(4))
        back = swap_system_config(swap_system_config(d, SystemConfig.simo(9)), d.config)
        assert np.abs(back.matrix - d.matrix).max() < 1e-12

    def posterior_dense_oracle():
        rng = np.random.default_rng(0)
        m, s = 6, 24
        a = np.eye(m)
        dmat = np.exp(1j * rng.uniform(0, 2 * math.pi, (m, s)))
        gamma = rng.uniform(0, 2, s)
        sigma2 = 0.3
        y = complex_standard_normal(rng, m)
        mom = posterior_moments(gamma, y, a, dmat, sigma2)
        w = a @ dmat
        c_y = w @ np.diag(gamma) @ w.conj().T + sigma2 * np.eye(m)
        inv = np.linalg.inv(c_y)
        mean = np.diag(gamma) @ w.conj().T @ inv @ y
        assert np.abs(mom.mean - mean).max() < 1e-10

    def elbo_cancellation():
        rng = np.random.default_rng(1)
        m, s = 5, 16
        dmat = np.exp(1j * rng.uniform(0, 2 * math.pi, (m, s)))
        gamma = rng.uniform(1e-7, 1.5, s)
        y = complex_standard_normal(rng, m)
        terms = csvae_elbo_terms(
            gamma, y, np.eye(m), dmat, 0.5, rng.standard_normal(3), rng.uniform(0.5, 2, 3)
        )
        assert abs(terms.reconstruction - terms.posterior_kl - terms.combined) < 1e-8 * abs(
            terms.combined
        )

    def em_monotone_micro():
        rng = np.random.default_rng(2)
        d = build_simo_dictionary(AngleGrid(16), SystemConfig.simo(6))
        channels = complex_standard_normal(rng, (30, 6))
        obs = make_observations(channels, np.eye(6), (5.0, 15.0), rng)
        _, trace = csgmm_fit(obs, d, 2, max_iters=10, seed=0)
        assert trace.is_monotone(1e-8)

    def conditional_toeplitz():
        rng = np.random.default_rng(3)
        d = build_simo_dictionary(AngleGrid(24), SystemConfig.simo(8))
        gamma = rng.uniform(0, 1, 24)
        cov = (d.matrix * gamma[None, :]) @ d.matrix.conj().T
        assert toeplitz_deviation(cov) < 1e-9 * np.abs(cov).max()

    def limit_paths_idempotent():
        rng = np.random.default_rng(4)
        s = complex_standard_normal(rng, 12)
        once = limit_paths(s, 3)
        assert np.array_equal(limit_paths(once, 3), once)

    def container_round_trip():
        import tempfile

        from .container import read_array, write_array

        rng = np.random.default_rng(5)
        arr = complex_standard_normal(rng, (4, 3))
        with tempfile.TemporaryDirectory() as tmp:
            write_array(Path(tmp) / "x", arr, role="selfcheck")
            back, _ = read_array(Path(tmp) / "x")
        assert back.tobytes() == arr.tobytes()

    return [
        ("dictionary-unit-modulus", dictionary_unit_modulus),
        ("ofdm-kron-identity", ofdm_kron_identity),
        ("swap-round-trip", swap_round_trip),
        ("posterior-dense-oracle", posterior_dense_oracle),
        ("elbo-cancellation", elbo_cancellation),
        ("em-monotone-micro", em_monotone_micro),
        ("conditional-toeplitz", conditional_toeplitz),
        ("limit-paths-idempotent", limit_paths_idempotent),
        ("container-round-trip", container_round_trip),
    ]


def cmd_selfcheck() -> int:
    failures = 0
    for name, check in _selfcheck_registry():
        try:
            check()
        except Exception as exc:  # report every failure, keep going
            failures += 1
            print(f"[FAIL] {name}: {exc}")
        else:
            print(f"[PASS] {name}")
    return EXIT_OK if failures == 0 else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chansbgm",
        description="Learn and generate wireless channel parameter distributions.",
    )
    parser.add_argument("--threads", type=int, default=None, help="cap linear-algebra threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="synthesize a training dataset")
    p_synth.add_argument("--config", required=True, help="scenario config JSON")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)

    p_fit = sub.add_parser("fit", help="fit a mixture model to a dataset")
    p_fit.add_argument("dataset", help="dataset directory from synth")
    p_fit.add_argument("--model", choices=["csgmm", "msbl"], default="csgmm")
    p_fit.add_argument("--K", type=int, default=None, help="component count")
    p_fit.add_argument(
        "--variance-form", choices=["full", "kronecker"], default="full"
    )
    p_fit.add_argument("--config", default=None, help="EM options JSON")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--out", required=True)

    p_gen = sub.add_parser("generate", help="sample parameters (and channels)")
    p_gen.add_argument("model", help="model directory from fit")
    p_gen.add_argument("-n", "--n", type=int, required=True, help="sample count")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--p-max", type=int, default=None, help="path-count cap")
    p_gen.add_argument("--render", action="store_true", help="also compute channels")
    p_gen.add_argument(
        "--swap-config", default=None, help="system config JSON for rendering"
    )
    p_gen.add_argument("--out", required=True)

    p_met = sub.add_parser("metrics", help="evaluate a generated batch")
    p_met.add_argument("batch", help="batch directory from generate")
    p_met.add_argument("reference", nargs="?", default=None, help="reference batch or dataset")
    p_met.add_argument(
        "--channel-metrics", action="store_true", help="require nmse/cosine against the reference"
    )
    p_met.add_argument("--out", required=True)

    sub.add_parser("selfcheck", help="run bundled invariant checks")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_threads(args.threads)
    try:
        if args.command == "synth":
            return cmd_synth(args.config, args.seed, args.out)
        if args.command == "fit":
            return cmd_fit(
                args.dataset,
                args.out,
                args.model,
                args.K,
                args.variance_form,
                args.seed,
                args.config,
            )
        if args.command == "generate":
            return cmd_generate(
                args.model, args.n, args.seed, args.out,
                args.render, args.p_max, args.swap_config,
            )
        if args.command == "metrics":
            return cmd_metrics(args.batch, args.reference, args.out, args.channel_metrics)
        if args.command == "selfcheck":
            return cmd_selfcheck()
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
