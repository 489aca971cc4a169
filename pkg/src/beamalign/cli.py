"""Command-line front end: configure scenarios, run experiments, emit CSV.

Subcommands:

* ``align sweep``     metrics over an SNR grid (the main workflow)
* ``align episode``   one verbose episode, optionally exporting traces
* ``align codebook``  build, export, inspect or verify a codebook

Config files are JSON with angles in degrees; every key is validated and
unknown keys are rejected.  Command-line flags override file values.
All output files are written atomically (temp file + rename) and each
sweep writes a manifest with the fully resolved configuration so the
exact experiment can be reproduced.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .channel import (
    AR1Rician,
    DEFAULT_AR1_G,
    IIDGaussian,
    NoiseConfig,
    StaticKnown,
    StaticUnknown,
    stream_rng,
)
from .codebook import export_codebook, read_codebook_table
from .inference import AlphaGrid
from .simulate import (
    ALGORITHMS,
    ScenarioConfig,
    ScenarioParts,
    beliefs_csv,
    metrics_csv,
    run_episode,
    sweep,
    traces_csv,
)

ALGORITHM_ALIASES = {"alg1": "joint", "alg2": "kalman"}

_FADING_KEYS = {
    "ar1": {"g", "k_r", "gamma"},
    "static_known": {"alpha"},
    "static_unknown": {"mean", "variance"},
    "iid": {"mean", "variance"},
}
_ALPHA_GRID_KEYS = {"r_min", "r_max", "z_min", "z_max", "n_r", "n_z"}
_MOMENT_KEYS = {"mean", "variance"}
_TOP_KEYS = {
    "num_antennas",
    "spacing_over_wavelength",
    "theta_min_deg",
    "theta_max_deg",
    "resolution_inv",
    "snr_db",
    "noise_variance",
    "tau",
    "total_slots",
    "algorithms",
    "trials",
    "seed",
    "paired_randomness",
    "aoa_off_grid",
    "fading",
    "alpha_grid",
    "iid_moments",
    "mismatch_moments",
}


class ConfigError(ValueError):
    pass


def _as_complex(value, where: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"{where}: expected a number or [re, im] pair, got {value!r}")


def _check_keys(data: dict, allowed: set, where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def parse_snr_spec(spec) -> tuple[float, ...]:
    """Expand an SNR specification into a tuple of dB points.

    Accepts a list of numbers, a comma-separated string, or an inclusive
    ``LO:HI:STEP`` range.
    """
    if isinstance(spec, (list, tuple)):
        return tuple(float(x) for x in spec)
    text = str(spec)
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"SNR range must be LO:HI:STEP, got {text!r}")
        lo, hi, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError("SNR range step must be > 0")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        if count < 1:
            raise ConfigError(f"empty SNR range {text!r}")
        return tuple(lo + i * step for i in range(count))
    return tuple(float(p) for p in text.split(",") if p.strip())


def parse_algorithms(spec) -> tuple[str, ...]:
    names = spec.split(",") if isinstance(spec, str) else list(spec)
    out = []
    for raw in names:
        name = ALGORITHM_ALIASES.get(raw.strip().lower(), raw.strip().lower())
        if name not in ALGORITHMS:
            raise ConfigError(
                f"unknown algorithm {raw!r}; choose from {', '.join(ALGORITHMS)}"
            )
        out.append(name)
    if not out:
        raise ConfigError("algorithm list is empty")
    return tuple(out)


def _parse_fading(data: dict):
    if "kind" not in data:
        raise ConfigError("fading: missing 'kind'")
    kind = data["kind"]
    if kind not in _FADING_KEYS:
        raise ConfigError(
            f"fading.kind {kind!r} not one of {sorted(_FADING_KEYS)}"
        )
    _check_keys({k: v for k, v in data.items() if k != "kind"}, _FADING_KEYS[kind], "fading")
    if kind == "ar1":
        g = data.get("g")
        return AR1Rician(
            g=DEFAULT_AR1_G if g is None else float(g),
            k_r=float(data.get("k_r", 10.0)),
            gamma=_as_complex(data.get("gamma", 1.0), "fading.gamma"),
        )
    if kind == "static_known":
        return StaticKnown(_as_complex(data.get("alpha", 1.0), "fading.alpha"))
    cls = StaticUnknown if kind == "static_unknown" else IIDGaussian
    return cls(
        mean=_as_complex(data.get("mean", 0.0), "fading.mean"),
        variance=float(data.get("variance", 1.0)),
    )


def _parse_moments(data, where: str):
    if data is None:
        return None
    _check_keys(data, _MOMENT_KEYS, where)
    return (
        _as_complex(data.get("mean", 0.0), f"{where}.mean"),
        float(data.get("variance", 0.0)),
    )


def parse_config(path=None, overrides: dict | None = None) -> ScenarioConfig:
    """Build a fully resolved :class:`ScenarioConfig` from file + overrides.

    An empty (or absent) file yields the default reference scenario.
    Unknown keys fail closed; invalid combinations raise with the
    violated constraint named.
    """
    data: dict = {}
    if path is not None:
        with open(path) as fh:
            text = fh.read().strip()
        if text:
            data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a JSON object")
    _check_keys(data, _TOP_KEYS, "config")
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    kwargs = {}
    if "theta_min_deg" in data:
        kwargs["theta_min"] = math.radians(float(data["theta_min_deg"]))
    if "theta_max_deg" in data:
        kwargs["theta_max"] = math.radians(float(data["theta_max_deg"]))
    for key in ("num_antennas", "resolution_inv", "tau", "total_slots", "trials", "seed"):
        if key in data:
            kwargs[key] = int(data[key])
    for key in ("spacing_over_wavelength", "noise_variance"):
        if key in data:
            kwargs[key] = float(data[key])
    if "snr_db" in data:
        kwargs["snr_db"] = parse_snr_spec(data["snr_db"])
    if "algorithms" in data:
        kwargs["algorithms"] = parse_algorithms(data["algorithms"])
    if "paired_randomness" in data:
        kwargs["paired"] = bool(data["paired_randomness"])
    if "aoa_off_grid" in data:
        kwargs["aoa_off_grid"] = bool(data["aoa_off_grid"])
    if "fading" in data:
        kwargs["fading"] = _parse_fading(data["fading"])
    if "alpha_grid" in data:
        _check_keys(data["alpha_grid"], _ALPHA_GRID_KEYS, "alpha_grid")
        g = data["alpha_grid"]
        kwargs["alpha_grid"] = AlphaGrid(
            float(g.get("r_min", 0.0)),
            float(g.get("r_max", 2.0)),
            float(g.get("z_min", -0.7)),
            float(g.get("z_max", 0.7)),
            int(g.get("n_r", 50)),
            int(g.get("n_z", 50)),
        )
    if "iid_moments" in data:
        kwargs["iid_moments"] = _parse_moments(data["iid_moments"], "iid_moments")
    if "mismatch_moments" in data:
        kwargs["mismatch_moments"] = _parse_moments(
            data["mismatch_moments"], "mismatch_moments"
        )
    try:
        return ScenarioConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _complex_json(c: complex):
    return [c.real, c.imag]


def config_to_jsonable(cfg: ScenarioConfig) -> dict:
    """Serialize a resolved config so parse_config reproduces it exactly."""
    fading = cfg.fading
    if isinstance(fading, AR1Rician):
        fading_doc = {
            "kind": "ar1",
            "g": fading.g,
            "k_r": fading.k_r,
            "gamma": _complex_json(fading.gamma),
        }
    elif isinstance(fading, StaticKnown):
        fading_doc = {"kind": "static_known", "alpha": _complex_json(fading.alpha_star)}
    else:
        kind = "static_unknown" if isinstance(fading, StaticUnknown) else "iid"
        fading_doc = {
            "kind": kind,
            "mean": _complex_json(fading.mean),
            "variance": fading.variance,
        }
    moments = lambda m: None if m is None else {
        "mean": _complex_json(complex(m[0])),
        "variance": float(m[1]),
    }
    return {
        "num_antennas": cfg.num_antennas,
        "spacing_over_wavelength": cfg.spacing_over_wavelength,
        "theta_min_deg": math.degrees(cfg.theta_min),
        "theta_max_deg": math.degrees(cfg.theta_max),
        "resolution_inv": cfg.resolution_inv,
        "snr_db": list(cfg.snr_db),
        "noise_variance": cfg.noise_variance,
        "tau": cfg.tau,
        "total_slots": cfg.total_slots,
        "algorithms": list(cfg.algorithms),
        "trials": cfg.trials,
        "seed": cfg.seed,
        "paired_randomness": cfg.paired,
        "aoa_off_grid": cfg.aoa_off_grid,
        "fading": fading_doc,
        "alpha_grid": {
            "r_min": cfg.alpha_grid.r_min,
            "r_max": cfg.alpha_grid.r_max,
            "z_min": cfg.alpha_grid.z_min,
            "z_max": cfg.alpha_grid.z_max,
            "n_r": cfg.alpha_grid.n_r,
            "n_z": cfg.alpha_grid.n_z,
        },
        "iid_moments": moments(cfg.iid_moments),
        "mismatch_moments": moments(cfg.mismatch_moments),
    }


def atomic_write(path: str, text: str) -> None:
    """Write via a sibling temp file and rename, so failures leave no
    partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(cfg: ScenarioConfig, out_path: str, extra_outputs: dict) -> str:
    manifest = {
        "tool": "beamalign",
        "version": __version__,
        "seed": cfg.seed,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "outputs": {"metrics": out_path, **extra_outputs},
        "config": config_to_jsonable(cfg),
    }
    path = out_path + ".manifest.json"
    atomic_write(path, json.dumps(manifest, indent=2) + "\n")
    return path


def _scenario_overrides(args) -> dict:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.snr_db is not None:
        overrides["snr_db"] = args.snr_db
    if getattr(args, "algorithms", None) is not None:
        overrides["algorithms"] = args.algorithms
    if getattr(args, "paired_randomness", None) is not None:
        overrides["paired_randomness"] = args.paired_randomness
    return overrides


def _cmd_sweep(args) -> int:
    cfg = parse_config(args.config, _scenario_overrides(args))
    workers = args.workers if args.workers else (os.cpu_count() or 1)
    if args.export_traces:
        rows, groups = sweep(cfg, workers=workers, collect_traces=True)
        atomic_write(args.export_traces, traces_csv(groups))
    else:
        rows = sweep(cfg, workers=workers)
    atomic_write(args.out, metrics_csv(rows))
    extra = {"traces": args.export_traces} if args.export_traces else {}
    manifest = write_manifest(cfg, args.out, extra)
    print(f"wrote {args.out} ({len(rows)} rows) and {manifest}")
    return 0


def _cmd_episode(args) -> int:
    overrides = _scenario_overrides(args)
    if args.algorithm is not None:
        overrides["algorithms"] = args.algorithm
    cfg = parse_config(args.config, overrides)
    rng = stream_rng(cfg.seed, 0, args.trial)
    trace = run_episode(cfg, rng, capture_beliefs=args.export_beliefs is not None)
    noise = NoiseConfig.from_snr_db(cfg.snr_db[0], cfg.noise_variance)
    print(
        f"algorithm={cfg.algorithms[0]} snr_db={cfg.snr_db[0]:g} trial={args.trial} "
        f"true_index={trace.phi_index} true_angle_rad={trace.phi_rad:.6f}"
    )
    print("t,level,k,re_y,im_y,re_alpha,im_alpha,degenerate")
    for t in range(len(trace.levels)):
        y, a = trace.observations[t], trace.fading[t]
        print(
            f"{t + 1},{trace.levels[t]},{trace.indices[t]},{y.real:.9g},{y.imag:.9g},"
            f"{a.real:.9g},{a.imag:.9g},{int(trace.degenerate[t])}"
        )
    print(
        f"estimate={trace.estimate} leaf=({trace.final_level},{trace.final_index}) "
        f"correct={trace.correct} "
        f"beam_snr_db={10 * math.log10(noise.power_sqrt**2 * trace.terminal_gain_sq / cfg.noise_variance):.3f}"
    )
    if args.export_traces:
        atomic_write(
            args.export_traces, traces_csv({(cfg.algorithms[0], cfg.snr_db[0]): [trace]})
        )
    if args.export_beliefs:
        atomic_write(args.export_beliefs, beliefs_csv(trace))
    return 0


def _cmd_codebook(args) -> int:
    cfg = parse_config(args.config)
    parts = ScenarioParts.from_config(cfg)
    cb = parts.codebook
    if args.export:
        tmp_target = args.export
        export_codebook(cb, tmp_target + ".part")
        os.replace(tmp_target + ".part", tmp_target)
        print(f"wrote {cb.count} codewords to {tmp_target}")
        return 0
    if args.verify:
        table = read_codebook_table(args.verify)
        worst = 0.0
        for (level, k), w in table.items():
            worst = max(worst, float(np.max(np.abs(w - cb.codeword(level, k)))))
        ok = len(table) == cb.count and worst == 0.0
        print(
            f"{args.verify}: {len(table)} codewords, max deviation {worst:.3g} -> "
            f"{'OK' if ok else 'MISMATCH'}"
        )
        return 0 if ok else 1
    norms = np.linalg.norm(cb.codewords, axis=1)
    print(
        f"codebook: levels={cb.levels} codewords={cb.count} antennas={cfg.num_antennas} "
        f"grid={cfg.resolution_inv} norm_range=[{norms.min():.12f}, {norms.max():.12f}]"
    )
    for level in range(1, cb.levels + 1):
        g = np.abs(cb.gain_table[2**level - 2 : 2 ** (level + 1) - 2])
        cover = cfg.resolution_inv // 2**level
        ratios = []
        for k in range(2**level):
            inside = g[k, k * cover : (k + 1) * cover].mean()
            outside = np.delete(g[k], slice(k * cover, (k + 1) * cover)).mean()
            ratios.append(inside / outside)
        print(
            f"  level {level}: beams={2**level} coverage={cover} angles "
            f"in/out gain ratio min={min(ratios):.2f} mean={np.mean(ratios):.2f}"
        )
    return 0


def _bool_flag(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in {"1", "true", "yes", "on"}:
        return True
    if lowered in {"0", "false", "no", "off"}:
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="align",
        description="Sequential beam alignment simulator",
    )
    parser.add_argument("--version", action="version", version=f"beamalign {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON scenario file (degrees for angles)")
        p.add_argument("--seed", type=int, help="64-bit master seed")
        p.add_argument("--trials", type=int)
        p.add_argument("--snr-db", dest="snr_db", help="LO:HI:STEP range or comma list")

    p_sweep = sub.add_parser("sweep", help="run the Monte Carlo SNR sweep")
    common(p_sweep)
    p_sweep.add_argument("--algorithms", help="comma list (known,mismatched,iid,joint,kalman,bisection)")
    p_sweep.add_argument("--out", default="metrics.csv")
    p_sweep.add_argument("--workers", type=int, default=0, help="0 = all cores")
    p_sweep.add_argument("--paired-randomness", dest="paired_randomness", type=_bool_flag)
    p_sweep.add_argument("--export-traces", dest="export_traces")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_ep = sub.add_parser("episode", help="run and print a single episode")
    common(p_ep)
    p_ep.add_argument("--algorithm", help="single algorithm name")
    p_ep.add_argument("--trial", type=int, default=0, help="trial index for the rng stream")
    p_ep.add_argument("--export-traces", dest="export_traces")
    p_ep.add_argument("--export-beliefs", dest="export_beliefs")
    p_ep.set_defaults(func=_cmd_episode)

    p_cb = sub.add_parser("codebook", help="build, inspect, export or verify the codebook")
    p_cb.add_argument("--config")
    p_cb.add_argument("--export", help="write portable text codebook")
    p_cb.add_argument("--verify", help="compare a previously exported file")
    p_cb.set_defaults(func=_cmd_codebook)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
