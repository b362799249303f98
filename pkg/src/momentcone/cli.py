"""``momentcone`` command line: simulate, tabulate moments, issue verdicts.

Every command takes ``--config FILE`` (JSON) plus any number of
``--set key=value`` overrides with dotted keys, e.g. ``--set model.rate=2``.
Values are parsed as JSON when possible, otherwise kept as strings.

Exit codes: 0 decided, 2 usage or configuration error, 3 inconclusive verdict.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .correlation import (
    INCONCLUSIVE,
    Tolerances,
    _jsonable,
    discreteness_verdict,
    point_process_verdict,
    recover_rho,
)
from .measures import (
    DEFAULT_LADDER,
    DEFAULT_SHRINK_LADDER,
    OffDiagonalBox,
    SampleBatch,
    Window,
    window_ladder,
)
from .models import DEFAULT_TRUNC_EPS, model_from_dict, sample_many, thread_count
from .momentproblem import DEGENERACY_CUTOFF, NOISE_SIGMAS, PSD_RTOL
from .moments import DEFAULT_DEGREE_CAP, MAX_DEGREE_CAP, MomentSource, moment_table, write_moment_csv

log = logging.getLogger("momentcone")

EXIT_OK, EXIT_CONFIG, EXIT_INCONCLUSIVE = 0, 2, 3

DEFAULT_CONFIG = {
    "model": {"variant": "gamma", "rate": 1.0},
    "dimension": 1,
    "ladder": list(DEFAULT_LADDER),
    "shrink_ladder": list(DEFAULT_SHRINK_LADDER),
    "window": None,
    "samples": 1000,
    "seed": 0,
    "trunc_eps": DEFAULT_TRUNC_EPS,
    "mode": "analytic",
    "degree_cap": DEFAULT_DEGREE_CAP,
    "n_max": 2,
    "point_process": True,
    "assume_moment_sequence": True,
    "tolerances": {"psd_rtol": PSD_RTOL, "degeneracy_cutoff": DEGENERACY_CUTOFF, "noise_sigmas": NOISE_SIGMAS},
    "moments": {"orders": [1, 2], "max_degree": 4},
    "rho": {"n": 1, "parts": 2, "max_degree": 6, "tuple_limit": 50},
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "model":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(config: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = config
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = _parse_value(raw)


def load_config(path: str | None, overrides=()) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        try:
            user = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        cfg = _merge(cfg, user)
    for o in overrides:
        apply_override(cfg, o)
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    s = cfg.get("samples")
    if not isinstance(s, int) or isinstance(s, bool) or s < 1:
        raise ConfigError("sample count must be ≥ 1")
    cap = cfg.get("degree_cap")
    if not isinstance(cap, int) or not 1 <= cap <= MAX_DEGREE_CAP:
        raise ConfigError(f"degree cap must be an integer in 1..{MAX_DEGREE_CAP}")
    if not isinstance(cfg.get("n_max"), int) or cfg["n_max"] < 1:
        raise ConfigError("n_max must be a positive integer")
    if not isinstance(cfg.get("seed"), int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    tol = cfg.get("tolerances", {})
    for k, v in tol.items():
        if not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError(f"tolerance {k} must be > 0")
    if not cfg.get("trunc_eps", 0) > 0:
        raise ConfigError("trunc_eps must be > 0")
    if cfg.get("mode") not in ("analytic", "empirical"):
        raise ConfigError("mode must be 'analytic' or 'empirical'")
    for key in ("ladder", "shrink_ladder"):
        lad = cfg.get(key)
        if not isinstance(lad, list) or not lad or not all(isinstance(v, (int, float)) and v > 0 for v in lad):
            raise ConfigError(f"{key} must be a non-empty list of positive half-widths")
    try:
        model_from_dict(cfg["model"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid model: {exc}") from None


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def _dimension(cfg: dict) -> int:
    return int(cfg.get("dimension") or 1)


def _window(cfg: dict) -> Window:
    if cfg.get("window"):
        try:
            return Window.from_dict(cfg["window"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid window: {exc}") from None
    return Window.cube(max(cfg["ladder"]), _dimension(cfg))


def _tolerances(cfg: dict) -> Tolerances:
    try:
        return Tolerances(**cfg.get("tolerances", {}))
    except TypeError as exc:
        raise ConfigError(f"unknown tolerance: {exc}") from None


def _manifest(cfg: dict, window: Window, count: int) -> dict:
    return {"version": __version__, "seed": cfg["seed"], "model": cfg["model"], "window": window.to_dict(),
            "samples": count, "trunc_eps": cfg["trunc_eps"], "config_hash": config_hash(cfg), "config": cfg}


# ---------------------------------------------------------------------------
# sources


def _simulate(cfg: dict) -> SampleBatch:
    model = model_from_dict(cfg["model"])
    window = _window(cfg)
    try:
        return sample_many(model, window, cfg["seed"], cfg["samples"], cfg["trunc_eps"], workers=thread_count())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def read_samples(path: str) -> tuple[SampleBatch, dict]:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read sample file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"sample file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict) or "samples" not in data:
        raise ConfigError("sample file must be an object with a 'samples' list")
    samples = data["samples"]
    if not samples:
        raise ConfigError("sample file holds no samples")
    manifest = data.get("manifest", {})
    window = Window.from_dict(manifest["window"]) if "window" in manifest else None
    try:
        return SampleBatch.from_dicts(samples, window), manifest
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"malformed sample file: {exc}") from None


def _source(cfg: dict, samples_path: str | None) -> tuple[MomentSource, dict]:
    if samples_path:
        batch, manifest = read_samples(samples_path)
        return MomentSource.empirical(batch), {"seed": manifest.get("seed"), "samples_file": samples_path}
    model = model_from_dict(cfg["model"])
    if cfg["mode"] == "analytic":
        return MomentSource.analytic(model, _dimension(cfg)), {}
    return MomentSource.empirical(_simulate(cfg)), {"seed": cfg["seed"]}


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args, cfg) -> int:
    batch = _simulate(cfg)
    payload = {"manifest": _manifest(cfg, batch.window, len(batch)), "samples": batch.to_dicts()}
    _write(json.dumps(payload) + "\n", args.out)
    log.info("wrote %d samples (%d atoms)", len(batch), batch.weights.size)
    return EXIT_OK


def cmd_moments(args, cfg) -> int:
    source, _ = _source(cfg, args.samples)
    d = source.d
    windows = window_ladder(cfg["ladder"], d)
    if not source.is_analytic:
        windows = [w for w in windows if source.window is None or source.window.contains_window(w)]
        if not windows:
            raise ConfigError("no ladder window lies inside the sampled window")
    deltas = {}
    for n in cfg["moments"].get("orders", [1]):
        for level, w in zip(cfg["ladder"], windows):
            deltas[f"L{level:g}^{n}"] = OffDiagonalBox.power(w, int(n))
    rows = moment_table(source, deltas, int(cfg["moments"].get("max_degree", 4)))
    _write(write_moment_csv(rows), args.out)
    return EXIT_OK


def cmd_verdict(args, cfg) -> int:
    source, seeds = _source(cfg, args.samples)
    d = source.d
    ladder = window_ladder(cfg["ladder"], d)
    shrink = window_ladder(cfg["shrink_ladder"], d)
    if not source.is_analytic and source.window is not None:
        bad = [w for w in ladder if not source.window.contains_window(w)]
        if bad:
            raise ConfigError(f"ladder window {bad[0].to_dict()} is outside the sampled window")
    run = point_process_verdict if cfg.get("point_process", True) else discreteness_verdict
    verdict = run(source, ladder, cfg["n_max"], cfg["degree_cap"], shrink_ladder=shrink,
                  assume_moment_sequence=cfg.get("assume_moment_sequence", True), seeds=seeds,
                  tol=_tolerances(cfg))
    report = json.loads(verdict.to_json())
    report["config_hash"] = config_hash(cfg)
    _write(json.dumps(report, indent=2) + "\n", args.out)
    log.info("verdict: %s", verdict.outcome)
    return EXIT_INCONCLUSIVE if verdict.outcome == INCONCLUSIVE else EXIT_OK


def cmd_recover_rho(args, cfg) -> int:
    source, seeds = _source(cfg, args.samples)
    opts = cfg["rho"]
    window = Window.cube(min(cfg["ladder"]), source.d) if source.window is None else source.window
    if args.n is not None:
        opts = dict(opts, n=args.n)
    est = recover_rho(source, int(opts["n"]), window, int(opts.get("max_degree", 6)), int(opts.get("parts", 2)))
    report = est.to_dict(tuple_limit=int(opts.get("tuple_limit", 50)))
    report.update(config_hash=config_hash(cfg), seeds=seeds)
    _write(json.dumps(_jsonable(report), indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_selftest(args, cfg) -> int:
    from . import selftest
    results = selftest.run(args.only or None)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else 1


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="momentcone", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry (dotted keys, JSON values); repeatable")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="draw samples and write them with a manifest")
    s.set_defaults(func=cmd_simulate)
    for name, func, helptext in (("moments", cmd_moments, "CSV table of M_i(delta) on the ladder boxes"),
                                 ("verdict", cmd_verdict, "discreteness / point-process verdict as JSON"),
                                 ("recover-rho", cmd_recover_rho, "reconstruct the correlation measure")):
        c = sub.add_parser(name, parents=[common], help=helptext)
        c.add_argument("--samples", help="sample file from 'simulate' (otherwise per config mode)")
        c.set_defaults(func=func)
        if name == "recover-rho":
            c.add_argument("--n", type=int, help="order of the correlation measure")
    t = sub.add_parser("selftest", parents=[common], help="run the built-in oracle checks")
    t.add_argument("--only", action="append", help="run only the named check; repeatable")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s",
                        stream=sys.stderr)
    try:
        cfg = load_config(args.config, args.overrides)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
