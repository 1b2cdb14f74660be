"""Batch front end: ``xtalk <command> [--config FILE] [--set key=value] ...``.

Every run writes one CSV plus ``run-manifest.json`` into ``--out``. The
manifest holds the fully resolved config, so ``xtalk replay`` reruns the
experiment and checks the CSV hashes match.

Exit codes: 0 ok, 1 config or usage error, 2 numerical failure, 3 replay
produced different bytes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import traceback
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from ._accel import backend_name
from .asymptotics import asymptotic_rate, mmse_regime_approx, mmse_snr_asymptotic, zf_gamma_asymptotic
from .cancelers import Canceler
from .channel import FextModelParams
from .config import COMMANDS, ExperimentConfig, load_file, resolve
from .errors import ConfigError, NumericalError, XtalkError
from .linkbudget import SweepMode, rate_reach_sweep, tone_bits
from .montecarlo import SequenceSpec, convergence_experiment, scatter_experiment

MANIFEST_NAME = "run-manifest.json"
OUTPUT_NAMES = {c: c.replace("-", "_") + ".csv" for c in COMMANDS}

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_MISMATCH = 0, 1, 2, 3


def _f(x) -> str:
    return repr(float(x))


def _label(kind) -> str:
    return "NONE" if kind is None else Canceler(kind).value


# --------------------------------------------------------------------------
# experiments: each returns (header, rows)
# --------------------------------------------------------------------------

def _asymptotic_sweep(cfg: ExperimentConfig):
    p = cfg.params
    eta_db = np.asarray(p["eta_db"], dtype=float)
    sigma2 = np.asarray(p["sigma2"], dtype=float)
    eta = 10.0 ** (eta_db / 10.0)
    rho = mmse_snr_asymptotic(eta[:, None], sigma2[None, :])
    rate_zf = asymptotic_rate(eta[:, None], sigma2[None, :], Canceler.ZF)
    rows = []
    for i, edb in enumerate(eta_db):
        for j, s2 in enumerate(sigma2):
            zf = zf_gamma_asymptotic(s2)
            rows.append([_f(edb), _f(s2), _f(math.inf if zf.divergent else zf.gamma), _f(rho[i, j]),
                         _f(rate_zf[i, j]), _f(math.log2(1.0 + rho[i, j])),
                         mmse_regime_approx(eta[i], s2).regime.value])
    return ["eta_db", "sigma2", "gamma_zf", "rho_mmse", "rate_zf", "rate_mmse", "regime"], rows


def _convergence(cfg: ExperimentConfig):
    p = cfg.params
    fext = FextModelParams.calibrated(p["sigma2"], p["m_target"], p["sigma_db"])
    spec = SequenceSpec(p["m_target"], tuple(p["n_values"]), fext)
    xi = math.inf if p["canceler"] == "ZF" else p["eta"]
    rows = []
    for n, st in convergence_experiment(spec, xi, cfg.trials, cfg.seed):
        rows.append([n, st.trials, _f(st.mean_gamma_bar), _f(st.std_gamma_bar), _f(st.gamma_det),
                     _f(st.coeff_variation)])
    return ["n", "trials", "mean_gamma", "std_gamma", "gamma_det", "coeff_var"], rows


def _scatter(cfg: ExperimentConfig):
    p = cfg.params
    out = scatter_experiment(p["m_values"], p["sigma2"], p["eta_db"], cfg.trials, cfg.seed, p["sigma_db"])
    rows = [[r.canceler.value, r.m, _f(r.sigma2), _f(r.gamma_det), _f(r.gamma_emp)] for r in out]
    return ["canceler", "m", "sigma2", "gamma_det", "gamma_emp"], rows


def _rate_reach(cfg: ExperimentConfig):
    p = cfg.params
    points = rate_reach_sweep(p["lengths_m"], cfg.channel, cfg.plan, cfg.trials, SweepMode(p["mode"]),
                              cfg.seed, include_single_wire=p["include_single_wire"])
    rows = [[_f(pt.loop_length_m), _label(pt.canceler_kind), pt.source.value, _f(pt.rate_bps / 1e6)]
            for pt in points]
    return ["length_m", "canceler", "source", "mean_rate_mbps"], rows


def _spectral_efficiency(cfg: ExperimentConfig):
    p = cfg.params
    scenario = cfg.channel.with_length(p["loop_length_m"])
    f_mhz = cfg.plan.tone_frequencies() / 1e6
    series = tone_bits(scenario, cfg.plan, cfg.trials, SweepMode(p["mode"]), cfg.seed)
    rows = []
    for (kind, source), bits in series.items():
        rows.extend([_f(f), _label(kind), source.value, _f(b)] for f, b in zip(f_mhz, bits))
    return ["f_mhz", "canceler", "source", "bits_per_tone"], rows


EXPERIMENTS: dict[str, Callable[[ExperimentConfig], tuple[list, list]]] = {
    "asymptotic-sweep": _asymptotic_sweep,
    "convergence": _convergence,
    "scatter": _scatter,
    "rate-reach": _rate_reach,
    "spectral-efficiency": _spectral_efficiency,
}


# --------------------------------------------------------------------------
# running and artifacts
# --------------------------------------------------------------------------

def render_csv(header, rows) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode("ascii")


def build_manifest(cfg: ExperimentConfig, outputs: dict[str, bytes]) -> dict:
    return {
        "tool": "xtalk",
        "version": __version__,
        "command": cfg.command,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "trials": cfg.trials,
        "config": cfg.to_dict(),
        "outputs": {name: hashlib.sha256(data).hexdigest() for name, data in outputs.items()},
        "backend": backend_name(),
    }


def run(cfg: ExperimentConfig) -> dict[str, bytes]:
    """Execute ``cfg`` and write its CSV and manifest; returns the CSV bytes by file name."""
    header, rows = EXPERIMENTS[cfg.command](cfg)
    outputs = {OUTPUT_NAMES[cfg.command]: render_csv(header, rows)}
    out_dir = cfg.output_path or Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, data in outputs.items():
        (out_dir / name).write_bytes(data)
    manifest = build_manifest(cfg, outputs)
    (out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return outputs


def _failing_module(exc: BaseException) -> str:
    """Innermost package module on the traceback, e.g. ``asymptotics``."""
    name = "xtalk"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        mod = frame.f_globals.get("__name__", "")
        if mod.startswith("xtalk."):
            name = mod.split(".", 1)[1]
    return name


def _config_from_manifest(path: str, out: str | None) -> tuple[ExperimentConfig, dict]:
    try:
        manifest = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError("manifest", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("manifest", f"cannot parse {path}: {exc}") from None
    if not isinstance(manifest, dict) or "config" not in manifest:
        raise ConfigError("manifest.config", "missing")
    data = dict(manifest["config"])
    command = data.get("command", manifest.get("command"))
    cfg = resolve(command, data, trials=data.get("trials"), seed=data.get("seed"),
                  output_path=out if out is not None else Path(path).parent)
    return cfg, manifest


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors share the config-error exit code; 2 is reserved for numerics
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xtalk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"xtalk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", help="YAML or JSON config file")
        sp.add_argument("--trials", type=int, help="Monte Carlo trials")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--out", default=".", help="output directory (default: .)")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry; bare keys address the experiment section")
    rp = sub.add_parser("replay", help="rerun from a run manifest and verify the outputs")
    rp.add_argument("manifest")
    rp.add_argument("--out", help="output directory (default: the manifest's directory)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = None
    try:
        if args.command == "replay":
            cfg, manifest = _config_from_manifest(args.manifest, args.out)
        else:
            data = load_file(args.config) if args.config else {}
            cfg = resolve(args.command, data, args.overrides, args.trials, args.seed, args.out)
        outputs = run(cfg)
    except ConfigError as exc:
        print(f"xtalk: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        inputs = json.dumps(cfg.params, sort_keys=True) if cfg else "?"
        print(f"xtalk: numerical failure in {_failing_module(exc)}: {exc} (inputs: {inputs}, "
              f"seed={cfg.seed if cfg else '?'})", file=sys.stderr)
        return EXIT_NUMERICAL
    except (XtalkError, ValueError, OSError) as exc:
        print(f"xtalk: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = cfg.output_path or Path(".")
    for name, data in outputs.items():
        n_rows = data.count(b"\n") - 1
        print(f"{cfg.command}: wrote {n_rows} rows to {out_dir / name}")
    if args.command == "replay":
        expected = manifest.get("outputs", {})
        bad = [n for n, d in outputs.items() if expected.get(n) != hashlib.sha256(d).hexdigest()]
        if bad:
            print(f"xtalk: replay differs from manifest for {', '.join(bad)}", file=sys.stderr)
            return EXIT_MISMATCH
        print("replay: outputs match the manifest byte for byte")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
