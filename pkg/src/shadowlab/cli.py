"""Command line entry point: ``shadowlab <command> --config FILE [--seed N] [--out PATH]``.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 bound violation.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import ExperimentError, NumericalError, UsageError
from .experiments import Table, run_birkhoff, run_shadow_demo, run_stationary, run_sweep, simulate
from .shadowing import certify, read_pseudo_orbit, shadow, shadowing_modulus

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_BOUND = 0, 1, 2, 3
COMMANDS = ("simulate", "shadow", "stationary", "sweep", "birkhoff")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="shadowlab", description="Shadowing and stochastic-stability experiments.")
    p.add_argument("--version", action="version", version=f"shadowlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "simulate": "write random orbits of the perturbed chain",
        "shadow": "shadow a pseudo-orbit file (--input) or run the shadowing demo",
        "stationary": "stationary densities by Ulam's method, cross-checked by Monte Carlo",
        "sweep": "distance to the physical measure as the noise level shrinks",
        "birkhoff": "Birkhoff-average error versus orbit length",
    }
    for name in COMMANDS:
        c = sub.add_parser(name, help=helps[name])
        c.add_argument("--config", required=True, help="TOML experiment config")
        c.add_argument("--seed", type=int, help="master seed (overrides the config)")
        c.add_argument("--out", help="output CSV path (overrides the config)")
        c.add_argument("--plot-script", metavar="PATH", help="also write a matplotlib script for the output")
        if name == "shadow":
            c.add_argument("--input", help="pseudo-orbit file: 'dim=<1|2>' header, one point per line")
    return p


def _sibling(out: Path, suffix: str) -> Path:
    return out.with_name(f"{out.stem}_{suffix}{out.suffix or '.csv'}")


def _write_meta(out: Path, command: str, cfg: ExperimentConfig, files: list[Path], status: int) -> None:
    meta = {
        "command": command,
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "outputs": [f.name for f in files],
        "exit_code": status,
        "versions": {
            "shadowlab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    out.with_name(out.stem + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _write_tables(out: Path, main: Table | None, extra: dict) -> list[Path]:
    files = []
    if main is not None:
        main.write_csv(out)
        files.append(out)
    for name, table in extra.items():
        path = _sibling(out, name)
        table.write_csv(path)
        files.append(path)
    return files


PLOT_TEMPLATE = '''"""Plot {csv} (generated by shadowlab {command})."""
import csv
import sys

import matplotlib.pyplot as plt

with open({csv!r}) as fh:
    rows = list(csv.DictReader(fh))

{body}
plt.tight_layout()
plt.savefig(sys.argv[1] if len(sys.argv) > 1 else {png!r})
'''

PLOT_BODIES = {
    "simulate": (
        'xs = [float(r["x"]) for r in rows if r["orbit"] == "0"]\n'
        'plt.plot(xs[:-1], xs[1:], ",")\n'
        'plt.xlabel("x_j")\nplt.ylabel("x_j+1")'
    ),
    "shadow": (
        'dev = [float(r["shadow_distance"]) for r in rows]\n'
        'plt.hist(dev, bins=30)\nplt.xlabel("shadow distance")'
    ),
    "shadow-file": (
        'plt.semilogy([float(r["deviation"]) + 1e-18 for r in rows])\n'
        'plt.xlabel("j")\nplt.ylabel("deviation")'
    ),
    "stationary": (
        'eps = sorted({r["epsilon"] for r in rows}, key=float)\n'
        'for e in eps:\n'
        '    m = [float(r["mass"]) for r in rows if r["epsilon"] == e]\n'
        '    plt.plot([v * len(m) for v in m], label="eps=" + e)\n'
        'plt.legend()\nplt.xlabel("cell")\nplt.ylabel("density")'
    ),
    "sweep": (
        'eps = [float(r["epsilon"]) for r in rows]\n'
        'plt.loglog(eps, [float(r["w1"]) for r in rows], "o-", label="W1")\n'
        'plt.loglog(eps, [float(r["max_norm_gap"]) for r in rows], "s-", label="max normalized gap")\n'
        'plt.legend()\nplt.xlabel("epsilon")'
    ),
    "birkhoff": (
        'for kind in ("deterministic", "random"):\n'
        '    sel = [r for r in rows if r["kind"] == kind]\n'
        '    plt.loglog([int(r["n"]) for r in sel], [float(r["rms_gap"]) for r in sel], "o-", label=kind)\n'
        'plt.legend()\nplt.xlabel("n")\nplt.ylabel("rms gap")'
    ),
}


def _write_plot_script(path, command: str, csv_path: Path) -> None:
    body = PLOT_BODIES[command]
    text = PLOT_TEMPLATE.format(
        csv=str(csv_path), command=command, body=body, png=str(csv_path.with_suffix(".png"))
    )
    Path(path).write_text(text)


def _shadow_file(cfg: ExperimentConfig, path) -> tuple[Table, int]:
    fmap = cfg.fmap
    x = read_pseudo_orbit(path)
    if (x.ndim == 1) != (fmap.space.dim == 1):
        raise UsageError(f"pseudo-orbit dimension does not match the {fmap.name} map")
    sh = shadow(fmap, x)
    target = shadowing_modulus(fmap).accuracy(sh.max_gap) + 1e-9
    cert = certify(fmap, x, sh, target)
    names = ["x"] if x.ndim == 1 else ["x", "y"]
    t = Table(["j"] + names + ["shadow_" + c for c in names] + ["deviation"])
    xs = x.reshape(len(x), -1).tolist()
    zs = sh.points.reshape(len(x), -1).tolist()
    for j, (p, z, d) in enumerate(zip(xs, zs, sh.deviation.tolist())):
        t.add(j, *p, *z, d)
    if not cert.passed:
        raise ExperimentError(
            f"certificate failed: shadow distance {cert.shadow_distance:.3g} vs target {target:.3g}, "
            f"consistency {cert.consistency:.3g}",
            artifacts={"shadow": t},
        )
    print(
        f"shadow distance {cert.shadow_distance:.6g} (target {target:.6g}), "
        f"consistency {cert.consistency:.3g}, max gap {sh.max_gap:.6g}"
    )
    return t, EXIT_OK


def _run(args, cfg: ExperimentConfig, out: Path) -> tuple[Table, dict, int]:
    cmd = args.command
    if cmd == "simulate":
        return simulate(cfg), {}, EXIT_OK
    if cmd == "shadow":
        if args.input:
            t, code = _shadow_file(cfg, args.input)
            return t, {}, code
        r = run_shadow_demo(cfg)
        return r.orbits, {"observables": r.observables}, EXIT_OK if r.averages_ok else EXIT_BOUND
    if cmd == "stationary":
        r = run_stationary(cfg)
        return r.summary, {"density": r.density, "seeds": r.seeds}, EXIT_OK
    if cmd == "sweep":
        r = run_sweep(cfg)
        return r.rows, {"observables": r.observables}, EXIT_OK if r.bound_ok else EXIT_BOUND
    r = run_birkhoff(cfg)
    return r.gaps, {"summary": r.summary}, EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = Path(args.out or cfg.output or f"shadowlab_{args.command}.csv")
        try:
            main_t, extra, code = _run(args, cfg, out)
        except ExperimentError as exc:
            files = _write_tables(out, None, {f"failed_{k}": v for k, v in exc.artifacts.items()})
            _write_meta(out, args.command, cfg, files, EXIT_NUMERICAL)
            raise
        except NumericalError as exc:
            partial = getattr(exc, "partial", None)
            if partial is not None:
                files = _write_tables(out, partial.rows, {"observables": partial.observables})
                _write_meta(out, args.command, cfg, files, EXIT_NUMERICAL)
            raise
        files = _write_tables(out, main_t, extra)
        _write_meta(out, args.command, cfg, files, code)
        if args.plot_script:
            kind = "shadow-file" if args.command == "shadow" and args.input else args.command
            _write_plot_script(args.plot_script, kind, out)
        if code == EXIT_BOUND:
            print(f"shadowlab: bound violated; see {out}", file=sys.stderr)
        else:
            print(f"wrote {', '.join(str(f) for f in files)}")
        return code
    except UsageError as exc:
        print(f"shadowlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"shadowlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"shadowlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
