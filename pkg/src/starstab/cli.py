"""``starstab`` command line: configs in, deterministic CSV/JSON artifacts out.

Exit codes: 0 success, 1 I/O error, 2 configuration error, 3 numerical
consistency failure.  Outputs are written only after a command has finished,
and anything already written is removed if a later write fails.
"""

from __future__ import annotations

import argparse
import configparser
import io
import json
import sys
import warnings
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import hamiltonian, mrcurve, spectral
from .eos import from_config
from .equilibrium import integrate_profile, surface_potential
from .errors import (
    ConstructionError,
    EOSDomainError,
    ResolutionError,
    StarstabError,
)

SCHEMA_VERSION = "1.0"

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    """Malformed or unknown configuration entry."""


_NUMERICS = {"tol": 1e-10, "N_grid": 400, "N_mu": 64, "R_out_factor": 3.0, "seed": 0}
_SECTIONS = {
    "numerics": _NUMERICS,
    "equilibrium": {"mu": 1.0, "N_out": 200},
    "curve": {"mu_lo": 1e-2, "mu_hi": 1e2},
    "stability": {"mu": 1.0, "mu_lo": 1e-3, "cross_check": True},
    "spectrum": {"mu": 1.0, "l": 0, "k": 3, "operator": "D"},
    "toy": {"n": 200},
}
_DEFAULT_EOS = {"family": "polytrope", "K": "1.0", "gamma": "1.6666666666666667"}


@dataclass
class RunConfig:
    eos: dict = field(default_factory=lambda: dict(_DEFAULT_EOS))
    sections: dict = field(default_factory=lambda: {k: dict(v) for k, v in _SECTIONS.items()})

    def get(self, section: str, key: str):
        return self.sections[section][key]


def _coerce(default, raw: str, where: str):
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r}") from None


def load_config(path: str | None) -> RunConfig:
    """Parse an INI config; unknown sections and keys are errors."""
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for name in parser.sections():
        if name == "eos":
            cfg.eos = dict(parser[name])
            continue
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        for key, raw in parser[name].items():
            if key not in _SECTIONS[name]:
                raise ConfigError(f"unknown key {key!r} in [{name}]")
            cfg.sections[name][key] = _coerce(_SECTIONS[name][key], raw, f"[{name}] {key}")
    return cfg


# ---- formatting -----------------------------------------------------------------


def _num(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def _csv(header, rows) -> str:
    out = io.StringIO()
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(_num(v) for v in row) + "\n")
    return out.getvalue()


def _plain(obj):
    """Convert numpy scalars and arrays to JSON-ready Python values."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _schema() -> dict:
    text = resources.files("starstab").joinpath("schemas/report.schema.json").read_text("utf-8")
    return json.loads(text)


def _report(command: str, body: dict) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "command": command, **_plain(body)}
    jsonschema.validate(doc, _schema())
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write_all(outputs: dict[str, str]) -> None:
    written = []
    try:
        for path, text in outputs.items():
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            written.append(path)
    except OSError:
        for path in written:
            Path(path).unlink(missing_ok=True)
        raise


def _verdict_dict(v: mrcurve.StabilityVerdict) -> dict:
    return asdict(v)


# ---- subcommands ----------------------------------------------------------------


def _eos(cfg: RunConfig):
    return from_config(cfg.eos)


def cmd_equilibrium(args, cfg: RunConfig) -> dict[str, str]:
    mu = args.mu if args.mu is not None else cfg.get("equilibrium", "mu")
    n_out = cfg.get("equilibrium", "N_out")
    model = integrate_profile(_eos(cfg), mu, tol=cfg.get("numerics", "tol"), N=n_out)
    head = {
        "schema_version": SCHEMA_VERSION,
        "mu": model.mu,
        "R": model.R,
        "M": model.M,
        "V_R": surface_potential(model),
    }
    rows = zip(model.grid, model.y, model.rho, model.yprime)
    text = json.dumps(head, sort_keys=True) + "\n" + _csv(("r", "y", "rho", "yprime"), rows)
    outputs = {}
    if args.out:
        outputs[args.out] = text
    else:
        sys.stdout.write(text)
    if args.json:
        outputs[args.json] = _report("equilibrium", {k: v for k, v in head.items() if k != "schema_version"})
    return outputs


def _curve_args(args, cfg):
    lo = args.mu_lo if args.mu_lo is not None else cfg.get("curve", "mu_lo")
    hi = args.mu_hi if args.mu_hi is not None else cfg.get("curve", "mu_hi")
    n = args.N if args.N is not None else cfg.get("numerics", "N_mu")
    return lo, hi, n


def cmd_curve(args, cfg: RunConfig) -> dict[str, str]:
    lo, hi, n = _curve_args(args, cfg)
    eos = _eos(cfg)
    curve = mrcurve.trace_curve(eos, lo, hi, n, tol=cfg.get("numerics", "tol"))
    walk = mrcurve.tpp_walk(curve)
    rows = [
        (curve.mus[i], curve.Ms[i], curve.Rs[i], curve.dM[i], curve.dMR[i], v.i_mu, v.n_u_tpp)
        for i, v in enumerate(walk)
    ]
    text = _csv(("mu", "M", "R", "dM", "dMR", "i_mu", "n_u"), rows)
    outputs = {}
    if args.out:
        outputs[args.out] = text
    else:
        sys.stdout.write(text)
    if args.json:
        body = {
            "mu_lo": lo,
            "mu_hi": hi,
            "N": n,
            "truncated_at": curve.truncated_at,
            "mass_extrema": [{"mu": m, "kind": k} for m, k in curve.mass_extrema],
            "mr_criticals": list(curve.mr_criticals),
            "verdicts": [_verdict_dict(v) for v in walk],
        }
        outputs[args.json] = _report("curve", body)
    return outputs


def cmd_stability(args, cfg: RunConfig) -> dict[str, str]:
    mu = args.mu if args.mu is not None else cfg.get("stability", "mu")
    lo = args.mu_lo if args.mu_lo is not None else cfg.get("stability", "mu_lo")
    if not lo < mu:
        raise ConfigError("stability needs mu_lo < mu")
    n_mu = args.N if args.N is not None else cfg.get("numerics", "N_mu")
    tol = cfg.get("numerics", "tol")
    N = cfg.get("numerics", "N_grid")
    eos = _eos(cfg)
    curve = mrcurve.trace_curve(eos, lo, mu, n_mu, tol=tol)
    model = integrate_profile(eos, mu, tol=tol)
    n_minus = spectral.negative_index(
        spectral.assemble_D0(model, cfg.get("numerics", "R_out_factor"), N)
    )
    n_eddington = spectral.eddington_spectrum(model, N, 1).neg_count
    cross = cfg.get("stability", "cross_check")
    if cross:
        v = mrcurve.verdict(curve, mu, n_minus)
    else:
        w = mrcurve.tpp_walk(curve)[curve.index_of(mu)]
        v = mrcurve.StabilityVerdict(
            mu=w.mu, i_mu=w.i_mu, n_u_tpp=w.n_u_tpp, classification=w.classification,
            n_minus_D0=n_minus, n_u_formula=n_minus - w.i_mu, critical_index=w.critical_index,
        )
    agree = v.n_u_tpp == v.n_u_formula == n_eddington
    report = _report(
        "stability",
        {"verdict": _verdict_dict(v), "n_u_spectral": n_eddington, "agreement": agree},
    )
    target = args.out or args.json
    outputs = {target: report} if target else {}
    if not target:
        sys.stdout.write(report)
    if cross and not agree:
        raise _Mismatch(
            f"unstable-mode counts disagree: {v.n_u_tpp}, {v.n_u_formula}, {n_eddington}"
        )
    return outputs


class _Mismatch(StarstabError):
    """Counts that the theory says must agree did not."""


def cmd_spectrum(args, cfg: RunConfig) -> dict[str, str]:
    mu = args.mu if args.mu is not None else cfg.get("spectrum", "mu")
    l = args.l if args.l is not None else cfg.get("spectrum", "l")
    k = args.k if args.k is not None else cfg.get("spectrum", "k")
    kind = args.operator or cfg.get("spectrum", "operator")
    N = cfg.get("numerics", "N_grid")
    rf = cfg.get("numerics", "R_out_factor")
    model = integrate_profile(_eos(cfg), mu, tol=cfg.get("numerics", "tol"))
    if kind == "D":
        op = spectral.assemble_D0(model, rf, N) if l == 0 else spectral.assemble_Dl(model, l, rf, N)
    elif kind == "Lr":
        op = spectral.assemble_Lr(model, N)
    elif kind == "eddington":
        op = spectral.assemble_eddington(model, N)
    else:
        raise ConfigError(f"unknown operator {kind!r}")
    sl = spectral.eigenpairs(op, k)
    body = {
        "operator": op.kind,
        "l": op.l,
        "mu": mu,
        "eigenvalues": sl.eigenvalues,
        "neg_count": sl.neg_count,
        "kernel_dim": sl.kernel_dim,
        "kernel_tolerance": op.kernel_tolerance(),
        "grid": {"n": op.size, "h": op.h, "R": model.R, "R_out": op.outer_radius},
    }
    report = _report("spectrum", body)
    outputs = {}
    target = args.out or args.json
    if target:
        outputs[target] = report
    else:
        sys.stdout.write(report)
    if args.dump_operator:
        if op.banded:
            rows = zip(op.grid, op.stiffness[0], op.stiffness[1], op.weight)
            outputs[args.dump_operator] = _csv(("r", "diag", "subdiag", "weight"), rows)
        else:
            K = op.stiffness
            rows = ((i, j, K[i, j]) for i in range(K.shape[0]) for j in range(i, K.shape[1]))
            outputs[args.dump_operator] = _csv(("i", "j", "value"), rows)
    return outputs


def _matrix_text(name, M) -> str:
    lines = [f"{name} ="]
    for row in M:
        lines.append("  [" + " ".join(f"{v:g}" for v in row) + "]")
    return "\n".join(lines) + "\n"


def cmd_toy(args, cfg: RunConfig) -> dict[str, str]:
    outputs = {}
    target = args.out or args.json
    if args.random:
        n = args.n if args.n is not None else cfg.get("toy", "n")
        seed = args.seed if args.seed is not None else cfg.get("numerics", "seed")
        ledger = hamiltonian.run_corpus(seed, n)
        report = _report("toy", {"mode": "random", **ledger})
        if target:
            outputs[target] = report
        else:
            sys.stdout.write(report)
        if not ledger["passed"]:
            raise _Mismatch(f"corpus failures: {ledger['failures']}")
        return outputs
    triple = hamiltonian.nilpotent_example()
    J = triple.JL
    powers = [J]
    for _ in range(3):
        powers.append(powers[-1] @ J)
    fit = hamiltonian.growth_fit(triple)
    text = "".join(_matrix_text(f"(JL)^{p}" if p > 1 else "JL", M) for p, M in enumerate(powers, 1))
    text += f"growth degree = {fit.degree} (slope {fit.slope:.6f})\n"
    sys.stdout.write(text)
    if target:
        body = {
            "mode": "paper-example",
            "powers": [P for P in powers],
            "growth_degree": fit.degree,
            "growth_slope": fit.slope,
        }
        outputs[target] = _report("toy", body)
    return outputs


# ---- entry point ----------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--out", help="primary output file")
    common.add_argument("--json", help="JSON report file")
    common.add_argument("--seed", type=int, help="random seed")

    p = argparse.ArgumentParser(prog="starstab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("equilibrium", parents=[common], help="one equilibrium profile")
    s.add_argument("--mu", type=float)

    s = sub.add_parser("curve", parents=[common], help="mass-radius curve and turning points")
    s.add_argument("--mu-lo", type=float)
    s.add_argument("--mu-hi", type=float)
    s.add_argument("-N", type=int)

    s = sub.add_parser("stability", parents=[common], help="turning-point and spectral counts")
    s.add_argument("--mu", type=float)
    s.add_argument("--mu-lo", type=float)
    s.add_argument("-N", type=int)

    s = sub.add_parser("spectrum", parents=[common], help="low spectrum of a radial operator")
    s.add_argument("--mu", type=float)
    s.add_argument("-l", type=int)
    s.add_argument("-k", type=int)
    s.add_argument("--operator", choices=("D", "Lr", "eddington"))
    s.add_argument("--dump-operator")

    s = sub.add_parser("toy", parents=[common], help="finite-dimensional Hamiltonian toolkit")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--paper-example", action="store_true")
    g.add_argument("--random", action="store_true")
    s.add_argument("-n", type=int)
    return p


_COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "curve": cmd_curve,
    "stability": cmd_stability,
    "spectrum": cmd_spectrum,
    "toy": cmd_toy,
}


def run(argv: list[str] | None = None) -> int:
    """Execute one subcommand and return its exit code."""
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.sections["numerics"]["seed"] = args.seed
        outputs = _COMMANDS[args.command](args, cfg)
    except (ConfigError, ConstructionError, EOSDomainError, ResolutionError) as exc:
        print(f"starstab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _Mismatch as exc:
        print(f"starstab: consistency failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"starstab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (StarstabError, jsonschema.ValidationError) as exc:
        print(f"starstab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"starstab: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        _write_all(outputs)
    except OSError as exc:
        print(f"starstab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        sys.exit(run())


if __name__ == "__main__":
    main()
