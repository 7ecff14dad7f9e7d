"""Command-line entry point: ``gradgibbs <subcommand> [flags]``.

Exit status is 0 on success, 1 for invalid input or usage, 2 when a
numerical routine fails.  Floats are written with 17 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .duality import Orientation, random_two_state, self_dual_p, verify_summed_duality, verify_z_rep
from .enumeration import enumerate_exact
from .errors import NumericalError, ValidationError
from .gibbs import Init, run_chain, scan_p, tilt_tail_check
from .gaussfield import log_partition, log_partition_star
from .rng import make_rng
from .spinwave import (
    Quadrature,
    crossing_p,
    finite_free_energy,
    gap_check,
    infinite_free_energy,
)
from .torus import CouplingConfig, ModelParams, PatternId, build_torus, read_config

DEFAULTS = dict(M=512, tol=1e-7, sweeps=10_000, burnin=1_000, seed=1)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)
    out: str | None = None
    format: str = "csv"


# --------------------------------------------------------------------------
# formatting


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if v is None:
        return ""
    return str(v)


def to_json(obj, indent: int = 0) -> str:
    """JSON with floats at 17 significant digits; non-finite floats become strings."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{inner}{to_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return fmt(v) if math.isfinite(v) else json.dumps(fmt(v))
    if obj is None:
        return "null"
    if hasattr(obj, "value") and isinstance(obj.value, str):  # enums
        return json.dumps(obj.value)
    return json.dumps(str(obj))


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _emit(text: str, cfg: RunConfig, out=None) -> None:
    path = cfg.out
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        (out or sys.stdout).write(text)


def _json_doc(cfg: RunConfig, payload: dict) -> str:
    return to_json({"run_config": asdict(cfg), **payload}) + "\n"


# --------------------------------------------------------------------------
# argument parsing


def _model(a) -> ModelParams:
    kd = a.kappa_d if a.kappa_d is not None else 1.0 / a.kappa_o
    return ModelParams(a.p if getattr(a, "p", None) is not None else 0.5, a.kappa_o, kd)


def _floats(text: str) -> list[float]:
    """Comma list or ``start:stop:step`` range (stop inclusive)."""
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            n = int(round((stop - start) / step))
            return [round(start + i * step, 12) for i in range(n + 1)]
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse number list {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse integer list {text!r}") from None


def _add_kappas(sp, p_default=None):
    sp.add_argument("--kappa-o", type=float, default=100.0, help="ordered stiffness (default 100)")
    sp.add_argument(
        "--kappa-d", type=float, default=None, help="disordered stiffness (default 1/kappa_o)"
    )
    if p_default is not False:
        sp.add_argument("--p", type=float, default=p_default, help="mixture weight of the ordered well")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gradgibbs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="SUBCOMMAND")

    def add(name, help):
        sp = sub.add_parser(name, help=help, description=help)
        sp.add_argument("--config", help="file of 'key = value' lines; flags take precedence")
        sp.add_argument("--out", help="write output here instead of stdout")
        return sp

    sp = add("spinwave", "Spin-wave free energy of one or all patterns (CSV).")
    sp.add_argument("--pattern", default="all", help="O, D, UO, UD, MP, MA or all")
    _add_kappas(sp, 0.5)
    sp.add_argument("--L", type=int, default=None, help="finite torus side; infinite volume if omitted")
    sp.add_argument("--M", type=int, default=DEFAULTS["M"], help="initial grid size (default 512)")
    sp.add_argument("--tol", type=float, default=DEFAULTS["tol"], help="grid doubling tolerance (default 1e-7)")

    sp = add("gap-check", "Excess free energy of mixed patterns against the lower bound (CSV).")
    _add_kappas(sp, False)
    sp.add_argument("--p-grid", default="0.05:0.95:0.05")
    sp.add_argument("--M", type=int, default=DEFAULTS["M"])
    sp.add_argument("--tol", type=float, default=DEFAULTS["tol"])

    sp = add("finite-fe", "Finite-torus against infinite-volume free energies (CSV).")
    sp.add_argument("--pattern", default="all")
    _add_kappas(sp, 0.5)
    sp.add_argument("--L", default="8,16,32,64", help="comma list of even sides")
    sp.add_argument("--M", type=int, default=DEFAULTS["M"])
    sp.add_argument("--tol", type=float, default=DEFAULTS["tol"])

    sp = add("logz", "Gaussian log partition functions of a coupling file (JSON).")
    sp.add_argument("input", help="coupling configuration file")

    sp = add("sample", "Run one Gibbs chain and print per-sweep observables (CSV).")
    sp.add_argument("--L", type=int, default=16)
    _add_kappas(sp, 0.5)
    sp.add_argument("--init", choices=[i.value for i in Init], default=Init.ORDERED.value)
    sp.add_argument("--sweeps", type=int, default=DEFAULTS["sweeps"], help="recorded sweeps (default 10000)")
    sp.add_argument("--burnin", type=int, default=DEFAULTS["burnin"], help="discarded sweeps (default 1000)")
    sp.add_argument("--seed", type=int, default=DEFAULTS["seed"])

    sp = add("scan", "Dual-initialization p scan (CSV per chain, JSON summary).")
    sp.add_argument("--L", type=int, default=16)
    _add_kappas(sp, False)
    sp.add_argument("--p-grid", default="0.84,0.87,0.89,0.91,0.93,0.95,0.98")
    sp.add_argument("--sweeps", type=int, default=DEFAULTS["sweeps"])
    sp.add_argument("--burnin", type=int, default=DEFAULTS["burnin"])
    sp.add_argument("--seeds", default="1,2,3,4")
    sp.add_argument("--summary", help="write the JSON summary here (default: stderr)")

    sp = add("duality-check", "Partition-function duality on random two-state couplings (JSON).")
    sp.add_argument("--L", type=int, default=4)
    sp.add_argument("--seed", type=int, default=DEFAULTS["seed"])
    sp.add_argument("--samples", type=int, default=50)
    _add_kappas(sp, False)

    sp = add("pt", "Candidate transition points and the exact adjudication (JSON).")
    _add_kappas(sp, False)

    sp = add("exact-enum", "Exact L=2 summary by enumeration (JSON).")
    _add_kappas(sp, 0.5)

    sp = add("tilt-check", "Tail of the empirical tilt against its Gaussian bound (JSON).")
    sp.add_argument("--L", type=int, default=8)
    sp.add_argument("--kappa", type=float, default=1.0)
    sp.add_argument("--deltas", default="0.1,0.2,0.4")
    sp.add_argument("--draws", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=DEFAULTS["seed"])
    return parser


def _read_kv(path: str) -> dict:
    out = {}
    try:
        lines = open(path, encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{n}: expected 'key = value'")
        k, v = (t.strip() for t in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def parse(argv) -> tuple[argparse.Namespace, argparse.ArgumentParser]:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise UsageError("a subcommand is required")
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        values = _read_kv(args.config)
        known = {a.dest: a for a in sub._actions}
        for k in values:
            if k not in known or k in ("help", "config"):
                raise ValidationError(f"unknown config key {k!r} for {args.command}")
        defaults = {}
        for k, v in values.items():
            conv = known[k].type or str
            try:
                defaults[k] = conv(v)
            except ValueError:
                raise ValidationError(f"config key {k!r}: bad value {v!r}") from None
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args, parser


# --------------------------------------------------------------------------
# subcommands


def _patterns(text: str):
    if text.lower() == "all":
        return list(PatternId)
    try:
        return [PatternId(t.strip()) for t in text.split(",")]
    except ValueError:
        raise ValidationError(f"unknown pattern in {text!r}") from None


def _quad(a) -> Quadrature:
    return Quadrature(M=a.M, tol=a.tol)


def cmd_spinwave(a, cfg):
    m = _model(a)
    rows = []
    for pat in _patterns(a.pattern):
        if a.L is None:
            r = infinite_free_energy(pat, m, _quad(a))
            rows.append((pat.value, m.p, m.kappa_o, m.kappa_d, "inf", r.value, r.error))
        else:
            r = finite_free_energy(pat, m, a.L)
            rows.append((pat.value, m.p, m.kappa_o, m.kappa_d, a.L, r.value, 0.0))
    header = ["pattern", "p", "kappa_O", "kappa_D", "L", "value", "error_estimate"]
    _emit(csv_text(header, rows), cfg)


def cmd_gap_check(a, cfg):
    rows = []
    for p in _floats(a.p_grid):
        m = _model(a).with_p(p)
        r = gap_check(m, _quad(a))
        rows.append((p, m.kappa_o, m.kappa_d, r.lhs, r.rhs, r.margin, r.argmin.value, r.holds))
    header = ["p", "kappa_O", "kappa_D", "lhs", "rhs", "margin", "argmin", "holds"]
    _emit(csv_text(header, rows), cfg)


def cmd_finite_fe(a, cfg):
    m = _model(a)
    rows = []
    for pat in _patterns(a.pattern):
        inf = infinite_free_energy(pat, m, _quad(a)).value
        for L in _ints(a.L):
            fin = finite_free_energy(pat, m, L).value
            rows.append((pat.value, m.p, m.kappa_o, m.kappa_d, L, fin, inf, fin - inf))
    header = ["pattern", "p", "kappa_O", "kappa_D", "L", "finite", "infinite", "difference"]
    _emit(csv_text(header, rows), cfg)


def cmd_logz(a, cfg):
    conf = read_config(a.input)
    if not isinstance(conf, CouplingConfig):
        raise ValidationError("logz expects a kappa configuration")
    g = build_torus(conf.L)
    payload = {
        "logZ": log_partition(conf, g),
        "logZstar": log_partition_star(conf, g),
        "N": g.n_sites,
        "L": g.L,
    }
    _emit(_json_doc(cfg, payload), cfg)


def cmd_sample(a, cfg):
    m = _model(a)
    s = run_chain(m, a.L, a.init, a.sweeps, a.burnin, a.seed)
    header = ["sweep", "r_ord", "tilt_x", "tilt_y", "mean_energy", "n_ordered"]
    _emit(csv_text(header, s.rows()), cfg)


def cmd_scan(a, cfg):
    m = _model(a)
    rep = scan_p(m, a.L, _floats(a.p_grid), a.sweeps, a.burnin, _ints(a.seeds))
    rows = [(r.p, r.init.value, r.seed, r.mean_r_ord, r.stderr) for r in rep.runs]
    _emit(csv_text(["p", "init", "seed", "mean_r_ord", "stderr"], rows), cfg)
    summary = {
        "run_config": asdict(cfg),
        "p_grid": list(rep.p_grid),
        "chi": list(rep.chi()),
        "ordered_init": [rep.mean_by_init(p, Init.ORDERED) for p in rep.p_grid],
        "disordered_init": [rep.mean_by_init(p, Init.DISORDERED) for p in rep.p_grid],
        "jump_estimate": rep.jump_estimate,
        "hysteresis_interval": list(rep.hysteresis_interval) if rep.hysteresis_interval else None,
    }
    text = to_json(summary) + "\n"
    if a.summary:
        with open(a.summary, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stderr.write(text)


def cmd_duality_check(a, cfg):
    m = _model(a)
    g = build_torus(a.L)
    rng = make_rng(a.seed, "duality")
    reports = [verify_z_rep(random_two_state(a.L, m, rng), g) for _ in range(a.samples)]
    payload = {
        "reports": [
            {"L": r.L, "digest": r.digest, "lhs": r.lhs, "rhs": r.rhs, "residual": r.residual}
            for r in reports
        ],
        "max_residual": max(abs(r.residual) for r in reports),
    }
    _emit(_json_doc(cfg, payload), cfg)


def cmd_pt(a, cfg):
    m = _model(a)
    adj = verify_summed_duality(m)
    payload = {
        "candidates": {o.value: self_dual_p(m, o) for o in Orientation},
        "crossing": crossing_p(m),
        "winner": adj.winner.value if adj.winner else None,
        "p_t": adj.p_t,
        "max_abs_residual": {o.value: max(abs(r) for r in res) for o, res in adj.residuals.items()},
    }
    _emit(_json_doc(cfg, payload), cfg)


def cmd_exact_enum(a, cfg):
    s = enumerate_exact(_model(a))
    payload = {
        "L": 2,
        "p": s.p,
        "kappa_O": s.kappa_o,
        "kappa_D": s.kappa_d,
        "logZ_V": s.log_z_v,
        "logZstar_V": s.log_zstar_v,
        "P_ordered": list(s.marginal_ordered),
        "chi": s.chi,
        "E_R_one_minus_R": s.r_one_minus_r,
        "E_kappa_eta_sq": s.mean_kappa_eta_sq,
        "E_bond_energy": s.mean_bond_energy,
        "pattern_prob": s.pattern_prob,
        "pattern_z": s.pattern_z,
    }
    _emit(_json_doc(cfg, payload), cfg)


def cmd_tilt_check(a, cfg):
    r = tilt_tail_check(a.L, a.kappa, tuple(_floats(a.deltas)), a.draws, a.seed)
    payload = {
        "L": r.L,
        "kappa": r.kappa,
        "box": asdict(r.box),
        "box_bonds": r.n_box_bonds,
        "draws": r.n_draws,
        "deltas": list(r.deltas),
        "empirical_tail": list(r.empirical),
        "bound": list(r.bounds),
        "holds": r.holds,
    }
    _emit(_json_doc(cfg, payload), cfg)


COMMANDS = {
    "spinwave": (cmd_spinwave, "csv"),
    "gap-check": (cmd_gap_check, "csv"),
    "finite-fe": (cmd_finite_fe, "csv"),
    "logz": (cmd_logz, "json"),
    "sample": (cmd_sample, "csv"),
    "scan": (cmd_scan, "csv"),
    "duality-check": (cmd_duality_check, "json"),
    "pt": (cmd_pt, "json"),
    "exact-enum": (cmd_exact_enum, "json"),
    "tilt-check": (cmd_tilt_check, "json"),
}


def dispatch(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args, _ = parse(argv)
        func, form = COMMANDS[args.command]
        params = {k: v for k, v in vars(args).items() if k not in ("command", "out", "config")}
        cfg = RunConfig(args.command, params, args.out, form)
        func(args, cfg)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"gradgibbs: invalid input: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"gradgibbs: numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
