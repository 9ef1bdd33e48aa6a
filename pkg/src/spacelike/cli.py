"""Command-line front end.

Subcommands ``gen``, ``solve``, ``verify``, ``sweep`` and ``selftest``.  Every
setting can come from a TOML file (``--config``) and be overridden by the
matching flag.  Top-level keys apply to every command; a table named after
the command (``[solve]``, ``[sweep]``, ...) overrides them for that command.

Exit codes: 0 success, 2 configuration error, 3 non-convergence,
4 space-like breakdown, 5 verification failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cmc_solver import SolverConfig, SolverError, newton_solve, radial_exact
from .domain import make_domain, make_grid
from .graphgeom import (
    EPS_SPACE,
    GraphSurface,
    SpacelikeError,
    cap_radius,
    curvature_field,
    differentiate,
    flat_surface,
    hyperboloid_cap,
    p_field_graph,
)
from .identities import (
    GRADIENT_FLAGS,
    IdentityReport,
    PreconditionError,
    eval_fundamental,
    eval_heintze_karcher,
    eval_hk_deficit,
    eval_lemma33,
    eval_soap_bubble,
    gauss_map_identity,
    pointwise_ellipticity,
)
from .selftest import SUITES, run_suites
from .stability import SWEEP_COLUMNS, disk_family, domain_sweep, ellipse_family, fourier_family, sweep_csv
from .surface_io import domain_spec, read_surface, write_surface

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger("spacelike")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONV, EXIT_BREAKDOWN, EXIT_VERIFY = 0, 2, 3, 4, 5
COMMANDS = ("gen", "solve", "verify", "sweep", "selftest")
IDENTITIES = ("54", "55", "56", "57", "l33", "212", "ellipticity")
GRID_BOUNDS = {"n_r": (8, 1024), "n_phi": (16, 4096)}
# keys that only say where results go; they do not enter the config hash
LOCATION_KEYS = {"out", "report", "plot_dir", "config", "verbose"}


class ConfigError(ValueError):
    pass


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(",", " ").split()]


def _strings(text) -> list[str]:
    if isinstance(text, (list, tuple)):
        return [str(v) for v in text]
    return [v for v in str(text).replace(",", " ").split()]


@dataclass(frozen=True)
class Param:
    name: str
    default: object
    kind: object
    help: str
    commands: tuple[str, ...]


_DOMAIN = ("gen", "solve")
_SOLVER = ("solve", "sweep")
PARAMS = [
    Param("domain", "disk", str, "domain preset: disk, ellipse or fourier", _DOMAIN),
    Param("R", "1", str, "disk radius, or 'auto' to take it from --theta0", _DOMAIN),
    Param("a", 1.0, float, "ellipse semi-axis along x1", _DOMAIN),
    Param("b", 1.2, float, "ellipse semi-axis along x2", _DOMAIN),
    Param("radius", 1.0, float, "base radius of a Fourier domain", _DOMAIN),
    Param("cos", [], _floats, "Fourier cosine coefficients, comma separated", _DOMAIN),
    Param("sin", [], _floats, "Fourier sine coefficients, comma separated", _DOMAIN),
    Param("center", [0.0, 0.0], _floats, "domain center x1,x2", _DOMAIN),
    Param("n_r", 32, int, "radial grid size (rings including the boundary)", ("gen", "solve", "sweep")),
    Param("n_phi", 64, int, "angular grid size (even)", ("gen", "solve", "sweep")),
    Param("c", 0.0, float, "boundary height", ("gen", "solve", "sweep")),
    Param("seed", 0, int, "random seed recorded in every output", COMMANDS),
    Param("out", "-", str, "output file, '-' for stdout", COMMANDS[:4]),
    Param("cap", False, bool, "hyperboloid cap surface", ("gen",)),
    Param("flat", False, bool, "flat surface u = c", ("gen",)),
    Param("theta0", None, float, "cap boundary angle, below -1", ("gen",)),
    Param("sampled", False, bool, "keep only cap heights and difference them", ("gen",)),
    Param("target_rhs", None, float, "mean curvature target (default: dimension n)", _SOLVER),
    Param("max_newton_iters", 50, int, "Newton iteration budget", _SOLVER),
    Param("residual_tol", 1e-10, float, "max-norm residual tolerance", _SOLVER),
    Param("damping", 0.5, float, "step shrink factor in (0, 1)", _SOLVER),
    Param("min_step", 1e-8, float, "smallest admissible step length", _SOLVER),
    Param("eps_space", EPS_SPACE, float, "iterates keep |Du| <= 1 - eps_space", _SOLVER),
    Param("initial_guess", "flat", str, "flat or scaled_cap", _SOLVER),
    Param("report", None, str, "solve report file (default: stdout)", ("solve",)),
    Param("input", None, str, "surface dump to verify", ("verify",)),
    Param("id", ["54"], _strings, f"identities to check: {', '.join(IDENTITIES)}", ("verify",)),
    Param("flag", "euclid", str, "gradient reading: euclid, metric, covariant, both or all", ("verify",)),
    Param("tol", 1e-3, float, "relative residual tolerance", ("verify",)),
    Param("k", 2, int, "numerator order of the quotient S_k/S_l", ("verify",)),
    Param("l", 1, int, "denominator order of the quotient S_k/S_l", ("verify",)),
    Param("family", "ellipse", str, "ellipse, fourier or disk", ("sweep",)),
    Param("ratios", None, _floats, "ellipse axis ratios (default 1.0 to 1.5 in steps of 0.05)", ("sweep",)),
    Param("amplitudes", [0.005, 0.01, 0.02, 0.04], _floats, "Fourier perturbation amplitudes", ("sweep",)),
    Param("workers", 1, int, "parallel worker processes", ("sweep",)),
    Param("plot_dir", None, str, "directory for two-column plot files (default: next to --out)", ("sweep",)),
    Param("samples", 1000, int, "samples per randomized suite", ("selftest",)),
    Param("suite", None, _strings, f"suites to run (default all): {', '.join(SUITES)}", ("selftest",)),
]
COMMAND_DEFAULTS = {"sweep": {"n_r": 48, "n_phi": 96}}


@dataclass
class RunConfig:
    """Resolved settings for one command."""

    command: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def canonical(self) -> dict:
        return {"command": self.command, **{k: v for k, v in sorted(self.values.items()) if k not in LOCATION_KEYS}}

    @property
    def hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def header(self) -> dict:
        vals = self.values
        out = {"version": __version__, "config_hash": self.hash, "seed": vals["seed"], "command": self.command}
        for key in ("n_r", "n_phi"):
            if key in vals:
                out[key] = vals[key]
        return out


def _coerce(param: Param, value):
    if value is None:
        return None
    if param.kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{param.name} must be true or false")
        return value
    try:
        return param.kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {param.name}: {value!r} ({exc})") from None


def load_config_file(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from None


def resolve(command: str, flags: dict, file_values: dict | None = None) -> RunConfig:
    """Merge built-in defaults, config-file values and explicit flags."""
    params = {p.name: p for p in PARAMS if command in p.commands}
    file_values = dict(file_values or {})
    section = file_values.pop(command, {})
    for other in COMMANDS:
        file_values.pop(other, None)
    merged = {k: v for k, v in file_values.items() if k in params}
    stray = [k for k in file_values if k not in {p.name for p in PARAMS}]
    if not isinstance(section, dict):
        raise ConfigError(f"[{command}] must be a table")
    stray += [k for k in section if k not in params]
    if stray:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(stray))}")
    merged.update(section)
    values = {}
    defaults = COMMAND_DEFAULTS.get(command, {})
    for name, p in params.items():
        if flags.get(name) is not None:
            values[name] = _coerce(p, flags[name])
        elif name in merged:
            values[name] = _coerce(p, merged[name])
        else:
            values[name] = defaults.get(name, p.default)
    cfg = RunConfig(command, values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    v = cfg.values
    for key, (lo, hi) in GRID_BOUNDS.items():
        if key in v and not lo <= v[key] <= hi:
            raise ConfigError(f"{key} = {v[key]} outside [{lo}, {hi}]")
    if "n_phi" in v and v["n_phi"] % 2:
        raise ConfigError("n_phi must be even")
    if "domain" in v and v["domain"] not in ("disk", "ellipse", "fourier"):
        raise ConfigError(f"unknown domain {v['domain']!r}")
    if cfg.command == "gen" and v["cap"] == v["flat"]:
        raise ConfigError("gen needs exactly one of --cap or --flat")
    if cfg.command == "gen" and v["cap"] and v["theta0"] is None:
        raise ConfigError("--cap needs --theta0")
    if cfg.command == "verify":
        if not v["input"]:
            raise ConfigError("verify needs --input")
        bad = [i for i in v["id"] if i not in IDENTITIES]
        if bad:
            raise ConfigError(f"unknown identity ids {bad}; choose from {IDENTITIES}")
        if v["flag"] not in GRADIENT_FLAGS + ("covariant", "both", "all"):
            raise ConfigError(f"unknown flag {v['flag']!r}")
        if v["tol"] <= 0:
            raise ConfigError("tol must be positive")
    if cfg.command == "sweep" and v["family"] not in ("ellipse", "fourier", "disk"):
        raise ConfigError(f"unknown family {v['family']!r}")
    if cfg.command == "selftest" and v["suite"]:
        bad = [s for s in v["suite"] if s not in SUITES]
        if bad:
            raise ConfigError(f"unknown suites {bad}")
    if v.get("samples", 1) < 1 or v.get("workers", 1) < 1:
        raise ConfigError("samples and workers must be positive")


def build_domain(cfg: RunConfig, radius_override: float | None = None):
    v = cfg.values
    center = tuple(v["center"])
    if len(center) != 2:
        raise ConfigError("center needs two coordinates")
    try:
        if v["domain"] == "disk":
            if radius_override is not None:
                R = radius_override
            elif v["R"] == "auto":
                raise ConfigError("R = auto only makes sense with --cap")
            else:
                R = float(v["R"])
            return make_domain("disk", center, R=R)
        if v["domain"] == "ellipse":
            return make_domain("ellipse", center, a=v["a"], b=v["b"])
        return make_domain("fourier", center, radius=v["radius"], cos=v["cos"], sin=v["sin"])
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def solver_config(cfg: RunConfig) -> SolverConfig:
    v = cfg.values
    try:
        return SolverConfig(
            target_rhs=v["target_rhs"],
            c=v["c"],
            max_newton_iters=v["max_newton_iters"],
            residual_tol=v["residual_tol"],
            damping=v["damping"],
            min_step=v["min_step"],
            eps_space=v["eps_space"],
            initial_guess=v["initial_guess"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _open_out(path: str):
    if path == "-":
        return _Stdout()
    return open(path, "w", newline="")


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()
        return False


def format_record(rec: dict) -> str:
    """Flat ``key=value`` lines; floats use ``repr`` so reruns compare byte for byte."""
    lines = []
    for key, value in rec.items():
        if isinstance(value, float):
            value = repr(value)
        elif isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


# --- commands ---------------------------------------------------------------


def cmd_gen(cfg: RunConfig) -> int:
    v = cfg.values
    meta = cfg.header()
    meta["c"] = v["c"]
    if v["cap"]:
        try:
            R = cap_radius(v["theta0"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if v["domain"] != "disk":
            raise ConfigError("a cap lives over a disk")
        if v["R"] != "auto" and not math.isclose(float(v["R"]), R, rel_tol=0, abs_tol=1e-10):
            raise ConfigError(f"--R {v['R']} does not match the cap radius {R!r} for theta0 = {v['theta0']}")
        grid = make_grid(build_domain(cfg, radius_override=R), v["n_r"], v["n_phi"])
        surf = hyperboloid_cap(grid, v["c"], v["theta0"], sampled=v["sampled"])
        meta["theta0"] = v["theta0"]
    else:
        grid = make_grid(build_domain(cfg), v["n_r"], v["n_phi"])
        surf = flat_surface(grid, v["c"])
    _write_dump(v["out"], surf, meta)
    return EXIT_OK


def _write_dump(path, surf: GraphSurface, meta: dict) -> None:
    if path == "-":
        from .surface_io import dumps_surface

        sys.stdout.write(dumps_surface(surf, meta))
    else:
        write_surface(path, surf, meta)


def _last_iterate(grid, u, eps) -> GraphSurface:
    # no space-like check: a failed solve still gets dumped for inspection
    Du, D2u = differentiate(u, grid)
    return GraphSurface(grid, np.asarray(u), Du, D2u, "solved:failed", eps)


def cmd_solve(cfg: RunConfig) -> int:
    v = cfg.values
    dom = build_domain(cfg)
    grid = make_grid(dom, v["n_r"], v["n_phi"])
    scfg = solver_config(cfg)
    code = EXIT_OK
    try:
        rep = newton_solve(dom, grid, scfg)
    except SolverError as exc:
        rep = exc.report
        code = exc.exit_code
        log.error("solve failed: %s", exc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    record = {**cfg.header(), "domain": dom.describe(), **rep.to_record()}
    if dom.preset == "disk":
        exact = radial_exact(dom.params["R"], dom.n_ambient, scfg.c)
        r = np.hypot(grid.x - dom.center[0], grid.y - dom.center[1])
        record["oracle_max_error"] = float(np.max(np.abs(rep.u - exact.u(r))))
    surf = rep.surface if rep.surface is not None else _last_iterate(grid, rep.u, scfg.eps_space)
    meta = cfg.header()
    meta["c"] = scfg.c
    meta["converged"] = rep.converged
    _write_dump(v["out"], surf, meta)
    text = format_record(record)
    if v["report"]:
        Path(v["report"]).write_text(text)
    elif v["out"] == "-":
        sys.stderr.write(text)
    else:
        sys.stdout.write(text)
    return code


def _flags(choice: str) -> tuple[str, ...]:
    if choice == "both":
        return GRADIENT_FLAGS
    if choice == "all":
        return GRADIENT_FLAGS + ("covariant",)
    return (choice,)


def _invalid(identity: str, grid, note: str, flag: str = "") -> IdentityReport:
    return IdentityReport(
        identity,
        {},
        math.nan,
        math.nan,
        math.nan,
        flag=flag,
        valid=False,
        grid={"domain": grid.domain.describe(), "n_r": grid.n_r, "n_phi": grid.n_phi},
        notes=[note],
    )


def _gauss_map_report(cf, grid) -> IdentityReport:
    A = cf.A.reshape(-1, 2, 2)
    worst = 0.0
    for M in A:
        worst = max(worst, gauss_map_identity(M))
    return IdentityReport(
        "gauss_map", {"max_relative_gap": worst}, worst, 0.0, 1.0, grid={"domain": grid.domain.describe(), "n_r": grid.n_r, "n_phi": grid.n_phi}
    )


def _ellipticity_report(cf, surf, grid, k, l) -> IdentityReport:
    lo, _ = pointwise_ellipticity(cf, surf.w, k, l)
    return IdentityReport(
        "ellipticity",
        {"min_field": lo, "k": float(k), "l": float(l)},
        lo,
        0.0,
        1.0,
        grid={"domain": grid.domain.describe(), "n_r": grid.n_r, "n_phi": grid.n_phi},
        kind="inequality",
    )


def verify_reports(dump, ids, flag_choice: str, k: int, l: int) -> list[IdentityReport]:
    grid, dom, c = dump.grid, dump.domain, dump.c
    try:
        surf = dump.surface()
    except SpacelikeError as exc:
        return [_invalid(i, grid, f"surface is not space-like: {exc}") for i in ids]
    cf = curvature_field(surf)
    pf = p_field_graph(surf, cf)
    out = []
    for ident in ids:
        try:
            if ident == "54":
                out += [eval_fundamental(surf, cf, pf, dom, grid, c, f) for f in _flags(flag_choice)]
            elif ident == "55":
                out += [eval_soap_bubble(surf, cf, pf, dom, grid, c, f) for f in _flags(flag_choice)]
            elif ident == "56":
                out += [eval_heintze_karcher(surf, cf, pf, dom, grid, c, f) for f in _flags(flag_choice)]
            elif ident == "57":
                out.append(eval_hk_deficit(grid))
            elif ident == "l33":
                out.append(eval_lemma33(surf, cf, dom, grid, k, l, c))
            elif ident == "212":
                out.append(_gauss_map_report(cf, grid))
            else:
                out.append(_ellipticity_report(cf, surf, grid, k, l))
        except (PreconditionError, ValueError) as exc:
            out.append(_invalid(ident, grid, str(exc)))
    return out


def report_passes(rep: IdentityReport, tol: float) -> bool:
    return bool(rep.valid) and math.isfinite(rep.relative_residual) and rep.relative_residual <= tol


def records_csv(reports: list[IdentityReport], tol: float, header: dict) -> str:
    import csv
    import io

    rows = []
    for rep in reports:
        rec = rep.to_record()
        rec["pass"] = int(report_passes(rep, tol))
        rows.append(rec)
    keys: list[str] = []
    for rec in rows:
        keys += [k for k in rec if k not in keys]
    buf = io.StringIO()
    for key in sorted(header):
        buf.write(f"# {key} = {json.dumps(header[key], sort_keys=True)}\n")
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n", restval="")
    writer.writeheader()
    for rec in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in rec.items()})
    return buf.getvalue()


def cmd_verify(cfg: RunConfig) -> int:
    v = cfg.values
    try:
        dump = read_surface(v["input"])
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load surface {v['input']}: {exc}") from None
    reports = verify_reports(dump, v["id"], v["flag"], v["k"], v["l"])
    header = cfg.header()
    header.update(n_r=dump.grid.n_r, n_phi=dump.grid.n_phi, domain=domain_spec(dump.domain), tol=v["tol"])
    with _open_out(v["out"]) as fh:
        fh.write(records_csv(reports, v["tol"], header))
    ok = all(report_passes(r, v["tol"]) for r in reports)
    return EXIT_OK if ok else EXIT_VERIFY


def _family(cfg: RunConfig):
    v = cfg.values
    if v["family"] == "ellipse":
        return ellipse_family(v["ratios"])
    if v["family"] == "fourier":
        return fourier_family(tuple(v["amplitudes"]), seed=v["seed"])
    return disk_family()


def plot_files(rows, header_text: str) -> dict[str, str]:
    """One two-column text file per sweep column: family parameter against the value."""
    files = {}
    records = [r.to_csv_row() for r in rows]
    for col in SWEEP_COLUMNS:
        if col == "family_param":
            continue
        lines = [f"# {ln}" for ln in header_text.splitlines()]
        lines.append(f"# family_param {col}")
        for rec in records:
            lines.append(f"{rec['family_param']!r} {float(rec[col])!r}")
        files[col] = "\n".join(lines) + "\n"
    return files


def cmd_sweep(cfg: RunConfig) -> int:
    v = cfg.values
    members = _family(cfg)
    rows = domain_sweep(members, v["n_r"], v["n_phi"], solver_config(cfg), workers=v["workers"])
    head = cfg.header()
    head["family"] = v["family"]
    header_text = "\n".join(f"{k} = {json.dumps(head[k], sort_keys=True)}" for k in sorted(head))
    text = sweep_csv(rows, header_text)
    with _open_out(v["out"]) as fh:
        fh.write(text)
    plot_dir = v["plot_dir"] or (str(Path(v["out"]).parent) if v["out"] != "-" else None)
    if plot_dir:
        stem = Path(v["out"]).stem if v["out"] != "-" else f"sweep_{v['family']}"
        Path(plot_dir).mkdir(parents=True, exist_ok=True)
        for col, body in plot_files(rows, header_text).items():
            (Path(plot_dir) / f"{stem}.{col}.dat").write_text(body)
    if not all(r.converged for r in rows):
        return EXIT_NONCONV
    ok = all(r.satisfied(b) for r in rows for b in ("bound53", "bound54a", "bound54c"))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_selftest(cfg: RunConfig) -> int:
    v = cfg.values
    print(f"seed = {v['seed']}")
    results = run_suites(v["seed"], v["samples"], v["suite"])
    for res in results:
        print(res.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


HANDLERS = {"gen": cmd_gen, "solve": cmd_solve, "verify": cmd_verify, "sweep": cmd_sweep, "selftest": cmd_selftest}


# --- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spacelike", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sp = sub.add_parser(command)
        sp.add_argument("--config", help="TOML file with default settings")
        sp.add_argument("-v", "--verbose", action="store_true")
        for p in PARAMS:
            if command not in p.commands:
                continue
            opt = "--" + p.name.replace("_", "-")
            aliases = [opt] if opt == "--" + p.name else [opt, "--" + p.name]
            if p.kind is bool:
                sp.add_argument(*aliases, dest=p.name, action="store_const", const=True, default=None, help=p.help)
            elif p.kind in (_floats, _strings):
                sp.add_argument(*aliases, dest=p.name, default=None, help=p.help, action="append" if p.name == "id" else "store")
            else:
                sp.add_argument(*aliases, dest=p.name, default=None, help=p.help)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    if isinstance(flags.get("id"), list):
        flags["id"] = [i for chunk in flags["id"] for i in _strings(chunk)]
    try:
        file_values = load_config_file(args.config) if args.config else {}
        cfg = resolve(args.command, flags, file_values)
        return HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
