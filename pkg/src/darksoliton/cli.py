"""Command-line interface.

Every command writes ``<stem>.report.json`` and ``<stem>.manifest.json``; the
solvers add ``<stem>.profile.csv`` and ``sweep`` adds ``<stem>.sweep.csv``.
Exit codes: 0 success, 1 invalid configuration, 2 solver failure (outputs
are still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from . import __version__
from .analysis import (
    apriori_bounds,
    conserved_quantities,
    local_limit_sweep,
    oscillation_predicate,
    oscillation_scan,
    thresholds,
)
from .black import BlackOptions, minimize_odd
from .errors import (
    ChainBrokenError,
    DarkSolitonError,
    EtaTouchesOneError,
    InvalidParameterError,
    SolverError,
    TauTooLargeError,
    UnavailableTransformError,
)
from .gray import SolverOptions, continue_family, explicit_local_profile, kernel_at, solve_gray
from .io import read_profile_csv, write_json, write_profile_csv, write_sweep_csv
from .kernels import FAMILIES, SONIC_SPEED, KernelSpec, check_hypotheses
from .spectral import Grid

log = logging.getLogger("darksoliton")

COMMANDS = ("solve-gray", "solve-black", "check", "sweep", "thresholds", "oscillation")


@dataclass
class RunConfig:
    command: str
    family: str = "contact"
    lam: Optional[float] = None
    beta: Optional[float] = None
    speed: Optional[float] = None
    box_length: float = 40.0
    points: int = 4096
    method: str = "newton"
    tol: float = 1e-9
    max_iter: Optional[int] = None
    damping: float = 0.5
    out: Optional[str] = None
    lambdas: Optional[list] = None
    black: bool = False
    workers: int = 1
    profile_file: Optional[str] = None

    @property
    def stem(self) -> str:
        return self.out or self.command.replace("-", "_")

    def kernel_spec(self) -> KernelSpec:
        params = {}
        if self.lam is not None:
            params["lambda"] = self.lam
        if self.beta is not None:
            params["beta"] = self.beta
        return KernelSpec(self.family, params)

    def grid(self) -> Grid:
        return Grid(self.box_length, self.points)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(method=self.method, damping=self.damping, tol=self.tol, max_iter=self.max_iter)

    def validate(self):
        if self.command not in COMMANDS:
            raise InvalidParameterError(f"unknown command {self.command!r}")
        if self.family not in FAMILIES:
            raise InvalidParameterError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if self.points < 64 or self.points & (self.points - 1):
            raise InvalidParameterError("points must be a power of two >= 64")
        if self.box_length <= 0:
            raise InvalidParameterError("box length must be positive")
        if self.tol <= 0:
            raise InvalidParameterError("tol must be positive")
        if self.workers < 1:
            raise InvalidParameterError("workers must be >= 1")
        if self.family not in ("contact",) and self.lam is None and self.command in ("solve-gray", "solve-black", "check"):
            raise InvalidParameterError(f"--lambda is required for the {self.family} family")
        c = self.speed
        if c is not None and not 0 <= c < SONIC_SPEED:
            raise InvalidParameterError(f"speed {c} outside [0, sqrt 2)")
        if self.command == "solve-gray" and (c is None or c == 0):
            raise InvalidParameterError("solve-gray needs a speed 0 < c < sqrt 2 (use solve-black for c = 0)")
        if self.command == "solve-black" and c not in (None, 0):
            raise InvalidParameterError("solve-black computes c = 0 only")
        if self.command == "sweep":
            if not self.lambdas:
                raise InvalidParameterError("sweep needs --lambdas")
            if not self.black and not c:
                raise InvalidParameterError("gray sweep needs a speed 0 < c < sqrt 2, or pass --black")
        if self.command == "oscillation" and not self.profile_file:
            raise InvalidParameterError("oscillation needs --profile-file")
        SolverOptions(method=self.method, damping=self.damping, tol=self.tol, max_iter=self.max_iter)


# -- solve helpers (module level so worker processes can pickle them) -----------

def _solve_gray_at(spec_dict, lam, c, grid_args, opts_dict):
    """Direct solve from the local soliton, falling back to a lambda continuation."""
    spec = KernelSpec.from_dict(spec_dict)
    grid = Grid(*grid_args)
    opts = SolverOptions(**opts_dict)
    kernel = kernel_at(spec, lam)
    init = explicit_local_profile(c, grid).eta
    try:
        return solve_gray(kernel, c, init, opts)
    except (SolverError, EtaTouchesOneError) as exc:
        if lam == 0:
            raise
        log.info("direct solve failed (%s); continuing from lambda = 0", exc)
    steps = [lam * k / 8 for k in range(1, 9)]
    _, profile, report = continue_family(spec, c, steps, opts, grid)[-1]
    return profile, report


def _solve_black_at(spec_dict, lam, grid_args, tol, max_iter):
    spec = KernelSpec.from_dict(spec_dict)
    grid = Grid(*grid_args)
    opts = BlackOptions(tol=tol, **({"max_iter": max_iter} if max_iter else {}))
    return minimize_odd(kernel_at(spec, lam), grid, None, opts)


def _sweep_entry(args):
    spec_dict, lam, c, grid_args, opts_dict, black = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            if black:
                profile, report = _solve_black_at(spec_dict, lam, grid_args, opts_dict["tol"], opts_dict["max_iter"])
            else:
                profile, report = _solve_gray_at(spec_dict, lam, c, grid_args, opts_dict)
            return lam, profile, report, None
        except (SolverError, EtaTouchesOneError, DarkSolitonError) as exc:
            profile = getattr(exc, "profile", None)
            report = getattr(exc, "report", None)
            return lam, profile, report, f"{type(exc).__name__}: {exc}"


# -- commands -------------------------------------------------------------------

def _diagnostics(profile, kernel):
    return conserved_quantities(profile, kernel).to_dict()


def _write_profile_outputs(cfg, kernel, profile, report, outputs, error=None):
    body = {"solve": report.to_dict() if report is not None else None}
    if profile is not None:
        outputs.append(str(write_profile_csv(f"{cfg.stem}.profile.csv", profile)))
        body["diagnostics"] = _diagnostics(profile, kernel)
        body["oscillation"] = oscillation_scan(profile).to_dict()
    if error:
        body["error"] = error
    outputs.append(str(write_json(f"{cfg.stem}.report.json", body)))


def cmd_solve_gray(cfg, outputs):
    spec = cfg.kernel_spec()
    lam = cfg.lam if cfg.lam is not None else 0.0
    kernel = kernel_at(spec, lam)
    opts = asdict(cfg.solver_options())
    try:
        profile, report = _solve_gray_at(spec.to_dict(), lam, cfg.speed, (cfg.box_length, cfg.points), opts)
    except ChainBrokenError as exc:
        last = exc.results[-1] if exc.results else (None, None, None)
        _write_profile_outputs(cfg, kernel, last[1], last[2], outputs, str(exc))
        raise
    except SolverError as exc:
        _write_profile_outputs(cfg, kernel, exc.profile, exc.report, outputs, str(exc))
        raise
    _write_profile_outputs(cfg, kernel, profile, report, outputs)
    print(f"converged in {report.iterations} iterations, residual {report.residual_sup:.3e}, "
          f"eta_max {report.eta_max:.6f}")


def cmd_solve_black(cfg, outputs):
    spec = cfg.kernel_spec()
    lam = cfg.lam if cfg.lam is not None else 0.0
    kernel = kernel_at(spec, lam)
    try:
        profile, report = _solve_black_at(spec.to_dict(), lam, (cfg.box_length, cfg.points), cfg.tol, cfg.max_iter)
    except SolverError as exc:
        _write_profile_outputs(cfg, kernel, exc.profile, exc.report, outputs, str(exc))
        raise
    _write_profile_outputs(cfg, kernel, profile, report, outputs)
    print(f"converged in {report.iterations} iterations, residual {report.residual_sup:.3e}")


def cmd_check(cfg, outputs):
    c = cfg.speed or 0.0
    kernel = kernel_at(cfg.kernel_spec(), cfg.lam if cfg.lam is not None else 0.0)
    hyp = check_hypotheses(kernel, c)
    body = {"hypotheses": hyp.to_dict()}
    try:
        m_mu, m_ts = apriori_bounds(kernel, c)
        body["apriori_bounds"] = {"M_mu": m_mu, "M_tau_sigma": m_ts}
    except TauTooLargeError as exc:
        body["apriori_bounds"] = {"error": str(exc)}
    try:
        strict, strong = oscillation_predicate(kernel, c)
        body["oscillation_predicate"] = {"strict": strict, "strong": strong}
    except UnavailableTransformError as exc:
        body["oscillation_predicate"] = {"error": str(exc)}
    outputs.append(str(write_json(f"{cfg.stem}.report.json", body)))
    flags = ", ".join(f"{k}={'yes' if v else 'no'}" for k, v in hyp.flags.items())
    print(f"m = {hyp.to_dict()['m']}, kappa = {hyp.to_dict()['kappa']}, c_L = {hyp.landau_speed:.6f}\n{flags}")


def cmd_sweep(cfg, outputs):
    spec = cfg.kernel_spec()
    c = 0.0 if cfg.black else cfg.speed
    grid_args = (cfg.box_length, cfg.points)
    opts = asdict(cfg.solver_options())
    jobs = [(spec.to_dict(), float(lam), c, grid_args, opts, cfg.black) for lam in cfg.lambdas]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_sweep_entry, jobs))
    else:
        results = [_sweep_entry(job) for job in jobs]
    rows, entries, failed = [], [], []
    for lam, profile, report, error in results:
        entry = {"lambda": lam, "solve": report.to_dict() if report is not None else None, "error": error}
        if error:
            failed.append(lam)
        if profile is not None:
            dist = local_limit_sweep(spec, c, [lam], [profile])[0]
            energy = conserved_quantities(profile, kernel_at(spec, lam)).energy
            rows.append({**dist, "energy": energy, "residual": report.residual_sup if report else math.nan})
            entry.update(dist)
        entries.append(entry)
    outputs.append(str(write_sweep_csv(f"{cfg.stem}.sweep.csv", rows)))
    outputs.append(str(write_json(f"{cfg.stem}.report.json", {"entries": entries})))
    for row in rows:
        print(f"lambda {row['lambda']:<10g} distance_eta {row['distance_eta']:.3e} distance_u {row['distance_u']:.3e}")
    if failed:
        raise SolverError(f"no convergence for lambda in {failed}")


def cmd_thresholds(cfg, outputs):
    c = cfg.speed or 0.0
    report = thresholds(cfg.kernel_spec(), c)
    outputs.append(str(write_json(f"{cfg.stem}.report.json", report.to_dict())))
    for key in ("lambda_c", "lambda_tilde_c", "lambda_c_beta", "discriminant_class"):
        val = getattr(report, key)
        if val is not None:
            print(f"{key} = {val}")


def cmd_oscillation(cfg, outputs):
    profile = read_profile_csv(cfg.profile_file, cfg.speed)
    kernel = None
    if cfg.family != "contact" or cfg.lam is not None:
        kernel = kernel_at(cfg.kernel_spec(), cfg.lam if cfg.lam is not None else 0.0)
    report = oscillation_scan(profile, kernel)
    outputs.append(str(write_json(f"{cfg.stem}.report.json", report.to_dict())))
    print(f"sign changes of eta': {report.sign_changes_of_eta_prime}, "
          f"oscillation triples: {len(report.oscillation_triples)}")


HANDLERS = {
    "solve-gray": cmd_solve_gray,
    "solve-black": cmd_solve_black,
    "check": cmd_check,
    "sweep": cmd_sweep,
    "thresholds": cmd_thresholds,
    "oscillation": cmd_oscillation,
}


def run(cfg: RunConfig) -> int:
    try:
        cfg.validate()
    except (InvalidParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    outputs = []
    code = 0
    try:
        HANDLERS[cfg.command](cfg, outputs)
    except (SolverError, EtaTouchesOneError) as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        code = 2
    except (InvalidParameterError, ValueError, DarkSolitonError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    manifest = f"{cfg.stem}.manifest.json"
    write_json(manifest, {"config": asdict(cfg), "outputs": sorted(outputs), "exit_code": code,
                          "version": __version__})
    return code


# -- argument parsing -----------------------------------------------------------

def _lambda_list(text):
    return [float(v) for v in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="darksoliton", description="Dark solitons of the nonlocal GP equation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(p):
        p.add_argument("--config", help="JSON file with option values; explicit flags win")
        p.add_argument("--family", choices=FAMILIES, default=S)
        p.add_argument("--lambda", dest="lam", type=float, default=S)
        p.add_argument("--beta", type=float, default=S)
        p.add_argument("--speed", type=float, default=S)
        p.add_argument("--out", default=S, help="output path stem")

    def solver(p):
        p.add_argument("--box-length", dest="box_length", type=float, default=S)
        p.add_argument("--points", type=int, default=S)
        p.add_argument("--method", choices=("newton", "fixed_point"), default=S)
        p.add_argument("--tol", type=float, default=S)
        p.add_argument("--max-iter", dest="max_iter", type=int, default=S)
        p.add_argument("--damping", type=float, default=S)

    for name, helptext in (("solve-gray", "compute a gray soliton"), ("solve-black", "compute a black soliton")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        solver(p)
    p = sub.add_parser("check", help="report kernel hypotheses and constants")
    common(p)
    p = sub.add_parser("sweep", help="distances to the local soliton along lambda")
    common(p)
    solver(p)
    p.add_argument("--lambdas", type=_lambda_list, default=S, help="comma separated lambda values")
    p.add_argument("--black", action="store_true", default=S, help="sweep black solitons (c = 0)")
    p.add_argument("--workers", type=int, default=S)
    p = sub.add_parser("thresholds", help="lambda thresholds for a kernel family")
    common(p)
    p = sub.add_parser("oscillation", help="scan a stored profile for oscillations")
    common(p)
    p.add_argument("--profile-file", dest="profile_file", default=S)
    return parser


def config_from_args(argv=None) -> tuple[RunConfig, bool]:
    """Defaults, then the --config file, then explicit flags."""
    args = vars(build_parser().parse_args(argv))
    verbose = args.pop("verbose", False)
    command = args.pop("command")
    values = {}
    path = args.pop("config", None)
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidParameterError(f"cannot read config {path}: {exc}") from exc
        names = {f.name for f in fields(RunConfig)}
        aliases = {"lambda": "lam", "box-length": "box_length", "max-iter": "max_iter", "profile-file": "profile_file"}
        for key, val in data.items():
            key = aliases.get(key, key.replace("-", "_"))
            if key not in names or key == "command":
                raise InvalidParameterError(f"unknown config key {key!r}")
            values[key] = val
    values.update(args)
    if isinstance(values.get("lambdas"), str):
        values["lambdas"] = _lambda_list(values["lambdas"])
    return RunConfig(command=command, **values), verbose


def main(argv=None) -> int:
    try:
        cfg, verbose = config_from_args(argv)
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
