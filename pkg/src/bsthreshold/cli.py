"""Command-line front end.

Exit codes: 0 success, 1 domain failure (no root, no advantage, failed fit),
2 input error (malformed files, schema violations, dimension caps).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .advantage import (
    SECONDS_PER_DAY,
    DomainError,
    NoAdvantageError,
    advantage_threshold,
    calibrate_cost_prefactor,
    curve_fig3d,
    hardness_boundary_curve,
    separation_curves,
    truncation_order_curve,
)
from .charfit import (
    DecayHistogram,
    EfficiencyBudget,
    FitError,
    HomScan,
    Stage,
    TransmissionScan,
    budget_rate,
    corrected_visibility,
    fit_beta,
    fit_hom_scan,
    fit_lifetime,
    fit_propagation_loss,
    linewidth_ghz,
)
from .distinguishability import build_uniform
from .interference import brute_force_distribution, distribution_to_csv, haar_unitary
from .permanent import NormalizedPermanent, perm_naive, perm_ryser
from .scenario import ScenarioFile
from .tables import CurveTable

OUT_DIR_ENV = "BSTHRESHOLD_OUT_DIR"
FIGURES = ("fig3d", "figS7", "figS8a", "figS8b", "figS9")

EXIT_OK, EXIT_DOMAIN, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    pass


# -- parsing helpers ---------------------------------------------------------

_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_REAL = re.compile(rf"[+-]?{_NUM}")
_IMAG = re.compile(rf"(?P<im>[+-]?(?:{_NUM})?)i")
_FULL = re.compile(rf"(?P<re>[+-]?{_NUM})(?P<im>[+-](?:{_NUM})?)i")


def _coef(text: str) -> float:
    return float(text + "1") if text in ("", "+", "-") else float(text)


def parse_complex(cell: str) -> complex:
    """Parse ``a``, ``bi`` or ``a+bi``; a bare ``i`` means ``1i``."""
    s = cell.strip()
    if _REAL.fullmatch(s):
        return complex(float(s), 0.0)
    if m := _IMAG.fullmatch(s):
        return complex(0.0, _coef(m["im"]))
    if m := _FULL.fullmatch(s):
        return complex(float(m["re"]), _coef(m["im"]))
    raise ValueError(f"cannot parse complex number {cell!r}")


def _data_rows(path: Path):
    """Yield (line_number, cells) for non-comment, non-blank CSV lines."""
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, next(csv.reader([line]))


def _header_meta(path: Path) -> dict:
    meta = {}
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") and "=" in line:
                key, _, value = line[1:].partition("=")
                meta[key.strip()] = value.strip()
    return meta


def read_matrix_csv(path) -> np.ndarray:
    path = Path(path)
    rows = []
    for lineno, cells in _data_rows(path):
        try:
            rows.append([parse_complex(c) for c in cells])
        except ValueError:
            raise InputError(f"{path}: line {lineno}: cannot parse matrix entries {cells}") from None
    if not rows:
        raise InputError(f"{path}: no matrix rows")
    n = len(rows)
    for i, r in enumerate(rows):
        if len(r) != n:
            raise InputError(f"{path}: matrix is not square (row {i + 1} has {len(r)} entries, {n} rows)")
    return np.array(rows, dtype=complex)


def read_numeric_table(path, columns: list[str], optional: tuple[str, ...] = ()) -> dict[str, np.ndarray]:
    """Read a headed CSV with required and optional numeric columns."""
    path = Path(path)
    rows = _data_rows(path)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise InputError(f"{path}: empty file") from None
    header = [h.strip() for h in header]
    allowed = columns + list(optional)
    if header[: len(columns)] != columns or any(h not in allowed for h in header):
        raise InputError(f"{path}: line {lineno}: expected header {','.join(columns)}"
                         f"{'[,' + ','.join(optional) + ']' if optional else ''}, got {','.join(header)}")
    data = {h: [] for h in header}
    for lineno, cells in rows:
        if len(cells) != len(header):
            raise InputError(f"{path}: line {lineno}: expected {len(header)} columns, got {len(cells)}")
        try:
            values = [float(c) for c in cells]
        except ValueError:
            raise InputError(f"{path}: line {lineno}: non-numeric value in {cells}") from None
        for h, v in zip(header, values):
            data[h].append(v)
    if not data[columns[0]]:
        raise InputError(f"{path}: no data rows")
    return {h: np.array(v) for h, v in data.items()}


def read_budget_csv(path, rep_rate: float | None = None) -> EfficiencyBudget:
    path = Path(path)
    rows = _data_rows(path)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise InputError(f"{path}: empty file") from None
    if [h.strip() for h in header] != ["stage", "efficiency", "uncertainty"]:
        raise InputError(f"{path}: line {lineno}: expected header stage,efficiency,uncertainty")
    stages = []
    for lineno, cells in rows:
        if len(cells) != 3:
            raise InputError(f"{path}: line {lineno}: expected 3 columns, got {len(cells)}")
        try:
            stages.append(Stage(cells[0].strip(), float(cells[1]), float(cells[2])))
        except ValueError as exc:
            raise InputError(f"{path}: line {lineno}: {exc}") from None
    if not stages:
        raise InputError(f"{path}: budget has no stages")
    if rep_rate is None:
        try:
            rep_rate = float(_header_meta(path)["rep_rate_hz"])
        except (KeyError, ValueError):
            raise InputError(f"{path}: missing '# rep_rate_hz = ...' header (or pass --rep-rate)") from None
    return EfficiencyBudget(stages, rep_rate)


def _load_params(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: parameters must be a JSON object")
    return data


def _check_keys(params: dict, allowed: set, source) -> None:
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise InputError(f"{source}: unknown parameter keys: {', '.join(unknown)}")


def _load_scenario(args) -> ScenarioFile:
    sf = ScenarioFile.load(args.scenario) if args.scenario else ScenarioFile()
    d = sf.to_dict()
    if args.n_min is not None:
        d["n_min"] = args.n_min
    if args.n_max is not None:
        d["n_max"] = args.n_max
    if args.log_base is not None:
        d["log_base"] = args.log_base
    if args.out_dir is not None:
        d["out_dir"] = args.out_dir
    return ScenarioFile.from_dict(d)


def _out_dir(sf: ScenarioFile) -> Path:
    out = Path(sf.out_dir or os.environ.get(OUT_DIR_ENV, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _base_meta(sf: ScenarioFile, figure: str) -> dict:
    meta = {"tool": "bsthreshold", "version": __version__, "figure": figure}
    if "SOURCE_DATE_EPOCH" in os.environ:
        meta["timestamp"] = int(os.environ["SOURCE_DATE_EPOCH"])
    meta.update(sf.meta())
    return meta


def _fmt(x: float) -> str:
    if isinstance(x, complex):
        if x.imag == 0:
            x = x.real
        else:
            return f"{x.real:.12g}{x.imag:+.12g}i"
    return f"{x:.12g}"


# -- subcommands ---------------------------------------------------------------

def cmd_perm(args) -> int:
    m = read_matrix_csv(args.matrix_file)
    n = m.shape[0]
    t0 = time.perf_counter()
    if args.engine == "naive":
        p = perm_naive(m)
    else:
        p = perm_ryser(m, threads=args.threads)
    wall = time.perf_counter() - t0
    norm = NormalizedPermanent.from_permanent(p, n)
    print(f"perm = {_fmt(p)}")
    print(f"perm/n! = {_fmt(norm.value)}")
    print(f"log|perm/n!| = {_fmt(norm.log_magnitude)}")
    print(f"n = {n}")
    print(f"engine = {args.engine}")
    print(f"wall_time_s = {wall:.6f}")
    return EXIT_OK


def _curves(sf: ScenarioFile, figure: str, threads: int) -> dict[str, CurveTable]:
    s = sf.scenario
    ns = sf.n_values
    if figure == "fig3d":
        top, bottom = curve_fig3d(s, sf.sources, ns, threads=threads)
        return {"fig3d_top": top, "fig3d_bottom": bottom}
    if figure == "figS7":
        return {"figS7": hardness_boundary_curve(s, ns)}
    if figure == "figS8a":
        return {"figS8a": truncation_order_curve(s, ns)}
    if figure == "figS8b":
        try:
            res = advantage_threshold(s, sf.n_min, sf.n_max, threads=threads)
            classical, experimental = res.classical_curve, res.experimental_curve
            extra = {"n_star": res.n_star, "eta_star": res.eta_star}
        except NoAdvantageError as exc:
            classical, experimental = exc.classical_curve, exc.experimental_curve
            extra = {"n_star": None, "eta_star": None, "status": "no advantage in range"}
        t = CurveTable(["N", "M", "N_s", "k_max", "eta_ceiling", "eta_min_experiment"], meta=extra)
        for crow, erow in zip(classical.rows, experimental.rows):
            t.add_row(*crow, erow[-1])
        return {"figS8b": t}
    if figure == "figS9":
        return {"figS9": separation_curves(sf.sources, ns)}
    raise InputError(f"unknown figure {figure!r}")


def cmd_curves(args) -> int:
    sf = _load_scenario(args)
    out = _out_dir(sf)
    tables = _curves(sf, args.figure, args.threads)
    for name, table in tables.items():
        figure_meta = {k: v for k, v in table.meta.items() if not k.startswith("scenario.")}
        table.meta = {**_base_meta(sf, args.figure), "panel": name, **figure_meta}
        path = table.write(out / f"{name}.csv")
        print(path)
    return EXIT_OK


def cmd_threshold(args) -> int:
    sf = _load_scenario(args)
    for k, v in sf.to_dict().items():
        print(f"# {k} = {json.dumps(v)}")
    try:
        res = advantage_threshold(sf.scenario, sf.n_min, sf.n_max, threads=args.threads)
    except NoAdvantageError as exc:
        print(f"no advantage in range: {exc}")
        return EXIT_DOMAIN
    print(f"N_star = {res.n_star}")
    print(f"eta_star = {res.eta_star:.6f}")
    print(f"eta_ceiling_at_N_star = {res.ceiling_at_n_star:.6f}")
    print(f"M_at_N_star = {sf.scenario.modes(res.n_star)}")
    return EXIT_OK


def _fit_hom(data_file, params) -> dict:
    _check_keys(params, {"R", "T", "epsilon", "g2"}, "hom params")
    cols = read_numeric_table(data_file, ["theta_deg", "a0"], optional=("sigma",))
    scan = HomScan(cols["theta_deg"], cols["a0"], cols.get("sigma"),
                   **{k: float(v) for k, v in params.items()})
    f = fit_hom_scan(scan)
    out = {
        "parameters": {"A_m": f.A_m, "A_c": f.A_c, "phi_deg": f.phi_deg, "V_raw": f.V_raw},
        "uncertainties": {},
        "residual_norm": f.residual_norm,
        "warnings": list(f.warnings),
    }
    if params:
        cv = corrected_visibility(f.V_raw, scan.g2, scan.R, scan.T, scan.epsilon)
        out["parameters"]["V"] = cv.V
        out["parameters"]["V_over_unity"] = cv.over_unity
        out["warnings"].extend(cv.warnings)
    return out


def _fit_beta(data_file, params) -> dict:
    _check_keys(params, {"gamma_ghz", "gamma_per_ns"}, "beta params")
    if "gamma_ghz" in params:
        gamma = float(params["gamma_ghz"])
    elif "gamma_per_ns" in params:
        gamma = linewidth_ghz(float(params["gamma_per_ns"]))
    else:
        raise InputError("beta fit needs 'gamma_ghz' or 'gamma_per_ns' in the params file")
    cols = read_numeric_table(data_file, ["detuning_ghz", "transmission"])
    f = fit_beta(TransmissionScan(cols["detuning_ghz"], cols["transmission"]), gamma)
    return {
        "parameters": {"beta": f.beta, "gamma_d_ghz": f.gamma_d, "chi": f.chi,
                       "resonance_offset_ghz": f.resonance_offset, "gamma_ghz": gamma},
        "uncertainties": {"beta_halfwidth_95": f.beta_halfwidth},
        "residual_norm": f.residual_norm,
        "warnings": f.warnings,
    }


def _fit_lifetime(data_file, params) -> dict:
    _check_keys(params, {"irf_width_ns"}, "lifetime params")
    cols = read_numeric_table(data_file, ["time_ns", "counts"])
    f = fit_lifetime(DecayHistogram(cols["time_ns"], cols["counts"], float(params.get("irf_width_ns", 0.0))))
    return {
        "parameters": {"gamma_per_ns": f.gamma, "amplitude": f.amplitude, "offset": f.offset, "t0_ns": f.t0},
        "uncertainties": {"gamma_per_ns": f.gamma_stderr},
        "residual_norm": f.residual_norm,
        "warnings": f.warnings,
    }


def _fit_loss(data_file, params) -> dict:
    _check_keys(params, set(), "loss params")
    cols = read_numeric_table(data_file, ["length_mm", "intensity"])
    f = fit_propagation_loss(np.column_stack([cols["length_mm"], cols["intensity"]]))
    return {
        "parameters": {"loss_db_per_mm": f.loss_db_per_mm, "intercept_db": f.intercept_db},
        "uncertainties": {},
        "residual_norm": f.residual_norm,
        "warnings": f.warnings,
    }


_FITTERS = {"hom": _fit_hom, "beta": _fit_beta, "lifetime": _fit_lifetime, "loss": _fit_loss}


def cmd_fit(args) -> int:
    params = _load_params(args.params)
    try:
        result = _FITTERS[args.kind](args.data_file, params)
    except FitError as exc:
        print(json.dumps({"kind": args.kind, "error": str(exc)}, indent=2))
        return EXIT_DOMAIN
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{args.kind} fit: {exc}") from None
    result = {"kind": args.kind, **result}
    text = json.dumps(result, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK


def cmd_budget(args) -> int:
    budget = read_budget_csv(args.budget_file, args.rep_rate)
    rate, unc = budget_rate(budget)
    print(f"{'stage':<24}{'efficiency':>12}{'uncertainty':>13}{'cumulative':>12}")
    for s, cum in zip(budget.stages, budget.cumulative()):
        print(f"{s.name:<24}{s.efficiency:>12.4f}{s.uncertainty:>13.4f}{cum:>12.4f}")
    print(f"repetition rate = {budget.rep_rate / 1e6:.3f} MHz")
    print(f"overall efficiency = {float(np.prod([s.efficiency for s in budget.stages])):.4f}")
    print(f"expected rate = {rate / 1e6:.1f} +/- {unc / 1e6:.1f} MHz")
    print(f"expected rate (full precision) = {rate:.6g} +/- {unc:.6g} Hz")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    sf = _load_scenario(args)
    c_low, c_high, c_mid = calibrate_cost_prefactor(sf.scenario, args.target_onset)
    print(f"target plateau onset N = {args.target_onset}")
    print(f"cost exponent a = {sf.scenario.cost_a:g} (held fixed)")
    print(f"cost prefactor c in ({c_low:.6g}, {c_high:.6g}]")
    print(f"suggested c = {c_mid:.6g}")
    check = truncation_order_curve(sf.scenario.replace(cost_c=c_mid), range(2, args.target_onset + 5), ())
    budget = f"plateau_onset_{sf.scenario.runtime_budget / SECONDS_PER_DAY:g}d"
    print(f"check: onset with suggested c = {check.meta[budget]}")
    return EXIT_OK


def cmd_distribution(args) -> int:
    try:
        inp = tuple(int(c) for c in args.input.split("-"))
    except ValueError:
        raise InputError(f"cannot parse input occupation {args.input!r}") from None
    if sum(inp) < 1:
        raise InputError("input occupation has no photons")
    u = haar_unitary(len(inp), args.seed)
    S = build_uniform(sum(inp), args.overlap ** 2)
    dist = brute_force_distribution(u, inp, S)
    text = distribution_to_csv(dist)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")

    scen = argparse.ArgumentParser(add_help=False)
    scen.add_argument("--scenario", help="JSON scenario file (defaults used when omitted)")
    scen.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or .)")
    scen.add_argument("--n-min", type=int)
    scen.add_argument("--n-max", type=int)
    scen.add_argument("--log-base", choices=("e", "2", "10"))

    p = argparse.ArgumentParser(prog="bsthreshold", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("perm", parents=[common], help="permanent of a CSV matrix")
    s.add_argument("matrix_file")
    s.add_argument("--engine", choices=("ryser", "naive"), default="ryser")
    s.set_defaults(func=cmd_perm)

    s = sub.add_parser("curves", parents=[common, scen], help="write curve tables for a figure")
    s.add_argument("--figure", choices=FIGURES, required=True)
    s.set_defaults(func=cmd_curves)

    s = sub.add_parser("threshold", parents=[common, scen], help="quantum-advantage threshold (N*, eta*)")
    s.set_defaults(func=cmd_threshold)

    s = sub.add_parser("fit", help="fit a characterization measurement")
    s.add_argument("kind", choices=tuple(_FITTERS))
    s.add_argument("data_file")
    s.add_argument("--params", help="JSON file with fixed parameters")
    s.add_argument("--out", help="also write the JSON result here")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("budget", help="expected photon rate from an efficiency budget")
    s.add_argument("budget_file")
    s.add_argument("--rep-rate", type=float, help="repetition rate in Hz (overrides the file header)")
    s.set_defaults(func=cmd_budget)

    s = sub.add_parser("calibrate", parents=[scen], help="cost prefactor placing the k = N-1 plateau onset")
    s.add_argument("--target-onset", type=int, default=52)
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("distribution", help="brute-force output distribution for uniform overlap")
    s.add_argument("--input", required=True, help="input occupation, dash separated (e.g. 1-1-1-0-0)")
    s.add_argument("--overlap", type=float, required=True, help="pairwise overlap x = sqrt(V)")
    s.add_argument("--seed", type=int, default=0, help="Haar unitary seed")
    s.add_argument("--out")
    s.set_defaults(func=cmd_distribution)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
