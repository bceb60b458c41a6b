"""Command-line front end: JSON configs, benchmark runs, CSV/JSON artifacts.

Subcommands:
  run      execute one Parareal run from a config file
  compare  run several coarse-propagator variants on the same problem
  preset   dump a built-in benchmark configuration as JSON

Exit codes: 0 converged, 1 error, 2 iteration cap reached without
convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import (
    ConstantSource,
    FourierSource,
    LinearDAEModel,
    PWMSource,
    SinusoidSource,
    SourceTerm,
    SumSource,
    buck_preset,
)
from .mpde import MPDECoarsePropagator
from .parareal import (
    DirectPropagator,
    PararealConfig,
    PararealReport,
    parareal_run,
    parse_variant,
)

_FLOAT_FMT = "{:.17g}"  # round-trip exact for 64-bit floats


class ConfigError(ValueError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """The config document is not well-formed JSON."""


class ValidationError(ConfigError):
    """The config has invalid values; the message names the field path."""


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "."
    solution: bool = True
    convergence: bool = True
    basis: bool = False
    report: bool = True


@dataclass(frozen=True)
class RunConfig:
    model: LinearDAEModel
    parareal: PararealConfig
    outputs: OutputConfig
    preset_name: str | None = None


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise ValidationError(f"{path}: {message}")


def _check_keys(obj: dict, allowed: set[str], path: str):
    for key in obj:
        if key not in allowed:
            raise ValidationError(f"{path}.{key}: unknown key")


def _get_number(obj: dict, key: str, path: str, default=None, required=False):
    if key not in obj:
        if required:
            raise ValidationError(f"{path}.{key}: missing required field")
        return default
    val = obj[key]
    _require(isinstance(val, (int, float)) and not isinstance(val, bool),
             f"{path}.{key}", "expected a number")
    _require(math.isfinite(val), f"{path}.{key}", "must be finite")
    return float(val)


def _get_int(obj: dict, key: str, path: str, default=None, required=False):
    if key not in obj:
        if required:
            raise ValidationError(f"{path}.{key}: missing required field")
        return default
    val = obj[key]
    _require(isinstance(val, int) and not isinstance(val, bool),
             f"{path}.{key}", "expected an integer")
    return val


def _get_vector(obj: dict, key: str, path: str, required=True):
    if key not in obj:
        if required:
            raise ValidationError(f"{path}.{key}: missing required field")
        return None
    val = obj[key]
    _require(isinstance(val, list) and len(val) > 0,
             f"{path}.{key}", "expected a non-empty array of numbers")
    for i, entry in enumerate(val):
        _require(isinstance(entry, (int, float)) and not isinstance(entry, bool)
                 and math.isfinite(entry),
                 f"{path}.{key}[{i}]", "expected a finite number")
    return np.array(val, dtype=float)


def _get_matrix(obj: dict, key: str, path: str):
    if key not in obj:
        raise ValidationError(f"{path}.{key}: missing required field")
    val = obj[key]
    _require(isinstance(val, list) and len(val) > 0,
             f"{path}.{key}", "expected a non-empty array of rows")
    rows = []
    for i, row in enumerate(val):
        _require(isinstance(row, list) and len(row) == len(val),
                 f"{path}.{key}[{i}]", "matrix must be square")
        for j, entry in enumerate(row):
            _require(isinstance(entry, (int, float))
                     and not isinstance(entry, bool) and math.isfinite(entry),
                     f"{path}.{key}[{i}][{j}]", "expected a finite number")
        rows.append([float(v) for v in row])
    return np.array(rows)


def _source_from_spec(spec, ndim: int, path: str) -> SourceTerm:
    _require(isinstance(spec, dict), path, "expected an object")
    kind = spec.get("kind")
    _require(isinstance(kind, str), f"{path}.kind", "missing or not a string")
    if kind == "pwm":
        _check_keys(spec, {"kind", "amplitude", "switching_frequency",
                           "duty_cycle", "channel"}, path)
        amplitude = _get_number(spec, "amplitude", path, required=True)
        freq = _get_number(spec, "switching_frequency", path, required=True)
        duty = _get_number(spec, "duty_cycle", path, required=True)
        channel = _get_int(spec, "channel", path, default=0)
        _require(freq > 0, f"{path}.switching_frequency", "must be positive")
        _require(0.0 < duty < 1.0, f"{path}.duty_cycle", "must lie in (0, 1)")
        _require(0 <= channel < ndim, f"{path}.channel",
                 f"must lie in [0, {ndim})")
        return PWMSource(amplitude=amplitude, switching_frequency=freq,
                         duty_cycle=duty, channel=channel, ndim=ndim)
    if kind == "constant":
        _check_keys(spec, {"kind", "values"}, path)
        values = _get_vector(spec, "values", path)
        _require(values.size == ndim, f"{path}.values",
                 f"expected length {ndim}")
        return ConstantSource(values)
    if kind == "sinusoid":
        _check_keys(spec, {"kind", "amplitude", "frequency", "phase",
                           "offset", "channel"}, path)
        freq = _get_number(spec, "frequency", path, required=True)
        _require(freq > 0, f"{path}.frequency", "must be positive")
        channel = _get_int(spec, "channel", path, default=0)
        _require(0 <= channel < ndim, f"{path}.channel",
                 f"must lie in [0, {ndim})")
        return SinusoidSource(
            amplitude=_get_number(spec, "amplitude", path, required=True),
            frequency=freq,
            phase=_get_number(spec, "phase", path, default=0.0),
            offset=_get_number(spec, "offset", path, default=0.0),
            channel=channel, ndim=ndim)
    if kind == "fourier":
        _check_keys(spec, {"kind", "period", "dc", "harmonics"}, path)
        period = _get_number(spec, "period", path, required=True)
        _require(period > 0, f"{path}.period", "must be positive")
        dc = _get_vector(spec, "dc", path)
        _require(dc.size == ndim, f"{path}.dc", f"expected length {ndim}")
        harmonics = spec.get("harmonics", [])
        _require(isinstance(harmonics, list), f"{path}.harmonics",
                 "expected an array")
        coeffs = np.zeros((len(harmonics), ndim), dtype=complex)
        for m, entry in enumerate(harmonics):
            hpath = f"{path}.harmonics[{m}]"
            _require(isinstance(entry, dict), hpath, "expected an object")
            _check_keys(entry, {"real", "imag"}, hpath)
            re = _get_vector(entry, "real", hpath)
            im = _get_vector(entry, "imag", hpath)
            _require(re.size == ndim and im.size == ndim, hpath,
                     f"real/imag must have length {ndim}")
            coeffs[m] = re + 1j * im
        return FourierSource(period=period, dc=dc, coefficients=coeffs)
    if kind == "sum":
        _check_keys(spec, {"kind", "terms"}, path)
        terms = spec.get("terms")
        _require(isinstance(terms, list) and len(terms) > 0,
                 f"{path}.terms", "expected a non-empty array")
        return SumSource(tuple(
            _source_from_spec(t, ndim, f"{path}.terms[{i}]")
            for i, t in enumerate(terms)))
    raise ValidationError(f"{path}.kind: unknown source kind {kind!r}")


def _model_from_spec(spec, path: str) -> LinearDAEModel:
    _require(isinstance(spec, dict), path, "expected an object")
    _check_keys(spec, {"A", "B", "x0", "t0", "t_end", "source"}, path)
    A = _get_matrix(spec, "A", path)
    B = _get_matrix(spec, "B", path)
    _require(B.shape == A.shape, f"{path}.B", "must match the shape of A")
    n = A.shape[0]
    x0 = _get_vector(spec, "x0", path)
    _require(x0.size == n, f"{path}.x0", f"expected length {n}")
    t0 = _get_number(spec, "t0", path, default=0.0)
    t_end = _get_number(spec, "t_end", path, required=True)
    _require(t_end > t0, f"{path}.t_end", "must exceed t0")
    if "source" not in spec:
        raise ValidationError(f"{path}.source: missing required field")
    source = _source_from_spec(spec["source"], n, f"{path}.source")
    return LinearDAEModel(A=A, B=B, source=source, x0=x0, t0=t0, t_end=t_end)


def _parareal_from_spec(spec, model: LinearDAEModel, path: str) -> PararealConfig:
    _require(isinstance(spec, dict), path, "expected an object")
    _check_keys(spec, {"N", "coarse_dt", "fine_dt", "tol", "max_iter",
                       "coarse_variant", "workers", "jump_mode"}, path)
    n = _get_int(spec, "N", path, required=True)
    _require(n >= 1, f"{path}.N", "must be >= 1")
    span = model.t_end - model.t0
    coarse_dt = _get_number(spec, "coarse_dt", path, default=span / n)
    fine_dt = _get_number(spec, "fine_dt", path, required=True)
    _require(coarse_dt > 0, f"{path}.coarse_dt", "must be positive")
    _require(fine_dt > 0, f"{path}.fine_dt", "must be positive")
    _require(fine_dt <= coarse_dt, f"{path}.fine_dt",
             "must not exceed coarse_dt")
    tol = _get_number(spec, "tol", path, default=1e-6)
    _require(tol > 0, f"{path}.tol", "must be positive")
    max_iter = _get_int(spec, "max_iter", path, default=50)
    _require(max_iter >= 1, f"{path}.max_iter", "must be >= 1")
    variant = spec.get("coarse_variant", "classical")
    _require(isinstance(variant, str), f"{path}.coarse_variant",
             "expected a string")
    try:
        parse_variant(variant)
    except ValueError as exc:
        raise ValidationError(f"{path}.coarse_variant: {exc}") from None
    workers = _get_int(spec, "workers", path, default=None)
    if workers is not None:
        _require(workers >= 1, f"{path}.workers", "must be >= 1")
    jump_mode = spec.get("jump_mode", "successive")
    _require(jump_mode in ("successive", "defect"), f"{path}.jump_mode",
             "must be 'successive' or 'defect'")
    return PararealConfig(n_windows=n, coarse_dt=coarse_dt, fine_dt=fine_dt,
                          tol=tol, max_iter=max_iter, coarse_variant=variant,
                          worker_count=workers, jump_mode=jump_mode)


def _outputs_from_spec(spec, path: str) -> OutputConfig:
    if spec is None:
        return OutputConfig()
    _require(isinstance(spec, dict), path, "expected an object")
    _check_keys(spec, {"directory", "solution", "convergence", "basis",
                       "report"}, path)
    directory = spec.get("directory", ".")
    _require(isinstance(directory, str), f"{path}.directory",
             "expected a string")
    flags = {}
    for key, default in (("solution", True), ("convergence", True),
                         ("basis", False), ("report", True)):
        val = spec.get(key, default)
        _require(isinstance(val, bool), f"{path}.{key}", "expected a boolean")
        flags[key] = val
    return OutputConfig(directory=directory, **flags)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    _require(isinstance(doc, dict), "$", "top level must be an object")
    _check_keys(doc, {"preset", "model", "parareal", "outputs"}, "$")
    has_preset = "preset" in doc
    has_model = "model" in doc
    if has_preset and has_model:
        raise ValidationError("$.model: give either a preset or an inline "
                              "model, not both")
    if not has_preset and not has_model:
        raise ValidationError("$.model: a preset name or an inline model "
                              "is required")
    preset_name = None
    if has_preset:
        preset_name = doc["preset"]
        _require(isinstance(preset_name, str), "$.preset", "expected a string")
        if preset_name != "buck":
            raise ValidationError(f"$.preset: unknown preset {preset_name!r}")
        model = buck_preset()
    else:
        model = _model_from_spec(doc["model"], "$.model")
    if "parareal" not in doc:
        raise ValidationError("$.parareal: missing required section")
    parareal = _parareal_from_spec(doc["parareal"], model, "$.parareal")
    outputs = _outputs_from_spec(doc.get("outputs"), "$.outputs")
    return RunConfig(model=model, parareal=parareal, outputs=outputs,
                     preset_name=preset_name)


def preset_config_document(name: str) -> dict:
    """Built-in benchmark configuration as a JSON-ready dictionary."""
    if name != "buck":
        raise ValidationError(f"unknown preset {name!r}")
    model = buck_preset()
    pwm = model.source
    return {
        "model": {
            "A": model.A.tolist(),
            "B": model.B.tolist(),
            "x0": model.x0.tolist(),
            "t0": model.t0,
            "t_end": model.t_end,
            "source": {
                "kind": "pwm",
                "amplitude": pwm.amplitude,
                "switching_frequency": pwm.switching_frequency,
                "duty_cycle": pwm.duty_cycle,
                "channel": pwm.channel,
            },
        },
        "parareal": {
            "N": 40,
            "coarse_dt": 3e-4,
            "fine_dt": 1e-6,
            "tol": 1e-6,
            "max_iter": 50,
            "coarse_variant": "classical",
        },
        "outputs": {
            "directory": "out",
            "solution": True,
            "convergence": True,
            "basis": False,
            "report": True,
        },
    }


def _fmt(value: float) -> str:
    return _FLOAT_FMT.format(float(value))


def _write_solution_csv(path: Path, model: LinearDAEModel,
                        report: PararealReport, fine_dt: float):
    """Fine trajectory of the final iterate, window by window.

    Window boundaries appear twice: the last row of window n holds the
    fine end value, the first row of window n+1 the corrected iterate, so
    the residual jump is visible in the data.
    """
    fine = DirectPropagator(model, fine_dt)
    boundaries = report.sync_points
    n_states = model.n_states
    header = "t," + ",".join(f"x_{j+1}" for j in range(n_states))
    lines = [header]
    for i in range(1, len(boundaries)):
        times, states, _ = fine.trajectory(report.sync_values[i - 1],
                                           boundaries[i - 1], boundaries[i])
        for t, row in zip(times, states):
            lines.append(",".join([_fmt(t)] + [_fmt(v) for v in row]))
    path.write_text("\n".join(lines) + "\n")


def _write_convergence_csv(path: Path, report: PararealReport):
    lines = ["iteration,jump,cumulative_cost_units"]
    led = report.ledger
    cum = 0.0
    for i, jump in enumerate(report.jump_history, start=1):
        cum += (report.fine_solves_per_iteration[i - 1]
                * led.fine_system_size
                + report.coarse_solves_per_iteration[i - 1]
                * led.coarse_system_size) / led.n_states
        lines.append(f"{i},{_fmt(jump)},{_fmt(cum)}")
    path.write_text("\n".join(lines) + "\n")


def _write_basis_csv(path: Path, basis, n_samples: int = 512):
    tau, vals = basis.sample_grid(n_samples)
    header = "tau," + ",".join(f"w_{k+1}" for k in range(vals.shape[1]))
    lines = [header]
    for t, row in zip(tau, vals):
        lines.append(",".join([_fmt(t)] + [_fmt(v) for v in row]))
    path.write_text("\n".join(lines) + "\n")


def report_document(report: PararealReport, wall_time: float) -> dict:
    return {
        "variant": report.variant_label,
        "iterations": report.iterations,
        "converged": report.converged,
        "tolerance": report.tolerance,
        "jump_mode": report.jump_mode,
        "final_jump": report.jump_history[-1] if report.jump_history else None,
        "jump_history": report.jump_history,
        "ledger": report.ledger.as_dict(),
        "cost_units": report.ledger.cost_units,
        "wall_time_seconds": wall_time,
    }


def verify_ledger(report: PararealReport, config: PararealConfig,
                  model: LinearDAEModel) -> list[str]:
    """Re-derive the cost arithmetic from the ledger; returns problems."""
    led = report.ledger
    problems = []
    k = report.iterations
    window = (model.t_end - model.t0) / config.n_windows
    fine_per_window = round(window / config.fine_dt)
    if led.fine_solves_sequential != k * fine_per_window:
        problems.append(
            f"fine_solves_sequential={led.fine_solves_sequential}, expected "
            f"iterations*steps_per_window = {k}*{fine_per_window}")
    if led.fine_solves_total != k * config.n_windows * fine_per_window:
        problems.append(f"fine_solves_total={led.fine_solves_total} "
                        "inconsistent with window count")
    coarse_steps = max(1, round(window / config.coarse_dt))
    if led.coarse_solves_sequential != k * config.n_windows * coarse_steps:
        problems.append(
            f"coarse_solves_sequential={led.coarse_solves_sequential}, "
            f"expected {k}*{config.n_windows}*{coarse_steps}")
    expected_cost = (led.fine_solves_sequential * led.fine_system_size
                     + led.coarse_solves_sequential * led.coarse_system_size)
    if led.cost_units * led.n_states != expected_cost:
        problems.append(f"cost_units={led.cost_units} does not match "
                        "solves weighted by system size")
    return problems


def run_benchmark(config: RunConfig, out_dir: str | None = None,
                  verify: bool = False) -> tuple[int, PararealReport]:
    """Execute one run and write the requested artifacts.

    Returns (exit_code, report); exit code 2 means the iteration cap was
    reached before the jump tolerance.
    """
    t_begin = time.perf_counter()
    report = parareal_run(config.model, config.parareal)
    wall = time.perf_counter() - t_begin

    out = Path(out_dir if out_dir is not None else config.outputs.directory)
    out.mkdir(parents=True, exist_ok=True)
    if config.outputs.solution:
        _write_solution_csv(out / "solution.csv", config.model, report,
                            config.parareal.fine_dt)
    if config.outputs.convergence:
        _write_convergence_csv(out / "convergence.csv", report)
    if config.outputs.basis:
        variant = parse_variant(config.parareal.coarse_variant)
        if variant.kind == "mpde":
            prop = MPDECoarsePropagator(config.model, config.parareal.coarse_dt,
                                        n_basis=variant.order)
            _write_basis_csv(out / "basis.csv", prop.basis)
    if config.outputs.report:
        doc = report_document(report, wall)
        (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n")

    if verify:
        problems = verify_ledger(report, config.parareal, config.model)
        if problems:
            for p in problems:
                print(f"ledger mismatch: {p}", file=sys.stderr)
            return 1, report
        print("ledger verified: cost arithmetic is self-consistent")
    return (0 if report.converged else 2), report


def compare_variants(config: RunConfig, variants: list[str],
                     out_dir: str | None = None) -> tuple[str, list[dict]]:
    """Run each variant on the same model/partition; emit a summary table.

    Per-variant failures are recorded in the table without aborting the
    remaining runs.
    """
    rows = []
    for label in variants:
        row = {"variant": label}
        try:
            cfg = PararealConfig(
                n_windows=config.parareal.n_windows,
                coarse_dt=config.parareal.coarse_dt,
                fine_dt=config.parareal.fine_dt,
                tol=config.parareal.tol,
                max_iter=config.parareal.max_iter,
                coarse_variant=label,
                worker_count=config.parareal.worker_count,
                jump_mode=config.parareal.jump_mode,
            )
            report = parareal_run(config.model, cfg)
            row.update(
                iterations=report.iterations,
                converged=report.converged,
                final_jump=report.jump_history[-1],
                cost_units=report.ledger.cost_units,
                fine_solves=report.ledger.fine_solves_sequential,
                coarse_solves=report.ledger.coarse_solves_sequential,
                coarse_system_size=report.ledger.coarse_system_size,
                error="",
            )
        except Exception as exc:  # record and keep going
            row.update(iterations=None, converged=False, final_jump=None,
                       cost_units=None, fine_solves=None, coarse_solves=None,
                       coarse_system_size=None, error=str(exc))
        rows.append(row)

    cols = ["variant", "iterations", "converged", "final_jump", "cost_units",
            "fine_solves", "coarse_solves", "coarse_system_size", "error"]
    widths = {c: max(len(c), *(len(_cell(r.get(c))) for r in rows))
              for c in cols}
    header = "  ".join(c.ljust(widths[c]) for c in cols)
    sep = "  ".join("-" * widths[c] for c in cols)
    body = ["  ".join(_cell(r.get(c)).ljust(widths[c]) for c in cols)
            for r in rows]
    table = "\n".join([header, sep] + body)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = [",".join(cols)]
        for r in rows:
            lines.append(",".join(_cell(r.get(c), csv=True) for c in cols))
        (out / "comparison.csv").write_text("\n".join(lines) + "\n")
    return table, rows


def _cell(value, csv: bool = False) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return _fmt(value) if csv else f"{value:.3e}"
    return str(value)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parapwm",
        description="Parallel-in-time simulation of PWM-driven linear "
                    "systems with interchangeable coarse propagators.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one Parareal run")
    p_run.add_argument("--config", required=True, help="JSON config file")
    p_run.add_argument("--variant", help="override the coarse variant "
                       "(classical | dc | fft:M | mpde:N)")
    p_run.add_argument("--workers", type=int, help="fine-sweep thread count")
    p_run.add_argument("--out", help="output directory override")
    p_run.add_argument("--verify-ledger", action="store_true",
                       help="check the cost accounting for self-consistency")

    p_cmp = sub.add_parser("compare", help="run several coarse variants")
    p_cmp.add_argument("--config", required=True, help="JSON config file")
    p_cmp.add_argument("--variants", required=True,
                       help="comma-separated list, e.g. classical,dc,mpde:3")
    p_cmp.add_argument("--out", help="output directory override")

    p_pre = sub.add_parser("preset", help="dump a built-in benchmark config")
    p_pre.add_argument("name", choices=["buck"])
    p_pre.add_argument("--print", action="store_true", dest="print_json",
                       help="write the preset JSON to stdout (default)")
    return parser


def _apply_overrides(config: RunConfig, variant: str | None,
                     workers: int | None) -> RunConfig:
    if variant is None and workers is None:
        return config
    if variant is not None:
        try:
            parse_variant(variant)
        except ValueError as exc:
            raise ValidationError(f"--variant: {exc}") from None
    par = config.parareal
    new_par = PararealConfig(
        n_windows=par.n_windows,
        coarse_dt=par.coarse_dt,
        fine_dt=par.fine_dt,
        tol=par.tol,
        max_iter=par.max_iter,
        coarse_variant=variant if variant is not None else par.coarse_variant,
        worker_count=workers if workers is not None else par.worker_count,
        jump_mode=par.jump_mode,
    )
    return RunConfig(model=config.model, parareal=new_par,
                     outputs=config.outputs, preset_name=config.preset_name)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "preset":
            doc = preset_config_document(args.name)
            print(json.dumps(doc, indent=2))
            return 0

        config_text = Path(args.config).read_text()
        config = parse_config(config_text)

        if args.command == "run":
            config = _apply_overrides(config, args.variant, args.workers)
            code, report = run_benchmark(config, out_dir=args.out,
                                         verify=args.verify_ledger)
            status = "converged" if report.converged else "NOT converged"
            print(f"{report.variant_label}: {status} after "
                  f"{report.iterations} iterations, final jump "
                  f"{report.jump_history[-1]:.3e}, "
                  f"cost {report.ledger.cost_units} units")
            return code

        # compare
        variants = [v.strip() for v in args.variants.split(",") if v.strip()]
        if not variants:
            raise ValidationError("--variants: expected at least one variant")
        out_dir = args.out if args.out is not None else config.outputs.directory
        table, rows = compare_variants(config, variants, out_dir=out_dir)
        print(table)
        if any(r["error"] for r in rows):
            return 1
        return 0 if all(r["converged"] for r in rows) else 2

    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
