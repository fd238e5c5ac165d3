"""Command-line interface.

Subcommands: gen, stat, calibrate, risk, rates, lb, sweep, phase.  Exit
codes: 0 success, 1 usage error, 2 budget exceeded, 3 I/O error.  Every
randomized subcommand requires an explicit --seed.  Errors are reported as
a single JSON line on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import math
import sys

from . import lower_bound
from .detectors import (
    DEFAULT_SUBSET_BUDGET,
    DetectorKind,
    DetectorTag,
    ThresholdMode,
    ThresholdSpec,
    calibrate_threshold,
    resolve_threshold,
    statistic,
)
from .errors import (
    BudgetError,
    ConfigError,
    FormatError,
    ParameterError,
    PlantedBipartiteError,
)
from .graph_model import (
    ProblemShape,
    SignalConfig,
    read_matrix,
    sample_null,
    sample_planted_uniform_support,
    write_matrix,
)
from .harness import (
    ExperimentConfig,
    emit_results,
    phase_diagram,
    power_sweep,
    result_rows,
)
from .rates import RateConstants, rate_bundle

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BUDGET = 2
EXIT_IO = 3

_RANDOMIZED = {"gen", "calibrate", "risk", "sweep"}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_shape_flags(p, required=True):
    p.add_argument("--n1", type=int, required=required)
    p.add_argument("--n2", type=int, required=required)
    p.add_argument("--k1", type=int)
    p.add_argument("--k2", type=int)


def _add_const_flags(p):
    d = RateConstants()
    p.add_argument("--c-phi", dest="c_phi", type=float, default=d.C_phi)
    p.add_argument("--c1", dest="c1", type=float, default=d.c1)
    p.add_argument("--c-delta", dest="c_delta", type=float, default=d.c_delta)
    p.add_argument("--C-delta", dest="C_delta", type=float, default=d.C_delta)
    p.add_argument("--C-eta", dest="C_eta", type=float, default=d.C_eta)
    p.add_argument("--C-star", dest="C_star", type=float, default=d.C_star)
    p.add_argument("--c-prime", dest="c_prime", type=float, default=d.c_prime)


def _consts_from(args) -> RateConstants:
    return RateConstants(
        C_phi=args.c_phi, c1=args.c1, c_delta=args.c_delta, C_delta=args.C_delta,
        C_eta=args.C_eta, C_star=args.C_star, c_prime=args.c_prime,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="planted-bipartite", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="sample a matrix and write it in text format")
    _add_shape_flags(g)
    g.add_argument("--null", action="store_true", help="sample the null model")
    g.add_argument("--p0", type=float, required=True)
    g.add_argument("--delta", type=float, default=0.0)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)

    s = sub.add_parser("stat", help="evaluate a statistic on a matrix file")
    s.add_argument("matrix", help="path to a matrix in the text format")
    s.add_argument("--p0", type=float, required=True)
    s.add_argument("--detector", default="TOTAL_DEGREE")
    s.add_argument("--tau", type=float)
    s.add_argument("--k1", type=int, help="scan size for max tests")
    s.add_argument("--budget", type=int, default=DEFAULT_SUBSET_BUDGET)
    s.add_argument("--out")

    c = sub.add_parser("calibrate", help="empirical null quantile threshold")
    _add_shape_flags(c)
    c.add_argument("--p0", type=float, required=True)
    c.add_argument("--alpha", type=float, default=0.1)
    c.add_argument("--trials", type=int, default=10_000)
    c.add_argument("--seed", type=int)
    c.add_argument("--detector", default="DELTA_STAR")
    c.add_argument("--tau", type=float)
    c.add_argument("--budget", type=int, default=DEFAULT_SUBSET_BUDGET)
    c.add_argument("--threads", type=int, default=1)
    c.add_argument("--out")
    _add_const_flags(c)

    r = sub.add_parser("risk", help="Monte Carlo risk at one signal level")
    _add_shape_flags(r)
    r.add_argument("--p0", type=float, required=True)
    r.add_argument("--delta", required=True, help="signal level (single value)")
    r.add_argument("--alpha", type=float, default=0.1)
    r.add_argument("--eta", type=float, default=0.5)
    r.add_argument("--trials", type=int, default=1000)
    r.add_argument("--seed", type=int)
    r.add_argument("--detector", default="DELTA_STAR")
    r.add_argument("--tau", type=float)
    r.add_argument("--threshold-mode", dest="threshold_mode", default="CALIBRATED",
                   choices=["CALIBRATED", "ANALYTIC"])
    r.add_argument("--budget", type=int, default=DEFAULT_SUBSET_BUDGET)
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--out")
    _add_const_flags(r)

    ra = sub.add_parser("rates", help="rate components, R, R_tilde, branch")
    _add_shape_flags(ra)
    ra.add_argument("--out")
    _add_const_flags(ra)

    lb = sub.add_parser("lb", help="second-moment lower bound quantities")
    _add_shape_flags(lb)
    lb.add_argument("--p0", type=float, required=True)
    lb.add_argument("--delta", type=float, required=True)
    lb.add_argument("--out")

    sw = sub.add_parser("sweep", help="risk over a delta grid (flags or --config)")
    _add_shape_flags(sw, required=False)
    sw.add_argument("--config", help="JSON experiment config")
    sw.add_argument("--p0", type=float)
    sw.add_argument("--delta", help="comma-separated grid of signal levels")
    sw.add_argument("--alpha", type=float, default=0.1)
    sw.add_argument("--eta", type=float, default=0.5)
    sw.add_argument("--trials", type=int, default=1000)
    sw.add_argument("--seed", type=int)
    sw.add_argument("--detector", default="DELTA_STAR")
    sw.add_argument("--tau", type=float)
    sw.add_argument("--threshold-mode", dest="threshold_mode", default="CALIBRATED",
                    choices=["CALIBRATED", "ANALYTIC"])
    sw.add_argument("--budget", type=int, default=DEFAULT_SUBSET_BUDGET)
    sw.add_argument("--threads", type=int, default=1)
    sw.add_argument("--out")
    _add_const_flags(sw)

    ph = sub.add_parser("phase", help="rate bundles over a shape grid")
    ph.add_argument("--n1", required=True, help="comma-separated values")
    ph.add_argument("--n2", required=True, help="comma-separated values")
    ph.add_argument("--k1", required=True, help="comma-separated values")
    ph.add_argument("--k2", required=True, help="comma-separated values")
    ph.add_argument("--out")
    _add_const_flags(ph)
    return parser


def _detector_kind(name: str, tau, k_scan) -> DetectorKind:
    try:
        tag = DetectorTag[name.upper().replace("-", "_")]
    except KeyError:
        raise ParameterError(f"unknown detector {name!r}") from None
    if tag is DetectorTag.DELTA_STAR or tag is DetectorTag.TOTAL_DEGREE:
        return DetectorKind(tag)
    if tau is None:
        raise ParameterError(f"detector {tag.value} requires --tau")
    if tag in (DetectorTag.MAX_TRUNC_AXIS1, DetectorTag.MAX_TRUNC_AXIS2):
        if k_scan is None:
            raise ParameterError(f"detector {tag.value} requires a scan size (--k1)")
        return DetectorKind(tag, tau=tau, k_scan=k_scan)
    return DetectorKind(tag, tau=tau)


def _shape_from(args) -> ProblemShape:
    k1 = args.k1 if args.k1 is not None else args.n1
    k2 = args.k2 if args.k2 is not None else args.n2
    return ProblemShape(args.n1, args.n2, k1, k2)


def _emit_text(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _f(v: float) -> str:
    return format(v, ".17g")


def _cmd_gen(args) -> int:
    shape = _shape_from(args)
    if args.null or args.delta == 0.0:
        A = sample_null(shape, args.p0, args.seed)
    else:
        A, _ = sample_planted_uniform_support(
            shape, SignalConfig(args.p0, args.delta), args.seed
        )
    write_matrix(A, args.out)
    return EXIT_OK


def _cmd_stat(args) -> int:
    A = read_matrix(args.matrix)
    kind = _detector_kind(args.detector, args.tau, args.k1)
    if kind.tag is DetectorTag.DELTA_STAR:
        raise ParameterError("stat requires a concrete detector, not DELTA_STAR")
    value = statistic(A, args.p0, kind, args.budget)
    _emit_text(f"statistic {_f(value)}\n", args.out)
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    shape = _shape_from(args)
    kind = _detector_kind(args.detector, args.tau, args.k1)
    h = calibrate_threshold(
        kind, shape, args.p0, args.alpha, args.trials, args.seed,
        _consts_from(args), args.budget,
    )
    _emit_text(f"threshold {_f(h)}\n", args.out)
    return EXIT_OK


def _sweep_config(args, grid) -> ExperimentConfig:
    shape = _shape_from(args)
    consts = _consts_from(args)
    return ExperimentConfig(
        shape=shape,
        p0=args.p0,
        delta_grid=tuple(grid),
        detector=_detector_kind(args.detector, args.tau, shape.k1),
        threshold=ThresholdSpec(
            mode=ThresholdMode[args.threshold_mode],
            alpha=args.alpha,
            trials=max(args.trials, 100),
            seed=args.seed,
        ),
        trials=args.trials,
        seed=args.seed,
        eta=args.eta,
        consts=consts,
        budget=args.budget,
    )


def _run_sweep(cfg: ExperimentConfig, out_path, experiment_id: str) -> int:
    kind, h = resolve_threshold(
        cfg.detector, cfg.shape, cfg.p0, cfg.threshold, cfg.consts, cfg.budget
    )
    sweep = power_sweep(cfg)
    rows = result_rows(
        dataclasses.replace(cfg, detector=kind), sweep, experiment_id, h
    )
    if out_path:
        emit_results(rows, out_path, "CSV")
        sidecar = {
            "experiment_id": experiment_id,
            "detector": kind.tag.value,
            "tau": kind.tau,
            "k_scan": kind.k_scan,
            "threshold": _f(h),
            "threshold_mode": cfg.threshold.mode.value,
            "alpha": cfg.threshold.alpha,
            "consts": dataclasses.asdict(cfg.consts),
        }
        with open(str(out_path) + ".meta.json", "w", encoding="ascii") as fh:
            json.dump(sidecar, fh, indent=2)
            fh.write("\n")
    else:
        lines = [",".join(map(str, ("delta", "type1", "type2", "risk")))]
        for row in sweep.rows:
            e = row.estimate
            lines.append(
                ",".join((_f(row.delta), _f(e.type1), _f(e.type2), _f(e.risk)))
            )
        _emit_text("\n".join(lines) + "\n", None)
    return EXIT_OK


def _cmd_risk(args) -> int:
    grid = [float(args.delta)]
    cfg = _sweep_config(args, grid)
    return _run_sweep(cfg, args.out, "risk")


def _cmd_sweep(args) -> int:
    if args.config:
        return run_config(args.config, args.out, args.seed)
    for flag in ("n1", "n2", "p0", "delta"):
        if getattr(args, flag) is None:
            raise ParameterError(f"sweep without --config requires --{flag}")
    if args.seed is None:
        raise ParameterError("randomized subcommand requires --seed")
    grid = [float(tok) for tok in str(args.delta).split(",") if tok]
    cfg = _sweep_config(args, grid)
    return _run_sweep(cfg, args.out, "sweep")


def _cmd_rates(args) -> int:
    shape = _shape_from(args)
    rb = rate_bundle(shape, _consts_from(args))
    lines = [
        f"psi12 {_f(rb.psi12)}", f"psi21 {_f(rb.psi21)}",
        f"beta12 {_f(rb.beta12)}", f"beta21 {_f(rb.beta21)}",
        f"phi12 {_f(rb.phi12)}", f"phi21 {_f(rb.phi21)}",
        f"R {_f(rb.R)}", f"R_tilde {_f(rb.R_tilde)}",
        f"branch {rb.branch.value}",
    ]
    _emit_text("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _cmd_lb(args) -> int:
    shape = _shape_from(args)
    res = lower_bound.second_moment_summary(shape, args.p0, args.delta)
    lines = [
        f"mu2 {_f(res.mu2)}",
        f"exact {_f(res.exact)}",
        f"exp_hypergeom {_f(res.exp_hypergeom)}",
        f"exp_binomial {_f(res.exp_binomial)}",
        f"risk_lb {_f(res.risk_lb)}",
    ]
    _emit_text("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _cmd_phase(args) -> int:
    def ints(s):
        return [int(tok) for tok in s.split(",") if tok]

    grid = [
        ProblemShape(n1, n2, k1, k2)
        for n1, n2, k1, k2 in itertools.product(
            ints(args.n1), ints(args.n2), ints(args.k1), ints(args.k2)
        )
        if k1 <= n1 and k2 <= n2
    ]
    rows = phase_diagram(grid, 0.25, _consts_from(args))
    lines = ["n1,n2,k1,k2,R,R_tilde,branch"]
    for shape, rb in rows:
        lines.append(
            f"{shape.n1},{shape.n2},{shape.k1},{shape.k2},"
            f"{_f(rb.R)},{_f(rb.R_tilde)},{rb.branch.value}"
        )
    _emit_text("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _config_field(doc: dict, field: str, required=True, default=None):
    if field not in doc:
        if required:
            raise ConfigError(field, "missing required field")
        return default
    return doc[field]


def load_config(path) -> ExperimentConfig:
    """Parse a JSON experiment config mirroring ExperimentConfig fields."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON in {path}: {exc}") from exc
    shape_doc = _config_field(doc, "shape")
    try:
        shape = ProblemShape(**{k: shape_doc[k] for k in ("n1", "n2", "k1", "k2")})
    except (KeyError, TypeError) as exc:
        raise ConfigError("shape", f"expected n1,n2,k1,k2: {exc}") from exc
    except ParameterError as exc:
        raise ConfigError("shape", str(exc)) from exc
    det_doc = _config_field(doc, "detector", required=False, default="DELTA_STAR")
    if isinstance(det_doc, str):
        detector = _detector_kind(det_doc, None, None)
    else:
        detector = _detector_kind(
            det_doc.get("tag", "DELTA_STAR"), det_doc.get("tau"), det_doc.get("k_scan")
        )
    thr_doc = _config_field(doc, "threshold", required=False, default={})
    try:
        threshold = ThresholdSpec(
            mode=ThresholdMode[thr_doc.get("mode", "CALIBRATED")],
            alpha=thr_doc.get("alpha", 0.1),
            trials=thr_doc.get("trials", 10_000),
            seed=thr_doc.get("seed", _config_field(doc, "seed")),
            value=thr_doc.get("value"),
        )
    except (KeyError, ParameterError) as exc:
        raise ConfigError("threshold", str(exc)) from exc
    consts_doc = _config_field(doc, "consts", required=False, default={})
    try:
        consts = RateConstants(**consts_doc)
    except (TypeError, ParameterError) as exc:
        raise ConfigError("consts", str(exc)) from exc
    delta_grid = _config_field(doc, "delta_grid")
    if not isinstance(delta_grid, list) or not delta_grid:
        raise ConfigError("delta_grid", "must be a nonempty list of numbers")
    return ExperimentConfig(
        shape=shape,
        p0=_config_field(doc, "p0"),
        delta_grid=tuple(float(d) for d in delta_grid),
        detector=detector,
        threshold=threshold,
        trials=_config_field(doc, "trials"),
        seed=_config_field(doc, "seed"),
        eta=_config_field(doc, "eta", required=False, default=0.5),
        consts=consts,
        budget=_config_field(doc, "budget", required=False, default=DEFAULT_SUBSET_BUDGET),
    )


def run_config(config_path, out_path=None, seed_override=None) -> int:
    """Execute the power sweep described by a JSON config file."""
    cfg = load_config(config_path)
    if seed_override is not None:
        cfg = dataclasses.replace(cfg, seed=seed_override)
    return _run_sweep(cfg, out_path, experiment_id=str(config_path))


_COMMANDS = {
    "gen": _cmd_gen,
    "stat": _cmd_stat,
    "calibrate": _cmd_calibrate,
    "risk": _cmd_risk,
    "rates": _cmd_rates,
    "lb": _cmd_lb,
    "sweep": _cmd_sweep,
    "phase": _cmd_phase,
}


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")
    return code


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command in _RANDOMIZED and args.command != "sweep":
            if getattr(args, "seed", None) is None:
                raise _UsageError(f"subcommand {args.command} requires --seed")
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        return _fail("usage", exc, EXIT_USAGE)
    except BudgetError as exc:
        return _fail("budget", exc, EXIT_BUDGET)
    except (ConfigError, ParameterError) as exc:
        return _fail("usage", exc, EXIT_USAGE)
    except FormatError as exc:
        return _fail("format", exc, EXIT_IO)
    except PlantedBipartiteError as exc:
        return _fail("error", exc, EXIT_USAGE)
    except OSError as exc:
        return _fail("io", exc, EXIT_IO)


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
