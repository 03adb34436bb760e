"""Command-line entry point: ``preqrisk <subcommand> [flags]``.

Exit status is 0 on success, 1 for usage or validation errors and 2 for
runtime failures. Every subcommand reads from standard input when its input
path is ``-`` (the default) and writes its primary artifact to standard
output unless told otherwise, so stages can be piped together.
"""

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import calibration, dependence, predictors, scoring, series, simlab, tailrisk
from .errors import ConfigurationError, ParseError, PreqriskError, ValidationError

SCHEMA_VERSION = 1


class UsageError(ConfigurationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"expected key = value, got {raw.strip()!r}", line=lineno)
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


# ---------------------------------------------------------------- input helpers


def _open_text(path):
    if path in (None, "-"):
        return io.StringIO(sys.stdin.read())
    with open(path, newline="") as fh:
        return io.StringIO(fh.read())


def _header(buf):
    first = buf.readline()
    buf.seek(0)
    return [h.strip() for h in first.strip().split(",")]


def load_series(path, kind="auto", delimiter=",", date_column="date", price_column="price"):
    """Return values from a price file, a return file or a ``k,value`` column."""
    buf = _open_text(path)
    head = _header(buf) if delimiter == "," else []
    if kind == "auto":
        if head[:2] == ["date", "return"]:
            kind = "returns"
        elif head[:1] == ["k"] and len(head) == 2:
            kind = "values"
        else:
            kind = "prices"
    if kind == "returns":
        return series.read_returns(buf, delimiter)
    if kind == "values":
        rows = list(csv.reader(buf))
        try:
            vals = [float(r[1]) for r in rows[1:] if r]
        except (ValueError, IndexError):
            raise ParseError("malformed value column")
        return np.asarray(vals)
    return series.returns(series.load_prices(buf, date_column, price_column, delimiter))


def _values(obj):
    return obj.values if isinstance(obj, series.ReturnSeries) else np.asarray(obj, dtype=float)


def load_binary(path):
    """0/1 sequence from ``k,a`` CSV, a prediction trace, or a bare column."""
    buf = _open_text(path)
    rows = [r for r in csv.reader(buf) if r]
    if not rows:
        raise ParseError("empty input", line=1)
    head = [h.strip() for h in rows[0]]
    body = rows[1:]
    try:
        if head == ["k", "prediction", "realized", "exceeded"]:
            return dependence.indicators_from_flags([int(r[3]) for r in body])
        if head == ["k", "a"]:
            return np.array([int(r[1]) for r in body])
        return np.array([int(r[0]) for r in rows])
    except (ValueError, IndexError):
        raise ParseError("binary input must hold 0/1 integers")


def read_ci_table(path):
    """Parse ``ci-table`` output into ``{(gamma, length): (t1, t2)}``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head = rows[0]
    lengths = [int(h.split("_")[1]) for h in head[1::2]]
    out = {}
    for row in rows[1:]:
        g = float(row[0])
        for i, L in enumerate(lengths):
            out[(g, L)] = (float(row[1 + 2 * i]), float(row[2 + 2 * i]))
    return out


def _emit(text, path=None):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _json(obj):
    return json.dumps({"schema_version": SCHEMA_VERSION, **obj}, sort_keys=True, indent=2) + "\n"


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _outdir(args):
    d = Path(args.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


# ---------------------------------------------------------------- subcommands


def cmd_returns(args):
    r = series.returns(series.load_prices(_open_text(args.input), args.date_column, args.price_column, args.delimiter))
    _emit(r.to_json() + "\n" if args.format == "json" else r.to_csv(), args.output)


def _build_predictor(args):
    p = predictors.make_predictor(args.predictor, args.beta, args.seed)
    if p.stochastic and getattr(p, "seed", None) is None:
        raise UsageError("--seed is required for a stochastic predictor")
    return p


def _calibration_summary(trace, from_n, window):
    out = {}
    if trace.target == predictors.MEAN:
        out["martingale_ratio"] = calibration.summarize(calibration.mean_calibration(trace), from_n)
        return out
    freq = calibration.running_frequency(trace)
    out["relative_frequency"] = calibration.summarize(freq, from_n)
    if 0 < trace.target < 1 and len(trace) >= 3:
        out["lil"] = calibration.summarize(calibration.lil_statistic(trace), from_n)
    if window and len(trace) >= window:
        out["windowed_frequency"] = calibration.summarize(calibration.windowed_frequency(trace, window))
    return out


def cmd_backtest(args):
    _need(args, "predictor")
    data = load_series(args.input, args.input_kind)
    p = _build_predictor(args)
    trace = predictors.run_predictor(p, data)
    out = _outdir(args)
    (out / "trace.csv").write_text(trace.to_csv())
    if trace.target == predictors.MEAN:
        (out / "martingale_ratio.csv").write_text(calibration.mean_calibration(trace).to_csv())
    else:
        (out / "frequency.csv").write_text(calibration.running_frequency(trace).to_csv())
        if 0 < trace.target < 1 and len(trace) >= 3:
            (out / "lil.csv").write_text(calibration.lil_statistic(trace).to_csv())
        if args.window and len(trace) >= args.window:
            (out / "windowed_frequency.csv").write_text(calibration.windowed_frequency(trace, args.window).to_csv())
    summary = {
        "predictor": args.predictor,
        "target": trace.target,
        "steps": len(trace),
        "calibration": _calibration_summary(trace, args.from_n, args.window),
    }
    _emit(_json(summary))


def cmd_calibrate(args):
    target = predictors.MEAN if args.kind == "mean" else args.beta
    if target is None:
        raise UsageError("--beta is required for quantile statistics")
    trace = predictors.read_trace(_open_text(args.input), target)
    if args.kind == "frequency":
        cal = calibration.running_frequency(trace)
    elif args.kind == "lil":
        cal = calibration.lil_statistic(trace)
    elif args.kind == "windowed":
        cal = calibration.windowed_frequency(trace, args.window)
    else:
        cal = calibration.mean_calibration(trace)
    if args.csv:
        Path(args.csv).write_text(cal.to_csv())
    _emit(_json(calibration.summarize(cal, args.from_n)), args.output)


def cmd_independence(args):
    _need(args, "beta")
    a = load_binary(args.input)
    interval = None
    if args.table:
        table = read_ci_table(args.table)
        key = next((k for k in table if math.isclose(k[0], args.gamma) and k[1] == a.size), None)
        if key is None:
            raise ValidationError(f"table has no row for gamma={args.gamma}, length={a.size}")
        interval = table[key]
    elif args.seed is None:
        raise UsageError("--seed is required unless --table supplies the interval")
    res = dependence.independence_test(a, args.beta, args.gamma, args.reps, args.seed, interval, args.workers)
    _emit(_json(res.to_dict()), args.output)


def cmd_ci_table(args):
    _need(args, "beta", "seed")
    lengths = _ints(args.lengths)
    gammas = _floats(args.gammas)
    table = dependence.ci_table(args.beta, lengths, gammas, args.reps, args.seed, args.workers)
    buf = io.StringIO()
    buf.write("gamma," + ",".join(f"t1_{L},t2_{L}" for L in lengths) + "\n")
    for g in gammas:
        cells = []
        for L in lengths:
            t1, t2 = table[g][L]
            cells += [f"{t1!r}", f"{t2!r}"]
        buf.write(f"{g!r}," + ",".join(cells) + "\n")
    _emit(buf.getvalue(), args.output)


def cmd_compare(args):
    _need(args, "a", "b", "beta")
    ta = predictors.read_trace(_open_text(args.a), args.beta)
    tb = predictors.read_trace(_open_text(args.b), args.beta)
    _emit(scoring.compare(ta, tb, args.beta, args.window).to_csv(), args.output)


def _grid(args):
    return (args.kappa_min, args.kappa_max, args.kappa_step)


def cmd_tail_fit(args):
    x = _values(load_series(args.input, args.input_kind))
    fit = series.tail_fit(x, args.side, args.fraction, _grid(args))
    _emit(_json(fit.to_dict()), args.output)


def cmd_cvar(args):
    _need(args, "beta")
    x = _values(load_series(args.input, args.input_kind))
    if args.negate:
        x = -x
    if args.method == "empirical":
        est = tailrisk.cvar_of(x, args.beta)
    elif args.method == "cmvar":
        est = tailrisk.cmvar(x, args.beta)
    else:
        _need(args, "eta")
        curve = tailrisk.empirical_quantile_curve(x)
        if args.method == "truncated":
            est = tailrisk.cvar_truncated(curve, args.beta, args.eta)
        else:
            kappa = args.kappa
            source = "given"
            if kappa is None:
                kappa = series.tail_fit(x, "right", args.fraction, _grid(args)).kappa
                source = "tail_fit"
            q_eta = float(curve(args.eta))
            est = tailrisk.cvar_power_tail(curve, q_eta, kappa, args.beta, args.eta)
            est.assumptions["kappa_source"] = source
    out = est.to_dict()
    out["assumptions"]["negated"] = bool(args.negate)
    out["method"] = args.method
    _emit(_json(out), args.output)


def cmd_simulate(args):
    _need(args, "seed")
    if args.model == "markov":
        _need(args, "beta", "theta")
        a = simlab.sample_markov(simlab.MarkovSpec(args.beta, args.theta, args.length, args.seed))
        text = "k,a\n" + "".join(f"{i},{v}\n" for i, v in enumerate(a, start=1))
        _emit(text, args.output)
    elif args.model == "sv":
        s = simlab.sample_sv(simlab.SVSpec(args.length, args.seed, args.rho, args.vol_of_vol, args.scale))
        _emit(s.returns.to_csv(), args.output)
        if args.oracle:
            betas = _floats(args.oracle_betas)
            Path(args.oracle).write_text(json.dumps(s.oracle_dict(betas), sort_keys=True) + "\n")
    else:
        _need(args, "kappa")
        x = simlab.sample_pareto(args.kappa, args.scale_pareto, args.length, args.seed)
        _emit("k,value\n" + "".join(f"{i},{float(v)!r}\n" for i, v in enumerate(x, start=1)), args.output)


def cmd_report(args):
    _need(args, "predictor", "beta", "seed")
    data = load_series(args.input, args.input_kind)
    trace = predictors.run_predictor(_build_predictor(args), data)
    if trace.target == predictors.MEAN:
        raise UsageError("report needs a quantile predictor")
    report = {
        "predictor": args.predictor,
        "beta": args.beta,
        "steps": len(trace),
        "calibration": _calibration_summary(trace, args.from_n, args.window),
    }
    a = dependence.indicators_from_flags(trace.exceeded)
    res = dependence.independence_test(a, args.beta, args.gamma, args.reps, args.seed, workers=args.workers)
    report["independence"] = res.to_dict()
    if args.window and len(trace) >= args.window:
        windows = []
        for end in range(args.window, len(trace) + 1, args.stride):
            r = dependence.independence_test(
                a[end - args.window:end], args.beta, args.gamma, args.reps, args.seed, workers=args.workers
            )
            windows.append(r.reject)
        report["windowed_independence"] = {
            "window": args.window,
            "stride": args.stride,
            "windows": len(windows),
            "rejections": int(sum(windows)),
        }
    if args.compare_with:
        other = predictors.make_predictor(args.compare_with, args.beta, args.seed)
        other_trace = predictors.run_predictor(other, data)
        cmp_window = min(args.window or scoring.DEFAULT_WINDOW, len(trace))
        c = scoring.compare(trace, other_trace, args.beta, cmp_window)
        report["compare"] = {
            "against": args.compare_with,
            "window": cmp_window,
            "windows": int(c.preference.size),
            "fraction_preferred": c.fraction_a,
        }
    if args.output_dir:
        out = _outdir(args)
        (out / "trace.csv").write_text(trace.to_csv())
        (out / "report.json").write_text(_json(report))
    _emit(_json(report))


# ---------------------------------------------------------------- parser


def _input_opts(p, kinds=("auto", "prices", "returns", "values")):
    p.add_argument("--input", default="-", help="input file, '-' for stdin")
    p.add_argument("--input-kind", choices=kinds, default="auto")


def _grid_opts(p):
    lo, hi, step = series.DEFAULT_KAPPA_GRID
    p.add_argument("--kappa-min", type=float, default=lo)
    p.add_argument("--kappa-max", type=float, default=hi)
    p.add_argument("--kappa-step", type=float, default=step)


def build_parser():
    parser = _Parser(prog="preqrisk", description="Prequential verification of risk forecasts.")
    parser.add_argument("--config", help="flat key = value file; flags override it")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help=argparse.SUPPRESS)
        p.add_argument("--output", default="-")
        p.set_defaults(func=func)
        return p

    p = add("returns", cmd_returns, "price CSV -> return series")
    p.add_argument("--input", default="-")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--date-column", default="date")
    p.add_argument("--price-column", default="price")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = add("backtest", cmd_backtest, "run a predictor and write trace and calibration CSVs")
    _input_opts(p)
    p.add_argument("--predictor")
    p.add_argument("--beta", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--window", type=int, default=500)
    p.add_argument("--from-n", type=int)
    p.add_argument("--output-dir", default=".")

    p = add("calibrate", cmd_calibrate, "calibration statistic of a trace")
    p.add_argument("--input", default="-")
    p.add_argument("--kind", choices=("frequency", "lil", "windowed", "mean"), default="frequency")
    p.add_argument("--beta", type=float)
    p.add_argument("--window", type=int, default=500)
    p.add_argument("--from-n", type=int)
    p.add_argument("--csv", help="also write the full n,statistic trace here")

    p = add("independence", cmd_independence, "serial-independence test of exceedances")
    p.add_argument("--input", default="-")
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--reps", type=int, default=dependence.DEFAULT_REPS)
    p.add_argument("--seed", type=int)
    p.add_argument("--table", help="ci-table CSV to read the interval from")
    p.add_argument("--workers", type=int, default=1)

    p = add("ci-table", cmd_ci_table, "simulated confidence intervals for theta-hat")
    p.add_argument("--beta", type=float)
    p.add_argument("--lengths", default="250,500,1000")
    p.add_argument("--gammas", default="0.01,0.05,0.10,0.50")
    p.add_argument("--reps", type=int, default=dependence.DEFAULT_REPS)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)

    p = add("compare", cmd_compare, "moving-window score comparison of two traces")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--beta", type=float)
    p.add_argument("--window", type=int, default=scoring.DEFAULT_WINDOW)

    p = add("tail-fit", cmd_tail_fit, "power-tail index fit")
    _input_opts(p)
    p.add_argument("--side", choices=("left", "right"), default="left")
    p.add_argument("--fraction", type=float, default=series.DEFAULT_TAIL_FRACTION)
    _grid_opts(p)

    p = add("cvar", cmd_cvar, "VaR-based tail risk estimates")
    _input_opts(p)
    p.add_argument("--beta", type=float)
    p.add_argument("--method", choices=("empirical", "power-tail", "truncated", "cmvar"), default="empirical")
    p.add_argument("--eta", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--fraction", type=float, default=series.DEFAULT_TAIL_FRACTION)
    p.add_argument("--negate", action="store_true", help="treat negated values as losses")
    _grid_opts(p)

    p = add("simulate", cmd_simulate, "synthetic data with known ground truth")
    p.add_argument("model", choices=("markov", "sv", "pareto"))
    p.add_argument("--seed", type=int)
    p.add_argument("--length", type=int, default=1500)
    p.add_argument("--beta", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--rho", type=float, default=0.95)
    p.add_argument("--vol-of-vol", type=float, default=0.2)
    p.add_argument("--scale", type=float, default=0.02)
    p.add_argument("--oracle", help="write the per-step true quantiles and mean here (sv)")
    p.add_argument("--oracle-betas", default="0.9,0.95")
    p.add_argument("--kappa", type=float)
    p.add_argument("--scale-pareto", type=float, default=1.0)

    p = add("report", cmd_report, "backtest, calibration, independence and comparison in one JSON")
    _input_opts(p)
    p.add_argument("--predictor")
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--reps", type=int, default=dependence.DEFAULT_REPS)
    p.add_argument("--seed", type=int)
    p.add_argument("--window", type=int, default=500)
    p.add_argument("--stride", type=int, default=50)
    p.add_argument("--from-n", type=int)
    p.add_argument("--compare-with", default="nonsense:low=-0.06,high=0.06")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output-dir")

    return parser, sub.choices


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser, subparsers = build_parser()
        cfg_path = _config_path(argv)
        if cfg_path:
            cfg = read_config(cfg_path)
            command = next((t for t in argv if t in subparsers), cfg.get("command"))
            if command in subparsers:
                sp = subparsers[command]
                known = {a.dest for a in sp._actions}
                unknown = sorted(set(cfg) - known - {"command"})
                if unknown:
                    raise UsageError(f"unknown config keys for {command}: {unknown}")
                flags = {a.dest for a in sp._actions if isinstance(a, argparse._StoreTrueAction)}
                for k in flags & set(cfg):
                    cfg[k] = cfg[k].lower() in ("1", "true", "yes", "on")
                sp.set_defaults(**{k: v for k, v in cfg.items() if k != "command"})
                if command not in argv:
                    argv = [command] + argv
        args = parser.parse_args(argv)
        args.func(args)
        return 0
    except PreqriskError as exc:
        print(f"preqrisk: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except SystemExit as exc:
        return int(exc.code or 0)
    except (OSError, ValueError) as exc:
        print(f"preqrisk: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
