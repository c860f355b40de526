"""Command-line interface.

Subcommands: ``gen``, ``bound``, ``newton``, ``sep``, ``sweep`` and ``plot``.
Data goes to stdout or ``--out``; diagnostics go to stderr.

Exit codes: 0 on success, 2 when a result was produced but its
hypotheses failed (bound assumptions, or an invalid Newton certificate),
1 for any input or usage error.

Randomness comes only from ``--seed``. Without it, ``gen`` uses
:data:`DEFAULT_SEED` and ``sweep`` uses the seed stored in the preset.
"""

import argparse
import json
import os
import sys

from . import __version__
from .bounds import theorem_main_bound
from .exceptions import CertificateError, ConvergenceError, SubspacePerturbError
from .experiments import (
    PRESETS,
    SigmaRule,
    SweepConfig,
    get_preset,
    records_from_csv,
    run_sweep,
    sweep_metadata,
    write_sweep_outputs,
)
from .generators import FAMILIES, InstanceSpec, build_instance, sep_example_probe
from .linalg import as_symmetric, spectral_split
from .matio import atomic_write_bytes, matrix_to_csv, read_matrix, write_matrix
from .newton import NewtonOptions, newton_subspace
from .plotting import svg_loglog
from .separation import gap_certificate, sep_2inf_upper_probe
from .stats import summarize

DEFAULT_SEED = 0

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_HYPOTHESIS = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _emit_text(text, out):
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        atomic_write_bytes(out, text.encode("utf-8"))


def _emit_matrix(a, out):
    if out is None:
        _emit_text(matrix_to_csv(a), None)
    else:
        write_matrix(out, a)


def _load_pair(a_path, e_path):
    a = as_symmetric(read_matrix(a_path))
    e = as_symmetric(read_matrix(e_path))
    if a.shape != e.shape:
        raise UsageError(f"A is {a.shape[0]}x{a.shape[1]} but E is {e.shape[0]}x{e.shape[1]}")
    return a, e


def _record_text(d, fmt):
    if fmt == "json":
        return json.dumps(d, indent=2) + "\n"
    keys = list(d)
    vals = []
    for k in keys:
        v = d[k]
        if isinstance(v, bool):
            vals.append("true" if v else "false")
        elif v is None:
            vals.append("")
        elif isinstance(v, float):
            vals.append(repr(v))
        else:
            vals.append(str(v))
    return ",".join(keys) + "\n" + ",".join(vals) + "\n"


def cmd_gen(args):
    seed = DEFAULT_SEED if args.seed is None else args.seed
    spec = InstanceSpec(args.family, args.n, args.sigma, seed)
    if args.matrix == "probe":
        if args.family != "sep-example":
            raise UsageError("--matrix probe is only defined for the sep-example family")
        _emit_matrix(sep_example_probe(args.n), args.out)
        return EXIT_OK
    inst = build_instance(spec, args.c_cross, args.c_submult)
    mats = {"a": inst.a, "e": inst.e, "v1": inst.split.v1}
    _emit_matrix(mats[args.matrix], args.out)
    print(f"generated {args.family} n={args.n} sigma={args.sigma} seed={seed}", file=sys.stderr)
    return EXIT_OK


def cmd_bound(args):
    a, e = _load_pair(args.a, args.e)
    split = spectral_split(a, args.r)
    report = theorem_main_bound(split, e, a=a, evaluate=not args.no_evaluate)
    _emit_text(_record_text(report.to_dict(), args.format), args.out)
    if not report.assumptions_ok:
        print(f"assumptions fail: ||E||_2 = {report.e_norm:.6e} > gap/5 = {report.gap_used / 5:.6e}",
              file=sys.stderr)
        return EXIT_HYPOTHESIS
    return EXIT_OK


def cmd_newton(args):
    a, e = _load_pair(args.a, args.e)
    opts = NewtonOptions(tol=args.tol, max_iters=args.max_iters,
                         check_certificate=not args.no_certificate)
    try:
        res = newton_subspace(a, e, args.r, opts=opts)
    except CertificateError as exc:
        cert = exc.certificate
        print(f"certificate invalid: {exc}", file=sys.stderr)
        if cert is not None:
            print(json.dumps(cert.to_dict()), file=sys.stderr)
        return EXIT_HYPOTHESIS
    out = res.xhat if args.output == "xhat" else res.v1hat
    _emit_matrix(out, args.out)
    print(f"iterations={res.iters} residual={res.residual:.3e} scale={res.scale:.3e}", file=sys.stderr)
    print(json.dumps(res.certificate.to_dict()), file=sys.stderr)
    return EXIT_OK


def cmd_sep(args):
    a = as_symmetric(read_matrix(args.a))
    split = spectral_split(a, args.r)
    out = dict(gap_certificate(split).to_dict())
    if args.probe is not None:
        q = read_matrix(args.probe)
        if q.shape[0] != split.n:
            raise UsageError(f"probe has {q.shape[0]} rows, expected {split.n}")
        cols = [q[:, [j]] for j in range(q.shape[1])]
        est = sep_2inf_upper_probe(split, cols)
        out["sep2inf_upper"] = est.value
    _emit_text(_record_text(out, args.format), args.out)
    return EXIT_OK


def _sweep_config(args):
    if args.preset is not None and args.config is not None:
        raise UsageError("--preset and --config are mutually exclusive")
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            try:
                cfg = SweepConfig.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise UsageError(f"{args.config}: invalid JSON ({exc})") from exc
    elif args.preset is not None:
        cfg = get_preset(args.preset)
    else:
        raise UsageError("sweep needs --preset or --config")
    changes = {}
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.n_list is not None:
        changes["n_values"] = args.n_list
    if args.sigma is not None and args.sigma_exp is not None:
        raise UsageError("--sigma and --sigma-exp are mutually exclusive")
    if args.sigma is not None:
        changes["sigma_rule"] = SigmaRule.fixed(args.sigma)
    if args.sigma_exp is not None:
        changes["sigma_rule"] = SigmaRule.power(args.sigma_exp)
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.format is not None:
        outputs = [args.format]
        if "svg-plot" in cfg.outputs and not args.no_svg:
            outputs.append("svg-plot")
        changes["outputs"] = tuple(outputs)
    elif args.no_svg:
        changes["outputs"] = tuple(o for o in cfg.outputs if o != "svg-plot")
    return cfg.replace(**changes) if changes else cfg


def cmd_sweep(args):
    cfg = _sweep_config(args)
    prefix = args.out if args.out is not None else (cfg.name or cfg.family)
    total = len(cfg.n_values) * cfg.trials
    done = []

    def progress(rec):
        done.append(rec)
        if args.verbose:
            print(f"[{len(done)}/{total}] n={rec.n} trial={rec.trial} err_2inf={rec.err_2inf:.3e} "
                  f"bound={rec.bound_total:.3e}", file=sys.stderr)

    records = run_sweep(cfg, progress=progress)
    paths = write_sweep_outputs(cfg, records, prefix)
    meta = sweep_metadata(cfg, records)
    for p in paths:
        print(f"wrote {p}", file=sys.stderr)
    print(f"records={meta['records']} assumptions_ok={meta['assumptions_ok']} "
          f"violations={meta['violations']}", file=sys.stderr)
    for col, fit in meta["slopes"].items():
        if fit is not None:
            print(f"slope[{col}] = {fit['slope']:.4f} (r2 {fit['r2']:.3f})", file=sys.stderr)
    return EXIT_OK


def cmd_plot(args):
    with open(args.csv, encoding="utf-8") as fh:
        records = records_from_csv(fh.read())
    if not records:
        raise UsageError("sweep CSV has no records")
    columns = tuple(args.columns) if args.columns else ("err_2inf", "err_frob", "bound_total")
    title = os.path.splitext(os.path.basename(args.csv))[0]
    try:
        summary = summarize(records, columns)
    except AttributeError as exc:
        raise UsageError(f"unknown column: {exc}") from exc
    svg = svg_loglog(summary, columns, title=title)
    out = args.out if args.out is not None else os.path.splitext(args.csv)[0] + ".svg"
    atomic_write_bytes(out, svg.encode("utf-8"))
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


def _n_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid n list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty n list")
    return vals


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64)")
    return v


def build_parser():
    p = _Parser(prog="subspace-perturb", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen", help="generate an instance matrix")
    g.add_argument("family", choices=FAMILIES)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--sigma", type=float, default=0.0)
    g.add_argument("--seed", type=_seed, default=None,
                   help=f"seed of the perturbation (default {DEFAULT_SEED})")
    g.add_argument("--matrix", choices=("a", "e", "v1", "probe"), default="a")
    g.add_argument("--c-cross", type=float, default=1.0)
    g.add_argument("--c-submult", type=float, default=1.0)
    g.add_argument("--out", default=None, help="output path (.spb for binary); stdout if omitted")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bound", help="evaluate the row-wise bound")
    b.add_argument("a")
    b.add_argument("e")
    b.add_argument("--r", type=int, required=True)
    b.add_argument("--format", choices=("csv", "json"), default="json")
    b.add_argument("--out", default=None)
    b.add_argument("--no-evaluate", action="store_true", help="skip the observed error")
    b.set_defaults(func=cmd_bound)

    nw = sub.add_parser("newton", help="perturbed subspace by Newton iteration")
    nw.add_argument("a")
    nw.add_argument("e")
    nw.add_argument("--r", type=int, required=True)
    nw.add_argument("--tol", type=float, default=1e-13)
    nw.add_argument("--max-iters", type=int, default=50)
    nw.add_argument("--no-certificate", action="store_true")
    nw.add_argument("--output", choices=("xhat", "v1hat"), default="xhat")
    nw.add_argument("--out", default=None)
    nw.set_defaults(func=cmd_newton)

    s = sub.add_parser("sep", help="separation diagnostics of a split")
    s.add_argument("a")
    s.add_argument("--r", type=int, required=True)
    s.add_argument("--probe", default=None, help="matrix whose columns are probe directions")
    s.add_argument("--format", choices=("csv", "json"), default="json")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_sep)

    w = sub.add_parser("sweep", help="run an experiment sweep")
    w.add_argument("--preset", choices=sorted(PRESETS), default=None)
    w.add_argument("--config", default=None, help="JSON SweepConfig")
    w.add_argument("--trials", type=int, default=None)
    w.add_argument("--n-list", type=_n_list, default=None)
    w.add_argument("--sigma", type=float, default=None)
    w.add_argument("--sigma-exp", type=float, default=None)
    w.add_argument("--seed", type=_seed, default=None, help="base seed (default: the preset's)")
    w.add_argument("--format", choices=("csv", "json"), default=None)
    w.add_argument("--no-svg", action="store_true")
    w.add_argument("--out", default=None, help="output path prefix (default: preset name)")
    w.add_argument("--verbose", action="store_true")
    w.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("plot", help="SVG plot of a sweep CSV")
    pl.add_argument("csv")
    pl.add_argument("--columns", nargs="+", default=None)
    pl.add_argument("--out", default=None)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, SubspacePerturbError, ValueError, ConvergenceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
