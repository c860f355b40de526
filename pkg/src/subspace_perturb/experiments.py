"""Seeded n-sweeps of the row-wise bound, their summaries and output files.

A sweep draws ``trials`` instances for every ``n`` of a family, evaluates
the three-term bound and the observed Procrustes-aligned error, and emits
one :class:`SweepRecord` per ``(n, trial)``. Trial ``t`` at size ``n`` uses
the seed ``SeededRng(config.seed).derive_seed(n, t)``, so records do not
depend on the order in which trials run.
"""

import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np
import scipy.sparse.linalg

from . import __version__
from .bounds import observed_subspace_error, theorem_main_bound
from .exceptions import ConfigError
from .generators import (
    FAMILIES,
    RNG_ALGORITHM,
    InstanceSpec,
    SeededRng,
    build_instance,
    gen_gaussian_perturbation,
    stream_from_seed,
)
from .linalg import procrustes_align, sym_norm2, two_to_inf_norm
from .matio import atomic_write_bytes
from .newton import NewtonOptions
from .plotting import svg_loglog
from .separation import gap_certificate
from .stats import QUANTILE_METHOD, fit_slope, summarize

__all__ = [
    "SigmaRule",
    "SweepConfig",
    "SweepRecord",
    "ProjectionErrors",
    "PRESETS",
    "OUTPUT_KINDS",
    "DENSE_NORM_MAX_N",
    "spectral_norm",
    "projection_split_errors",
    "run_sweep",
    "summarize",
    "fit_slope",
    "records_to_csv",
    "records_from_csv",
    "sweep_metadata",
    "sweep_svg",
    "write_sweep_outputs",
    "get_preset",
]

OUTPUT_KINDS = ("csv", "json", "svg-plot")

#: Above this size ``||E||_2`` is computed by Lanczos instead of a dense solve.
DENSE_NORM_MAX_N = 1024

_LANCZOS_TOL = 1e-10
_LANCZOS_NCV = 64
# Relative inflation of the Lanczos estimate to cover its convergence tolerance.
_LANCZOS_SAFETY = 1e-9

_SUMMARY_COLUMNS = (
    "err_2inf", "err_frob", "bound_total", "term_quadratic", "term_cross",
    "term_submult", "dk_reference", "err_on_v1", "err_on_v2", "e_norm", "newton_iters",
)
_SLOPE_COLUMNS = ("err_2inf", "err_frob", "bound_total", "err_on_v2")
_PLOT_COLUMNS = ("err_2inf", "err_frob", "bound_total")


@dataclass(frozen=True)
class SigmaRule:
    """Noise level as a function of ``n``.

    ``kind="fixed"`` gives ``sigma = value``; ``kind="power"`` gives
    ``sigma = scale * n ** (-value)``.
    """

    kind: str
    value: float
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("fixed", "power"):
            raise ConfigError(f"unknown sigma rule {self.kind!r}")
        if not np.isfinite(self.value) or not np.isfinite(self.scale):
            raise ConfigError("sigma rule parameters must be finite")
        if self.kind == "fixed" and self.value < 0:
            raise ConfigError("a fixed sigma must be nonnegative")
        if self.scale < 0:
            raise ConfigError("sigma scale must be nonnegative")

    def __call__(self, n):
        if self.kind == "fixed":
            return float(self.value)
        return float(self.scale * float(n) ** (-self.value))

    @classmethod
    def fixed(cls, sigma):
        return cls("fixed", float(sigma))

    @classmethod
    def power(cls, exponent, scale=1.0):
        return cls("power", float(exponent), float(scale))


@dataclass(frozen=True)
class SweepConfig:
    """Everything that determines a sweep's output bytes.

    Parameters
    ----------
    family : str
        One of :data:`~subspace_perturb.generators.FAMILIES`.
    n_values : tuple of int
        Strictly increasing dimensions.
    sigma_rule : SigmaRule
    trials : int
    seed : int
        Base seed of the per-trial substreams.
    outputs : tuple of str
        Subset of ``("csv", "json", "svg-plot")``.
    c_cross, c_submult : float
        Constants of the tightness family.
    record_timing : bool
        Store wall-clock times; off by default since timings break
        byte-for-byte reproducibility (``wall_time_ms`` is then 0).
    name : str
        Label used in metadata and plot titles.
    """

    family: str
    n_values: tuple
    sigma_rule: SigmaRule
    trials: int = 1
    seed: int = 0
    outputs: tuple = ("csv", "json")
    c_cross: float = 1.0
    c_submult: float = 1.0
    record_timing: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not isinstance(self.sigma_rule, SigmaRule):
            raise ConfigError("sigma_rule must be a SigmaRule")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if not self.n_values:
            raise ConfigError("n_values is empty")
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ConfigError("n_values must be strictly increasing")
        bad = [o for o in self.outputs if o not in OUTPUT_KINDS]
        if bad:
            raise ConfigError(f"unknown output kinds {bad}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.c_cross < 0 or self.c_submult < 0:
            raise ConfigError("tightness constants must be nonnegative")
        for n in self.n_values:
            try:
                InstanceSpec(self.family, n, self.sigma_rule(n), 0)
            except ValueError as exc:
                raise ConfigError(f"n={n} is invalid for family {self.family!r}: {exc}") from exc

    def to_dict(self):
        d = asdict(self)
        d["n_values"] = list(self.n_values)
        d["outputs"] = list(self.outputs)
        return d

    @classmethod
    def from_dict(cls, d):
        """Inverse of :meth:`to_dict`; unknown keys are rejected."""
        d = dict(d)
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        rule = d.get("sigma_rule")
        if isinstance(rule, dict):
            try:
                d["sigma_rule"] = SigmaRule(**rule)
            except TypeError as exc:
                raise ConfigError(f"bad sigma_rule: {exc}") from exc
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def replace(self, **changes):
        d = self.to_dict()
        d["sigma_rule"] = self.sigma_rule
        d.update(changes)
        return SweepConfig(**d)


@dataclass(frozen=True)
class SweepRecord:
    """One ``(n, trial)`` row of a sweep.

    The first fourteen fields are the fixed CSV schema; ``err_on_v1``,
    ``err_on_v2``, ``sigma``, ``e_norm`` and ``solver`` are appended
    diagnostics.
    """

    n: int
    trial: int
    seed: int
    err_2inf: float
    err_frob: float
    bound_total: float
    term_quadratic: float
    term_cross: float
    term_submult: float
    dk_reference: float
    gap_used: float
    assumptions_ok: bool
    newton_iters: int
    wall_time_ms: float
    err_on_v1: float = 0.0
    err_on_v2: float = 0.0
    sigma: float = 0.0
    e_norm: float = 0.0
    solver: str = ""

    @property
    def sound(self):
        """False only for a counterexample to the bound."""
        return not self.assumptions_ok or self.err_2inf <= self.bound_total


_RECORD_FIELDS = tuple(f.name for f in fields(SweepRecord))
_INT_FIELDS = ("n", "trial", "seed", "newton_iters")


@dataclass(frozen=True)
class ProjectionErrors:
    err_on_v1: float
    err_on_v2: float


def projection_split_errors(v1, v1hat):
    """Row-wise size of the aligned error's components in ``ran V1`` and its complement.

    Parameters
    ----------
    v1 : ndarray, shape (n, r)
        Unperturbed basis.
    v1hat : ndarray or result object
        Perturbed basis, or any object with a ``v1hat`` attribute (such as a
        Newton result).

    Returns
    -------
    ProjectionErrors
        ``||V1 V1^T D||_{2,inf}`` and ``||(I - V1 V1^T) D||_{2,inf}`` with
        ``D = V1hat U - V1`` at the Procrustes alignment ``U``.
    """
    v1hat = getattr(v1hat, "v1hat", v1hat)
    u = procrustes_align(v1hat, v1)
    d = v1hat @ u - v1
    on_v1 = v1 @ (v1.T @ d)
    return ProjectionErrors(two_to_inf_norm(on_v1), two_to_inf_norm(d - on_v1))


def spectral_norm(e):
    """``||E||_2`` for symmetric ``E``: dense up to :data:`DENSE_NORM_MAX_N`, else Lanczos.

    The Lanczos value (largest-magnitude Ritz value, fixed start vector) is
    inflated by a relative ``1e-9``, ten times its ``1e-10`` convergence
    tolerance.
    """
    n = e.shape[0]
    if n <= DENSE_NORM_MAX_N:
        return sym_norm2(e)
    v0 = np.linspace(1.0, 2.0, n)
    vals = scipy.sparse.linalg.eigsh(e, k=1, which="LM", v0=v0, tol=_LANCZOS_TOL,
                                     ncv=min(_LANCZOS_NCV, n - 1), return_eigenvectors=False)
    return float(np.max(np.abs(vals)) * (1.0 + _LANCZOS_SAFETY))


def _thread_count():
    raw = os.environ.get("SUBSPACE_PERTURB_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(1, value)


def _run_trial(config, base, trial, seed, gap, opts):
    start = time.perf_counter()
    n = base.spec.n
    if config.family == "tightness":
        sigma = 0.0
        e = base.e
    else:
        sigma = config.sigma_rule(n)
        # Same draw as build_instance(InstanceSpec(family, n, sigma, seed)).
        e = gen_gaussian_perturbation(base.a.shape[0], sigma, stream_from_seed(seed))
    split = base.split
    e_norm = spectral_norm(e)
    report = theorem_main_bound(split, e, e_norm=e_norm, gap=gap)
    obs = observed_subspace_error(base.a, e, split, e_norm=e_norm, opts=opts)
    parts = projection_split_errors(split.v1, obs.v1hat)
    elapsed = (time.perf_counter() - start) * 1e3 if config.record_timing else 0.0
    return SweepRecord(
        n=n,
        trial=trial,
        seed=seed,
        err_2inf=obs.aligned_error,
        err_frob=obs.frob_error,
        bound_total=report.total,
        term_quadratic=report.term_quadratic,
        term_cross=report.term_cross,
        term_submult=report.term_submult,
        dk_reference=report.dk_reference,
        gap_used=report.gap_used,
        assumptions_ok=report.assumptions_ok,
        newton_iters=obs.newton_iters,
        wall_time_ms=float(elapsed),
        err_on_v1=parts.err_on_v1,
        err_on_v2=parts.err_on_v2,
        sigma=float(sigma),
        e_norm=float(e_norm),
        solver=obs.method,
    )


def run_sweep(config, workers=None, progress=None):
    """Run every ``(n, trial)`` of a sweep.

    Parameters
    ----------
    config : SweepConfig
    workers : int, optional
        Thread count; defaults to ``$SUBSPACE_PERTURB_THREADS`` or 1.
    progress : callable, optional
        Called as ``progress(record)`` after each trial finishes.

    Returns
    -------
    list of SweepRecord
        Sorted by ``(n, trial)`` whatever the schedule.
    """
    if not isinstance(config, SweepConfig):
        raise ConfigError("run_sweep expects a SweepConfig")
    workers = _thread_count() if workers is None else max(1, int(workers))
    rng = SeededRng(config.seed)
    opts = NewtonOptions()
    records = []
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for n in config.n_values:
            # A, its split and the gap do not depend on the trial.
            base = build_instance(InstanceSpec(config.family, n, 0.0, 0),
                                  config.c_cross, config.c_submult)
            gap = gap_certificate(base.split)

            def work(t, base=base, gap=gap):
                rec = _run_trial(config, base, t, rng.derive_seed(n, t), gap, opts)
                if progress is not None:
                    progress(rec)
                return rec

            trials = range(config.trials)
            records.extend(pool.map(work, trials) if pool is not None else map(work, trials))
    finally:
        if pool is not None:
            pool.shutdown()
    return sorted(records, key=lambda rec: (rec.n, rec.trial))


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def records_to_csv(records):
    """CSV text with the header line ``n,trial,seed,...`` and one row per record."""
    buf = io.StringIO()
    buf.write(",".join(_RECORD_FIELDS) + "\n")
    for rec in records:
        buf.write(",".join(_fmt(getattr(rec, f)) for f in _RECORD_FIELDS) + "\n")
    return buf.getvalue()


def _parse_field(name, text):
    if name in _INT_FIELDS:
        return int(text)
    if name == "assumptions_ok":
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r}")
        return text == "true"
    if name == "solver":
        return text
    return float(text)


def records_from_csv(text):
    """Parse the output of :func:`records_to_csv`.

    Raises
    ------
    ConfigError
        If the header or a row is malformed.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ConfigError("empty sweep CSV")
    header = lines[0].split(",")
    if tuple(header) != _RECORD_FIELDS:
        raise ConfigError("unexpected sweep CSV header")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise ConfigError(f"line {lineno}: expected {len(header)} cells, got {len(cells)}")
        try:
            out.append(SweepRecord(**{h: _parse_field(h, c) for h, c in zip(header, cells)}))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    return out


def _summary_dict(summary):
    out = {}
    for n, cols in summary.items():
        out[str(n)] = {col: asdict(s) for col, s in cols.items()}
    return out


def _slopes(summary):
    out = {}
    if len(summary) < 3:
        return out
    for col in _SLOPE_COLUMNS:
        try:
            out[col] = asdict(fit_slope(summary, col))
        except ValueError:
            out[col] = None
    # The bound curve is also fitted on per-trial means.
    try:
        out["bound_total_mean"] = asdict(fit_slope(summary, "bound_total", "mean"))
    except ValueError:
        out["bound_total_mean"] = None
    return out


def sweep_metadata(config, records):
    """The JSON sidecar contents as a dictionary."""
    summary = summarize(records, _SUMMARY_COLUMNS)
    ratio = {}
    for n, cols in summary.items():
        m2 = cols["err_2inf"].median
        ratio[str(n)] = cols["err_frob"].median / m2 if m2 > 0 else None
    return {
        "toolkit": "subspace_perturb",
        "version": __version__,
        "rng_algorithm": RNG_ALGORITHM,
        "seed_derivation": "trial seed = SeededRng(config.seed).derive_seed(n, trial)",
        "quantile_method": QUANTILE_METHOD,
        "slope_fit": "least squares of log(median) against log(n)",
        "bound_curve": "statistics of per-trial bounds (both mean and median are listed)",
        "spectral_norm": f"dense for n <= {DENSE_NORM_MAX_N}, Lanczos above",
        "config": config.to_dict(),
        "records": len(records),
        "violations": sum(1 for r in records if not r.sound),
        "assumptions_ok": sum(1 for r in records if r.assumptions_ok),
        "summary": _summary_dict(summary),
        "frob_over_2inf_median": ratio,
        "slopes": _slopes(summary),
    }


def sweep_svg(config, records, columns=_PLOT_COLUMNS):
    summary = summarize(records, columns)
    title = config.name or config.family
    return svg_loglog(summary, columns, title=title)


def write_sweep_outputs(config, records, prefix, kinds=None):
    """Write the requested outputs to ``prefix.csv``, ``prefix.json`` and ``prefix.svg``.

    All contents are rendered before any file is touched, and each file is
    written atomically.

    Returns
    -------
    list of str
        Paths written.
    """
    kinds = config.outputs if kinds is None else tuple(kinds)
    prefix = os.fspath(prefix)
    payload = []
    if "csv" in kinds:
        payload.append((prefix + ".csv", records_to_csv(records)))
    if "json" in kinds:
        meta = sweep_metadata(config, records)
        payload.append((prefix + ".json", json.dumps(meta, indent=2) + "\n"))
    if "svg-plot" in kinds:
        payload.append((prefix + ".svg", sweep_svg(config, records)))
    for path, text in payload:
        atomic_write_bytes(path, text.encode("utf-8"))
    return [p for p, _ in payload]


_DESK_N = (256, 512, 1024, 2048, 4096)

#: Named sweeps behind the figure analogues. The Gaussian presets use 30
#: trials at n in {256, ..., 4096}; the tightness preset is deterministic
#: (one trial) with constants chosen so both terms dominate somewhere.
PRESETS = {
    "fig1": SweepConfig("tightness", tuple(2**k for k in range(4, 13)), SigmaRule.fixed(0.0),
                        trials=1, seed=100, outputs=("csv", "json", "svg-plot"),
                        c_cross=0.25, c_submult=0.2, name="fig1"),
    "fig2a": SweepConfig("low-rank", _DESK_N, SigmaRule.power(1.0), trials=30, seed=101,
                         outputs=("csv", "json", "svg-plot"), name="fig2a"),
    "fig2b": SweepConfig("low-rank", _DESK_N, SigmaRule.power(0.75), trials=30, seed=102,
                         outputs=("csv", "json", "svg-plot"), name="fig2b"),
    "fig3a": SweepConfig("coherent", _DESK_N, SigmaRule.power(1.0), trials=30, seed=103,
                         outputs=("csv", "json", "svg-plot"), name="fig3a"),
    "fig3b": SweepConfig("coherent", _DESK_N, SigmaRule.power(0.75), trials=30, seed=104,
                         outputs=("csv", "json", "svg-plot"), name="fig3b"),
    "sep-example": SweepConfig("sep-example", (4, 16, 64, 256), SigmaRule.power(1.0, 0.05),
                               trials=30, seed=105, outputs=("csv", "json", "svg-plot"),
                               name="sep-example"),
}


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
