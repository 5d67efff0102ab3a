"""Benchmark harness: manifest-driven suites, trace files, performance profiles.

A manifest is line-delimited text, one run cell per line, ``key=value`` tokens
separated by whitespace::

    problem=toy_sine config=newton_mr seed=0 repeats=3 p.n=200 label=newton

``problem``, ``config`` and ``seed`` are required; ``repeats`` defaults to 1
and ``label`` to the config name. ``p.<name>`` tokens are problem parameters
(``p.spectrum`` takes comma-separated floats). Any dotted or bare solver key
(``schedule.beta``, ``linesearch.max_step``, ``grad_tol``, ...) overrides the
named config. The whole manifest is validated before anything runs.

A config is either a builtin name (``newton_mr``, ``lbfgs_mr``, ``coupled``)
or a path to a flat ``key = value`` file; an optional leading ``base = <builtin>``
line picks the starting point. ``#`` starts a comment in both formats.

Trace files carry one record per outer iteration with fields exactly
``k f gnorm flag lambda inner_iters theta_k zeta_k oracles time_ms`` followed
by a single ``summary`` line; floats are serialized with 17 significant digits
so parsing reproduces them bit-for-bit. Everything except the ``time_ms``
columns is deterministic for a fixed manifest. Convergence-plot data is a
field filter away: the ``k`` and ``gnorm`` columns give the curve, and lines
with ``flag=NPC`` mark the negative-curvature steps.
"""
from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .driver import CONVERGED, RunTrace, ScheduleParams, SolverConfig, solve
from .linesearch import LinesearchConfig
from .problems import build_problem

__all__ = [
    "BUILTIN_CONFIGS",
    "METRICS",
    "TRACE_SUFFIX",
    "ProfileTable",
    "ParsedTrace",
    "RunCell",
    "apply_setting",
    "builtin_config",
    "emit_trace",
    "load_trace_dir",
    "metric_from_summary",
    "parse_config_text",
    "parse_manifest",
    "parse_trace_text",
    "performance_profile",
    "repeat_rng",
    "resolve_config",
    "run_cell_repeat",
    "run_suite",
    "table_from_traces",
    "trace_filename",
    "write_profile_csv",
    "write_suite",
]

TRACE_SUFFIX = ".trace"
METRICS = ("f", "oracles", "time")
BUILTIN_CONFIGS = ("newton_mr", "lbfgs_mr", "coupled")

_LABEL_RE = re.compile(r"^[A-Za-z0-9_.+-]+$")


def _g17(x) -> str:
    # %.17g round-trips any float64 exactly through float()
    return "%.17g" % float(x)


# ---------------------------------------------------------------------------
# solver configs


def builtin_config(name: str) -> SolverConfig:
    """The named preset: schedule mode plus the matching Hessian model."""
    if name == "newton_mr":
        return SolverConfig(schedule=ScheduleParams(mode="newton_mr"), hessian="exact")
    if name == "lbfgs_mr":
        return SolverConfig(schedule=ScheduleParams(mode="lbfgs_mr"), hessian="lbfgs")
    if name == "coupled":
        return SolverConfig(schedule=ScheduleParams(mode="coupled"), hessian="exact")
    raise ValueError(
        f"unknown builtin config {name!r}; builtins: {', '.join(BUILTIN_CONFIGS)}")


def _typed_fields(cls):
    out = {}
    for f in dataclasses.fields(cls):
        out[f.name] = f.type if isinstance(f.type, str) else f.type.__name__
    return out


_TOP_FIELDS = _typed_fields(SolverConfig)
_SCHED_FIELDS = _typed_fields(ScheduleParams)
_LS_FIELDS = _typed_fields(LinesearchConfig)
_BOOLS = {"true": True, "false": False}


def _coerce_setting(value: str, type_name: str, key: str):
    try:
        if type_name == "float":
            return float(value)
        if type_name == "int":
            return int(value)
        if type_name == "bool":
            return _BOOLS[value.lower()]
        if type_name == "str":
            return value
    except (ValueError, KeyError):
        raise ValueError(f"bad value {value!r} for config key {key!r}") from None
    raise ValueError(f"config key {key!r} is not settable from text")


def apply_setting(cfg: SolverConfig, key: str, value: str) -> SolverConfig:
    """One ``key=value`` assignment on an immutable config.

    ``schedule.<field>`` and ``linesearch.<field>`` reach into the nested
    dataclasses; bare keys hit the top level. Replacement reruns the dataclass
    validation, so out-of-range values fail here, before any run starts.
    """
    if key.startswith("schedule."):
        name = key[len("schedule."):]
        if name not in _SCHED_FIELDS:
            raise ValueError(f"unknown config key {key!r}")
        sub = dataclasses.replace(
            cfg.schedule, **{name: _coerce_setting(value, _SCHED_FIELDS[name], key)})
        return dataclasses.replace(cfg, schedule=sub)
    if key.startswith("linesearch."):
        name = key[len("linesearch."):]
        if name not in _LS_FIELDS:
            raise ValueError(f"unknown config key {key!r}")
        sub = dataclasses.replace(
            cfg.linesearch, **{name: _coerce_setting(value, _LS_FIELDS[name], key)})
        return dataclasses.replace(cfg, linesearch=sub)
    if key in ("schedule", "linesearch") or key not in _TOP_FIELDS:
        raise ValueError(f"unknown config key {key!r}")
    return dataclasses.replace(
        cfg, **{key: _coerce_setting(value, _TOP_FIELDS[key], key)})


def parse_config_text(text: str, origin: str = "<config>") -> SolverConfig:
    """Parse a flat ``key = value`` config file body."""
    base = "newton_mr"
    settings = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ValueError(f"{origin}:{ln}: expected 'key = value', got {raw.strip()!r}")
        if key == "base":
            if settings:
                raise ValueError(f"{origin}:{ln}: 'base' must come before other keys")
            base = value
            continue
        settings.append((ln, key, value))
    try:
        cfg = builtin_config(base)
    except ValueError as exc:
        raise ValueError(f"{origin}: {exc}") from None
    for ln, key, value in settings:
        try:
            cfg = apply_setting(cfg, key, value)
        except ValueError as exc:
            raise ValueError(f"{origin}:{ln}: {exc}") from None
    return cfg


def resolve_config(token: str, search_dirs=()) -> SolverConfig:
    """Builtin name, or a config file looked up relative to ``search_dirs``."""
    if token in BUILTIN_CONFIGS:
        return builtin_config(token)
    if os.path.isabs(token):
        candidates = [token]
    else:
        candidates = [os.path.join(d, token) for d in search_dirs] + [token]
    for cand in candidates:
        if os.path.isfile(cand):
            with open(cand) as fh:
                return parse_config_text(fh.read(), origin=cand)
    raise ValueError(
        f"unknown config {token!r}: not a builtin ({', '.join(BUILTIN_CONFIGS)}) "
        "and no such file")


# ---------------------------------------------------------------------------
# manifests


@dataclass
class RunCell:
    """One manifest line: a (problem, config) pairing with seed and repeats."""
    problem: str
    params: dict
    config_token: str
    label: str
    cfg: SolverConfig
    seed: int
    repeats: int
    spec: object = field(repr=False, default=None)

    @property
    def problem_id(self) -> str:
        """Problem name with any non-default parameters folded in."""
        if not self.params:
            return self.problem
        inner = ",".join(f"{k}={_fmt_param(v)}" for k, v in sorted(self.params.items()))
        return f"{self.problem}({inner})"


def _fmt_param(v) -> str:
    if isinstance(v, tuple):
        return ";".join(_fmt_param(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def _coerce_param(value: str):
    if "," in value:
        try:
            return tuple(float(tok) for tok in value.split(",") if tok)
        except ValueError:
            raise ValueError(f"bad numeric list {value!r}") from None
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            pass
    return value


def _default_label(config_token: str) -> str:
    stem = os.path.splitext(os.path.basename(config_token))[0]
    return stem if stem else config_token


def parse_manifest(text: str, base_dir: str | None = None,
                   origin: str = "<manifest>") -> list[RunCell]:
    """Parse and fully validate a manifest; raises before any cell could run.

    Unknown problems, unknown configs, bad parameter or override values all
    surface as ValueError tagged with the manifest line number.
    """
    search_dirs = [base_dir] if base_dir else []
    cells = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields, params, overrides = {}, {}, []
        for tok in line.split():
            key, sep, value = tok.partition("=")
            if not sep or not key or not value:
                raise ValueError(f"{origin}:{ln}: token {tok!r} is not key=value")
            if key.startswith("p."):
                pname = key[2:]
                if not pname or pname in params:
                    raise ValueError(f"{origin}:{ln}: bad or duplicate parameter {key!r}")
                try:
                    params[pname] = _coerce_param(value)
                except ValueError as exc:
                    raise ValueError(f"{origin}:{ln}: {exc}") from None
            elif key in ("problem", "config", "seed", "repeats", "label"):
                if key in fields:
                    raise ValueError(f"{origin}:{ln}: duplicate key {key!r}")
                fields[key] = value
            else:
                overrides.append((key, value))
        for req in ("problem", "config", "seed"):
            if req not in fields:
                raise ValueError(f"{origin}:{ln}: missing required key {req!r}")
        try:
            seed = int(fields["seed"])
            repeats = int(fields.get("repeats", "1"))
        except ValueError:
            raise ValueError(f"{origin}:{ln}: seed and repeats must be integers") from None
        if seed < 0 or repeats < 1:
            raise ValueError(f"{origin}:{ln}: need seed >= 0 and repeats >= 1")
        try:
            spec = build_problem(fields["problem"], self_test=False, **params)
        except (KeyError, TypeError, ValueError) as exc:
            detail = exc.args[0] if exc.args else exc
            raise ValueError(f"{origin}:{ln}: {detail}") from None
        try:
            cfg = resolve_config(fields["config"], search_dirs)
            for key, value in overrides:
                cfg = apply_setting(cfg, key, value)
        except ValueError as exc:
            raise ValueError(f"{origin}:{ln}: {exc}") from None
        label = fields.get("label", _default_label(fields["config"]))
        if not _LABEL_RE.match(label):
            raise ValueError(f"{origin}:{ln}: label {label!r} has characters outside "
                             "[A-Za-z0-9_.+-]")
        cells.append(RunCell(problem=fields["problem"], params=params,
                             config_token=fields["config"], label=label, cfg=cfg,
                             seed=seed, repeats=repeats, spec=spec))
    if not cells:
        raise ValueError(f"{origin}: no runnable cells")
    return cells


# ---------------------------------------------------------------------------
# execution


def repeat_rng(seed: int, repeat: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, repeat): repeats never overlap."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, repeat])))


def run_cell_repeat(cell: RunCell, repeat: int) -> RunTrace:
    rng = repeat_rng(cell.seed, repeat)
    obj = cell.spec.make_objective()
    x0 = cell.spec.start(rng)
    trace = solve(obj, x0, cell.cfg)
    trace.problem = cell.problem_id
    trace.config = cell.label
    trace.seed = cell.seed
    trace.repeat = repeat
    return trace


def run_suite(cells: list[RunCell], jobs: int = 1) -> list[RunTrace]:
    """Execute every (cell, repeat) unit; results come back in manifest order.

    Units are independent, so ``jobs > 1`` fans them out over a thread pool
    (the numeric kernels drop the GIL inside numpy). Ordering and content are
    identical either way; only wall-clock columns differ between runs.
    """
    units = [(cell, rep) for cell in cells for rep in range(cell.repeats)]
    if jobs <= 1:
        return [run_cell_repeat(cell, rep) for cell, rep in units]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda u: run_cell_repeat(*u), units))


# ---------------------------------------------------------------------------
# trace files


_RECORD_FIELDS = ("k", "f", "gnorm", "flag", "lambda", "inner_iters",
                  "theta_k", "zeta_k", "oracles", "time_ms")
_SUMMARY_FIELDS = ("problem", "config", "seed", "repeat", "status", "iters",
                   "oracles", "final_f", "final_gnorm", "time_ms")
_INT_FIELDS = {"k", "inner_iters", "iters", "seed", "repeat"}
_STR_FIELDS = {"flag", "status", "problem", "config"}


def emit_trace(trace: RunTrace, path) -> None:
    """Write one record line per iteration plus the final summary line."""
    lines = []
    for r in trace.records:
        lines.append(
            "k=%d f=%s gnorm=%s flag=%s lambda=%s inner_iters=%d "
            "theta_k=%s zeta_k=%s oracles=%s time_ms=%s"
            % (r.k, _g17(r.f), _g17(r.gnorm), r.flag, _g17(r.step),
               r.inner_iters, _g17(r.theta), _g17(r.zeta), _g17(r.oracles),
               _g17(r.time_ms)))
    lines.append(
        "summary problem=%s config=%s seed=%s repeat=%s status=%s iters=%d "
        "oracles=%s final_f=%s final_gnorm=%s time_ms=%s"
        % (trace.problem or "-", trace.config or "-",
           "-" if trace.seed is None else trace.seed,
           "-" if trace.repeat is None else trace.repeat,
           trace.status, trace.iters, _g17(trace.oracles), _g17(trace.f_final),
           _g17(trace.gnorm_final), _g17(trace.time_ms)))
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write trace {path}: {exc}") from exc


@dataclass
class ParsedTrace:
    records: list
    summary: dict


def _parse_tokens(toks, origin, ln) -> dict:
    out = {}
    for tok in toks:
        key, sep, value = tok.partition("=")
        if not sep or not key:
            raise ValueError(f"{origin}:{ln}: bad token {tok!r}")
        if key in out:
            raise ValueError(f"{origin}:{ln}: duplicate field {key!r}")
        try:
            if key in _STR_FIELDS:
                out[key] = value
            elif key in _INT_FIELDS:
                out[key] = None if value == "-" else int(value)
            else:
                out[key] = float(value)
        except ValueError:
            raise ValueError(f"{origin}:{ln}: bad value in {tok!r}") from None
    return out


def parse_trace_text(text: str, origin: str = "<trace>") -> ParsedTrace:
    """Inverse of emit_trace; numeric fields round-trip exactly."""
    records, summary = [], None
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if summary is not None:
            raise ValueError(f"{origin}:{ln}: content after the summary line")
        toks = line.split()
        if toks[0] == "summary":
            summary = _parse_tokens(toks[1:], origin, ln)
            missing = [f for f in _SUMMARY_FIELDS if f not in summary]
            if missing:
                raise ValueError(f"{origin}:{ln}: summary missing {missing}")
        else:
            rec = _parse_tokens(toks, origin, ln)
            missing = [f for f in _RECORD_FIELDS if f not in rec]
            if missing:
                raise ValueError(f"{origin}:{ln}: record missing {missing}")
            records.append(rec)
    if summary is None:
        raise ValueError(f"{origin}: missing summary line")
    return ParsedTrace(records, summary)


def parse_trace(path) -> ParsedTrace:
    with open(path) as fh:
        return parse_trace_text(fh.read(), origin=str(path))


def _safe_name(s: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.+-]", "-", s)


def trace_filename(index: int, trace: RunTrace) -> str:
    return (f"{index:04d}_{_safe_name(trace.config or 'run')}_"
            f"{_safe_name(trace.problem or 'problem')}_"
            f"s{trace.seed}r{trace.repeat}{TRACE_SUFFIX}")


def write_suite(traces: list[RunTrace], out_dir) -> list[str]:
    """Emit every trace into ``out_dir`` under deterministic filenames."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i, tr in enumerate(traces):
        path = os.path.join(out_dir, trace_filename(i, tr))
        emit_trace(tr, path)
        paths.append(path)
    return paths


def load_trace_dir(dirpath) -> list[ParsedTrace]:
    names = sorted(n for n in os.listdir(dirpath) if n.endswith(TRACE_SUFFIX))
    if not names:
        raise ValueError(f"no *{TRACE_SUFFIX} files in {dirpath}")
    out = []
    for name in names:
        path = os.path.join(dirpath, name)
        with open(path) as fh:
            out.append(parse_trace_text(fh.read(), origin=path))
    return out


# ---------------------------------------------------------------------------
# performance profiles


def metric_from_summary(summary: dict, metric: str):
    """(value, solved) for one run; solved means the run converged."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    key = {"f": "final_f", "oracles": "oracles", "time": "time_ms"}[metric]
    return float(summary[key]), summary["status"] == CONVERGED


def table_from_traces(parsed: list[ParsedTrace], metric: str) -> dict:
    """Metric table keyed by (solver, instance); instance = problem#seed.repeat."""
    table = {}
    for pt in parsed:
        s = pt.summary
        instance = s["problem"]
        if s["seed"] is not None:
            instance += f"#s{s['seed']}"
        if s["repeat"] is not None:
            instance += f"r{s['repeat']}"
        key = (s["config"], instance)
        if key in table:
            raise ValueError(f"duplicate trace for solver {key[0]!r} on {instance!r}")
        table[key] = metric_from_summary(s, metric)
    return table


@dataclass
class ProfileTable:
    """Performance-ratio profile over a {(solver, problem): (metric, solved)} table."""
    solvers: list
    problems: list
    ratios: dict        # (solver, problem) -> ratio; +inf for unsolved cells
    taus: list          # sorted breakpoints, always containing 1.0
    fractions: dict     # solver -> fractions aligned with taus


def performance_profile(table: dict) -> ProfileTable:
    """Classical performance-ratio profile.

    Per problem, the baseline is the best metric among solvers that solved
    it; each solved cell gets ratio metric/baseline and each unsolved or
    missing cell +inf. Problems nobody solves contribute no ratios but stay
    in every denominator, so a profile's limit at large tau is the fraction
    of problems that solver actually solved. Ratios assume positive metrics
    (oracle counts, times); exact ties get ratio 1.0 without division.
    """
    if not table:
        raise ValueError("empty metric table")
    solvers = sorted({s for s, _ in table})
    problems = sorted({p for _, p in table})
    ratios = {}
    for p in problems:
        best = None
        for s in solvers:
            entry = table.get((s, p))
            if entry is None:
                continue
            value, solved = entry
            if solved and math.isfinite(value):
                best = value if best is None else min(best, value)
        if best is None:
            continue                      # nobody solved it
        for s in solvers:
            entry = table.get((s, p))
            if entry is None:
                ratios[(s, p)] = math.inf
                continue
            value, solved = entry
            if not solved or not math.isfinite(value):
                ratios[(s, p)] = math.inf
            elif value == best:
                ratios[(s, p)] = 1.0
            elif best == 0.0:
                ratios[(s, p)] = math.inf
            else:
                ratios[(s, p)] = value / best
    finite = {r for r in ratios.values() if math.isfinite(r)}
    taus = sorted(finite | {1.0})
    n = len(problems)
    fractions = {
        s: [sum(1 for p in problems
                if ratios.get((s, p), math.inf) <= tau) / n for tau in taus]
        for s in solvers
    }
    return ProfileTable(solvers, problems, ratios, taus, fractions)


def write_profile_csv(profile: ProfileTable, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["solver", "tau", "fraction"])
            for s in profile.solvers:
                for tau, frac in zip(profile.taus, profile.fractions[s]):
                    writer.writerow([s, _g17(tau), _g17(frac)])
    except OSError as exc:
        raise OSError(f"cannot write profile {path}: {exc}") from exc
