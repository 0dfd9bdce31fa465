"""Experiment runner: build a problem, run several solvers, write CSV reports.

Configs are INI files (see ``configs/`` and the README for the grammar)::

    [problem]
    kind = lasso            ; lasso | deblur | rpca | completion
    m = 30
    n = 50

    [solver.alm]            ; label; the method defaults to the label
    mu = auto
    max_iter = 500

    [report]
    checkpoints = 10, 50, 100
    output_dir = out

Outputs in ``output_dir``: ``trace_<label>.csv`` per solver,
``summary.csv`` (objective at each checkpoint, iterations to target and,
when a ground truth exists, relX/relY) and ``timing.csv`` (wall time, kept
apart so the other files are reproducible byte for byte).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from altlin import fileio, problems, solvers
from altlin.linalg import project_mask

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "SolverSpec",
    "build_problem",
    "generate_instance_files",
    "load_config",
    "parse_config",
    "run_experiment",
    "validate_config",
]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2

_REQUIRED = object()


class ConfigError(ValueError):
    """Invalid experiment config; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


def _positive(conv):
    def parse(text):
        v = conv(text)
        if not v > 0:
            raise ValueError("must be positive")
        return v

    return parse


def _fraction(text):
    v = float(text)
    if not 0 <= v <= 1:
        raise ValueError("must lie in [0, 1]")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise ValueError("must be non-negative")
    return v


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_pos_int = _positive(int)
_pos_float = _positive(float)

PROBLEM_SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "lasso": {
        "m": (_pos_int, 30),
        "n": (_pos_int, 50),
        "rho": (_pos_float, 0.1),
        "sigma": (_pos_float, 1e-3),
        "sparsity": (_fraction, 0.1),
        "seed": (_nonneg_int, 0),
        "a_file": (str, None),
        "b_file": (str, None),
    },
    "deblur": {
        "size": (_pos_int, 32),
        "kernel_size": (_pos_int, 5),
        "levels": (_pos_int, 3),
        "rho": (_pos_float, 1e-3),
        "sigma": (_pos_float, 1e-3),
        "noise": (float, 1e-3),
        "seed": (_nonneg_int, 0),
        "b_file": (str, None),
    },
    "rpca": {
        "n": (_pos_int, 50),
        "r": (_pos_int, 2),
        "spr": (_fraction, 0.05),
        "seed": (_nonneg_int, 0),
        "rho": (_pos_float, None),
        "sigma": (_pos_float, 1e-6),
        "matrix_file": (str, None),
        "mask_file": (str, None),
    },
    "completion": {
        "n": (_pos_int, 100),
        "r": (_pos_int, 5),
        "spr": (_fraction, 0.05),
        "sr": (_fraction, 0.9),
        "seed": (_nonneg_int, 0),
        "sigma": (_pos_float, 1e-6),
    },
}


def _mu(text):
    if text.strip() == "auto":
        return "auto"
    return _pos_float(text)


def _mu0(text):
    if text.strip() in ("spectral", "frobenius"):
        return text.strip()
    return _pos_float(text)


SOLVER_SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "method": (str, None),
    "mu": (_mu, "auto"),
    "max_iter": (_pos_int, 1000),
    "infeas_tol": (float, 0.0),
    "obj_target": (float, None),
    "force_skip": (_bool, False),
    "smoothed": (_bool, None),
    "continuation": (_bool, False),
    "mu0": (_mu0, "spectral"),
    "mu_bar": (_pos_float, 1e-6),
    "eta": (float, 2.0 / 3.0),
}

REPORT_SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "checkpoints": (str, ""),
    "output_dir": (str, "out"),
}


@dataclass(frozen=True)
class SolverSpec:
    label: str
    method: str
    params: dict[str, Any]

    @property
    def smoothed(self) -> bool:
        """Smooth ``g``; by default only for methods that need both sides smooth."""
        flag = self.params.get("smoothed")
        return self.method in ("alm", "falm") if flag is None else flag


@dataclass(frozen=True)
class ExperimentConfig:
    problem: dict[str, Any]
    solvers: list[SolverSpec]
    checkpoints: list[int] = field(default_factory=list)
    output_dir: Path = Path("out")
    base_dir: Path = Path(".")


def _parse_section(section, schema, where, errors, extra_ok=()):
    out = {}
    for key in section:
        if key not in schema and key not in extra_ok:
            errors.append(f"{where}.{key}: unknown key")
    for key, (conv, default) in schema.items():
        if key in section:
            try:
                out[key] = conv(section[key])
            except ValueError as exc:
                errors.append(f"{where}.{key}: {exc} (got {section[key]!r})")
        elif default is _REQUIRED:
            errors.append(f"{where}.{key}: required")
        else:
            out[key] = default
    return out


def parse_config(text: str, base_dir: Path = Path(".")) -> ExperimentConfig:
    """Parse config text; raises :class:`ConfigError` listing every problem."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"parse error: {exc}".replace("\n", " ")]) from None

    errors: list[str] = []
    for name in parser.sections():
        if name not in ("problem", "report") and not name.startswith("solver."):
            errors.append(f"{name}: unknown section")

    problem: dict[str, Any] = {}
    if not parser.has_section("problem"):
        errors.append("problem: missing section")
    else:
        kind = parser["problem"].get("kind")
        if kind is None:
            errors.append("problem.kind: required")
        elif kind not in PROBLEM_SCHEMA:
            errors.append(f"problem.kind: unknown kind {kind!r}; choose from {sorted(PROBLEM_SCHEMA)}")
        else:
            problem = _parse_section(
                parser["problem"], PROBLEM_SCHEMA[kind], "problem", errors, extra_ok=("kind",)
            )
            problem["kind"] = kind
            if kind == "completion" and "r" in problem and "n" in problem and not problem["r"] < problem["n"]:
                errors.append("problem.r: must be smaller than n")
            if kind == "lasso" and (problem.get("a_file") is None) != (problem.get("b_file") is None):
                errors.append("problem.a_file: a_file and b_file must be given together")

    specs: list[SolverSpec] = []
    for name in parser.sections():
        if not name.startswith("solver."):
            continue
        label = name[len("solver."):]
        where = f"solver.{label}"
        if not label or any(c in label for c in "/\\ "):
            errors.append(f"{where}: invalid label {label!r}")
            continue
        params = _parse_section(parser[name], SOLVER_SCHEMA, where, errors)
        method = params.pop("method") or label
        if method not in solvers.SOLVERS:
            errors.append(f"{where}.method: unknown solver {method!r}; choose from {sorted(solvers.SOLVERS)}")
            continue
        if params.get("infeas_tol", 0.0) < 0:
            errors.append(f"{where}.infeas_tol: must be non-negative")
        if params.get("continuation") and not 0 < params.get("eta", 0.5) < 1:
            errors.append(f"{where}.eta: must lie in (0, 1)")
        specs.append(SolverSpec(label, method, params))
    if not specs and not any(e.startswith("solver.") for e in errors):
        errors.append("solver: at least one [solver.NAME] section is required")

    report = _parse_section(
        parser["report"] if parser.has_section("report") else {}, REPORT_SCHEMA, "report", errors
    )
    checkpoints: list[int] = []
    if report.get("checkpoints"):
        try:
            checkpoints = [int(tok) for tok in report["checkpoints"].replace(",", " ").split()]
        except ValueError:
            errors.append(f"report.checkpoints: not a list of integers ({report['checkpoints']!r})")
        else:
            if any(c < 1 for c in checkpoints):
                errors.append("report.checkpoints: iterations start at 1")
            elif checkpoints != sorted(set(checkpoints)):
                errors.append("report.checkpoints: must be strictly increasing")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        problem=problem,
        solvers=specs,
        checkpoints=checkpoints,
        output_dir=Path(report["output_dir"]),
        base_dir=base_dir,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read ({exc.strerror})"]) from None
    return parse_config(text, base_dir=path.parent)


def validate_config(path) -> list[str]:
    """Every problem found in the config at ``path``; empty when valid."""
    try:
        load_config(path)
    except ConfigError as exc:
        return exc.errors
    return []


@dataclass
class BuiltProblem:
    """A problem ready to hand to solvers, plus any ground truth."""

    kind: str
    objective: Callable[[str, bool], Any]  # (method, smoothed) -> SplitObjective
    x0: Optional[np.ndarray]
    M: Optional[np.ndarray] = None
    truth: Optional[tuple[np.ndarray, np.ndarray]] = None
    mask: Any = None
    files: dict[str, Any] = field(default_factory=dict)


def _resolve(base_dir: Path, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else base_dir / p


def build_problem(problem: dict[str, Any], base_dir: Path = Path(".")) -> BuiltProblem:
    kind = problem["kind"]
    if kind == "lasso":
        if problem.get("a_file"):
            A = fileio.read_matrix(_resolve(base_dir, problem["a_file"]))
            b = fileio.read_matrix(_resolve(base_dir, problem["b_file"])).reshape(-1)
            inst = problems.LassoInstance(A, b, problem["rho"])
        else:
            inst = problems.random_lasso(
                problem["m"], problem["n"], problem["rho"], problem["seed"], problem["sparsity"]
            )
        sigma = problem["sigma"]
        return BuiltProblem(
            kind,
            lambda method, smoothed: problems.lasso_handles(inst, sigma if smoothed else None),
            x0=None,
            files={"A": inst.A, "b": inst.b[:, None]},
        )
    if kind == "deblur":
        if problem.get("b_file"):
            b = fileio.read_matrix(_resolve(base_dir, problem["b_file"]))
            inst = problems.DeblurInstance(b, problem["kernel_size"], problem["levels"], problem["rho"])
        else:
            inst, _ = problems.synthetic_deblur(
                problem["size"], problem["kernel_size"], problem["levels"],
                problem["rho"], problem["noise"], problem["seed"],
            )
        sigma = problem["sigma"]
        return BuiltProblem(
            kind,
            lambda method, smoothed: problems.deblur_handles(inst, sigma if smoothed else None),
            x0=None,
            files={"b": inst.b},
        )
    if kind == "rpca":
        truth = None
        mask = None
        if problem.get("matrix_file"):
            M = fileio.read_matrix(_resolve(base_dir, problem["matrix_file"]))
            if problem.get("mask_file"):
                mask = fileio.read_mask(_resolve(base_dir, problem["mask_file"]))
        else:
            spec = problems.CompletionSpec(problem["n"], problem["r"], problem["spr"], 1.0, problem["seed"])
            gen = problems.generate_completion(spec)
            M, truth = gen.instance.M, (gen.A, gen.E)
        rho = problem["rho"] or 1.0 / math.sqrt(M.shape[0])
        inst = problems.RpcaInstance(M, rho, problem["sigma"], mask)
        files = {"M": M} if mask is None else {"M": M, "mask": mask}
        return BuiltProblem(kind, _rpca_objective(inst), x0=M, M=M, truth=truth, mask=mask, files=files)
    if kind == "completion":
        spec = problems.CompletionSpec(problem["n"], problem["r"], problem["spr"], problem["sr"], problem["seed"])
        gen = problems.generate_completion(spec, sigma=problem["sigma"])
        inst = gen.instance
        return BuiltProblem(
            kind,
            _rpca_objective(inst),
            x0=inst.M,
            M=inst.M,
            truth=(gen.A, gen.E),
            mask=inst.mask,
            files={"M": inst.M, "mask": inst.mask, "A": gen.A, "E": gen.E},
        )
    raise ValueError(f"unknown problem kind {kind!r}")


def _rpca_objective(inst):
    # the nuclear norm stays smoothed except for methods that only use prox maps
    def make(method, smoothed):
        return problems.rpca_handles(inst, smooth_f=method not in ("adal", "sadal"), smooth_g=smoothed)

    return make


def _solver_config(spec: SolverSpec, built: BuiltProblem) -> solvers.SolverConfig:
    p = spec.params
    cont = None
    if p["continuation"]:
        mu0 = p["mu0"]
        if isinstance(mu0, str):
            if built.M is None:
                raise ConfigError([f"solver.{spec.label}.mu0: {mu0!r} needs a matrix problem; give a number"])
            mu0 = problems.rpca_continuation(built.M, norm=mu0).mu0
        cont = solvers.Continuation(mu0=mu0, mu_bar=p["mu_bar"], eta=p["eta"])
    return solvers.SolverConfig(
        mu=p["mu"],
        max_iter=p["max_iter"],
        infeas_tol=p["infeas_tol"],
        obj_target=p["obj_target"],
        continuation=cont,
        force_skip=p["force_skip"],
    )


@dataclass
class ExperimentResult:
    exit_code: int
    traces: dict[str, solvers.RunTrace]
    output_dir: Path
    messages: list[str] = field(default_factory=list)


def _fmt(v) -> str:
    return "" if v is None else "%.17g" % v


def run_experiment(config: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Run every solver of ``config``; write traces and the summary.

    Exit code 2 when a solver diverged (its partial trace is still written).
    """
    out = Path(out_dir) if out_dir is not None else _resolve(config.base_dir, str(config.output_dir))
    built = build_problem(config.problem, config.base_dir)
    out.mkdir(parents=True, exist_ok=True)
    messages: list[str] = []
    traces: dict[str, solvers.RunTrace] = {}
    code = EXIT_OK
    for spec in config.solvers:
        obj = built.objective(spec.method, spec.smoothed)
        cfg = _solver_config(spec, built)
        try:
            trace = solvers.solve(spec.method, obj, cfg, x0=built.x0)
        except solvers.DivergenceError as exc:
            trace = exc.trace
            messages.append(str(exc))
            code = EXIT_DIVERGED
        traces[spec.label] = trace
        (out / f"trace_{spec.label}.csv").write_text(trace.to_csv())

    has_truth = built.truth is not None
    header = ["solver", "method", "iterations", "status", "skips"]
    header += [f"obj@{k}" for k in config.checkpoints]
    header += ["final_obj", "iters_to_target"]
    if has_truth:
        header += ["relX", "relY"]
    rows = [",".join(header)]
    timing = ["solver,wall_ms"]
    for spec in config.solvers:
        trace = traces[spec.label]
        by_k = {r.k: r.obj for r in trace.records}
        target = spec.params["obj_target"]
        cells = [spec.label, spec.method, str(len(trace)), trace.status, str(trace.skip_count)]
        cells += [_fmt(by_k.get(k)) for k in config.checkpoints]
        cells.append(_fmt(trace.records[-1].obj) if trace.records else "")
        hit = trace.iterations_to(target) if target is not None else None
        cells.append("" if hit is None else str(hit))
        if has_truth:
            if trace.final_x is None:
                cells += ["", ""]
            else:
                errs = _recovery_errors(built, trace)
                cells += [_fmt(errs.relX), _fmt(errs.relY)]
        rows.append(",".join(cells))
        elapsed = trace.records[-1].elapsed if trace.records else 0.0
        timing.append(f"{spec.label},{1000.0 * elapsed:.3f}")
    (out / "summary.csv").write_text("\n".join(rows) + "\n")
    (out / "timing.csv").write_text("\n".join(timing) + "\n")
    return ExperimentResult(code, traces, out, messages)


def _recovery_errors(built: BuiltProblem, trace) -> problems.RelativeErrors:
    """relX on all entries; relY on the observed entries only."""
    A, E = built.truth
    X = trace.final_x
    Y = built.M - trace.final_y
    if built.mask is not None:
        Y, E = project_mask(Y, built.mask), project_mask(E, built.mask)
    return problems.relative_errors(X, Y, A, E)


def generate_instance_files(spec_path, out_dir) -> list[Path]:
    """Write the instance described by ``[problem]`` of ``spec_path`` as matrix/mask files."""
    spec_path = Path(spec_path)
    try:
        text = spec_path.read_text()
    except OSError as exc:
        raise ConfigError([f"{spec_path}: cannot read ({exc.strerror})"]) from None
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"parse error: {exc}".replace("\n", " ")]) from None
    # reuse the full validator with a placeholder solver
    if not any(s.startswith("solver.") for s in parser.sections()):
        parser["solver.fista"] = {}
    buf = []
    for name in parser.sections():
        buf.append(f"[{name}]")
        buf.extend(f"{k} = {v}" for k, v in parser[name].items())
    config = parse_config("\n".join(buf), base_dir=spec_path.parent)
    built = build_problem(config.problem, config.base_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, data in built.files.items():
        if name == "mask":
            path = out / "mask.txt"
            fileio.write_mask(path, data)
        else:
            path = out / f"{name}.txt"
            fileio.write_matrix(path, data)
        written.append(path)
    return written
