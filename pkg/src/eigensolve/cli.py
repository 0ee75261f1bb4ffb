"""Command-line front end.

Every subcommand reads one JSON run configuration::

    {
      "problem": {"operator": "laplacian", "params": {"dim": 1},
                  "domain": {"lower": [0], "upper": [1]}},
      "grid": {"h_list": [0.1, 0.05]},
      "solver": {"seed": 0},
      "outputs": {"table_path": "table.csv", "eigenfunction_path": "w.csv"},
      "exact": {"lambda": "pi**2", "eigenfunction": "sine_product"}
    }

Numbers may be written as arithmetic strings using ``pi``, ``e`` and
``sqrt``.  Unknown keys are rejected.  Exit codes: 0 success, 1 solver
non-convergence, 2 configuration error, 3 failed property check, 4 I/O
error.
"""

from __future__ import annotations

import argparse
import ast
import json
import logging
import math
import operator
import sys
from dataclasses import dataclass, field

from . import __version__
from .dirichlet import bracket_eigenvalue
from .errors import (BadBracket, ConfigError, EigensolveError, NoConvergence, NotLinear,
                     SizeGuard)
from .grid import BoxDomain, build_grid
from .harness import emit_csv, emit_eigenfunction, run_convergence
from .linear_oracle import DENSE_GUARD, assemble_matrix, dense_spectrum, inverse_power
from .minimax import MinimaxConfig, solve_eigen
from .problems import (EIGENFUNCTIONS, OPERATORS, ExactSolution, build_operator,
                       exact_solution, operator_dimension)
from .validation import INSTANCES, check_pucci_reflection, check_scaling, run_validation

EXIT_OK, EXIT_NO_CONVERGENCE, EXIT_CONFIG, EXIT_PROPERTY, EXIT_IO = range(5)

logger = logging.getLogger("eigensolve")

# ---------------------------------------------------------------------------
# arithmetic expressions

_BINARY = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_NAMES = {"pi": math.pi, "e": math.e}
_FUNCS = {"sqrt": math.sqrt}


def evaluate_number(value, what: str = "value") -> float:
    """A JSON number or an arithmetic string such as ``"pi/20"``."""
    if isinstance(value, bool):
        raise ConfigError(f"{what} must be a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{what} must be a number or expression, got {value!r}")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
            return _BINARY[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ConfigError(f"unsupported expression in {what}: {value!r}")

    try:
        out = ev(ast.parse(value, mode="eval"))
    except SyntaxError:
        raise ConfigError(f"cannot parse {what}: {value!r}") from None
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        raise ConfigError(f"cannot evaluate {what}: {value!r} ({exc})") from None
    if not math.isfinite(out):
        raise ConfigError(f"{what} is not finite: {value!r}")
    return out


def _numbers(values, what):
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{what} must be a non-empty list")
    return [evaluate_number(v, what) for v in values]


def _numeric_params(value, what):
    """Evaluate expression strings inside operator parameters (recursively)."""
    if isinstance(value, dict):
        return {k: _numeric_params(v, f"{what}.{k}") for k, v in value.items()}
    if isinstance(value, list):
        return [_numeric_params(v, what) for v in value]
    if isinstance(value, str) and what.rsplit(".", 1)[-1] not in ("outer", "inner"):
        return evaluate_number(value, what)
    return value


# ---------------------------------------------------------------------------
# configuration


def _check_keys(section: dict, allowed: set, where: str, required: set = frozenset()):
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = set(required) - set(section)
    if missing:
        raise ConfigError(f"missing keys in {where}: {sorted(missing)}")


def _default_domain(name: str, dim: int) -> BoxDomain:
    if name == "discontinuous_example2":
        return BoxDomain((0.0,), (math.pi,))
    if name == "ornstein_uhlenbeck":
        return BoxDomain.cube(-1.0, 1.0, dim)
    return BoxDomain.cube(0.0, 1.0, dim)


_SOLVER_KEYS = {"parameterization", "temperatures", "inner_tolerance", "outer_tolerance",
                "max_iterations", "seed"}


@dataclass
class RunConfig:
    """Parsed, fully evaluated run configuration."""

    operator: str
    params: dict
    domain: BoxDomain
    h_list: list
    solver: dict = field(default_factory=dict)
    table_path: str | None = None
    eigenfunction_path: str | None = None
    exact_lambda: float | None = None
    exact_eigenfunction: str | None = None
    instances: int = INSTANCES

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        _check_keys(doc, {"problem", "grid", "solver", "outputs", "exact", "validation"},
                    "config", {"problem", "grid"})
        problem = doc["problem"]
        _check_keys(problem, {"operator", "params", "domain", "dimension"}, "problem",
                    {"operator"})
        name = problem["operator"]
        if name not in OPERATORS:
            raise ConfigError(f"unknown operator {name!r}; choose from {sorted(OPERATORS)}")
        params = _numeric_params(problem.get("params", {}) or {}, "params")
        if not isinstance(params, dict):
            raise ConfigError("problem.params must be an object")
        build_operator(name, params)  # validates the parameters
        dim = operator_dimension(name, params)
        if "dimension" in problem and int(problem["dimension"]) != dim:
            raise ConfigError(f"dimension {problem['dimension']} does not match operator "
                              f"{name!r} of dimension {dim}")
        if "domain" in problem:
            _check_keys(problem["domain"], {"lower", "upper"}, "problem.domain",
                        {"lower", "upper"})
            lower = _numbers(problem["domain"]["lower"], "domain.lower")
            upper = _numbers(problem["domain"]["upper"], "domain.upper")
            if len(lower) != dim or len(upper) != dim:
                raise ConfigError(f"domain bounds must have length {dim}")
            try:
                domain = BoxDomain(tuple(lower), tuple(upper))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        else:
            domain = _default_domain(name, dim)

        grid = doc["grid"]
        _check_keys(grid, {"h", "h_list", "divisions", "divisions_list"}, "grid")
        if len(grid) != 1:
            raise ConfigError("grid needs exactly one of h, h_list, divisions, divisions_list")
        (key, value), = grid.items()
        width = float(domain.widths[0])
        if key == "h":
            h_list = [evaluate_number(value, "grid.h")]
        elif key == "h_list":
            h_list = _numbers(value, "grid.h_list")
        elif key == "divisions":
            h_list = [width / int(value)]
        else:
            h_list = [width / int(v) for v in value]
        if any(h <= 0 for h in h_list):
            raise ConfigError("grid spacings must be positive")

        solver = doc.get("solver", {}) or {}
        _check_keys(solver, _SOLVER_KEYS, "solver")
        solver = {k: ([evaluate_number(t, "temperatures") for t in v] if k == "temperatures"
                      else v) for k, v in solver.items()}
        try:
            MinimaxConfig(**solver)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid solver settings: {exc}") from None

        outputs = doc.get("outputs", {}) or {}
        _check_keys(outputs, {"table_path", "eigenfunction_path"}, "outputs")
        exact = doc.get("exact", {}) or {}
        _check_keys(exact, {"lambda", "eigenfunction"}, "exact")
        eigenfunction = exact.get("eigenfunction")
        if eigenfunction is not None and eigenfunction not in EIGENFUNCTIONS:
            raise ConfigError(f"unknown eigenfunction {eigenfunction!r}; "
                              f"choose from {sorted(EIGENFUNCTIONS)}")
        validation = doc.get("validation", {}) or {}
        _check_keys(validation, {"instances"}, "validation")
        instances = int(validation.get("instances", INSTANCES))
        if instances < 1:
            raise ConfigError("validation.instances must be positive")
        return cls(operator=name, params=params, domain=domain, h_list=h_list, solver=solver,
                   table_path=outputs.get("table_path"),
                   eigenfunction_path=outputs.get("eigenfunction_path"),
                   exact_lambda=(evaluate_number(exact["lambda"], "exact.lambda")
                                 if "lambda" in exact else None),
                   exact_eigenfunction=eigenfunction, instances=instances)

    def to_dict(self) -> dict:
        """Canonical document; ``from_dict(to_dict())`` reproduces the run."""
        doc = {"problem": {"operator": self.operator, "params": self.params,
                           "domain": {"lower": list(self.domain.lower),
                                      "upper": list(self.domain.upper)}},
               "grid": {"h_list": list(self.h_list)},
               "solver": dict(self.solver),
               "validation": {"instances": self.instances}}
        outputs = {k: v for k, v in (("table_path", self.table_path),
                                     ("eigenfunction_path", self.eigenfunction_path)) if v}
        if outputs:
            doc["outputs"] = outputs
        exact = {}
        if self.exact_lambda is not None:
            exact["lambda"] = self.exact_lambda
        if self.exact_eigenfunction is not None:
            exact["eigenfunction"] = self.exact_eigenfunction
        if exact:
            doc["exact"] = exact
        return doc

    def scheme(self):
        return build_operator(self.operator, self.params)

    def minimax_config(self) -> MinimaxConfig:
        return MinimaxConfig(**self.solver)

    def exact(self) -> ExactSolution | None:
        known = exact_solution(self.operator, self.params, self.domain)
        lam = self.exact_lambda if self.exact_lambda is not None else (
            known.lambda_exact if known else None)
        if lam is None:
            return None
        if self.exact_eigenfunction is not None:
            w = EIGENFUNCTIONS[self.exact_eigenfunction](self.domain)
        elif known is not None and self.exact_lambda is None:
            w = known.eigenfunction_exact
        else:
            w = None
        return ExactSolution(lam, w)


def load_config(path) -> RunConfig:
    """Read and validate a JSON configuration file.

    Raises ``OSError`` if the file cannot be read and :class:`ConfigError`
    for malformed or unknown content.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return RunConfig.from_dict(doc)


# ---------------------------------------------------------------------------
# subcommands


def _grid(cfg: RunConfig, h=None):
    h = cfg.h_list[0] if h is None else h
    return build_grid(cfg.domain, h, cfg.scheme().stencil)


def _cmd_solve(cfg: RunConfig, args) -> int:
    scheme = cfg.scheme()
    grid = _grid(cfg, None if args.h is None else evaluate_number(args.h, "--h"))
    result = solve_eigen(scheme, grid, cfg.minimax_config())
    print(f"lambda = {result.eigenvalue:.15g}")
    print(f"residual = {result.residual:.3e}")
    print(f"certificate = {result.certificate:.15g}")
    if cfg.eigenfunction_path:
        emit_eigenfunction(result, cfg.eigenfunction_path)
    return EXIT_OK


def _cmd_converge(cfg: RunConfig, args) -> int:
    report = run_convergence(cfg.scheme(), cfg.domain, cfg.h_list, cfg.exact(),
                             cfg.minimax_config())

    def fmt(v, spec):
        return "" if v is None else format(v, spec)

    print(f"{'h':>12} {'lambda':>20} {'err_lambda':>12} {'order':>8} {'err_inf_w':>12} "
          f"{'err_l2_w':>12}")
    for row in report.rows:
        print(f"{row.h:12.6g} {row.lam:20.15g} {fmt(row.err_lambda, '.4e'):>12} "
              f"{fmt(row.order_lambda, '.4f'):>8} {fmt(row.err_inf_w, '.4e'):>12} "
              f"{fmt(row.err_l2_w, '.4e'):>12}")
        if row.error:
            print(f"h={row.h:g}: {row.error}", file=sys.stderr)
    if cfg.table_path:
        emit_csv(report, cfg.table_path)
    if cfg.eigenfunction_path and report.results[-1] is not None:
        emit_eigenfunction(report.results[-1], cfg.eigenfunction_path)
    return EXIT_NO_CONVERGENCE if report.failures else EXIT_OK


def _cmd_oracle(cfg: RunConfig, args) -> int:
    scheme = cfg.scheme()
    grid = _grid(cfg, None if args.h is None else evaluate_number(args.h, "--h"))
    if not scheme.is_linear:
        raise NotLinear(f"operator is not linear: {cfg.operator!r}")
    system = assemble_matrix(scheme, grid)
    ok, min_off, max_diag = system.sign_structure()
    print(f"sign structure: {'ok' if ok else 'VIOLATED'} "
          f"(min off-diagonal {min_off:.3g}, max diagonal {max_diag:.3g})")
    lam_ip, _ = inverse_power(system)
    print(f"inverse power  lambda = {lam_ip:.15g}")
    agree = True
    try:
        spec = dense_spectrum(system)
        gap = abs(spec.principal_value - lam_ip)
        agree &= gap <= 1e-9 * max(1.0, abs(lam_ip))
        print(f"dense spectrum lambda = {spec.principal_value:.15g}  (|diff| = {gap:.3e})")
    except SizeGuard:
        print(f"dense spectrum skipped: more than {DENSE_GUARD} unknowns")
    lam_mm = solve_eigen(scheme, grid, cfg.minimax_config()).eigenvalue
    gap = abs(lam_mm - lam_ip)
    agree &= gap <= 1e-6 * max(1.0, abs(lam_ip))
    print(f"minimax        lambda = {lam_mm:.15g}  (|diff| = {gap:.3e})")
    print("agreement: " + ("yes" if agree else "NO"))
    return EXIT_OK if agree and ok else EXIT_PROPERTY


def _cmd_bracket(cfg: RunConfig, args) -> int:
    scheme = cfg.scheme()
    grid = _grid(cfg, None if args.h is None else evaluate_number(args.h, "--h"))
    lo, hi = evaluate_number(args.lo, "--lo"), evaluate_number(args.hi, "--hi")
    interval = bracket_eigenvalue(scheme, grid, lo, hi, tol=args.tol)
    print(f"lambda in [{interval.lower:.15g}, {interval.upper:.15g}]")
    print(f"midpoint = {interval.midpoint:.15g}")
    return EXIT_OK


def _cmd_validate(cfg: RunConfig, args) -> int:
    scheme = cfg.scheme()
    grid = _grid(cfg, None if args.h is None else evaluate_number(args.h, "--h"))
    seed = cfg.solver.get("seed", 0)
    reports = run_validation(scheme, grid, instances=cfg.instances, seed=seed)
    if cfg.operator in ("pucci_plus", "pucci_minus"):
        p = cfg.params
        reports.append(check_pucci_reflection(p.get("a", 1.0), p.get("A", 2.0),
                                              p.get("dim", 1)))
    if cfg.operator == "laplacian":
        reports.append(check_scaling(dim=int(cfg.params.get("dim", 1))))
    for report in reports:
        print(report.line())
    failed = [r.name for r in reports if not r.passed]
    print(f"{len(reports) - len(failed)}/{len(reports)} checks passed")
    return EXIT_PROPERTY if failed else EXIT_OK


COMMANDS = {"solve": _cmd_solve, "converge": _cmd_converge, "oracle": _cmd_oracle,
            "bracket": _cmd_bracket, "validate": _cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eigensolve", description="Principal eigenvalues of finite difference schemes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="more logging (repeat for debug output)")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"solve": "solve on one grid and print lambda",
             "converge": "convergence study over the configured h values",
             "oracle": "compare inverse power, dense spectrum and minimax (linear only)",
             "bracket": "bracket lambda by monotone iteration",
             "validate": "run the property suites"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="JSON run configuration")
        if name != "converge":
            p.add_argument("--h", help="grid spacing (overrides the config)")
        if name == "bracket":
            p.add_argument("--lo", required=True, help="lambda known to lie below")
            p.add_argument("--hi", required=True, help="lambda known to lie above")
            p.add_argument("--tol", type=float, default=1e-6, help="final interval width")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, BadBracket, NotLinear) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoConvergence as exc:
        print(f"error: no convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (EigensolveError, ValueError) as exc:
        # grid construction and similar input problems
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
