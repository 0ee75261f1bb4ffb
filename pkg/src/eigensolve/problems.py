"""Registry of named operators, exact solutions and reference examples."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import schemes
from .errors import ConfigError
from .grid import BoxDomain
from .schemes import Coefficients, SchemeSpec

# ---------------------------------------------------------------------------
# operators


def _dim(params, default=1) -> int:
    dim = int(params.get("dim", default))
    if dim < 1:
        raise ConfigError("dim must be a positive integer")
    return dim


def _coefficients(spec) -> Coefficients:
    if isinstance(spec, Coefficients):
        return spec
    unknown = set(spec) - {"a", "b", "c", "upwind"}
    if unknown:
        raise ConfigError(f"unknown coefficient keys {sorted(unknown)}")
    a = spec.get("a", 1.0)
    if np.any(np.asarray(a, float) <= 0):
        raise ConfigError("diffusion coefficient a must be positive")
    return Coefficients(a=a, b=spec.get("b", 0.0), c=spec.get("c", 0.0),
                        upwind=bool(spec.get("upwind", False)))


EXAMPLE2_K = (2 + math.sqrt(2)) / (2 * math.sqrt(2))


def discontinuous_coefficient(k: float = EXAMPLE2_K) -> SchemeSpec:
    """``a(x) u''`` on ``(0, pi)`` with ``a = 1`` left of ``pi / (2k)`` and 2 right of it."""
    jump = math.pi / (2 * k)

    def a(x):
        return np.where(x[:, 0] < jump, 1.0, 2.0)

    def continuous(x, z, p, M):
        return a(x) * M[:, 0, 0]

    scheme = schemes.variable_coefficient(a=a, dim=1, name="discontinuous_example2")
    return replace(scheme, continuous=continuous, params={"k": k},
                   structure_constants=(1.0, 2.0, 0.0))


def _build_variable(params):
    coefs = _coefficients({k: params[k] for k in ("a", "b", "c", "upwind") if k in params})
    return schemes.variable_coefficient(coefs.a, coefs.b, coefs.c, dim=_dim(params),
                                        upwind=coefs.upwind)


def _build_hjb(params):
    families = params.get("families")
    if not families:
        raise ConfigError("hjb needs a non-empty 'families' list")
    inner = params.get("inner")
    if inner is None:
        fams = [_coefficients(f) for f in families]
    else:
        fams = [[_coefficients(f) for f in group] for group in families]
    return schemes.hjb(fams, outer=params.get("outer", "sup"), inner=inner, dim=_dim(params))


OPERATORS: dict[str, tuple[frozenset, Callable[[dict], SchemeSpec]]] = {
    "laplacian": (frozenset({"dim"}), lambda p: schemes.laplacian(_dim(p))),
    "variable_coefficient": (frozenset({"dim", "a", "b", "c", "upwind"}), _build_variable),
    "discontinuous_example2": (frozenset({"k"}),
                               lambda p: discontinuous_coefficient(float(p.get("k", EXAMPLE2_K)))),
    "fucik": (frozenset({"alpha", "dim"}),
              lambda p: schemes.fucik(float(p.get("alpha", 0.5)), _dim(p))),
    "pucci_plus": (frozenset({"a", "A", "dim"}),
                   lambda p: schemes.pucci(float(p.get("a", 1.0)), float(p.get("A", 2.0)),
                                           "plus", _dim(p))),
    "pucci_minus": (frozenset({"a", "A", "dim"}),
                    lambda p: schemes.pucci(float(p.get("a", 1.0)), float(p.get("A", 2.0)),
                                            "minus", _dim(p))),
    "p_laplace": (frozenset({"p"}), lambda p: schemes.p_laplace_1d(float(p.get("p", 4.0)))),
    "ornstein_uhlenbeck": (frozenset({"dim"}),
                           lambda p: schemes.ornstein_uhlenbeck(_dim(p, 2))),
    "hjb": (frozenset({"families", "outer", "inner", "dim"}), _build_hjb),
}


def build_operator(name: str, params: dict | None = None) -> SchemeSpec:
    """Instantiate a registered operator, rejecting unknown parameters."""
    params = dict(params or {})
    try:
        allowed, factory = OPERATORS[name]
    except KeyError:
        raise ConfigError(f"unknown operator {name!r}; choose from {sorted(OPERATORS)}") from None
    unknown = set(params) - allowed
    if unknown:
        raise ConfigError(f"unknown parameters {sorted(unknown)} for operator {name!r}")
    try:
        return factory(params)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameters for {name!r}: {exc}") from exc


def operator_dimension(name: str, params: dict | None = None) -> int:
    params = params or {}
    if name in ("discontinuous_example2", "p_laplace"):
        return 1
    return _dim(params, 2 if name == "ornstein_uhlenbeck" else 1)


# ---------------------------------------------------------------------------
# exact solutions


@dataclass(frozen=True)
class ExactSolution:
    lambda_exact: float
    eigenfunction_exact: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not math.isfinite(self.lambda_exact):
            raise ValueError("lambda_exact must be finite")


def sine_product(domain: BoxDomain):
    return schemes.sine_product(domain).value


def ou_polynomial(domain: BoxDomain):
    def w(x):
        return np.prod(1 - np.atleast_2d(x) ** 2, axis=1)
    return w


def example2_eigenfunction(domain: BoxDomain, k: float = EXAMPLE2_K):
    jump = math.pi / (2 * k)
    c = math.pi * (1 - k / math.sqrt(2))
    b = 1.0 / math.sin(math.pi / (2 * math.sqrt(2)) + c)

    def w(x):
        t = np.atleast_2d(x)[:, 0]
        return np.where(t < jump, np.sin(k * t), b * np.sin(k * t / math.sqrt(2) + c))
    return w


def distance_to_boundary(domain: BoxDomain):
    lower, upper = np.asarray(domain.lower), np.asarray(domain.upper)

    def w(x):
        x = np.atleast_2d(x)
        return np.minimum(x - lower, upper - x).min(axis=1)
    return w


EIGENFUNCTIONS = {
    "sine_product": sine_product,
    "ou_polynomial": ou_polynomial,
    "example2": example2_eigenfunction,
    "distance": distance_to_boundary,
}


def p_laplace_eigenvalue(p: float, a: float = 0.0, b: float = 1.0) -> float:
    """Principal eigenvalue of the one-dimensional p-Laplacian on ``(a, b)``."""
    root = 2 * math.pi * (p - 1) ** (1 / p) / ((b - a) * p * math.sin(math.pi / p))
    return root**p


def exact_solution(name: str, params: dict, domain: BoxDomain) -> ExactSolution | None:
    """Closed-form eigenpair of a registered operator where one is known."""
    params = params or {}
    widths = domain.widths
    laplace = float(np.pi**2 * np.sum(widths**-2.0))
    sine = sine_product(domain)
    if name == "laplacian":
        return ExactSolution(laplace, sine)
    if name == "fucik":
        # a positive eigenfunction is concave, where both max (alpha <= 1) and
        # min (alpha > 1) select the plain Laplacian branch
        return ExactSolution(laplace, sine)
    if name in ("pucci_plus", "pucci_minus"):
        a, A = float(params.get("a", 1.0)), float(params.get("A", 2.0))
        return ExactSolution((a if name == "pucci_plus" else A) * laplace, sine)
    if name == "p_laplace":
        return ExactSolution(p_laplace_eigenvalue(float(params.get("p", 4.0)),
                                                  domain.lower[0], domain.upper[0]))
    if name == "ornstein_uhlenbeck":
        if np.allclose(domain.lower, -1) and np.allclose(domain.upper, 1):
            return ExactSolution(2.0 * domain.dim, ou_polynomial(domain))
        return None
    if name == "discontinuous_example2":
        k = float(params.get("k", EXAMPLE2_K))
        if np.isclose(domain.lower[0], 0) and np.isclose(domain.upper[0], np.pi):
            return ExactSolution(k**2, example2_eigenfunction(domain, k))
        return None
    return None


# ---------------------------------------------------------------------------
# reference examples


@dataclass(frozen=True)
class Example:
    name: str
    operator: str
    params: dict
    domain: BoxDomain
    h_list: tuple
    exact: ExactSolution = field(repr=False, default=None)

    def scheme(self) -> SchemeSpec:
        return build_operator(self.operator, self.params)


def _example(name, operator, params, lower, upper, h_list, exact=None):
    domain = BoxDomain(tuple(lower), tuple(upper))
    exact = exact or exact_solution(operator, params, domain)
    return Example(name, operator, params, domain, tuple(h_list), exact)


_HALVINGS = tuple(0.1 / 2**k for k in range(5))

EXAMPLES = {
    "example1": _example("example1", "laplacian", {"dim": 1}, [0.0], [1.0], _HALVINGS),
    "example2": _example("example2", "discontinuous_example2", {}, [0.0], [math.pi],
                         [math.pi / (20 * 2**k) for k in range(5)]),
    # (0, pi) is not a multiple of 0.1; the steps are scaled by pi
    "example3": _example("example3", "fucik", {"alpha": 0.5, "dim": 1}, [0.0], [math.pi],
                         [math.pi * h for h in _HALVINGS]),
    "example4": _example("example4", "p_laplace", {"p": 4.0}, [0.0], [1.0], _HALVINGS),
    "example5": _example("example5", "laplacian", {"dim": 2}, [0.0, 0.0], [1.0, 1.0],
                         (0.2, 0.1, 0.05, 0.025)),
    "example6": _example("example6", "ornstein_uhlenbeck", {"dim": 2}, [-1.0, -1.0],
                         [1.0, 1.0], (0.4, 0.2, 0.1, 0.05)),
}
