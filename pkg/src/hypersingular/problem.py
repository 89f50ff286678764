"""Problem catalogue, meshes and grid functions."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np

from . import expr as ex
from .errors import (
    EvalError,
    IllegalSign,
    MeshError,
    MissingCoefficient,
    SpecError,
    UnexpectedCoefficient,
    UnsupportedDimension,
)


class Kind(str, enum.Enum):
    P1 = "P1"  # eps y'' + p y'^2 + q y' = 0
    P2 = "P2"  # eps y'' + p y'^2 + q(x) y' + r(x) = 0
    P3 = "P3"  # eps y'' + p(y) y'^2 + q(x) y' = 0
    P4 = "P4"  # self-similar potential Burgers, W(0)=alpha, W(inf)=beta
    P5 = "P5"  # eps Lap w + p |grad w|^2 + q(x).grad w + r(x) = 0
    P6 = "P6"  # eps Lap w + p(w) |grad w|^2 + q(x, w).grad w = 0
    BASELINE01 = "Baseline01"  # eps y'' + p y' + q(x, y) = 0


class LayerClass(str, enum.Enum):
    LEFT = "LeftLayer"
    RIGHT = "RightLayer"
    NONE = "NoLayer"
    DEGENERATE_CONSTANT = "DegenerateConstant"
    DEGENERATE_LINEAR = "DegenerateLinear"


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"
    DIVERGED = "Diverged"
    OVERFLOWED = "Overflowed"


@dataclass(frozen=True)
class ScalarParams:
    eps: float
    p: float = 0.0
    q: float = 0.0
    r: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0


def _space_vars(dim, extra=()):
    return tuple(f"x{i + 1}" for i in range(dim)) + tuple(extra)


def coefficient_variables(kind: Kind, dim: int = 1) -> dict:
    """Required coefficient names for ``kind`` mapped to their allowed variables."""
    if kind in (Kind.P1, Kind.P4):
        return {}
    if kind == Kind.P2:
        return {"q": ("x",), "r": ("x",)}
    if kind == Kind.P3:
        return {"p": ("y",), "q": ("x",)}
    if kind == Kind.P5:
        names = {f"q{i + 1}": _space_vars(dim, ("t",)) for i in range(dim)}
        names["r"] = _space_vars(dim, ("t",))
        return names
    if kind == Kind.P6:
        names = {"p": ("w",)}
        names.update({f"q{i + 1}": _space_vars(dim, ("w",)) for i in range(dim)})
        return names
    if kind == Kind.BASELINE01:
        return {"q": ("x", "y")}
    raise SpecError(f"unknown kind {kind!r}")


@dataclass(frozen=True)
class ProblemSpec:
    kind: Kind
    params: ScalarParams
    coeffs: Mapping[str, ex.Expr] = field(default_factory=dict)
    dim: int = 1

    @property
    def eps(self) -> float:
        return self.params.eps

    def coeff(self, name: str, *argnames: str):
        """Compiled coefficient as a positional callable with ``eps`` bound."""
        return ex.compile_expr(self.coeffs[name], argnames, eps=self.params.eps)

    def constant_coeff(self, name: str) -> Optional[float]:
        """Value of a coefficient that does not depend on any variable, else None."""
        e = self.coeffs[name]
        if not ex.is_constant(e):
            return None
        return ex.evaluate(e, {ex.EPS: self.params.eps})


def _check_finite_on_samples(spec: ProblemSpec):
    p = spec.params
    lo = min(0.0, p.alpha, p.beta)
    hi = max(0.0, p.alpha, p.beta)
    grid = [k / 10 for k in range(11)]
    ygrid = [lo + (hi - lo) * k / 10 for k in range(11)]
    for name, allowed in coefficient_variables(spec.kind, spec.dim).items():
        e = spec.coeffs[name]
        used = [v for v in allowed if v in ex.variables(e)]
        for k in range(11):
            b = {ex.EPS: p.eps}
            for v in used:
                b[v] = ygrid[k] if v in ("y", "w") else (0.0 if v == "t" else grid[k])
            try:
                ex.evaluate(e, b)
            except EvalError as exc:
                raise SpecError(f"coefficient {name!r} is not finite on the domain: {exc}") from exc


def validate_spec(spec: ProblemSpec) -> ProblemSpec:
    """Check variant invariants; returns the spec with coefficients in sorted order."""
    kind = Kind(spec.kind)
    p = spec.params
    if not (p.eps > 0 and math.isfinite(p.eps)):
        raise IllegalSign(f"eps must be positive and finite, got {p.eps!r}")
    for name in ("p", "q", "r", "alpha", "beta"):
        if not math.isfinite(getattr(p, name)):
            raise SpecError(f"{name} must be finite")
    if kind in (Kind.P5, Kind.P6):
        if spec.dim not in (1, 2):
            raise UnsupportedDimension(f"{kind.value} supports dim 1 or 2, got {spec.dim}")
    elif spec.dim != 1:
        raise UnsupportedDimension(f"{kind.value} is one-dimensional, got dim={spec.dim}")

    required = coefficient_variables(kind, spec.dim)
    for name in required:
        if name not in spec.coeffs:
            raise MissingCoefficient(f"{kind.value} needs coefficient {name!r}")
    for name in spec.coeffs:
        if name not in required:
            raise UnexpectedCoefficient(f"{kind.value} does not use coefficient {name!r}")
    for name, e in spec.coeffs.items():
        extra = ex.variables(e) - set(required[name]) - {ex.EPS}
        if extra:
            raise SpecError(f"coefficient {name!r} uses undeclared variables {sorted(extra)}")

    if kind == Kind.P1 and not (p.p > 0 and p.q > 0):
        raise IllegalSign(f"P1 needs p > 0 and q > 0, got p={p.p!r}, q={p.q!r}")
    if kind in (Kind.P2, Kind.P5) and p.p == 0:
        raise IllegalSign(f"{kind.value} needs p != 0")

    out = replace(spec, kind=kind, coeffs={k: spec.coeffs[k] for k in sorted(spec.coeffs)})
    _check_finite_on_samples(out)
    return out


def make_spec(kind, eps, *, p=0.0, q=0.0, r=0.0, alpha=0.0, beta=0.0, coeffs=None, dim=1) -> ProblemSpec:
    """Build and validate a spec; coefficient values may be strings or parsed trees."""
    kind = Kind(kind)
    allowed = coefficient_variables(kind, dim)
    parsed = {}
    for name, text in (coeffs or {}).items():
        if isinstance(text, (int, float)):
            text = repr(float(text))
        parsed[name] = ex.parse(text, allowed.get(name, ())) if isinstance(text, str) else text
    params = ScalarParams(float(eps), float(p), float(q), float(r), float(alpha), float(beta))
    return validate_spec(ProblemSpec(kind, params, parsed, dim))


_JSON_FIELDS = {"kind", "eps", "p", "q", "r", "alpha", "beta", "coeffs", "dim"}


def spec_from_dict(doc: Mapping) -> ProblemSpec:
    if not isinstance(doc, Mapping):
        raise SpecError("problem spec must be a JSON object")
    unknown = set(doc) - _JSON_FIELDS
    if unknown:
        raise SpecError(f"unknown field(s): {', '.join(sorted(unknown))}")
    for req in ("kind", "eps"):
        if req not in doc:
            raise SpecError(f"missing field {req!r}")
    try:
        kind = Kind(doc["kind"])
    except ValueError:
        raise SpecError(f"unknown kind {doc['kind']!r}") from None
    numbers = {}
    for name in ("eps", "p", "q", "r", "alpha", "beta"):
        if name in doc:
            v = doc[name]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise SpecError(f"field {name!r} must be a number")
            numbers[name] = float(v)
    coeffs = doc.get("coeffs", {})
    if not isinstance(coeffs, Mapping) or not all(isinstance(v, str) for v in coeffs.values()):
        raise SpecError("'coeffs' must map names to expression strings")
    dim = doc.get("dim", 1)
    if isinstance(dim, bool) or not isinstance(dim, int):
        raise SpecError("'dim' must be an integer")
    eps = numbers.pop("eps")
    return make_spec(kind, eps, coeffs=dict(coeffs), dim=dim, **numbers)


def spec_from_json(text: str) -> ProblemSpec:
    return spec_from_dict(json.loads(text))


def spec_to_dict(spec: ProblemSpec) -> dict:
    p = spec.params
    doc = {"kind": spec.kind.value, "eps": p.eps, "p": p.p, "q": p.q, "r": p.r, "alpha": p.alpha, "beta": p.beta}
    if spec.coeffs:
        doc["coeffs"] = {k: ex.to_string(v) for k, v in spec.coeffs.items()}
    if spec.dim != 1:
        doc["dim"] = spec.dim
    return doc


def spec_to_json(spec: ProblemSpec) -> str:
    return json.dumps(spec_to_dict(spec), sort_keys=True)


# --- meshes ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise MeshError("a mesh needs at least 3 nodes")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise MeshError("mesh must start at exactly 0 and end at exactly 1")
        if not np.all(np.diff(nodes) > 0):
            raise MeshError("mesh nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    def __len__(self):
        return self.nodes.size

    @property
    def n(self) -> int:
        """Number of cells."""
        return self.nodes.size - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)


def uniform_mesh(n: int) -> Mesh:
    if n < 2:
        raise MeshError(f"uniform mesh needs n >= 2 cells, got {n}")
    nodes = np.arange(n + 1, dtype=float) / n
    return Mesh(nodes)


def shishkin_transition(n: int, eps: float, qbar: float, sigma: float = 2.0) -> float:
    return min(0.5, sigma * eps / qbar * math.log(n))


def shishkin_mesh(n: int, eps: float, qbar: float, side: LayerClass = LayerClass.LEFT) -> Mesh:
    """Piecewise-uniform mesh with ``n/2`` cells packed into ``[0, tau]`` (or its mirror)."""
    if n < 4 or n % 2:
        raise MeshError(f"Shishkin mesh needs an even n >= 4, got {n}")
    if not eps > 0 or not qbar > 0:
        raise MeshError("Shishkin mesh needs eps > 0 and qbar > 0")
    side = LayerClass(side)
    if side not in (LayerClass.LEFT, LayerClass.RIGHT):
        raise MeshError(f"side must be LeftLayer or RightLayer, got {side.value}")
    tau = shishkin_transition(n, eps, qbar)
    half = n // 2
    k = np.arange(half + 1, dtype=float)
    inner = tau * k / half
    outer = tau + (1.0 - tau) * k[1:] / half
    nodes = np.concatenate([inner, outer])
    nodes[-1] = 1.0
    if side == LayerClass.RIGHT:
        nodes = 1.0 - nodes[::-1]
    return Mesh(nodes)


@dataclass(frozen=True, eq=False)
class GridFunction:
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.mesh),):
            raise MeshError(f"expected {len(self.mesh)} values, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def x(self) -> np.ndarray:
        return self.mesh.nodes


@dataclass(frozen=True, eq=False)
class LogGridFunction:
    """Grid values ``values * exp(shift)``, the output of the rescaled linear solves."""

    mesh: Mesh
    values: np.ndarray
    shift: float

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.mesh),):
            raise MeshError(f"expected {len(self.mesh)} values, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def logreal(self, i: int):
        from .stable import LogReal

        v = float(self.values[i])
        if v == 0:
            return LogReal(0, -math.inf)
        return LogReal(1 if v > 0 else -1, math.log(abs(v)) + self.shift)


@dataclass(frozen=True, eq=False)
class SolveReport:
    solution: object  # GridFunction, or GridFunction2D for the 2D solver
    max_error: Optional[float]
    boundary_residuals: tuple
    iterations: int
    status: Status
    linear: object = None  # rescaled linear-problem solution when one was computed
