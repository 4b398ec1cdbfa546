"""The coefficient triple (V, K, A) with analytic derivatives.

V and K are scalar fields, A a vector field; all are expression trees (see
fieldexpr) so gradients, Hessians and the Jacobian of A come from symbolic
differentiation.  Built-in families cover the shapes the theory cares
about: constants, Gaussian bumps (isolated extrema), ring bumps (critical
circles) and the linear gauge of a constant magnetic field.

The standing hypotheses are: 1+V strictly positive, K strictly positive,
and V'', K'', A, J_A bounded.  They are checked by sampling a box, never
proved; the report records the box that was sampled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .fieldexpr import (Bin, Call, Const, FieldExpr, Neg, Var, check_finite,
                        evaluate, to_string)


@dataclass
class FieldSample:
    """All derivative data of (V, K, A) at one point."""

    V: float
    grad_V: np.ndarray
    hess_V: np.ndarray
    K: float
    grad_K: np.ndarray
    hess_K: np.ndarray
    A: np.ndarray
    J_A: np.ndarray   # J_A[j, k] = d A_j / d x_k
    div_A: float


@dataclass
class HypothesisReport:
    box_half_width: float
    samples_per_axis: int
    inf_one_plus_V: float
    inf_K: float
    sup_abs_V: float
    sup_abs_hess_V: float
    sup_abs_K: float
    sup_abs_hess_K: float
    sup_abs_A: float
    sup_abs_J_A: float
    V1_ok: bool
    K1_ok: bool
    A1_ok: bool

    @property
    def all_ok(self):
        return self.V1_ok and self.K1_ok and self.A1_ok


@dataclass
class FieldSpec:
    """Dimension n plus the three coefficient fields.

    provenance records how each field was constructed (family + params or
    raw expression text) so reports can reproduce the setup.
    """

    n: int
    V: FieldExpr
    K: FieldExpr
    A: list  # n FieldExpr components
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.A) != self.n:
            raise DomainError(f"A must have {self.n} components")


def parse_field_expression(text, n):
    """Parse an expression over x1..xn; round-trips through to_string."""
    return FieldExpr.parse(text, n)


def _as_expr(obj, n):
    if isinstance(obj, FieldExpr):
        return obj
    if isinstance(obj, (int, float)):
        return FieldExpr.constant(obj, n)
    if isinstance(obj, str):
        return FieldExpr.parse(obj, n)
    raise DomainError(f"cannot interpret field {obj!r}")


def make_field_spec(n, V=0.0, K=1.0, A=None, provenance=None):
    """Assemble a FieldSpec from expressions, strings or constants."""
    if A is None:
        A = [0.0] * n
    return FieldSpec(n=n, V=_as_expr(V, n), K=_as_expr(K, n),
                     A=[_as_expr(a, n) for a in A],
                     provenance=provenance or {})


# --- built-in families --------------------------------------------------------

def _sq_dist(n, center):
    """AST for |x - c|^2."""
    terms = None
    for j in range(n):
        d = Bin("-", Var(j), Const(float(center[j])))
        t = Bin("^", d, Const(2.0))
        terms = t if terms is None else Bin("+", terms, t)
    return terms


def gaussian_bump(n, amplitude=1.0, center=None, width=1.0):
    """a * exp(-|x-c|^2 / s^2); an isolated nondegenerate extremum at c."""
    center = [0.0] * n if center is None else center
    node = Bin("*", Const(float(amplitude)),
               Call("exp", Neg(Bin("/", _sq_dist(n, center),
                                   Const(float(width) ** 2)))))
    return FieldExpr(node, n)


def ring_bump(n, amplitude=1.0, center=None, radius=1.0, width=0.5):
    """a * exp(-(|x-c| - r0)^2 / s^2); a critical circle (sphere for n=3)
    of radius r0 about c.

    The center c itself is a conical point of |x-c|, not a critical point,
    so the critical set is exactly the ring.  Derivative formulas divide
    by |x-c|; evaluation regularizes that denominator at 1e-30 so values
    stay finite (and large) near the cone tip.
    """
    center = [0.0] * n if center is None else center
    dist = Call("sqrt", _sq_dist(n, center))
    node = Bin("*", Const(float(amplitude)),
               Call("exp", Neg(Bin("/",
                                   Bin("^", Bin("-", dist, Const(float(radius))),
                                       Const(2.0)),
                                   Const(float(width) ** 2)))))
    return FieldExpr(node, n)


def linear_gauge(n, b=1.0):
    """Constant magnetic field gauge A = (-b x2/2, b x1/2) for n=2."""
    if n != 2:
        raise DomainError("linear_gauge is a planar (n=2) family")
    return [
        FieldExpr(Neg(Bin("*", Const(b / 2.0), Var(1))), n),
        FieldExpr(Bin("*", Const(b / 2.0), Var(0)), n),
    ]


FAMILIES = {
    "constant": lambda n, value=0.0: FieldExpr.constant(value, n),
    "gaussian": gaussian_bump,
    "ring": ring_bump,
}


# --- evaluation ----------------------------------------------------------------

def eval_field(spec, x):
    """Evaluate (V, grad V, V''; K, grad K, K''; A, J_A, div A) at a point.

    div A is the trace of the symbolic Jacobian, so the two agree exactly.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.n,):
        raise DomainError(f"point must have shape ({spec.n},)")
    coords = list(x)
    V = check_finite(spec.V(coords), "V")
    gV = np.array(spec.V.grad(coords), dtype=float)
    hV = np.array(spec.V.hess(coords), dtype=float)
    K = check_finite(spec.K(coords), "K")
    gK = np.array(spec.K.grad(coords), dtype=float)
    hK = np.array(spec.K.hess(coords), dtype=float)
    A = np.array([a(coords) for a in spec.A], dtype=float)
    J = np.array([[evaluate(a.gradient_node(k), coords) for k in range(spec.n)]
                  for a in spec.A], dtype=float)
    check_finite(gV, "grad V"); check_finite(hV, "V''")
    check_finite(gK, "grad K"); check_finite(hK, "K''")
    check_finite(A, "A"); check_finite(J, "J_A")
    return FieldSample(V=float(V), grad_V=gV, hess_V=hV, K=float(K),
                       grad_K=gK, hess_K=hK, A=A, J_A=J,
                       div_A=float(np.trace(J)))


def check_hypotheses(spec, box_half_width, samples_per_axis=41):
    """Sampled infima/suprema over [-w, w]^n and pass/fail per hypothesis."""
    if box_half_width <= 0:
        raise DomainError("box_half_width must be positive")
    axes = [np.linspace(-box_half_width, box_half_width, samples_per_axis)
            for _ in range(spec.n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = [m.ravel() for m in mesh]

    def _sup_abs(values):
        return float(np.max(np.abs(values)))

    with np.errstate(all="ignore"):
        Vv = evaluate(spec.V.node, coords) + np.zeros_like(coords[0])
        Kv = evaluate(spec.K.node, coords) + np.zeros_like(coords[0])
        hess_V = [evaluate(spec.V.hessian_node(j, k), coords)
                  for j in range(spec.n) for k in range(spec.n)]
        hess_K = [evaluate(spec.K.hessian_node(j, k), coords)
                  for j in range(spec.n) for k in range(spec.n)]
        Av = [evaluate(a.node, coords) for a in spec.A]
        Jv = [evaluate(a.gradient_node(k), coords)
              for a in spec.A for k in range(spec.n)]

    sup_hv = max(_sup_abs(h + np.zeros_like(coords[0])) for h in hess_V)
    sup_hk = max(_sup_abs(h + np.zeros_like(coords[0])) for h in hess_K)
    sup_a = max((_sup_abs(a + np.zeros_like(coords[0])) for a in Av), default=0.0)
    sup_j = max((_sup_abs(j + np.zeros_like(coords[0])) for j in Jv), default=0.0)
    inf_w = float(np.min(1.0 + Vv))
    inf_k = float(np.min(Kv))
    sup_v = _sup_abs(Vv)
    sup_k = _sup_abs(Kv)

    v1 = inf_w > 0 and np.isfinite(sup_v) and np.isfinite(sup_hv)
    k1 = inf_k > 0 and np.isfinite(sup_k) and np.isfinite(sup_hk)
    a1 = bool(np.isfinite(sup_a) and np.isfinite(sup_j))
    return HypothesisReport(
        box_half_width=float(box_half_width),
        samples_per_axis=int(samples_per_axis),
        inf_one_plus_V=inf_w, inf_K=inf_k,
        sup_abs_V=sup_v, sup_abs_hess_V=float(sup_hv),
        sup_abs_K=sup_k, sup_abs_hess_K=float(sup_hk),
        sup_abs_A=float(sup_a), sup_abs_J_A=float(sup_j),
        V1_ok=bool(v1), K1_ok=bool(k1), A1_ok=a1)


def spec_from_json(block, n):
    """Build a FieldSpec from the JSON field block format.

    {"V": {"expr": ...} | {"family": ..., "params": {...}},
     "K": ...,
     "A": {"components": [...]} | {"family": "linear_gauge", "params": {...}}}
    """
    def scalar(entry, default):
        if entry is None:
            return FieldExpr.constant(default, n)
        if isinstance(entry, (int, float)):
            return FieldExpr.constant(entry, n)
        if "expr" in entry:
            return FieldExpr.parse(entry["expr"], n)
        if "family" in entry:
            fam = entry["family"]
            if fam not in FAMILIES:
                raise DomainError(f"unknown field family {fam!r}")
            return FAMILIES[fam](n, **entry.get("params", {}))
        raise DomainError(f"cannot interpret field block {entry!r}")

    V = scalar(block.get("V"), 0.0)
    K = scalar(block.get("K"), 1.0)
    a_entry = block.get("A")
    if a_entry is None:
        A = [FieldExpr.constant(0.0, n) for _ in range(n)]
    elif isinstance(a_entry, dict) and a_entry.get("family") == "linear_gauge":
        A = linear_gauge(n, **a_entry.get("params", {}))
    elif isinstance(a_entry, dict) and "components" in a_entry:
        A = [_as_expr(c, n) for c in a_entry["components"]]
    else:
        raise DomainError(f"cannot interpret A block {a_entry!r}")
    prov = {"V": _describe(block.get("V")), "K": _describe(block.get("K")),
            "A": _describe(a_entry)}
    return FieldSpec(n=n, V=V, K=K, A=A, provenance=prov)


def _describe(entry):
    if entry is None:
        return "default"
    if isinstance(entry, (int, float)):
        return f"constant {entry}"
    if "expr" in entry:
        return f"expr {entry['expr']}"
    if "family" in entry:
        return f"family {entry['family']} {entry.get('params', {})}"
    if "components" in entry:
        return f"components {entry['components']}"
    return repr(entry)


def spec_to_json(spec):
    """Serializable field block (expressions are pretty-printed)."""
    return {
        "V": {"expr": to_string(spec.V.node)},
        "K": {"expr": to_string(spec.K.node)},
        "A": {"components": [to_string(a.node) for a in spec.A]},
    }
