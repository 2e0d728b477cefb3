"""Spherical chart, round metric, and smooth vector fields with jets.

The chart is (theta, phi) in [0, 2pi) x (0, pi) with metric
diag(sin^2 phi, 1); the poles are excluded. A vector field is
V = v1 d/dtheta + v2 d/dphi. The rotated-by-90-degrees companion is
Vperp = v2 d/dtheta - sin^2(phi) v1 d/dphi, which satisfies
<V, Vperp>_g = 0 and |Vperp| = |V| sin(phi).

Built-in fields: "rotation" (v1=1, v2=0), "zgrad" (v1=0, v2=-sin phi),
and "tilted" (the rotation generator about the x-axis, whose two zeros
sit inside the chart on the equator). "custom:<v1>;<v2>" accepts a small
arithmetic grammar over theta and phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .errors import ArgumentError, FieldEvaluationError

_TWO_PI = 2.0 * math.pi

# Step for the finite-difference partials of custom field components.
_CUSTOM_FD_STEP = 1e-6


@dataclass(frozen=True)
class SpherePoint:
    """Chart point: longitude theta in [0, 2pi), colatitude phi in (0, pi)."""

    theta: float
    phi: float

    def __post_init__(self):
        th = float(self.theta) % _TWO_PI
        ph = float(self.phi)
        if not 0.0 < ph < math.pi:
            raise ArgumentError(f"phi must lie strictly in (0, pi), got {ph!r}")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "phi", ph)


@dataclass(frozen=True)
class FieldJet:
    """Components of V and their first partials at one point."""

    v1: float
    v2: float
    d_theta_v1: float
    d_phi_v1: float
    d_theta_v2: float
    d_phi_v2: float


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """A named vector field plus its declared zero set.

    ``zeros`` lists isolated in-chart zeros as (theta, phi, order); zeros
    sitting at the poles are recorded through ``zeros_at_poles`` since the
    poles are outside the chart anyway. The descriptor is declarative,
    not detected: excision radii depend on the vanishing order, which is
    an input.
    """

    name: str
    v1: Callable
    v2: Callable
    partials: Optional[tuple] = None  # (d_theta_v1, d_phi_v1, d_theta_v2, d_phi_v2)
    zeros: tuple = ()
    zeros_at_poles: bool = False
    max_vanishing_order: int = 1


def metric_at(p: SpherePoint) -> np.ndarray:
    """Round metric in chart coordinates: diag(sin^2 phi, 1)."""
    s = math.sin(p.phi)
    return np.array([[s * s, 0.0], [0.0, 1.0]])


def kernel_argument(x: SpherePoint, y: SpherePoint) -> float:
    """Cosine of the geodesic distance, clamped into [-1, 1]."""
    h = math.cos(x.phi) * math.cos(y.phi) + math.sin(x.phi) * math.sin(y.phi) * math.cos(
        x.theta - y.theta
    )
    return min(1.0, max(-1.0, h))


def geodesic_distance(x: SpherePoint, y: SpherePoint) -> float:
    return math.acos(kernel_argument(x, y))


# --- built-in field catalog -------------------------------------------------

def _const(c):
    return lambda theta, phi: np.broadcast_arrays(np.asarray(theta, dtype=float) * 0.0 + c,
                                                  np.asarray(phi, dtype=float))[0]


def _zero(theta, phi):
    return np.zeros(np.broadcast_shapes(np.shape(theta), np.shape(phi)))


def _rotation() -> FieldSpec:
    one = _const(1.0)
    zero = _zero
    return FieldSpec(
        name="rotation",
        v1=one,
        v2=zero,
        partials=(zero, zero, zero, zero),
        zeros=(),
        zeros_at_poles=True,
        max_vanishing_order=1,
    )


def _zgrad() -> FieldSpec:
    def v2(theta, phi):
        return -np.sin(phi) + 0.0 * np.asarray(theta, dtype=float)

    def d_phi_v2(theta, phi):
        return -np.cos(phi) + 0.0 * np.asarray(theta, dtype=float)

    zero = _zero
    return FieldSpec(
        name="zgrad",
        v1=zero,
        v2=v2,
        partials=(zero, zero, zero, d_phi_v2),
        zeros=(),
        zeros_at_poles=True,
        max_vanishing_order=1,
    )


def _tilted() -> FieldSpec:
    # Rotation generator about the x-axis. Its zeros (0, pi/2) and
    # (pi, pi/2) are interior chart points, which is what the excision
    # logic needs to be exercised on.
    def v1(theta, phi):
        return -np.cos(theta) * np.cos(phi) / np.sin(phi)

    def v2(theta, phi):
        return -np.sin(theta) + 0.0 * np.asarray(phi, dtype=float)

    def d_theta_v1(theta, phi):
        return np.sin(theta) * np.cos(phi) / np.sin(phi)

    def d_phi_v1(theta, phi):
        return np.cos(theta) / np.sin(phi) ** 2

    def d_theta_v2(theta, phi):
        return -np.cos(theta) + 0.0 * np.asarray(phi, dtype=float)

    zero = _zero
    return FieldSpec(
        name="tilted",
        v1=v1,
        v2=v2,
        partials=(d_theta_v1, d_phi_v1, d_theta_v2, zero),
        zeros=((0.0, math.pi / 2.0, 1), (math.pi, math.pi / 2.0, 1)),
        zeros_at_poles=False,
        max_vanishing_order=1,
    )


# --- minimal expression grammar for custom fields ---------------------------
#
#   expr   := term (("+" | "-") term)*
#   term   := unary (("*" | "/") unary)*
#   unary  := "-" unary | atom
#   atom   := number | "theta" | "phi" | ("sin" | "cos") "(" expr ")"
#           | "(" expr ")"

_TOKEN_CHARS = set("+-*/()")


def _tokenize(text: str):
    tokens = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
        elif c in _TOKEN_CHARS:
            tokens.append(c)
            i += 1
        elif c.isdigit() or c == ".":
            j = i
            while j < len(text) and (text[j].isdigit() or text[j] in ".eE" or
                                     (text[j] in "+-" and text[j - 1] in "eE")):
                j += 1
            tokens.append(("num", float(text[i:j])))
            i = j
        elif c.isalpha():
            j = i
            while j < len(text) and text[j].isalpha():
                j += 1
            word = text[i:j]
            if word not in ("theta", "phi", "sin", "cos"):
                raise ArgumentError(f"unknown name {word!r} in field expression")
            tokens.append(("name", word))
            i = j
        else:
            raise ArgumentError(f"unexpected character {c!r} in field expression")
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise ArgumentError(f"malformed field expression near token {tok!r}")
        self.pos += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.peek() is not None:
            raise ArgumentError(f"trailing input in field expression: {self.peek()!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            rhs = self.term()
            node = (op, node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek() in ("*", "/"):
            op = self.take()
            rhs = self.unary()
            node = (op, node, rhs)
        return node

    def unary(self):
        if self.peek() == "-":
            self.take()
            return ("neg", self.unary())
        return self.atom()

    def atom(self):
        tok = self.take()
        if tok == "(":
            node = self.expr()
            self.take(")")
            return node
        if isinstance(tok, tuple):
            kind, val = tok
            if kind == "num":
                return ("num", val)
            if val in ("theta", "phi"):
                return (val,)
            if val in ("sin", "cos"):
                # parenthesized argument, or juxtaposition as in "cos theta"
                if self.peek() == "(":
                    self.take("(")
                    node = self.expr()
                    self.take(")")
                else:
                    node = self.unary()
                return (val, node)
        raise ArgumentError(f"malformed field expression near token {tok!r}")


def _as_float_array(x):
    a = np.asarray(x)
    if not np.issubdtype(a.dtype, np.floating):
        a = a.astype(float)
    return a


def _eval_node(node, theta, phi):
    # asarray keeps the caller's float width (the covariance oracle feeds
    # extended precision through here) and gives numpy error semantics.
    op = node[0]
    if op == "num":
        return node[1] + 0.0 * (_as_float_array(theta) + _as_float_array(phi))
    if op == "theta":
        return _as_float_array(theta) + 0.0 * _as_float_array(phi)
    if op == "phi":
        return _as_float_array(phi) + 0.0 * _as_float_array(theta)
    if op == "neg":
        return -_eval_node(node[1], theta, phi)
    if op == "sin":
        return np.sin(_eval_node(node[1], theta, phi))
    if op == "cos":
        return np.cos(_eval_node(node[1], theta, phi))
    a = _eval_node(node[1], theta, phi)
    b = _eval_node(node[2], theta, phi)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    raise AssertionError(f"unhandled node {node!r}")


def _compile_expr(text: str) -> Callable:
    node = _Parser(_tokenize(text)).parse()

    def fn(theta, phi, _node=node):
        try:
            with np.errstate(divide="raise", invalid="raise"):
                return _eval_node(_node, theta, phi)
        except FloatingPointError as exc:
            raise FieldEvaluationError(f"field expression failed at evaluation: {exc}")

    return fn


_CATALOG = {"rotation": _rotation, "zgrad": _zgrad, "tilted": _tilted}


def parse_field(text: str) -> FieldSpec:
    """Build a FieldSpec from a config string.

    Accepts "rotation", "zgrad", "tilted", or "custom:<v1-expr>;<v2-expr>"
    where the expressions use + - * / sin cos theta phi and numeric
    constants. Custom fields get finite-difference partials and an empty
    zero descriptor.
    """
    text = text.strip()
    if text in _CATALOG:
        return _CATALOG[text]()
    if text.startswith("custom:"):
        body = text[len("custom:"):]
        if ";" not in body:
            raise ArgumentError("custom field needs 'custom:<v1>;<v2>'")
        e1, e2 = body.split(";", 1)
        return FieldSpec(name=text, v1=_compile_expr(e1), v2=_compile_expr(e2))
    raise ArgumentError(f"unknown field {text!r}")


def field_components(spec: FieldSpec, theta, phi):
    """(v1, v2) evaluated elementwise; works on scalars and arrays."""
    return spec.v1(theta, phi), spec.v2(theta, phi)


def field_jet_arrays(spec: FieldSpec, theta, phi):
    """Vectorized jet: six arrays (v1, v2, dth_v1, dph_v1, dth_v2, dph_v2)."""
    v1 = spec.v1(theta, phi)
    v2 = spec.v2(theta, phi)
    if spec.partials is not None:
        p = spec.partials
        return v1, v2, p[0](theta, phi), p[1](theta, phi), p[2](theta, phi), p[3](theta, phi)
    h = _CUSTOM_FD_STEP
    d_theta_v1 = (spec.v1(theta + h, phi) - spec.v1(theta - h, phi)) / (2 * h)
    d_phi_v1 = (spec.v1(theta, phi + h) - spec.v1(theta, phi - h)) / (2 * h)
    d_theta_v2 = (spec.v2(theta + h, phi) - spec.v2(theta - h, phi)) / (2 * h)
    d_phi_v2 = (spec.v2(theta, phi + h) - spec.v2(theta, phi - h)) / (2 * h)
    return v1, v2, d_theta_v1, d_phi_v1, d_theta_v2, d_phi_v2


def field_jet(spec: FieldSpec, p: SpherePoint) -> FieldJet:
    """Components and first partials of V at one chart point.

    Built-in fields use their analytic partials; custom fields fall back
    to central finite differences with step 1e-6.
    """
    parts = field_jet_arrays(spec, p.theta, p.phi)
    return FieldJet(*(float(x) for x in parts))


def perp_components(j: FieldJet, p: SpherePoint):
    """Components of Vperp: (v2, -sin^2(phi) * v1)."""
    s = math.sin(p.phi)
    return j.v2, -s * s * j.v1


def norms(j: FieldJet, p: SpherePoint):
    """(|V|_g, |Vperp|_g); the second is |V| sin(phi) identically."""
    s = math.sin(p.phi)
    nv = math.sqrt(j.v1 * j.v1 * s * s + j.v2 * j.v2)
    return nv, nv * s


def flow_point(spec: FieldSpec, p: SpherePoint, t: float, n_steps: int = 8) -> SpherePoint:
    """Advect p along V for time t with classical RK4. Test instrumentation."""
    th, ph = p.theta, p.phi
    h = t / n_steps
    for _ in range(n_steps):
        k1 = field_components(spec, th, ph)
        k2 = field_components(spec, th + 0.5 * h * k1[0], ph + 0.5 * h * k1[1])
        k3 = field_components(spec, th + 0.5 * h * k2[0], ph + 0.5 * h * k2[1])
        k4 = field_components(spec, th + h * k3[0], ph + h * k3[1])
        th = th + h / 6.0 * float(k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        ph = ph + h / 6.0 * float(k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return SpherePoint(th, ph)
