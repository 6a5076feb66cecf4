"""Potentials on Z^d, lattice strips and quasi-momentum boundary classes.

A :class:`Potential` is either finitely supported (a table of nonzero values)
or carries a closed-form rule that describes an infinite support, such as an
exponential profile along a lattice line.  Explicit table entries take
precedence over the rule at the points they list.

Direction sets are 1-based, matching the usual coordinate labels
``x^(1), ..., x^(d)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .dispersion import QuasiMomentum
from .errors import DimensionMismatchError, UndecidableSupportError

__all__ = [
    "DecayCertificate",
    "ExpLineRule",
    "ConstantRule",
    "CallableRule",
    "Potential",
    "StripSpec",
    "BoundaryClass",
    "HypothesisCertificate",
    "classify_quasimomentum",
    "in_strip",
    "support_escapes_strips",
    "containment_radius",
    "hypothesis_certificate",
    "restrict_to_fiber",
    "appendix_potential",
]


@dataclass(frozen=True)
class DecayCertificate:
    """Claim ``|v(x)| <= amplitude * exp(-rate * |x|_inf)`` for every ``x``."""

    rate: float
    amplitude: float

    def __post_init__(self):
        if not (self.rate > 0 and self.amplitude > 0):
            raise ValueError("decay certificate needs rate > 0 and amplitude > 0")

    def bound(self, x) -> float:
        return self.amplitude * math.exp(-self.rate * _maxnorm(x))


@dataclass(frozen=True)
class ExpLineRule:
    """``v(offset + t e_axis) = amplitude * exp(-rate |t|)``, zero off the line.

    ``axis`` is 1-based.
    """

    axis: int
    rate: float
    amplitude: float
    line_offset: tuple

    kind = "exp_line"

    def __post_init__(self):
        object.__setattr__(self, "line_offset", tuple(int(c) for c in self.line_offset))
        if not 1 <= self.axis <= len(self.line_offset):
            raise ValueError(f"axis {self.axis} out of range for dimension {len(self.line_offset)}")
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError("exp_line rate must be positive")
        if self.amplitude == 0 or not math.isfinite(self.amplitude):
            raise ValueError("exp_line amplitude must be nonzero and finite")

    def on_line(self, x) -> bool:
        a = self.axis - 1
        return all(xi == oi for i, (xi, oi) in enumerate(zip(x, self.line_offset)) if i != a)

    def value(self, x) -> float:
        if not self.on_line(x):
            return 0.0
        t = x[self.axis - 1] - self.line_offset[self.axis - 1]
        return self.amplitude * math.exp(-self.rate * abs(t))

    def certificate(self) -> DecayCertificate:
        # |x|_inf <= |t| + |offset|_inf along the line
        return DecayCertificate(self.rate, abs(self.amplitude) * math.exp(self.rate * _maxnorm(self.line_offset)))

    def scaled(self, factor: float) -> "ExpLineRule":
        return ExpLineRule(self.axis, self.rate, self.amplitude * factor, self.line_offset)

    def to_json(self) -> dict:
        return {"kind": self.kind, "axis": self.axis, "rate": self.rate,
                "amplitude": self.amplitude, "line_offset": list(self.line_offset)}


@dataclass(frozen=True)
class ConstantRule:
    """``v(x) = value`` everywhere."""

    value_: float
    dimension: int

    kind = "constant"

    def value(self, x) -> float:
        return self.value_

    def scaled(self, factor: float) -> "ConstantRule":
        return ConstantRule(self.value_ * factor, self.dimension)

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": self.value_}


@dataclass(frozen=True)
class CallableRule:
    """Opaque rule backed by a Python callable; support is not decidable."""

    func: Callable = field(compare=False)
    dimension: int = 1

    kind = "callable"

    def value(self, x) -> float:
        return float(self.func(tuple(x)))

    def scaled(self, factor: float) -> "CallableRule":
        f = self.func
        return CallableRule(lambda x: factor * f(x), self.dimension)

    def to_json(self) -> dict:
        raise TypeError("callable rules cannot be serialized")


def _maxnorm(x) -> int:
    return max((abs(int(c)) for c in x), default=0)


def _point(x, dim: int) -> tuple:
    pt = tuple(int(c) for c in np.atleast_1d(x)) if dim > 0 else ()
    if len(pt) != dim:
        raise DimensionMismatchError(f"expected a point of dimension {dim}, got {x!r}")
    return pt


class Potential:
    """Real-valued function on Z^d.

    Parameters
    ----------
    dimension : int
        Lattice dimension ``d``.  Zero is allowed for the scalar fibers that
        appear when every direction is degenerate.
    table : mapping of point -> float, optional
        Explicit nonzero values.  Zeros are dropped.
    rule : ExpLineRule, ConstantRule or CallableRule, optional
        Closed-form values off the table.
    decay : DecayCertificate, optional
        Checked against every tabled value and against the rule.
    name : str
        Free-form identifier carried into operator metadata.
    """

    def __init__(self, dimension: int, table=None, rule=None, decay: DecayCertificate | None = None,
                 name: str = ""):
        if dimension < 0:
            raise ValueError("dimension must be nonnegative")
        self.dimension = int(dimension)
        entries = {}
        for x, val in (table or {}).items():
            pt = _point(x, self.dimension)
            val = float(val)
            if not math.isfinite(val):
                raise ValueError(f"non-finite potential value at {pt}")
            if val != 0.0:
                entries[pt] = val
        self.table = dict(sorted(entries.items()))
        if isinstance(rule, ConstantRule) and rule.value_ == 0.0:
            rule = None
        if isinstance(rule, ExpLineRule) and len(rule.line_offset) != self.dimension:
            raise DimensionMismatchError("rule line_offset has wrong dimension")
        self.rule = rule
        self.decay = decay
        self.name = name
        if decay is not None:
            self._check_certificate(decay)

    def _check_certificate(self, cert: DecayCertificate) -> None:
        slack = 1.0 + 1e-12
        for x, val in self.table.items():
            if abs(val) > cert.bound(x) * slack:
                raise ValueError(f"value {val} at {x} violates the decay certificate")
        if isinstance(self.rule, ConstantRule):
            raise ValueError("a nonzero constant cannot satisfy a decay certificate")
        if isinstance(self.rule, ExpLineRule):
            rule = self.rule
            if rule.rate < cert.rate:
                raise ValueError("exp_line rule decays slower than the certified rate")
            base = np.array(rule.line_offset)
            for t in range(-200, 201):
                x = base.copy()
                x[rule.axis - 1] += t
                if abs(rule.value(x)) > cert.bound(x) * slack:
                    raise ValueError(f"rule value at {tuple(x)} violates the decay certificate")

    # construction helpers -------------------------------------------------
    @classmethod
    def zero(cls, dimension: int) -> "Potential":
        return cls(dimension)

    @classmethod
    def delta(cls, dimension: int, strength: float, site=None) -> "Potential":
        site = tuple([0] * dimension) if site is None else site
        return cls(dimension, {tuple(site): strength}, name=f"delta({strength})")

    @classmethod
    def constant(cls, dimension: int, value: float) -> "Potential":
        return cls(dimension, rule=ConstantRule(float(value), dimension), name=f"const({value})")

    @classmethod
    def from_function(cls, dimension: int, func: Callable, decay: DecayCertificate | None = None,
                      name: str = "") -> "Potential":
        pot = cls(dimension, rule=CallableRule(func, dimension), name=name)
        pot.decay = decay
        return pot

    # queries -------------------------------------------------------------
    @property
    def is_finite(self) -> bool:
        return self.rule is None

    def __call__(self, x) -> float:
        pt = _point(x, self.dimension)
        if pt in self.table:
            return self.table[pt]
        if self.rule is not None:
            return self.rule.value(pt)
        return 0.0

    def values_at(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=int).reshape(-1, self.dimension)
        if self.rule is None:
            return np.array([self.table.get(tuple(p), 0.0) for p in points.tolist()])
        return np.array([self(p) for p in points.tolist()])

    @property
    def support(self) -> list:
        """Support points of a finitely supported potential."""
        if not self.is_finite:
            raise UndecidableSupportError("support of a rule-based potential is infinite")
        return list(self.table)

    def support_radius(self) -> int:
        """Max-norm radius of a finite support (0 for the zero potential)."""
        return max((_maxnorm(x) for x in self.support), default=0)

    @property
    def is_zero(self) -> bool:
        return self.rule is None and not self.table

    def sign(self) -> int:
        """+1 if v >= 0, -1 if v <= 0, 0 if zero, None if indefinite or unknown."""
        if self.is_zero:
            return 0
        signs = {math.copysign(1, v) for v in self.table.values()}
        if isinstance(self.rule, (ExpLineRule, ConstantRule)):
            amp = self.rule.amplitude if isinstance(self.rule, ExpLineRule) else self.rule.value_
            signs.add(math.copysign(1, amp))
        elif self.rule is not None:
            return None
        return int(signs.pop()) if len(signs) == 1 else None

    def __neg__(self) -> "Potential":
        return self.scaled(-1.0)

    def scaled(self, factor: float) -> "Potential":
        rule = self.rule.scaled(factor) if self.rule is not None else None
        decay = None
        if self.decay is not None and factor != 0:
            decay = DecayCertificate(self.decay.rate, self.decay.amplitude * abs(factor))
        name = self.name if factor == 1 else (f"-{self.name}" if factor == -1 and self.name else self.name)
        return Potential(self.dimension, {x: factor * v for x, v in self.table.items()}, rule, decay, name)

    def __eq__(self, other):
        if not isinstance(other, Potential):
            return NotImplemented
        return (self.dimension == other.dimension and self.table == other.table
                and self.rule == other.rule and self.decay == other.decay)

    def __repr__(self):
        parts = [f"dimension={self.dimension}", f"entries={len(self.table)}"]
        if self.rule is not None:
            parts.append(f"rule={self.rule.kind}")
        if self.name:
            parts.append(f"name={self.name!r}")
        return f"Potential({', '.join(parts)})"

    # serialization -------------------------------------------------------
    def to_json(self) -> dict:
        out = {"dimension": self.dimension,
               "entries": [[*x, v] for x, v in self.table.items()]}
        if self.rule is not None:
            out["rule"] = self.rule.to_json()
        if self.decay is not None:
            out["decay"] = {"rate": self.decay.rate, "amplitude": self.decay.amplitude}
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Potential":
        d = int(obj["dimension"])
        table = {}
        for row in obj.get("entries", []):
            if len(row) != d + 1:
                raise DimensionMismatchError(f"entry {row!r} does not have {d} coordinates plus a value")
            table[tuple(int(c) for c in row[:d])] = float(row[d])
        rule = None
        spec = obj.get("rule")
        if spec is not None:
            kind = spec.get("kind")
            if kind == "exp_line":
                rule = ExpLineRule(int(spec["axis"]), float(spec["rate"]), float(spec.get("amplitude", 1.0)),
                                   tuple(spec.get("line_offset", [0] * d)))
            elif kind == "constant":
                rule = ConstantRule(float(spec["value"]), d)
            else:
                raise ValueError(f"unknown potential rule kind {kind!r}")
        decay = None
        if obj.get("decay") is not None:
            decay = DecayCertificate(float(obj["decay"]["rate"]), float(obj["decay"]["amplitude"]))
        return cls(d, table, rule, decay, name=obj.get("name", ""))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "Potential":
        return cls.from_json(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Potential":
        with open(path) as fh:
            return cls.loads(fh.read())


def appendix_potential() -> Potential:
    """``v(x) = exp(-|x1|)`` on ``Z x {0}`` and zero elsewhere (d = 2)."""
    return Potential(2, rule=ExpLineRule(1, 1.0, 1.0, (0, 0)), decay=DecayCertificate(1.0, 1.0),
                     name="exp_line_x1")


# -------------------------------------------------------------------------
# strips and boundary classes

def _direction_set(alpha, dim: int) -> tuple:
    alpha = tuple(int(a) for a in alpha)
    if list(alpha) != sorted(set(alpha)):
        raise ValueError(f"direction set {alpha} must be strictly increasing")
    if alpha and not (1 <= alpha[0] and alpha[-1] <= dim):
        raise ValueError(f"direction set {alpha} out of range for dimension {dim}")
    return alpha


@dataclass(frozen=True)
class StripSpec:
    """Points whose coordinates along ``alpha`` all lie in ``[-n, n]``."""

    dimension: int
    alpha: tuple
    half_width: int

    def __post_init__(self):
        alpha = _direction_set(self.alpha, self.dimension)
        if not alpha:
            raise ValueError("strip direction set must be nonempty")
        if self.half_width < 0:
            raise ValueError("half_width must be nonnegative")
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True)
class BoundaryClass:
    """``k`` has exactly the components in ``alpha`` equal to pi (``l = |alpha|``)."""

    l: int
    alpha: tuple

    @property
    def interior(self) -> bool:
        return self.l == 0


def classify_quasimomentum(k) -> BoundaryClass:
    k = k if isinstance(k, QuasiMomentum) else QuasiMomentum(k)
    alpha = k.pi_directions
    return BoundaryClass(len(alpha), alpha)


def in_strip(x, strip: StripSpec) -> bool:
    x = tuple(np.atleast_1d(x))
    if len(x) != strip.dimension:
        raise DimensionMismatchError(f"point of dimension {len(x)} tested against a {strip.dimension}-d strip")
    n = strip.half_width
    return all(abs(int(x[j - 1])) <= n for j in strip.alpha)


def containment_radius(v: Potential, alpha) -> int | None:
    """Smallest ``n`` with ``supp v`` inside the strip over ``alpha``, or None if none exists.

    Raises
    ------
    UndecidableSupportError
        For potentials whose support has no closed-form description.
    """
    alpha = _direction_set(alpha, v.dimension)
    idx = [j - 1 for j in alpha]
    radius = max((max(abs(x[i]) for i in idx) for x in v.table), default=0)
    rule = v.rule
    if rule is None:
        return radius
    if isinstance(rule, ConstantRule):
        return None
    if isinstance(rule, ExpLineRule):
        if rule.axis in alpha:
            return None
        return max(radius, max(abs(rule.line_offset[i]) for i in idx))
    raise UndecidableSupportError("undecidable support: potential has no closed-form support description")


def support_escapes_strips(v: Potential, alpha) -> bool:
    """True iff for every ``n`` some support point lies outside the strip of half-width ``n``."""
    return containment_radius(v, alpha) is None


@dataclass(frozen=True)
class HypothesisCertificate:
    holds_A: bool
    holds_B: bool
    reason: str

    def __iter__(self):
        return iter((self.holds_A, self.holds_B, self.reason))


def hypothesis_certificate(v: Potential) -> HypothesisCertificate:
    """Sufficient-condition check for decay at infinity and fiber finiteness.

    Finite support or an exponential decay certificate implies both parts.
    A ``False`` means "not certified", not "violated".
    """
    if v.is_finite:
        return HypothesisCertificate(True, True, "finite support")
    if v.decay is not None:
        return HypothesisCertificate(True, True, f"exponential decay certificate (rate {v.decay.rate})")
    if isinstance(v.rule, ExpLineRule):
        cert = v.rule.certificate()
        return HypothesisCertificate(True, True, f"exponential decay along a lattice line (rate {cert.rate})")
    if isinstance(v.rule, ConstantRule):
        return HypothesisCertificate(False, False, "nonzero constant does not vanish at infinity")
    return HypothesisCertificate(False, False, "no decay certificate for an opaque rule")


def _split(x, alpha: tuple, dim: int) -> tuple:
    idx = set(j - 1 for j in alpha)
    hat = tuple(x[i] for i in range(dim) if i in idx)
    tilde = tuple(x[i] for i in range(dim) if i not in idx)
    return hat, tilde


def _join(x_hat, y_tilde, alpha: tuple, dim: int) -> tuple:
    idx = set(j - 1 for j in alpha)
    hat, tilde = iter(x_hat), iter(y_tilde)
    return tuple(next(hat) if i in idx else next(tilde) for i in range(dim))


def restrict_to_fiber(v: Potential, alpha, x_hat) -> Potential:
    """Potential ``y -> v(x)`` where ``x`` has ``alpha``-coordinates ``x_hat`` and the rest ``y``.

    The result lives on Z^(d-l); when ``l = d`` it is a 0-dimensional potential
    holding the single value ``v(x_hat)``.
    """
    d = v.dimension
    alpha = _direction_set(alpha, d)
    x_hat = tuple(int(c) for c in np.atleast_1d(x_hat)) if alpha else ()
    if len(x_hat) != len(alpha):
        raise DimensionMismatchError(f"x_hat has {len(x_hat)} coordinates, direction set has {len(alpha)}")
    dd = d - len(alpha)
    table = {}
    for x, val in v.table.items():
        hat, tilde = _split(x, alpha, d)
        if hat == x_hat:
            table[tilde] = val
    rule = None
    r = v.rule
    if isinstance(r, ConstantRule):
        rule = ConstantRule(r.value_, dd)
    elif isinstance(r, ExpLineRule):
        off_hat, off_tilde = _split(r.line_offset, alpha, d)
        if r.axis in alpha:
            a = alpha.index(r.axis)
            if all(xh == oh for i, (xh, oh) in enumerate(zip(x_hat, off_hat)) if i != a):
                t = x_hat[a] - off_hat[a]
                table.setdefault(off_tilde, r.amplitude * math.exp(-r.rate * abs(t)))
        elif x_hat == off_hat:
            axis = [j for j in range(1, d + 1) if j not in alpha].index(r.axis) + 1
            rule = ExpLineRule(axis, r.rate, r.amplitude, off_tilde)
    elif isinstance(r, CallableRule):
        f = r.func
        rule = CallableRule(lambda y: f(_join(x_hat, y, alpha, d)), dd)
    out = Potential(dd, table, rule, name=f"{v.name}|{x_hat}" if v.name else "")
    return out
