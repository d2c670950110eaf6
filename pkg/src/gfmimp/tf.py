"""Rational transfer functions in the Laplace variable.

Coefficients are stored in ascending powers of ``s``. Arithmetic never
cancels common factors on its own; call :meth:`RationalTF.reduce` when a
minimal form is wanted.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np


class PoleEvaluationError(ZeroDivisionError):
    """Raised when a rational is evaluated too close to one of its poles."""

    def __init__(self, s: complex):
        super().__init__(f"evaluation at pole: s = {s!r}")
        self.s = s


def _trim(coeffs: Iterable[float]) -> tuple[float, ...]:
    c = [float(x) for x in coeffs]
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    if not c:
        c = [0.0]
    return tuple(c)


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial, ``coeffs[k]`` multiplies ``s**k``."""

    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Union[Sequence[float], float]):
        if np.isscalar(coeffs):
            coeffs = [coeffs]
        object.__setattr__(self, "coeffs", _trim(coeffs))

    @property
    def degree(self) -> int:
        """Index of the highest nonzero coefficient (0 for the zero polynomial)."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    @property
    def lead(self) -> float:
        return self.coeffs[-1]

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return poly_add(self, other)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        return poly_mul(self, other)

    def __neg__(self) -> "Polynomial":
        return Polynomial([-c for c in self.coeffs])

    def scale(self, k: float) -> "Polynomial":
        return Polynomial([k * c for c in self.coeffs])

    def __call__(self, s):
        # np.polyval wants descending order
        return np.polyval(self.coeffs[::-1], s)

    def roots(self) -> np.ndarray:
        if self.degree < 1:
            return np.array([], dtype=complex)
        r = np.roots(self.coeffs[::-1]).astype(complex)
        return _polish(self, r)


def poly_add(a: Polynomial, b: Polynomial) -> Polynomial:
    n = max(len(a.coeffs), len(b.coeffs))
    out = [0.0] * n
    for k, c in enumerate(a.coeffs):
        out[k] += c
    for k, c in enumerate(b.coeffs):
        out[k] += c
    return Polynomial(out)


def poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    if a.is_zero() or b.is_zero():
        return Polynomial([0.0])
    out = [0.0] * (len(a.coeffs) + len(b.coeffs) - 1)
    for i, x in enumerate(a.coeffs):
        for j, y in enumerate(b.coeffs):
            out[i + j] += x * y
    return Polynomial(out)


def _polish(p: Polynomial, roots: np.ndarray, tol: float = 1e-10, maxiter: int = 20) -> np.ndarray:
    """Newton-polish companion-matrix roots until the relative residual is below ``tol``."""
    dp = Polynomial([k * c for k, c in enumerate(p.coeffs)][1:] or [0.0])
    scale = max(abs(c) for c in p.coeffs)
    out = []
    for r in roots:
        z = complex(r)
        for _ in range(maxiter):
            f = complex(p(z))
            if abs(f) <= tol * scale * max(1.0, abs(z)) ** p.degree:
                break
            d = complex(dp(z))
            if d == 0:
                break
            step = f / d
            z -= step
            if abs(step) <= 1e-15 * max(1.0, abs(z)):
                break
        out.append(z)
    return np.array(out, dtype=complex)


@dataclass(frozen=True)
class RationalTF:
    """Ratio ``num(s) / den(s)`` kept with a monic denominator."""

    num: Polynomial
    den: Polynomial

    def __init__(self, num, den=(1.0,)):
        num = num if isinstance(num, Polynomial) else Polynomial(num)
        den = den if isinstance(den, Polynomial) else Polynomial(den)
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        lead = den.lead
        object.__setattr__(self, "num", num.scale(1.0 / lead))
        object.__setattr__(self, "den", den.scale(1.0 / lead))

    # constructors -------------------------------------------------------
    @classmethod
    def const(cls, k: float) -> "RationalTF":
        return cls([k], [1.0])

    @classmethod
    def s(cls) -> "RationalTF":
        return cls([0.0, 1.0], [1.0])

    @classmethod
    def zero(cls) -> "RationalTF":
        return cls([0.0], [1.0])

    def canonical(self) -> "RationalTF":
        return RationalTF(self.num, self.den)

    def is_zero(self) -> bool:
        return self.num.is_zero()

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        return rtf_add(self, _as_rtf(other))

    __radd__ = __add__

    def __sub__(self, other):
        return rtf_add(self, -_as_rtf(other))

    def __rsub__(self, other):
        return rtf_add(_as_rtf(other), -self)

    def __mul__(self, other):
        return rtf_mul(self, _as_rtf(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return rtf_div(self, _as_rtf(other))

    def __rtruediv__(self, other):
        return rtf_div(_as_rtf(other), self)

    def __neg__(self):
        return RationalTF(-self.num, self.den)

    # analysis -----------------------------------------------------------
    def __call__(self, s):
        return evaluate(self, s)

    def poles(self) -> np.ndarray:
        return poles(self)

    def zeros(self) -> np.ndarray:
        return self.num.roots()

    def reduce(self, rtol: float = 1e-9) -> "RationalTF":
        return reduce(self, rtol)

    def __repr__(self) -> str:
        return f"RationalTF(num={list(self.num.coeffs)}, den={list(self.den.coeffs)})"


def _as_rtf(x) -> RationalTF:
    if isinstance(x, RationalTF):
        return x
    if isinstance(x, Polynomial):
        return RationalTF(x)
    return RationalTF.const(float(x))


def rtf_add(a: RationalTF, b: RationalTF) -> RationalTF:
    if a.den == b.den:
        return RationalTF(a.num + b.num, a.den)
    return RationalTF(a.num * b.den + b.num * a.den, a.den * b.den)


def rtf_mul(a: RationalTF, b: RationalTF) -> RationalTF:
    return RationalTF(a.num * b.num, a.den * b.den)


def rtf_div(a: RationalTF, b: RationalTF) -> RationalTF:
    if b.is_zero():
        raise ZeroDivisionError("zero denominator")
    return RationalTF(a.num * b.den, a.den * b.num)


POLE_TOL = 1e-12


def evaluate(r: RationalTF, s):
    """Evaluate ``r`` at complex ``s`` (scalar or array).

    Raises :class:`PoleEvaluationError` when ``|den(s)|`` falls below
    ``1e-12 * max|den coeff| * max(1, |s|)**deg``.
    """
    s_arr = np.asarray(s, dtype=complex)
    d = r.den(s_arr)
    n = r.num(s_arr)
    scale = max(abs(c) for c in r.den.coeffs)
    thresh = POLE_TOL * scale * np.maximum(1.0, np.abs(s_arr)) ** r.den.degree
    bad = np.abs(d) < thresh
    if np.any(bad):
        where = s_arr[bad].ravel()[0] if s_arr.ndim else complex(s_arr)
        raise PoleEvaluationError(complex(where))
    out = n / d
    return complex(out) if np.ndim(out) == 0 else out


def poles(r: RationalTF) -> np.ndarray:
    return r.den.roots()


def _deflate(p: Polynomial, r: complex) -> Polynomial:
    """Divide out ``(s - r)``, or the real quadratic of the pair when ``r`` is complex."""
    if r == 0:
        return Polynomial(p.coeffs[1:] or [0.0])
    if abs(r.imag) > 0:
        factor = [1.0, -2.0 * r.real, abs(r) ** 2]
    else:
        factor = [1.0, -r.real]
    q, _ = np.polydiv(np.array(p.coeffs[::-1]), np.array(factor))
    return Polynomial(list(np.atleast_1d(q)[::-1]))


def _rel_residual(p: Polynomial, x: complex) -> float:
    scale = max(abs(c) for c in p.coeffs)
    return abs(complex(p(x))) / (scale * max(1.0, abs(x)) ** p.degree)


def _common_root(num: Polynomial, den: Polynomial, rtol: float):
    """A numerator/denominator root pair describing the same factor, or ``None``.

    Repeated roots come out of the companion matrix only to about
    ``sqrt(eps)``, so pairs further apart than ``rtol`` still match when either
    root is a root of the other polynomial to within ``rtol``.
    """
    loose = np.sqrt(rtol)
    for z in num.roots():
        for p_ in den.roots():
            d = abs(z - p_)
            scale = max(1.0, abs(p_))
            if d <= rtol * scale:
                return z, p_
            if d <= loose * scale and (_rel_residual(num, p_) <= rtol or _rel_residual(den, z) <= rtol):
                return z, p_
    return None


def _is_origin(p: Polynomial, x: complex, rtol: float) -> bool:
    scale = max(abs(c) for c in p.coeffs)
    return abs(x) <= np.sqrt(rtol) and abs(p.coeffs[0]) <= rtol * scale


def reduce(r: RationalTF, rtol: float = 1e-9) -> RationalTF:
    """Cancel numerator/denominator roots that coincide within ``rtol`` (relative).

    Common factors are removed by polynomial division so the surviving
    coefficients keep their precision.
    """
    if r.is_zero():
        return RationalTF.zero()
    num, den = r.num, r.den
    while num.degree > 0 and den.degree > 0:
        hit = _common_root(num, den, rtol)
        if hit is None:
            break
        z, p_ = hit
        if _is_origin(num, z, rtol) and _is_origin(den, p_, rtol):
            z = p_ = 0j
        else:
            # one shared estimate for both sides
            z = p_ = 0.5 * (z + p_)
            if abs(z.imag) <= np.sqrt(rtol) * max(1.0, abs(z)):
                z = p_ = complex(z.real)
            if z.imag < 0:
                z = p_ = z.conjugate()
        num = _deflate(num, z)
        den = _deflate(den, p_)
    return RationalTF(num, den)


@dataclass(frozen=True)
class TFMatrix2x2:
    """2x2 matrix of rationals; rows are d/q outputs, columns d/q inputs."""

    entries: tuple[tuple[RationalTF, RationalTF], tuple[RationalTF, RationalTF]]

    def __init__(self, entries):
        rows = tuple(tuple(_as_rtf(e) for e in row) for row in entries)
        if len(rows) != 2 or any(len(r) != 2 for r in rows):
            raise ValueError("TFMatrix2x2 needs exactly 2x2 entries")
        object.__setattr__(self, "entries", rows)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    @classmethod
    def diag(cls, r: RationalTF) -> "TFMatrix2x2":
        z = RationalTF.zero()
        return cls(((r, z), (z, r)))

    def evaluate(self, s) -> np.ndarray:
        """Complex 2x2 array (or (..., 2, 2) for array ``s``)."""
        s_arr = np.asarray(s, dtype=complex)
        out = np.empty(s_arr.shape + (2, 2), dtype=complex)
        for i in range(2):
            for j in range(2):
                e = self.entries[i][j]
                out[..., i, j] = 0.0 if e.is_zero() else evaluate(e, s_arr)
        return out
