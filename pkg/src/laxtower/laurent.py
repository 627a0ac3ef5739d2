"""Laurent polynomials in lambda with trigonometric-polynomial coefficients.

An element ``u(x, lam) = sum_d u_d(x) lam**d`` is stored as a dense complex
array of Fourier amplitudes, one row per lambda-degree and one column per
wavenumber, centred on wavenumber zero.  The circle has unit length, so the
integral of a coefficient over the circle is its zero mode.

Products are computed by exact two-dimensional convolution of the amplitude
arrays, so the lambda- and Fourier-supports of a result are exactly the
Minkowski sums of the supports of its factors.  Nothing is ever aliased or
truncated silently: when an :class:`AlgebraContext` is supplied, a result that
outgrows its degree window or mode cap raises.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np
from scipy.signal import convolve2d

from .errors import DegreeOverflow, ModeOverflow, NotInvertible

TWO_PI = 2.0 * np.pi
PRUNE_TOL = 1e-14

BRACKET_VARIANTS = ("minus_one", "zero")
RMATRIX_NAMES = ("benny", "dtoda", "dkp", "dmkp", "ddym")


def _trim_tol(arr: np.ndarray, tol: float) -> float:
    scale = float(np.max(np.abs(arr))) if arr.size else 0.0
    return tol * max(1.0, scale)


# ---------------------------------------------------------------------------
# Fourier fields
# ---------------------------------------------------------------------------


class FourierField:
    """Real function on the unit circle stored as amplitudes ``-b..b``.

    ``modes[j]`` is the amplitude of ``exp(2*pi*i*(j - b)*x)``.  Instances
    are treated as immutable.
    """

    __slots__ = ("modes",)

    def __init__(self, modes, trim: bool = True, tol: float = PRUNE_TOL):
        m = np.asarray(modes, dtype=complex)
        if m.ndim != 1 or m.size % 2 == 0:
            raise ValueError("modes must be a 1-d array of odd length")
        if trim:
            m = _trim_modes(m, tol)
        self.modes = m

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls) -> "FourierField":
        return cls(np.zeros(1, dtype=complex))

    @classmethod
    def constant(cls, c: float) -> "FourierField":
        return cls(np.array([c], dtype=complex))

    @classmethod
    def cos(cls, k: int, amp: float = 1.0) -> "FourierField":
        m = np.zeros(2 * k + 1, dtype=complex)
        if k == 0:
            m[0] = amp
        else:
            m[0] = m[-1] = amp / 2
        return cls(m)

    @classmethod
    def sin(cls, k: int, amp: float = 1.0) -> "FourierField":
        if k == 0:
            return cls.zero()
        m = np.zeros(2 * k + 1, dtype=complex)
        m[-1] = amp / 2j
        m[0] = -amp / 2j
        return cls(m)

    @classmethod
    def from_grid(cls, values, bandwidth: int | None = None) -> "FourierField":
        """Interpolate samples on ``x_j = j/N``; keep modes ``|k| <= bandwidth``."""
        v = np.asarray(values, dtype=float)
        n = v.size
        b = (n - 1) // 2 if bandwidth is None else bandwidth
        if 2 * b + 1 > n:
            raise ValueError("grid too coarse for requested bandwidth")
        c = np.fft.fft(v) / n
        ks = np.arange(-b, b + 1)
        m = c[ks % n]
        if n % 2 == 0 and b == n // 2:
            raise ValueError("bandwidth hits the Nyquist mode")
        # enforce exact Hermitian symmetry
        m = 0.5 * (m + np.conj(m[::-1]))
        return cls(m)

    @classmethod
    def from_function(cls, f, bandwidth: int, oversample: int = 4) -> "FourierField":
        n = oversample * (2 * bandwidth + 1)
        x = np.arange(n) / n
        return cls.from_grid(f(x), bandwidth)

    @classmethod
    def random(cls, rng: np.random.Generator, bandwidth: int, amplitude: float = 1.0,
               mean: float | None = None) -> "FourierField":
        b = bandwidth
        m = np.zeros(2 * b + 1, dtype=complex)
        pos = (rng.normal(size=b) + 1j * rng.normal(size=b)) * amplitude / np.sqrt(2)
        pos /= np.arange(1, b + 1)
        m[b + 1:] = pos
        m[:b] = np.conj(pos[::-1])
        m[b] = rng.normal() * amplitude if mean is None else mean
        return cls(m)

    # -- basic properties -------------------------------------------------
    @property
    def bandwidth(self) -> int:
        return (self.modes.size - 1) // 2

    def amplitude(self, k: int) -> complex:
        b = self.bandwidth
        return complex(self.modes[k + b]) if abs(k) <= b else 0j

    def mean(self) -> float:
        return float(self.amplitude(0).real)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.modes - np.conj(self.modes[::-1]))) <= tol)

    def padded(self, b: int) -> np.ndarray:
        """Amplitudes on ``-b..b`` (zero-padded or truncated)."""
        own = self.bandwidth
        out = np.zeros(2 * b + 1, dtype=complex)
        lo = min(own, b)
        out[b - lo:b + lo + 1] = self.modes[own - lo:own + lo + 1]
        return out

    def truncate(self, b: int) -> "FourierField":
        return FourierField(self.padded(b))

    def norm(self) -> float:
        return float(np.max(np.abs(self.modes)))

    def l2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.modes) ** 2)))

    # -- evaluation -------------------------------------------------------
    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ks = np.arange(-self.bandwidth, self.bandwidth + 1)
        vals = np.exp(TWO_PI * 1j * np.multiply.outer(x, ks)) @ self.modes
        return vals.real

    def grid(self, n: int) -> np.ndarray:
        if n < 2 * self.bandwidth + 1:
            return self(np.arange(n) / n)
        spectrum = np.zeros(n, dtype=complex)
        ks = np.arange(-self.bandwidth, self.bandwidth + 1)
        spectrum[ks % n] = self.modes
        return (np.fft.ifft(spectrum) * n).real

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, FourierField):
            other = FourierField.constant(float(other))
        b = max(self.bandwidth, other.bandwidth)
        return FourierField(self.padded(b) + other.padded(b))

    __radd__ = __add__

    def __neg__(self):
        return FourierField(-self.modes, trim=False)

    def __sub__(self, other):
        return self + (-other if isinstance(other, FourierField) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, FourierField):
            return FourierField(np.convolve(self.modes, other.modes))
        return FourierField(self.modes * other)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return FourierField(self.modes / c)

    def __pow__(self, p: int):
        out = FourierField.constant(1.0)
        for _ in range(p):
            out = out * self
        return out

    def dx(self) -> "FourierField":
        ks = np.arange(-self.bandwidth, self.bandwidth + 1)
        return FourierField(TWO_PI * 1j * ks * self.modes)

    def antiderivative(self, tol: float = 1e-10) -> "FourierField":
        """Zero-mean primitive; the argument must have zero mean."""
        from .errors import NonzeroMeanInNonlocalTail

        if abs(self.mean()) > tol * max(1.0, self.norm()):
            raise NonzeroMeanInNonlocalTail(f"mean {self.mean():.3e}")
        ks = np.arange(-self.bandwidth, self.bandwidth + 1).astype(float)
        ks[self.bandwidth] = 1.0
        out = self.modes / (TWO_PI * 1j * ks)
        out[self.bandwidth] = 0.0
        return FourierField(out)

    def reciprocal(self, tol: float = 1e-15, max_bandwidth: int = 512) -> "FourierField":
        """Spectrally accurate ``1/f``; raises if ``f`` vanishes on a fine grid."""
        if self.bandwidth == 0:
            c = self.modes[0].real
            if abs(c) < 1e-12:
                raise NotInvertible("zero constant")
            return FourierField.constant(1.0 / c)
        b = max(8, 4 * self.bandwidth)
        while True:
            n = 4 * b + 1
            vals = self.grid(n)
            if np.min(np.abs(vals)) < 1e-10 * max(1.0, np.max(np.abs(vals))) or \
                    np.sign(vals).min() != np.sign(vals).max():
                raise NotInvertible("coefficient vanishes on the circle")
            m = FourierField.from_grid(1.0 / vals, b).padded(b)
            edge = max(abs(m[0]), abs(m[-1]))
            if edge < tol * np.max(np.abs(m)) or b >= max_bandwidth:
                return FourierField(m, tol=tol)
            b *= 2

    def __repr__(self) -> str:
        return f"FourierField(bandwidth={self.bandwidth})"


def _trim_modes(m: np.ndarray, tol: float) -> np.ndarray:
    t = _trim_tol(m, tol)
    b = (m.size - 1) // 2
    while b > 0 and abs(m[0]) <= t and abs(m[-1]) <= t:
        m = m[1:-1]
        b -= 1
    return m


# ---------------------------------------------------------------------------
# Context
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlgebraContext:
    """Algebra choice plus hard caps on lambda-degree and Fourier support."""

    bracket_variant: str = "minus_one"
    pairing_variant: str = "minus_one"
    rmatrix: str = "benny"
    mode_cap: int = 16
    dmin: int = -12
    dmax: int = 6
    prune_tol: float = PRUNE_TOL
    fd_step: float = 1e-5

    def __post_init__(self):
        if self.bracket_variant not in BRACKET_VARIANTS:
            raise ValueError(f"unknown bracket variant {self.bracket_variant!r}")
        if self.pairing_variant != self.bracket_variant:
            raise ValueError("pairing variant must match the bracket variant")
        if self.rmatrix not in RMATRIX_NAMES:
            raise ValueError(f"unknown r-matrix {self.rmatrix!r}")
        if self.mode_cap < 1 or self.dmin > self.dmax:
            raise ValueError("empty caps")

    @classmethod
    def for_rmatrix(cls, name: str, **kw) -> "AlgebraContext":
        variant = "zero" if name == "dtoda" else "minus_one"
        return cls(bracket_variant=variant, pairing_variant=variant, rmatrix=name, **kw)

    def widened(self, mode_cap: int | None = None, dmin: int | None = None,
                dmax: int | None = None) -> "AlgebraContext":
        return replace(
            self,
            mode_cap=self.mode_cap if mode_cap is None else mode_cap,
            dmin=self.dmin if dmin is None else dmin,
            dmax=self.dmax if dmax is None else dmax,
        )

    def check(self, u: "LaurentElement") -> "LaurentElement":
        if u.is_zero():
            return u
        if u.dmin < self.dmin or u.dmax > self.dmax:
            raise DegreeOverflow(
                f"degrees [{u.dmin}, {u.dmax}] outside window [{self.dmin}, {self.dmax}]")
        if u.bandwidth > self.mode_cap:
            raise ModeOverflow(f"bandwidth {u.bandwidth} exceeds cap {self.mode_cap}")
        return u


# ---------------------------------------------------------------------------
# Laurent elements
# ---------------------------------------------------------------------------


class LaurentElement:
    """Finite sum ``sum_d u_d(x) lam**d`` with ``u_d`` trigonometric polynomials.

    ``coeffs[i, j]`` is the amplitude of ``lam**(dmin + i) * exp(2*pi*i*k*x)``
    with ``k = j - bandwidth``.
    """

    __slots__ = ("coeffs", "dmin")

    def __init__(self, coeffs, dmin: int = 0, trim: bool = True, tol: float = PRUNE_TOL):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[1] % 2 == 0:
            raise ValueError("coeffs must be 2-d with an odd number of columns")
        dmin = int(dmin)
        if trim:
            c, dmin = _trim2(c, dmin, tol)
        self.coeffs = c
        self.dmin = dmin

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls) -> "LaurentElement":
        return cls(np.zeros((0, 1), dtype=complex), 0, trim=False)

    @classmethod
    def one(cls) -> "LaurentElement":
        return cls.monomial(0)

    @classmethod
    def monomial(cls, d: int, field: FourierField | float = 1.0) -> "LaurentElement":
        if not isinstance(field, FourierField):
            field = FourierField.constant(float(field))
        return cls(field.modes[None, :], d)

    @classmethod
    def from_fields(cls, fields: dict[int, FourierField | float]) -> "LaurentElement":
        out = cls.zero()
        for d, f in fields.items():
            out = out + cls.monomial(d, f)
        return out

    @classmethod
    def random(cls, rng: np.random.Generator, degrees: Iterable[int], bandwidth: int = 1,
               amplitude: float = 0.5) -> "LaurentElement":
        return cls.from_fields(
            {d: FourierField.random(rng, bandwidth, amplitude) for d in degrees})

    # -- properties -------------------------------------------------------
    @property
    def bandwidth(self) -> int:
        return (self.coeffs.shape[1] - 1) // 2

    @property
    def dmax(self) -> int:
        return self.dmin + self.coeffs.shape[0] - 1

    @property
    def degrees(self) -> range:
        return range(self.dmin, self.dmax + 1)

    def is_zero(self) -> bool:
        return self.coeffs.shape[0] == 0

    def coeff(self, d: int) -> FourierField:
        if self.is_zero() or d < self.dmin or d > self.dmax:
            return FourierField.zero()
        return FourierField(self.coeffs[d - self.dmin])

    def amplitude(self, d: int, k: int) -> complex:
        if self.is_zero() or d < self.dmin or d > self.dmax or abs(k) > self.bandwidth:
            return 0j
        return complex(self.coeffs[d - self.dmin, k + self.bandwidth])

    def fields(self) -> dict[int, FourierField]:
        return {d: self.coeff(d) for d in self.degrees}

    def norm(self) -> float:
        """Largest Fourier amplitude over all degrees."""
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def l2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2))) if self.coeffs.size else 0.0

    def sup_norm(self, n: int = 256) -> float:
        """Max over lambda on the unit circle and x on a grid (crude bound)."""
        return float(sum(np.max(np.abs(self.coeff(d).grid(n))) for d in self.degrees))

    def padded(self, dmin: int, dmax: int, b: int) -> np.ndarray:
        out = np.zeros((dmax - dmin + 1, 2 * b + 1), dtype=complex)
        if self.is_zero():
            return out
        own = self.bandwidth
        lo = min(own, b)
        d0, d1 = max(dmin, self.dmin), min(dmax, self.dmax)
        if d0 > d1:
            return out
        out[d0 - dmin:d1 - dmin + 1, b - lo:b + lo + 1] = \
            self.coeffs[d0 - self.dmin:d1 - self.dmin + 1, own - lo:own + lo + 1]
        return out

    def restrict(self, keep) -> "LaurentElement":
        """Keep only degrees ``d`` for which ``keep(d)`` is true."""
        if self.is_zero():
            return self
        mask = np.array([bool(keep(d)) for d in self.degrees])
        c = self.coeffs.copy()
        c[~mask] = 0
        return LaurentElement(c, self.dmin)

    def shift(self, s: int) -> "LaurentElement":
        """Multiply by ``lam**s``."""
        return LaurentElement(self.coeffs, self.dmin + s, trim=False)

    def real_check(self, tol: float = 1e-10) -> bool:
        return all(self.coeff(d).is_hermitian(tol) for d in self.degrees)

    # -- arithmetic -------------------------------------------------------
    def _aligned(self, other: "LaurentElement"):
        if self.is_zero():
            return None
        dmin = min(self.dmin, other.dmin) if not other.is_zero() else self.dmin
        dmax = max(self.dmax, other.dmax) if not other.is_zero() else self.dmax
        b = max(self.bandwidth, other.bandwidth)
        return dmin, dmax, b

    def __add__(self, other):
        if not isinstance(other, LaurentElement):
            other = LaurentElement.monomial(0, float(other))
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        dmin, dmax, b = self._aligned(other)
        return LaurentElement(self.padded(dmin, dmax, b) + other.padded(dmin, dmax, b), dmin)

    __radd__ = __add__

    def __neg__(self):
        return LaurentElement(-self.coeffs, self.dmin, trim=False)

    def __sub__(self, other):
        if not isinstance(other, LaurentElement):
            other = LaurentElement.monomial(0, float(other))
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, LaurentElement):
            return multiply(self, other)
        if isinstance(other, FourierField):
            return multiply(self, LaurentElement.monomial(0, other))
        return LaurentElement(self.coeffs * other, self.dmin)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return LaurentElement(self.coeffs / c, self.dmin)

    def __repr__(self) -> str:
        if self.is_zero():
            return "LaurentElement(0)"
        return f"LaurentElement(degrees=[{self.dmin}, {self.dmax}], bandwidth={self.bandwidth})"


def _trim2(c: np.ndarray, dmin: int, tol: float):
    if c.shape[0] == 0:
        return np.zeros((0, 1), dtype=complex), 0
    t = _trim_tol(c, tol)
    rowmax = np.max(np.abs(c), axis=1)
    nz = np.nonzero(rowmax > t)[0]
    if nz.size == 0:
        return np.zeros((0, 1), dtype=complex), 0
    c = c[nz[0]:nz[-1] + 1]
    dmin += int(nz[0])
    colmax = np.max(np.abs(c), axis=0)
    b = (c.shape[1] - 1) // 2
    keep = b
    while keep > 0 and colmax[b - keep] <= t and colmax[b + keep] <= t:
        keep -= 1
    c = c[:, b - keep:b + keep + 1]
    return c, dmin


def distance(u: LaurentElement, v: LaurentElement) -> float:
    """Largest amplitude of ``u - v``, computed without trimming."""
    if u.is_zero() and v.is_zero():
        return 0.0
    dmin = min(w.dmin for w in (u, v) if not w.is_zero())
    dmax = max(w.dmax for w in (u, v) if not w.is_zero())
    b = max(u.bandwidth, v.bandwidth)
    return float(np.max(np.abs(u.padded(dmin, dmax, b) - v.padded(dmin, dmax, b))))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def multiply(u: LaurentElement, v: LaurentElement, ctx: AlgebraContext | None = None) -> LaurentElement:
    """Exact product; with ``ctx`` the result must fit the caps."""
    if u.is_zero() or v.is_zero():
        return LaurentElement.zero()
    c = convolve2d(u.coeffs, v.coeffs)
    out = LaurentElement(c, u.dmin + v.dmin)
    return ctx.check(out) if ctx is not None else out


def d_lambda(u: LaurentElement, ctx: AlgebraContext | None = None) -> LaurentElement:
    if u.is_zero():
        return u
    ds = np.arange(u.dmin, u.dmax + 1, dtype=float)
    out = LaurentElement(u.coeffs * ds[:, None], u.dmin - 1)
    return ctx.check(out) if ctx is not None else out


def d_x(u: LaurentElement) -> LaurentElement:
    if u.is_zero():
        return u
    ks = np.arange(-u.bandwidth, u.bandwidth + 1)
    return LaurentElement(u.coeffs * (TWO_PI * 1j * ks)[None, :], u.dmin)


def _trace_degree(variant: str) -> int:
    if variant == "minus_one":
        return -1
    if variant == "zero":
        return 0
    raise ValueError(f"unknown trace variant {variant!r}")


def trace(u: LaurentElement, variant: str = "minus_one") -> float:
    """Integral over the circle of the designated coefficient."""
    return float(u.amplitude(_trace_degree(variant), 0).real)


def pairing(u: LaurentElement, v: LaurentElement, variant: str = "minus_one") -> float:
    """``trace(u*v)`` computed from the coupled degree pairs only.

    Only the zero mode of one lambda-coefficient of the product is needed, so
    the product is never formed and no cap can overflow.
    """
    if u.is_zero() or v.is_zero():
        return 0.0
    t = _trace_degree(variant)
    total = 0j
    bu, bv = u.bandwidth, v.bandwidth
    b = min(bu, bv)
    for d in u.degrees:
        e = t - d
        if e < v.dmin or e > v.dmax:
            continue
        a = u.coeffs[d - u.dmin, bu - b:bu + b + 1]
        c = v.coeffs[e - v.dmin, bv - b:bv + b + 1]
        total += np.dot(a, c[::-1])
    return float(total.real)


def power(L: LaurentElement, k: int, ctx: AlgebraContext | None = None) -> LaurentElement:
    if k < 0:
        raise ValueError("power needs a nonnegative exponent; use invert for negative ones")
    out = LaurentElement.one()
    base = L
    # binary exponentiation keeps the number of convolutions logarithmic
    while k:
        if k & 1:
            out = multiply(out, base, ctx)
        k >>= 1
        if k:
            base = multiply(base, base, ctx)
    return out


def invert(L: LaurentElement, order: int, ctx: AlgebraContext | None = None,
           return_residual: bool = False):
    """Truncated inverse around the dominant (top-degree) monomial.

    Writing ``L = c * lam**d * (1 + r)`` with ``r`` of strictly negative
    lambda-degree, the inverse is ``lam**-d / c * sum_j (-r)**j`` kept to the
    ``order`` highest lambda-degrees.  The residual ``|L*M - 1|`` is the
    largest amplitude of the dropped tail.
    """
    if order < 1:
        raise ValueError("order must be positive")
    if L.is_zero():
        raise NotInvertible("zero element")
    d = L.dmax
    c = L.coeff(d)
    cinv = c.reciprocal()
    rest = L.restrict(lambda e: e < d)
    r = multiply(rest, LaurentElement.monomial(-d, cinv))
    lowest = -(order - 1)
    series = LaurentElement.one()
    term = LaurentElement.one()
    for _ in range(order - 1):
        term = multiply(term, -r).restrict(lambda e: e >= lowest)
        if term.is_zero():
            break
        series = series + term
    M = multiply(series, LaurentElement.monomial(-d, cinv))
    if ctx is not None:
        ctx.check(M)
    if return_residual:
        res = multiply(L, M) - LaurentElement.one()
        return M, res.norm()
    return M


def bracket_minus_one(u: LaurentElement, v: LaurentElement) -> LaurentElement:
    """``u_lam v_x - u_x v_lam``."""
    return multiply(d_lambda(u), d_x(v)) - multiply(d_x(u), d_lambda(v))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def to_records(u: LaurentElement) -> list[dict]:
    recs = []
    for d in u.degrees:
        f = u.coeff(d)
        modes = [[k, f.amplitude(k).real, f.amplitude(k).imag]
                 for k in range(-f.bandwidth, f.bandwidth + 1) if f.amplitude(k) != 0]
        if modes:
            recs.append({"degree": d, "modes": modes})
    return recs


def from_records(recs: list[dict]) -> LaurentElement:
    fields = {}
    for rec in recs:
        modes = rec["modes"]
        b = max(abs(int(k)) for k, _, _ in modes)
        m = np.zeros(2 * b + 1, dtype=complex)
        for k, re, im in modes:
            m[int(k) + b] = complex(re, im)
        fields[int(rec["degree"])] = FourierField(m)
    return LaurentElement.from_fields(fields)


def dumps(u: LaurentElement) -> str:
    return json.dumps(to_records(u), indent=1)


def loads(text: str) -> LaurentElement:
    return from_records(json.loads(text))


def grid_csv(u: LaurentElement, K: int) -> str:
    """CSV with ``x`` and one column per stored degree on ``4K+1`` points."""
    n = 4 * K + 1
    x = np.arange(n) / n
    cols = {d: u.coeff(d).grid(n) for d in u.degrees}
    header = "x," + ",".join(f"u_{d}" for d in cols)
    lines = [header]
    for j in range(n):
        lines.append(",".join([repr(float(x[j]))] + [repr(float(cols[d][j])) for d in cols]))
    return "\n".join(lines) + "\n"
