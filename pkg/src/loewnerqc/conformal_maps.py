"""Compositions of elementary analytic maps with exact third-order jets.

A :class:`ConformalChain` applies its maps in list order: ``maps[0]`` is
applied first.  Values and derivatives are propagated exactly (Faà di Bruno
to order three); pre-Schwarzian and Schwarzian derivatives are available
either from the propagated jet or from the composition rules

    N(f o g) = (N f o g) g' + N g,      S(f o g) = (S f o g) g'^2 + S g.

The chain-rule route never forms high powers of large derivatives and is the
default.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DerivativeVanishes, NewtonDivergence, OutOfDomain, ValidationError

CUT_TOL = 1e-12

KINDS = ("translation", "scaling", "mobius", "square", "sqrt",
         "vertical-slit-sqrt", "vertical-slit-sqrt-inverse")


def sqrt_h(z):
    """Square root with image in H ∪ R+ (branch cut along R+)."""
    s = np.sqrt(np.asarray(z, dtype=complex))
    return np.where((s.imag < 0) | ((s.imag == 0) & (s.real < 0)), -s, s)


def sqrt_principal(z):
    return np.sqrt(np.asarray(z, dtype=complex))


@dataclass(frozen=True)
class ElementaryMap:
    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown elementary map kind {self.kind!r}")
        if self.kind == "mobius":
            a, b, c, d = self.params
            if abs(a * d - b * c) == 0:
                raise ValidationError("mobius map is degenerate (ad - bc = 0)")
        if self.kind.startswith("vertical-slit") and not self.params[0] > 0:
            raise ValidationError("vertical-slit parameter h must be positive")
        if self.kind == "scaling" and not (np.isreal(self.params[0]) and self.params[0] != 0):
            raise ValidationError("scaling factor must be real and non-zero")

    # ------------------------------------------------------------------ helpers
    def _check(self, z):
        k = self.kind
        if k == "sqrt":
            if np.any((np.abs(z.imag) <= CUT_TOL * np.maximum(1.0, np.abs(z))) & (z.real > 0)):
                raise OutOfDomain("sqrt evaluated on its branch cut R+")
            if np.any(z == 0):
                raise DerivativeVanishes("sqrt evaluated at its branch point 0")
        elif k == "vertical-slit-sqrt":
            h, x = self.params
            u = z - x
            if np.any(np.abs(u * u + h * h) <= CUT_TOL * h * h):
                raise DerivativeVanishes("vertical slit evaluated at a slit tip")
            if np.any((np.abs(u.real) <= CUT_TOL * max(1.0, h)) & (np.abs(u.imag) < h)):
                raise OutOfDomain(f"point within {CUT_TOL} of the slit [x-ih, x+ih], x={x}, h={h}")
        elif k == "vertical-slit-sqrt-inverse":
            h, x = self.params
            u = z - x
            if np.any((np.abs(u.imag) <= CUT_TOL * max(1.0, h)) & (np.abs(u.real) <= h)):
                raise OutOfDomain(f"point within {CUT_TOL} of the cut [x-h, x+h], x={x}, h={h}")
        elif k == "mobius":
            a, b, c, d = self.params
            den = c * z + d
            if np.any(np.abs(den) <= CUT_TOL * (abs(c) * np.abs(z) + abs(d))):
                raise OutOfDomain("mobius map evaluated at its pole")
        elif k == "square":
            if np.any(z == 0):
                raise DerivativeVanishes("square map has a critical point at 0")

    def __call__(self, z, check: bool = True):
        return self.jet(z, check=check, order=0)[0]

    def jet(self, z, check: bool = True, order: int = 3):
        """Return ``(w, w', w'', w''')`` at ``z`` (arrays)."""
        z = np.asarray(z, dtype=complex)
        if check:
            self._check(z)
        k, p = self.kind, self.params
        one = np.ones_like(z)
        zero = np.zeros_like(z)
        if k == "translation":
            return z + p[0], one, zero, zero
        if k == "scaling":
            r = p[0].real if isinstance(p[0], complex) else p[0]
            return r * z, r * one, zero, zero
        if k == "mobius":
            a, b, c, d = p
            den = c * z + d
            w = (a * z + b) / den
            if order == 0:
                return (w,)
            det = a * d - b * c
            d1 = det / den ** 2
            return w, d1, -2 * c * d1 / den, 6 * c * c * d1 / den ** 2
        if k == "square":
            return z * z, 2 * z, 2 * one, zero
        if k == "sqrt":
            s = sqrt_h(z)
            if order == 0:
                return (s,)
            return s, 0.5 / s, -0.25 / s ** 3, 0.375 / s ** 5
        h, x = p
        u = z - x
        if k == "vertical-slit-sqrt":
            hh = h * h
            w = u * sqrt_principal(1.0 + hh / (u * u))
        else:
            hh = -h * h
            w = u * sqrt_principal(1.0 + hh / (u * u))
        if order == 0:
            return (w + x,)
        w3 = w ** 3
        return w + x, u / w, hh / w3, -3.0 * hh * u / (w3 * w * w)

    def ns(self, z, check: bool = True):
        """Return ``(w, w', N, S)`` using closed forms per map."""
        z = np.asarray(z, dtype=complex)
        if check:
            self._check(z)
        k, p = self.kind, self.params
        zero = np.zeros_like(z)
        if k in ("translation", "scaling"):
            w, d1, _, _ = self.jet(z, check=False)
            return w, d1, zero, zero
        if k == "mobius":
            a, b, c, d = p
            den = c * z + d
            return (a * z + b) / den, (a * d - b * c) / den ** 2, -2 * c / den, zero
        if k == "square":
            return z * z, 2 * z, 1.0 / z, -1.5 / (z * z)
        if k == "sqrt":
            s = sqrt_h(z)
            return s, 0.5 / s, -0.5 / z, 0.375 / (z * z)
        h, x = p
        u = z - x
        hh = h * h if k == "vertical-slit-sqrt" else -h * h
        w = u * sqrt_principal(1.0 + hh / (u * u))
        w2 = w * w
        n = hh / (u * w2)
        s = -3.0 * hh / (w2 * w2) - 1.5 * hh * hh / (u * u * w2 * w2)
        return w + x, u / w, n, s

    def inverse(self) -> "ElementaryMap":
        k, p = self.kind, self.params
        if k == "translation":
            return translation(-p[0])
        if k == "scaling":
            return scaling(1.0 / p[0])
        if k == "mobius":
            a, b, c, d = p
            return mobius(d, -b, -c, a)
        if k == "square":
            return sqrt_map()
        if k == "sqrt":
            return square()
        if k == "vertical-slit-sqrt":
            return vertical_slit_inverse(*p)
        return vertical_slit(*p)

    # ----------------------------------------------------------------- json
    def to_json(self) -> dict:
        out = {"kind": self.kind}
        names = {
            "translation": ("c",), "scaling": ("r",), "mobius": ("a", "b", "c", "d"),
            "vertical-slit-sqrt": ("h", "x"), "vertical-slit-sqrt-inverse": ("h", "x"),
        }.get(self.kind, ())
        for n, v in zip(names, self.params):
            out[n] = [v.real, v.imag] if isinstance(v, complex) else v
        return out

    @classmethod
    def from_json(cls, d: dict) -> "ElementaryMap":
        def num(v):
            return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else v
        k = d["kind"]
        if k == "translation":
            return translation(num(d["c"]))
        if k == "scaling":
            return scaling(num(d["r"]))
        if k == "mobius":
            return mobius(*(num(d[n]) for n in "abcd"))
        if k == "inversion":
            return inversion()
        if k == "square":
            return square()
        if k in ("sqrt", "principal-sqrt"):
            return sqrt_map()
        if k == "vertical-slit-sqrt":
            return vertical_slit(d["h"], d.get("x", 0.0))
        if k == "vertical-slit-sqrt-inverse":
            return vertical_slit_inverse(d["h"], d.get("x", 0.0))
        raise ValidationError(f"unknown elementary map kind {k!r}")


def translation(c) -> ElementaryMap:
    return ElementaryMap("translation", (complex(c),))


def scaling(r) -> ElementaryMap:
    return ElementaryMap("scaling", (float(np.real(r)),))


def mobius(a, b, c, d) -> ElementaryMap:
    return ElementaryMap("mobius", (complex(a), complex(b), complex(c), complex(d)))


def inversion() -> ElementaryMap:
    """The inversion z -> -1/z."""
    return mobius(0, -1, 1, 0)


def square() -> ElementaryMap:
    return ElementaryMap("square")


def sqrt_map() -> ElementaryMap:
    return ElementaryMap("sqrt")


def vertical_slit(h, x=0.0) -> ElementaryMap:
    """z -> x + sqrt((z-x)^2 + h^2): H minus [x, x+ih] onto H, hydrodynamic."""
    return ElementaryMap("vertical-slit-sqrt", (float(h), float(x)))


def vertical_slit_inverse(h, x=0.0) -> ElementaryMap:
    return ElementaryMap("vertical-slit-sqrt-inverse", (float(h), float(x)))


@dataclass(frozen=True)
class ConformalChain:
    maps: tuple = ()
    domain_tag: str = ""

    def __init__(self, maps=(), domain_tag: str = ""):
        object.__setattr__(self, "maps", tuple(maps))
        object.__setattr__(self, "domain_tag", domain_tag)

    def __len__(self):
        return len(self.maps)

    def then(self, *others) -> "ConformalChain":
        """Chain that applies ``self`` first, then each of ``others``."""
        maps = list(self.maps)
        for o in others:
            maps.extend(o.maps if isinstance(o, ConformalChain) else [o])
        return ConformalChain(maps, self.domain_tag)

    def inverse(self) -> "ConformalChain":
        return ConformalChain([m.inverse() for m in reversed(self.maps)], self.domain_tag)

    def __call__(self, z, check: bool = True):
        w = np.asarray(z, dtype=complex)
        for m in self.maps:
            w = m(w, check=check)
        return w

    def to_json(self) -> dict:
        return {"domain": self.domain_tag, "maps": [m.to_json() for m in self.maps]}

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, d) -> "ConformalChain":
        if isinstance(d, str):
            d = json.loads(d)
        if isinstance(d, list):
            d = {"maps": d}
        return cls([ElementaryMap.from_json(m) for m in d["maps"]], d.get("domain", ""))


def identity_chain() -> ConformalChain:
    return ConformalChain([], "C")


def eval_jet(chain: ConformalChain, z, check: bool = True):
    """Value and first three derivatives of the composed map at ``z``."""
    w = np.asarray(z, dtype=complex)
    d1 = np.ones_like(w)
    d2 = np.zeros_like(w)
    d3 = np.zeros_like(w)
    for m in chain.maps:
        f0, f1, f2, f3 = m.jet(w, check=check)
        d1, d2, d3 = (f1 * d1,
                      f2 * d1 * d1 + f1 * d2,
                      f3 * d1 ** 3 + 3.0 * f2 * d1 * d2 + f1 * d3)
        w = f0
    if check and np.any(d1 == 0):
        raise DerivativeVanishes("derivative of the chain vanishes")
    return w, d1, d2, d3


def eval_ns(chain: ConformalChain, z, check: bool = True):
    """``(w, w', N, S)`` propagated with the pre-Schwarzian/Schwarzian chain rules."""
    w = np.asarray(z, dtype=complex)
    d1 = np.ones_like(w)
    n = np.zeros_like(w)
    s = np.zeros_like(w)
    for m in chain.maps:
        f0, f1, fn, fs = m.ns(w, check=check)
        n = fn * d1 + n
        s = fs * d1 * d1 + s
        d1 = f1 * d1
        w = f0
    if check and np.any(d1 == 0):
        raise DerivativeVanishes("derivative of the chain vanishes")
    return w, d1, n, s


def preschwarzian(chain: ConformalChain, z, method: str = "chain", check: bool = True):
    if method == "jet":
        _, d1, d2, _ = eval_jet(chain, z, check)
        return d2 / d1
    return eval_ns(chain, z, check)[2]


def schwarzian(chain: ConformalChain, z, method: str = "chain", check: bool = True):
    if method == "jet":
        _, d1, d2, d3 = eval_jet(chain, z, check)
        n = d2 / d1
        return d3 / d1 - 1.5 * n * n
    return eval_ns(chain, z, check)[3]


def invert_point(chain: ConformalChain, w, seed, maxiter: int = 50, tol: float = 1e-13):
    """Solve ``chain(z) = w`` by damped Newton iteration from ``seed``."""
    w = np.asarray(w, dtype=complex)
    z = np.array(np.broadcast_to(np.asarray(seed, dtype=complex), w.shape))
    scale = np.maximum(1.0, np.abs(w))
    for _ in range(maxiter):
        f0, f1, _, _ = eval_jet(chain, z, check=False)
        r = f0 - w
        if np.all(np.abs(r) <= tol * scale):
            return z
        step = r / f1
        lam = np.ones(z.shape)
        for _ in range(30):
            trial = z - lam * step
            with np.errstate(all="ignore"):
                ft = chain(trial, check=False)
            bad = ~np.isfinite(ft) | (np.abs(ft - w) > np.abs(r) * (1 - 1e-4 * lam))
            bad &= np.abs(r) > tol * scale
            if not np.any(bad):
                break
            lam = np.where(bad, lam * 0.5, lam)
        z = z - lam * step
    f0 = chain(z, check=False)
    if not np.all(np.abs(f0 - w) <= 1e3 * tol * scale):
        raise NewtonDivergence(f"Newton inversion did not converge (residual "
                               f"{np.max(np.abs(f0 - w)):.3e})")
    return z


def schwarzian_of_inverse(chain: ConformalChain, w, seed):
    """S[phi^{-1}](w) = -S[phi](z) / phi'(z)^2 with z = phi^{-1}(w)."""
    z = invert_point(chain, w, seed)
    _, d1, _, s = eval_ns(chain, z)
    return -s / (d1 * d1)


def cauchy_derivatives(f, z0, radius: float = 1e-2, n: int = 64):
    """Taylor derivatives f, f', f'', f''' at ``z0`` from the Cauchy integral (test oracle)."""
    theta = 2 * np.pi * np.arange(n) / n
    pts = z0 + radius * np.exp(1j * theta)
    vals = np.asarray(f(pts), dtype=complex)
    coeffs = np.fft.fft(vals) / n
    c = [coeffs[k] / radius ** k for k in range(4)]
    return c[0], c[1], 2 * c[2], 6 * c[3]
