"""
Mechanized derivation of the decoupled Riccati equations for duct flow.

Starting from the gradient variables alpha, beta and their coupled Riccati
equations, the transformed variables

    Y = z^e alpha + Y~(z, u, m, m_x, a, a'),     Q = z^e beta + Q~(...),

are differentiated along characteristics with the chain rule.  The
construction checks that the opposite-family variable cancels, then
substitutes alpha (beta) back in terms of Y (Q) and collects powers,
giving d0, d1, d2 and their backward counterparts exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .algebra import Poly

STATE_VARS = ("z", "u", "m", "mx", "mxx", "a", "ad", "add", "alpha", "beta")
EXCLUDED_GAMMAS = (Fraction(5, 3), Fraction(3))


class UnsupportedGamma(ValueError):
    """The decoupled transform is only derived for gamma other than 5/3 and 3."""


def as_fraction(gamma):
    g = Fraction(gamma).limit_denominator(10 ** 6)
    if abs(float(g) - float(gamma)) > 1e-12:
        raise ValueError(f"gamma={gamma} has no small rational form")
    if g <= 1:
        raise ValueError("gamma must exceed 1")
    return g


def check_gamma(gamma):
    g = as_fraction(gamma)
    if g in EXCLUDED_GAMMAS:
        raise UnsupportedGamma(
            f"gamma={g}: the Y/Q transform divides by (gamma - 3)(3 gamma - 5); "
            "gamma = 5/3 and gamma = 3 are not supported")
    return g


def M(coef=1, **powers):
    return Poly.mono(coef, **powers)


class Ingredients:
    """State-level building blocks as exact polynomials for one gamma."""

    def __init__(self, g):
        self.g = g
        h = (g - 1) / 2
        self.e = (g + 1) / (2 * (g - 1))
        self.alpha = Poly.var("alpha")
        self.beta = Poly.var("beta")
        self.C = M(1, Kc=1, a=-h, m=1, z=(g + 1) / (g - 1))
        self.p = M((g - 1) / (2 * g), Kc=1, a=-g, m=2, z=2 * g / (g - 1))
        # v = K_tau z^(-2/(g-1)) with K_tau = (g-1) / (2 K_c)
        self.v = M(h, Kc=-1, z=-2 / (g - 1))
        self.ax = self.v * Poly.var("ad")
        self.ux = (self.alpha + self.beta) * Fraction(1, 2)
        self.zx = (M(Fraction(1, 2), a=h, m=-1) * (self.alpha - self.beta)
                   - M((g - 1) / g, m=-1, z=1, mx=1))
        self.zt = -(self.C * M(1, m=-1, a=h)) * self.ux
        self.ut = (-(self.C * M(1, m=1, a=-h)) * self.zx
                   - self.p * M(2, a=1, m=-1, mx=1) + self.p * self.ax * g)
        self.k1 = M((g + 1) / (2 * (g - 1)), Kc=1, z=2 / (g - 1))
        self.k2 = M((g - 1) / (g * (g + 1)), mx=1, z=1, a=-h)
        k3a = M(-(g - 1) / 4, u=1, a=-1, ad=1)
        k3b = M(3 * (g - 1) ** 2 / 8, m=1, z=1, a=-(g + 1) / 2, ad=1)
        self.k3p = k3a + k3b
        self.k3m = k3a - k3b
        self.F = (M((g - 1) ** 3 / 8, Kc=-1, m=2, z=(2 * g - 4) / (g - 1), a=-g - 1)
                  * (M(1, a=1, add=1) - M(g, ad=2))
                  + M((g - 1) ** 2 / (2 * g), m=1, mx=1, z=2, a=-g, ad=1))

    def directional(self, sigma):
        """Derivatives of each state variable along dx/dt = sigma C."""
        C, v = self.C, self.v
        u = Poly.var("u")
        al, be = self.alpha, self.beta
        d = {
            "z": self.zt + sigma * C * self.zx,
            "u": self.ut + sigma * C * self.ux,
            "m": sigma * C * Poly.var("mx"),
            "mx": sigma * C * Poly.var("mxx"),
            "a": (u + sigma * C * v) * Poly.var("ad"),
            "ad": (u + sigma * C * v) * Poly.var("add"),
        }
        k1, k2 = self.k1, self.k2
        if sigma > 0:
            d["alpha"] = k1 * (k2 * (3 * al + be) + (al * be - al * al)) + self.k3p * (al - be) + self.F
        else:
            d["beta"] = k1 * (-k2 * (al + 3 * be) + (al * be - be * be)) + self.k3m * (be - al) + self.F
        return d

    def ytilde(self, sign_mx=1, sign_ma=1):
        g, h = self.g, (self.g - 1) / 2
        c1 = (g - 1) ** 2 / (2 * (g - 3))
        c2 = (g - 1) / (g * (3 * g - 1))
        c3 = (3 * g - 13) * (g - 1) ** 3 / (4 * (g - 3) * (3 * g - 5))
        return (M(c1, Kc=-1, u=1, a=-1, ad=1, z=(g - 3) / (2 * (g - 1)))
                + sign_mx * M(c2, mx=1, a=-h, z=(3 * g - 1) / (2 * (g - 1)))
                - sign_ma * M(c3, Kc=-1, m=1, ad=1, a=-(g + 1) / 2, z=(3 * g - 5) / (2 * (g - 1))))


def total_derivative(P, rates):
    out = Poly()
    for name in STATE_VARS:
        if P.depends_on(name):
            if name not in rates:
                raise ValueError(f"no characteristic rate for {name}")
            out = out + P.diff(name) * rates[name]
    return out


@dataclass
class DecoupledForm:
    """d0 + d1 W + d2 W^2 for one family, with the construction diagnostics."""

    family: str
    transform: Poly
    d0: Poly
    d1: Poly
    d2: Poly
    leftover: Poly = field(default_factory=Poly)

    @property
    def decoupled(self):
        return not self.leftover


def _decouple(ing, transform, sigma, keep, drop):
    """Differentiate ``transform`` along the family and rewrite in W."""
    rates = ing.directional(sigma)
    DW = total_derivative(transform, rates)
    W = Poly.var("Y")
    # keep = z^e * keep_var + rest  =>  keep_var = z^-e (W - rest)
    rest = transform - M(1, z=ing.e, **{keep: 1})
    back = M(1, z=-ing.e) * (W - rest)
    leftover = Poly()
    for k in range(1, int(DW.degree(drop)) + 1):
        leftover = leftover + DW.coeff(drop, k)
    expr = DW.coeff(drop, 0).subs(keep, back)
    if expr.depends_on(keep):
        raise AssertionError("substitution left the kept variable behind")
    d0, d1, d2 = expr.coeff("Y", 0), expr.coeff("Y", 1), expr.coeff("Y", 2)
    if expr.degree("Y") > 2:
        raise AssertionError("transformed equation is not quadratic")
    return d0, d1, d2, leftover


def construct(gamma):
    """Exact Y/Q transforms and coefficients for ``gamma``.

    Returns (forward, backward) :class:`DecoupledForm`.  Q is built from
    beta, mirroring Y under x -> -x.  The backward form stores d1 with the
    sign convention dQ = d0_bar - d1_bar Q + d2 Q^2, so its ``d1``
    attribute is d1_bar.
    """
    return _construct(check_gamma(gamma))


@lru_cache(maxsize=None)
def _construct(g):
    ing = Ingredients(g)
    Y = M(1, z=ing.e, alpha=1) + ing.ytilde()
    d0, d1, d2, left = _decouple(ing, Y, +1, "alpha", "beta")
    fwd = DecoupledForm("forward", Y, d0, d1, d2, left)
    Q = M(1, z=ing.e, beta=1) + ing.ytilde(sign_mx=-1, sign_ma=-1)
    e0, e1, e2, left = _decouple(ing, Q, -1, "beta", "alpha")
    bwd = DecoupledForm("backward", Q, e0, -e1, e2, left)
    return fwd, bwd


def printed_q_transform(gamma):
    """Q exactly as displayed: built on alpha, with the mirrored corrections."""
    g = check_gamma(gamma)
    ing = Ingredients(g)
    return M(1, z=ing.e, alpha=1) + ing.ytilde(sign_mx=-1, sign_ma=-1)


def d2_printed(g):
    """The displayed closed form -(g+1)/(g-1) K_c z^((3-g)/(2(g-1)))."""
    return M(-(g + 1) / (g - 1), Kc=1, z=(3 - g) / (2 * (g - 1)))


def d2_from_k1(g):
    """-k1 z^-e, the Y^2 coefficient implied by the coupled alpha equation."""
    return M(-(g + 1) / (2 * (g - 1)), Kc=1, z=(3 - g) / (2 * (g - 1)))


def to_density(P, g):
    """Rewrite z-monomials through z = (K_tau a rho)^((g-1)/2)."""
    zsub = M(1, Ktau=1, a=1, rho=1) ** ((g - 1) / 2)
    return P.subs("z", zsub)


# exponent patterns of the printed d0 and d1 lists, over
# (a, rho, u, m, mx, mxx, ad, add); d0 carries the common a^((g-3)/4)
PATTERN_VARS = ("a", "rho", "u", "m", "mx", "mxx", "ad", "add")


def printed_patterns(gamma):
    g = as_fraction(gamma)
    pre = (g - 3) / 4
    d0 = {
        "m*mxx": dict(a=pre + 2, rho=(5 * g + 1) / 4, m=1, mxx=1),
        "mx^2": dict(a=pre + 2, rho=(5 * g + 1) / 4, mx=2),
        "L1": dict(a=pre, rho=(3 * g - 1) / 4, mx=1, ad=1, u=1),
        "L2": dict(a=pre, rho=(5 * g - 3) / 4, m=1, mx=1, ad=1),
        "L3": dict(a=pre - 2, rho=(3 * g - 5) / 4, m=1, ad=2, u=1),
        "L4": dict(a=pre - 1, rho=(3 * g - 5) / 4, m=1, add=1, u=1),
        "L5": dict(a=pre - 2, rho=(5 * g - 7) / 4, m=2, ad=2),
        "L6": dict(a=pre - 1, rho=(g - 3) / 4, add=1, u=2),
        "L7": dict(a=pre - 2, rho=(g - 3) / 4, ad=2, u=2),
        "L8": dict(a=pre - 1, rho=(5 * g - 7) / 4, m=2, add=1),
    }
    d1 = {
        "L9": dict(a=1, rho=(g + 1) / 2, mx=1),
        "L10": dict(a=-1, u=1, ad=1),
        "L11": dict(a=-1, rho=(g - 1) / 2, m=1, ad=1),
    }
    norm = lambda d: tuple(Fraction(d.get(v, 0)) for v in PATTERN_VARS)  # noqa: E731
    return {k: norm(v) for k, v in d0.items()}, {k: norm(v) for k, v in d1.items()}


@dataclass
class AuditRow:
    coefficient: str
    exponents: dict
    value: float
    label: str | None


def exponent_audit(gamma):
    """Match every monomial of the constructed d0, d1, d0_bar, d1_bar to a printed pattern.

    Returns a list of :class:`AuditRow`; ``label`` is None for a monomial
    with no printed counterpart.
    """
    g = check_gamma(gamma)
    fwd, bwd = construct(g)
    p0, p1 = printed_patterns(g)
    rows = []
    for name, P, pats in (("d0", fwd.d0, p0), ("d1", fwd.d1, p1),
                          ("d0_bar", bwd.d0, p0), ("d1_bar", bwd.d1, p1)):
        lookup = {v: k for k, v in pats.items()}
        for c, powers in to_density(P, g).monomials():
            key = tuple(Fraction(powers.get(v, 0)) for v in PATTERN_VARS)
            rows.append(AuditRow(name, {k: str(v) for k, v in powers.items()}, float(c), lookup.get(key)))
    return rows


def l_constants(model):
    """Numerical L_j and L_bar_j for ``model``, with K_c and K_tau folded in.

    Labels follow the printed lists; the two leading d0 terms are reported
    under ``m*mxx`` and ``mx^2``.
    """
    g = check_gamma(model.gamma)
    fwd, bwd = construct(g)
    p0, p1 = printed_patterns(g)
    out = {}
    for tag, form in (("", fwd), ("bar", bwd)):
        for name, P, pats in (("d0", form.d0, p0), ("d1", form.d1, p1)):
            lookup = {v: k for k, v in pats.items()}
            for c, powers in to_density(P, g).monomials():
                key = tuple(Fraction(powers.get(v, 0)) for v in PATTERN_VARS)
                label = lookup.get(key, "unmatched")
                val = float(c) * model.K_c ** float(powers.get("Kc", 0)) \
                    * model.K_tau ** float(powers.get("Ktau", 0))
                k = f"{label}{'_bar' if tag else ''}"
                out[k] = out.get(k, 0.0) + val
    return out
