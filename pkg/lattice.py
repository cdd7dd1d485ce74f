"""
Square lattice with the vertex coupling U = exp(i mu) R (n = 4, unit vertex
length scale) and lattice edge length ell.

The Bloch condition reduces to a quartic sum_j c_j x^j = 0 whose coefficients
depend on the quasimomentum only through Q = cos(theta1) + cos(theta2), so it
splits as F(x) + Q G(x) = 0. A momentum x belongs to the spectrum iff
q_star = -F/G lies in [-2, 2]; band edges are the roots of F + 2G (Q = 2, zone
center) and F - 2G (Q = -2, zone corner). Both are smooth where q_star has
poles, which is why edges are searched on them rather than on q_star.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Literal, Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize_scalar
from skimage import measure

from errors import EmptyContourError, InvalidIntervalError, ParameterRangeError, PoleError, ValidationError
from numerics import determinant, find_roots

logger = logging.getLogger(__name__)

Branch = Literal["positive", "negative"]
BRANCHES = ("positive", "negative")

FLAT_BAND_TOLERANCE = 1e-9
LATTICE_POINT_TOLERANCE = 1e-9
# breakpoints closer than this are the same band edge
EDGE_MERGE_TOLERANCE = 1e-11
CLOSING_TOLERANCE = 1e-7
POSITIVE_K_MIN = 1e-6
NEGATIVE_KAPPA_MIN = 1e-3
# relative spacing of the negative-branch edge scan
NEGATIVE_LOG_STEP = 1e-3
QUASIMOMENTUM_SLACK = 1e-12


@dataclass(frozen=True)
class LatticeModel:
    mu: float
    ell: float

    def __post_init__(self):
        if not math.isfinite(self.mu) or not 0.0 <= self.mu <= math.pi / 2:
            raise ParameterRangeError(f"mu must lie in [0, pi/2], got {self.mu}")
        if not (math.isfinite(self.ell) and self.ell > 0):
            raise ParameterRangeError(f"edge length must be positive, got {self.ell}")

    @property
    def epsilon(self) -> complex:
        return complex(math.cos(self.mu), math.sin(self.mu))

    @property
    def sin2mu(self) -> float:
        return math.sin(2 * self.mu)

    @property
    def cos2mu(self) -> float:
        return math.cos(2 * self.mu)

    @property
    def lattice_spacing(self) -> float:
        """Distance pi/ell between the excluded momenta"""
        return math.pi / self.ell

    def edge_search_step(self, x_max: float) -> float:
        # the two roots of F + 2G (or F - 2G) around pi n/ell are at least 4/(x ell) apart
        return min(math.pi / (4 * self.ell), 0.01, 1.0 / (max(x_max, 1.0) * self.ell))


@dataclass(frozen=True)
class Quasimomentum:
    theta1: float
    theta2: float

    def __post_init__(self):
        limit = math.pi + QUASIMOMENTUM_SLACK
        if not (abs(self.theta1) <= limit and abs(self.theta2) <= limit):
            raise ParameterRangeError(f"quasimomentum ({self.theta1}, {self.theta2}) outside [-pi, pi]^2")

    @property
    def q(self) -> float:
        return math.cos(self.theta1) + math.cos(self.theta2)


@dataclass(frozen=True)
class SpectralCoefficients:
    branch: str
    c: Tuple[float, float, float, float, float]

    def __post_init__(self):
        if self.branch not in BRANCHES:
            raise ValidationError(f"unknown branch {self.branch!r}")
        if len(self.c) != 5 or not all(math.isfinite(v) for v in self.c):
            raise ValidationError("expected five finite coefficients")

    def evaluate(self, x: float) -> float:
        return sum(cj * x ** j for j, cj in enumerate(self.c))


@dataclass(frozen=True)
class MembershipVerdict:
    status: Literal["in_band", "gap", "flat_band", "excluded_lattice_point"]
    q_star: Optional[float] = None
    f: float = 0.0
    g: float = 0.0

    @property
    def in_spectrum(self) -> bool:
        return self.status in ("in_band", "flat_band")


@dataclass(frozen=True)
class BandInterval:
    lo: float
    hi: float
    edge_lo: str
    edge_hi: str

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def energy_width(self) -> float:
        """Width on the energy axis; meaningful for the positive branch where E = k^2"""
        return self.hi ** 2 - self.lo ** 2


@dataclass(frozen=True)
class BandSet:
    branch: str
    mu: float
    ell: float
    intervals: Tuple[BandInterval, ...] = field(default_factory=tuple)
    flat_points: Tuple[float, ...] = field(default_factory=tuple)

    def contains(self, x: float) -> bool:
        return any(b.lo <= x <= b.hi for b in self.intervals)


@dataclass(frozen=True)
class FermiSurface:
    k: float
    q_star: float
    points: Tuple[Quasimomentum, ...]
    segments: Tuple[Tuple[int, int], ...] = field(default_factory=tuple)

    def radius(self, center: Tuple[float, float]) -> float:
        """Largest distance of a contour point from center, measured on the torus"""
        if not self.points:
            return 0.0
        pts = np.array([[p.theta1, p.theta2] for p in self.points])
        d = np.abs(pts - np.asarray(center))
        d = np.minimum(d, 2 * math.pi - d)
        return float(np.max(np.hypot(d[:, 0], d[:, 1])))


@dataclass(frozen=True)
class DiracPoint:
    mu: float
    k: float
    location: Literal["center", "corner"]


def _check_branch(branch: str):
    if branch not in BRANCHES:
        raise ValidationError(f"branch must be 'positive' or 'negative', got {branch!r}")


def secular_determinant(m: LatticeModel, k: complex, q: Quasimomentum) -> complex:
    """Determinant of the 4x4 Bloch matching system for the cross-shaped cell.

    xi = exp(i k ell / 2) is the phase across one arm of length ell/2.
    """
    k = complex(k)
    if abs(k + 1) < 1e-14:
        raise PoleError("secular determinant has a pole at k = -1")
    eps = m.epsilon
    eta = (1 - k) / (1 + k)
    xi2 = np.exp(1j * k * m.ell)
    xi2_bar = np.exp(-1j * k * m.ell)
    w1 = complex(math.cos(q.theta1), math.sin(q.theta1))
    w2 = complex(math.cos(q.theta2), math.sin(q.theta2))

    system = np.array([
        [-1, -eta, eps * eta, eps],
        [eps * w1 * xi2, eps * w1 * xi2_bar * eta, -1, -eta],
        [-w1 * xi2 * eta, -w1 * xi2_bar, eps * w2 * xi2, eps * w2 * xi2_bar * eta],
        [eps * eta, eps, -w2 * xi2 * eta, -w2 * xi2_bar],
    ], dtype=np.complex128)
    return determinant(system)


def secular_prefactor(m: LatticeModel, k: complex, q: Quasimomentum) -> complex:
    """8 i eps^2 exp(i(theta1 + theta2)) / (k + 1)^4"""
    k = complex(k)
    if abs(k + 1) < 1e-14:
        raise PoleError("secular prefactor has a pole at k = -1")
    return 8j * m.epsilon ** 2 * np.exp(1j * (q.theta1 + q.theta2)) / (k + 1) ** 4


def coefficients_positive(m: LatticeModel, k: float, q: Quasimomentum) -> SpectralCoefficients:
    if not k > 0:
        raise ParameterRangeError(f"k must be positive, got {k}")
    s, c = m.sin2mu, m.cos2mu
    kl = k * m.ell
    sin_kl, cos_kl = math.sin(kl), math.cos(kl)
    Q = q.q
    c0 = -s * sin_kl ** 2
    c2 = s * (1 + 3 * math.cos(2 * kl))
    c1 = 2 * (2 * c * cos_kl - Q) * sin_kl
    c3 = 2 * (2 * c * cos_kl + Q) * sin_kl
    return SpectralCoefficients("positive", (c0, c1, c2, c3, c0))


def coefficients_negative(m: LatticeModel, kappa: float, q: Quasimomentum) -> SpectralCoefficients:
    if not kappa > 0:
        raise ParameterRangeError(f"kappa must be positive, got {kappa}")
    s, c = m.sin2mu, m.cos2mu
    kl = kappa * m.ell
    sinh_kl, cosh_kl = math.sinh(kl), math.cosh(kl)
    Q = q.q
    c0 = s * sinh_kl ** 2
    c2 = -s * (1 + 3 * math.cosh(2 * kl))
    c1 = -2 * (2 * c * cosh_kl - Q) * sinh_kl
    c3 = 2 * (2 * c * cosh_kl + Q) * sinh_kl
    return SpectralCoefficients("negative", (c0, c1, c2, c3, c0))


def spectral_polynomial(m: LatticeModel, x: float, q: Quasimomentum, branch: Branch = "positive") -> float:
    _check_branch(branch)
    coefficients = coefficients_positive(m, x, q) if branch == "positive" else coefficients_negative(m, x, q)
    return coefficients.evaluate(x)


def _fg_positive(m: LatticeModel, k):
    s, c = m.sin2mu, m.cos2mu
    kl = k * m.ell
    sin_kl = np.sin(kl)
    f = (-s * sin_kl ** 2 * (1 + k ** 4)
         + s * (1 + 3 * np.cos(2 * kl)) * k ** 2
         + 2 * c * np.sin(2 * kl) * (k + k ** 3))
    g = 2 * sin_kl * (k ** 3 - k)
    return f, g


def _fg_negative(m: LatticeModel, kappa):
    s, c = m.sin2mu, m.cos2mu
    kl = kappa * m.ell
    sinh_kl = np.sinh(kl)
    cosh_kl = np.cosh(kl)
    f = (s * sinh_kl ** 2 * (1 + kappa ** 4)
         - s * (1 + 3 * np.cosh(2 * kl)) * kappa ** 2
         + 4 * c * cosh_kl * sinh_kl * (kappa ** 3 - kappa))
    g = 2 * sinh_kl * (kappa ** 3 + kappa)
    return f, g


def _fg_negative_scaled(m: LatticeModel, kappa):
    """F and G divided by sinh^2(kappa ell); same q_star, no overflow for large kappa ell"""
    s, c = m.sin2mu, m.cos2mu
    kl = kappa * m.ell
    with np.errstate(over="ignore"):
        inv_sinh = 1.0 / np.sinh(kl)
    coth = 1.0 / np.tanh(kl)
    f = (s * (1 + kappa ** 4)
         - s * (6 + 4 * inv_sinh ** 2) * kappa ** 2
         + 4 * c * coth * (kappa ** 3 - kappa))
    g = 2 * (kappa ** 3 + kappa) * inv_sinh
    return f, g


def reduced_fg(m: LatticeModel, x, branch: Branch = "positive"):
    """F and G with sum_j c_j x^j = F(x) + Q G(x); accepts scalars or numpy arrays"""
    _check_branch(branch)
    if np.any(np.asarray(x) <= 0):
        raise ParameterRangeError("momentum argument must be positive")
    if branch == "positive":
        return _fg_positive(m, x)
    return _fg_negative(m, x)


def _edge_functions(m: LatticeModel, branch: Branch) -> Tuple[Callable, Callable]:
    """(F + 2G, F - 2G) as vectorized callables, scaled on the negative branch"""
    fg = _fg_positive if branch == "positive" else _fg_negative_scaled

    def center(x):
        f, g = fg(m, x)
        return f + 2 * g

    def corner(x):
        f, g = fg(m, x)
        return f - 2 * g

    return center, corner


def _same_edge(a: float, b: float) -> bool:
    return abs(a - b) <= EDGE_MERGE_TOLERANCE * max(1.0, abs(a))


def _flat_scale(m: LatticeModel, x: float) -> float:
    h = min(math.pi / (4 * m.ell), 0.01)
    f, _ = _fg_positive(m, np.array([max(x - h, POSITIVE_K_MIN), x + h]))
    return float(np.max(np.abs(f)))


def _is_flat(m: LatticeModel, x: float, f: float, g: float) -> bool:
    return (abs(f) < FLAT_BAND_TOLERANCE * (1 + _flat_scale(m, x))
            and abs(g) < FLAT_BAND_TOLERANCE * (1 + 2 * abs(x ** 3 - x)))


def membership(m: LatticeModel, x: float, branch: Branch = "positive") -> MembershipVerdict:
    _check_branch(branch)
    if not x > 0:
        raise ParameterRangeError(f"momentum argument must be positive, got {x}")

    if branch == "negative":
        f, g = (float(v) for v in _fg_negative_scaled(m, x))
        if g == 0.0:
            # G underflows with 1/sinh(kappa ell); only a root of F itself is left in the spectrum
            return MembershipVerdict("in_band" if f == 0.0 else "gap", None, f, g)
        q_star = -f / g
        return MembershipVerdict("in_band" if abs(q_star) <= 2 else "gap", q_star, f, g)

    f, g = (float(v) for v in _fg_positive(m, x))
    if abs(g) < FLAT_BAND_TOLERANCE * (1 + 2 * abs(x ** 3 - x)):
        if _is_flat(m, x, f, g):
            return MembershipVerdict("flat_band", None, f, g)
        if abs(math.sin(x * m.ell)) < LATTICE_POINT_TOLERANCE:
            return MembershipVerdict("excluded_lattice_point", None, f, g)
        return MembershipVerdict("gap", None, f, g)

    q_star = -f / g
    return MembershipVerdict("in_band" if abs(q_star) <= 2 else "gap", q_star, f, g)


def flat_band_mu(ell: float) -> float:
    """mu = pi/2 - ell reduced mod pi/2, the phase at which k = 1 is a flat band"""
    if not (math.isfinite(ell) and ell > 0):
        raise ParameterRangeError(f"edge length must be positive, got {ell}")
    half_pi = math.pi / 2
    mu = (half_pi - ell) % half_pi
    if half_pi - mu < 1e-12:
        mu = 0.0
    return mu


def _flat_candidates(m: LatticeModel, lo: float, hi: float) -> List[float]:
    candidates = [1.0] if lo <= 1.0 <= hi else []
    first = max(1, math.ceil(lo / m.lattice_spacing))
    n = first
    while n * m.lattice_spacing <= hi:
        candidates.append(n * m.lattice_spacing)
        n += 1
    return candidates


def default_range(m: LatticeModel, branch: Branch) -> Tuple[float, float]:
    if branch == "positive":
        return POSITIVE_K_MIN, 20.0
    upper = 20.0
    if m.mu < math.pi / 2:
        upper = max(upper, 2 * math.tan(m.mu / 2 + math.pi / 4))
    return NEGATIVE_KAPPA_MIN, upper


def band_structure(m: LatticeModel, branch: Branch = "positive", x_range: Optional[Tuple[float, float]] = None,
                   grid: int = 1000, tol: float = 1e-12) -> BandSet:
    """Spectral bands of one branch inside x_range.

    Edges are the roots of F +/- 2G; membership of each piece between
    consecutive edges is decided at its midpoint through the sign of
    (F + 2G)(F - 2G) = F^2 - 4G^2, which is negative exactly inside bands.
    On the negative branch edges are bisected in log(kappa), so tol is relative.
    """
    _check_branch(branch)
    lo, hi = x_range if x_range is not None else default_range(m, branch)
    if not (math.isfinite(lo) and math.isfinite(hi)) or not 0 < lo < hi:
        raise InvalidIntervalError(f"band range must satisfy 0 < lo < hi, got [{lo}, {hi}]")
    if grid < 100:
        raise InvalidIntervalError(f"grid must have at least 100 points, got {grid}")

    center, corner = _edge_functions(m, branch)
    if branch == "positive":
        points = max(int(grid), int(math.ceil((hi - lo) / m.edge_search_step(hi))) + 1)

        def scan(func) -> List[float]:
            return find_roots(func, (lo, hi), points, tol=tol, vectorized=True)
    else:
        # edges near tan(mu/2 + pi/4) run off to infinity as mu -> pi/2; sample log(kappa)
        points = max(int(grid), int(math.ceil(math.log(hi / lo) / NEGATIVE_LOG_STEP)) + 1)

        def scan(func) -> List[float]:
            roots = find_roots(lambda u: func(np.exp(u)), (math.log(lo), math.log(hi)), points, tol=tol,
                               vectorized=True)
            return [min(max(math.exp(u), lo), hi) for u in roots]

    edge_roots = {kind: scan(func) for kind, func in (("center", center), ("corner", corner))}
    kinds: Dict[float, str] = {}
    for kind in ("center", "corner"):
        for root in edge_roots[kind]:
            kinds.setdefault(root, kind)

    # the exponentially narrow bands of the negative branch collapse onto one root of F
    # once sinh(kappa ell) overflows
    point_bands = []
    if branch == "negative":
        point_bands = [r for r in edge_roots["center"]
                       if any(_same_edge(r, c) for c in edge_roots["corner"])]

    breakpoints = [lo]
    edge_kind = ["range"]
    for root in sorted(kinds):
        if _same_edge(root, breakpoints[-1]):
            continue
        breakpoints.append(root)
        edge_kind.append(kinds[root])
    if hi - breakpoints[-1] <= EDGE_MERGE_TOLERANCE:
        breakpoints.pop()
        edge_kind.pop()
    breakpoints.append(hi)
    edge_kind.append("range")

    xs = np.array(breakpoints)
    midpoints = 0.5 * (xs[:-1] + xs[1:])
    inside = center(midpoints) * corner(midpoints) <= 0

    intervals: List[BandInterval] = []
    for i, flag in enumerate(inside):
        if not flag:
            continue
        if intervals and intervals[-1].hi == xs[i]:
            # two pieces sharing a tangential edge form one band
            last = intervals.pop()
            intervals.append(BandInterval(last.lo, float(xs[i + 1]), last.edge_lo, edge_kind[i + 1]))
        else:
            intervals.append(BandInterval(float(xs[i]), float(xs[i + 1]), edge_kind[i], edge_kind[i + 1]))
    for r in point_bands:
        if not any(b.lo <= r <= b.hi for b in intervals):
            intervals.append(BandInterval(r, r, "center", "corner"))
    intervals.sort(key=lambda b: b.lo)

    flat_points: List[float] = []
    if branch == "positive":
        for x in _flat_candidates(m, lo, hi):
            f, g = (float(v) for v in _fg_positive(m, x))
            if _is_flat(m, x, f, g):
                flat_points.append(x)

    logger.debug(f"band_structure mu={m.mu} ell={m.ell} {branch} on [{lo}, {hi}] with {points} points: "
                 f"{len(intervals)} bands, {len(flat_points)} flat points")
    return BandSet(branch, m.mu, m.ell, tuple(intervals), tuple(flat_points))


def band_width_bound(m: LatticeModel, n: int = 1) -> float:
    """Asymptotic energy width bound (8/ell) cot(mu) of the nth band"""
    if n < 1:
        raise ParameterRangeError(f"band index must be positive, got {n}")
    if not 0 < m.mu < math.pi / 2:
        raise ParameterRangeError(f"band width bound diverges at mu = {m.mu}")
    return 8.0 / (m.ell * math.tan(m.mu))


def asymptotic_band_widths(m: LatticeModel) -> Tuple[float, float]:
    """High-energy energy widths of the two bands next to each excluded momentum.

    With t = k sin(k ell) (sign-adjusted) the reduced condition becomes
    -s t^2 + 2 (2c + q) t + 4 s = 0 for q in [-2, 2], s = sin 2mu, c = cos 2mu;
    each root branch sweeps a band and E-width = 2 dt / ell.
    """
    if not 0 < m.mu < math.pi / 2:
        raise ParameterRangeError(f"asymptotic widths need mu in (0, pi/2), got {m.mu}")
    s, c = m.sin2mu, m.cos2mu

    def roots(q: float) -> Tuple[float, float]:
        a = 2 * c + q
        r = math.sqrt(a * a + 4 * s * s)
        return (a + r) / s, (a - r) / s

    upper_hi, lower_hi = roots(2.0)
    upper_lo, lower_lo = roots(-2.0)
    return 2 * abs(upper_hi - upper_lo) / m.ell, 2 * abs(lower_hi - lower_lo) / m.ell


def band_widths_near(m: LatticeModel, n: int, grid: int = 2000) -> Tuple[float, ...]:
    """Energy widths of the bands within half a spacing of k = pi n / ell"""
    if n < 1:
        raise ParameterRangeError(f"band index must be positive, got {n}")
    center = n * m.lattice_spacing
    half = 0.5 * m.lattice_spacing
    bands = band_structure(m, "positive", (max(center - half, POSITIVE_K_MIN), center + half), grid=grid)
    return tuple(b.energy_width for b in bands.intervals if "range" not in (b.edge_lo, b.edge_hi))


def p_sigma_estimate(m: LatticeModel, k_max: float, grid: int = 1000) -> float:
    """|sigma(H) n [0, K]| / K on the energy axis with K = k_max^2"""
    if not (math.isfinite(k_max) and k_max > POSITIVE_K_MIN):
        raise ParameterRangeError(f"k_max must be positive, got {k_max}")
    bands = band_structure(m, "positive", (POSITIVE_K_MIN, k_max), grid=max(grid, 100))
    measure = sum(b.energy_width for b in bands.intervals)
    return measure / k_max ** 2


def negative_asymptotic_quartic(mu: float) -> Tuple[float, float, float, float, float]:
    """Coefficients, highest power first, of k^4 + 4 cot(2mu) k^3 - 6 k^2 - 4 cot(2mu) k + 1"""
    if not 0 < mu < math.pi / 2:
        raise ParameterRangeError(f"mu must lie in (0, pi/2), got {mu}")
    cot = math.cos(2 * mu) / math.sin(2 * mu)
    return 1.0, 4 * cot, -6.0, -4 * cot, 1.0


def negative_asymptotic_roots(mu: float) -> Tuple[float, float]:
    """The two positive roots tan(mu/2) and tan(mu/2 + pi/4) of the large-ell quartic"""
    if not 0 < mu < math.pi / 2:
        raise ParameterRangeError(f"mu must lie in (0, pi/2), got {mu}")
    return math.tan(mu / 2), math.tan(mu / 2 + math.pi / 4)


def _snap(fixed: float, guess: float, q: float) -> float:
    """Solution of cos(theta) = q - cos(fixed) nearest to guess"""
    base = math.acos(min(1.0, max(-1.0, q - math.cos(fixed))))
    return min((base, -base), key=lambda t: abs(t - guess))


def _contour_point(row: float, col: float, thetas: NDArray[np.float64], q: float) -> Quasimomentum:
    """Mesh crossing in index coordinates, moved exactly onto the contour along its mesh line"""
    step = thetas[1] - thetas[0]
    if abs(row - round(row)) < 1e-9:
        theta1 = float(thetas[int(round(row))])
        return Quasimomentum(theta1, _snap(theta1, float(thetas[0] + col * step), q))
    theta2 = float(thetas[int(round(col))])
    return Quasimomentum(_snap(theta2, float(thetas[0] + row * step), q), theta2)


def fermi_surface(m: LatticeModel, k: float, grid: int = 200, branch: Branch = "positive") -> FermiSurface:
    """Contour cos(theta1) + cos(theta2) = q_star(k) on a grid x grid Brillouin zone mesh.

    skimage's marching squares finds the crossings on the mesh lines; each is
    then moved exactly onto the contour along its line. Consecutive points of
    a contour are joined by a segment.
    """
    if grid < 8:
        raise InvalidIntervalError(f"mesh needs at least 8 points per side, got {grid}")
    verdict = membership(m, k, branch)
    q = verdict.q_star
    # a band edge located to root tolerance may land a hair outside [-2, 2]
    at_edge = q is not None and abs(abs(q) - 2) < 1e-9
    if verdict.status != "in_band" and not at_edge:
        raise EmptyContourError(f"k = {k} is not inside a band ({verdict.status})", q)
    if q is None:
        raise EmptyContourError(f"quasimomentum is undefined at k = {k}")

    if at_edge:
        tip = Quasimomentum(0.0, 0.0) if q > 0 else Quasimomentum(math.pi, math.pi)
        return FermiSurface(k, q, (tip,))

    thetas = np.linspace(-math.pi, math.pi, int(grid))
    cos_t = np.cos(thetas)
    field_values = cos_t[:, None] + cos_t[None, :] - q
    # the saddles of cos + cos sit at level 0; the region above the level passes them only for q < 0
    contours = measure.find_contours(field_values, 0.0, fully_connected="high" if q < 0 else "low")

    if not contours:
        # contour smaller than one mesh cell
        logger.debug(f"fermi contour at k={k} below mesh resolution; reporting its center")
        tip = Quasimomentum(0.0, 0.0) if q > 0 else Quasimomentum(math.pi, math.pi)
        return FermiSurface(k, q, (tip,))

    points: List[Quasimomentum] = []
    segments: List[Tuple[int, int]] = []
    for contour in contours:
        closed = len(contour) > 3 and np.array_equal(contour[0], contour[-1])
        if closed:
            contour = contour[:-1]
        start = len(points)
        points.extend(_contour_point(float(row), float(col), thetas, q) for row, col in contour)
        segments.extend((a, a + 1) for a in range(start, len(points) - 1))
        if closed:
            segments.append((start, len(points) - 1))

    logger.debug(f"fermi contour at k={k}: {len(contours)} pieces, {len(points)} points, {len(segments)} segments")
    return FermiSurface(k, q, tuple(points), tuple(segments))


def _crossings(xs: NDArray[np.float64], values: NDArray[np.float64]) -> NDArray[np.float64]:
    """Linear-interpolated sign changes of sampled values"""
    idx = np.nonzero(np.signbit(values[:-1]) != np.signbit(values[1:]))[0]
    v0, v1 = values[idx], values[idx + 1]
    return xs[idx] + (xs[idx + 1] - xs[idx]) * v0 / (v0 - v1)


def _gap_depth(m_mu: float, ell: float, func_kind: str, window: Tuple[float, float], sigma: float,
               samples: int = 401) -> Tuple[float, float]:
    """min over the window of sigma * (F +/- 2G) and where it is attained"""
    m = LatticeModel(m_mu, ell)
    center, corner = _edge_functions(m, "positive")
    h = center if func_kind == "center" else corner
    xs = np.linspace(window[0], window[1], samples)
    values = sigma * h(xs)
    i = int(np.argmin(values))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, samples - 1)]
    if hi > lo:
        result = minimize_scalar(lambda x: sigma * float(h(x)), bounds=(lo, hi), method="bounded",
                                 options={"xatol": 1e-12})
        if result.fun < values[i]:
            return float(result.fun), float(result.x)
    return float(values[i]), float(xs[i])


def _edge_roots(mu: float, ell: float, ks: NDArray[np.float64]) -> Dict[str, NDArray[np.float64]]:
    m = LatticeModel(mu, ell)
    center, corner = _edge_functions(m, "positive")
    return {"center": _crossings(ks, center(ks)), "corner": _crossings(ks, corner(ks))}


@dataclass(frozen=True)
class _RootPair:
    """Adjacent roots (lo, hi) of one edge function and the window they own"""
    lo: float
    hi: float
    window: Tuple[float, float]

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def separation(self) -> float:
        return self.hi - self.lo


def _root_pairs(roots: NDArray[np.float64], k_range: Tuple[float, float]) -> List[_RootPair]:
    pairs = []
    for a in range(len(roots) - 1):
        r0, r1 = float(roots[a]), float(roots[a + 1])
        left = float(roots[a - 1]) if a > 0 else k_range[0]
        right = float(roots[a + 2]) if a + 2 < len(roots) else k_range[1]
        pairs.append(_RootPair(r0, r1, (0.5 * (left + r0), 0.5 * (r1 + right))))
    return pairs


def _matching_pair(pair: _RootPair, others: List[_RootPair]) -> Optional[_RootPair]:
    """The pair of a neighbouring mu sample that continues ``pair``, if it was resolved there"""
    inside = [p for p in others if pair.window[0] < p.mid < pair.window[1]]
    return min(inside, key=lambda p: abs(p.mid - pair.mid), default=None)


def dirac_points(ell: float, mu_range: Tuple[float, float] = (0.01, math.pi / 2 - 0.01), grid: int = 200,
                 k_range: Tuple[float, float] = (0.5, 12.0), k_step: float = 1e-4,
                 mapper: Callable[..., Iterable] = map) -> List[DiracPoint]:
    """Gap closings of the positive spectrum where two bands touch at Q = +2 or Q = -2.

    Two bands touching at Q = +2 (or -2) is a double root of F + 2G (or
    F - 2G): the two roots bounding the gap between them run into each other
    and pass through as mu changes, so the number of roots stays the same.
    Each pair of adjacent same-kind roots is followed over the mu samples and
    wherever its separation has a local minimum the gap depth min(sigma h)
    is maximised over mu; a closing is a maximum that reaches zero.
    ``mapper`` evaluates the mu sweep and may be a thread pool's ``map``.
    """
    lo, hi = mu_range
    if not 0 < lo < hi < math.pi / 2:
        raise InvalidIntervalError(f"mu range must lie inside (0, pi/2), got [{lo}, {hi}]")
    if not 0 < k_range[0] < k_range[1]:
        raise InvalidIntervalError(f"invalid k range {k_range}")
    if grid < 2:
        raise InvalidIntervalError(f"mu grid needs at least 2 points, got {grid}")

    mus = np.linspace(lo, hi, int(grid))
    ks = np.arange(k_range[0], k_range[1] + k_step / 2, k_step)
    sweep = list(mapper(lambda mu: _edge_roots(float(mu), ell, ks), mus))

    found: List[DiracPoint] = []
    for kind in ("center", "corner"):
        pairs = [_root_pairs(roots[kind], k_range) for roots in sweep]
        for i in range(1, len(mus) - 1):
            for pair in pairs[i]:
                bracket = [i - 1, i + 1]
                local_min = True
                for side, j in enumerate((i - 1, i + 1)):
                    match = _matching_pair(pair, pairs[j])
                    if match is None:
                        # unresolved on the k grid; the closing may sit one sample further out
                        bracket[side] = min(max(j + (j - i), 0), len(mus) - 1)
                    elif match.separation < pair.separation:
                        local_min = False
                if not local_min:
                    continue
                mu_bracket = (float(mus[bracket[0]]), float(mus[bracket[1]]))
                point = _refine_closing(ell, kind, float(mus[i]), mu_bracket, pair)
                if point is None:
                    continue
                if any(p.location == point.location and abs(p.mu - point.mu) < 1e-6 and abs(p.k - point.k) < 1e-5
                       for p in found):
                    continue
                found.append(point)

    found.sort(key=lambda p: (p.mu, p.k))
    logger.debug(f"dirac sweep ell={ell} over {len(mus)} mu values: {len(found)} gap closings")
    return found


def _refine_closing(ell: float, kind: str, mu_sample: float, mu_bracket: Tuple[float, float],
                    pair: _RootPair) -> Optional[DiracPoint]:
    m = LatticeModel(mu_sample, ell)
    if membership(m, pair.mid).status != "gap":
        # a band shrinking to nothing, not two bands touching
        return None
    center, corner = _edge_functions(m, "positive")
    h = center if kind == "center" else corner
    sigma = -1.0 if float(h(pair.mid)) > 0 else 1.0

    def lift(mu: float) -> float:
        return -_gap_depth(mu, ell, kind, pair.window, sigma)[0]

    result = minimize_scalar(lift, bounds=mu_bracket, method="bounded", options={"xatol": 1e-10})
    mu_star = float(result.x)
    depth, k_star = _gap_depth(mu_star, ell, kind, pair.window, sigma)

    center, corner = _edge_functions(LatticeModel(mu_star, ell), "positive")
    h = center if kind == "center" else corner
    scale = float(np.max(np.abs(h(np.linspace(pair.window[0], pair.window[1], 65)))))
    if abs(depth) > CLOSING_TOLERANCE * (1 + scale):
        logger.debug(f"gap near mu={mu_star:.8f}, k={k_star:.8f} stays open (depth {depth:.3e})")
        return None
    if abs(k_star - 1.0) < 1e-3 and abs(mu_star - flat_band_mu(ell)) < 1e-3:
        return None
    if membership(LatticeModel(mu_star, ell), k_star).status == "flat_band":
        return None
    return DiracPoint(mu_star, float(k_star), kind)
