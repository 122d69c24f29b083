"""Locate eigenvalues of both branches.

Zeros of the reduced characteristic functions are counted on rectangles
by the argument principle, isolated by box subdivision, and polished by
Newton's method with a central-difference derivative. Asymptotic formulas
supply Newton seeds and the proper enumeration of the result.
"""

from __future__ import annotations

import functools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .charfun import Branch, derivative_ratio, reduced_scaled, zero_tolerance
from .exponents import NetworkParams

BRANCHES: tuple[Branch, Branch] = ("D", "H")
_OFFSET = {"D": 0.5, "H": 0.25}
_RE_SHIFT = {"D": 1.0, "H": 2.0}

NEWTON_STEP = 1e-7
NEWTON_MAX_ITER = 50
BOUNDARY_CLEARANCE = 1e-8
MAX_NUDGES = 5
SPLIT_RATIOS = (0.4874, 0.5313, 0.4411, 0.5789, 0.3967)
TIE_TOL = 1e-10
LOG_CURVATURE = 0.5


class BoundaryZeroError(RuntimeError):
    """A zero sits on (or within 1e-8 of) a box boundary."""


class WindingError(RuntimeError):
    """Phase tracking failed to produce an integer winding number."""


class NewtonError(RuntimeError):
    """Newton iteration failed to converge."""


class CountMismatchError(RuntimeError):
    """Contour totals disagree with the roots actually located."""

    def __init__(self, msg: str, box: "Box | None" = None):
        super().__init__(msg)
        self.box = box


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in the complex plane."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError(f"degenerate box {self}")

    @property
    def width(self) -> float:
        return self.re_max - self.re_min

    @property
    def height(self) -> float:
        return self.im_max - self.im_min

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        return (
            self.re_min + margin < z.real < self.re_max - margin
            and self.im_min + margin < z.imag < self.im_max - margin
        )

    def expanded(self, d: float) -> "Box":
        return Box(self.re_min - d, self.re_max + d, self.im_min - d, self.im_max + d)

    def split(self, axis: str, ratio: float) -> tuple["Box", "Box"]:
        if axis == "re":
            x = self.re_min + ratio * self.width
            return replace(self, re_max=x), replace(self, re_min=x)
        y = self.im_min + ratio * self.height
        return replace(self, im_max=y), replace(self, im_min=y)

    def to_dict(self) -> dict:
        return {"re_min": self.re_min, "re_max": self.re_max, "im_min": self.im_min, "im_max": self.im_max}


@dataclass
class Eigenvalue:
    """A located eigenvalue.

    Attributes
    ----------
    value : complex
    branch : {"D", "H"}
    index : int
        Enumeration index ``n >= 0``; the sign lives in ``label``.
    multiplicity : int
        Algebraic multiplicity: zero order, doubled on the H-branch whose
        eigenspaces are two-dimensional.
    newton_residual : float
        Size of the last Newton correction ``|f/f'|``.
    asymptotic_ref : complex
        Asymptotic prediction for this slot, ``nan`` where none applies.
    label : str
        ``"+n"`` / ``"-n"`` for conjugate slots, ``"rk"`` for real
        eigenvalues outside the asymptotic chain.
    """

    value: complex
    branch: Branch
    index: int = 0
    multiplicity: int = 1
    newton_residual: float = 0.0
    asymptotic_ref: complex = complex(math.nan, math.nan)
    label: str = ""
    order: int = 1
    iterations: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def is_real(self) -> bool:
        return self.value.imag == 0.0


@dataclass
class SpectrumReport:
    """Eigenvalues of both branches with enumeration and ordering check."""

    eigenvalues: list
    params: NetworkParams
    interlacing_ok: bool
    enumeration: dict
    n_max: int = 0
    region: Box | None = None
    coincidences: list = field(default_factory=list)
    interlacing_detail: str = ""

    def get(self, branch: Branch, n: int, upper: bool = True) -> Eigenvalue | None:
        return self.enumeration.get(branch, {}).get(("+" if upper else "-") + str(n))

    def upper(self, branch: Branch | None = None) -> list:
        """Eigenvalues with ``Im >= 0`` in ascending order."""
        return [e for e in self.eigenvalues if e.value.imag >= 0 and (branch is None or e.branch == branch)]

    def chain(self) -> list:
        """The interlacing chain ``H0, D0, H1, D1, ...`` (missing slots skipped)."""
        out = []
        for n in range(self.n_max + 1):
            for b in ("H", "D"):
                e = self.get(b, n)
                if e is not None:
                    out.append(e)
        return out


# ---------------------------------------------------------------- counting


def _fvals(branch: Branch, params: NetworkParams, z: np.ndarray) -> np.ndarray:
    val, _ = reduced_scaled(branch, z, params)
    return val


def _near_singular(box: Box, gamma: float, tol: float) -> bool:
    """Does the box boundary pass within ``tol`` of ``+-gamma/2``?"""
    def seg_dist(p: complex, a: complex, b: complex) -> float:
        t = min(1.0, max(0.0, ((p - a) * (b - a).conjugate()).real / abs(b - a) ** 2))
        return abs(p - (a + t * (b - a)))

    c = [
        complex(box.re_min, box.im_min),
        complex(box.re_max, box.im_min),
        complex(box.re_max, box.im_max),
        complex(box.re_min, box.im_max),
    ]
    for x in (-gamma / 2, gamma / 2):
        if min(seg_dist(complex(x), c[k], c[(k + 1) % 4]) for k in range(4)) <= tol:
            return True
    return False


def _sqrt_variation(a: complex, b: complex) -> float:
    """Total variation of ``sqrt|z|``-scale phase along the segment a..b.

    The exponents grow like ``sqrt(lam)``, so ``int |dz| / (2 sqrt|z|)``
    bounds the phase they accumulate and sets the initial sampling.
    """
    z = a + (b - a) * np.linspace(0.0, 1.0, 1025)
    mid = 0.5 * (z[1:] + z[:-1])
    return float(np.sum(np.abs(np.diff(z)) / (2 * np.sqrt(np.abs(mid)) + 1e-300)))


def _edge_winding(f, a: complex, b: complex, n0: int, min_len: float) -> float:
    """Phase change of ``f`` along the segment a..b.

    A piece is accepted once its phase step is below pi/2 and ``log f`` is
    nearly linear across it (second difference at the midpoint below
    ``LOG_CURVATURE``). A zero close to the segment bends ``log f`` sharply,
    so coarse pieces that would alias its phase swing get bisected.
    """
    n0 = max(n0, int(np.ceil(16 * _sqrt_variation(a, b))))
    za = a + (b - a) * np.linspace(0.0, 1.0, n0 + 1)
    fa = f(za)
    if not np.all(np.isfinite(fa)) or np.any(fa == 0):
        raise BoundaryZeroError(f"non-finite or zero value on segment {a}..{b}")
    za, zb, fa, fb = za[:-1], za[1:], fa[:-1], fa[1:]
    total = 0.0
    while za.size:
        zm = 0.5 * (za + zb)
        fm = f(zm)
        if not np.all(np.isfinite(fm)) or np.any(fm == 0):
            k = int(np.flatnonzero(~np.isfinite(fm) | (fm == 0))[0])
            raise BoundaryZeroError(f"non-finite or zero value at {zm[k]}")
        l1, l2 = np.log(fm / fa), np.log(fb / fm)
        d = np.angle(fb / fa)
        ok = (np.abs(d) < np.pi / 2) & (np.abs(l2 - l1) < LOG_CURVATURE)
        # the two halves must tell the same phase story as the whole piece
        ok &= np.abs(l1.imag + l2.imag - d) < 1e-9
        total += float(np.sum(d[ok]))
        bad = ~ok
        if not np.any(bad):
            break
        short = np.abs(zb[bad] - za[bad]) < min_len
        if np.any(short):
            raise BoundaryZeroError(f"zero within {min_len:.1e} of boundary near {za[bad][short][0]}")
        za, zb, fa, fb, zm, fm = za[bad], zb[bad], fa[bad], fb[bad], zm[bad], fm[bad]
        za, zb = np.concatenate([za, zm]), np.concatenate([zm, zb])
        fa, fb = np.concatenate([fa, fm]), np.concatenate([fm, fb])
    return total


def winding_number(f, box: Box, n0: int = 64) -> int:
    """Winding number of ``f`` around ``box`` by adaptive phase tracking.

    ``f`` maps an array of points to values. Each boundary segment is
    bisected until the phase increment across it is below pi/2.
    """
    corners = [
        complex(box.re_min, box.im_min),
        complex(box.re_max, box.im_min),
        complex(box.re_max, box.im_max),
        complex(box.re_min, box.im_max),
    ]
    total = 0.0
    for k in range(4):
        total += _edge_winding(f, corners[k], corners[(k + 1) % 4], n0, BOUNDARY_CLEARANCE)
    w = total / (2 * np.pi)
    k = round(w)
    if abs(w - k) > 1e-6:
        raise WindingError(f"non-integer winding {w} on {box}; subdivide the box")
    return int(k)


def _count(branch: Branch, box: Box, params: NetworkParams) -> int:
    if _near_singular(box, params.gamma, 1e-6 * max(1.0, params.gamma)):
        raise BoundaryZeroError(f"box boundary passes through the degenerate point on {box}")
    return winding_number(lambda z: _fvals(branch, params, z), box)


def count_zeros_box(branch: Branch, box: Box, params: NetworkParams, max_nudges: int = MAX_NUDGES):
    """Count zeros, nudging the box outward on boundary trouble.

    Returns ``(count, box_used)``.
    """
    b = box
    scale = max(box.width, box.height)
    for k in range(max_nudges + 1):
        try:
            return _count(branch, b, params), b
        except BoundaryZeroError:
            if k == max_nudges:
                raise
            b = b.expanded(scale * 1e-4 * (1.7 ** k) * (1 + 0.37 * k))
    raise AssertionError("unreachable")


def count_zeros(fun: Branch, box: Box, params: NetworkParams) -> int:
    """Number of zeros of ``fun`` inside ``box`` counted with multiplicity.

    Raises
    ------
    BoundaryZeroError
        If a zero stays on the boundary after five nudges.
    WindingError
        If phase tracking yields a non-integer winding.
    """
    return count_zeros_box(fun, box, params)[0]


# ------------------------------------------------------------------ Newton


def newton_refine(fun: Branch, seed: complex, params: NetworkParams, max_iter: int = NEWTON_MAX_ITER) -> Eigenvalue:
    """Polish a zero of ``fun`` from ``seed``.

    The derivative is a central difference with step ``1e-7 (1 + |z|)``.
    The correction history is kept in ``Eigenvalue.history``.

    Raises
    ------
    NewtonError
        On derivative underflow, divergence, more than ``max_iter``
        iterations, or a final residual above the zero tolerance.
    """
    z = complex(seed)
    hist = []
    converged = False
    for it in range(1, max_iter + 1):
        f, df = derivative_ratio(fun, z, params, NEWTON_STEP * (1 + abs(z)))
        if not (np.isfinite(f) and np.isfinite(df)) or df == 0:
            raise NewtonError(f"derivative underflow or non-finite value at {z}")
        dz = f / df
        z -= dz
        hist.append(abs(dz))
        if abs(dz) <= 1e-14 * max(1.0, abs(z)):
            converged = True
            break
        if it >= 4 and hist[-1] >= hist[-2] and hist[-1] <= 1e-10 * max(1.0, abs(z)):
            converged = True
            break
        if not np.isfinite(z) or abs(dz) > 1e6 * (1 + abs(seed)):
            raise NewtonError(f"Newton diverged from seed {seed}")
    if not converged:
        raise NewtonError(f"no convergence in {max_iter} iterations from seed {seed}")
    # real-axis roots of real functions come back with roundoff imaginary parts
    if z.imag != 0 and abs(z.imag) <= 1e-11 * max(1.0, abs(z)):
        zr = complex(z.real, 0.0)
        fr, dfr = derivative_ratio(fun, zr, params, NEWTON_STEP * (1 + abs(zr)))
        if abs(fr / dfr) <= zero_tolerance(zr):
            z = zr
    f, df = derivative_ratio(fun, z, params, NEWTON_STEP * (1 + abs(z)))
    res = abs(f / df)
    if res > zero_tolerance(z):
        raise NewtonError(f"residual {res:.2e} above tolerance at {z}")
    return Eigenvalue(value=z, branch=fun, newton_residual=float(res), iterations=len(hist), history=hist)


# -------------------------------------------------------------- asymptotics


def asymptotic_seed(branch: Branch, n: int, params: NetworkParams) -> complex:
    """Leading asymptotic location of the n-th eigenvalue of a branch.

    D-branch: ``-1/beta + i ((n + 1/2) pi)^2``;
    H-branch: ``-2/beta + i ((n + 1/4) pi)^2``.
    """
    if branch not in _OFFSET:
        raise ValueError(f"unknown branch {branch!r}")
    if n < 0:
        raise ValueError("n must be >= 0")
    if params.beta == 0:
        raise ValueError("asymptotic seed needs beta > 0")
    return complex(-_RE_SHIFT[branch] / params.beta, ((n + _OFFSET[branch]) * math.pi) ** 2)


def predicted_height(branch: Branch, n: int, gamma: float) -> float:
    """Imaginary part predicted for slot n, with the ``gamma/2`` tension shift."""
    return ((n + _OFFSET[branch]) * math.pi) ** 2 + 0.5 * gamma


def newton_seed(branch: Branch, n: int, params: NetworkParams) -> complex:
    """Seed used internally: the asymptotic seed shifted by ``i gamma/2``."""
    re = -_RE_SHIFT[branch] / params.beta if params.beta > 0 else 0.0
    return complex(re, predicted_height(branch, n, params.gamma))


# ------------------------------------------------------------ box scanning


def _split_axis(box: Box) -> str:
    return "re" if box.width >= box.height else "im"


def _find_in_box(branch: Branch, box: Box, params: NetworkParams, count: int, seeds: list, depth: int = 0) -> list:
    if count == 0:
        return []
    size = max(box.width, box.height)
    if count == 1:
        cands = [s for s in seeds if box.contains(s)] + [box.center]
        for s in cands:
            try:
                ev = newton_refine(branch, s, params)
            except NewtonError:
                continue
            if box.contains(ev.value, margin=0.0):
                ev.order = 1
                return [ev]
    if size < 1e-7 * (1 + abs(box.center)) or depth > 80:
        ev = newton_refine(branch, box.center, params)
        if not box.expanded(size).contains(ev.value):
            raise CountMismatchError(f"cluster of {count} zeros not resolved", box)
        ev.order = count
        return [ev]
    axis = _split_axis(box)
    last_err = None
    for ratio in SPLIT_RATIOS:
        lo, hi = box.split(axis, ratio)
        try:
            c_lo = _count(branch, lo, params)
            c_hi = _count(branch, hi, params)
        except (BoundaryZeroError, WindingError) as err:
            last_err = err
            continue
        if c_lo + c_hi != count:
            last_err = CountMismatchError(f"additivity failed ({c_lo}+{c_hi}!={count})", box)
            continue
        return _find_in_box(branch, lo, params, c_lo, seeds, depth + 1) + _find_in_box(
            branch, hi, params, c_hi, seeds, depth + 1
        )
    raise CountMismatchError(f"could not subdivide box: {last_err}", box)


def default_re_window(params: NetworkParams) -> tuple[float, float]:
    if params.beta > 0:
        return (-4.0 / params.beta - 2.0, 0.0)
    return (-1.0, 1.0)


def strip_heights(n_max: int, gamma: float) -> list:
    """Horizontal cut heights separating consecutive slot pairs."""
    bottom = -0.3718
    cuts = [((k + 0.875) * math.pi) ** 2 + 0.5 * gamma for k in range(n_max + 1)]
    return [bottom] + cuts


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("GRAPHBEAM_THREADS", "1")))
    except ValueError:
        return 1


def _scan_branch(branch: Branch, params: NetworkParams, n_max: int, re_window, workers: int) -> list:
    heights = strip_heights(n_max, params.gamma)
    boxes = [Box(re_window[0], re_window[1], heights[k], heights[k + 1]) for k in range(len(heights) - 1)]
    seeds = [newton_seed(branch, n, params) for n in range(n_max + 1)]

    def job(box):
        c, used = count_zeros_box(branch, box, params)
        if used != box:
            raise CountMismatchError("strip boundary hits a zero; adjust the Re window", box)
        roots = _find_in_box(branch, box, params, c, seeds)
        if sum(r.order for r in roots) != c:
            raise CountMismatchError(f"located {len(roots)} roots but counted {c}", box)
        return roots

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, boxes))
    else:
        parts = [job(b) for b in boxes]
    return [r for p in parts for r in p]


def _cmp(a: Eigenvalue, b: Eigenvalue) -> int:
    da = a.value.imag - b.value.imag
    if abs(da) > TIE_TOL:
        return -1 if da < 0 else 1
    if a.branch != b.branch:
        return -1 if a.branch == "H" else 1
    return (a.value.real > b.value.real) - (a.value.real < b.value.real)


def _assign_slots(branch: Branch, nonreal: list, params: NetworkParams, n_max: int) -> list:
    """Match upper-half nonreal roots to asymptotic slots by height."""
    ys = np.array([predicted_height(branch, n, params.gamma) for n in range(n_max + 2)])
    idx = [int(np.argmin(np.abs(ys - e.value.imag))) for e in nonreal]
    if all(b > a for a, b in zip(idx, idx[1:])):
        return idx
    top = idx[-1] if idx else 0
    k = len(nonreal)
    if top - (k - 1) >= 0:
        return list(range(top - k + 1, top + 1))
    return list(range(k))


def enumerate_branch(branch: Branch, upper: list, params: NetworkParams, n_max: int) -> list:
    """Proper enumeration of one branch from its upper-half roots.

    Returns the full list including conjugates, with ``index``, ``label``,
    ``multiplicity`` and ``asymptotic_ref`` filled in.
    """
    nonreal = sorted([e for e in upper if e.value.imag > 0], key=lambda e: e.value.imag)
    real = sorted([e for e in upper if e.value.imag == 0], key=lambda e: -e.value.real)
    out = []

    def ref(n: int, up: bool) -> complex:
        if params.beta == 0:
            return complex(math.nan, math.nan)
        s = asymptotic_seed(branch, n, params)
        return s if up else s.conjugate()

    mult = 2 if branch == "H" else 1
    slots = _assign_slots(branch, nonreal, params, n_max)
    for e, n in zip(nonreal, slots):
        e.index, e.label, e.multiplicity, e.asymptotic_ref = n, f"+{n}", mult * e.order, ref(n, True)
        c = replace(e, value=e.value.conjugate(), label=f"-{n}", asymptotic_ref=ref(n, False), history=list(e.history))
        out += [e, c]
    zero_free = 0 not in slots
    for k, e in enumerate(real):
        e.multiplicity = mult * e.order
        if zero_free and k < 2:
            e.index, e.label, e.asymptotic_ref = 0, ("+0", "-0")[k], complex(math.nan, math.nan)
        else:
            e.index, e.label, e.asymptotic_ref = 0, f"r{k}", complex(math.nan, math.nan)
        out.append(e)
    return out


def check_interlacing(report: SpectrumReport) -> tuple[bool, str]:
    """Strict check ``Im H_n < Im D_n < Im H_{n+1}`` over the found slots.

    Slots with no eigenvalue (for example H0 when ``beta = 0``) are skipped
    and listed in the detail string.
    """
    chain, missing = [], []
    for n in range(report.n_max + 1):
        for b in ("H", "D"):
            e = report.get(b, n)
            if e is None:
                missing.append(f"{b}{n}")
            else:
                chain.append(e)
    for a, b in zip(chain, chain[1:]):
        if not a.value.imag < b.value.imag:
            return False, f"{a.branch}{a.label} Im={a.value.imag!r} >= {b.branch}{b.label} Im={b.value.imag!r}"
    detail = f"{len(chain)} chain entries strictly increasing"
    if missing:
        detail += "; empty slots: " + ", ".join(missing)
    return True, detail


def _left_probe(params: NetworkParams, window, top: float) -> float | None:
    """Return a widened left edge if zeros exist left of ``window``."""
    lo = window[0]
    far = 5.0 * lo - 10.0
    probe = Box(far, lo, -0.3718, top)
    for b in BRANCHES:
        if count_zeros(b, probe, params) > 0:
            return far
    return None


def compute_spectrum(
    params: NetworkParams,
    n_max: int,
    re_window: tuple[float, float] | None = None,
    workers: int | None = None,
    auto_extend: bool = True,
) -> SpectrumReport:
    """All eigenvalues of both branches up to slot ``n_max``.

    The region ``re_window x [-0.37, ((n_max + 7/8) pi)^2 + gamma/2]`` is
    cut into horizontal strips, one per slot; each strip is scanned with
    the argument principle and subdivided until every zero is isolated and
    polished. With ``beta = 0`` the same scan runs with seeds on the
    imaginary axis. With ``auto_extend`` a wide box left of the window is
    probed and the window is widened while the probe finds zeros.

    Raises
    ------
    CountMismatchError
        If contour totals and located roots disagree.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    rw = tuple(re_window) if re_window is not None else default_re_window(params)
    workers = workers if workers is not None else _thread_cap()
    heights = strip_heights(n_max, params.gamma)
    if auto_extend:
        for _ in range(4):
            wider = _left_probe(params, rw, heights[-1])
            if wider is None:
                break
            rw = (wider, rw[1])
    region = Box(rw[0], rw[1], heights[0], heights[-1])
    allv = []
    per_branch = {}
    for b in BRANCHES:
        roots = _scan_branch(b, params, n_max, rw, workers)
        upper = [r for r in roots if r.value.imag >= 0]
        per_branch[b] = enumerate_branch(b, upper, params, n_max)
        allv += per_branch[b]
    allv.sort(key=functools.cmp_to_key(_cmp))
    enum = {b: {e.label: e for e in per_branch[b]} for b in BRANCHES}
    coinc = []
    for d in per_branch["D"]:
        for h in per_branch["H"]:
            if abs(d.value - h.value) <= 1e-8 * (1 + abs(d.value)):
                coinc.append((d.value, h.value))
    rep = SpectrumReport(allv, params, False, enum, n_max=n_max, region=region, coincidences=coinc)
    rep.interlacing_ok, rep.interlacing_detail = check_interlacing(rep)
    return rep


# ------------------------------------------------------- asymptotic table


@dataclass(frozen=True)
class AsymptoticDeviation:
    """Distance of one located eigenvalue from its leading asymptotics."""

    branch: Branch
    n: int
    value: complex
    seed: complex
    deviation: float

    @property
    def scaled(self) -> float:
        """``n^2 |lam_n - seed_n|``, bounded when the remainder is O(n^-2)."""
        return self.n**2 * self.deviation


def asymptotic_deviations(report: SpectrumReport, n_min: int, n_max: int) -> list:
    """Deviation rows for both branches and upper slots ``n_min..n_max``."""
    rows = []
    for n in range(n_min, n_max + 1):
        for b in BRANCHES:
            e = report.get(b, n)
            if e is None:
                continue
            seed = asymptotic_seed(b, n, report.params)
            rows.append(AsymptoticDeviation(b, n, e.value, seed, abs(e.value - seed)))
    return rows


def fitted_constant(rows: list) -> float:
    """Smallest ``C`` with ``|lam_n - seed_n| <= C n^-2`` on every row."""
    return max((r.scaled for r in rows), default=0.0)
