"""Equivariant forms on disk configuration spaces and graph weights.

Forms are stored as ``{(u_power, mask): coefficient array}`` where ``mask``
is a bit set over the ordered generators

    dphi_1, ..., dphi_{m-1}, dRe z_1, dIm z_1, ..., dRe z_n, dIm z_n

(boundary vertex 0 is the basepoint at angle 0).  Coefficient arrays are
evaluated on a batch of sampled configurations, so one product of forms is a
handful of numpy operations.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .graphs import AdmissibleGraph, canonical_key

RNG_NAME = "numpy.PCG64/SeedSequence"
DELTA_MIN = 1e-6
N_BLOCKS = 32
KURTOSIS_LIMIT = 50.0
TWO_PI = 2.0 * math.pi


# -- point forms ---------------------------------------------------------------

def propagator(z, w, w_on_boundary: bool = False) -> dict[str, np.ndarray]:
    """Components of omega(z, w) = (1/2pi)[d arg((z-w)(1 - z conj(w))) - (x dy - y dx)].

    Keys: ``zx, zy`` (dRe z, dIm z) and either ``wx, wy`` or, when ``w`` lies
    on the unit circle, ``wphi`` (d arg w).
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.any(np.abs(z - w) == 0):
        raise ValueError("propagator evaluated at coincident points")
    wb = np.conj(w)
    q = 1.0 - z * wb
    c_z = 1.0 / (z - w) - wb / q
    c_w = -1.0 / (z - w)
    c_wb = -z / q
    s = 1.0 / TWO_PI
    out = {
        "zx": s * (c_z.imag + z.imag),
        "zy": s * (c_z.real - z.real),
    }
    if w_on_boundary:
        out["wphi"] = s * (c_w * w - c_wb * wb).real
    else:
        out["wx"] = s * (c_w + c_wb).imag
        out["wy"] = s * (c_w - c_wb).real
    return out


def zero_mode(z) -> dict[str, np.ndarray]:
    """phi(z, u) = (1/pi) dRe z dIm z + u (1 - |z|^2): keys ``area`` and ``u``."""
    z = np.asarray(z, dtype=complex)
    return {"area": np.full(z.shape, 1.0 / math.pi), "u": 1.0 - np.abs(z) ** 2}


def propagator_halfplane(x, y, y_on_real_line: bool = False) -> dict[str, np.ndarray]:
    """Angle form (1/2pi)(d arg(x - y) - d arg(conj(x) - y)).

    Keys ``xx, xy`` for the source and ``yx, yy`` (or ``yt`` for a real
    target).
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if np.any(np.abs(x - y) == 0):
        raise ValueError("propagator evaluated at coincident points")
    a = 1.0 / (x - y)
    b = 1.0 / (np.conj(x) - y)
    s = 1.0 / TWO_PI
    out = {"xx": s * (a.imag - b.imag), "xy": s * (a.real + b.real)}
    if y_on_real_line:
        out["yt"] = s * (b.imag - a.imag)
    else:
        out["yx"] = s * (b.imag - a.imag)
        out["yy"] = s * (b.real - a.real)
    return out


def boundary_pullback(alpha, w) -> dict[str, np.ndarray]:
    """Components of omega(e^{i alpha}, w) restricted to the first argument
    moving on the unit circle: keys ``alpha`` (d alpha), ``wx``, ``wy``."""
    alpha = np.asarray(alpha, dtype=float)
    z = np.exp(1j * alpha)
    c = propagator(z, w)
    return {
        "alpha": c["zx"] * (-z.imag) + c["zy"] * z.real,
        "wx": c["wx"],
        "wy": c["wy"],
    }


_COORDS = ("zx", "zy", "wx", "wy")


def _point_shift(z: complex, w: complex, coord: str, h: float) -> tuple[complex, complex]:
    if coord == "zx":
        return z + h, w
    if coord == "zy":
        return z + 1j * h, w
    if coord == "wx":
        return z, w + h
    return z, w + 1j * h


def equivariant_residual(z: complex, w: complex, h: float = 1e-5) -> dict[str, float]:
    """Components of d omega - u iota_v omega + phi(z) at an interior pair.

    d omega is taken by central finite differences of the components; v is
    the simultaneous rotation of both points.  Keys are ``"a^b"`` for the
    2-form part and ``"u"`` for the u-part; all should vanish.  The circle
    action is normalized to period 1, so v = 2 pi d/d(alpha)."""
    def comps(zz, ww):
        c = propagator(zz, ww)
        return {k: float(c[k]) for k in _COORDS}

    grad = {}
    for a in _COORDS:
        zp, wp = _point_shift(z, w, a, h)
        zm, wm = _point_shift(z, w, a, -h)
        plus, minus = comps(zp, wp), comps(zm, wm)
        grad[a] = {b: (plus[b] - minus[b]) / (2 * h) for b in _COORDS}
    out = {}
    for i, a in enumerate(_COORDS):
        for b in _COORDS[i + 1:]:
            val = grad[a][b] - grad[b][a]
            if (a, b) == ("zx", "zy"):
                val += 1.0 / math.pi
            out[f"{a}^{b}"] = val
    c = comps(z, w)
    vz, vw = TWO_PI * 1j * z, TWO_PI * 1j * w
    iota = c["zx"] * vz.real + c["zy"] * vz.imag + c["wx"] * vw.real + c["wy"] * vw.imag
    out["u"] = -iota + (1.0 - abs(z) ** 2)
    return out


def halfplane_limit_pullback(x, y, t: float, z0: complex = 1.0) -> dict[str, np.ndarray]:
    """Components of the pullback of omega along z = z0 exp(i t x) in both
    arguments, in the real coordinates of x and y (keys as for
    ``propagator_halfplane``)."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    z = z0 * np.exp(1j * t * x)
    w = z0 * np.exp(1j * t * y)
    c = propagator(z, w)
    jz = 1j * t * z
    jw = 1j * t * w
    return {
        "xx": c["zx"] * jz.real + c["zy"] * jz.imag,
        "xy": -c["zx"] * jz.imag + c["zy"] * jz.real,
        "yx": c["wx"] * jw.real + c["wy"] * jw.imag,
        "yy": -c["wx"] * jw.imag + c["wy"] * jw.real,
    }


# -- Grassmann forms over sample batches ---------------------------------------

def _merge_sign(a: int, b: int) -> int:
    """Sign of reordering the generators of ``a`` followed by those of ``b``."""
    inv = 0
    bb = b
    while bb:
        low = bb & -bb
        bit = low.bit_length() - 1
        inv += bin(a >> (bit + 1)).count("1")
        bb ^= low
    return -1 if inv & 1 else 1


class GrassForm:
    """u-polynomial of forms with array coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict | None = None):
        self.terms = dict(terms or {})

    @classmethod
    def one(cls, shape) -> "GrassForm":
        return cls({(0, 0): np.ones(shape)})

    def __mul__(self, other: "GrassForm") -> "GrassForm":
        out: dict = {}
        for (ua, ma), ca in self.terms.items():
            for (ub, mb), cb in other.terms.items():
                if ma & mb:
                    continue
                key = (ua + ub, ma | mb)
                val = ca * cb if _merge_sign(ma, mb) > 0 else -(ca * cb)
                out[key] = out[key] + val if key in out else val
        return GrassForm(out)

    def top(self, mask: int) -> dict[int, np.ndarray]:
        return {u: c for (u, m), c in self.terms.items() if m == mask}


class ConfigLayout:
    """Generator bookkeeping for C0_{n,m}: n interior points, m boundary points
    including the basepoint."""

    def __init__(self, n: int, m: int):
        if m < 1:
            raise ValueError("m >= 1")
        self.n = n
        self.m = m
        self.dim = 2 * n + m - 1
        self.top = (1 << self.dim) - 1

    def phi_bit(self, j: int) -> int:
        """Generator of boundary vertex j >= 1."""
        return 1 << (j - 1)

    def re_bit(self, i: int) -> int:
        return 1 << (self.m - 1 + 2 * i)

    def im_bit(self, i: int) -> int:
        return 1 << (self.m + 2 * i)

    def volume(self) -> float:
        return math.pi ** self.n * TWO_PI ** (self.m - 1) / math.factorial(self.m - 1)


def edge_form(layout: ConfigLayout, z: np.ndarray, ang: np.ndarray, src: int, target) -> GrassForm:
    kind, j = target
    zs = z[:, src]
    if kind == "v":
        c = propagator(zs, z[:, j])
        terms = {
            layout.re_bit(src): c["zx"], layout.im_bit(src): c["zy"],
            layout.re_bit(j): c["wx"], layout.im_bit(j): c["wy"],
        }
    elif kind == "b":
        w = np.ones_like(zs) if j == 0 else np.exp(1j * ang[:, j - 1])
        c = propagator(zs, w, w_on_boundary=True)
        terms = {layout.re_bit(src): c["zx"], layout.im_bit(src): c["zy"]}
        if j > 0:
            terms[layout.phi_bit(j)] = c["wphi"]
    else:
        raise ValueError("white edges carry no propagator")
    return GrassForm({(0, b): v for b, v in terms.items()})


def zero_mode_power(layout: ConfigLayout, z: np.ndarray, i: int, r: int) -> GrassForm:
    """phi(z_i, u)^r; the area part squares to zero."""
    if r == 0:
        return GrassForm.one(z.shape[0])
    q = 1.0 - np.abs(z[:, i]) ** 2
    area = layout.re_bit(i) | layout.im_bit(i)
    return GrassForm({
        (r, 0): q ** r,
        (r - 1, area): r * q ** (r - 1) / math.pi,
    })


def graph_form(g: AdmissibleGraph, z: np.ndarray, ang: np.ndarray) -> GrassForm:
    """Product of propagators over black edges in global order times the
    zero-mode powers."""
    layout = ConfigLayout(g.n1, g.m)
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    ang = np.asarray(ang, dtype=float).reshape(z.shape[0], max(g.m - 1, 0))
    form = GrassForm.one(z.shape[0])
    for i, _pos, t in g.black_edges():
        form = form * edge_form(layout, z, ang, i, t)
    for i, r in enumerate(g.r()):
        if r:
            form = form * zero_mode_power(layout, z, i, r)
    return form


def graph_top(g: AdmissibleGraph, z: np.ndarray, ang: np.ndarray) -> dict[int, np.ndarray]:
    """Top-degree coefficient per u-power, including 1/prod k_i!."""
    layout = ConfigLayout(g.n1, g.m)
    pref = 1.0 / math.prod(math.factorial(k) for k in g.k)
    return {u: pref * c for u, c in graph_form(g, z, ang).top(layout.top).items()}


# -- pruning and exact families ------------------------------------------------------

def structurally_zero(g: AdmissibleGraph) -> bool:
    """Form degree cannot match the configuration space dimension, or some
    generator can never appear."""
    nb = len(g.black_edges())
    dim = g.config_dim()
    if nb > dim or (dim - nb) % 2 or g.form_degree_bound() < dim:
        return True
    hit = {j for _i, _p, (kind, j) in g.black_edges() if kind == "b"}
    if any(j not in hit for j in range(1, g.m)):
        return True
    for i in range(g.n1):
        touches = any(e[0] == i for e in g.black_edges()) or any(
            t == ("v", i) for _s, _p, t in g.black_edges()
        )
        if g.r()[i] == 0 and not touches:
            return True
    return False


def possible_u_powers(g: AdmissibleGraph) -> list[int]:
    """u-powers with a top component: sum r_i - (#vertices taking the area form)."""
    nb = len(g.black_edges())
    need_area = (g.config_dim() - nb) // 2
    total_r = sum(g.r())
    if structurally_zero(g):
        return []
    return [total_r - need_area]


def exact_weight(g: AdmissibleGraph) -> dict[int, Fraction] | None:
    """Closed-form weight when the graph is in a known family, else None.

    Families: dimension-pruned graphs (0); vertices with no black edges
    factor out with integral of phi^r = u^(r-1); a single remaining vertex
    joined to every non-basepoint boundary vertex (and nothing else) gives
    sign(order) u^(r-1) / (m-1)!.
    """
    pref = Fraction(1, math.prod(math.factorial(k) for k in g.k))
    if structurally_zero(g):
        return {}
    touched = set()
    for i, _p, t in g.black_edges():
        touched.add(i)
        if t[0] == "v":
            touched.add(t[1])
    r = g.r()
    upow = 0
    for i in range(g.n1):
        if i not in touched:
            if r[i] == 0:
                return {}
            upow += r[i] - 1
    rest = sorted(touched)
    if not rest:
        return {upow: pref} if g.m == 1 else {}
    if len(rest) > 1:
        return None
    (i,) = rest
    blacks = [t for t in g.targets[i] if t[0] != "w"]
    if any(t[0] == "v" or t == ("b", 0) for t in blacks) or r[i] == 0:
        return {}
    order = [j for _k, j in blacks]
    if sorted(order) != list(range(1, g.m)):
        return {}
    inv = sum(1 for a in range(len(order)) for b in range(a + 1, len(order)) if order[a] > order[b])
    sign = -1 if inv & 1 else 1
    return {upow + r[i] - 1: pref * sign / math.factorial(g.m - 1)}


# -- sampling ----------------------------------------------------------------

def stream_seed(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))


def graph_hash(g: AdmissibleGraph) -> int:
    return zlib.crc32(canonical_key(g))


class DiskSampler:
    """Deterministic block sampler for C0_{n,m}(D) with importance weights.

    Interior points are uniform on the disk.  The m-1 free boundary angles are
    drawn i.i.d. from the mixture

        h(phi) = MIX / 2pi + (1 - MIX) / n * sum_i P(z_i, phi),

    P the Poisson kernel (a wrapped Cauchy density centred at arg z_i), and
    then sorted, so products of Poisson kernels near the rim keep a finite
    variance.  Each sample carries the weight 1/density.  Block b draws from
    the stream keyed by (seed, n, m, b); all graphs of one shape share
    samples, so estimates of sums can be formed sample by sample.
    """

    MIX = 0.5

    def __init__(self, n: int, m: int, samples: int, seed: int, blocks: int = N_BLOCKS,
                 delta: float = DELTA_MIN):
        self.n = n
        self.m = m
        self.samples = int(samples)
        self.seed = int(seed)
        self.blocks = blocks
        self.delta = delta
        self.rejected = 0

    def block_sizes(self) -> list[int]:
        base, extra = divmod(self.samples, self.blocks)
        return [base + (1 if b < extra else 0) for b in range(self.blocks)]

    def _angles(self, rng: np.random.Generator, z: np.ndarray):
        size, k = z.shape[0], self.m - 1
        if k == 0:
            return np.zeros((size, 0)), np.ones(size)
        if self.n == 0:
            ang = np.sort(TWO_PI * rng.random((size, k)), axis=1)
            return ang, np.full(size, TWO_PI ** k / math.factorial(k))
        pick = rng.random((size, k))
        which = rng.integers(0, self.n, (size, k))
        cu = rng.random((size, k))
        centre = np.take_along_axis(z, which, axis=1)
        rho = np.abs(centre)
        spread = 2.0 * np.arctan((1 - rho) / (1 + rho) * np.tan(math.pi * (cu - 0.5)))
        cauchy = np.angle(centre) + spread
        ang = np.where(pick < self.MIX, TWO_PI * rng.random((size, k)), cauchy)
        ang = np.mod(ang, TWO_PI)
        dens = np.full((size, k), self.MIX / TWO_PI)
        for i in range(self.n):
            zi = z[:, i][:, None]
            pk = (1 - np.abs(zi) ** 2) / (TWO_PI * np.abs(np.exp(1j * ang) - zi) ** 2)
            dens = dens + (1 - self.MIX) / self.n * pk
        weight = 1.0 / (math.factorial(k) * np.prod(dens, axis=1))
        return np.sort(ang, axis=1), weight

    def _draw(self, rng: np.random.Generator, size: int):
        rad = np.sqrt(rng.random((size, self.n)))
        arg = TWO_PI * rng.random((size, self.n))
        z = rad * np.exp(1j * arg)
        ang, wt = self._angles(rng, z)
        return z, ang, wt * math.pi ** self.n

    def _ok(self, z: np.ndarray, ang: np.ndarray) -> np.ndarray:
        ok = np.ones(z.shape[0], dtype=bool)
        pts = [z[:, i] for i in range(self.n)]
        bpts = [np.ones(z.shape[0])] + [np.exp(1j * ang[:, j]) for j in range(self.m - 1)]
        for a in range(self.n):
            for b in range(a + 1, self.n):
                ok &= np.abs(pts[a] - pts[b]) >= self.delta
            for t in bpts:
                ok &= np.abs(pts[a] - t) >= self.delta
        for j in range(1, len(bpts)):
            ok &= np.abs(bpts[j] - bpts[j - 1]) >= self.delta
        return ok

    def block(self, b: int, size: int):
        """(z, angles, weight) arrays for block b."""
        rng = np.random.Generator(np.random.PCG64(stream_seed(self.seed, self.n, self.m, b)))
        zs, angs, wts, have = [], [], [], 0
        while have < size:
            z, ang, wt = self._draw(rng, size - have)
            ok = self._ok(z, ang)
            self.rejected += int((~ok).sum())
            zs.append(z[ok])
            angs.append(ang[ok])
            wts.append(wt[ok])
            have += int(ok.sum())
        return np.concatenate(zs), np.concatenate(angs), np.concatenate(wts)

    def __iter__(self):
        for b, size in enumerate(self.block_sizes()):
            if size:
                yield self.block(b, size)


class Accumulator:
    """Sample-by-sample accumulation of several keyed estimators."""

    def __init__(self):
        self.sums: dict = {}
        self.moments: dict = {}
        self.block_means: dict = {}
        self.count = 0
        self.nblocks = 0

    def add_block(self, values: dict, weight: np.ndarray):
        """Add f * weight for every keyed integrand array f."""
        size = weight.shape[0]
        for key in set(self.sums) | set(values):
            v = values.get(key)
            v = np.zeros(size) if v is None else v * weight
            self.sums[key] = self.sums.get(key, 0.0) + float(v.sum())
            mom = self.moments.setdefault(key, [0.0, 0.0, 0.0])
            v2 = v * v
            mom[0] += float(v2.sum())
            mom[1] += float((v2 * v).sum())
            mom[2] += float((v2 * v2).sum())
            self.block_means.setdefault(key, [0.0] * self.nblocks).append(float(v.mean()))
        self.count += size
        self.nblocks += 1

    def result(self) -> dict:
        """key -> (mean, stderr, estimator)."""
        out = {}
        n = self.count
        for key, s in self.sums.items():
            mean = s / n
            r2, r3, r4 = (x / n for x in self.moments[key])
            var = max(r2 - mean * mean, 0.0)
            se = math.sqrt(var * n / max(n - 1, 1) / n)
            kurt = 0.0
            if var > 0:
                m4 = r4 - 4 * mean * r3 + 6 * mean * mean * r2 - 3 * mean ** 4
                kurt = m4 / (var * var)
            estimator = "mean"
            if kurt > KURTOSIS_LIMIT and self.nblocks >= 8:
                bm = np.array(self.block_means[key])
                mean = float(np.median(bm))
                se = max(se, 1.2533 * float(np.std(bm, ddof=1)) / math.sqrt(len(bm)))
                estimator = "median-of-means"
            out[key] = (mean, se, estimator)
        return out


@dataclass
class WeightEstimate:
    coefficients: dict[int, tuple[float, float, int]]
    graph_key: str
    seed: int
    samples: int
    rejected: int = 0
    pruned: bool = False
    exact: dict[int, Fraction] | None = None
    estimator: dict[int, str] = field(default_factory=dict)

    def mean(self, u: int) -> float:
        return self.coefficients.get(u, (0.0, 0.0, 0))[0]

    def stderr(self, u: int) -> float:
        return self.coefficients.get(u, (0.0, 0.0, 0))[1]

    def to_dict(self) -> dict:
        return {
            "graph_key": self.graph_key,
            "seed": self.seed,
            "samples": self.samples,
            "rejected": self.rejected,
            "pruned": self.pruned,
            "rng": RNG_NAME,
            "coefficients": [
                {"u_power": u, "mean": m, "stderr": s, "estimator": self.estimator.get(u, "mean")}
                for u, (m, s, _n) in sorted(self.coefficients.items())
            ],
        }


def mc_weight(g: AdmissibleGraph, samples: int = 200_000, seed: int = 0,
              blocks: int = N_BLOCKS, interior_perm=None) -> WeightEstimate:
    """Monte Carlo weight of g as a u-polynomial with standard errors.

    ``interior_perm`` evaluates the graph at z[:, interior_perm] instead of
    z (the sampling density is symmetric in the interior points)."""
    key = canonical_key(g).decode()
    if structurally_zero(g):
        return WeightEstimate({}, key, seed, samples, pruned=True)
    sampler = DiskSampler(g.n1, g.m, samples, seed, blocks)
    acc = Accumulator()
    for z, ang, wt in sampler:
        zz = z if interior_perm is None else z[:, list(interior_perm)]
        acc.add_block(graph_top(g, zz, ang), wt)
    res = acc.result()
    coeffs = {u: (m, s, acc.count) for u, (m, s, _e) in res.items()}
    return WeightEstimate(coeffs, key, seed, samples, sampler.rejected,
                          estimator={u: e for u, (_m, _s, e) in res.items()})


def weight(g: AdmissibleGraph, mode: str = "exact", samples: int = 200_000,
           seed: int = 0) -> WeightEstimate:
    """Exact weight when available (``mode='exact'``), otherwise Monte Carlo."""
    key = canonical_key(g).decode()
    if mode == "exact":
        ex = exact_weight(g)
        if ex is not None:
            return WeightEstimate({u: (float(c), 0.0, 0) for u, c in ex.items()}, key, seed, 0,
                                  pruned=not ex, exact=ex)
    return mc_weight(g, samples, seed)


# -- generic disk integrals ----------------------------------------------------

def mc_disk_integral(integrand, samples: int = 200_000, seed: int = 0,
                     blocks: int = N_BLOCKS) -> dict[str, tuple[float, float]]:
    """Integral over w in the unit disk of ``integrand(w)``, a dict of
    coefficient arrays of dRe w dIm w.  Returns name -> (mean, stderr)."""
    sampler = DiskSampler(1, 1, samples, seed, blocks)
    acc = Accumulator()
    for z, _ang, wt in sampler:
        acc.add_block(integrand(z[:, 0]), wt)
    return {k: (m, s) for k, (m, s, _e) in acc.result().items()}


def omega_phi_integrand(z: complex):
    """Fiber integrand of omega(z, w) phi(w, u) over w: a 1-form in z.

    Only the area part of phi reaches top degree in w; the dz component of
    omega multiplies it, so the result is u-free.
    """
    def f(w):
        c = propagator(np.full(w.shape, z), w)
        area = zero_mode(w)["area"]
        return {"dx": c["zx"] * area, "dy": c["zy"] * area}
    return f


def omega_omega_integrand(z: complex, zp: complex, zp_on_boundary: bool = False):
    """Fiber integrand of omega(z, w) omega(w, z') over w: the dw-dw part."""
    def f(w):
        a = propagator(np.full(w.shape, z), w)
        b = propagator(w, np.full(w.shape, zp), w_on_boundary=zp_on_boundary)
        return {"scalar": a["wx"] * b["zy"] - a["wy"] * b["zx"]}
    return f


def phi_power_integrand(r: int):
    """Top part of phi(w, u)^r: r u^(r-1) (1-|w|^2)^(r-1) / pi, keyed by u-power."""
    def f(w):
        q = 1.0 - np.abs(w) ** 2
        return {f"u^{r - 1}": r * q ** (r - 1) / math.pi}
    return f


# -- half-plane weights (n <= 2) ------------------------------------------------

@dataclass(frozen=True)
class HalfPlaneGraph:
    """Graph with n interior vertices in the upper half-plane and m ordered
    boundary points on the real line; ``targets[i]`` lists ("v", j) or
    ("b", j) in edge order."""

    n: int
    m: int
    targets: tuple[tuple[tuple[str, int], ...], ...]

    @property
    def k(self) -> tuple[int, ...]:
        return tuple(len(ts) for ts in self.targets)

    def edges(self):
        return [(i, pos, t) for i, ts in enumerate(self.targets) for pos, t in enumerate(ts)]

    def key(self) -> str:
        return f"H{self.n},{self.m}:" + ";".join(",".join(f"{a}{b}" for a, b in ts) for ts in self.targets)


def halfplane_graphs(k: tuple[int, ...], m: int) -> list[HalfPlaneGraph]:
    """All half-plane graphs with out-degrees k, m boundary points, no
    self-loops or repeated edges."""
    import itertools

    n = len(k)
    rows = []
    for i, ki in enumerate(k):
        pool = [("v", j) for j in range(n) if j != i] + [("b", j) for j in range(m)]
        rows.append(list(itertools.permutations(pool, ki)))
    return [HalfPlaneGraph(n, m, tuple(choice)) for choice in itertools.product(*rows)]


def _cayley(w):
    return 1j * (1 + w) / (1 - w)


def _halfplane_top(g: HalfPlaneGraph, t: np.ndarray, z2: np.ndarray | None) -> np.ndarray:
    """Top coefficient of the product of angle forms in the gauge z1 = i,
    generators dt_1..dt_m, dRe z2, dIm z2."""
    size = t.shape[0]
    m = g.m
    pos = [np.full(size, 1j)] + ([z2] if g.n > 1 else [])
    form = GrassForm.one(size)
    for i, _p, (kind, j) in g.edges():
        if kind == "b":
            c = propagator_halfplane(pos[i], t[:, j].astype(complex), y_on_real_line=True)
            terms = {1 << j: c["yt"]}
        else:
            c = propagator_halfplane(pos[i], pos[j])
            terms = {}
            if j == 1:
                terms[1 << m] = c["yx"]
                terms[1 << (m + 1)] = c["yy"]
        if i == 1:
            terms[1 << m] = terms.get(1 << m, 0) + c["xx"]
            terms[1 << (m + 1)] = terms.get(1 << (m + 1), 0) + c["xy"]
        form = form * GrassForm({(0, b): v for b, v in terms.items()})
    top = (1 << (m + 2 * (g.n - 1))) - 1
    vals = form.top(top).get(0)
    return np.zeros(size) if vals is None else vals


def _halfplane_pref(g: HalfPlaneGraph) -> float:
    return 1.0 / math.prod(math.factorial(k) for k in g.k)


def halfplane_dimension_ok(g: HalfPlaneGraph) -> bool:
    return sum(g.k) == 2 * g.n + g.m - 2


HALFPLANE_SEED_OFFSET = 7919


def halfplane_sampler(n: int, m: int, samples: int, seed: int, blocks: int = N_BLOCKS) -> DiskSampler:
    """Sampler for C_{n,m}(H) in the gauge z1 = i: the free vertex and the
    boundary points live in the Cayley disk (a disk sampler with n - 1
    interior points and m + 1 boundary points, the basepoint standing for
    t = infinity)."""
    return DiskSampler(n - 1, m + 1, samples, seed + HALFPLANE_SEED_OFFSET, blocks)


def halfplane_values(g: HalfPlaneGraph, w: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Integrand of the weight of g at Cayley-disk samples, Jacobians and the
    1/prod k! prefactor included."""
    if not halfplane_dimension_ok(g):
        return np.zeros(psi.shape[0])
    t = -1.0 / np.tan(psi / 2)
    jac = np.prod(0.5 / np.sin(psi / 2) ** 2, axis=1)
    z2 = None
    if g.n == 2:
        z2 = _cayley(w[:, 0])
        jac = jac * 4.0 / np.abs(1 - w[:, 0]) ** 4
    return _halfplane_pref(g) * _halfplane_top(g, t, z2) * jac


def kontsevich_weight(g: HalfPlaneGraph, samples: int = 200_000, seed: int = 0,
                      blocks: int = N_BLOCKS) -> tuple[float, float]:
    """Monte Carlo weight (1/prod k!) * integral over C_{n,m}(H) in the gauge
    z1 = i, orientation dt_1..dt_m dRe z2 dIm z2.  The free vertex z2 and the
    boundary points are sampled in the Cayley disk w = (z - i)/(z + i),
    t = -cot(psi/2).  Returns (mean, stderr)."""
    if g.n not in (1, 2):
        raise ValueError("half-plane weights implemented for n = 1, 2")
    if not halfplane_dimension_ok(g):
        return 0.0, 0.0
    acc = Accumulator()
    for w, psi, wt in halfplane_sampler(g.n, g.m, samples, seed, blocks):
        acc.add_block({0: halfplane_values(g, w, psi)}, wt)
    mean, se, _e = acc.result()[0]
    return mean, se


def kontsevich_weight_n2(g: HalfPlaneGraph, samples: int = 200_000, seed: int = 0) -> tuple[float, float]:
    if g.n != 2:
        raise ValueError("expected two interior vertices")
    return kontsevich_weight(g, samples, seed)


def _halfplane_boundary_sum(g, nodes, weights, w=None) -> float:
    """Integral over sorted boundary angles for a fixed Cayley-disk point w of
    the free vertex (None when there is none), times the boundary Jacobians."""
    m = g.m
    grids = np.meshgrid(*([nodes] * m), indexing="ij")
    wgrid = np.ones(grids[0].shape)
    for d in range(m):
        shape = [1] * m
        shape[d] = len(nodes)
        wgrid = wgrid * weights.reshape(shape)
    x = [gr.ravel() for gr in grids]
    wflat = wgrid.ravel()
    cols = [None] * m
    jac = np.ones_like(wflat)
    upper = np.full_like(wflat, TWO_PI)
    for j in range(m - 1, -1, -1):
        cols[j] = upper * x[j]
        jac = jac * upper
        upper = cols[j]
    theta = np.stack(cols, axis=1)
    z2 = None
    if w is None:
        psi = theta
    else:
        # pull back through zeta -> (zeta + w)/(1 + conj(w) zeta)
        theta = theta + np.angle((1 - w) / (1 - np.conj(w)))
        zeta = np.exp(1j * theta)
        denom = 1 + np.conj(w) * zeta
        psi = np.mod(np.angle((zeta + w) / denom), TWO_PI)
        jac = jac * np.prod((1 - abs(w) ** 2) / np.abs(denom) ** 2, axis=1)
        z2 = np.full(len(wflat), _cayley(w))
    t = -1.0 / np.tan(psi / 2)
    jac = jac * np.prod(0.5 / np.sin(psi / 2) ** 2, axis=1)
    return float(np.sum(_halfplane_top(g, t, z2) * jac * wflat))


def kontsevich_weight_quadrature(g: HalfPlaneGraph, order: int = 24) -> float:
    """Deterministic tensor Gauss-Legendre oracle for the same integral.

    The free vertex w = r e^{ia} lives in the Cayley disk with r = 1 - s^2;
    boundary angles are pulled back through the disk automorphism centred at
    w, which flattens the peaks of the boundary propagators near w."""
    if not halfplane_dimension_ok(g):
        return 0.0
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (nodes + 1)
    weights = 0.5 * weights
    if g.n == 1:
        total = _halfplane_boundary_sum(g, nodes, weights)
    else:
        total = 0.0
        for s, ws in zip(nodes, weights):
            rho = 1 - s * s
            for a, wa in zip(nodes, weights):
                w = rho * np.exp(1j * TWO_PI * a)
                jac = rho * 2 * s * TWO_PI * 4.0 / abs(1 - w) ** 4
                total += ws * wa * jac * _halfplane_boundary_sum(g, nodes, weights, w)
    return _halfplane_pref(g) * total


def kontsevich_quadrature_with_error(g: HalfPlaneGraph, order: int = 32) -> tuple[float, float]:
    """Quadrature value at ``order`` and the change from order 3/4 of it,
    used as the oracle's error bar."""
    hi = kontsevich_weight_quadrature(g, order)
    lo = kontsevich_weight_quadrature(g, max(4, (3 * order) // 4))
    return hi, abs(hi - lo)
