"""Deformed Marchenko-Pastur law solved from a weighted-atom population spectrum.

The limiting spectral law of a sample covariance matrix with population
spectrum ``pi = sum_t w_t delta_{sigma_t}`` and aspect ratio ``d = N/M`` is
encoded by its Stieltjes transform ``m(z)``, the unique solution of

    1/m(z) = -z + (1/d) * sum_t w_t * sigma_t / (1 + m(z) sigma_t)

with ``Im m >= 0`` and ``Im(z m) >= 0`` on the upper half plane.  Everything
else here (density, support edges, CDF, quantiles, classical eigenvalue
locations, direction-resolved laws) is derived from that solution by taking
the imaginary part as ``eta`` tends to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid


class NonConvergence(RuntimeError):
    """Fixed-point solver failed to reach the residual tolerance."""


class SupportScanFailure(RuntimeError):
    """No spectral support was found on the scan window."""


class QuantileOutOfRange(ValueError):
    """Requested quantile level falls outside the continuous mass."""


class DenominatorNearZero(ValueError):
    """Direction-density denominator is too close to zero to evaluate."""


@dataclass(frozen=True)
class HalfPlanePoint:
    """Spectral parameter z = E + i*eta in the open upper half plane."""

    E: float
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")

    @property
    def z(self) -> complex:
        return complex(self.E, self.eta)


@dataclass(frozen=True)
class SolverOptions:
    """Damped fixed-point iteration controls with eta continuation."""

    tol: float = 1e-12
    max_iter: int = 10_000
    eta_floor: float = 1e-6
    damping: float = 0.5
    eta_start: float = 1.0
    eta_ratio: float = 0.5


@dataclass(frozen=True)
class SupportOptions:
    """Support scan controls: coarse log grid plus sharp edge bisection."""

    scan_points: int = 4000
    bisect_tol: float = 1e-9
    density_threshold: float = 1e-8
    # Edge refinement uses the raw (non-extrapolated) imaginary part at a
    # smaller eta; at eta=1e-7 the off-support leakage Im m ~ eta/sqrt(kappa)
    # crosses 3e-5 only within ~1e-7 of the true edge.
    refine_eta: float = 1e-7
    refine_threshold: float = 3e-5


DEFAULT_SOLVER = SolverOptions()
DEFAULT_SUPPORT = SupportOptions()


@dataclass(frozen=True)
class PopulationSpectrum:
    """Weighted atomic spectrum of the population covariance.

    ``atoms`` is a tuple of (sigma, weight) pairs sorted by sigma descending;
    weights must sum to one.  ``tau`` is the regularity scale: the largest
    sigma may not exceed 1/tau and at most mass 1 - tau may sit at or below
    tau.
    """

    atoms: tuple[tuple[float, float], ...]
    tau: float = 0.01

    def __post_init__(self):
        atoms = tuple(sorted(((float(s), float(w)) for s, w in self.atoms),
                             key=lambda a: -a[0]))
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ValueError("spectrum needs at least one atom")
        if not 0 < self.tau < 1:
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")
        if any(s <= 0 for s, _ in atoms):
            raise ValueError("all sigma must be positive")
        if any(w <= 0 for _, w in atoms):
            raise ValueError("all weights must be positive")
        total = math.fsum(w for _, w in atoms)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, must be 1 within 1e-12")
        if atoms[0][0] > 1.0 / self.tau:
            raise ValueError(
                f"sigma_max={atoms[0][0]} exceeds 1/tau={1.0 / self.tau}")
        low_mass = math.fsum(w for s, w in atoms if s <= self.tau)
        if low_mass > 1.0 - self.tau:
            raise ValueError(
                f"mass {low_mass} at sigma <= tau exceeds 1 - tau")

    @cached_property
    def sigmas(self) -> np.ndarray:
        return np.array([s for s, _ in self.atoms])

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    @property
    def sigma_max(self) -> float:
        return self.atoms[0][0]

    @classmethod
    def identity(cls, tau: float = 0.01) -> "PopulationSpectrum":
        return cls(atoms=((1.0, 1.0),), tau=tau)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]],
                   tau: float = 0.01) -> "PopulationSpectrum":
        return cls(atoms=tuple(pairs), tau=tau)


@dataclass(frozen=True)
class LawVector:
    """Unit test vector expressed in the population eigenbasis.

    Only the squared amplitude carried by each spectrum atom matters for the
    direction-resolved law, so coordinates are grouped by atom index.
    """

    atom_indices: tuple[int, ...]
    amplitudes: tuple[complex, ...]

    def __post_init__(self):
        if len(self.atom_indices) != len(self.amplitudes):
            raise ValueError("atom_indices and amplitudes length mismatch")
        total = math.fsum(abs(a) ** 2 for a in self.amplitudes)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"squared amplitudes sum to {total!r}, not 1")

    def atom_weights(self, n_atoms: int) -> np.ndarray:
        """Squared mass per atom, as a dense vector of length n_atoms."""
        w = np.zeros(n_atoms)
        for idx, amp in zip(self.atom_indices, self.amplitudes):
            if not 0 <= idx < n_atoms:
                raise ValueError(f"atom index {idx} out of range")
            w[idx] += abs(amp) ** 2
        return w

    @classmethod
    def concentrated(cls, atom_index: int) -> "LawVector":
        return cls(atom_indices=(atom_index,), amplitudes=(1.0 + 0j,))

    @classmethod
    def from_atom_weights(cls, weights: Sequence[float]) -> "LawVector":
        total = math.fsum(weights)
        idx = [i for i, w in enumerate(weights) if w > 0]
        return cls(atom_indices=tuple(idx),
                   amplitudes=tuple(math.sqrt(weights[i] / total) for i in idx))


def _as_z(z) -> complex:
    if isinstance(z, HalfPlanePoint):
        return z.z
    return complex(z)


def _picard_step(m, z, sigmas, weights, inv_d, damping):
    integ = (weights * sigmas / (1.0 + m[..., None] * sigmas)).sum(-1)
    return damping * m + (1.0 - damping) / (-z + inv_d * integ)


def _residual(m, z, sigmas, weights, inv_d):
    integ = (weights * sigmas / (1.0 + m[..., None] * sigmas)).sum(-1)
    return np.abs(1.0 / m + z - inv_d * integ)


def _newton_step(m, z, sigmas, weights, inv_d):
    denom = 1.0 + m[..., None] * sigmas
    g = -z + inv_d * (weights * sigmas / denom).sum(-1) - 1.0 / m
    gp = 1.0 / (m * m) - inv_d * (weights * sigmas ** 2 / denom ** 2).sum(-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = g / gp
    return m - step


def _solve_eta_level(m, z, sigmas, weights, inv_d, opts: SolverOptions):
    """Iterate at fixed z until every entry meets the residual tolerance.

    Damped Picard bursts provide global convergence; Newton bursts finish
    to far below tolerance (pure Picard stalls near edges at tiny eta).
    Returns the refined m and the iteration count consumed.  The tolerance
    scales with |z|: the residual terms are of size |z|, so an absolute
    tolerance below |z|*eps is unreachable in floating point.
    """
    res = _residual(m, z, sigmas, weights, inv_d)
    iters = 0
    target = opts.tol * 1e-2 * max(1.0, float(np.max(np.abs(z))))
    while iters < opts.max_iter:
        if np.all(res < target):
            break
        for _ in range(40):
            m = _picard_step(m, z, sigmas, weights, inv_d, opts.damping)
            iters += 1
        res = _residual(m, z, sigmas, weights, inv_d)
        for _ in range(8):
            if np.all(res < target):
                break
            cand = _newton_step(m, z, sigmas, weights, inv_d)
            cand_res = _residual(cand, z, sigmas, weights, inv_d)
            ok = np.isfinite(cand_res) & (cand_res <= res) & (cand.imag > 0)
            m = np.where(ok, cand, m)
            res = np.where(ok, cand_res, res)
            iters += 1
    return m, res, iters


def solve_m2c_grid(spectrum: PopulationSpectrum, d: float, E, eta: float,
                   opts: SolverOptions = DEFAULT_SOLVER) -> np.ndarray:
    """Solve the self-consistent equation at E + i*eta for an array of E."""
    etas = _eta_ladder(eta, opts)
    return _solve_ladder(spectrum, d, np.asarray(E, dtype=float), etas, opts)[eta]


def _eta_ladder(eta_target: float, opts: SolverOptions) -> list[float]:
    if eta_target >= opts.eta_start:
        return [eta_target]
    ladder = []
    eta = opts.eta_start
    while eta > eta_target * (1.0 + 1e-12):
        ladder.append(eta)
        eta *= opts.eta_ratio
    ladder.append(eta_target)
    return ladder


def _solve_ladder(spectrum, d, E, etas, opts: SolverOptions):
    """Continuation in eta; returns {eta: m-array} at each requested level.

    ``etas`` must be sorted descending; intermediate ladder rungs are added
    above the largest gap automatically.
    """
    sigmas, weights = spectrum.sigmas, spectrum.weights
    inv_d = 1.0 / d
    E = np.atleast_1d(np.asarray(E, dtype=float))
    full = sorted(set(_eta_ladder(min(etas), opts)) | set(etas), reverse=True)
    z0 = E + 1j * full[0]
    m = -1.0 / z0
    out = {}
    budget = 0
    for eta in full:
        z = E + 1j * eta
        m, res, used = _solve_eta_level(m, z, sigmas, weights, inv_d, opts)
        budget = max(budget, used)
        tol = opts.tol * max(1.0, float(np.max(np.abs(z))))
        if np.any(res > tol):
            bad = int(np.sum(res > tol))
            raise NonConvergence(
                f"{bad} grid points above tol={tol} at eta={eta} "
                f"(max residual {res.max():.3e})")
        if eta in etas:
            out[eta] = m.copy()
    return out


def solve_m2c(spectrum: PopulationSpectrum, d: float, z,
              opts: SolverOptions = DEFAULT_SOLVER) -> complex:
    """Stieltjes transform of the deformed MP law at one half-plane point."""
    zc = _as_z(z)
    if not zc.imag > 0:
        raise ValueError(f"z must lie in the upper half plane, got {zc}")
    m = solve_m2c_grid(spectrum, d, np.array([zc.real]), zc.imag, opts)
    return complex(m[0])


def _im_continuous(m, E, eta, zero_atom):
    """Im m with the exact zero-atom pole removed.

    The point mass at zero contributes -zero_atom/z to m; near the origin
    its imaginary part would otherwise swamp the continuous density.
    """
    if zero_atom == 0.0:
        return m.imag
    return m.imag - zero_atom * eta / (E * E + eta * eta)


def density_rho2c(spectrum: PopulationSpectrum, d: float, E,
                  eta_floor: float | None = None,
                  opts: SolverOptions = DEFAULT_SOLVER):
    """Continuous spectral density at E, Richardson extrapolated in eta.

    Im m(E + i*eta) is linear in eta to leading order both on and off the
    support, so 2*f(eta/2) - f(eta) cancels the linear term.  Clamped at 0.
    """
    if eta_floor is None:
        eta_floor = opts.eta_floor
    E_arr = np.atleast_1d(np.asarray(E, dtype=float))
    sols = _solve_ladder(spectrum, d, E_arr, [eta_floor, eta_floor / 2], opts)
    zero_atom = max(0.0, 1.0 - 1.0 / d)
    v1 = _im_continuous(sols[eta_floor], E_arr, eta_floor, zero_atom)
    v2 = _im_continuous(sols[eta_floor / 2], E_arr, eta_floor / 2, zero_atom)
    rho = np.maximum((2.0 * v2 - v1) / np.pi, 0.0)
    if np.isscalar(E) or np.ndim(E) == 0:
        return float(rho[0])
    return rho


def _critical_edge_values(spectrum: PopulationSpectrum, d: float) -> np.ndarray:
    """Exact support-edge candidates: critical values of the inverse map.

    On each gap of the support the Stieltjes transform is real and the
    inverse z(m) = -1/m + (1/d) sum_t w_t s_t/(1 + m s_t) is monotone; the
    edges are the critical values z(m*) at real roots of z'(m) = 0.  For an
    atomic spectrum z'(m) = 0 clears to a polynomial of degree 2 * n_atoms.
    """
    from numpy.polynomial import polynomial as P

    sigmas, weights = spectrum.sigmas, spectrum.weights
    poly = np.array([1.0])
    for s in sigmas:
        poly = P.polymul(poly, P.polymul([1.0, s], [1.0, s]))
    acc = np.zeros(1)
    for t, (s, w) in enumerate(zip(sigmas, weights)):
        term = np.array([1.0])
        for u, s2 in enumerate(sigmas):
            if u != t:
                term = P.polymul(term, P.polymul([1.0, s2], [1.0, s2]))
        acc = P.polyadd(acc, term * (w * s * s))
    poly = P.polyadd(poly, P.polymul([0.0, 0.0, -1.0 / d], acc))
    roots = np.roots(poly[::-1])
    vals = []
    for r in roots:
        if abs(r.imag) > 1e-9 * (1.0 + abs(r.real)):
            continue
        m = r.real
        if m == 0.0 or np.any(np.abs(1.0 + m * sigmas) < 1e-12):
            continue
        z = -1.0 / m + (weights * sigmas / (1.0 + m * sigmas)).sum() / d
        if z > 0:
            vals.append(z)
    return np.array(sorted(vals))


def find_support(spectrum: PopulationSpectrum, d: float,
                 opts: SolverOptions = DEFAULT_SOLVER,
                 support_opts: SupportOptions = DEFAULT_SUPPORT):
    """Locate the support components [a_lo, a_hi] and the zero-atom mass.

    A log-dense density scan brackets each component; edges are then refined
    by bisection on a small-eta threshold criterion (see SupportOptions).
    """
    hi = 2.0 * (1.0 + math.sqrt(1.0 / d)) ** 2 * spectrum.sigma_max
    lo = 1e-6 * hi
    grid = np.geomspace(lo, hi, support_opts.scan_points)
    rho = density_rho2c(spectrum, d, grid, opts.eta_floor, opts)
    inside = rho > support_opts.density_threshold
    if not inside.any():
        raise SupportScanFailure(
            f"no density above {support_opts.density_threshold} on the scan window")

    runs = []
    idx = np.flatnonzero(np.diff(inside.astype(int)))
    starts = [0] if inside[0] else []
    starts += [i + 1 for i in idx if not inside[i]]
    ends = [i for i in idx if inside[i]]
    if inside[-1]:
        ends.append(len(grid) - 1)
    for s, e in zip(starts, ends):
        runs.append((s, e))

    zero_atom = max(0.0, 1.0 - 1.0 / d)
    eta_r = support_opts.refine_eta
    thresh = support_opts.refine_threshold

    def im_over_pi(E_vals):
        E_vals = np.asarray(E_vals, float)
        sols = _solve_ladder(spectrum, d, E_vals, [eta_r], opts)
        return _im_continuous(sols[eta_r], E_vals, eta_r, zero_atom) / np.pi

    def bisect(lo_pts, hi_pts, want_inside_low):
        # vectorized bisection: criterion flips between lo and hi
        lo_pts = np.array(lo_pts, dtype=float)
        hi_pts = np.array(hi_pts, dtype=float)
        while np.max(hi_pts - lo_pts) > support_opts.bisect_tol:
            mid = 0.5 * (lo_pts + hi_pts)
            ins = im_over_pi(mid) > thresh
            go_up = ins == want_inside_low
            lo_pts = np.where(go_up, mid, lo_pts)
            hi_pts = np.where(go_up, hi_pts, mid)
        return 0.5 * (lo_pts + hi_pts)

    left_lo, left_hi, right_lo, right_hi = [], [], [], []
    for s, e in runs:
        left_lo.append(grid[s - 1] if s > 0 else lo * 0.5)
        left_hi.append(grid[s])
        right_lo.append(grid[e])
        right_hi.append(grid[e + 1] if e + 1 < len(grid) else hi * 1.5)
    lower_edges = bisect(left_lo, left_hi, want_inside_low=False)
    upper_edges = bisect(right_lo, right_hi, want_inside_low=True)

    edges = [(float(a), float(b)) for a, b in zip(lower_edges, upper_edges)]
    # merge components whose refined edges meet (coarse scan artifacts)
    merged = [edges[0]]
    for a, b in edges[1:]:
        if a - merged[-1][1] < 10 * support_opts.bisect_tol:
            merged[-1] = (merged[-1][0], b)
        else:
            merged.append((a, b))

    # Threshold bisection carries an O(eta * edge-slope) bias; snap each edge
    # to the nearest critical value of the inverse map, which is exact for
    # atomic spectra.  Skip for very large atom counts (ill-conditioned roots).
    if len(spectrum.atoms) <= 12:
        candidates = _critical_edge_values(spectrum, d)
        if candidates.size:
            polished = []
            for a, b in merged:
                width = b - a
                ca = candidates[np.argmin(np.abs(candidates - a))]
                cb = candidates[np.argmin(np.abs(candidates - b))]
                pa = ca if abs(ca - a) < 0.05 * width + 1e-3 else a
                pb = cb if abs(cb - b) < 0.05 * width + 1e-3 else b
                polished.append((float(pa), float(pb)))
            merged = polished
    return merged, zero_atom


def _component_grid(lo, hi, n):
    """Nodes clustered quadratically at both edges (cosine map).

    The square-root edge behavior of the density becomes smooth in the map
    parameter, so the trapezoid rule converges fast on these nodes.
    """
    u = np.linspace(0.0, 1.0, n)
    return 0.5 * (lo + hi) - 0.5 * (hi - lo) * np.cos(np.pi * u)


@dataclass(frozen=True, eq=False)
class SolvedLaw:
    """Fully resolved deformed MP law with cached density and CDF tables."""

    spectrum: PopulationSpectrum
    d: float
    edges: tuple[tuple[float, float], ...]
    zero_atom: float
    solver_opts: SolverOptions
    support_opts: SupportOptions
    grid_E: np.ndarray          # density nodes over all components
    grid_rho: np.ndarray        # extrapolated density at the nodes
    grid_m: np.ndarray          # m at E + i*eta_floor on the nodes
    grid_m_half: np.ndarray     # m at E + i*eta_floor/2 on the nodes
    component_slices: tuple[slice, ...]
    cdf_x: np.ndarray           # knots of the continuous-part CDF table
    cdf_val: np.ndarray         # cumulative continuous mass at the knots

    # -- basic evaluators ---------------------------------------------------

    @property
    def continuous_mass(self) -> float:
        return float(self.cdf_val[-1])

    @property
    def total_mass(self) -> float:
        return self.zero_atom + self.continuous_mass

    @property
    def edge_list(self) -> np.ndarray:
        """All edges flattened, descending (a_1 > a_2 > ...)."""
        return np.sort(np.asarray(self.edges).ravel())[::-1]

    @property
    def top_edge(self) -> float:
        return self.edges[-1][1]

    def m2c(self, z, eta: float | None = None) -> complex:
        """Stieltjes transform; real z is lifted to z + i*eta_floor."""
        zc = complex(z)
        if zc.imag == 0:
            zc = complex(zc.real, eta if eta is not None else self.solver_opts.eta_floor)
        return solve_m2c(self.spectrum, self.d, zc, self.solver_opts)

    def density(self, E):
        """Continuous density rho(E) via fresh Richardson-extrapolated solve."""
        return density_rho2c(self.spectrum, self.d, E,
                             self.solver_opts.eta_floor, self.solver_opts)

    def cdf(self, x):
        """F(x) = zero_atom * 1{x >= 0} + integral of rho up to x."""
        x_arr = np.asarray(x, dtype=float)
        cont = np.interp(x_arr, self.cdf_x, self.cdf_val,
                         left=0.0, right=self.continuous_mass)
        out = np.where(x_arr >= 0, self.zero_atom + cont, 0.0)
        if np.ndim(x) == 0:
            return float(out)
        return out

    def quantile(self, q: float, tol: float = 1e-10) -> float:
        """Smallest x with F(x) >= q, by bisection on the cached CDF."""
        if q < -1e-12 or q > self.total_mass + 1e-9:
            raise QuantileOutOfRange(f"level {q} outside [0, {self.total_mass}]")
        if q <= self.zero_atom:
            return 0.0
        lo, hi = 0.0, self.top_edge
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) >= q:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    # -- derived quantities ---------------------------------------------------

    def classical_locations(self, N: int, M: int | None = None) -> np.ndarray:
        """gamma_1 > ... > gamma_K solving 1 - F(gamma_j) = (j - 1/2)/N."""
        if M is None:
            M = int(round(N / self.d))
        K = min(M, N)
        j = np.arange(1, K + 1)
        levels = 1.0 - (j - 0.5) / N
        if np.any(levels < self.zero_atom - 1e-12):
            raise QuantileOutOfRange(
                f"(j-1/2)/N up to {(K - 0.5) / N} exceeds continuous mass "
                f"{self.continuous_mass}")
        lo = np.zeros(K)
        hi = np.full(K, self.top_edge)
        while np.max(hi - lo) > 1e-10:
            mid = 0.5 * (lo + hi)
            ge = self.cdf(mid) >= levels
            hi = np.where(ge, mid, hi)
            lo = np.where(ge, lo, mid)
        return 0.5 * (lo + hi)

    def edge_regularity(self, tau: float | None = None):
        """Per-edge regularity report plus measured interior density minima."""
        if tau is None:
            tau = self.spectrum.tau
        edges = self.edge_list
        sigmas = self.spectrum.sigmas
        reports = []
        for k, a in enumerate(edges):
            others = np.delete(edges, k)
            sep = float(np.min(np.abs(a - others))) if others.size else math.inf
            m = self.m2c(a)
            margin = float(np.min(np.abs(1.0 + m * sigmas)))
            reports.append(EdgeRegularity(
                edge=float(a),
                location_ok=bool(a >= tau),
                separation=sep,
                separation_ok=bool(sep >= tau),
                stability_margin=margin,
                stability_ok=bool(margin >= tau),
            ))
        minima = []
        for sl, (lo, hi) in zip(self.component_slices, self.edges):
            E = self.grid_E[sl]
            inner = (E >= lo + 0.1 * (hi - lo)) & (E <= hi - 0.1 * (hi - lo))
            minima.append(float(self.grid_rho[sl][inner].min()) if inner.any()
                          else 0.0)
        return RegularityReport(tau=tau, edges=tuple(reports),
                                bulk_density_minima=tuple(minima))

    def spiked_density(self, sigma_i: float, E: float) -> float:
        """Density of the law seen from a population direction with value sigma_i."""
        if sigma_i <= 0:
            raise ValueError("sigma_i must be positive")
        rho = self.density(E)
        if rho == 0.0:
            return 0.0
        m = self.m2c(E)
        denom = 1.0 / sigma_i + 2.0 * m.real + abs(m) ** 2 * sigma_i
        if abs(denom) < 1e-10:
            raise DenominatorNearZero(
                f"direction denominator {denom:.3e} at E={E}, sigma={sigma_i}")
        return rho / (E * denom)

    def direction(self, u: LawVector) -> "DirectionalLaw":
        """Direction-resolved law F(u) for a unit vector in the Sigma eigenbasis."""
        return DirectionalLaw._build(self, u)

    def vector_cdf(self, u: LawVector, x) -> float:
        return self.direction(u).cdf(x)


@dataclass(frozen=True)
class EdgeRegularity:
    edge: float
    location_ok: bool
    separation: float
    separation_ok: bool
    stability_margin: float
    stability_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.location_ok and self.separation_ok and self.stability_ok


@dataclass(frozen=True)
class RegularityReport:
    tau: float
    edges: tuple[EdgeRegularity, ...]
    bulk_density_minima: tuple[float, ...]

    @property
    def all_ok(self) -> bool:
        return all(e.all_ok for e in self.edges)


@dataclass(frozen=True, eq=False)
class DirectionalLaw:
    """CDF/density of the law restricted to one test direction."""

    law: SolvedLaw
    u: LawVector
    atom: float                 # mass at zero fixed so the total is one
    grid_rho: np.ndarray
    cdf_x: np.ndarray
    cdf_val: np.ndarray

    @classmethod
    def _build(cls, law: SolvedLaw, u: LawVector) -> "DirectionalLaw":
        wsq = u.atom_weights(len(law.spectrum.atoms))
        rho = _direction_density_from_m(
            law.grid_E, law.grid_m, law.grid_m_half,
            law.spectrum.sigmas, wsq, law.solver_opts.eta_floor)
        cdf_x, cdf_val = _assemble_cdf(law.grid_E, rho, law.component_slices,
                                       law.edges)
        atom = max(0.0, 1.0 - float(cdf_val[-1]))
        return cls(law=law, u=u, atom=atom, grid_rho=rho,
                   cdf_x=cdf_x, cdf_val=cdf_val)

    def density(self, E):
        E_arr = np.atleast_1d(np.asarray(E, dtype=float))
        sols = _solve_ladder(self.law.spectrum, self.law.d, E_arr,
                             [self.law.solver_opts.eta_floor,
                              self.law.solver_opts.eta_floor / 2],
                             self.law.solver_opts)
        eta = self.law.solver_opts.eta_floor
        wsq = self.u.atom_weights(len(self.law.spectrum.atoms))
        rho = _direction_density_from_m(E_arr, sols[eta], sols[eta / 2],
                                        self.law.spectrum.sigmas, wsq, eta)
        if np.ndim(E) == 0:
            return float(rho[0])
        return rho

    def cdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        cont = np.interp(x_arr, self.cdf_x, self.cdf_val,
                         left=0.0, right=float(self.cdf_val[-1]))
        out = np.where(x_arr >= 0, self.atom + cont, 0.0)
        if np.ndim(x) == 0:
            return float(out)
        return out

    @property
    def total_mass(self) -> float:
        return self.atom + float(self.cdf_val[-1])


def _direction_density_from_m(E, m, m_half, sigmas, wsq, eta):
    """Richardson-extrapolated Im of -<u, (z(1+m Sigma))^{-1} u> / pi."""
    out = np.zeros_like(np.asarray(E, dtype=float))
    for s, w in zip(sigmas, wsq):
        if w == 0.0:
            continue
        z = E + 1j * eta
        z2 = E + 1j * (eta / 2)
        v = (-1.0 / (z * (1.0 + m * s))).imag
        v2 = (-1.0 / (z2 * (1.0 + m_half * s))).imag
        out = out + w * (2.0 * v2 - v)
    return np.maximum(out / np.pi, 0.0)


def _assemble_cdf(grid_E, rho, slices, edges):
    """Cumulative-trapezoid table over the component grids, flat on gaps."""
    xs = [np.array([0.0])]
    vals = [np.array([0.0])]
    acc = 0.0
    for sl, (lo, hi) in zip(slices, edges):
        E = grid_E[sl]
        r = rho[sl]
        cum = cumulative_trapezoid(r, E, initial=0.0) + acc
        xs.append(E)
        vals.append(cum)
        acc = float(cum[-1])
    cdf_x = np.concatenate(xs)
    cdf_val = np.concatenate(vals)
    return cdf_x, cdf_val


def solve_law(spectrum: PopulationSpectrum, d: float,
              opts: SolverOptions = DEFAULT_SOLVER,
              support_opts: SupportOptions = DEFAULT_SUPPORT,
              nodes_per_component: int = 3001) -> SolvedLaw:
    """Resolve the full law: support, density grid, CDF table."""
    if d <= 0:
        raise ValueError(f"aspect ratio d must be positive, got {d}")
    edges, zero_atom = find_support(spectrum, d, opts, support_opts)

    grids = []
    slices = []
    start = 0
    for lo, hi in edges:
        g = _component_grid(lo, hi, nodes_per_component)
        grids.append(g)
        slices.append(slice(start, start + len(g)))
        start += len(g)
    grid_E = np.concatenate(grids)

    sols = _solve_ladder(spectrum, d, grid_E,
                         [opts.eta_floor, opts.eta_floor / 2], opts)
    m_lo = sols[opts.eta_floor]
    m_half = sols[opts.eta_floor / 2]
    rho = np.maximum((2.0 * m_half.imag - m_lo.imag) / np.pi, 0.0)

    cdf_x, cdf_val = _assemble_cdf(grid_E, rho, slices, edges)

    return SolvedLaw(
        spectrum=spectrum, d=d, edges=tuple(edges), zero_atom=zero_atom,
        solver_opts=opts, support_opts=support_opts,
        grid_E=grid_E, grid_rho=rho, grid_m=m_lo, grid_m_half=m_half,
        component_slices=tuple(slices), cdf_x=cdf_x, cdf_val=cdf_val)
