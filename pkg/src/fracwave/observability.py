"""Subdomain observability and inverse source recovery.

The map (a, b) -> u restricted to omega x sample-times is linear in the data,
so it has a matrix representation built column by column from unit sources.
Its singular spectrum quantifies, at desk scale, whether observing the
solution on an arbitrary subdomain determines the data pair: trivial kernel
(sigma_min > 0, numerical rank 2N) is the finite-dimensional shadow of the
uniqueness statement for the continuum problem.

The module also carries the proof-pipeline probes: the resolvent-vanishing
map a -> (A - z)^(-1) a |_omega over many shifts, the projection cascade that
descends D_n^l P_n a down to P_n a, and the branch identity that links the
resolvents of a and b through the fractional power (-eta)^(1/alpha).
Discrete unique continuation is treated as an empirical property throughout:
the cascade measures it and flags violations instead of assuming it.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .elliptic import as_matrix
from .errors import ContourError, NumericsError
from .fraccalc import TimeGrid
from .solver import (
    LaplaceContour,
    SourcePair,
    solve_resolvent,
    solve_spectral_oracle,
    solve_timestep,
    states_at,
)
from .spectral import RieszData, compute_riesz_data, eigendecompose

__all__ = [
    "ObservationSetup",
    "ObservationMap",
    "ProbeVector",
    "InjectivityReport",
    "VanishingReport",
    "CascadeClusterReport",
    "CascadeReport",
    "BranchSample",
    "InversionResult",
    "build_observation_map",
    "injectivity_report",
    "resolvent_vanishing_check",
    "projection_cascade_check",
    "branch_identity_probe",
    "invert_source",
    "synthesize_observations",
    "chebyshev_segment",
    "default_shift_samples",
    "write_singular_values_csv",
    "write_recovery_csv",
]

# lambda_reg = scale * sigma_1^2; 1e-6 balances bias against noise amplification
# at the per-mille noise levels of the standard recovery experiments (smaller
# scales were measured to amplify 1e-3 relative noise into >10x larger data
# errors on the desk-scale problems)
TIKHONOV_SCALE_DEFAULT = 1e-6


@dataclass
class ObservationSetup:
    """Where and when the solution is observed, and which solver produces it."""

    omega_indices: np.ndarray
    sample_times: np.ndarray
    route: str = "spectral"
    route_params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega_indices = np.asarray(self.omega_indices, dtype=int)
        self.sample_times = np.asarray(self.sample_times, dtype=float)
        if self.omega_indices.size == 0:
            raise ValueError("observation subdomain is empty")
        if self.sample_times.size == 0:
            raise ValueError("no sample times")
        if np.any(self.sample_times <= 0.0) or np.any(np.diff(self.sample_times) <= 0.0):
            raise ValueError("sample times must be strictly increasing and positive")
        if self.route not in ("spectral", "resolvent", "timestep"):
            raise ValueError(f"unknown solver route {self.route!r}")


@dataclass
class ObservationMap:
    """Matrix of the data-to-observations map with its singular spectrum.

    Row ordering is time-major: row = time_index * |omega| + omega_position.
    Columns 0..N-1 are unit a-sources, columns N..2N-1 unit b-sources.
    """

    matrix: np.ndarray = field(repr=False)
    setup: ObservationSetup
    n_dof: int  # N; the map has 2N columns
    svd_u: np.ndarray = field(repr=False, default=None)
    singular_values: np.ndarray = None
    svd_vt: np.ndarray = field(repr=False, default=None)
    params: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


def _solve_route(A, source: SourcePair, alpha: float, setup: ObservationSetup, shared):
    times = setup.sample_times
    if setup.route == "spectral":
        return solve_spectral_oracle(shared, source, alpha, times)
    if setup.route == "resolvent":
        return solve_resolvent(A, source, alpha, times, contour=shared)
    grid: TimeGrid = shared
    field_ = solve_timestep(A, source, alpha, grid)
    return states_at(field_, times)


def _route_shared_state(A, alpha: float, setup: ObservationSetup):
    if setup.route == "spectral":
        riesz = setup.route_params.get("riesz")
        if riesz is None:
            nodes = setup.route_params.get("contour_nodes", 64)
            eigsys = eigendecompose(A, setup.route_params.get("cluster_tol"))
            riesz = compute_riesz_data(A, eigsys, nodes)
        return riesz
    if setup.route == "resolvent":
        return LaplaceContour(nodes=setup.route_params.get("contour_nodes", 48))
    T = float(setup.sample_times[-1])
    K = int(setup.route_params.get("K", 1024))
    grid = TimeGrid(T, K)
    # every sample time must land on a grid node
    k = np.rint(setup.sample_times / grid.dt)
    if np.any(np.abs(k * grid.dt - setup.sample_times) > 1e-9 * max(1.0, T)):
        raise ValueError(
            "sample times must be nodes of the time-stepping grid; adjust K"
        )
    return grid


def build_observation_map(A, alpha: float, setup: ObservationSetup) -> ObservationMap:
    """Assemble the (|omega| * |times|) x 2N observation matrix and its SVD.

    Column j is the forward solution of the j-th unit source (a-basis first,
    then b-basis) restricted to omega x sample-times; linearity of the
    evolution in (a, b) justifies the matrix representation.  For the spectral
    route the Riesz decomposition is computed once and the unit-source solves
    reduce to restricted projector columns, which assembles the same numbers
    as 2N independent solves.
    """
    mat = as_matrix(A)
    n = mat.shape[0]
    omega = setup.omega_indices
    if np.any(omega < 0) or np.any(omega >= n):
        raise ValueError("omega indices outside the operator's index range")
    times = setup.sample_times
    rows = times.size * omega.size
    M = np.empty((rows, 2 * n))
    shared = _route_shared_state(A, alpha, setup)

    if setup.route == "spectral":
        riesz: RieszData = shared
        from .fraccalc import mittag_leffler

        e1 = np.empty((len(times), riesz.n_clusters), dtype=complex)
        e2 = np.empty_like(e1)
        for it, t in enumerate(times):
            for ic, lam in enumerate(riesz.eigenvalues):
                z = -lam * t**alpha
                e1[it, ic] = mittag_leffler(alpha, 1.0, z)
                e2[it, ic] = t * mittag_leffler(alpha, 2.0, z)
        p_omega = [P[omega, :] for P in riesz.projections]
        for it in range(len(times)):
            blk_a = np.zeros((omega.size, n), dtype=complex)
            blk_b = np.zeros((omega.size, n), dtype=complex)
            for ic in range(riesz.n_clusters):
                blk_a += e1[it, ic] * p_omega[ic]
                blk_b += e2[it, ic] * p_omega[ic]
            sl = slice(it * omega.size, (it + 1) * omega.size)
            M[sl, :n] = blk_a.real
            M[sl, n:] = blk_b.real
    else:
        zero = np.zeros(n)
        for j in range(2 * n):
            unit = np.zeros(n)
            unit[j % n] = 1.0
            source = SourcePair(unit, zero) if j < n else SourcePair(zero, unit)
            try:
                sol = _solve_route(A, source, alpha, setup, shared)
            except NumericsError as exc:
                raise NumericsError(f"forward solve failed for column {j}: {exc}") from exc
            samples = sol if isinstance(sol, np.ndarray) else sol.states
            M[:, j] = samples[:, omega].reshape(-1)

    u, s, vt = scipy.linalg.svd(M, full_matrices=False)
    return ObservationMap(
        matrix=M,
        setup=setup,
        n_dof=n,
        svd_u=u,
        singular_values=s,
        svd_vt=vt,
        params={
            "alpha": alpha,
            "route": setup.route,
            "row_order": "time-major (row = time_index * |omega| + omega_position)",
            "column_order": "a-basis columns 0..N-1, then b-basis columns N..2N-1",
        },
    )


@dataclass
class InjectivityReport:
    sigma_min: float
    sigma_max: float
    condition: float
    numerical_rank: int
    expected_rank: int
    injective: bool
    rank_threshold: float


def injectivity_report(obsmap: ObservationMap, rank_tol: float | None = None) -> InjectivityReport:
    """Numerical rank of the observation map against the full-rank expectation.

    The default threshold is the LAPACK-style max(shape) * eps * sigma_1;
    pass ``rank_tol`` (relative to sigma_1) to override.
    """
    s = obsmap.singular_values
    smax = float(s[0]) if s.size else 0.0
    if rank_tol is None:
        thresh = max(obsmap.shape) * np.finfo(float).eps * smax
    else:
        thresh = rank_tol * smax
    rank = int(np.sum(s > thresh))
    expected = 2 * obsmap.n_dof
    # fewer rows than columns: the column map has a genuine kernel
    smin = float(s[-1]) if s.size >= expected else 0.0
    return InjectivityReport(
        sigma_min=smin,
        sigma_max=smax,
        condition=smax / smin if smin > 0 else math.inf,
        numerical_rank=rank,
        expected_rank=expected,
        injective=rank == expected,
        rank_threshold=thresh,
    )


# ---------------------------------------------------------------------------
# Resolvent-vanishing map and projection cascade
# ---------------------------------------------------------------------------


def chebyshev_segment(count: int, lo: float, hi: float) -> np.ndarray:
    """Chebyshev points on [lo, hi], ascending (well-conditioned resolvents)."""
    k = np.arange(count)
    x = np.cos((2 * k + 1) * np.pi / (2 * count))
    return np.sort(0.5 * (lo + hi) + 0.5 * (hi - lo) * x)


def default_shift_samples(A, count: int) -> np.ndarray:
    """Chebyshev-spaced real shifts on a segment left of the spectrum."""
    eig = np.linalg.eigvals(as_matrix(A))
    scale = max(1.0, float(np.max(np.abs(eig))))
    right = float(np.min(eig.real)) - 0.01 * scale
    left = right - 2.0 * scale
    return chebyshev_segment(count, left, right)


@dataclass
class VanishingReport:
    """Stacked restricted-resolvent map a -> [(A - z_k)^(-1) a]|_omega."""

    matrix: np.ndarray = field(repr=False)
    singular_values: np.ndarray = None
    shifts: np.ndarray = None

    @property
    def sigma_min(self) -> float:
        rows, cols = self.matrix.shape
        if rows < cols:
            return 0.0  # underdetermined: genuine kernel
        return float(self.singular_values[-1])

    @property
    def sigma_max(self) -> float:
        return float(self.singular_values[0])

    def kernel_vector(self, rel_tol: float = 1e-10) -> np.ndarray | None:
        """Unit kernel vector when the map is numerically non-injective."""
        if self.sigma_min > rel_tol * max(self.sigma_max, 1e-300):
            return None
        rows, cols = self.matrix.shape
        if rows < cols:
            null = scipy.linalg.null_space(self.matrix)
            return np.ascontiguousarray(null[:, 0])
        _, _, vt = scipy.linalg.svd(self.matrix, full_matrices=False)
        return vt[-1].conj()


def resolvent_vanishing_check(A, omega_indices, z_samples) -> VanishingReport:
    """sigma_min of the stacked map; positive means trivial kernel.

    A trivial kernel is the discrete shadow of the statement that data whose
    resolvent vanishes on omega for every shift must vanish everywhere.
    """
    mat = as_matrix(A).astype(complex)
    n = mat.shape[0]
    omega = np.asarray(omega_indices, dtype=int)
    zs = np.atleast_1d(np.asarray(z_samples, dtype=complex))
    if zs.size == 0:
        raise ValueError("need at least one shift sample")
    eig = np.linalg.eigvals(mat)
    dist = np.min(np.abs(zs[:, None] - eig[None, :]))
    scale = max(1.0, float(np.max(np.abs(eig))))
    if dist < 1e-8 * scale:
        raise ContourError(
            f"shift sample within {dist:.3g} of the spectrum; move the segment"
        )
    eye = np.eye(n, dtype=complex)
    blocks = []
    for z in zs:
        res = scipy.linalg.solve(mat - z * eye, eye)
        blocks.append(res[omega, :])
    stacked = np.vstack(blocks)
    s = scipy.linalg.svdvals(stacked)
    return VanishingReport(matrix=stacked, singular_values=s, shifts=zs)


@dataclass
class CascadeClusterReport:
    eigenvalue: complex
    multiplicity: int
    projection_norm: float  # ||P_n a|| over the whole domain
    max_omega_residual: float  # max_l ||(D^l P_n a)|_omega||
    descent_residuals: list  # ||(A - lam) D^l P_n a|| for l = d-1 .. 0
    uc_violation: bool  # nonzero in Omega while ~0 on omega at some level


@dataclass
class CascadeReport:
    vacuous: bool
    note: str
    clusters: list = field(default_factory=list)
    kernel_sigma_min: float | None = None

    @property
    def any_uc_violation(self) -> bool:
        return any(c.uc_violation for c in self.clusters)


def projection_cascade_check(
    A,
    riesz: RieszData,
    a: np.ndarray | None,
    omega_indices,
    tol: float = 1e-8,
    z_samples=None,
) -> CascadeReport:
    """Descend D_n^l P_n a toward P_n a for a vector invisible from omega.

    When ``a`` is None, a kernel vector of the stacked restricted-resolvent
    map is sought (shift samples default to a Chebyshev segment left of the
    spectrum).  If that map has a trivial kernel the cascade is vacuous - the
    positive result - and the report says so.  Otherwise the cascade verifies
    per cluster that the chain vectors vanish on omega, that the descent
    identities hold in the whole domain, and reports any level where discrete
    unique continuation fails (vector ~0 on omega yet not in Omega).
    """
    mat = as_matrix(A).astype(complex)
    n = mat.shape[0]
    omega = np.asarray(omega_indices, dtype=int)
    sigma_min = None
    if a is None:
        if z_samples is None:
            z_samples = default_shift_samples(mat, 2 * n)
        rep = resolvent_vanishing_check(mat, omega, z_samples)
        sigma_min = rep.sigma_min
        a = rep.kernel_vector()
        if a is None:
            return CascadeReport(
                vacuous=True,
                note=(
                    "no kernel vector exists: stacked resolvent map has "
                    f"sigma_min = {rep.sigma_min:.3g} > 0"
                ),
                kernel_sigma_min=sigma_min,
            )
    a = np.asarray(a, dtype=complex)
    scale = max(float(np.linalg.norm(a)), 1e-300)
    clusters = []
    for lam, P, D, d in zip(
        riesz.eigenvalues, riesz.projections, riesz.nilpotents, riesz.multiplicities
    ):
        d = int(d)
        chain = [P @ a]
        for _ in range(1, d):
            chain.append(D @ chain[-1])
        omega_res = max(float(np.linalg.norm(v[omega])) for v in chain)
        descent = []
        shift = mat - lam * np.eye(n)
        for v in reversed(chain):  # l = d-1 down to 0
            descent.append(float(np.linalg.norm(shift @ v)) if d > 0 else 0.0)
        # descent residual at the top level is ||D^d P a|| ~ 0 by nilpotency;
        # lower levels equal the norm of the next chain vector by construction
        pnorm = float(np.linalg.norm(chain[0]))
        violation = bool(
            pnorm > tol * scale and omega_res <= tol * scale
        )
        clusters.append(
            CascadeClusterReport(
                eigenvalue=complex(lam),
                multiplicity=d,
                projection_norm=pnorm,
                max_omega_residual=omega_res,
                descent_residuals=descent,
                uc_violation=violation,
            )
        )
    return CascadeReport(
        vacuous=False, note="", clusters=clusters, kernel_sigma_min=sigma_min
    )


# ---------------------------------------------------------------------------
# Branch identity probe
# ---------------------------------------------------------------------------


@dataclass
class ProbeVector:
    """Unit test vector supported on the observation subdomain."""

    values: np.ndarray
    omega_indices: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.omega_indices = np.asarray(self.omega_indices, dtype=int)
        mask = np.ones(self.values.shape[0], dtype=bool)
        mask[self.omega_indices] = False
        if np.any(self.values[mask] != 0.0):
            raise ValueError("probe vector has support outside omega")
        nrm = np.linalg.norm(self.values)
        if nrm == 0.0:
            raise ValueError("probe vector is zero")
        self.values = self.values / nrm

    @classmethod
    def canonical(cls, n: int, omega_indices, position: int = 0) -> "ProbeVector":
        v = np.zeros(n)
        v[np.asarray(omega_indices, dtype=int)[position]] = 1.0
        return cls(v, omega_indices)

    @classmethod
    def random(cls, n: int, omega_indices, seed: int = 0) -> "ProbeVector":
        rng = np.random.default_rng(seed)
        v = np.zeros(n)
        idx = np.asarray(omega_indices, dtype=int)
        v[idx] = rng.standard_normal(idx.size)
        return cls(v, omega_indices)


@dataclass
class BranchSample:
    eta: complex
    f_psi: complex
    g_psi: complex
    residual: float


def branch_identity_probe(A, a, b, psi: ProbeVector, alpha: float, eta_samples) -> list[BranchSample]:
    """Tabulate f, g and the residual of  (-eta)^(1/alpha) f(eta) + g(eta) = 0.

    f(eta) = <(A - eta)^(-1) a, psi> and g likewise for b, with the inner
    product over omega (psi is supported there) and the principal branch of
    the fractional power.  For generic nonzero data the identity can hold on
    an eta-continuum only if f and g both vanish, so a residual bounded away
    from zero is the expected, falsifiable outcome.
    """
    mat = as_matrix(A).astype(complex)
    n = mat.shape[0]
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    eig = np.linalg.eigvals(mat)
    scale = max(1.0, float(np.max(np.abs(eig))))
    rows = []
    eye = np.eye(n, dtype=complex)
    for eta in np.atleast_1d(np.asarray(eta_samples, dtype=complex)):
        if np.min(np.abs(eta - eig)) < 1e-8 * scale:
            raise ContourError(f"eta sample {eta:.6g} too close to the spectrum")
        ra = scipy.linalg.solve(mat - eta * eye, a)
        rb = scipy.linalg.solve(mat - eta * eye, b)
        f = complex(np.vdot(psi.values, ra))
        g = complex(np.vdot(psi.values, rb))
        branch = (-eta) ** (1.0 / alpha)
        rows.append(BranchSample(complex(eta), f, g, abs(branch * f + g)))
    return rows


# ---------------------------------------------------------------------------
# Regularized inversion
# ---------------------------------------------------------------------------


@dataclass
class InversionResult:
    a_hat: np.ndarray
    b_hat: np.ndarray
    residual: float
    effective_condition: float
    params: dict = field(default_factory=dict)


def invert_source(
    A,
    alpha: float,
    setup: ObservationSetup,
    data: np.ndarray,
    method: str = "tikhonov",
    reg_scale: float = TIKHONOV_SCALE_DEFAULT,
    tsvd_rank: int | None = None,
    observation_map: ObservationMap | None = None,
) -> InversionResult:
    """Recover (a, b) from observed samples by regularized least squares.

    Tikhonov: x = argmin ||M x - data||^2 + lambda ||x||^2 with
    lambda = reg_scale * sigma_1^2, solved through the stored SVD.
    Truncated SVD: pseudo-inverse keeping ``tsvd_rank`` modes.  No automatic
    parameter selection: fixed, logged values keep experiments deterministic.
    """
    obsmap = observation_map or build_observation_map(A, alpha, setup)
    data = np.asarray(data, dtype=float).reshape(-1)
    if data.shape[0] != obsmap.shape[0]:
        raise ValueError(
            f"data length {data.shape[0]} does not match map rows {obsmap.shape[0]}"
        )
    s = obsmap.singular_values
    if s[0] == 0.0:
        raise NumericsError("observation map is identically zero")
    coeffs = obsmap.svd_u.T @ data
    if method == "tikhonov":
        lam = reg_scale * s[0] ** 2
        filt = s / (s**2 + lam)
        cond_eff = float(s[0] * np.max(filt))
        params = {"method": "tikhonov", "lambda_reg": lam, "reg_scale": reg_scale}
    elif method == "tsvd":
        k = tsvd_rank if tsvd_rank is not None else int(np.sum(s > 1e-10 * s[0]))
        k = max(1, min(k, s.size))
        filt = np.zeros_like(s)
        filt[:k] = 1.0 / s[:k]
        cond_eff = float(s[0] / s[k - 1])
        params = {"method": "tsvd", "rank": k}
    else:
        raise ValueError(f"unknown regularization method {method!r}")
    x = obsmap.svd_vt.T @ (filt * coeffs)
    n = obsmap.n_dof
    resid = float(np.linalg.norm(obsmap.matrix @ x - data))
    return InversionResult(
        a_hat=x[:n].copy(),
        b_hat=x[n:].copy(),
        residual=resid,
        effective_condition=cond_eff,
        params=params,
    )


def synthesize_observations(
    obsmap: ObservationMap,
    source: SourcePair,
    noise: float = 0.0,
    seed: int | None = None,
) -> np.ndarray:
    """Forward data M (a, b) plus additive Gaussian noise.

    The noise level is relative to the max-norm of the clean data; nonzero
    noise demands an explicit seed so experiments stay reproducible.
    """
    x = np.concatenate([source.a, source.b])
    data = obsmap.matrix @ x
    if noise > 0.0:
        if seed is None:
            raise ValueError("nonzero noise requires an explicit seed")
        rng = np.random.default_rng(seed)
        data = data + noise * np.max(np.abs(data)) * rng.standard_normal(data.shape)
    return data


def write_singular_values_csv(obsmap: ObservationMap, csv_path, manifest_path=None) -> None:
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "sigma"])
        for i, sv in enumerate(obsmap.singular_values):
            writer.writerow([i, f"{sv:.17g}"])
    if manifest_path is not None:
        manifest = {
            "rows": int(obsmap.shape[0]),
            "cols": int(obsmap.shape[1]),
            "n_dof": int(obsmap.n_dof),
            "omega_size": int(obsmap.setup.omega_indices.size),
            "n_times": int(obsmap.setup.sample_times.size),
            **obsmap.params,
        }
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def write_recovery_csv(source_true: SourcePair, result: InversionResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "a_true", "a_hat", "b_true", "b_hat"])
        for i in range(source_true.size):
            writer.writerow(
                [
                    i,
                    f"{source_true.a[i]:.17g}",
                    f"{result.a_hat[i]:.17g}",
                    f"{source_true.b[i]:.17g}",
                    f"{result.b_hat[i]:.17g}",
                ]
            )
