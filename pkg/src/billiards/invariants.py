"""Length-spectrum invariants assembled from periodic-orbit samples.

The central object is the normalized action function lambda^-3 (beta + ell*omega)
whose odd Taylor coefficients at omega = 0 are conjugacy invariants; the
companion expansion L_q ~ ell_0 + sum ell_k / q^(2k) of maximal q-gon
perimeters carries the same information (ell_0 is the perimeter and
ell_k = -lambda^3 c_{2k+1}).  Both are recovered here by weighted least
squares over sampled rotation numbers, together with the Lazutkin
parameter and the Legendre-Fenchel dual of beta.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConditioningError, DomainError
from .orbits import find_orbit
from .tables import Table

__all__ = [
    "BetaSamples",
    "InvariantReport",
    "RatioRow",
    "sample_beta",
    "fit_normalized_beta",
    "mm_fit_from_samples",
    "mm_invariants",
    "mm_ratio_check",
    "lazutkin_parameter",
    "mather_alpha",
]

DEFAULT_Q_RANGE = (10, 120)
DEFAULT_WEIGHT_POWER = 4
DEFAULT_OMEGA_MAX = 0.1
COND_LIMIT = 1e12


@dataclass(frozen=True)
class BetaSamples:
    """Sampled values of Mather's beta with the table constants needed to
    normalize them."""

    p: np.ndarray
    q: np.ndarray
    omega: np.ndarray
    beta: np.ndarray
    ell: float
    lazutkin: float

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=float)
        if om.size == 0:
            raise DomainError("BetaSamples needs at least one sample")
        if np.any(om <= 0.0) or np.any(om > 0.5):
            raise DomainError("rotation numbers must lie in (0, 1/2]")
        if np.unique(om).size != om.size:
            raise DomainError("rotation numbers must be distinct")
        if np.any(np.asarray(self.beta) >= 0.0):
            raise DomainError("beta samples must be negative")

    @property
    def lengths(self) -> np.ndarray:
        """Orbit perimeters L = -q * beta (p = 1 samples only)."""
        return -np.asarray(self.q, dtype=float) * np.asarray(self.beta)


def _beta_job(args):
    table, p, q = args
    return q, find_orbit(table, p, q, "max").beta


def sample_beta(table: Table, q_min: int = DEFAULT_Q_RANGE[0],
                q_max: int = DEFAULT_Q_RANGE[1], p: int = 1,
                workers: int = 1) -> BetaSamples:
    """Compute beta(p/q) over an integer q range (coprime q, p/q <= 1/2)."""
    qs = [q for q in range(q_min, q_max + 1) if math.gcd(p, q) == 1 and q >= 2 * p]
    jobs = [(table, p, q) for q in qs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(_beta_job, jobs, chunksize=4))
    else:
        pairs = [_beta_job(j) for j in jobs]
    pairs.sort(key=lambda qb: qb[0])
    q_arr = np.array([qb[0] for qb in pairs], dtype=int)
    b_arr = np.array([qb[1] for qb in pairs])
    return BetaSamples(
        p=np.full_like(q_arr, p),
        q=q_arr,
        omega=p / q_arr.astype(float),
        beta=b_arr,
        ell=table.perimeter,
        lazutkin=table.lazutkin_perimeter,
    )


@dataclass
class InvariantReport:
    """Fitted invariants of one table.

    beta_coeffs holds c_3, c_5, ..., c_{2K+1} of the normalized action
    expansion; mm_ell holds ell_0 ... ell_K of the max-perimeter expansion
    when the direct fit was run.  Guard coefficients absorb the first
    truncated order and are reported but not part of the invariant set.
    """

    K: int
    ell: float
    lazutkin: float
    beta_coeffs: np.ndarray
    beta_guard: float
    beta_resid_rms: float
    beta_resid_max: float
    beta_cond: float
    beta_cov: np.ndarray | None = None
    mm_ell: np.ndarray | None = None
    mm_guard: float | None = None
    mm_resid_rms: float | None = None
    mm_resid_max: float | None = None
    mm_cond: float | None = None
    consistency: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def derived_ell(self) -> np.ndarray:
        """MM coefficients implied by the beta fit: ell_0 = perimeter and
        ell_k = -lambda^3 c_{2k+1}."""
        lam3 = self.lazutkin**3
        return np.concatenate([[self.ell], -lam3 * self.beta_coeffs])

    def to_dict(self) -> dict:
        def arr(x):
            return None if x is None else [float(v) for v in np.atleast_1d(x)]

        return {
            "K": self.K,
            "perimeter": self.ell,
            "lazutkin_perimeter": self.lazutkin,
            "beta_coeffs": arr(self.beta_coeffs),
            "beta_guard": self.beta_guard,
            "beta_resid_rms": self.beta_resid_rms,
            "beta_resid_max": self.beta_resid_max,
            "beta_cond": self.beta_cond,
            "beta_cov": None if self.beta_cov is None else [arr(r) for r in self.beta_cov],
            "mm_ell": arr(self.mm_ell),
            "mm_guard": self.mm_guard,
            "mm_resid_rms": self.mm_resid_rms,
            "mm_resid_max": self.mm_resid_max,
            "mm_cond": self.mm_cond,
            "derived_ell": arr(self.derived_ell),
            "consistency": arr(self.consistency),
            "provenance": self.provenance,
        }


def _wls(design: np.ndarray, y: np.ndarray, row_w: np.ndarray, extended: bool):
    """Column-normalized weighted least squares; returns (coeffs, resid, cond, cov)."""
    A = design * row_w[:, None]
    b = y * row_w
    col = np.linalg.norm(A, axis=0)
    if np.any(col == 0.0):
        raise ConditioningError("degenerate design column; widen the sample range")
    An = A / col[None, :]
    if extended:
        # Normal equations accumulated in extended precision, solved by a
        # hand-rolled Cholesky (LAPACK has no long-double path).
        G = (An.astype(np.longdouble).T @ An.astype(np.longdouble))
        rhs = An.astype(np.longdouble).T @ b.astype(np.longdouble)
        n = G.shape[0]
        L = np.zeros_like(G)
        for i in range(n):
            for j in range(i + 1):
                acc = G[i, j] - np.dot(L[i, :j], L[j, :j])
                if i == j:
                    if acc <= 0:
                        raise ConditioningError(
                            "normal equations not positive definite; reduce K "
                            "or narrow the omega range"
                        )
                    L[i, i] = np.sqrt(acc)
                else:
                    L[i, j] = acc / L[j, j]
        z = np.zeros(n, dtype=np.longdouble)
        for i in range(n):
            z[i] = (rhs[i] - np.dot(L[i, :i], z[:i])) / L[i, i]
        c = np.zeros(n, dtype=np.longdouble)
        for i in reversed(range(n)):
            c[i] = (z[i] - np.dot(L[i + 1:, i], c[i + 1:])) / L[i, i]
        coeffs = np.asarray(c, dtype=float) / col
        sv = np.linalg.svd(An, compute_uv=False)
        cond = float(sv[0] / sv[-1])
    else:
        coeffs_n, _, _, sv = np.linalg.lstsq(An, b, rcond=None)
        cond = float(sv[0] / sv[-1])
        coeffs = coeffs_n / col
    if not math.isfinite(cond) or cond > COND_LIMIT:
        raise ConditioningError(
            f"design condition number {cond:.2e} exceeds {COND_LIMIT:.0e}; "
            "narrow the omega range or reduce K"
        )
    resid = design @ coeffs - y
    wres = resid * row_w
    dof = max(1, len(y) - design.shape[1])
    sigma2 = float(np.dot(wres, wres)) / dof
    gram_inv = np.linalg.inv((An.T @ An))
    cov = sigma2 * (gram_inv / np.outer(col, col))
    return coeffs, resid, cond, cov


def fit_normalized_beta(samples: BetaSamples, K: int = 3, *,
                        extended: bool = False,
                        omega_max: float = DEFAULT_OMEGA_MAX,
                        weight_power: float = DEFAULT_WEIGHT_POWER) -> InvariantReport:
    """Fit the odd expansion of the normalized action function.

    Regresses lambda^-3 (beta + ell*omega) on omega^3, ..., omega^(2K+3)
    (one guard order past K) using samples with omega <= omega_max and
    weights q^weight_power.  K > 3 needs extended=True, which accumulates
    the normal equations in extended precision.
    """
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")
    if K > 3 and not extended:
        raise DomainError("K > 3 requires extended=True (extended-precision fit)")
    om = np.asarray(samples.omega, dtype=float)
    keep = om <= omega_max
    if int(np.count_nonzero(keep)) < 2 * K + 2:
        raise DomainError(
            f"need at least {2 * K + 2} samples with omega <= {omega_max}, "
            f"have {int(np.count_nonzero(keep))}"
        )
    om = om[keep]
    beta = np.asarray(samples.beta)[keep]
    qv = np.asarray(samples.q, dtype=float)[keep]
    lam3 = samples.lazutkin**3
    y = (beta + samples.ell * om) / lam3
    powers = np.arange(1, K + 2)
    design = om[:, None] ** (2 * powers[None, :] + 1)
    row_w = qv**weight_power
    coeffs, resid, cond, cov = _wls(design, y, row_w, extended)
    return InvariantReport(
        K=K,
        ell=samples.ell,
        lazutkin=samples.lazutkin,
        beta_coeffs=coeffs[:K],
        beta_guard=float(coeffs[K]),
        beta_resid_rms=float(np.sqrt(np.mean(resid**2))),
        beta_resid_max=float(np.max(np.abs(resid))),
        beta_cond=cond,
        beta_cov=cov[:K, :K],
        provenance={
            "q_min": int(qv.min()),
            "q_max": int(qv.max()),
            "n_samples": int(len(om)),
            "omega_max": omega_max,
            "weight_power": weight_power,
        },
    )


def mm_fit_from_samples(samples: BetaSamples, K: int = 3, *,
                        extended: bool = False,
                        weight_power: float = DEFAULT_WEIGHT_POWER) -> InvariantReport:
    """Fit L_q against 1, q^-2, ..., q^-2(K+1) and cross-check against the
    normalized-beta fit of the same samples."""
    report = fit_normalized_beta(samples, K, extended=extended)
    qv = np.asarray(samples.q, dtype=float)
    lengths = samples.lengths
    powers = np.arange(0, K + 2)
    design = qv[:, None] ** (-2.0 * powers[None, :])
    row_w = qv**weight_power
    coeffs, resid, cond, _ = _wls(design, lengths, row_w, extended)
    report.mm_ell = coeffs[: K + 1]
    report.mm_guard = float(coeffs[K + 1])
    report.mm_resid_rms = float(np.sqrt(np.mean(resid**2)))
    report.mm_resid_max = float(np.max(np.abs(resid)))
    report.mm_cond = cond
    # ell_k from the direct fit vs -lambda^3 c_{2k+1} from the beta fit
    report.consistency = np.abs(report.mm_ell - report.derived_ell[: K + 1])
    return report


def mm_invariants(table: Table, q_range: tuple[int, int] = DEFAULT_Q_RANGE,
                  K: int = 3, *, extended: bool = False,
                  workers: int = 1) -> InvariantReport:
    """Marvizi-Melrose coefficients from maximal q-gon perimeters."""
    q_min, q_max = q_range
    if q_min < 5:
        raise DomainError(f"q_min must be >= 5, got {q_min}")
    if q_max - q_min + 1 < 2 * K + 2:
        raise DomainError(f"q range must span at least {2 * K + 2} values")
    samples = sample_beta(table, q_min, q_max, p=1, workers=workers)
    return mm_fit_from_samples(samples, K, extended=extended)


@dataclass(frozen=True)
class RatioRow:
    n: int
    measured: float
    predicted: float
    deviation: float


def mm_ratio_check(report1: InvariantReport, report2: InvariantReport) -> list[RatioRow]:
    """Ratios of the dimensionally dressed invariants of two tables.

    The n-th invariant is represented as c_{2n+1} * lambda^(3-2n) (for
    n = 1 this is c_3 * lambda; the raw fitted ell_k sit in the reports).
    Smooth conjugacy predicts the ratio (lambda_2 / lambda_1)^(2n-3).
    """
    if report1.K != report2.K:
        raise DomainError("ratio check requires reports fitted with the same K")
    rows = []
    lam1, lam2 = report1.lazutkin, report2.lazutkin
    for n in range(1, report1.K + 1):
        c1 = float(report1.beta_coeffs[n - 1])
        c2 = float(report2.beta_coeffs[n - 1])
        measured = (c1 * lam1 ** (3 - 2 * n)) / (c2 * lam2 ** (3 - 2 * n))
        predicted = (lam2 / lam1) ** (2 * n - 3)
        rows.append(RatioRow(n, measured, predicted, abs(measured / predicted - 1.0)))
    return rows


def _beta_model(report: InvariantReport, omega: float) -> float:
    lam3 = report.lazutkin**3
    acc = 0.0
    for k, c in enumerate(report.beta_coeffs, start=1):
        acc += float(c) * omega ** (2 * k + 1)
    acc += report.beta_guard * omega ** (2 * report.K + 3)
    return -report.ell * omega + lam3 * acc


def _beta_model_deriv(report: InvariantReport, omega: float) -> float:
    lam3 = report.lazutkin**3
    acc = 0.0
    for k, c in enumerate(report.beta_coeffs, start=1):
        acc += (2 * k + 1) * float(c) * omega ** (2 * k)
    acc += (2 * report.K + 3) * report.beta_guard * omega ** (2 * report.K + 2)
    return -report.ell + lam3 * acc


def lazutkin_parameter(samples: BetaSamples, omega: float, *,
                       report: InvariantReport | None = None) -> float:
    """Lazutkin parameter omega*beta'(omega) - beta(omega) of the convex
    caustic with rotation number omega, from the fitted expansion."""
    om = np.asarray(samples.omega, dtype=float)
    if not (om.min() <= omega <= om.max()):
        raise DomainError(
            f"omega={omega} outside the sampled range [{om.min()}, {om.max()}]"
        )
    if report is None:
        report = fit_normalized_beta(samples)
    return omega * _beta_model_deriv(report, omega) - _beta_model(report, omega)


def _alpha_discrete(samples: BetaSamples, c: float) -> tuple[float, float]:
    om = np.asarray(samples.omega, dtype=float)
    beta = np.asarray(samples.beta, dtype=float)
    vals = om * c - beta
    i = int(np.argmax(vals))
    return float(vals[i]), float(om[i])


def mather_alpha(samples: BetaSamples, c: float) -> float:
    """Discrete Legendre-Fenchel transform sup_omega (omega*c - beta(omega))
    over the sampled rotation numbers."""
    om = np.asarray(samples.omega, dtype=float)
    beta = np.asarray(samples.beta, dtype=float)
    order = np.argsort(om)
    om, beta = om[order], beta[order]
    slopes = np.diff(beta) / np.diff(om)
    tol = 1e-9 * (1.0 + abs(c))
    if c < slopes.min() - tol or c > slopes.max() + tol:
        raise DomainError(
            f"c={c} outside the sampled slope range [{slopes.min()}, {slopes.max()}]"
        )
    return _alpha_discrete(samples, c)[0]
