"""Eigenvalue counting and the interior-observation uniqueness regions.

N_I(s) counts sequence members <= s.  The observation point x0 splits the
spectrum into the set where the eigenfunction trace e_n(x0) is (relatively)
nonzero and its complement; the complement embeds into the split Dirichlet
spectra of the two subintervals, which bounds the counting function of the
retained set from below:

    N(s) >= (1 - min(1 - x0, x0)) sqrt(s) / pi     for large s.

A sufficient density criterion (liminf N(s) s^{-1/2} > A/pi, admissible
tail length d <= A/2) and the two uniqueness-region conditions

    case i:   0 < d <= x0 <= 1
    case ii:  0 <= x0 < min(d, 1 - 2d),  0 < d < 1/2
    conditional: 1 - 2d < x0 < d, 1/3 < d < 1/2, with a certificate
                 (A >= 2d together with a lower bound B on the counting
                 excess; the classifier enforces B >= 1/2 - d, the variant
                 B >= -1/4 - d appearing in the statement is recorded in the
                 verdict note)

are evaluated as pure set arithmetic on (d, x0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .sl_core import EigenSystem, PotentialSpec, RobinPair, eval_modes_at, split_spectra

_LABELS = ("full-spectrum", "lambda-set", "lambda-complement", "mu-minus", "mu-plus")


@dataclass(frozen=True)
class CountedSet:
    """Increasing nonnegative sequence with a provenance label."""

    values: np.ndarray
    label: str = "full-spectrum"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.size and (np.any(~np.isfinite(vals)) or np.any(vals < 0)
                          or np.any(np.diff(vals) <= 0)):
            raise DomainError("values must be finite, nonnegative, strictly increasing")
        if self.label not in _LABELS:
            raise DomainError(f"unknown label {self.label!r}")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return int(self.values.size)


@dataclass(frozen=True)
class RegionVerdict:
    d: float
    x0: float
    verdict: str  # theorem1-case-i | theorem1-case-ii | theorem2-conditional | unknown
    condition_note: str = ""


@dataclass
class LambdaSplit:
    """Observation-point split of a computed spectrum, with audit traces."""

    lambda_set: CountedSet
    complement: CountedSet
    traces: np.ndarray                 # |e_n(x0)| per mode
    relative_traces: np.ndarray        # |e_n(x0)| / max_x |e_n|
    tau: float
    near_threshold: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.lambda_set, self.complement))


@dataclass
class InclusionReport:
    """Distance of each complement eigenvalue to the split spectra."""

    entries: list
    tolerance: float
    violations: list
    passed: bool


@dataclass
class BoundCheckReport:
    s_values: np.ndarray
    counts: np.ndarray
    bounds: np.ndarray
    passed: bool


@dataclass
class DensityReport:
    liminf_estimate: float
    threshold: float
    passed: bool
    implied_d_max: float


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def counting(counted: CountedSet, s: float) -> int:
    """N(s) = number of members <= s (nondecreasing step function of s)."""
    return int(np.searchsorted(counted.values, s, side="right"))


def lambda_set(es: EigenSystem, x0: float, tau: float = 1e-6) -> LambdaSplit:
    """Split modes by the relative size of e_n(x0).

    Mode n is retained iff |e_n(x0)| > tau * max_x |e_n(x)|; traces are
    evaluated by re-propagation (no interpolation error at off-grid x0).
    Modes within a decade of the threshold are flagged for audit.
    """
    if not (0.0 <= x0 <= 1.0):
        raise DomainError("x0 must lie in [0, 1]")
    if tau <= 0:
        raise DomainError("tau must be positive")
    traces, _ = eval_modes_at(es, x0)
    traces = np.abs(traces)
    scale = np.abs(es.efuncs).max(axis=1)
    rel = traces / scale
    keep = rel > tau
    near = [int(n) for n in np.flatnonzero((rel > tau / 10) & (rel < tau * 10))]
    lam_in = CountedSet(es.lambdas[keep], "lambda-set")
    lam_out = CountedSet(es.lambdas[~keep], "lambda-complement")
    return LambdaSplit(lambda_set=lam_in, complement=lam_out, traces=traces,
                       relative_traces=rel, tau=tau, near_threshold=near)


def complement_inclusion_check(es: EigenSystem, x0: float, robin: RobinPair,
                               q: PotentialSpec, tau: float = 1e-6,
                               match_tol: float = 1e-6) -> InclusionReport:
    """Verify that complement eigenvalues appear in both split spectra.

    Each lambda in the complement must lie within match_tol * (1 + lambda) of
    a member of the left (Robin-Dirichlet) and right (Dirichlet-Robin)
    spectra at x0.
    """
    split = lambda_set(es, x0, tau)
    comp = split.complement.values
    entries, violations = [], []
    if comp.size:
        mu_minus, mu_plus = split_spectra(q, x0, robin, es.n_max,
                                          grid_size=es.grid_size,
                                          allow_inadmissible=True)
        for lam in comp:
            d_minus = float(np.min(np.abs(mu_minus - lam)))
            d_plus = float(np.min(np.abs(mu_plus - lam)))
            entries.append((float(lam), d_minus, d_plus))
            if max(d_minus, d_plus) > match_tol * (1.0 + lam):
                violations.append(float(lam))
    return InclusionReport(entries=entries, tolerance=match_tol,
                           violations=violations, passed=not violations)


def _validate_s_grid(s_grid) -> np.ndarray:
    s = np.asarray(s_grid, dtype=float)
    if s.ndim != 1 or s.size < 4 or np.any(np.diff(s) <= 0) or s[0] <= 0:
        raise DomainError("s_grid must be positive increasing with >= 4 points")
    return s


def counting_bound_check(lam: CountedSet, x0: float, s_grid) -> BoundCheckReport:
    """Check N(s) >= (1 - min(1 - x0, x0)) sqrt(s)/pi on the upper half of s_grid."""
    s = _validate_s_grid(s_grid)
    upper = s >= s[s.size // 2]
    s_up = s[upper]
    counts = np.asarray([counting(lam, si) for si in s_up], dtype=float)
    factor = 1.0 - min(1.0 - x0, x0)
    bounds = factor * np.sqrt(s_up) / np.pi
    return BoundCheckReport(s_values=s_up, counts=counts, bounds=bounds,
                            passed=bool(np.all(counts >= bounds)))


def density_criterion(lam: CountedSet, A: float, s_grid) -> DensityReport:
    """Estimate liminf N(s) s^{-1/2} by the minimum over the upper half of s_grid.

    Passes when the estimate exceeds A/pi; a pass admits any known tail
    length d <= A/2.
    """
    if A <= 0:
        raise DomainError("A must be positive")
    s = _validate_s_grid(s_grid)
    upper = s >= s[s.size // 2]
    s_up = s[upper]
    ratios = np.asarray([counting(lam, si) / np.sqrt(si) for si in s_up])
    est = float(ratios.min())
    return DensityReport(liminf_estimate=est, threshold=A / np.pi,
                         passed=est > A / np.pi, implied_d_max=A / 2.0)


def classify_region(d: float, x0: float, certificate=None) -> RegionVerdict:
    """Uniqueness-region verdict for tail length d and observation point x0.

    certificate, when supplied, is a pair (A, B) backing the conditional
    region; exactly one verdict applies to every admissible (d, x0).
    """
    if not (0.0 < d < 1.0):
        raise DomainError("d must lie in (0, 1)")
    if not (0.0 <= x0 <= 1.0):
        raise DomainError("x0 must lie in [0, 1]")
    if d <= x0:
        return RegionVerdict(d, x0, "theorem1-case-i")
    if x0 < min(d, 1.0 - 2.0 * d) and d < 0.5:
        return RegionVerdict(d, x0, "theorem1-case-ii")
    if 1.0 - 2.0 * d < x0 < d and 1.0 / 3.0 < d < 0.5:
        if certificate is not None:
            A, B = certificate
            needed_b = 0.5 - d
            if A >= 2.0 * d and B >= needed_b:
                note = (f"certificate A={A} >= 2d={2 * d:.6g}, "
                        f"B={B} >= 1/2-d={needed_b:.6g} "
                        f"(statement variant would ask B >= -1/4-d={-0.25 - d:.6g})")
                return RegionVerdict(d, x0, "theorem2-conditional", note)
        return RegionVerdict(d, x0, "unknown",
                             "conditional region requires a certificate "
                             "(A >= 2d, B >= 1/2-d)")
    return RegionVerdict(d, x0, "unknown")


def region_map(grid_resolution: int, certificate=None) -> list[RegionVerdict]:
    """Verdicts at cell centers of a grid_resolution^2 lattice over (0,1)^2."""
    if grid_resolution < 10:
        raise DomainError("grid_resolution must be at least 10")
    out = []
    for i in range(grid_resolution):
        d = (i + 0.5) / grid_resolution
        for j in range(grid_resolution):
            x0 = (j + 0.5) / grid_resolution
            out.append(classify_region(d, x0, certificate))
    return out


def region_map_csv(verdicts: list[RegionVerdict]) -> str:
    lines = ["d,x0,verdict"]
    for v in verdicts:
        lines.append(f"{v.d:.12g},{v.x0:.12g},{v.verdict}")
    return "\n".join(lines) + "\n"
