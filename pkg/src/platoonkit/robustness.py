"""Closed-form robustness metrics and their frequency-sweep cross-checks.

Everything here is a pure function of the grounded spectrum and the graph
statistics: worst-case disturbance gains for the velocity-tracking and
formation dynamics, stability margins, delay margins (exact for the
first-order dynamics, sufficient bounds for the second-order ones), the
reference-count threshold for a non-expansive velocity gain, and the
gamma-threshold predicates on the beta statistics.

Unbounded gains are represented as ``math.inf`` in memory and serialized as
the explicit string marker ``"unbounded"`` in JSON reports.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .spectral import (
    BoundCertificate,
    Spectrum,
    certify_lambda_max,
    certify_lambda_min,
    eig_sym,
    map_formation_spectrum,
    spectral_radius_formation,
)
from .topology import GroundedSystem, PlatoonTopology, ReferenceSet, ground

#: eigenvalues at or below this are treated as an ungrounded (singular) system
GROUNDING_TOL = 1e-12

#: JSON marker for unbounded gains / vacuous upper bounds
UNBOUNDED = "unbounded"


def hinf_velocity(spec: Spectrum) -> float:
    """Worst-case disturbance-to-velocity-error gain: exactly 1 / lambda_1.

    Returns math.inf when lambda_1 <= 1e-12 (no grounding, unbounded gain).
    """
    lam1 = spec.lambda1
    if lam1 <= GROUNDING_TOL:
        return math.inf
    return 1.0 / lam1


def peak_amplitude(lam: float) -> float:
    """Peak frequency-response magnitude of the scalar mode
    1 / (s^2 + lam*s + lam):

        2 / (lam^{3/2} sqrt(4 - lam))   if lam <= 2   (interior peak)
        1 / lam                          otherwise     (peak at omega = 0)

    Both branches agree at lam = 2 (value 1/2).
    """
    if lam <= 0.0:
        raise ParameterError(f"peak amplitude needs lam > 0, got {lam}")
    if lam <= 2.0:
        return 2.0 / (lam ** 1.5 * math.sqrt(4.0 - lam))
    return 1.0 / lam


def hinf_formation(spec: Spectrum) -> float:
    """Worst-case disturbance-to-position-error gain of the formation
    dynamics: the max of peak_amplitude over *all* grounded eigenvalues.

    Taking the max over every eigenvalue (rather than assuming the smallest
    dominates) keeps the value correct even when the spectrum straddles the
    lam = 2 branch point.
    """
    vals = np.asarray(spec.values, dtype=float)
    if vals.size == 0 or vals.min() <= GROUNDING_TOL:
        raise ParameterError("formation gain needs a strictly positive spectrum")
    return max(peak_amplitude(float(lam)) for lam in vals)


# ---------------------------------------------------------------------------
# Frequency sweep (independent of the closed forms above)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyGrid:
    """Logarithmic frequency grid in rad/s.

    The default (4000 points over [1e-4, 1e3]) is augmented inside the sweep
    with the analytic stationary frequencies so the sampled peak touches the
    true peak: omega = 0 for the velocity dynamics, omega^2 = lam(1 - lam/2)
    for every formation eigenvalue lam <= 2.
    """

    lo: float = 1e-4
    hi: float = 1e3
    points: int = 4000

    def base(self) -> np.ndarray:
        if self.points < 1 or self.lo <= 0 or self.hi <= self.lo:
            raise ParameterError(
                f"bad frequency grid: lo={self.lo}, hi={self.hi}, points={self.points}"
            )
        return np.logspace(math.log10(self.lo), math.log10(self.hi), self.points)


@dataclass(frozen=True)
class FrequencyResponse:
    """Sampled largest singular value of the disturbance transfer matrix."""

    omegas: np.ndarray
    gains: np.ndarray
    peak_omega: float
    peak_gain: float

    def to_csv(self) -> str:
        lines = ["omega,gain"]
        lines += [f"{w:.12g},{g:.12g}" for w, g in zip(self.omegas, self.gains)]
        return "\n".join(lines) + "\n"


def sweep_hinf(
    gs: GroundedSystem,
    dynamics: str,
    grid: FrequencyGrid | None = None,
    spec: Spectrum | None = None,
) -> FrequencyResponse:
    """Sweep the largest singular value of the disturbance transfer matrix.

    Because lg is symmetric, both transfer matrices diagonalize in its
    eigenbasis, so the largest singular value at each frequency reduces to a
    max over scalar modes:

        velocity:   max_i 1 / |j*omega + lam_i|
        formation:  max_i 1 / |-omega^2 + lam_i * (1 + j*omega)|

    Args:
        gs: grounded system (lambda_1 must be > 0).
        dynamics: "velocity" or "formation".
        grid: base frequency grid; defaults to FrequencyGrid().
        spec: optionally a precomputed spectrum of gs.lg.

    Returns:
        FrequencyResponse over the augmented, ascending grid.
    """
    if dynamics not in ("velocity", "formation"):
        raise ParameterError(f"dynamics must be velocity|formation, got {dynamics!r}")
    if spec is None:
        spec = eig_sym(gs.lg)
    lams = np.asarray(spec.values, dtype=float)
    if lams.min() <= GROUNDING_TOL:
        raise ParameterError("sweep needs a grounded system (lambda_1 > 0)")
    grid = grid or FrequencyGrid()
    omegas = grid.base()
    if dynamics == "velocity":
        extra = [0.0]
    else:
        low = lams[lams <= 2.0]
        extra = list(np.sqrt(low * (1.0 - low / 2.0)))
    omegas = np.unique(np.concatenate([omegas, np.asarray(extra, dtype=float)]))
    if omegas.size == 0:
        raise ParameterError("empty frequency grid")

    w = omegas[:, None]
    lam = lams[None, :]
    if dynamics == "velocity":
        denom = np.abs(1j * w + lam)
    else:
        denom = np.abs(-(w ** 2) + lam * (1.0 + 1j * w))
    gains = (1.0 / denom).max(axis=1)
    ipeak = int(np.argmax(gains))
    return FrequencyResponse(
        omegas=omegas,
        gains=gains,
        peak_omega=float(omegas[ipeak]),
        peak_gain=float(gains[ipeak]),
    )


# ---------------------------------------------------------------------------
# Threshold predicates and margins
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaConditions:
    """Literal floor/ceiling predicates for a gain threshold gamma.

    necessary_ok:  max beta > floor(1/gamma)  (necessary for gain < gamma)
    sufficient_ok: min beta > ceil(1/gamma)   (sufficient for gain < gamma)

    boundary_case flags gammas with 1/gamma integral, where the strict
    ceiling reading is conservative: min beta >= 1/gamma already suffices for
    gain <= gamma at such thresholds.
    """

    gamma: float
    necessary_ok: bool
    sufficient_ok: bool
    boundary_case: bool


def gamma_conditions(gs: GroundedSystem, gamma: float) -> GammaConditions:
    if gamma <= 0.0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    inv = 1.0 / gamma
    boundary = abs(inv - round(inv)) < 1e-12
    return GammaConditions(
        gamma=gamma,
        necessary_ok=bool(gs.betas.max() > math.floor(inv)),
        sufficient_ok=bool(gs.betas.min() > math.ceil(inv)),
        boundary_case=boundary,
    )


def min_refs_nonexpansive(n: int, k: int) -> int:
    """Fewest references for which some arrangement achieves a velocity gain
    of at most one: ceil(n / (2k + 1)); fewer references make it impossible."""
    if n < 1 or k < 1:
        raise ParameterError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    return math.ceil(n / (2 * k + 1))


def delay_margin_velocity(spec: Spectrum) -> float:
    """Exact critical constant delay of the fully delayed velocity dynamics:
    pi / (2 lambda_max).  Stability holds iff tau is strictly below it."""
    lam = spec.lambda_max
    if lam <= GROUNDING_TOL:
        raise ParameterError("delay margin needs lambda_max > 0")
    return math.pi / (2.0 * lam)


def delay_bounds_k(k: int) -> tuple:
    """Connectivity-only delay brackets for the velocity dynamics:
    stable if tau <= pi/(8k), unstable if tau > pi/(2k)."""
    if k < 1:
        raise ParameterError(f"need k >= 1, got {k}")
    return math.pi / (8.0 * k), math.pi / (2.0 * k)


@dataclass(frozen=True)
class FormationDelayMargin:
    """Two sufficient delay bounds for the formation dynamics: the spectral
    one 1/rho(B) and the looser degree-based 1/(4k)."""

    rho_bound: float
    k_bound: float


def delay_margin_formation(spec: Spectrum, k: int) -> FormationDelayMargin:
    if k < 1:
        raise ParameterError(f"need k >= 1, got {k}")
    rho = spectral_radius_formation(map_formation_spectrum(spec))
    return FormationDelayMargin(rho_bound=1.0 / rho, k_bound=1.0 / (4.0 * k))


# ---------------------------------------------------------------------------
# Aggregate report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RobustnessReport:
    """All robustness quantities of one grounded platoon, with provenance."""

    n: int
    k: int
    refs: tuple
    lambda1: float
    lambda_max: float
    hinf_velocity: float
    hinf_formation: float
    margin_velocity: float
    # lambda1/2 lower-bounds the formation margin whenever lambda1 <= 2
    # (always true under minimally dense arrangements); margin_formation is
    # the exact min |Re| over the mapped second-order spectrum
    margin_formation_lb: float
    margin_formation: float
    delay_velocity_max: float
    delay_formation_sufficient: float
    delay_formation_k_sufficient: float
    delay_k_sufficient: float
    delay_k_necessary: float
    min_refs_nonexpansive: int
    beta_min: int
    beta_max: int
    boundary_size: int
    dmax_f: int
    hinf_velocity_lower: float
    hinf_velocity_upper: float  # math.inf when min beta = 0
    lg_spectrum: tuple
    lambda_min_certificate: BoundCertificate
    lambda_max_certificate: BoundCertificate
    gamma: GammaConditions | None = None
    swept: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        def enc(x):
            return UNBOUNDED if isinstance(x, float) and math.isinf(x) else x

        out = {
            "n": self.n,
            "k": self.k,
            "refs": list(self.refs),
            "followers_count": self.n - len(self.refs),
            "lambda1": self.lambda1,
            "lambda_max": self.lambda_max,
            "hinf_velocity": enc(self.hinf_velocity),
            "hinf_formation": self.hinf_formation,
            "margin_velocity": self.margin_velocity,
            "margin_formation_lb": self.margin_formation_lb,
            "margin_formation": self.margin_formation,
            "delay_velocity_max": self.delay_velocity_max,
            "delay_formation_sufficient": self.delay_formation_sufficient,
            "delay_formation_k_sufficient": self.delay_formation_k_sufficient,
            "delay_k_sufficient": self.delay_k_sufficient,
            "delay_k_necessary": self.delay_k_necessary,
            "min_refs_nonexpansive": self.min_refs_nonexpansive,
            "beta_min": self.beta_min,
            "beta_max": self.beta_max,
            "boundary_size": self.boundary_size,
            "dmax_f": self.dmax_f,
            "hinf_velocity_lower": self.hinf_velocity_lower,
            "hinf_velocity_upper": enc(self.hinf_velocity_upper),
            "lg_spectrum": list(self.lg_spectrum),
            "certificates": {
                "lambda_min": self.lambda_min_certificate.as_dict(),
                "lambda_max": self.lambda_max_certificate.as_dict(),
            },
        }
        if self.gamma is not None:
            out["gamma"] = {
                "gamma": self.gamma.gamma,
                "necessary_ok": self.gamma.necessary_ok,
                "sufficient_ok": self.gamma.sufficient_ok,
                "boundary_case": self.gamma.boundary_case,
            }
        if self.swept:
            out["swept"] = dict(self.swept)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"


def build_report(
    topology: PlatoonTopology,
    refset: ReferenceSet,
    gs: GroundedSystem | None = None,
    spec: Spectrum | None = None,
    gamma: float | None = None,
    with_sweep: bool = False,
) -> RobustnessReport:
    """Compute every robustness quantity for one platoon + reference set."""
    if gs is None:
        gs = ground(topology, refset)
    if spec is None:
        spec = eig_sym(gs.lg)
    lam1, lam_max = spec.lambda1, spec.lambda_max
    beta_min = int(gs.betas.min())
    beta_max = int(gs.betas.max())
    mapped = map_formation_spectrum(spec)
    fdm = delay_margin_formation(spec, topology.k)
    ksuff, kness = delay_bounds_k(topology.k)
    swept = {}
    if with_sweep:
        for dyn in ("velocity", "formation"):
            fr = sweep_hinf(gs, dyn, spec=spec)
            swept[f"{dyn}_peak"] = fr.peak_gain
            swept[f"{dyn}_peak_omega"] = fr.peak_omega
    return RobustnessReport(
        n=topology.n,
        k=topology.k,
        refs=refset.refs,
        lambda1=lam1,
        lambda_max=lam_max,
        hinf_velocity=hinf_velocity(spec),
        hinf_formation=hinf_formation(spec),
        margin_velocity=lam1,
        margin_formation_lb=lam1 / 2.0,
        margin_formation=float(np.min(np.abs(mapped.values.real))),
        delay_velocity_max=delay_margin_velocity(spec),
        delay_formation_sufficient=fdm.rho_bound,
        delay_formation_k_sufficient=fdm.k_bound,
        delay_k_sufficient=ksuff,
        delay_k_necessary=kness,
        min_refs_nonexpansive=min_refs_nonexpansive(topology.n, topology.k),
        beta_min=beta_min,
        beta_max=beta_max,
        boundary_size=gs.boundary_size,
        dmax_f=gs.dmax_f,
        hinf_velocity_lower=gs.n_followers / gs.boundary_size,
        hinf_velocity_upper=(1.0 / beta_min) if beta_min > 0 else math.inf,
        lg_spectrum=tuple(float(v) for v in spec.values),
        lambda_min_certificate=certify_lambda_min(gs, spec),
        lambda_max_certificate=certify_lambda_max(gs, spec),
        gamma=(gamma_conditions(gs, gamma) if gamma is not None else None),
        swept=swept,
    )
