"""Fixed-step time-domain integration of the platoon dynamics with constant
communication delay, plus the stable/unstable classifier and threshold scan.

The integrator is a classic explicit 4th-order one-step scheme with a stored
uniform-step history buffer (method-of-steps flavor).  The requested delay is
rounded to the nearest multiple of the step, so delayed reads at whole-step
stage times land exactly on stored samples; the half-step stage reads the
history through a cubic interpolation of the four nearest stored samples.
Pre-history is the constant initial state: x(t) = x0 for t <= 0.

Three delay modes are supported for the linear dynamics xdot = A x:

    none            xdot(t) = A x(t)
    full            xdot(t) = A x(t - tau)            (every term delayed)
    self-undelayed  xdot(t) = -Dg x(t) + Ag x(t-tau)  (velocity only: own
                    state instantaneous, neighbor states delayed)

Divergence (state norm beyond 1e12 or non-finite) truncates the run and marks
the trajectory rather than raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .topology import GroundedSystem

#: state-norm cutoff beyond which a run is truncated and marked divergent
DIVERGENCE_CUTOFF = 1e12

#: decay_ratio below this, over the trailing window, classifies as stable
STABILITY_THRESHOLD = 0.2

#: fraction of the horizon used as the trailing classification window
TRAILING_WINDOW = 0.25

# cubic Lagrange weights on four consecutive samples:
# centered stencil (nodes -1,0,1,2) evaluated at 1/2
_W_CENTERED = np.array([-1.0, 9.0, 9.0, -1.0]) / 16.0
# backward stencil (nodes -3..0) evaluated at -1/2
_W_BACKWARD = np.array([1.0, -5.0, 15.0, 5.0]) / 16.0


# ---------------------------------------------------------------------------
# Systems, delays, disturbances
# ---------------------------------------------------------------------------

def _check_spacing(delta: dict) -> None:
    # desired spacings must derive from a potential: delta[i,j] = p*_i - p*_j
    pot: dict = {}
    for (i, j), d in delta.items():
        if (j, i) in delta and abs(delta[(j, i)] + d) > 1e-9:
            raise ParameterError(f"spacing not antisymmetric for pair {(i, j)}")
    for (i, j), d in sorted(delta.items()):
        if i in pot and j in pot:
            if abs((pot[i] - pot[j]) - d) > 1e-9:
                raise ParameterError(
                    f"spacing for pair {(i, j)} violates additivity "
                    f"delta_ij = delta_ik + delta_kj"
                )
        elif i in pot:
            pot[j] = pot[i] - d
        elif j in pot:
            pot[i] = pot[j] + d
        else:
            pot[i] = 0.0
            pot[j] = -d


@dataclass(frozen=True)
class SimSystem:
    """A simulatable platoon error system.

    kind "velocity" integrates the |F|-dimensional velocity-error dynamics
    xdot = -ku * lg * x; kind "formation" the 2|F|-dimensional stacked
    (position errors, velocity errors) dynamics.

    u_ref and delta carry display metadata only (the error coordinates
    eliminate the reference velocity and the desired spacings); delta, when
    given as a {(i, j): spacing} dict, is validated for additivity.
    """

    kind: str
    lg: np.ndarray
    l12: np.ndarray | None = None
    u_ref: float = 0.0
    kp: float = 1.0
    ku: float = 1.0
    delta: dict | None = None
    n: int | None = None
    k: int | None = None

    def __post_init__(self):
        if self.kind not in ("velocity", "formation"):
            raise ParameterError(f"kind must be velocity|formation, got {self.kind!r}")
        if self.kp <= 0 or self.ku <= 0:
            raise ParameterError(f"gains must be positive, got kp={self.kp}, ku={self.ku}")
        if self.delta:
            _check_spacing(self.delta)

    @property
    def dim(self) -> int:
        f = self.lg.shape[0]
        return f if self.kind == "velocity" else 2 * f

    def a_matrix(self) -> np.ndarray:
        lg = np.asarray(self.lg, dtype=float)
        if self.kind == "velocity":
            return -self.ku * lg
        f = lg.shape[0]
        b = np.zeros((2 * f, 2 * f))
        b[:f, f:] = np.eye(f)
        b[f:, :f] = -self.kp * lg
        b[f:, f:] = -self.ku * lg
        return b

    def input_matrix(self) -> np.ndarray:
        """Disturbance injection: identity for velocity; into the
        velocity-error derivative rows for formation."""
        f = self.lg.shape[0]
        if self.kind == "velocity":
            return np.eye(f)
        j = np.zeros((2 * f, f))
        j[f:, :] = np.eye(f)
        return j

    def split_degree_adjacency(self) -> tuple:
        """(Dg, Ag) with lg = Dg - Ag; used by the self-undelayed mode."""
        lg = np.asarray(self.lg, dtype=float)
        dg = np.diag(np.diag(lg))
        return dg, dg - lg


def velocity_system(gs: GroundedSystem, u_ref: float = 0.0, kp: float = 1.0, ku: float = 1.0) -> SimSystem:
    return SimSystem(
        kind="velocity",
        lg=np.asarray(gs.lg, dtype=float),
        l12=np.asarray(gs.l12, dtype=float),
        u_ref=u_ref,
        kp=kp,
        ku=ku,
        n=gs.n,
        k=gs.k,
    )


def formation_system(gs: GroundedSystem, kp: float = 1.0, ku: float = 1.0) -> SimSystem:
    return SimSystem(
        kind="formation",
        lg=np.asarray(gs.lg, dtype=float),
        l12=np.asarray(gs.l12, dtype=float),
        kp=kp,
        ku=ku,
        n=gs.n,
        k=gs.k,
    )


@dataclass(frozen=True)
class DelaySpec:
    """Constant communication delay and which terms it applies to."""

    tau: float = 0.0
    mode: str = "full"  # "none" | "full" | "self-undelayed"

    def __post_init__(self):
        if self.tau < 0.0:
            raise ParameterError(f"delay must be nonnegative, got {self.tau}")
        if self.mode not in ("none", "full", "self-undelayed"):
            raise ParameterError(f"unknown delay mode {self.mode!r}")


NO_DELAY = DelaySpec(tau=0.0, mode="none")


class SinusoidDisturbance:
    """Per-channel sinusoid amplitude * sin(omega t + phase)."""

    def __init__(self, amplitude: float, omega: float, phase: float = 0.0, channel: int | None = None):
        self.amplitude = amplitude
        self.omega = omega
        self.phase = phase
        self.channel = channel
        self.seed = None

    def sample(self, times: np.ndarray, dim: int, step: float) -> np.ndarray:
        w = np.zeros((len(times), dim))
        sig = self.amplitude * np.sin(self.omega * np.asarray(times) + self.phase)
        if self.channel is None:
            w[:] = sig[:, None]
        else:
            w[:, self.channel] = sig
        return w

    def describe(self) -> str:
        return f"sin(amplitude={self.amplitude:.12g},omega={self.omega:.12g})"


class NoiseDisturbance:
    """Seeded uniform noise in [-amplitude, amplitude], piecewise constant
    over each integration step (so runs are reproducible given the seed)."""

    def __init__(self, amplitude: float, seed: int):
        self.amplitude = amplitude
        self.seed = seed

    def sample(self, times: np.ndarray, dim: int, step: float) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        nsteps = int(round(float(times[-1]) / step)) + 2
        table = rng.uniform(-self.amplitude, self.amplitude, size=(nsteps, dim))
        idx = np.minimum((np.asarray(times) / step).astype(int), nsteps - 1)
        return table[idx]

    def describe(self) -> str:
        return f"noise(amplitude={self.amplitude:.12g},seed={self.seed})"


# ---------------------------------------------------------------------------
# Trajectories and verdicts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled state history with per-sample Euclidean norms."""

    times: np.ndarray
    states: np.ndarray
    norms: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def diverged(self) -> bool:
        return bool(self.meta.get("diverged", False))

    def to_csv(self) -> str:
        header = "# " + ", ".join(
            f"{key}={'none' if self.meta[key] is None else self.meta[key]}"
            for key in ("n", "k", "kind", "mode", "tau", "tau_effective", "step", "seed")
            if key in self.meta
        )
        if self.diverged:
            header += "\n# diverged=true (run truncated at state norm > 1e12)"
        dim = self.states.shape[1]
        cols = "t,norm," + ",".join(f"x_{i + 1}" for i in range(dim))
        lines = [header, cols]
        for t, nrm, row in zip(self.times, self.norms, self.states):
            lines.append(
                f"{t:.12g},{nrm:.12g}," + ",".join(f"{v:.12g}" for v in row)
            )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    decay_ratio: float
    horizon: float


def default_step(tau: float) -> float:
    """Default integration step: min(1e-3, tau/40) for delayed runs."""
    return min(1e-3, tau / 40.0) if tau > 0.0 else 1e-3


def default_horizon(lambda1: float) -> float:
    """Default horizon 200 / lambda1, capped at 500 time units."""
    if lambda1 <= 0.0:
        return 500.0
    return min(500.0, 200.0 / lambda1)


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def simulate(
    sys: SimSystem,
    delay: DelaySpec,
    x0,
    horizon: float,
    step: float,
    disturbance=None,
) -> Trajectory:
    """Integrate the (possibly delayed, possibly disturbed) error dynamics.

    The delay is rounded to the nearest multiple of the step and the rounded
    value is reported in the trajectory metadata as ``tau_effective``.  A
    delay that rounds to zero steps degenerates to the undelayed dynamics.

    Args:
        sys: system to integrate.
        delay: DelaySpec; mode "self-undelayed" is velocity-only.
        x0: initial state, length sys.dim (also the constant pre-history).
        horizon: final time; must be at least 10 steps long.
        step: integration step, > 0.
        disturbance: optional bounded input, added through the system's
            input matrix and sampled at the integration stage times.

    Returns:
        Trajectory; truncated with meta["diverged"] = True on overflow.
    """
    if step <= 0.0:
        raise ParameterError(f"step must be positive, got {step}")
    if horizon < 10.0 * step:
        raise ParameterError(f"horizon {horizon} shorter than 10 steps ({10 * step})")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if len(x0) != sys.dim:
        raise ParameterError(f"x0 has length {len(x0)}, system dimension is {sys.dim}")
    if delay.mode == "self-undelayed" and sys.kind != "velocity":
        raise ParameterError("self-undelayed mode applies to the velocity dynamics only")

    h = float(step)
    nsteps = int(round(horizon / h))
    m = int(round(delay.tau / h)) if delay.mode != "none" else 0
    tau_eff = m * h

    a = sys.a_matrix()
    if delay.mode == "self-undelayed":
        dg, ag = sys.split_degree_adjacency()
        a0, atau = -sys.ku * dg, sys.ku * ag
    elif delay.mode == "full" and m > 0:
        a0, atau = None, a
    else:
        a0, atau = a, None
        m = 0
        tau_eff = 0.0
    if m == 0 and delay.mode == "self-undelayed":
        # zero delay: both modes coincide with the plain dynamics
        a0, atau = a, None

    jmat = sys.input_matrix() if disturbance is not None else None
    if disturbance is not None:
        grid_times = np.arange(nsteps + 1) * h
        mid_times = grid_times[:-1] + h / 2.0
        w_grid = disturbance.sample(grid_times, sys.lg.shape[0], h) @ jmat.T
        w_mid = disturbance.sample(mid_times, sys.lg.shape[0], h) @ jmat.T
    else:
        w_grid = w_mid = None

    pad = m + 4
    hist = np.empty((pad + nsteps + 1, len(x0)))
    hist[: pad + 1] = x0
    base = pad

    norms = np.empty(nsteps + 1)
    norms[0] = float(np.linalg.norm(x0))
    x = x0.copy()
    diverged = False
    last = nsteps
    for i in range(nsteps):
        if m > 0:
            i0 = base + i - m
            xd0 = hist[i0]
            xd1 = hist[i0 + 1]
            if m >= 2:
                xdh = _W_CENTERED @ hist[i0 - 1 : i0 + 3]
            else:
                xdh = _W_BACKWARD @ hist[base + i - 3 : base + i + 1]
            d1 = atau @ xd0
            dh = atau @ xdh
            d4 = atau @ xd1
        else:
            d1 = dh = d4 = 0.0
        if w_grid is not None:
            d1 = d1 + w_grid[i]
            dh = dh + w_mid[i]
            d4 = d4 + w_grid[i + 1]
        if a0 is not None:
            k1 = a0 @ x + d1
            k2 = a0 @ (x + 0.5 * h * k1) + dh
            k3 = a0 @ (x + 0.5 * h * k2) + dh
            k4 = a0 @ (x + h * k3) + d4
        else:
            k1, k2, k3, k4 = d1, dh, dh, d4
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        hist[base + i + 1] = x
        nrm = float(np.linalg.norm(x))
        norms[i + 1] = nrm
        if not math.isfinite(nrm) or nrm > DIVERGENCE_CUTOFF:
            diverged = True
            last = i + 1
            break

    times = np.arange(last + 1) * h
    states = hist[base : base + last + 1].copy()
    meta = {
        "n": sys.n if sys.n is not None else -1,
        "k": sys.k if sys.k is not None else -1,
        "kind": sys.kind,
        "mode": delay.mode,
        "tau": delay.tau,
        "tau_effective": tau_eff,
        "step": h,
        "seed": getattr(disturbance, "seed", None),
        "disturbance": disturbance.describe() if disturbance is not None else "none",
        "diverged": diverged,
    }
    return Trajectory(times=times, states=states, norms=norms[: last + 1], meta=meta)


def simulate_offdiagonal(sys: SimSystem, tau: float, x0, horizon: float, step: float) -> Trajectory:
    """Velocity dynamics with instantaneous own state and delayed neighbor
    states: xdot = -Dg x(t) + Ag x(t - tau); stable for any tau."""
    if sys.kind != "velocity":
        raise ParameterError("off-diagonal delay applies to the velocity dynamics only")
    return simulate(sys, DelaySpec(tau=tau, mode="self-undelayed"), x0, horizon, step)


# ---------------------------------------------------------------------------
# Classification and threshold scan
# ---------------------------------------------------------------------------

def classify(traj: Trajectory) -> StabilityVerdict:
    """Stable iff the norm decays below 20% across the trailing quarter of
    the covered horizon; a divergence marker forces unstable."""
    horizon = float(traj.times[-1]) if len(traj.times) else 0.0
    if traj.diverged:
        return StabilityVerdict(stable=False, decay_ratio=math.inf, horizon=horizon)
    if len(traj.norms) < 2:
        raise ParameterError("trajectory too short to cover the trailing window")
    w0 = int(round((1.0 - TRAILING_WINDOW) * (len(traj.norms) - 1)))
    start, end = float(traj.norms[w0]), float(traj.norms[-1])
    ratio = 0.0 if start == 0.0 else end / start
    return StabilityVerdict(
        stable=bool(ratio < STABILITY_THRESHOLD),
        decay_ratio=ratio,
        horizon=horizon,
    )


def threshold_scan(
    sys: SimSystem,
    tau_lo: float,
    tau_hi: float,
    tolerance: float,
    x0=None,
    horizon: float | None = None,
    step_fraction: int = 150,
    seed: int = 0,
) -> float:
    """Bisect the empirical critical delay between a stable and an unstable run.

    Args:
        sys: system to scan.
        tau_lo: delay that must classify stable.
        tau_hi: delay that must classify unstable (> tau_lo).
        tolerance: final bracket width; the midpoint is returned.
        x0: initial state; defaults to a seeded uniform(-1, 1) vector, which
            excites every mode (structured states can miss the critical one).
        horizon: simulation horizon; defaults to max(80, 1000 / max diag(lg)),
            long enough for the trailing window to see the slowest mode.
        step_fraction: each run uses step = tau / step_fraction so the delay
            is resolved identically across the bracket.
        seed: seed for the default x0.

    Raises:
        ParameterError: on an unordered bracket or endpoints that do not
            classify as (stable, unstable).
    """
    if not tau_lo < tau_hi:
        raise ParameterError(f"bracket is unordered: tau_lo={tau_lo} >= tau_hi={tau_hi}")
    if tolerance <= 0.0:
        raise ParameterError(f"tolerance must be positive, got {tolerance}")
    if x0 is None:
        x0 = np.random.default_rng(seed).uniform(-1.0, 1.0, sys.dim)
    if horizon is None:
        horizon = max(80.0, 1000.0 / float(np.max(np.diag(sys.lg))))

    def verdict(tau: float) -> bool:
        traj = simulate(sys, DelaySpec(tau=tau, mode="full"), x0, horizon, tau / step_fraction)
        return classify(traj).stable

    if not verdict(tau_lo):
        raise ParameterError(f"lower bracket tau={tau_lo} does not classify stable")
    if verdict(tau_hi):
        raise ParameterError(f"upper bracket tau={tau_hi} does not classify unstable")
    lo, hi = float(tau_lo), float(tau_hi)
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if verdict(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
