"""Symmetric eigensolvers and the spectral machinery built on them.

Two genuinely independent eigenvalue paths are provided on purpose:

* ``eig_sym`` — the primary solver, a cyclic Jacobi iteration using the
  round-robin (tournament) ordering so that each sweep applies batches of
  disjoint plane rotations with dense matrix products.
* ``eig_sym_bisection`` — the oracle, Householder tridiagonalization followed
  by Sturm-sequence bisection.  It shares no code with the Jacobi path and is
  used to cross-check it in the test suite.

On top of these sit the grounded-spectrum certificates (degree and
reference-count brackets for the extreme eigenvalues), the quadratic map from
grounded-Laplacian eigenvalues to the second-order formation spectrum, the
dense formation matrix used as an oracle for that map, and the
row-stochasticity check of the steady-state matrix -lg^{-1} l12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ParameterError
from .topology import GroundedSystem

#: absolute slack used by certificate bracket checks
CERT_TOL = 1e-9


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (ascending) and optional orthonormal eigenvectors.

    When vectors are present, column i pairs with values[i].
    """

    values: np.ndarray
    vectors: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.values)

    @property
    def lambda1(self) -> float:
        return float(self.values[0])

    @property
    def lambda_max(self) -> float:
        return float(self.values[-1])


def _check_symmetric(a: np.ndarray, rtol: float = 1e-12) -> None:
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 0.0)
    if asym > rtol * scale:
        raise ParameterError(
            f"matrix is not symmetric: max |a - a.T| = {asym:.3e} exceeds "
            f"{rtol:.0e} relative tolerance"
        )


def _round_robin_rounds(n: int) -> list:
    """Tournament pairing: n-1 rounds of disjoint index pairs covering every
    unordered pair exactly once per sweep."""
    players = list(range(n)) if n % 2 == 0 else list(range(n)) + [-1]
    m = len(players)
    rounds = []
    arr = players[:]
    for _ in range(m - 1):
        pairs = [
            (min(arr[i], arr[m - 1 - i]), max(arr[i], arr[m - 1 - i]))
            for i in range(m // 2)
            if arr[i] >= 0 and arr[m - 1 - i] >= 0
        ]
        rounds.append(pairs)
        arr = [arr[0]] + [arr[-1]] + arr[1:-1]
    return rounds


def _off_norm(a: np.ndarray) -> float:
    # computed directly, not as sqrt(|A|^2 - |diag|^2): that form hits a
    # cancellation floor around |A| * sqrt(eps) and can never reach 1e-12
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def eig_sym(
    m,
    want_vectors: bool = False,
    tol: float = 1e-12,
    max_sweeps: int = 100,
) -> Spectrum:
    """Full spectrum of a symmetric real matrix via cyclic Jacobi rotations.

    Sweeps visit every off-diagonal pair once, in the round-robin ordering;
    rotations within a round act on disjoint index pairs, so their angles are
    computed jointly from the current matrix and applied as one orthogonal
    update.  Iteration stops when the off-diagonal Frobenius norm falls below
    ``tol * max(1, ||m||_F)``.

    Args:
        m: symmetric real matrix (to 1e-12 relative tolerance).
        want_vectors: also accumulate the orthonormal eigenvector matrix.
        tol: off-diagonal Frobenius threshold.
        max_sweeps: sweep cap; exceeding it raises NumericalError.

    Returns:
        Spectrum with ascending values (and vectors when requested).
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {a.shape}")
    _check_symmetric(a)
    n = a.shape[0]
    if n == 1:
        vec = np.eye(1) if want_vectors else None
        return Spectrum(values=a[0, 0].reshape(1), vectors=vec)
    a = 0.5 * (a + a.T)  # exact symmetry for the iteration
    v = np.eye(n) if want_vectors else None
    thresh = tol * max(1.0, float(np.linalg.norm(a)))
    rounds = _round_robin_rounds(n)
    sweeps = 0
    while _off_norm(a) > thresh:
        if sweeps >= max_sweeps:
            raise NumericalError(
                f"Jacobi iteration did not converge within the sweep cap of "
                f"{max_sweeps} (off-diagonal norm {_off_norm(a):.3e})"
            )
        for pairs in rounds:
            ps = np.array([p for p, _ in pairs])
            qs = np.array([q for _, q in pairs])
            apq = a[ps, qs]
            live = apq != 0.0
            if not live.any():
                continue
            ps, qs, apq = ps[live], qs[live], apq[live]
            with np.errstate(over="ignore"):
                theta = (a[qs, qs] - a[ps, ps]) / (2.0 * apq)
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(theta == 0.0, 1.0, t)
            t = np.where(np.isfinite(t), t, 0.0)  # huge theta: rotation ~ identity
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            j = np.eye(n)
            j[ps, ps] = c
            j[qs, qs] = c
            j[ps, qs] = s
            j[qs, ps] = -s
            a = j.T @ a @ j
            if want_vectors:
                v = v @ j
        sweeps += 1
    d = np.diag(a).copy()
    order = np.argsort(d, kind="stable")
    return Spectrum(values=d[order], vectors=(v[:, order] if want_vectors else None))


# ---------------------------------------------------------------------------
# Oracle path: Householder tridiagonalization + Sturm-sequence bisection
# ---------------------------------------------------------------------------

def householder_tridiagonalize(m) -> tuple:
    """Reduce a symmetric matrix to tridiagonal form; returns (diag, offdiag)."""
    a = np.array(m, dtype=float)
    _check_symmetric(a)
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    for kk in range(n - 2):
        x = a[kk + 1:, kk].copy()
        alpha = float(np.linalg.norm(x))
        if alpha == 0.0:
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x
        v[0] -= alpha
        vnorm = float(np.linalg.norm(v))
        if vnorm == 0.0:
            continue
        v /= vnorm
        sub = a[kk + 1:, kk + 1:]
        w = sub @ v
        coef = float(v @ w)
        sub -= 2.0 * (np.outer(v, w) + np.outer(w, v)) - 4.0 * coef * np.outer(v, v)
        a[kk + 1:, kk + 1:] = sub
        a[kk + 1, kk] = alpha
        a[kk, kk + 1] = alpha
        a[kk + 2:, kk] = 0.0
        a[kk, kk + 2:] = 0.0
    d = np.diag(a).copy()
    e = np.diag(a, 1).copy() if n > 1 else np.zeros(0)
    return d, e


def sturm_count(d: np.ndarray, e: np.ndarray, xs) -> np.ndarray:
    """Number of eigenvalues of tridiag(d, e) below each shift in xs.

    Counts negative pivots of the LDL^T factorization of T - x*I; a vanishing
    pivot is replaced by a tiny negative value (and counted) before it feeds
    the next pivot, else the count goes wrong exactly when a shift hits an
    eigenvalue of a leading principal minor.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    n = len(d)
    tiny = 1e-280
    with np.errstate(over="ignore", divide="ignore"):
        q = d[0] - xs
        q = np.where(np.abs(q) < tiny, -tiny, q)
        count = (q < 0.0).astype(np.int64)
        for i in range(1, n):
            q = d[i] - xs - e[i - 1] * e[i - 1] / q
            q = np.where(np.abs(q) < tiny, -tiny, q)
            count += q < 0.0
    return count


def eig_sym_bisection(m, tol: float | None = None) -> np.ndarray:
    """Ascending eigenvalues via the tridiagonalize-and-bisect oracle path."""
    d, e = householder_tridiagonalize(m)
    n = len(d)
    if n == 1:
        return d.copy()
    rad = np.zeros(n)
    rad[0] = abs(e[0])
    rad[-1] = abs(e[-1])
    if n > 2:
        rad[1:-1] = np.abs(e[:-1]) + np.abs(e[1:])
    glo = float(np.min(d - rad))
    ghi = float(np.max(d + rad))
    scale = max(abs(glo), abs(ghi), 1.0)
    if tol is None:
        tol = 1e-14 * scale
    lo = np.full(n, glo)
    hi = np.full(n, ghi)
    idx = np.arange(n)
    while float(np.max(hi - lo)) > tol:
        mid = 0.5 * (lo + hi)
        above = sturm_count(d, e, mid) > idx
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Extreme-eigenvalue certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundCertificate:
    """A two-sided bracket for a computed eigenvalue, plus the full chain of
    graph quantities it was derived from.

    holds is exactly ``lower <= witnessed + tol and witnessed <= upper + tol``
    with tol = 1e-9; the chain records every intermediate link for reporting.
    """

    lower: float
    upper: float
    witnessed: float
    holds: bool
    chain: tuple

    def as_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "witnessed": self.witnessed,
            "holds": self.holds,
            "chain": [[name, value] for name, value in self.chain],
        }


def _certificate(lower: float, upper: float, witnessed: float, chain) -> BoundCertificate:
    holds = (lower <= witnessed + CERT_TOL) and (witnessed <= upper + CERT_TOL)
    return BoundCertificate(
        lower=float(lower),
        upper=float(upper),
        witnessed=float(witnessed),
        holds=bool(holds),
        chain=tuple(chain),
    )


def certify_lambda_min(gs: GroundedSystem, spec: Spectrum) -> BoundCertificate:
    """Bracket the smallest grounded eigenvalue by reference-neighbor counts.

    Chain, every link of which must hold for a valid grounding:

        min beta <= lambda_1 <= |boundary| / |followers| <= max beta <= |refs|
    """
    min_beta = float(gs.betas.min())
    max_beta = float(gs.betas.max())
    ratio = gs.boundary_size / gs.n_followers
    lam1 = spec.lambda1
    chain = (
        ("min_beta", min_beta),
        ("lambda1", lam1),
        ("boundary_over_followers", ratio),
        ("max_beta", max_beta),
        ("refs_count", float(len(gs.refs))),
    )
    return _certificate(min_beta, ratio, lam1, chain)


def certify_lambda_max(gs: GroundedSystem, spec: Spectrum) -> BoundCertificate:
    """Bracket the largest grounded eigenvalue by the max follower degree:
    dmax_f <= lambda_max <= 2 dmax_f."""
    d = float(gs.dmax_f)
    lam = spec.lambda_max
    chain = (("dmax_f", d), ("lambda_max", lam), ("two_dmax_f", 2.0 * d))
    return _certificate(d, 2.0 * d, lam, chain)


# ---------------------------------------------------------------------------
# Second-order (formation) spectrum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FormationSpectrum:
    """Eigenvalues of the second-order formation matrix, as the image of the
    grounded spectrum under the quadratic s^2 + lam*s + lam.

    values holds 2|F| complex numbers, stored as consecutive pairs per source
    eigenvalue; the multiset is closed under conjugation.
    """

    values: np.ndarray
    source: Spectrum


def map_formation_spectrum(spec: Spectrum, branch_tol: float = 1e-12) -> FormationSpectrum:
    """Map each grounded eigenvalue lam > 0 to both roots of s^2 + lam*s + lam.

    lam < 4 gives a conjugate complex pair of magnitude sqrt(lam); lam > 4 two
    real roots; |lam - 4| < branch_tol collapses to the exact double root -2.

    Raises:
        ParameterError: if any eigenvalue is <= 0 (grounding assumption violated).
    """
    vals = np.asarray(spec.values, dtype=float)
    if vals.size == 0:
        raise ParameterError("empty spectrum")
    if vals.min() <= 0.0:
        raise ParameterError(
            f"formation mapping needs a positive spectrum, got lambda_1 = {vals.min()}"
        )
    out = np.empty(2 * len(vals), dtype=complex)
    for i, lam in enumerate(vals):
        if abs(lam - 4.0) < branch_tol:
            out[2 * i] = out[2 * i + 1] = -2.0
        elif lam < 4.0:
            im = math.sqrt(lam * (4.0 - lam)) / 2.0
            out[2 * i] = complex(-lam / 2.0, -im)
            out[2 * i + 1] = complex(-lam / 2.0, im)
        else:
            root = math.sqrt(lam * (lam - 4.0))
            out[2 * i] = (-lam - root) / 2.0
            out[2 * i + 1] = (-lam + root) / 2.0
    return FormationSpectrum(values=out, source=spec)


def spectral_radius_formation(fs: FormationSpectrum) -> float:
    """Largest eigenvalue magnitude of the formation matrix."""
    if len(fs.values) == 0:
        raise ParameterError("empty formation spectrum")
    return float(np.max(np.abs(fs.values)))


def spectrum_mismatch(a, b) -> float:
    """Greedy nearest-neighbor matching distance between two complex
    multisets of equal size.

    Robust against the degenerate-eigenvalue case where lexicographic
    sorting interleaves conjugate pairs on floating-point noise.
    """
    rest = [complex(z) for z in b]
    if len(a) != len(rest):
        raise ParameterError(f"multisets differ in size: {len(a)} vs {len(rest)}")
    worst = 0.0
    for z in a:
        z = complex(z)
        i = min(range(len(rest)), key=lambda j: abs(rest[j] - z))
        worst = max(worst, abs(rest[i] - z))
        rest.pop(i)
    return worst


def formation_radius_closed_form(lambda_max: float) -> float:
    """Closed form (lam/2)(1 + sqrt(1 - 4/lam)) for the dominant real root;
    valid as the spectral radius once lambda_max >= 4 dominates every
    complex-pair magnitude sqrt(lam)."""
    if lambda_max < 4.0:
        raise ParameterError(f"closed form needs lambda_max >= 4, got {lambda_max}")
    return lambda_max / 2.0 * (1.0 + (1.0 - 4.0 / lambda_max) ** 0.5)


def build_formation_matrix(gs: GroundedSystem, kp: float = 1.0, ku: float = 1.0) -> np.ndarray:
    """Dense 2|F| x 2|F| formation error matrix, positions stacked above
    velocities:  [[0, I], [-kp*lg, -ku*lg]]."""
    lg = np.asarray(gs.lg, dtype=float)
    f = lg.shape[0]
    b = np.zeros((2 * f, 2 * f))
    b[:f, f:] = np.eye(f)
    b[f:, :f] = -kp * lg
    b[f:, f:] = -ku * lg
    return b


def stochasticity_defect(gs: GroundedSystem) -> float:
    """Max row-sum deviation of -lg^{-1} l12 from 1 (it is row stochastic
    whenever the platoon is connected and grounded)."""
    lg = np.asarray(gs.lg, dtype=float)
    l12 = np.asarray(gs.l12, dtype=float)
    try:
        w = np.linalg.solve(lg, -l12)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"grounded Laplacian is singular: {exc}") from exc
    return float(np.max(np.abs(w.sum(axis=1) - 1.0)))
