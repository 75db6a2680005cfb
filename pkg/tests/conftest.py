import numpy as np
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

from platoonkit import build_platoon, ground, make_reference_set  # noqa: E402


def random_grounded(rng, n_lo=2, n_hi=60, k_hi=6, f_min=1, f_max=None):
    """One random platoon instance: (topology, refset, grounded system)."""
    while True:
        n = int(rng.integers(n_lo, n_hi + 1))
        k = int(rng.integers(1, k_hi + 1))
        n_refs = int(rng.integers(1, n))
        n_fol = n - n_refs
        if n_fol < f_min or (f_max is not None and n_fol > f_max):
            continue
        refs = sorted(int(r) for r in rng.choice(np.arange(1, n + 1), size=n_refs, replace=False))
        top = build_platoon(n, k)
        refset = make_reference_set(n, refs)
        return top, refset, ground(top, refset)


def expm_oracle(a):
    """Matrix exponential by scaling-and-squaring with a Taylor core.

    Independent of the time-stepping integrator on purpose: it is the oracle
    for zero-delay runs.
    """
    a = np.asarray(a, dtype=float)
    nrm = float(np.linalg.norm(a, np.inf))
    s = 0
    if nrm > 0.5:
        s = int(np.ceil(np.log2(nrm / 0.5)))
    b = a / (2.0 ** s)
    out = np.eye(len(a))
    term = np.eye(len(a))
    for k in range(1, 30):
        term = term @ b / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out
