import numpy as np

from fastmelc.core import LabeledDataset

# acceptance report lines, printed once at the end of the session
ACCEPTANCE_LINES = []


def report(criterion, ok, detail):
    """Record one acceptance line; ``ok=None`` marks a skipped criterion."""
    status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    line = f"[{status}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def random_dataset(rng, n_neg=None, n_pos=None, dim=None, shift=1.0):
    n_neg = n_neg or int(rng.integers(2, 30))
    n_pos = n_pos or int(rng.integers(2, 30))
    dim = dim or int(rng.integers(2, 6))
    neg = rng.standard_normal((n_neg, dim))
    pos = rng.standard_normal((n_pos, dim)) + shift * rng.standard_normal(dim)
    return LabeledDataset(neg, pos)


def unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)
