import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from daestruct import expr as ex


def random_binding(exprs, rng, lo=0.4, hi=1.6):
    """A binding covering every leaf of the given expressions, with values
    away from zero so rational fixtures stay in-domain."""
    jets = set()
    names = set()
    for e in exprs:
        jets |= ex.jet_vars(e)
        names |= ex.frozen_names(e)
    return ex.Binding(
        t=float(rng.uniform(0.0, 1.0)),
        values={v: float(rng.uniform(lo, hi)) for v in sorted(jets, key=lambda v: (v.var_index, v.order))},
        frozen={n: float(rng.uniform(lo, hi)) for n in sorted(names)},
    )


def assert_equiv(e1, e2, n=20, seed=0, tol=1e-9):
    """Check two expressions agree pointwise at random bindings."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        b = random_binding([e1, e2], rng)
        a = ex.evaluate(e1, b)
        c = ex.evaluate(e2, b)
        assert abs(a - c) <= tol * (1 + abs(a)), f"{a} vs {c}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
