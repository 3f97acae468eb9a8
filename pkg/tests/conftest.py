import numpy as np
import pytest

from tlsrf import core


@pytest.fixture
def qd():
    """Default emitter lifetimes used by the bundled presets."""
    return core.PAPER_QD.tls


@pytest.fixture
def instrument():
    return core.PAPER_QD.instrument


@pytest.fixture
def radiative():
    """Purely radiative emitter (no pure dephasing, t2 = 2 t1)."""
    return core.TlsParams(t1=0.641, t2=1.282)


def significant_maxima(values, stderr, idx):
    """Indices in idx that rise and fall by more than 3 joint standard
    errors against some earlier / later point of the window."""
    out = []
    v = np.asarray(values)
    se = np.asarray(stderr)
    for k, i in enumerate(idx):
        before = idx[:k]
        after = idx[k + 1 :]
        rises = len(before) and np.any(v[i] - v[before] > 3.0 * np.sqrt(se[i] ** 2 + se[before] ** 2))
        falls = len(after) and np.any(v[i] - v[after] > 3.0 * np.sqrt(se[i] ** 2 + se[after] ** 2))
        if rises and falls:
            out.append(i)
    return out
