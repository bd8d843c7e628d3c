import numpy as np
import pytest

from langinc import GibbsDensity, PiecewisePotential1D, example_potential

CLOSED_FORM_Z = 4.0 - 2.0 / np.e


@pytest.fixture(scope="session")
def example():
    return example_potential()


@pytest.fixture(scope="session")
def gibbs_example(example):
    return GibbsDensity(example, 1.0, (-40.0, 40.0))


def random_piecewise_potential(rng: np.random.Generator, max_breaks: int = 4) -> PiecewisePotential1D:
    """Random valid potential: linear confining outer pieces, random cubic middles.

    Continuity is enforced by solving each piece's constant term from the value
    at its left breakpoint.
    """
    n_breaks = int(rng.integers(1, max_breaks + 1))
    bps = np.sort(rng.uniform(-3.0, 3.0, n_breaks))
    while np.any(np.diff(bps) < 0.3):
        bps = np.sort(rng.uniform(-3.0, 3.0, n_breaks))
    pieces = []
    # leftmost: negative slope through a random value at the first breakpoint
    v = rng.uniform(-1.0, 1.0)
    s = -float(rng.uniform(0.3, 3.0))
    pieces.append([v - s * bps[0], s])
    for k in range(n_breaks - 1):
        c1, c2, c3 = rng.uniform(-1.5, 1.5, 3)
        c0 = v - (c1 * bps[k] + c2 * bps[k] ** 2 + c3 * bps[k] ** 3)
        pieces.append([c0, c1, c2, c3])
        v = c0 + c1 * bps[k + 1] + c2 * bps[k + 1] ** 2 + c3 * bps[k + 1] ** 3
    s = float(rng.uniform(0.3, 3.0))
    pieces.append([v - s * bps[-1], s])
    return PiecewisePotential1D(bps, pieces)


class FlatPotential:
    """Zero potential for sampler/metric tests; not confining, so not a
    PiecewisePotential1D, but satisfies the generic potential protocol."""

    def value(self, x):
        return 0.0 if np.ndim(x) == 0 else np.zeros(np.shape(x))

    def drift(self, x, rule=None, rng=None):
        return 0.0 if np.ndim(x) == 0 else np.zeros(np.shape(x))

    def value_and_drift(self, x, rule=None, rng=None):
        z = np.zeros(np.shape(x))
        return z, z.copy()

    def drift_array(self, x, rule=None, rng=None):
        return np.zeros(np.shape(x))
