import warnings

import numpy as np
import pytest

# numba's TBB version probe warns on this box; the fallback layer is fine.
warnings.filterwarnings("ignore", message=".*TBB threading layer.*")

from remclock.landscape import LandscapeParams, ScaleSpec, sample_landscape

MASTER = 1380272417


@pytest.fixture(scope="session")
def intermediate_params():
    """n=10 landscape at eps=1/2 with alpha(eps) = 1/2 (beta = 2 beta_c)."""
    from remclock.landscape import beta_critical
    return LandscapeParams(
        n=10, beta=2.0 * beta_critical(0.5),
        scale=ScaleSpec.from_epsilon(0.5), master_seed=MASTER,
    )


@pytest.fixture(scope="session")
def intermediate_landscape(intermediate_params):
    return sample_landscape(intermediate_params)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260816)
