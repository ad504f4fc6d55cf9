import numpy as np
import pytest

from rdlocal.config import load_config
from rdlocal.data import Dataset, Observation


def make_dataset(control, treated, run_c=None, run_t=None, cov_c=None, cov_t=None, cov_names=None):
    """Small dataset with cutoff 0; control runs negative, treated non-negative."""
    run_c = run_c if run_c is not None else [-(i + 1.0) for i in range(len(control))]
    run_t = run_t if run_t is not None else [float(i) for i in range(len(treated))]
    names = tuple(cov_names or (("x",) if cov_c is not None else ()))
    cov_c = cov_c if cov_c is not None else [()] * len(control)
    cov_t = cov_t if cov_t is not None else [()] * len(treated)
    obs = []
    for i, (r, y, c) in enumerate(zip(run_c, control, cov_c, strict=True)):
        obs.append(Observation(f"c{i}", float(r), float(y), tuple(np.atleast_1d(c).tolist()) if names else ()))
    for i, (r, y, c) in enumerate(zip(run_t, treated, cov_t, strict=True)):
        obs.append(Observation(f"t{i}", float(r), float(y), tuple(np.atleast_1d(c).tolist()) if names else ()))
    return Dataset(tuple(obs), 0.0, "y", names)


@pytest.fixture(scope="session")
def replication_config():
    return load_config()
