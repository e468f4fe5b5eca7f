import time

import numpy as np
import pytest

from fourpl import ModelKind, SimulationConfig, kernels, run_study, summarise_study
from fourpl.model import Dataset

# One seed for every heavy suite run; changing it invalidates the frozen
# expectations in test_acceptance.
STUDY_SEED = 20240801


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Pay the JIT cost once, outside any timed assertion."""
    kernels.warm_up()


def attach_halves_group(data: Dataset) -> Dataset:
    """Group-specific design over existing responses: first half reference,
    second half focal.  Under simple-model truth the group is pure noise."""
    n = data.n
    g = np.zeros(n)
    g[n // 2 :] = 1.0
    x = data.criterion
    return Dataset(
        y=data.y,
        x_design=np.column_stack([np.ones(n), x, g, g * x]),
        z_design=np.column_stack([np.ones(n), g]),
    )


def interior_instance_30() -> Dataset:
    """30 respondents with tail misfits and a gradual transition, so the
    optimum has interior asymptotes and a finite slope."""
    x = np.linspace(-3.0, 3.0, 30)
    y = np.zeros(30)
    y[:8] = [1, 0, 0, 1, 0, 0, 1, 0]
    y[8:22] = [0, 1, 0, 0, 1, 0, 1, 0, 1, 1, 0, 1, 1, 1]
    y[22:] = [1, 1, 1, 0, 1, 1, 0, 1]
    return Dataset(
        y=y,
        x_design=np.column_stack([np.ones(30), x]),
        z_design=np.ones((30, 1)),
    )


def _study(kind: ModelKind, n: int, replications: int):
    config = SimulationConfig(
        kind=kind,
        sample_sizes=(n,),
        replications=replications,
        seed=STUDY_SEED,
    )
    start = time.perf_counter()
    records = run_study(config)
    elapsed = time.perf_counter() - start
    summary = summarise_study(
        records, config.truth, kind=kind, seed=config.seed
    )
    return config, records, summary, elapsed


@pytest.fixture(scope="session")
def study_simple_5000():
    return _study(ModelKind.SIMPLE, 5000, 200)


@pytest.fixture(scope="session")
def study_simple_500():
    return _study(ModelKind.SIMPLE, 500, 200)


@pytest.fixture(scope="session")
def study_group_500():
    return _study(ModelKind.GROUP, 500, 200)
