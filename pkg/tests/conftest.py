import numpy as np
import pytest

from tacosim import harness, model


@pytest.fixture(scope="session")
def desk_config() -> harness.ExperimentConfig:
    """The desk-scale experiment configuration used throughout."""
    return harness.ExperimentConfig(trials=1000, master_seed=2024, threads=8)


@pytest.fixture(scope="session")
def desk_scenario(desk_config) -> model.Scenario:
    scenario = harness.build_scenario(desk_config)
    scenario.full_cost_table()
    return scenario


@pytest.fixture
def square_table() -> model.Scenario:
    return model.Scenario.from_table(np.array([[1.0, 2.0], [3.0, 4.0]]))
