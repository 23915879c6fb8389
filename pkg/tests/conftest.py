"""Shared fixtures; the session-scoped dataset is reused across test modules."""

import numpy as np
import pytest

from faultwave import synth


@pytest.fixture(scope="session")
def small_fd_records():
    """120-record fault-vs-switching set for module-level pipeline tests."""
    return synth.make_detection_dataset(n_fault=60, n_switch=60, seed=11)


@pytest.fixture(scope="session")
def fd_records():
    """The seeded 400+400 detection set used by the acceptance criteria."""
    return synth.make_detection_dataset(n_fault=400, n_switch=400, seed=0)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def bolted_ag_spec(seed=0, onset=9.00334, position="p5"):
    return synth.ScenarioSpec(kind="fault", fault_type="ag", fault_impedance_ohm=0.01,
                              onset_time_s=onset, position_tag=position, seed=seed)


@pytest.fixture()
def bolted_ag_record():
    return synth.synthesize(bolted_ag_spec())
