from dataclasses import replace

import pytest

from stefan_es import harness


@pytest.fixture(scope="session")
def reference_run():
    """The headline run: default parameter set, delay-compensated, 100 s.

    Shared across the acceptance criteria that all quote "the same run".
    Returns (config, trace, metrics, aux, wall_seconds).
    """
    import time

    cfg = harness.default_config()
    start = time.perf_counter()
    trace, metrics, aux = harness.run_scenario(cfg, capture_aux=True)
    wall = time.perf_counter() - start
    return cfg, trace, metrics, aux, wall


@pytest.fixture(scope="session")
def nominal_run_full():
    """Delay-free loop over the full horizon (used by the equivalence check)."""
    cfg = replace(harness.default_config(), scenario=harness.SCENARIO_NOMINAL)
    trace, metrics = harness.run_scenario(cfg)
    return cfg, trace, metrics
