import time

import pytest

from etcsim.bench import BenchConfig, run_table1
from etcsim.certificates import example_vi_certificate


@pytest.fixture(scope="session")
def bench_result():
    """Default benchmark run, shared across tests: (summary, wall seconds)."""
    t0 = time.perf_counter()
    summary = run_table1(BenchConfig())
    return summary, time.perf_counter() - t0


@pytest.fixture(scope="session")
def cert05():
    return example_vi_certificate(0.5)
