from __future__ import annotations

import random

import pytest

from hfsets import HFSet, default_store, make_set, v_stage


def as_frozen(s: HFSet) -> frozenset:
    """Plain nested-frozenset copy, for oracles that must not touch the kernel."""
    return frozenset(as_frozen(x) for x in s.children)


def random_hf(rng: random.Random, depth: int = 4, width: int = 3) -> HFSet:
    if depth == 0 or rng.random() < 0.25:
        return default_store().empty
    return make_set([random_hf(rng, depth - 1, width) for _ in range(rng.randint(0, width))], store=default_store())


def random_stage_subset(rng: random.Random, n: int, k: int) -> HFSet:
    stage = v_stage(n)
    return make_set(rng.sample(stage.children, min(k, len(stage))), store=default_store())


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240917)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
