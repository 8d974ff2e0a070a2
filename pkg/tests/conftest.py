import random
import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from groupin.core import DeviceId, ScannerId, WirelessTrace  # noqa: E402

settings.register_profile("thorough", max_examples=1000, deadline=None)
settings.load_profile("thorough")


def random_instance(rng: random.Random, max_devices=5, max_scanners=3, max_slots=10):
    """Random traces plus the same data as a plain dict for the oracle."""
    devices = [f"d{i}" for i in range(rng.randint(2, max_devices))]
    scanners = [f"s{i}" for i in range(1, rng.randint(1, max_scanners) + 1)]
    levels = [0.0, 0.25, 0.5, 0.5, 0.75, 1.0]  # repeated values force rank ties
    inst: dict = {}
    traces = []
    for slot in range(rng.randint(1, max_slots)):
        for d in devices:
            for s in scanners:
                if rng.random() < 0.55:
                    v = rng.choice(levels) if rng.random() < 0.3 else rng.random()
                    inst.setdefault(d, {}).setdefault(slot, []).append((s, v))
                    traces.append(WirelessTrace(ScannerId(s), DeviceId(d), slot, v))
    seen = sorted({s for per in inst.values() for lst in per.values() for s, _ in lst})
    return traces, inst, seen


@pytest.fixture
def rng():
    return random.Random(12345)


# one line per acceptance criterion, echoed in the terminal summary
CRITERIA_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
