import numpy as np

from nonlocality_wb.qubit import QubitModel
from nonlocality_wb.scenario import Behavior, Scenario

# Known-good optimized parameter sets (state angle, Alice angles, Bob angles)
# reaching the reference Hardy values 0.4140 and 0.7734.
REFERENCE_MODEL_2 = QubitModel(0.7968, (-0.1996, 0.5901), (0.1996, -0.5901))
REFERENCE_MODEL_4 = QubitModel(
    1.0793, (-1.5309, 1.3084, 2.1179, 0.9181), (-1.6107, -1.3084, -2.1179, -0.9181)
)


def all_zero_behavior(scenario: Scenario) -> Behavior:
    """Deterministic behavior with both parties always reporting outcome 0."""
    n = scenario.n_settings
    p = np.zeros((n, n, 2, 2))
    p[:, :, 0, 0] = 1.0
    return Behavior(scenario, p)


def random_behavior(scenario: Scenario, rng: np.random.Generator) -> Behavior:
    """A random normalized (generally signaling) behavior."""
    raw = rng.random((scenario.n_settings, scenario.n_settings, 2, 2))
    return Behavior(scenario, raw / raw.sum(axis=(2, 3), keepdims=True))
