import numpy as np
import pytest

from anticipation.data import (
    AnticipationProtocol,
    ClassInfo,
    Dataset,
    FeatureSequence,
    Sample,
)
from anticipation.numcore import kernels


@pytest.fixture(params=kernels.available_backends())
def kernel_backend(request):
    """Run the decorated test once per available kernel backend."""
    original = kernels.active_backend()
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(original)


def handmade_dataset(
    pairs_by_split: dict[str, list[tuple[int, int]]],
    n_classes: int,
    d_v: int = 6,
    d_s: int = 4,
    seed: int = 0,
    poison: float | None = None,
) -> Dataset:
    """In-memory dataset from explicit (obs, target) label pairs.

    Features are the obs-class prototype plus small noise; `poison`
    injects one huge value into the first train sample to force
    divergence tests.
    """
    rng = np.random.default_rng(seed)
    protocol = AnticipationProtocol()
    prototypes = rng.standard_normal((n_classes, d_v))
    splits = {}
    for split, pairs in pairs_by_split.items():
        samples = []
        for i, (obs, target) in enumerate(pairs):
            steps = prototypes[obs] + 0.1 * rng.standard_normal(
                (protocol.total_steps, d_v)
            )
            steps = steps.astype(np.float32)
            if poison is not None and split == "train" and i == 0:
                steps[0, 0] = poison
            samples.append(
                Sample(
                    features={
                        "rgb": FeatureSequence(steps, f"{split}_{i}", 3.5)
                    },
                    obs_label=obs,
                    target_label=target,
                )
            )
        splits[split] = samples
    classes = ClassInfo(
        names=[f"c{i}" for i in range(n_classes)],
        verb_ids=[i % 2 for i in range(n_classes)],
        noun_ids=[i // 2 for i in range(n_classes)],
    )
    return Dataset(
        protocol=protocol,
        classes=classes,
        semantic=rng.standard_normal((n_classes, d_s)),
        splits=splits,
        meta={},
    )
