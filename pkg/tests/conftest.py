import pytest

import hierdmf as hd


@pytest.fixture(scope="session")
def tiny_truth_run():
    """Zero-noise, zero-jitter cohort with its ground truth (read-only)."""
    spec = hd.HierarchySpec(K=(4, 2), seed=11)
    cohort, truth = hd.generate_synthetic_cohort(
        spec, 3, (6, 6), 50, noise_sigma=0.0, subject_jitter=0.0, seed=11
    )
    return spec, cohort, truth


@pytest.fixture(scope="session")
def noisy_cohort():
    spec = hd.HierarchySpec(K=(6, 3), seed=3, max_outer_iters=20, rel_tol=0.0)
    cohort, truth = hd.generate_synthetic_cohort(
        spec, 3, (8, 8), 40, noise_sigma=0.1, subject_jitter=0.05, seed=3
    )
    return spec, cohort, truth
