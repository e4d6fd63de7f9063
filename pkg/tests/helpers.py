"""Shared builders for the test suite."""

import numpy as np

import hierdmf as hd
from hierdmf.factorization import ObjectiveBreakdown, fit_timecourses
from hierdmf.pipeline import DecompositionResult


def random_cohort(n=2, t=12, grid=(3, 3), seed=0):
    rng = np.random.default_rng(seed)
    s = grid[0] * grid[1]
    subjects = tuple(
        hd.SubjectTimeseries(subject_id=f"{i:03d}", data=rng.standard_normal((t, s)))
        for i in range(n)
    )
    return hd.Cohort(subjects=subjects, graph=hd.grid_graph(*grid))


def result_from_truth(cohort, truth, spec, strategy="joint"):
    """Package ground-truth factors as a DecompositionResult.

    Time courses are refit against the data so the stacks are exactly
    self-consistent at zero noise.
    """
    stacks = []
    for i, sid in enumerate(truth.subject_ids):
        factors = truth.subject_factors(i)
        us = tuple(
            fit_timecourses(cohort.subjects[i].data, [truth.subject_scale_map(i, j)])
            for j in range(1, spec.h + 1)
        )
        stacks.append(hd.FactorStack(subject_id=sid, Vt=tuple(factors), U=us))
    return DecompositionResult(
        strategy=strategy,
        spec=spec,
        subject_ids=truth.subject_ids,
        stacks=tuple(stacks),
        objective_trace=(ObjectiveBreakdown(0.0, 0.0, 0.0),),
        converged=True,
        iterations=1,
        dead_components={j: () for j in range(1, spec.h + 1)},
        hierarchical=True,
    )
