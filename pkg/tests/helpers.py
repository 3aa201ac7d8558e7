"""Shared dataset builders for the test suite."""

import numpy as np

from drmboot import BasisSpec, MultiSampleData


def identical_groups_data(n_per_group=30, seed=7, tokens=("const", "x")):
    """Two groups sharing one observation multiset; the fit is exactly
    zero and every estimated CDF collapses to the pooled empirical one."""
    rng = np.random.default_rng(seed)
    x = rng.gamma(4.0, 1.0, n_per_group)
    basis = BasisSpec.from_tokens(tokens)
    return MultiSampleData.from_groups([x, x.copy()], basis)


def random_dataset(rng, max_groups=4, tokens=None):
    """Small positive-valued dataset with random group structure, mild
    enough that the fit always converges."""
    m = int(rng.integers(1, max_groups))
    if tokens is None:
        tokens = ("const", "x") if rng.random() < 0.5 else ("const", "x", "log")
    basis = BasisSpec.from_tokens(tokens)
    groups = []
    for _ in range(m + 1):
        size = int(rng.integers(15, 40))
        shape = rng.uniform(3.0, 6.0)
        scale = rng.uniform(0.8, 1.4)
        groups.append(rng.gamma(shape, scale, size))
    return MultiSampleData.from_groups(groups, basis)


def random_theta(rng, data, scale=0.3):
    return rng.normal(0.0, scale, (data.m, data.d))


def random_step_cdf(rng, max_atoms=12):
    """Random proper step CDF with distinct support points."""
    from drmboot import StepCdf

    k = int(rng.integers(1, max_atoms))
    support = np.sort(rng.choice(np.arange(1000), size=k, replace=False)) / 10.0
    jumps = rng.dirichlet(np.full(k, 0.7))
    return StepCdf(support, jumps, np.cumsum(jumps))


def disjoint_support_data(seed=3):
    """Two well-separated groups; the higher one dominates everywhere."""
    rng = np.random.default_rng(seed)
    lo = rng.uniform(0.5, 1.5, 25)
    hi = rng.uniform(10.0, 11.0, 30)
    basis = BasisSpec.from_tokens(["const", "x"])
    return MultiSampleData.from_groups([lo, hi], basis)
