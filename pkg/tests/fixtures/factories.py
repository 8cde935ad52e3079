"""Test data factories.

This module provides factory classes for generating raw scenario
configurations as they would be read from JSON.
"""

import factory
from factory import fuzzy


class DiscFactory(factory.Factory):
    """Factory for generating disc shape data."""

    class Meta:
        model = dict

    type = "disc"
    center = factory.LazyFunction(lambda: [0.5, 0.6])
    radius = 0.15


class RectFactory(factory.Factory):
    """Factory for generating rectangle shape data."""

    class Meta:
        model = dict

    type = "rect"
    corner_lo = factory.LazyFunction(lambda: [0.35, 0.4])
    corner_hi = factory.LazyFunction(lambda: [0.65, 0.65])


class InclusionFactory(factory.Factory):
    """Factory for generating finite inclusion data."""

    class Meta:
        model = dict

    id = factory.Sequence(lambda n: f"inclusion_{n}")
    kind = "finite"
    lam = 3.0
    mu = 3.0
    shape = factory.SubFactory(DiscFactory)


class RigidInclusionFactory(factory.Factory):
    """Factory for generating rigid inclusion data."""

    class Meta:
        model = dict

    id = factory.Sequence(lambda n: f"rigid_{n}")
    kind = "rigid"
    shape = factory.SubFactory(DiscFactory)


class CavityInclusionFactory(factory.Factory):
    """Factory for generating cavity inclusion data."""

    class Meta:
        model = dict

    id = factory.Sequence(lambda n: f"cavity_{n}")
    kind = "cavity"
    shape = factory.SubFactory(RectFactory)


class ScenarioFactory(factory.Factory):
    """Factory for generating small scenario configurations.

    Data are synthesized on the inversion mesh unless ``mesh`` is overridden.
    """

    class Meta:
        model = dict

    version = 1
    mesh = factory.LazyFunction(
        lambda: {"n": 8, "dirichlet_sides": ["bottom"], "data_refinement": 0}
    )
    background = factory.LazyFunction(lambda: {"lam": 1.0, "mu": 1.0})
    inclusions = factory.LazyFunction(list)
    test = factory.LazyFunction(lambda: {"tau": 1e-9, "grid": 2, "beta": 0.5})
    seed = fuzzy.FuzzyInteger(0, 2**32 - 1)
