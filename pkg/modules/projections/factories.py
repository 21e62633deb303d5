"""
Test Factories for the Projections Module
"""

import factory

from modules.projections.models import ProjectionKind, ProjectionSpec


class ProjectionSpecFactory(factory.Factory):
    class Meta:
        model = ProjectionSpec

    kind = ProjectionKind.SVD
    rank = 2
    seed = factory.Sequence(lambda n: 11 + n)
    permute = True


class HybridSpecFactory(ProjectionSpecFactory):
    kind = ProjectionKind.HYBRID
    rank = 4
    components = (ProjectionKind.DCT, ProjectionKind.SVD)
