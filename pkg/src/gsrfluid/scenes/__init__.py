from .base import (AnalyticField, BallObstacle, BoundaryPiece, BoxSide,
                   Circle, KarmanSetup, MeshObstacle, MeshSurface,
                   NORMAL_FLUX, SceneConfig, Segment, SphereSurface,
                   VELOCITY, box_sides, flux_condition, zero_velocity)
from .catalogue import (BUILDERS, build_scene, bunny_mesh,
                        catalogue_summary, scene_names,
                        vortices_pass_particles)
from .mesh import TriangleMesh, load_obj, save_obj
from .sampling import SceneSampler, sample_boundary, sample_interior
from . import fields

__all__ = [
    "AnalyticField", "BallObstacle", "BoundaryPiece", "BoxSide", "Circle",
    "KarmanSetup", "MeshObstacle", "MeshSurface", "NORMAL_FLUX",
    "SceneConfig", "Segment", "SphereSurface", "VELOCITY", "box_sides",
    "flux_condition", "zero_velocity", "BUILDERS", "build_scene",
    "bunny_mesh", "catalogue_summary", "scene_names",
    "vortices_pass_particles", "TriangleMesh", "load_obj", "save_obj",
    "SceneSampler", "sample_boundary", "sample_interior", "fields",
]
