"""Face grids, fractals and the multiscale flow from the origin."""

from .assemble import AssemblyReport, assemble_flow, event_report, origin_flow, scale_blocks
from .boxflow import box_flow_paths, flow_box
from .cone import ConeFlow, cone_boxes, cone_flow
from .env import CarpetError, CleanEnvironment, Environment, SampleEnvironment
from .faces import Face, FaceGrid, anchor, face_grid, face_of, fractal, good_centers, small_face_points, units
from .flow import LatticeFlow
from .paths import bundle_box, bundle_k, coarse_grid, coarse_path17, path0

__all__ = [
    "AssemblyReport",
    "CarpetError",
    "CleanEnvironment",
    "ConeFlow",
    "Environment",
    "Face",
    "FaceGrid",
    "LatticeFlow",
    "SampleEnvironment",
    "anchor",
    "assemble_flow",
    "box_flow_paths",
    "bundle_box",
    "bundle_k",
    "coarse_grid",
    "coarse_path17",
    "cone_boxes",
    "cone_flow",
    "event_report",
    "face_grid",
    "face_of",
    "flow_box",
    "fractal",
    "good_centers",
    "origin_flow",
    "path0",
    "scale_blocks",
    "small_face_points",
    "units",
]
