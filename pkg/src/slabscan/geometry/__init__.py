from .shapes import (
    CavityPolygon,
    CavityShape,
    Disc,
    Ellipse,
    GeometryError,
    PolygonCavity,
    RadialStar,
    SlabGeometry,
    cavity_distance,
    convex_hull,
    points_in_polygon,
    polygon_distance,
    polygonize_cavity,
    polyline_distance,
    shoelace_area,
    validate_cavity_in_slab,
)
from .meshing import (
    EdgeTag,
    MeshError,
    NestedMeshPair,
    TriMesh,
    build_nested_meshes,
    export_mesh,
    snap_halfwidth,
    triangle_angles,
)

__all__ = [
    "CavityPolygon",
    "CavityShape",
    "Disc",
    "EdgeTag",
    "Ellipse",
    "GeometryError",
    "MeshError",
    "NestedMeshPair",
    "PolygonCavity",
    "RadialStar",
    "SlabGeometry",
    "TriMesh",
    "build_nested_meshes",
    "cavity_distance",
    "convex_hull",
    "export_mesh",
    "points_in_polygon",
    "polygon_distance",
    "polygonize_cavity",
    "polyline_distance",
    "shoelace_area",
    "snap_halfwidth",
    "triangle_angles",
    "validate_cavity_in_slab",
]
