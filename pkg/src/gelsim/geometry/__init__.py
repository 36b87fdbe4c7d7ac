from .mesh import (
    TriMesh,
    load_mesh,
    load_obj,
    load_stl,
    save_obj,
    save_stl,
    make_box,
    make_cylinder,
    make_hex_nut,
    make_icosphere,
    make_socket,
    make_tube,
)
from .sdf import (
    SdfGrid,
    SdfQuery,
    build_sdf,
    point_triangle_distance,
    query_sdf,
    read_sdf_cache,
    relative_penetration_rate,
    write_sdf_cache,
)

__all__ = [
    "TriMesh", "load_mesh", "load_obj", "load_stl", "save_obj", "save_stl",
    "make_box", "make_cylinder", "make_hex_nut", "make_icosphere",
    "make_socket", "make_tube",
    "SdfGrid", "SdfQuery", "build_sdf", "point_triangle_distance",
    "query_sdf", "read_sdf_cache", "relative_penetration_rate",
    "write_sdf_cache",
]
