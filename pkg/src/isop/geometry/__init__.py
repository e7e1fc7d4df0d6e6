"""Sets, domains and their raster representations."""
from .raster import (
    Hyperplane,
    RasterSet,
    ball_radius_for_volume,
    ball_volume,
    dilate,
    hausdorff_distance,
    reflect,
    volume,
)
from .domains import (
    Annulus,
    Ball,
    BallIntersection,
    BallUnion,
    Domain,
    Polygon2D,
    RasterDomain,
    Rectangle,
    SlitDisk,
    channel,
    rasterize,
    schwarz_ball,
)
from .io import load_raster, save_raster

__all__ = [
    "Hyperplane", "RasterSet", "ball_radius_for_volume", "ball_volume", "dilate",
    "hausdorff_distance", "reflect", "volume", "Annulus", "Ball", "BallIntersection",
    "BallUnion", "Domain", "Polygon2D", "RasterDomain", "Rectangle", "SlitDisk",
    "channel", "rasterize", "schwarz_ball", "load_raster", "save_raster",
]
