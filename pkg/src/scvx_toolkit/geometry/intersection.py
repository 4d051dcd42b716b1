"""Pairwise intersection tests between keep-out sets."""

import logging

import numpy as np

from scvx_toolkit.geometry.projection import interior_point, membership_value, project
from scvx_toolkit.geometry.sets import ConvexSet

logger = logging.getLogger(__name__)

GAP_TOLERANCE = 1e-7
CONSERVATIVE_GAP = 1e-5
MAX_ALTERNATIONS = 1000


def intersects(a: ConvexSet, b: ConvexSet, *, max_iterations: int = MAX_ALTERNATIONS) -> bool:
    """Whether two closed convex sets share a point.

    Decided by alternating projections between the sets. When the iteration stalls or hits the cap
    without closing the gap, a gap below ``1e-5`` is conservatively reported as an intersection.
    """
    if a.dim != b.dim:
        raise ValueError(f"sets have different dimensions: {a.dim} and {b.dim}")

    x = interior_point(a)
    y = project(b, x).projection
    if membership_value(a, y) <= 0.0:
        return True

    gap = np.inf
    for iteration in range(max_iterations):
        x = project(a, y).projection
        y = project(b, x).projection
        current = float(np.linalg.norm(x - y))
        if current <= GAP_TOLERANCE:
            return True
        if gap - current <= 1e-12 * max(1.0, current):
            logger.debug("alternating projections stalled after %d rounds at gap %.3e", iteration + 1, current)
            return current < CONSERVATIVE_GAP
        gap = current
    logger.debug("alternating projections hit the cap with gap %.3e", gap)
    return gap < CONSERVATIVE_GAP
