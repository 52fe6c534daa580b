"""Small 2D convex polygon helpers: clipping, area, hulls and box footprints.

Polygons are (n, 2) float arrays with vertices in counter-clockwise order.
"""

from __future__ import annotations

import numpy as np


class DegeneratePolygonError(ValueError):
    pass


def polygon_area(poly):
    """Shoelace area; counter-clockwise polygons give positive values."""
    poly = np.asarray(poly, float)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_convex(subject, clip):
    """Sutherland-Hodgman clip of a convex subject polygon against a convex
    clip polygon (both CCW). Returns the intersection polygon (possibly
    empty) as an (m, 2) array."""
    subject = [tuple(p) for p in np.asarray(subject, float)]
    clip = np.asarray(clip, float)
    if len(subject) == 0 or len(clip) < 3:
        return np.zeros((0, 2))

    output = subject
    for i in range(len(clip)):
        a = clip[i]
        b = clip[(i + 1) % len(clip)]
        ex, ey = b[0] - a[0], b[1] - a[1]

        def inside(p):
            return ex * (p[1] - a[1]) - ey * (p[0] - a[0]) >= 0.0

        def intersect(p, q):
            dx, dy = q[0] - p[0], q[1] - p[1]
            denom = ex * dy - ey * dx
            if denom == 0.0:
                return q
            t = (ex * (a[1] - p[1]) - ey * (a[0] - p[0])) / denom
            return (p[0] + t * dx, p[1] + t * dy)

        input_list = output
        output = []
        if not input_list:
            break
        s = input_list[-1]
        for e in input_list:
            if inside(e):
                if not inside(s):
                    output.append(intersect(s, e))
                output.append(e)
            elif inside(s):
                output.append(intersect(s, e))
            s = e
    return np.asarray(output, float).reshape(-1, 2)


def intersection_area(subject, clip):
    inter = clip_convex(subject, clip)
    if len(inter) < 3:
        return 0.0
    return abs(polygon_area(inter))


def convex_hull(points):
    """Andrew monotone chain hull, CCW. Returns an (m, 2) array."""
    pts = sorted({(float(x), float(y)) for x, y in np.asarray(points, float)})
    if len(pts) <= 2:
        return np.asarray(pts, float).reshape(-1, 2)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.asarray(lower[:-1] + upper[:-1], float)


def box_footprint(position, rotation, half_extents):
    """Convex hull of a box's eight corners projected to the XY plane.

    position (3,), rotation (3,3), half_extents (3,).
    """
    hx, hy, hz = half_extents
    corners = np.array([
        [sx * hx, sy * hy, sz * hz]
        for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)
    ])
    world = np.asarray(position)[None, :] + corners @ np.asarray(rotation).T
    return convex_hull(world[:, :2])


def square(center_x, center_y, side):
    """Axis-aligned CCW square."""
    h = 0.5 * side
    return np.array([
        [center_x - h, center_y - h],
        [center_x + h, center_y - h],
        [center_x + h, center_y + h],
        [center_x - h, center_y + h],
    ])
