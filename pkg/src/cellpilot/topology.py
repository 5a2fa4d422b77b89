"""Geographic scenario model: cells, buildings, streets, and the geometric
queries the simulator needs (wall crossings, distances, valid UE placement).

Topology files are versioned JSON with extension ``.topo`` (schema in
README). Synthetic scenarios at the scale of the three study regions are
bundled under ``cellpilot/data`` and can be regenerated with
:func:`generate_topology`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

TOPOLOGY_FORMAT = "cellpilot-topology"
TOPOLOGY_VERSION = 1

DEFAULT_TX_POWER_DBM = 43.0
DEFAULT_BEAMWIDTH_DEG = 120.0


class TopologyError(Exception):
    """Parse or validation failure; message names the offending field."""


@dataclass(frozen=True)
class Tower:
    id: str
    x: float
    y: float


@dataclass(frozen=True)
class Cell:
    id: str
    tower_id: str
    position: tuple[float, float]
    azimuth: float          # degrees [0, 360), clockwise from +y
    beamwidth: float        # degrees (0, 360]
    frequency: float        # Hz
    bandwidth: float        # Hz
    priority: int           # 0..7, higher = preferred layer
    tx_power: float = DEFAULT_TX_POWER_DBM  # dBm


@dataclass(frozen=True)
class PlacementZone:
    kind: str               # "street" | "building"
    geometry: np.ndarray    # polyline (street) or polygon (building), Vx2


@dataclass
class Topology:
    """Immutable after load; safe for concurrent read by parallel episodes."""

    area_bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    towers: list[Tower]
    cells: list[Cell]
    buildings: list[np.ndarray]   # convex simple polygons, Vx2 (no repeated first vertex)
    streets: list[np.ndarray]     # polylines, Px2

    # derived arrays, filled in __post_init__ for vectorized access
    cell_xy: np.ndarray = field(init=False)
    cell_azimuth: np.ndarray = field(init=False)
    cell_beamwidth: np.ndarray = field(init=False)
    cell_frequency: np.ndarray = field(init=False)
    cell_bandwidth: np.ndarray = field(init=False)
    cell_priority: np.ndarray = field(init=False)
    cell_tx_power: np.ndarray = field(init=False)
    _wall_edges: np.ndarray = field(init=False)     # Ex4: x1,y1,x2,y2
    _wall_vertices: np.ndarray = field(init=False)  # Vx2

    def __post_init__(self):
        self.cell_xy = np.array([c.position for c in self.cells], dtype=float).reshape(-1, 2)
        self.cell_azimuth = np.array([c.azimuth for c in self.cells], dtype=float)
        self.cell_beamwidth = np.array([c.beamwidth for c in self.cells], dtype=float)
        self.cell_frequency = np.array([c.frequency for c in self.cells], dtype=float)
        self.cell_bandwidth = np.array([c.bandwidth for c in self.cells], dtype=float)
        self.cell_priority = np.array([c.priority for c in self.cells], dtype=int)
        self.cell_tx_power = np.array([c.tx_power for c in self.cells], dtype=float)
        edges, verts = [], []
        for poly in self.buildings:
            rolled = np.roll(poly, -1, axis=0)
            edges.append(np.hstack([poly, rolled]))
            verts.append(poly)
        self._wall_edges = (
            np.vstack(edges) if edges else np.zeros((0, 4), dtype=float)
        )
        self._wall_vertices = (
            np.vstack(verts) if verts else np.zeros((0, 2), dtype=float)
        )

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell_index(self, cell_id: str) -> int:
        for i, c in enumerate(self.cells):
            if c.id == cell_id:
                return i
        raise KeyError(cell_id)

    def placement_zones(self) -> list[PlacementZone]:
        zones = [PlacementZone("street", s) for s in self.streets]
        zones += [PlacementZone("building", b) for b in self.buildings]
        return zones


# ---------------------------------------------------------------------------
# Loading / validation
# ---------------------------------------------------------------------------

def _polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _segments_properly_intersect(p1, p2, q1, q2) -> bool:
    d = lambda a, b, c: (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    d1, d2 = d(q1, q2, p1), d(q1, q2, p2)
    d3, d4 = d(p1, p2, q1), d(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def _polygon_is_simple(poly: np.ndarray) -> bool:
    n = len(poly)
    for i in range(n):
        a1, a2 = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # shared-vertex neighbors
            b1, b2 = poly[j], poly[(j + 1) % n]
            if _segments_properly_intersect(a1, a2, b1, b2):
                return False
    return True


def _bbox_overlaps(points: np.ndarray, bounds) -> bool:
    xmin, ymin, xmax, ymax = bounds
    return (
        points[:, 0].max() >= xmin
        and points[:, 0].min() <= xmax
        and points[:, 1].max() >= ymin
        and points[:, 1].min() <= ymax
    )


def validate_topology(topo: Topology) -> None:
    """Raise TopologyError naming the first violated invariant."""
    xmin, ymin, xmax, ymax = topo.area_bounds
    if not (xmax > xmin and ymax > ymin):
        raise TopologyError("area_bounds: degenerate rectangle")
    seen_towers = set()
    for t in topo.towers:
        if t.id in seen_towers:
            raise TopologyError(f"towers[{t.id}]: duplicate tower id")
        seen_towers.add(t.id)
    seen_cells = set()
    for i, c in enumerate(topo.cells):
        ctx = f"cells[{i}] (id={c.id})"
        if c.id in seen_cells:
            raise TopologyError(f"{ctx}: duplicate cell id")
        seen_cells.add(c.id)
        if c.tower_id not in seen_towers:
            raise TopologyError(f"{ctx}: unknown tower '{c.tower_id}'")
        x, y = c.position
        if not (xmin <= x <= xmax and ymin <= y <= ymax):
            raise TopologyError(f"{ctx}: position outside area_bounds")
        if not c.bandwidth > 0:
            raise TopologyError(f"{ctx}: bandwidth must be > 0")
        if not c.frequency > 0:
            raise TopologyError(f"{ctx}: frequency must be > 0")
        if not (0 < c.beamwidth <= 360):
            raise TopologyError(f"{ctx}: beamwidth must be in (0, 360]")
        if not (0 <= c.azimuth < 360):
            raise TopologyError(f"{ctx}: azimuth must be in [0, 360)")
        if not (0 <= c.priority <= 7):
            raise TopologyError(f"{ctx}: priority must be in 0..7")
    for i, poly in enumerate(topo.buildings):
        if len(poly) < 3:
            raise TopologyError(f"buildings[{i}]: polygon needs >= 3 vertices")
        if not _polygon_is_simple(poly):
            raise TopologyError(f"buildings[{i}]: polygon is self-intersecting")
        if not _bbox_overlaps(poly, topo.area_bounds):
            raise TopologyError(f"buildings[{i}]: polygon does not intersect area_bounds")
    for i, line in enumerate(topo.streets):
        if len(line) < 2:
            raise TopologyError(f"streets[{i}]: polyline needs >= 2 vertices")
        if not _bbox_overlaps(line, topo.area_bounds):
            raise TopologyError(f"streets[{i}]: polyline does not intersect area_bounds")


def load_topology(path) -> Topology:
    """Load and validate a ``.topo`` file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise TopologyError(
            f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if doc.get("format") != TOPOLOGY_FORMAT:
        raise TopologyError(f"{path}: format: expected '{TOPOLOGY_FORMAT}'")
    if doc.get("version") != TOPOLOGY_VERSION:
        raise TopologyError(
            f"{path}: version: expected {TOPOLOGY_VERSION}, got {doc.get('version')}"
        )

    def need(obj, key, ctx):
        if key not in obj:
            raise TopologyError(f"{path}: {ctx}: missing field '{key}'")
        return obj[key]

    bounds = need(doc, "area_bounds", "top level")
    if not (isinstance(bounds, list) and len(bounds) == 4):
        raise TopologyError(f"{path}: area_bounds: expected [xmin, ymin, xmax, ymax]")
    towers = [
        Tower(str(need(t, "id", f"towers[{i}]")),
              float(need(t, "x", f"towers[{i}]")),
              float(need(t, "y", f"towers[{i}]")))
        for i, t in enumerate(need(doc, "towers", "top level"))
    ]
    tower_xy = {t.id: (t.x, t.y) for t in towers}
    cells = []
    for i, c in enumerate(need(doc, "cells", "top level")):
        ctx = f"cells[{i}]"
        tower_id = str(need(c, "tower", ctx))
        if tower_id not in tower_xy:
            raise TopologyError(f"{path}: {ctx}: unknown tower '{tower_id}'")
        cells.append(
            Cell(
                id=str(need(c, "id", ctx)),
                tower_id=tower_id,
                position=tower_xy[tower_id],
                azimuth=float(need(c, "azimuth_deg", ctx)) % 360.0,
                beamwidth=float(c.get("beamwidth_deg", DEFAULT_BEAMWIDTH_DEG)),
                frequency=float(need(c, "frequency_hz", ctx)),
                bandwidth=float(need(c, "bandwidth_hz", ctx)),
                priority=int(need(c, "priority", ctx)),
                tx_power=float(c.get("tx_power_dbm", DEFAULT_TX_POWER_DBM)),
            )
        )
    buildings = [np.array(p, dtype=float) for p in doc.get("buildings", [])]
    streets = [np.array(p, dtype=float) for p in doc.get("streets", [])]
    topo = Topology(tuple(float(v) for v in bounds), towers, cells, buildings, streets)
    validate_topology(topo)
    return topo


def topology_doc(topo: Topology) -> dict:
    """Canonical JSON-ready document; also the basis for content hashing."""
    return {
        "format": TOPOLOGY_FORMAT,
        "version": TOPOLOGY_VERSION,
        "area_bounds": list(topo.area_bounds),
        "towers": [{"id": t.id, "x": t.x, "y": t.y} for t in topo.towers],
        "cells": [
            {
                "id": c.id,
                "tower": c.tower_id,
                "azimuth_deg": c.azimuth,
                "beamwidth_deg": c.beamwidth,
                "frequency_hz": c.frequency,
                "bandwidth_hz": c.bandwidth,
                "priority": c.priority,
                "tx_power_dbm": c.tx_power,
            }
            for c in topo.cells
        ],
        "buildings": [p.tolist() for p in topo.buildings],
        "streets": [p.tolist() for p in topo.streets],
    }


def topology_fingerprint(topo: Topology) -> str:
    """sha256 over the canonical document; identifies topology content."""
    import hashlib

    blob = json.dumps(topology_doc(topo), sort_keys=True,
                      separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def save_topology(topo: Topology, path) -> None:
    with open(path, "w") as fh:
        json.dump(topology_doc(topo), fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Geometric queries
# ---------------------------------------------------------------------------

def wall_crossings(a, b, topo: Topology) -> int:
    """Number of building wall crossings of the open segment (a, b).

    Counts edges whose interior the segment crosses transversally, plus
    polygon vertices lying strictly inside the open segment (a vertex hit
    counts once, not once per incident edge). Collinear overlap with an
    edge therefore contributes only through that edge's vertices.
    """
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    if ax == bx and ay == by:
        raise ValueError("wall_crossings: segment endpoints coincide")
    edges = topo._wall_edges
    if len(edges) == 0:
        return 0
    dx, dy = bx - ax, by - ay
    # orientation of each edge endpoint relative to the segment line
    d1 = dx * (edges[:, 1] - ay) - dy * (edges[:, 0] - ax)
    d2 = dx * (edges[:, 3] - ay) - dy * (edges[:, 2] - ax)
    # orientation of the segment endpoints relative to each edge line
    ex, ey = edges[:, 2] - edges[:, 0], edges[:, 3] - edges[:, 1]
    d3 = ex * (ay - edges[:, 1]) - ey * (ax - edges[:, 0])
    d4 = ex * (by - edges[:, 1]) - ey * (bx - edges[:, 0])
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)
    count = int(np.count_nonzero(proper))
    # vertices exactly on the open segment, each counted once
    verts = topo._wall_vertices
    cross = dx * (verts[:, 1] - ay) - dy * (verts[:, 0] - ax)
    dot = (verts[:, 0] - ax) * dx + (verts[:, 1] - ay) * dy
    seg_len2 = dx * dx + dy * dy
    on_open = (cross == 0) & (dot > 0) & (dot < seg_len2)
    count += int(np.count_nonzero(on_open))
    return count


def wall_crossings_to_cells(ue_xy: np.ndarray, topo: Topology) -> np.ndarray:
    """Crossing counts for every (UE, cell) pair; shape (N, C).

    Same counting rule as :func:`wall_crossings`, vectorized over pairs.
    """
    n, c = len(ue_xy), topo.n_cells
    out = np.zeros((n, c), dtype=int)
    if len(topo._wall_edges) == 0 or n == 0 or c == 0:
        return out
    for j in range(c):
        cx, cy = topo.cell_xy[j]
        dx = ue_xy[:, 0] - cx          # (N,)
        dy = ue_xy[:, 1] - cy
        edges = topo._wall_edges       # (E, 4)
        p1x = edges[:, 0] - cx
        p1y = edges[:, 1] - cy
        p2x = edges[:, 2] - cx
        p2y = edges[:, 3] - cy
        d1 = np.outer(dx, p1y) - np.outer(dy, p1x)       # (N, E)
        d2 = np.outer(dx, p2y) - np.outer(dy, p2x)
        ex, ey = edges[:, 2] - edges[:, 0], edges[:, 3] - edges[:, 1]
        d3 = ey * p1x - ex * p1y                          # (E,) cell vs edge line
        d4 = np.outer(dy, ex) - np.outer(dx, ey) + d3     # (N, E) UE vs edge line
        proper = (d1 * d2 < 0) & (d3 * d4 < 0)
        verts = topo._wall_vertices                       # (V, 2)
        vx, vy = verts[:, 0] - cx, verts[:, 1] - cy
        cross = np.outer(dx, vy) - np.outer(dy, vx)       # (N, V)
        dot = np.outer(dx, vx) + np.outer(dy, vy)
        seg_len2 = (dx * dx + dy * dy)[:, None]
        on_open = (cross == 0) & (dot > 0) & (dot < seg_len2)
        out[:, j] = proper.sum(axis=1) + on_open.sum(axis=1)
    return out


def _point_in_polygon(x: float, y: float, poly: np.ndarray) -> bool:
    inside = False
    n = len(poly)
    j = n - 1
    for i in range(n):
        xi, yi = poly[i]
        xj, yj = poly[j]
        if (yi > y) != (yj > y) and x < (xj - xi) * (y - yi) / (yj - yi) + xi:
            inside = not inside
        j = i
    return inside


def _polyline_lengths(line: np.ndarray) -> np.ndarray:
    return np.hypot(np.diff(line[:, 0]), np.diff(line[:, 1]))


def polyline_point_at(line: np.ndarray, arc: float) -> tuple[float, float]:
    """Point at arc-length `arc` along the polyline (clamped to its ends)."""
    seg = _polyline_lengths(line)
    total = seg.sum()
    arc = min(max(arc, 0.0), total)
    acc = 0.0
    for i, s in enumerate(seg):
        if arc <= acc + s or i == len(seg) - 1:
            t = 0.0 if s == 0 else (arc - acc) / s
            p0, p1 = line[i], line[i + 1]
            return (float(p0[0] + t * (p1[0] - p0[0])), float(p0[1] + t * (p1[1] - p0[1])))
        acc += s
    p = line[-1]
    return (float(p[0]), float(p[1]))


@dataclass
class Placement:
    point: tuple[float, float]
    indoor: bool
    street_index: int = -1   # valid when not indoor
    arc_pos: float = 0.0     # arc-length along the street polyline


def sample_placement(topo: Topology, rng: np.random.Generator,
                     building_weight: float = 0.5) -> Placement:
    """Draw one UE placement: streets vs buildings with `building_weight`,
    then uniform along aggregate street arc-length, or area-weighted polygon
    choice with rejection sampling inside it.

    Draw order per call is fixed (zone, then location) so placements are a
    pure function of the rng state.
    """
    has_streets = len(topo.streets) > 0
    has_buildings = len(topo.buildings) > 0
    if not has_streets and not has_buildings:
        raise TopologyError("topology has no placement zones (no streets or buildings)")
    if has_streets and has_buildings:
        indoor = rng.random() < building_weight
    else:
        indoor = has_buildings
    if not indoor:
        lengths = np.array([_polyline_lengths(s).sum() for s in topo.streets])
        target = rng.random() * lengths.sum()
        idx = int(np.searchsorted(np.cumsum(lengths), target, side="right"))
        idx = min(idx, len(topo.streets) - 1)
        arc = target - (np.cumsum(lengths)[idx] - lengths[idx])
        point = polyline_point_at(topo.streets[idx], arc)
        return Placement(point, indoor=False, street_index=idx, arc_pos=float(arc))
    areas = np.array([_polygon_area(b) for b in topo.buildings])
    target = rng.random() * areas.sum()
    idx = int(np.searchsorted(np.cumsum(areas), target, side="right"))
    idx = min(idx, len(topo.buildings) - 1)
    poly = topo.buildings[idx]
    xmin, ymin = poly.min(axis=0)
    xmax, ymax = poly.max(axis=0)
    while True:
        x = xmin + rng.random() * (xmax - xmin)
        y = ymin + rng.random() * (ymax - ymin)
        if _point_in_polygon(x, y, poly):
            return Placement((float(x), float(y)), indoor=True)


def sample_ue_position(topo: Topology, rng: np.random.Generator,
                       building_weight: float = 0.5) -> tuple[tuple[float, float], bool]:
    """(point, indoor) for one UE; deterministic given the rng state."""
    p = sample_placement(topo, rng, building_weight)
    return p.point, p.indoor


# ---------------------------------------------------------------------------
# Synthetic scenario generator
# ---------------------------------------------------------------------------

# (frequency Hz, bandwidth Hz, priority, tx dBm); the low band is the
# coverage layer, higher bands are capacity layers preferred by the
# hierarchy. Nominal tx powers are calibrated so received levels at
# preset-scale distances straddle the reselection threshold range
# (roughly -45..-65 dBm under free-space loss), with slightly shorter
# reach for higher bands.
BAND_PLAN = [
    (7.0e8, 10e6, 1, 20.0),
    (1.8e9, 20e6, 2, 27.0),
    (2.6e9, 20e6, 3, 28.0),
    (3.5e9, 80e6, 4, 27.0),
]

GENERATOR_PRESETS = {
    # area in meters; bands index into BAND_PLAN, cycled over sector slots.
    # per_tower_bands (desk) instead pins each tower to a band list; tx
    # overrides the band-plan powers band-by-band.
    "desk": dict(towers=2, cells=6, area=(300.0, 220.0),
                 per_tower_bands=[[1], [2]], tx={1: 36.5, 2: 8.0},
                 buildings=8, streets=(3, 2)),
    "baseline": dict(towers=2, cells=15, area=(1720.0, 1370.0), bands=[0, 1, 2],
                     tx={2: 31.0}, buildings=30, streets=(6, 5)),
    "alt": dict(towers=2, cells=15, area=(1720.0, 1370.0), bands=[0, 1, 2],
                tx={2: 31.0}, buildings=30, streets=(6, 5)),
    "large": dict(towers=6, cells=48, area=(2700.0, 2260.0), bands=[0, 1, 2, 3],
                  buildings=60, streets=(8, 7)),
}


def generate_topology(preset: str | None = None, seed: int = 0, *,
                      towers: int | None = None, cells: int | None = None,
                      area: tuple[float, float] | None = None,
                      bands: list[int] | None = None,
                      buildings: int | None = None,
                      streets: tuple[int, int] | None = None) -> Topology:
    """Deterministic synthetic scenario for a given (preset/flags, seed).

    Cells are assigned round-robin over (band, sector azimuth, tower)
    unless the preset pins per-tower band lists; the band plan fixes
    frequency, bandwidth, priority, and tx power per band.
    """
    params = dict(GENERATOR_PRESETS.get(preset or "", {}))
    if not params and preset is not None and preset not in GENERATOR_PRESETS:
        raise TopologyError(f"unknown preset '{preset}'")
    if towers is not None:
        params["towers"] = towers
    if cells is not None:
        params["cells"] = cells
    if area is not None:
        params["area"] = area
    if bands is not None:
        params["bands"] = bands
        params.pop("per_tower_bands", None)
    if buildings is not None:
        params["buildings"] = buildings
    if streets is not None:
        params["streets"] = streets
    params.setdefault("bands", [0])
    for key in ("towers", "cells", "area", "buildings", "streets"):
        if key not in params:
            raise TopologyError(f"generator: missing parameter '{key}'")
    if params["towers"] < 1 or params["cells"] < 1:
        raise TopologyError("generator: towers and cells must be >= 1")
    w, h = params["area"]
    if w <= 0 or h <= 0:
        raise TopologyError("generator: area must be positive")
    tx_override = params.get("tx", {})

    def band(i):
        f, bw_, pr, tx = BAND_PLAN[i]
        return f, bw_, pr, tx_override.get(i, tx)

    rng = np.random.default_rng(seed)
    n_towers = params["towers"]
    tower_list = []
    if n_towers == 2:
        # the two-tower study layout: towers at thirds of the width, mid-height
        for k, fx in enumerate((1.0 / 3.0, 2.0 / 3.0)):
            cx = fx * w + (rng.random() - 0.5) * 0.06 * w
            cy = 0.5 * h + (rng.random() - 0.5) * 0.06 * h
            tower_list.append(Tower(f"T{k + 1}", round(cx, 1), round(cy, 1)))
    else:
        grid = math.ceil(math.sqrt(n_towers))
        k = 0
        for gy in range(grid):
            for gx in range(grid):
                if k >= n_towers:
                    break
                cx = (gx + 0.5) / grid * w + (rng.random() - 0.5) * 0.3 * w / grid
                cy = (gy + 0.5) / grid * h + (rng.random() - 0.5) * 0.3 * h / grid
                tower_list.append(Tower(f"T{k + 1}", round(cx, 1), round(cy, 1)))
                k += 1

    n_cells = params["cells"]
    offsets = [float(rng.integers(0, 120)) for _ in range(n_towers)]
    slots = []
    if "per_tower_bands" in params:
        for t_i, band_list in enumerate(params["per_tower_bands"]):
            for b in band_list:
                for s_i in range(3):
                    slots.append((t_i, s_i, b))
    else:
        band_cycle = params["bands"]
        b_i = t_i = s_i = 0
        while len(slots) < n_cells:
            slots.append((t_i % n_towers, s_i % 3, band_cycle[b_i % len(band_cycle)]))
            t_i += 1
            if t_i % n_towers == 0:
                s_i += 1
                if s_i % 3 == 0:
                    b_i += 1
    if len(slots) < n_cells:
        raise TopologyError("generator: per_tower_bands yields fewer slots than cells")
    cell_list = []
    for slot, (t_i, s_i, b_i) in enumerate(slots[:n_cells]):
        freq, bw_, pr, tx = band(b_i)
        tower = tower_list[t_i]
        az = (offsets[t_i] + 120.0 * s_i) % 360.0
        cell_list.append(
            Cell(
                id=f"C{slot + 1:02d}",
                tower_id=tower.id,
                position=(tower.x, tower.y),
                azimuth=az,
                beamwidth=DEFAULT_BEAMWIDTH_DEG,
                frequency=freq,
                bandwidth=bw_,
                priority=pr,
                tx_power=tx,
            )
        )

    # street grid: full-span horizontal and vertical polylines
    nx, ny = params["streets"]
    street_list = []
    for i in range(ny):
        y = (i + 0.5) / ny * h
        street_list.append(np.array([[0.0, y], [w, y]]))
    for i in range(nx):
        x = (i + 0.5) / nx * w
        street_list.append(np.array([[x, 0.0], [x, h]]))

    # rectangular buildings scattered between streets
    building_list = []
    for _ in range(params["buildings"]):
        bw_ = 20.0 + rng.random() * 40.0
        bh_ = 20.0 + rng.random() * 40.0
        x0 = rng.random() * (w - bw_)
        y0 = rng.random() * (h - bh_)
        building_list.append(
            np.array([[x0, y0], [x0 + bw_, y0], [x0 + bw_, y0 + bh_], [x0, y0 + bh_]])
        )

    topo = Topology((0.0, 0.0, float(w), float(h)), tower_list, cell_list,
                    building_list, street_list)
    validate_topology(topo)
    return topo
