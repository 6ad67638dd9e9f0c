"""Readers and writers for the three on-disk formats.

Vector data travels as GeoJSON feature collections in planar meter
coordinates. Point clouds come either as whitespace text (one "x y z"
triple per line, '#' starts a comment) or as a little binary container:
an 8-byte magic "SWPC0001", an 8-byte little-endian point count, then
count * 3 IEEE-754 doubles, also little-endian. Elevation rasters use
the ESRI ASCII grid layout with the top row first.

Writers are deterministic: the same in-memory value always produces
the same bytes.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import GeometryError, ParseError, ValidationError
from .geom import MultiPolygon, Point2, Polygon, Polyline

POINT_CLOUD_MAGIC = b"SWPC0001"

Geometry = Union[Point2, Polyline, Polygon, MultiPolygon]
Scalar = Union[str, int, float, bool, None]


@dataclass
class Feature:
    geometry: Geometry
    properties: dict[str, Scalar] = field(default_factory=dict)


@dataclass
class FeatureCollection:
    features: list[Feature] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.features)

    def __iter__(self):
        return iter(self.features)


def _geometry_to_json(geom: Geometry) -> dict:
    if isinstance(geom, Point2):
        return {"type": "Point", "coordinates": [geom.x, geom.y]}
    if isinstance(geom, Polyline):
        return {
            "type": "LineString",
            "coordinates": [[v.x, v.y] for v in geom.vertices],
        }
    if isinstance(geom, Polygon):
        return {"type": "Polygon", "coordinates": _polygon_rings(geom)}
    if isinstance(geom, MultiPolygon):
        return {
            "type": "MultiPolygon",
            "coordinates": [_polygon_rings(p) for p in geom.parts],
        }
    raise ValidationError(f"unsupported geometry type {type(geom).__name__}")


def _polygon_rings(poly: Polygon) -> list[list[list[float]]]:
    rings = []
    for ring in poly.rings():
        coords = [[v.x, v.y] for v in ring]
        coords.append(coords[0])
        rings.append(coords)
    return rings


def _ring_points(ring: list) -> tuple[Point2, ...]:
    return tuple(Point2(float(x), float(y)) for x, y in ring)


def _geometry_from_json(obj: dict) -> Geometry:
    if not isinstance(obj, dict) or "type" not in obj:
        raise GeometryError("geometry must be an object with a 'type'")
    kind = obj["type"]
    coords = obj.get("coordinates")
    if kind == "Point":
        x, y = coords
        return Point2(float(x), float(y))
    if kind == "LineString":
        return Polyline(tuple(Point2(float(x), float(y)) for x, y in coords))
    if kind == "Polygon":
        rings = [_ring_points(r) for r in coords]
        return Polygon(rings[0], tuple(rings[1:]))
    if kind == "MultiPolygon":
        parts = []
        for rings_json in coords:
            rings = [_ring_points(r) for r in rings_json]
            parts.append(Polygon(rings[0], tuple(rings[1:])))
        return MultiPolygon(tuple(parts))
    raise GeometryError(f"unsupported geometry type {kind!r}")


def read_features(path: str | Path) -> FeatureCollection:
    """Load a GeoJSON feature collection.

    Malformed JSON raises ParseError with the byte offset; an invalid
    geometry raises GeometryError naming the feature index.
    """
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParseError(f"{path}: not a FeatureCollection")
    features = []
    for i, raw in enumerate(doc.get("features", [])):
        try:
            geom = _geometry_from_json(raw.get("geometry"))
        except GeometryError as exc:
            raise GeometryError(f"{path}: feature {i}: {exc}") from exc
        props = raw.get("properties") or {}
        if not isinstance(props, dict):
            raise GeometryError(f"{path}: feature {i}: properties must be an object")
        for key, value in props.items():
            if value is not None and not isinstance(value, (str, int, float, bool)):
                raise GeometryError(
                    f"{path}: feature {i}: property {key!r} is not a scalar"
                )
        features.append(Feature(geom, dict(props)))
    return FeatureCollection(features)


def write_features(collection: FeatureCollection, path: str | Path) -> None:
    """Write a feature collection as deterministic, indented GeoJSON."""
    doc = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": _geometry_to_json(f.geometry),
                "properties": f.properties,
            }
            for f in collection.features
        ],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


@dataclass
class PointCloud:
    """A labeled set of 3-D points in meters.

    points is an (N, 3) float64 array; epoch_label identifies the
    survey the points came from.
    """

    points: np.ndarray
    epoch_label: str

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValidationError(f"point array must be (N, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("point cloud contains non-finite coordinates")
        if not self.epoch_label:
            raise ValidationError("epoch label must be nonempty")
        self.points = pts

    def __len__(self) -> int:
        return len(self.points)

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, :2]

    @property
    def z(self) -> np.ndarray:
        return self.points[:, 2]

    def subset(self, mask: np.ndarray) -> "PointCloud":
        return PointCloud(self.points[mask], self.epoch_label)


def read_point_cloud(path: str | Path) -> PointCloud:
    """Read a point cloud, sniffing binary vs text by the magic bytes.

    The epoch label is the file stem.
    """
    path = Path(path)
    data = path.read_bytes()
    if data[: len(POINT_CLOUD_MAGIC)] == POINT_CLOUD_MAGIC:
        points = _parse_binary_cloud(data, path)
    else:
        points = _parse_text_cloud(data, path)
    try:
        return PointCloud(points, path.stem)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def _parse_binary_cloud(data: bytes, path: Path) -> np.ndarray:
    header_len = len(POINT_CLOUD_MAGIC) + 8
    if len(data) < header_len:
        raise ParseError(f"{path}: truncated header")
    (count,) = struct.unpack("<Q", data[len(POINT_CLOUD_MAGIC) : header_len])
    payload = data[header_len:]
    record_size = 3 * 8
    have = len(payload) // record_size
    if have < count or len(payload) < count * record_size:
        raise ParseError(
            f"{path}: truncated at record {have + 1} of {count}"
        )
    points = np.frombuffer(payload[: count * record_size], dtype="<f8")
    return points.reshape(count, 3).astype(float)


def _parse_text_cloud(data: bytes, path: Path) -> np.ndarray:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 text: {exc}") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 3:
            raise ParseError(
                f"{path}: line {lineno}: expected 3 values, found {len(parts)}"
            )
        try:
            rows.append([float(v) for v in parts])
        except ValueError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    if rows:
        return np.array(rows, dtype=float)
    return np.empty((0, 3), dtype=float)


def write_point_cloud(cloud: PointCloud, path: str | Path, binary: bool = True) -> None:
    path = Path(path)
    if binary:
        count = struct.pack("<Q", len(cloud.points))
        payload = np.ascontiguousarray(cloud.points, dtype="<f8").tobytes()
        path.write_bytes(POINT_CLOUD_MAGIC + count + payload)
    else:
        # repr of a Python float round-trips exactly
        lines = [f"{float(x)!r} {float(y)!r} {float(z)!r}" for x, y, z in cloud.points]
        path.write_text("\n".join(lines) + ("\n" if lines else ""))


@dataclass
class ElevationGrid:
    """A regular elevation raster addressed by planar coordinates.

    origin is the lower-left corner of the lower-left cell; values rows
    run south to north (row 0 is the southernmost). Unknown cells are
    stored as NaN.
    """

    origin: Point2
    cell_size: float
    values: np.ndarray
    nodata: float = -9999.0

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValidationError("elevation values must be a 2-D array")
        if self.cell_size <= 0:
            raise ValidationError("cell size must be positive")
        self.values = vals

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    def elevation_at(self, x: float, y: float) -> float | None:
        """Bilinear elevation among the four surrounding cell centers.

        Returns None outside the cell-center lattice or when any of the
        four neighbors is unknown. Exactly at a cell center the stored
        value is returned.
        """
        out = self.elevation_at_many(np.array([[x, y]], dtype=float))[0]
        return None if math.isnan(out) else float(out)

    def elevation_at_many(self, xy: np.ndarray) -> np.ndarray:
        """Vectorized elevation_at; unknown queries come back as NaN."""
        xy = np.asarray(xy, dtype=float)
        if xy.size == 0:
            return np.empty(0, dtype=float)
        gx = (xy[:, 0] - self.origin.x) / self.cell_size - 0.5
        gy = (xy[:, 1] - self.origin.y) / self.cell_size - 0.5
        valid = (gx >= 0) & (gx <= self.ncols - 1) & (gy >= 0) & (gy <= self.nrows - 1)
        out = np.full(len(xy), np.nan)
        if not valid.any():
            return out
        gxv = gx[valid]
        gyv = gy[valid]
        i0 = np.clip(np.floor(gxv).astype(int), 0, max(self.ncols - 2, 0))
        j0 = np.clip(np.floor(gyv).astype(int), 0, max(self.nrows - 2, 0))
        i1 = np.minimum(i0 + 1, self.ncols - 1)
        j1 = np.minimum(j0 + 1, self.nrows - 1)
        fx = gxv - i0
        fy = gyv - j0
        v00 = self.values[j0, i0]
        v10 = self.values[j0, i1]
        v01 = self.values[j1, i0]
        v11 = self.values[j1, i1]
        interp = (
            v00 * (1 - fx) * (1 - fy)
            + v10 * fx * (1 - fy)
            + v01 * (1 - fx) * fy
            + v11 * fx * fy
        )
        known = (
            np.isfinite(v00) & np.isfinite(v10) & np.isfinite(v01) & np.isfinite(v11)
        )
        interp[~known] = np.nan
        out[valid] = interp
        return out


_ASCII_GRID_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


def read_elevation_grid(path: str | Path) -> ElevationGrid:
    """Read an ESRI ASCII grid; header errors name the missing key."""
    path = Path(path)
    tokens = path.read_text().split()
    header: dict[str, float] = {}
    pos = 0
    while pos + 1 < len(tokens) and tokens[pos].lower() in _ASCII_GRID_KEYS:
        key = tokens[pos].lower()
        try:
            header[key] = float(tokens[pos + 1])
        except ValueError as exc:
            raise ParseError(f"{path}: header {key}: {exc}") from exc
        pos += 2
    for key in _ASCII_GRID_KEYS:
        if key not in header:
            raise ParseError(f"{path}: missing header entry {key}")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    if ncols <= 0 or nrows <= 0:
        raise ParseError(f"{path}: grid dimensions must be positive")
    body = tokens[pos:]
    if len(body) != ncols * nrows:
        raise ParseError(
            f"{path}: expected {ncols * nrows} cell values, found {len(body)}"
        )
    try:
        vals = np.array([float(v) for v in body], dtype=float)
    except ValueError as exc:
        raise ParseError(f"{path}: bad cell value: {exc}") from exc
    vals = vals.reshape(nrows, ncols)
    nodata = header["nodata_value"]
    vals[vals == nodata] = np.nan
    # File rows run north to south; storage runs south to north.
    vals = vals[::-1]
    return ElevationGrid(
        Point2(header["xllcorner"], header["yllcorner"]),
        header["cellsize"],
        vals,
        nodata=nodata,
    )


def write_elevation_grid(grid: ElevationGrid, path: str | Path) -> None:
    rows = []
    rows.append(f"ncols {grid.ncols}")
    rows.append(f"nrows {grid.nrows}")
    rows.append(f"xllcorner {float(grid.origin.x)!r}")
    rows.append(f"yllcorner {float(grid.origin.y)!r}")
    rows.append(f"cellsize {float(grid.cell_size)!r}")
    rows.append(f"NODATA_value {float(grid.nodata)!r}")
    for row in grid.values[::-1]:
        cells = [grid.nodata if math.isnan(v) else v for v in row]
        rows.append(" ".join(repr(float(v)) for v in cells))
    Path(path).write_text("\n".join(rows) + "\n")
