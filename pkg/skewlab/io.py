"""File formats.

- images: binary PPM (P6), optionally a PNG copy;
- escape grids: header of six little-endian float64 (nx, ny, x0, x1, y0, y1)
  followed by the row-major int32 counts, top row first;
- point clouds: CSV with columns re,im or re,im,wre,wim;
- reports and estimates: JSON with sorted keys.
"""
import hashlib
import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel

from skewlab.family import LocusLabel
from skewlab.invariant import AccumulationEstimate, StableClassification
from skewlab.julia import EscapeGrid, GridSpec, PointCloud

logger = logging.getLogger(__name__)

BLACK = (0, 0, 0)
WHITE = (255, 255, 255)
RED = (255, 0, 0)
BLUE = (0, 0, 255)

LOCUS_PALETTE = {
    LocusLabel.Connected: BLACK,
    LocusLabel.Escaping: WHITE,
    LocusLabel.BoundaryWithinTol: RED,
    LocusLabel.Inconclusive: BLUE,
}

_GRID_HEADER = np.dtype("<f8")
_GRID_PAYLOAD = np.dtype("<i4")


def escape_image(grid: EscapeGrid) -> np.ndarray:
    """Bounded pixels black, escaping pixels white."""
    rgb = np.full(grid.iters.shape + (3,), 255, dtype=np.uint8)
    rgb[grid.bounded] = BLACK
    return rgb


def locus_image(labels: np.ndarray) -> np.ndarray:
    rgb = np.zeros(labels.shape + (3,), dtype=np.uint8)
    for label, color in LOCUS_PALETTE.items():
        rgb[labels == label] = color
    return rgb


def mark_points(rgb: np.ndarray, spec: GridSpec, pts: np.ndarray, color: Tuple[int, int, int] = RED) -> np.ndarray:
    """Paint the pixels containing ``pts``; points outside the window are skipped."""
    out = rgb.copy()
    x0, x1, y0, y1 = spec.bounds
    col = np.rint((pts.real - x0) / spec.dx).astype(int)
    row = np.rint((y1 - pts.imag) / spec.dy).astype(int)
    inside = (col >= 0) & (col < spec.nx) & (row >= 0) & (row < spec.ny)
    out[row[inside], col[inside]] = color
    return out


def write_ppm(path: Union[str, Path], rgb: np.ndarray) -> Path:
    path = Path(path)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected an (ny, nx, 3) image, got {rgb.shape}")
    ny, nx, _ = rgb.shape
    path.write_bytes(f"P6\n{nx} {ny}\n255\n".encode("ascii") + np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())
    return path


def read_ppm(path: Union[str, Path]) -> np.ndarray:
    """Decode a PPM image; header comments and any whitespace layout are accepted."""
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as image:
            if image.format != "PPM" or image.mode != "RGB":
                raise ValueError(f"{path} is not an 8-bit binary PPM")
            return np.asarray(image, dtype=np.uint8).copy()
    except UnidentifiedImageError as e:
        raise ValueError(f"{path} is not an 8-bit binary PPM") from e


def write_png(path: Union[str, Path], rgb: np.ndarray) -> Path:
    from PIL import Image

    path = Path(path)
    Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8), mode="RGB").save(path)
    return path


def write_grid(path: Union[str, Path], grid: EscapeGrid) -> Path:
    path = Path(path)
    spec = grid.spec
    x0, x1, y0, y1 = spec.bounds
    header = np.array([spec.nx, spec.ny, x0, x1, y0, y1], dtype=_GRID_HEADER)
    path.write_bytes(header.tobytes() + np.ascontiguousarray(grid.iters, dtype=_GRID_PAYLOAD).tobytes())
    return path


def read_grid(path: Union[str, Path]) -> Tuple[GridSpec, np.ndarray]:
    data = Path(path).read_bytes()
    header = np.frombuffer(data[: 6 * _GRID_HEADER.itemsize], dtype=_GRID_HEADER)
    nx, ny = int(header[0]), int(header[1])
    spec = GridSpec.box(*header[2:6].tolist(), nx=nx, ny=ny)
    iters = np.frombuffer(data[6 * _GRID_HEADER.itemsize :], dtype=_GRID_PAYLOAD).reshape(ny, nx)
    return spec, iters


def write_cloud_csv(path: Union[str, Path], cloud: PointCloud) -> Path:
    path = Path(path)
    header = "re,im" if cloud.dimension == 1 else "re,im,wre,wim"
    np.savetxt(path, cloud.real_coords(), delimiter=",", header=header, comments="", fmt="%.17g")
    return path


def read_cloud_csv(path: Union[str, Path]) -> np.ndarray:
    coords = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if coords.shape[1] == 2:
        return coords[:, 0] + 1j * coords[:, 1]
    return np.column_stack([coords[:, 0] + 1j * coords[:, 1], coords[:, 2] + 1j * coords[:, 3]])


def write_curves_csv(path: Union[str, Path], curves: Dict[str, np.ndarray]) -> Path:
    path = Path(path)
    lines = ["curve,t,a,b"]
    for name in sorted(curves):
        lines.extend(f"{name},{t:.17g},{a:.17g},{b:.17g}" for t, a, b in curves[name])
    path.write_text("\n".join(lines) + "\n")
    return path


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json", by_alias=True)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return [_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def write_json(path: Union[str, Path], obj: Any) -> Path:
    path = Path(path)
    path.write_text(dumps(obj) + "\n")
    return path


def accumulation_json(estimate: AccumulationEstimate) -> Dict[str, Any]:
    return {
        "kind": estimate.kind.value,
        "params": estimate.params,
        "clusters": [
            {"center_z": c.center_z, "center_w": c.center_w, "count": c.count} for c in estimate.clusters
        ],
    }


def classification_json(result: StableClassification) -> Dict[str, Any]:
    return {
        "components": result.components,
        "counts": result.counts(),
        "z": result.z,
        "w": result.w,
        "labels": result.labels,
        "entry_time": result.entry_time,
    }


def sha256_file(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class OutputFile(BaseModel):
    path: str
    sha256: str


class RunManifest(BaseModel):
    """What a command read and wrote; ``timing`` is the only run-dependent part."""

    command: str
    config: Dict[str, Any]
    input_hash: str
    outputs: List[OutputFile]
    threads: int
    timing: Dict[str, float]


class ArtifactWriter:
    """Writes the outputs of one command into a directory and records them.

    Example
    -------
        writer = ArtifactWriter(config.output_dir, "render-base", config)
        writer.image("base", rgb, png=config.png)
        writer.finish()
    """

    def __init__(self, directory: Union[str, Path], command: str, config: BaseModel):
        self.directory = Path(directory)
        self.command = command
        self.config = config
        self.files: List[Path] = []
        self._started = time.perf_counter()

    def _path(self, name: str) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / name
        self.files.append(path)
        return path

    def image(self, stem: str, rgb: np.ndarray, png: bool = False) -> None:
        write_ppm(self._path(f"{stem}.ppm"), rgb)
        if png:
            write_png(self._path(f"{stem}.png"), rgb)

    def grid(self, stem: str, grid: EscapeGrid) -> None:
        write_grid(self._path(f"{stem}.grid"), grid)

    def cloud(self, stem: str, cloud: PointCloud) -> None:
        write_cloud_csv(self._path(f"{stem}.csv"), cloud)

    def curves(self, stem: str, curves: Dict[str, np.ndarray]) -> None:
        write_curves_csv(self._path(f"{stem}.csv"), curves)

    def json(self, stem: str, obj: Any) -> None:
        write_json(self._path(f"{stem}.json"), obj)

    def finish(self, extra_inputs: Optional[Dict[str, Any]] = None) -> RunManifest:
        snapshot = _jsonable(self.config)
        inputs = {"command": self.command, "config": snapshot, **(extra_inputs or {})}
        manifest = RunManifest(
            command=self.command,
            config=snapshot,
            input_hash=hashlib.sha256(dumps(inputs).encode()).hexdigest(),
            outputs=[OutputFile(path=p.name, sha256=sha256_file(p)) for p in self.files],
            threads=int(getattr(self.config, "threads", 1) or 1),
            timing={"wall_seconds": time.perf_counter() - self._started},
        )
        self.directory.mkdir(parents=True, exist_ok=True)
        write_json(self.directory / "manifest.json", manifest)
        logger.info("%s wrote %d files to %s", self.command, len(self.files), self.directory)
        return manifest
