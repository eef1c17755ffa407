"""Regenerate the golden images under tests/golden.

The flat-space golden comes from the straight-line reference tracer in
tests/reference_tracer.py; the curved-space goldens are renderer output
frozen after review.

    python3 tools/make_goldens.py
"""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

import reference_tracer  # noqa: E402

from riemray.config import load_config  # noqa: E402
from riemray.render import GridPlanes, build_camera, render  # noqa: E402

SIZE = 256
GOLDEN = ROOT / "tests" / "golden"


def reference_euclid(cfg) -> bytes:
    (grid,) = cfg.scene.primitives
    assert isinstance(grid, GridPlanes)
    px = reference_tracer.render_grid(
        cfg.camera.position, cfg.camera.look, cfg.camera.up, cfg.camera.fov_deg, SIZE, SIZE,
        spacing=grid.spacing, half_width=grid.half_width,
        box_lo=grid.bounds.lo, box_hi=grid.bounds.hi, fog=cfg.scene.fog,
    )
    return reference_tracer.to_ppm(px)


def rendered(cfg) -> bytes:
    cam = build_camera(cfg.metric, cfg.camera.position, cfg.camera.look, cfg.camera.up, cfg.camera.fov)
    result = render(cfg.metric, cfg.scene, cam, cfg.integrator, SIZE, SIZE)
    assert result.errors == 0
    return result.image.to_ppm()


def main() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    scenes = ROOT / "scenes"
    (GOLDEN / "euclid_grid_256.ppm").write_bytes(reference_euclid(load_config(scenes / "euclid_grid.toml")))
    for name in ("twist_grid", "quadric_grid"):
        (GOLDEN / f"{name}_256.ppm").write_bytes(rendered(load_config(scenes / f"{name}.toml")))
        print("wrote", name)


if __name__ == "__main__":
    main()
