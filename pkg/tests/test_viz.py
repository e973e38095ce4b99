import numpy as np
import pytest

from uniwarp.grid import ScalarGrid, VectorGrid
from uniwarp.viz import (contour_levels, contours_csv, field_arrows_csv,
                         grid_to_pgm, marching_squares, pgm_to_array)


def radial_gaussian(n=64, sigma=0.18):
    t = np.linspace(0.0, 1.0, n)
    yy, xx = np.meshgrid(t, t, indexing="ij")
    return ScalarGrid(np.exp(-0.5 * (((xx - 0.5) / sigma) ** 2
                                     + ((yy - 0.5) / sigma) ** 2)))


def polygon_area_perimeter(line):
    pts = np.asarray(line)
    x, y = pts[:, 0], pts[:, 1]
    area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    per = np.hypot(np.diff(x, append=x[0]), np.diff(y, append=y[0])).sum()
    return area, per


class TestMarchingSquares:
    def test_constant_grid_no_contours(self):
        grid = ScalarGrid(np.full((16, 16), 2.5))
        assert contour_levels(grid) == []
        assert contours_csv(grid) == "level,poly_id,x,y\n"

    def test_gaussian_contours_closed_and_circular(self):
        grid = radial_gaussian()
        for level in contour_levels(grid, 5):
            lines = marching_squares(grid, level)
            # one closed, nearly circular curve per level
            closed = [l for l in lines if
                      np.hypot(l[0][0] - l[-1][0], l[0][1] - l[-1][1]) < 1e-6]
            assert len(closed) == 1
            area, per = polygon_area_perimeter(closed[0][:-1])
            assert 4 * np.pi * area / per ** 2 > 0.95

    def test_level_crossing_positions_linear(self):
        # a ramp crossing the level midway between two columns
        yy, xx = np.meshgrid(np.arange(6.0), np.arange(6.0), indexing="ij")
        lines = marching_squares(ScalarGrid(xx), 2.5)
        for line in lines:
            for x, y in line:
                assert x == pytest.approx(2.5, abs=1e-12)

    def test_csv_format(self):
        grid = radial_gaussian(24)
        rows = contours_csv(grid).splitlines()
        assert rows[0] == "level,poly_id,x,y"
        first = rows[1].split(",")
        assert len(first) == 4
        float(first[0]), int(first[1]), float(first[2]), float(first[3])


class TestFieldArrows:
    def test_header_and_scaling(self):
        dx = np.full((48, 48), 3.0)
        dy = np.zeros((48, 48))
        csv = field_arrows_csv(VectorGrid(dx=dx, dy=dy))
        rows = csv.splitlines()
        assert rows[0] == "x,y,dx,dy"
        mags = [float(r.split(",")[2]) for r in rows[1:]]
        stride = int(np.ceil(48 / 24))
        assert max(mags) == pytest.approx(0.8 * stride, rel=1e-12)

    def test_zero_field(self):
        csv = field_arrows_csv(VectorGrid(dx=np.zeros((8, 8)), dy=np.zeros((8, 8))))
        for row in csv.splitlines()[1:]:
            assert row.endswith(",0,0")


class TestPgm:
    def test_header_and_size(self):
        data = grid_to_pgm(ScalarGrid(np.random.default_rng(0).uniform(size=(10, 14))))
        assert data.startswith(b"P5\n14 10\n255\n")
        assert len(data) == len(b"P5\n14 10\n255\n") + 140

    def test_round_trip_within_quantization(self):
        rng = np.random.default_rng(1)
        grid = ScalarGrid(rng.uniform(-3.0, 5.0, (20, 20)))
        back = pgm_to_array(grid_to_pgm(grid))
        a = grid.data
        normalized = (a - a.min()) / (a.max() - a.min())
        assert np.abs(back - normalized).max() <= 1.0 / 255 + 1e-12

    def test_constant_grid(self):
        data = grid_to_pgm(ScalarGrid(np.full((4, 4), 9.0)))
        assert pgm_to_array(data).max() == 0.0
