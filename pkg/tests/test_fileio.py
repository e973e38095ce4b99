import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from uniwarp.fileio import (FileFormatError, field_from_text, field_to_text,
                            grid_from_text, grid_to_text, parse_config_text,
                            read_grid, write_grid)
from uniwarp.grid import ScalarGrid, VectorGrid


def finite_floats():
    return st.floats(allow_nan=False, allow_infinity=False, width=64)


class TestGridFormat:
    def test_header_and_shape(self):
        text = grid_to_text(ScalarGrid(np.ones((3, 4))))
        assert text.startswith("MPGRID 1 3 4\n")
        assert text.endswith("\n")
        assert len(text.splitlines()) == 4

    @settings(max_examples=40, deadline=None)
    @given(st.tuples(st.integers(2, 8), st.integers(2, 8)).flatmap(
        lambda s: arrays(np.float64, s, elements=finite_floats())))
    def test_round_trip_byte_identical(self, data):
        grid = ScalarGrid(data)
        text = grid_to_text(grid)
        back = grid_from_text(text)
        assert np.array_equal(back.data, grid.data)
        assert grid_to_text(back) == text

    def test_bad_magic(self):
        with pytest.raises(FileFormatError, match="header"):
            grid_from_text("WRONG 1 2 2\n0 0\n0 0\n")

    def test_bad_version(self):
        with pytest.raises(FileFormatError):
            grid_from_text("MPGRID 9 2 2\n0 0\n0 0\n")

    def test_row_count_mismatch(self):
        with pytest.raises(FileFormatError, match="rows"):
            grid_from_text("MPGRID 1 3 2\n0 0\n0 0\n")

    def test_row_width_mismatch(self):
        with pytest.raises(FileFormatError, match="values"):
            grid_from_text("MPGRID 1 2 2\n0 0 0\n0 0\n")

    def test_non_finite_rejected(self):
        with pytest.raises(FileFormatError, match="non-finite"):
            grid_from_text("MPGRID 1 2 2\n0 nan\n0 0\n")

    def test_file_io_round_trip(self, tmp_path):
        grid = ScalarGrid(np.array([[1.5, -2.25], [1e-17, 3e200]]))
        path = tmp_path / "x.grid"
        write_grid(path, grid)
        again = read_grid(path)
        assert np.array_equal(again.data, grid.data)


class TestFieldFormat:
    def test_header(self):
        f = VectorGrid(dx=np.zeros((2, 3)), dy=np.zeros((2, 3)))
        text = field_to_text(f)
        assert text.startswith("MPFIELD 1 2 3\n")

    @settings(max_examples=30, deadline=None)
    @given(st.tuples(st.integers(2, 6), st.integers(2, 6)).flatmap(
        lambda s: st.tuples(arrays(np.float64, s, elements=finite_floats()),
                            arrays(np.float64, s, elements=finite_floats()))))
    def test_round_trip_byte_identical(self, pair):
        dx, dy = pair
        field = VectorGrid(dx=dx, dy=dy)
        text = field_to_text(field)
        back = field_from_text(text)
        assert np.array_equal(back.dx, field.dx)
        assert np.array_equal(back.dy, field.dy)
        assert field_to_text(back) == text

    def test_bad_pair(self):
        with pytest.raises(FileFormatError, match="pair"):
            field_from_text("MPFIELD 1 2 2\n0,0 0\n0,0 0,0\n")


class TestConfigFormat:
    def test_basic_parsing(self):
        cfg = parse_config_text(
            "# comment\n\npyramid.base_size = 44\nncg.wolfe_c1=0.01\n")
        assert cfg == {"pyramid.base_size": "44", "ncg.wolfe_c1": "0.01"}

    def test_missing_equals_rejected(self):
        with pytest.raises(FileFormatError, match="key=value"):
            parse_config_text("pyramid.base_size 44\n")

    def test_empty_key_rejected(self):
        with pytest.raises(FileFormatError, match="empty key"):
            parse_config_text("=44\n")
