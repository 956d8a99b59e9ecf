import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kinspde.grid import Field, make_grid
from kinspde.io import MAGIC, field_to_csv, read_field, read_table, write_field, write_table


class TestFieldDump:
    def test_roundtrip_bitwise(self, tmp_path, grid):
        vals = np.random.default_rng(0).standard_normal(grid.shape)
        write_field(tmp_path / "f.kspde", Field(grid, vals))
        back = read_field(tmp_path / "f.kspde")
        assert back.grid == grid
        np.testing.assert_array_equal(back.values, vals)

    def test_header_layout(self, tmp_path, grid):
        write_field(tmp_path / "f.kspde", Field(grid, grid.zeros()))
        raw = (tmp_path / "f.kspde").read_bytes()
        magic, nx, nv, lx, lv = struct.unpack_from("<6sIIdd", raw)
        assert (magic, nx, nv, lx, lv) == (MAGIC, grid.Nx, grid.Nv, grid.Lx, grid.Lv)
        assert len(raw) == struct.calcsize("<6sIIdd") + 8 * grid.Nx * grid.Nv

    @pytest.mark.parametrize("mutate", ["magic", "truncate", "header"])
    def test_corrupt_rejected(self, tmp_path, grid, mutate):
        p = tmp_path / "f.kspde"
        write_field(p, Field(grid, grid.zeros()))
        raw = p.read_bytes()
        raw = {"magic": b"XXXXXX" + raw[6:], "truncate": raw[:-8], "header": raw[:10]}[mutate]
        p.write_bytes(raw)
        with pytest.raises(ValueError):
            read_field(p)

    @settings(max_examples=10, deadline=None)
    @given(st.sampled_from([8, 16, 32]), st.sampled_from([8, 16]), st.floats(0.1, 10), st.integers(0, 1000))
    def test_roundtrip_shapes(self, tmp_path_factory, nx, nv, L, seed):
        g = make_grid(L, 2 * L, nx, nv)
        vals = np.random.default_rng(seed).standard_normal(g.shape)
        p = tmp_path_factory.mktemp("d") / "f.kspde"
        write_field(p, Field(g, vals))
        np.testing.assert_array_equal(read_field(p).values, vals)


class TestCsv:
    def test_field_csv(self, tmp_path):
        g = make_grid(1.0, 1.0, 8, 8)
        vals = np.arange(64.0).reshape(8, 8) / 7
        field_to_csv(tmp_path / "f.csv", Field(g, vals))
        header, rows = read_table(tmp_path / "f.csv")
        assert header == ["x", "v", "value"]
        assert len(rows) == 64
        assert float(rows[9][2]) == vals[1, 1]
        assert float(rows[9][0]) == g.x[1] and float(rows[9][1]) == g.v[1]

    def test_table_roundtrip(self, tmp_path):
        write_table(tmp_path / "t.csv", ["a", "b"], [[1, 0.1], ["x", np.float64(1 / 3)]])
        header, rows = read_table(tmp_path / "t.csv")
        assert header == ["a", "b"]
        assert rows[0] == ["1", "0.1"]
        assert float(rows[1][1]) == 1 / 3
