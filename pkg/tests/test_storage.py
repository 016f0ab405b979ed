from __future__ import annotations

import csv

import numpy as np
import pytest

from cir3 import storage
from cir3.generator import ResidualRow, ResidualTable
from cir3.noise import GammaLaw
from cir3.params import ModelParams
from cir3.sde import EnsembleSpec, TimeGrid, simulate_ensemble


@pytest.mark.parametrize("factors", [1, 2, 3])
def test_cache_roundtrip(tmp_path, factors):
    laws = [0.5, 1.0, GammaLaw(8.0, 0.125)][-factors:]
    ens = simulate_ensemble(EnsembleSpec(factors, laws, TimeGrid(0.1, 6, 2), 7, 3), ModelParams())
    path = storage.write_cache(ens, tmp_path / "e.cir3")
    head = storage.read_header(path)
    assert head == {"version": 1, "factors": factors, "rows": 4 * 7}
    back = storage.read_cache(path)
    assert back.states.tobytes() == ens.states.tobytes()
    assert back.grid == ens.grid and back.root_seed == 3 and back.scheme == ens.scheme
    raw = path.read_bytes()
    assert raw[:4] == b"CIR3" and len(raw) == 16 + 5 * 8 * 28


def test_cache_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.cir3"
    bad.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(storage.CacheFormatError):
        storage.read_header(bad)
    bad.write_bytes(b"CIR3")
    with pytest.raises(storage.CacheFormatError):
        storage.read_header(bad)
    bad.write_bytes(b"CIR3" + (1).to_bytes(4, "little") + bytes(8) + bytes(7))
    with pytest.raises(storage.CacheFormatError):
        storage.read_header(bad)


def test_cache_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv("CIR3_CACHE_DIR", str(tmp_path))
    assert storage.cache_dir() == tmp_path


def test_csv_writers(tmp_path):
    t = np.array([0.0, 0.5])
    storage.write_curve_csv(tmp_path / "c.csv", t, [1.0, 2.0], [0.1, 0.2], [3.0, 3.0])
    rows = list(csv.reader(open(tmp_path / "c.csv")))
    assert rows[0] == ["time", "value", "stderr", "bound"] and rows[2] == ["0.5", "2.0", "0.2", "3.0"]
    tab = ResidualTable([ResidualRow("bump[1]", 0.1, 0.05, 2.0)])
    storage.write_residual_csv(tmp_path / "r.csv", tab)
    assert list(csv.reader(open(tmp_path / "r.csv")))[1] == ["bump[1]", "0.1", "0.05", "2.0"]
    ens = simulate_ensemble(EnsembleSpec(1, [1.0], TimeGrid(0.1, 2), 3, 0), ModelParams())
    storage.ensemble_to_csv(ens, tmp_path / "e.csv")
    rows = list(csv.reader(open(tmp_path / "e.csv")))
    assert rows[0] == ["path", "time", "v"] and len(rows) == 1 + 3 * 3
