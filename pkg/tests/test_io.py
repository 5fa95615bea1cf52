import json
import struct

import numpy as np
import pytest

from levymaps import io as lio
from levymaps.errors import ValidationError
from levymaps.labels import label_process, sample_good_labelling
from levymaps.looptree import build_looptree
from levymaps.maps import looptree_to_map
from levymaps.paths import LukasiewiczPath, sample_excursion, stable_gw_law
from levymaps.rng import make_rng


@pytest.fixture
def replica():
    rng = make_rng(120)
    p = sample_excursion(stable_gw_law(1.5), 300, rng)
    lt = build_looptree(p)
    gl = sample_good_labelling(lt, rng)
    return p, lt, gl, looptree_to_map(lt, gl)


def test_header_layout():
    head = lio.pack_header(b"LUKA", 1, 300)
    assert len(head) == 8
    magic, word = struct.unpack("<4sI", head)
    assert magic == b"LUKA" and word >> 28 == lio.VERSION
    assert lio.unpack_header(head, b"LUKA") == (1, 300)
    with pytest.raises(ValidationError, match="bad magic"):
        lio.unpack_header(head, b"LABL")
    with pytest.raises(ValidationError):
        lio.unpack_header(head[:5], b"LUKA")
    with pytest.raises(ValidationError):
        lio.pack_header(b"LUKA", 0, 1 << 24)
    with pytest.raises(ValidationError, match="version"):
        lio.unpack_header(lio.pack_header(b"LUKA", 0, 3, version=2), b"LUKA")


def test_path_round_trip(tmp_path, replica):
    p = replica[0]
    f = lio.write_path(tmp_path / "a.luka", p)
    assert lio.read_path(f) == p
    assert f.stat().st_size == 8 + 4 * (p.n + 1)
    bridge = LukasiewiczPath([-1, 1, 0, -1])
    assert lio.path_from_bytes(lio.path_bytes(bridge)) == bridge
    text = lio.path_to_ndjson([p, bridge])
    assert lio.path_from_ndjson(text) == [p, bridge]
    (tmp_path / "bad.luka").write_bytes(lio.path_bytes(p)[:-4])
    with pytest.raises(ValidationError):
        lio.read_path(tmp_path / "bad.luka")


def test_labels_and_map_round_trip(tmp_path, replica):
    _, lt, gl, m = replica
    Z = label_process(lt, gl)
    back = lio.read_labels(lio.write_labels(tmp_path / "z.labl", Z))
    assert np.array_equal(back.values, Z.values)
    with pytest.raises(ValidationError):
        lio.write_labels(tmp_path / "r.labl", np.array([0.0, 0.5, 0.0]))
    m2 = lio.read_map(lio.write_map(tmp_path / "m.pmap", m))
    assert (m2.V, m2.E, m2.F, m2.root_edge) == (m.V, m.E, m.F, m.root_edge)
    assert np.array_equal(m2.sigma, m.sigma) and np.array_equal(m2.labels, m.labels)


def test_text_exports(replica):
    _, lt, gl, m = replica
    rows = lio.looptree_edges_csv(lt).splitlines()
    assert rows[0] == "vertex_u,vertex_v,cycle_id" and len(rows) == lt.n + 1
    rows = lio.map_edges_csv(m).splitlines()
    assert rows[0] == "u,v,face_left,face_right" and len(rows) == m.E + 1
    rows = lio.process_csv(label_process(lt, gl)).splitlines()
    assert rows[0] == "time,value" and len(rows) == lt.n + 2
    rows = lio.covering_csv([0.5, 0.25], [2, 4]).splitlines()
    assert rows[0] == "log_inv_eps,log_N"
    assert [float(v) for v in rows[2].split(",")] == pytest.approx([np.log(4), np.log(4)])
    obj = json.loads(lio.dump_json({"a": np.int64(3), "b": np.arange(2), "c": np.float32(0.5)}))
    assert obj == {"a": 3, "b": [0, 1], "c": 0.5}


def test_atomic_write_leaves_no_temporaries(tmp_path):
    f = lio.atomic_write(tmp_path / "sub" / "x.txt", "hello")
    assert f.read_text() == "hello"
    lio.atomic_write(f, b"again")
    assert f.read_bytes() == b"again"
    assert [q.name for q in f.parent.iterdir()] == ["x.txt"]
