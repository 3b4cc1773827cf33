import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from covertime_lab.errors import CapacityError, UsageError
from covertime_lab.graphs import TorusTopology, TreeTopology
from covertime_lab.trajectory import (
    MAGIC,
    VERSION,
    move_codes,
    pack_codes,
    read_trajectory,
    replay_positions,
    tree_walk_codes,
    unpack_codes,
    write_trajectory,
)
from covertime_lab.walker import Lattice2D, iter_lattice_walk, iter_torus_walk, iter_tree_walk


@given(st.lists(st.integers(min_value=0, max_value=3), max_size=300))
def test_pack_unpack_roundtrip(codes):
    arr = np.array(codes, dtype=np.uint8)
    payload, pad = pack_codes(arr)
    assert 0 <= pad <= 3
    assert np.array_equal(unpack_codes(payload, pad), arr)


def test_pack_rejects_wide_codes():
    with pytest.raises(UsageError):
        pack_codes(np.array([4], dtype=np.uint8))


def test_header_layout(tmp_path):
    path = tmp_path / "walk.trj"
    write_trajectory(path, TorusTopology(64), np.array([0, 1, 2], dtype=np.uint8))
    blob = path.read_bytes()
    assert blob[:2] == MAGIC
    assert blob[2] == VERSION
    assert blob[3] & 0x3F == 0  # torus kind
    assert blob[3] >> 6 == 1  # one unused slot in the final byte
    assert int.from_bytes(blob[4:8], "little") == 64
    assert len(blob) == 9


def test_file_roundtrip_all_topologies(tmp_path):
    cases = [
        (TorusTopology(16), move_codes(7, 100)),
        (TreeTopology(3, 4), tree_walk_codes(TreeTopology(3, 4), 7, 100)),
        (Lattice2D(), move_codes(9, 33)),
    ]
    for i, (topo, codes) in enumerate(cases):
        path = tmp_path / f"t{i}.trj"
        write_trajectory(path, topo, codes)
        topo2, codes2 = read_trajectory(path)
        assert topo2 == topo
        assert np.array_equal(codes2, codes)


def test_wide_trees_rejected(tmp_path):
    with pytest.raises(CapacityError):
        write_trajectory(tmp_path / "x.trj", TreeTopology(4, 3), np.array([], dtype=np.uint8))
    with pytest.raises(CapacityError):
        tree_walk_codes(TreeTopology(4, 3), 1, 10)


def test_reject_garbage(tmp_path):
    path = tmp_path / "bad.trj"
    path.write_bytes(b"NOPE" + b"\x00" * 8)
    with pytest.raises(UsageError):
        read_trajectory(path)


class TestReplayMatchesWalkers:
    def test_tree_replay(self):
        t = TreeTopology(2, 5)
        codes = tree_walk_codes(t, 31337, 5000)
        replay = replay_positions(t, codes)
        direct = list(itertools.islice(iter_tree_walk(t, 31337), 5001))
        assert replay == direct

    def test_torus_replay(self):
        topo = TorusTopology(9)
        codes = move_codes(555, 4000)
        replay = replay_positions(topo, codes)
        direct = list(itertools.islice(iter_torus_walk(topo, 555), 4001))
        assert replay == direct

    def test_lattice_replay(self):
        codes = move_codes(777, 2000)
        replay = replay_positions(Lattice2D(), codes)
        direct = list(itertools.islice(iter_lattice_walk(777), 2001))
        assert replay == direct

    def test_replayed_dump_supports_recounts(self, tmp_path):
        # write, read back, replay, and feed the positions to a scanner
        from covertime_lab.excursions import ExcursionSpec, count_excursions
        from covertime_lab.walker import WalkConfig

        t = TreeTopology(2, 6)
        n_steps = 20_000
        path = tmp_path / "tree.trj"
        write_trajectory(path, t, tree_walk_codes(t, 90210, n_steps))
        topo, codes = read_trajectory(path)
        positions = replay_positions(topo, codes)
        spec = ExcursionSpec(inner=topo.descendant(0, 2), outer=0)
        from_dump = count_excursions(positions, spec, steps=n_steps, topology=topo)
        live = count_excursions(WalkConfig(t, seed=90210), spec, steps=n_steps)
        assert from_dump == live
