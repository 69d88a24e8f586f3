import numpy as np
import pytest

from crnlearn.dataset import format_dataset, parse_dataset, read_dataset, write_dataset
from crnlearn.errors import CRNError
from crnlearn.scenarios import EXAMPLE1
from crnlearn.ssa import simulate_many


@pytest.fixture(scope="module")
def small():
    return simulate_many(EXAMPLE1.network, EXAMPLE1.x0, 2.0, 4, 21)


def test_round_trip_exact(small, tmp_path):
    p = tmp_path / "d.traj"
    write_dataset(p, small, ["A", "B"])
    ts, names = read_dataset(p)
    assert names == ["A", "B"]
    assert ts.seed == small.seed
    assert all(a == b for a, b in zip(ts, small))


def test_bytes_identical(small, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    write_dataset(a, small)
    write_dataset(b, simulate_many(EXAMPLE1.network, EXAMPLE1.x0, 2.0, 4, 21))
    assert a.read_bytes() == b.read_bytes()


def test_no_temp_files_left(small, tmp_path):
    write_dataset(tmp_path / "d.traj", small)
    assert [p.name for p in tmp_path.iterdir()] == ["d.traj"]


def _mutate(text, old, new):
    assert old in text
    return text.replace(old, new, 1)


@pytest.mark.parametrize(
    "edit",
    [
        lambda s: s.replace("# crnlearn trajectories v1", "# something else", 1),
        lambda s: "\n".join(s.splitlines()[:-3]) + "\n",
        lambda s: _mutate(s, "channels 4", "channels 5"),
        lambda s: s + "garbage line\n",
    ],
)
def test_malformed_rejected(small, edit):
    text = format_dataset(small, ["A", "B"])
    with pytest.raises(CRNError):
        parse_dataset(edit(text))


def test_channel_count_mismatch_rejected(small):
    text = format_dataset(small, ["A", "B"])
    line = next(l for l in text.splitlines() if l.startswith("channel 1 "))
    parts = line.split()
    parts[-1] = str(int(parts[-1]) + 1)
    with pytest.raises(CRNError):
        parse_dataset(text.replace(line, " ".join(parts), 1))
