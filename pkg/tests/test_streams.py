import numpy as np

from canopy_perc.streams import default_workers, map_replicates, replicate_rng, replicate_seed


def _draw(index, seed):
    return int(np.random.default_rng(seed).integers(1 << 40))


def test_seed_derivation_is_documented_rule():
    expected = np.random.SeedSequence(42, spawn_key=(7,)).generate_state(1, np.uint64)[0]
    assert replicate_seed(42, 7) == int(expected)
    assert replicate_seed(42, (3, 7)) != replicate_seed(42, 7)
    assert replicate_rng(42, 7).integers(1 << 40) == np.random.default_rng(int(expected)).integers(1 << 40)


def test_streams_are_distinct():
    seeds = {replicate_seed(0, i) for i in range(1000)}
    assert len(seeds) == 1000


def test_map_replicates_independent_of_workers():
    a = map_replicates(_draw, 9, range(23), workers=1)
    b = map_replicates(_draw, 9, range(23), workers=3)
    assert a == b


def test_default_workers(monkeypatch):
    monkeypatch.setenv("CANOPY_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.delenv("CANOPY_WORKERS")
    assert default_workers() == 1
