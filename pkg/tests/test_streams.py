import pickle

import numpy as np
import pytest

from outliersim.streams import RngStream, derive_stream


def test_same_address_same_draws():
    a = RngStream(7, ()).derive("cond", 3, "d").generator()
    b = RngStream(7, ()).derive("cond", 3, "d").generator()
    assert np.array_equal(a.random(32), b.random(32))


def test_different_paths_differ():
    root = RngStream(7, ())
    a = root.derive("cond", 3, "d").generator().random(16)
    b = root.derive("cond", 4, "d").generator().random(16)
    c = root.derive("cond", 3, "a").generator().random(16)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_master_seed_changes_everything():
    a = RngStream(0, ("x",)).generator().random(16)
    b = RngStream(1, ("x",)).generator().random(16)
    assert not np.array_equal(a, b)


def test_int_and_str_parts_are_distinct():
    # 1 and "1" must address different streams
    a = RngStream(0, ()).derive(1).generator().random(8)
    b = RngStream(0, ()).derive("1").generator().random(8)
    assert not np.array_equal(a, b)


def test_derive_order_is_all_that_matters():
    # Building the path in stages equals building it at once
    a = RngStream(5, ()).derive("x").derive(2).derive("y")
    b = RngStream(5, ()).derive("x", 2, "y")
    assert a == b
    assert np.array_equal(a.generator().random(8), b.generator().random(8))


def test_rejects_unsupported_part_types():
    with pytest.raises(TypeError):
        RngStream(0, ()).derive(1.5)
    with pytest.raises(TypeError):
        RngStream(0, ()).derive(None)


def test_streams_pickle_for_worker_processes():
    s = RngStream(3, ("c", 9, "d"))
    clone = pickle.loads(pickle.dumps(s))
    assert clone == s
    assert np.array_equal(clone.generator().random(8), s.generator().random(8))


def test_module_level_alias():
    assert derive_stream(RngStream(1, ()), "k") == RngStream(1, ("k",))


def test_numpy_integer_parts_match_python_ints():
    a = RngStream(0, ()).derive(np.int64(4)).generator().random(8)
    b = RngStream(0, ()).derive(4).generator().random(8)
    assert np.array_equal(a, b)
