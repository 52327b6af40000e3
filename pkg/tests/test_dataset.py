import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gbnc.dataset import (
    Configuration,
    DatasetBundle,
    FeatureSchema,
    Variable,
    load_csv,
    make_bundle,
    make_folds,
    one_hot_names,
    one_hot_view,
    partition_by_configuration,
    read_csv_text,
    save_csv,
    to_csv_text,
)
from gbnc.errors import (
    BadCell,
    DuplicateColumn,
    EmptyDataset,
    MissingHeaderTag,
    SchemaMismatch,
    TooFewRows,
    UnknownState,
    UnknownVariable,
)

MIXED = """c:temp,d:sex,y:stage,y:grade
1.5,f,early,lo
-0.25,m,late,hi
3.0,f,late,lo
0.0,m,early,hi
"""


def test_schema_inferred_from_tags():
    b = read_csv_text(MIXED)
    assert b.schema.continuous == ("temp",)
    assert b.schema.discrete == (Variable("sex", ("f", "m")),)
    assert b.schema.class_names == ("stage", "grade")
    assert b.schema.class_cards == (2, 2)
    assert b.n_rows == 4
    np.testing.assert_array_equal(b.column("stage"), [0, 1, 1, 0])
    np.testing.assert_array_equal(b.column("grade"), [1, 0, 1, 0])


def test_binary_discrete_dictionary_sorted():
    b = read_csv_text("d:a,y:c\na,0\nb,1\na,0\nb,1\n")
    assert b.schema.discrete[0].states == ("a", "b")
    np.testing.assert_array_equal(b.column("a"), [0, 1, 0, 1])


def test_dictionary_is_lexicographic_on_raw_strings():
    b = read_csv_text("d:a,y:c\n10,0\n9,1\n2,0\n")
    assert b.schema.discrete[0].states == ("10", "2", "9")


def test_header_only_is_empty():
    with pytest.raises(EmptyDataset):
        read_csv_text("c:x,y:c\n")


def test_untagged_column():
    with pytest.raises(MissingHeaderTag):
        read_csv_text("x,y:c\n1,0\n2,1\n")


def test_duplicate_column():
    with pytest.raises(DuplicateColumn):
        read_csv_text("c:x,c:x,y:c\n1,2,0\n2,3,1\n")


def test_bad_real_reports_row_and_column():
    with pytest.raises(BadCell) as err:
        read_csv_text("c:x,y:c\n1.0,0\nabc,1\n")
    assert err.value.row == 2 and err.value.column == "x"


@pytest.mark.parametrize("cell", ["", "nan", "inf"])
def test_missing_or_nonfinite_rejected(cell):
    with pytest.raises(BadCell):
        read_csv_text(f"c:x,y:c\n1.0,0\n{cell},1\n")


def test_missing_discrete_rejected():
    with pytest.raises(BadCell):
        read_csv_text("d:a,y:c\na,0\n,1\n")


def test_single_state_column_rejected():
    with pytest.raises(SchemaMismatch):
        read_csv_text("d:a,y:c\na,0\na,1\n")


def test_unknown_state_against_training_schema():
    train = read_csv_text(MIXED)
    with pytest.raises(UnknownState):
        read_csv_text("c:temp,d:sex,y:stage,y:grade\n1,x,early,lo\n", schema=train.schema)


def test_prediction_input_without_classes():
    train = read_csv_text(MIXED)
    b = read_csv_text("c:temp,d:sex\n2.0,m\n", schema=train.schema, require_classes=False)
    assert not b.has_classes and b.n_rows == 1


def test_missing_class_column_is_schema_mismatch():
    train = read_csv_text(MIXED)
    with pytest.raises(SchemaMismatch):
        read_csv_text("c:temp,d:sex,y:stage\n2.0,m,early\n", schema=train.schema, require_classes=False)


def test_load_csv_missing_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        load_csv(tmp_path / "nope.csv")


def test_schema_validation():
    with pytest.raises(ValueError):
        FeatureSchema(("a",), (), (Variable("a", ("0", "1")),))
    with pytest.raises(ValueError):
        FeatureSchema((), (), ())
    with pytest.raises(ValueError):
        FeatureSchema((), (), (Variable("y", ("0",)),))


def test_configuration_equality():
    a = Configuration(("A", "B"), (0, 1))
    assert a == Configuration(("A", "B"), (0, 1))
    assert a != Configuration(("A", "B"), (1, 1))
    assert Configuration.empty() == Configuration((), ())


def _binary_bundle(a, b=None):
    x_d = np.array([a] if b is None else [a, b]).T
    disc = [("A", 2)] if b is None else [("A", 2), ("B", 2)]
    return make_bundle(None, x_d, np.zeros((len(a), 1), dtype=int), discrete=disc, classes=[("Y", 2)])


def test_partition_two_blocks():
    parts = partition_by_configuration(_binary_bundle([0, 0, 1, 1]), ["A"])
    assert [len(r) for r in parts.values()] == [2, 2]


def test_partition_empty_variables():
    parts = partition_by_configuration(_binary_bundle([0, 0, 1, 1]), [])
    assert list(parts) == [Configuration.empty()]
    np.testing.assert_array_equal(parts[Configuration.empty()], [0, 1, 2, 3])


def test_partition_observed_keys_only():
    parts = partition_by_configuration(_binary_bundle([0, 0, 1], [0, 0, 0]), ["A", "B"])
    assert {k.states: len(v) for k, v in parts.items()} == {(0, 0): 2, (1, 0): 1}


def test_partition_unknown_variable():
    with pytest.raises(UnknownVariable):
        partition_by_configuration(_binary_bundle([0, 1]), ["Z"])


def test_folds_154_rows():
    plan = make_folds(154, 10, seed=3)
    assert sorted(plan.sizes()) == [15] * 6 + [16] * 4
    assert sum(plan.sizes()) == 154


def test_folds_one_row_each():
    assert make_folds(10, 10, seed=0).sizes() == [1] * 10


def test_folds_deterministic():
    a, b = make_folds(50, 10, seed=7), make_folds(50, 10, seed=7)
    np.testing.assert_array_equal(a.assignments, b.assignments)


def test_folds_too_few_rows():
    with pytest.raises(TooFewRows):
        make_folds(3, 4, seed=0)
    with pytest.raises(TooFewRows):
        make_folds(3, 1, seed=0)


@given(st.integers(2, 200), st.integers(2, 20), st.integers(0, 2**31))
def test_folds_partition_rows(n, k, seed):
    k = min(k, n)
    plan = make_folds(n, k, seed)
    sizes = plan.sizes()
    assert max(sizes) - min(sizes) <= 1
    rows = np.concatenate([plan.test_rows(f) for f in range(k)])
    np.testing.assert_array_equal(np.sort(rows), np.arange(n))
    for f in range(k):
        assert set(plan.train_rows(f)).isdisjoint(plan.test_rows(f))


def test_one_hot_three_states():
    b = make_bundle(None, np.array([[0], [2], [1]]), np.zeros((3, 1), dtype=int), discrete=[("A", 3)], classes=[("Y", 2)])
    v = one_hot_view(b)
    assert v.schema.discrete == ()
    np.testing.assert_array_equal(v.x_c, np.eye(3)[[0, 2, 1]])


def test_one_hot_identity_without_discrete():
    b = make_bundle(np.arange(6.0).reshape(3, 2), None, np.array([[0], [1], [0]]), classes=[("Y", 2)])
    assert one_hot_view(b) == b


def test_one_hot_column_count():
    rng = np.random.default_rng(0)
    b = make_bundle(
        rng.normal(size=(5, 4)),
        np.stack([rng.integers(0, 2, 5), rng.integers(0, 3, 5)], axis=1),
        np.zeros((5, 1), dtype=int),
        discrete=[("A", 2), ("B", 3)],
        classes=[("Y", 2)],
    )
    v = one_hot_view(b)
    assert v.x_c.shape == (5, 9)
    assert one_hot_names(b.schema)[4:] == ("A=0", "A=1", "B=0", "B=1", "B=2")


@st.composite
def bundles(draw, cover=False):
    n = draw(st.integers(4 if cover else 1, 30))
    n_c = draw(st.integers(0, 3))
    dcards = draw(st.lists(st.integers(2, 4), max_size=3))
    ccards = draw(st.lists(st.integers(2, 4), min_size=1, max_size=3))
    floats = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
    x_c = np.array(draw(st.lists(st.lists(floats, min_size=n_c, max_size=n_c), min_size=n, max_size=n)), dtype=float).reshape(n, n_c)
    x_d = np.array([[draw(st.integers(0, c - 1)) for c in dcards] for _ in range(n)], dtype=np.int64).reshape(n, len(dcards))
    y = np.array([[draw(st.integers(0, c - 1)) for c in ccards] for _ in range(n)], dtype=np.int64)
    if cover:
        # every state observed, as in any file that load_csv accepts
        for arr, cards in ((x_d, dcards), (y, ccards)):
            for j, c in enumerate(cards):
                arr[:c, j] = np.arange(c)
    return make_bundle(
        x_c,
        x_d,
        y,
        discrete=[(f"d{j}", c) for j, c in enumerate(dcards)],
        classes=[(f"y{k}", c) for k, c in enumerate(ccards)],
    )


@settings(max_examples=60, deadline=None)
@given(bundles(), st.data())
def test_partition_properties(b, data):
    pool = list(b.schema.discrete_names + b.schema.class_names)
    v1 = data.draw(st.lists(st.sampled_from(pool), unique=True, max_size=2))
    v2 = data.draw(st.lists(st.sampled_from(pool), unique=True, max_size=2))
    coarse = partition_by_configuration(b, v1)
    fine = partition_by_configuration(b, list(dict.fromkeys(v1 + v2)))
    assert sum(len(r) for r in coarse.values()) == b.n_rows
    assert sum(len(r) for r in fine.values()) == b.n_rows
    for rows in fine.values():
        assert sum(set(rows) <= set(c) for c in coarse.values()) == 1


@settings(max_examples=60, deadline=None)
@given(bundles())
def test_one_hot_blocks_sum_to_one(b):
    v = one_hot_view(b)
    start = len(b.schema.continuous)
    np.testing.assert_array_equal(v.x_c[:, :start], b.x_c)
    for var in b.schema.discrete:
        block = v.x_c[:, start : start + var.cardinality]
        np.testing.assert_array_equal(block.sum(axis=1), 1.0)
        start += var.cardinality


@settings(max_examples=40, deadline=None)
@given(bundles(cover=True))
def test_csv_round_trip(b):
    first = read_csv_text(to_csv_text(b))
    assert first == b
    text = to_csv_text(first)
    second = read_csv_text(text)
    assert second == first
    assert to_csv_text(second) == text
    np.testing.assert_array_equal(first.x_c, b.x_c)


def test_save_and_load(tmp_path):
    b = read_csv_text(MIXED)
    save_csv(b, tmp_path / "x.csv")
    again = load_csv(tmp_path / "x.csv")
    assert again == b
    assert (tmp_path / "x.csv").read_text() == to_csv_text(b)


def test_bundle_is_read_only():
    b = read_csv_text(MIXED)
    with pytest.raises(ValueError):
        b.x_c[0, 0] = 1.0
    assert isinstance(b.subset([0, 2]), DatasetBundle)
