import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from embedmnl.data import (
    UNSEEN,
    DataError,
    Schema,
    SchemaError,
    bin_labels,
    discretize,
    dummy_count,
    dummy_expand,
    load_csv,
    split,
)

SCHEMA = """
[alternatives]
names = Train, SM, Car
reference = Train
asc = yes

[choice]
column = CHOICE
codes = 1, 2, 3
missing = 0

[availability]
Train = TRAIN_AV
SM = SM_AV
Car = CAR_AV
require_all = yes

[continuous:TT]
columns = TRAIN_TT, SM_TT, CAR_TT
scale = 0.01

[continuous:HEADWAY]
columns = TRAIN_HE, SM_HE, 0
scale = 0.01

[continuous:AGE_SPEC]
columns = AGEN
mode = specific
alternatives = Car

[categorical:PURPOSE]
column = PURPOSE

[categorical:GA]
column = GA
"""

HEADER = "CHOICE,TRAIN_AV,SM_AV,CAR_AV,TRAIN_TT,SM_TT,CAR_TT,TRAIN_HE,SM_HE,AGEN,PURPOSE,GA"
ROWS = [
    "1,1,1,1,100,50,80,30,10,3,1,0",
    "2,1,1,1,120,60,90,60,20,2,2,1",
    "3,1,1,1,110,70,70,30,10,1,1,0",
    "0,1,1,1,110,70,70,30,10,1,1,0",  # no recorded choice
    "2,1,1,0,110,70,70,30,10,1,3,0",  # car unavailable
    "1,1,1,1,,70,70,30,10,1,1,0",  # missing TT
    "3,1,1,1,90,40,60,30,10,2,3,1",
]


@pytest.fixture
def files(tmp_path):
    (tmp_path / "s.ini").write_text(SCHEMA)
    (tmp_path / "d.csv").write_text("\n".join([HEADER] + ROWS) + "\n")
    return tmp_path / "s.ini", tmp_path / "d.csv"


def test_load_filters_and_counts(files):
    schema, data = files
    ds = load_csv(data, Schema.load(schema))
    assert len(ds) == 4
    assert ds.dropped == {"missing": 2, "unavailable": 1, "unseen_categories": 0}
    assert ds.feature_names == ["ASC_SM", "ASC_Car", "TT", "HEADWAY", "AGE_SPEC_Car"]
    np.testing.assert_allclose(ds.X[0, :, 2], [1.0, 0.5, 0.8])
    np.testing.assert_allclose(ds.X[0, :, 3], [0.3, 0.1, 0.0])
    np.testing.assert_allclose(ds.X[0, :, 4], [0.0, 0.0, 3.0])
    np.testing.assert_array_equal(ds.X[:, :, 0], np.tile([0, 1, 0], (4, 1)))
    assert list(ds.choice) == [0, 1, 2, 2]


def test_vocabulary_in_order_of_appearance(files):
    schema, data = files
    ds = load_csv(data, Schema.load(schema))
    v = ds.vocabulary
    assert v.variables == ["PURPOSE", "GA"]
    assert v.categories == [["1", "2", "3"], ["0", "1"]]
    assert v.size == 5
    assert v.lookup(3) == ("GA", "0")
    assert v.index("GA", "1") == 4
    np.testing.assert_array_equal(ds.Q[1], [1, 4])


def test_missing_choice_single_row(tmp_path):
    (tmp_path / "s.ini").write_text(SCHEMA.replace("require_all = yes", "require_all = no"))
    (tmp_path / "d.csv").write_text(HEADER + "\n" + ROWS[0] + "\n" + ",1,1,1,100,50,80,30,10,3,1,0\n")
    ds = load_csv(tmp_path / "d.csv", Schema.load(tmp_path / "s.ini"))
    assert len(ds) == 1 and ds.dropped["missing"] == 1


def test_missing_column_named(files, tmp_path):
    schema, _ = files
    (tmp_path / "bad.csv").write_text(HEADER.replace("SM_TT", "SMTT") + "\n" + ROWS[0] + "\n")
    with pytest.raises(SchemaError, match="SM_TT"):
        load_csv(tmp_path / "bad.csv", Schema.load(schema))


def test_unparseable_value_reports_line(files, tmp_path):
    schema, _ = files
    (tmp_path / "bad.csv").write_text(HEADER + "\n" + ROWS[0] + "\n" + ROWS[1].replace("120", "fast") + "\n")
    with pytest.raises(DataError, match="line 3"):
        load_csv(tmp_path / "bad.csv", Schema.load(schema))


def test_chosen_unavailable_rejected(tmp_path):
    (tmp_path / "s.ini").write_text(SCHEMA.replace("require_all = yes", "require_all = no"))
    (tmp_path / "d.csv").write_text(HEADER + "\n" + "3,1,1,0,110,70,70,30,10,1,3,0\n")
    with pytest.raises(DataError, match="unavailable"):
        load_csv(tmp_path / "d.csv", Schema.load(tmp_path / "s.ini"))


def test_partial_availability_kept(tmp_path):
    (tmp_path / "s.ini").write_text(SCHEMA.replace("require_all = yes", "require_all = no"))
    (tmp_path / "d.csv").write_text(HEADER + "\n" + ROWS[4] + "\n")
    ds = load_csv(tmp_path / "d.csv", Schema.load(tmp_path / "s.ini"))
    np.testing.assert_array_equal(ds.avail[0], [True, True, False])


def test_unseen_categories_with_fixed_vocabulary(files, tmp_path):
    schema, data = files
    train = load_csv(data, Schema.load(schema))
    (tmp_path / "t.csv").write_text(HEADER + "\n" + "1,1,1,1,100,50,80,30,10,3,9,1\n")
    with pytest.warns(UserWarning, match="not in the vocabulary"):
        test = load_csv(tmp_path / "t.csv", Schema.load(schema), vocabulary=train.vocabulary)
    assert test.Q[0, 0] == UNSEEN and test.Q[0, 1] == 4
    assert test.n_unseen == 1
    assert test.dropped["unseen_categories"] == 1


def test_schema_validation_errors():
    with pytest.raises(SchemaError):
        Schema.from_ini("[alternatives]\nnames = A\n[choice]\ncolumn = c\n")
    bad = SCHEMA.replace("columns = TRAIN_TT, SM_TT, CAR_TT", "columns = TRAIN_TT, SM_TT")
    with pytest.raises(SchemaError, match="TT"):
        Schema.from_ini(bad)


def test_schema_roundtrip_and_fingerprint():
    s = Schema.from_ini(SCHEMA)
    s2 = Schema.from_ini(s.to_ini())
    assert s2.to_dict() == s.to_dict()
    assert Schema.from_dict(s.to_dict()).fingerprint() == s.fingerprint()
    other = Schema.from_ini(SCHEMA.replace("names = Train, SM, Car", "names = Train, SM, Auto").replace("Car = CAR_AV", "Auto = CAR_AV").replace("alternatives = Car", "alternatives = Auto"))
    assert other.fingerprint() != s.fingerprint()
    # scale does not change what the model expects
    assert Schema.from_ini(SCHEMA.replace("scale = 0.01", "scale = 1", 1)).fingerprint() == s.fingerprint()


def test_split_by_index_file(files, tmp_path):
    schema, data = files
    ds = load_csv(data, Schema.load(schema))
    (tmp_path / "idx.txt").write_text("0\n2\n")
    tr, te = split(ds, train_index=tmp_path / "idx.txt")
    assert list(tr.choice) == [0, 2] and list(te.choice) == [1, 2]
    with pytest.raises(DataError, match="duplicates"):
        split(ds, train_index=[0, 0])
    with pytest.raises(DataError, match="out of range"):
        split(ds, train_index=[7])
    with pytest.warns(UserWarning, match="empty"):
        split(ds, train_index=[0, 1, 2, 3])


def test_split_fraction_reproducible(rng):
    from oracles import random_dataset

    ds = random_dataset(rng, 100, 3, 1, 1, 3)
    a = split(ds, fraction=0.8, seed=4)
    b = split(ds, fraction=0.8, seed=4)
    assert len(a[0]) == 80 and len(a[1]) == 20
    assert np.array_equal(a[0].X, b[0].X)


def test_dummy_expand_counts_and_placement(files):
    schema, data = files
    ds = load_csv(data, Schema.load(schema))
    d = dummy_expand(ds)
    new = d.feature_names[len(ds.feature_names):]
    assert new == [
        "PURPOSE=2@SM", "PURPOSE=2@Car", "PURPOSE=3@SM", "PURPOSE=3@Car", "GA=1@SM", "GA=1@Car",
    ]
    assert d.vocabulary.n_variables == 0
    k = d.feature_names.index("PURPOSE=2@SM")
    np.testing.assert_array_equal(d.X[1, :, k], [0, 1, 0])
    assert len(new) == dummy_count([3, 2], 3)

    d2 = dummy_expand(ds, ["PURPOSE=3", "GA=1@Car"])
    assert "PURPOSE=3@SM" not in d2.feature_names and "GA=1@Car" not in d2.feature_names
    assert "GA=1@SM" in d2.feature_names


def test_dummy_expand_errors(files):
    schema, data = files
    ds = load_csv(data, Schema.load(schema))
    with pytest.raises(DataError, match="no dummy"):
        dummy_expand(ds, ["GA=1"])
    with pytest.raises(DataError, match="ambiguous"):
        dummy_expand(ds, ["1"])
    with pytest.raises(DataError, match="not found"):
        dummy_expand(ds, ["PURPOSE=7"])


def test_four_categories_one_dropped_gives_three():
    assert dummy_count([4], 2, drops=0, reference="none") - 1 == 3


def test_dummy_counts_benchmark_dimensions():
    # only the totals matter: 12 variables over 81 categories, six extra drops, 2 coefficient alternatives
    sizes = [9, 2, 11, 4, 2, 4, 3, 6, 2, 2, 26, 10]
    assert sum(sizes) == 81
    assert 5 + dummy_count(sizes, 3, drops=6) == 131
    # 10 variables over 79 categories, binary
    assert 3 + dummy_count([6, 4, 5, 3, 10, 10, 10, 5, 13, 13], 2) == 72


def test_discretize_right_closed():
    labels = discretize([1, 2, 2.5, 13], [1, 2, 3, 4, 13])
    assert labels == ["[1,2]", "[1,2]", "(2,3]", "(4,13]"]
    assert bin_labels([0, 250, 400]) == ["[0,250]", "(250,400]"]
    with pytest.raises(DataError, match="outside"):
        discretize([0.5, 14], [1, 2, 3, 4, 13])


@given(st.lists(st.floats(0, 870, allow_nan=False), min_size=1, max_size=30))
def test_discretize_label_contains_value(values):
    edges = [0, 250, 400, 550, 700, 870]
    for x, lab in zip(values, discretize(values, edges)):
        lo, hi = (float(t) for t in lab.strip("[(]").split(","))
        assert (lo <= x if lab[0] == "[" else lo < x) and x <= hi


def test_categorical_edges_in_schema(tmp_path):
    (tmp_path / "s.ini").write_text(
        "[alternatives]\nnames = Car, NoCar\nreference = NoCar\n[choice]\ncolumn = y\ncodes = 1, 0\n"
        "[continuous:dist]\ncolumns = d\nmode = specific\nalternatives = Car\n"
        "[categorical:FamN]\ncolumn = n\nedges = 1, 2, 3, 4, 13\n"
    )
    (tmp_path / "d.csv").write_text("y,d,n\n1,2.5,1\n0,1.0,5\n1,0.0,3\n")
    ds = load_csv(tmp_path / "d.csv", Schema.load(tmp_path / "s.ini"))
    assert ds.vocabulary.categories == [["[1,2]", "(4,13]", "(2,3]"]]
    assert ds.feature_names == ["ASC_Car", "dist_Car"]
    np.testing.assert_allclose(ds.X[:, 1, :], 0.0)
