import io
import math

import pytest

from pavesim.errors import DataError
from pavesim.tables import (
    BOOLEAN,
    CATEGORICAL,
    FEATURE_COLUMNS,
    NUMERIC,
    PAVING_COLUMNS,
    PAVING_KINDS,
    RecordTable,
    ScenarioFeatures,
    format_cell,
    load_csv,
    read_csv,
    save_csv,
    table_to_csv,
)

HEADER = ",".join(PAVING_COLUMNS)


def test_read_csv_parses_schema_row():
    text = HEADER + "\n66.08,3.0,1,0,4.6,5.3,59.6,-0.7880,0.001,4.0\n"
    table = read_csv(io.StringIO(text))
    assert table.num_rows == 1
    assert table.column_kinds == PAVING_KINDS
    row = table.rows[0]
    assert row[0] == 66.08
    assert row[1] == 3.0
    assert row[2] == 1.0
    assert row[3] == 0.0
    assert row[-1] == 4.0


def test_read_csv_header_only_gives_zero_rows():
    table = read_csv(io.StringIO(HEADER + "\n"))
    assert table.num_rows == 0
    assert table.column_names == PAVING_COLUMNS


def test_read_csv_ragged_row_names_the_row():
    text = HEADER + "\n1,2,0,0,4,5,6,7,8,9\n1,2,0,0,4,5,6,7,8\n"
    with pytest.raises(DataError, match="row 1"):
        read_csv(io.StringIO(text))


def test_read_csv_bad_numeric_cell_names_row_and_column():
    text = HEADER + "\nabc,3.0,1,0,4.6,5.3,59.6,-0.7,0.001,4.0\n"
    with pytest.raises(DataError, match="row 0.*'Productivity'"):
        read_csv(io.StringIO(text))


def test_read_csv_rejects_non_binary_boolean_cell():
    text = HEADER + "\n66.0,3.0,2,0,4.6,5.3,59.6,-0.7,0.001,4.0\n"
    with pytest.raises(DataError, match="Congestion"):
        read_csv(io.StringIO(text))


def test_read_csv_skips_comment_lines_anywhere():
    text = "# audit line\n" + HEADER + "\n# mid comment\n" \
        "66.0,3.0,1,0,4.6,5.3,59.6,-0.7,0.001,4.0\n"
    table = read_csv(io.StringIO(text))
    assert table.num_rows == 1


def test_read_csv_empty_cell_becomes_missing():
    text = HEADER + "\n66.0,,1,0,4.6,5.3,59.6,-0.7,0.001,4.0\n"
    table = read_csv(io.StringIO(text))
    assert table.rows[0][1] is None


def test_read_csv_unknown_header_is_all_numeric():
    table = read_csv(io.StringIO("A,B\n1,2\n"))
    assert table.column_kinds == (NUMERIC, NUMERIC)


def test_read_csv_extra_columns_after_schema_are_numeric():
    text = HEADER + ",MuStar,SigmaStar\n" \
        "66.0,3.0,1,0,4.6,5.3,59.6,-0.7,0.001,4.0,65.0,2.0\n"
    table = read_csv(io.StringIO(text))
    assert table.column_kinds == PAVING_KINDS + (NUMERIC, NUMERIC)


def test_read_csv_no_header_is_an_error():
    with pytest.raises(DataError, match="header"):
        read_csv(io.StringIO(""))


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        load_csv(tmp_path / "nope.csv")


def test_record_table_rejects_duplicate_names():
    with pytest.raises(DataError, match="unique"):
        RecordTable(("A", "A"), (NUMERIC, NUMERIC), ())


def test_record_table_rejects_ragged_rows():
    with pytest.raises(DataError, match="row 0"):
        RecordTable(("A", "B"), (NUMERIC, NUMERIC), ((1.0,),))


def test_record_table_rejects_unknown_kind():
    with pytest.raises(DataError, match="unknown kind"):
        RecordTable(("A",), ("weird",), ())


def test_record_table_rejects_non_binary_boolean():
    with pytest.raises(DataError, match="boolean"):
        RecordTable(("A",), (BOOLEAN,), ((0.5,),))


def test_record_table_boolean_allows_missing():
    table = RecordTable(("A",), (BOOLEAN,), ((None,), (1.0,)))
    assert table.rows[0][0] is None


def test_column_lookup_and_missing_column():
    table = RecordTable(("A", "B"), (NUMERIC, BOOLEAN), ((1.0, 0.0),))
    assert table.column_index("B") == 1
    assert table.column_kind("B") == BOOLEAN
    assert table.column_values("A") == [1.0]
    with pytest.raises(DataError, match="no column named 'C'"):
        table.column_index("C")


def test_select_columns_reorders():
    table = RecordTable(("A", "B", "C"), (NUMERIC,) * 3, ((1.0, 2.0, 3.0),))
    picked = table.select_columns(["C", "A"])
    assert picked.column_names == ("C", "A")
    assert picked.rows == ((3.0, 1.0),)


def test_scenario_features_mapping_round_trip():
    f = ScenarioFeatures(
        slump=3.0, congestion=0.0, spreader=1.0, air_entrainment=4.5,
        temperature=7.7, humidity=60.1, slope=1.2028, curvature=-0.001,
        paver_age=0.0,
    )
    assert tuple(f.as_mapping()) == FEATURE_COLUMNS
    assert ScenarioFeatures.from_mapping(f.as_mapping()) == f


def test_scenario_features_from_mapping_reports_missing():
    with pytest.raises(DataError, match="Slump"):
        ScenarioFeatures.from_mapping({"Congestion": 0.0})


@pytest.mark.parametrize("field,value,message", [
    ("congestion", 2.0, "congestion"),
    ("spreader", 0.5, "spreader"),
    ("humidity", 101.0, "humidity"),
    ("humidity", -1.0, "humidity"),
    ("air_entrainment", -0.1, "air_entrainment"),
    ("paver_age", -1.0, "paver_age"),
    ("slope", math.inf, "finite"),
])
def test_scenario_features_invariants(field, value, message):
    base = dict(
        slump=4.0, congestion=0.0, spreader=0.0, air_entrainment=4.5,
        temperature=20.0, humidity=70.0, slope=0.0, curvature=0.0,
        paver_age=0.0,
    )
    base[field] = value
    with pytest.raises(DataError, match=message):
        ScenarioFeatures(**base)


def test_format_cell_conventions():
    assert format_cell(None, NUMERIC) == ""
    assert format_cell(1.0, BOOLEAN) == "1"
    assert format_cell("rainy", CATEGORICAL) == "rainy"
    # repr floats round-trip exactly
    assert float(format_cell(0.1 + 0.2, NUMERIC)) == 0.1 + 0.2


def test_csv_round_trip_is_exact(tmp_path):
    table = RecordTable(
        ("Condition", "Duration", "Flag"),
        (CATEGORICAL, NUMERIC, BOOLEAN),
        (("rainy", 0.1 + 0.2, 1.0), ("sunny", -17.25, 0.0), ("windy", None, 1.0)),
    )
    path = tmp_path / "t.csv"
    save_csv(table, path, header_comments=("written by a test",))
    back = load_csv(path, kinds=table.column_kinds)
    assert back == table


def test_table_to_csv_comment_header_lines():
    table = RecordTable(("A",), (NUMERIC,), ((1.0,),))
    text = table_to_csv(table, header_comments=("one", "two"))
    assert text.startswith("# one\n# two\nA\n")
