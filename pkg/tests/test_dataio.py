import statistics
import warnings

import numpy as np
import pytest

from fourpl import ColumnSchema, DataError, dichotomise, load_dataset, standardised_score


class TestDichotomise:
    def test_never_maps_to_zero(self):
        assert dichotomise(np.array([[1]]))[0, 0] == 0

    def test_at_least_rarely_maps_to_one(self):
        out = dichotomise(np.array([[2, 3, 4, 5]]))
        assert np.all(out == 1)

    def test_cut_above_scale_gives_all_zeros(self):
        out = dichotomise(np.array([[1, 2, 3, 4, 5]]), cut=6)
        assert np.all(out == 0)

    def test_out_of_range_rejected(self):
        with pytest.raises(DataError):
            dichotomise(np.array([[0, 2]]))
        with pytest.raises(DataError):
            dichotomise(np.array([[1, 6]]))
        with pytest.raises(DataError):
            dichotomise(np.array([[1.5, 2]]))


class TestStandardisedScore:
    def test_mean_zero_sd_one(self):
        rng = np.random.default_rng(8)
        responses = rng.integers(1, 6, size=(120, 10))
        scores = standardised_score(responses)
        assert float(np.mean(scores)) == pytest.approx(0.0, abs=1e-12)
        assert float(np.std(scores, ddof=1)) == pytest.approx(1.0, abs=1e-12)

    def test_two_respondents_symmetric(self):
        responses = np.array([[5, 5, 5, 5, 5, 4], [5, 5, 5, 5, 5, 5]])
        scores = standardised_score(responses)
        assert scores[0] == pytest.approx(-scores[1])

    def test_zero_variance_rejected(self):
        with pytest.raises(DataError, match="variance"):
            standardised_score(np.full((5, 4), 3))

    def test_survey_shaped_matrix_matches_spreadsheet_recount(self):
        # 766 x 29 synthetic survey; the oracle recomputes with stdlib
        # statistics on per-row sums.
        rng = np.random.default_rng(766)
        responses = rng.integers(1, 6, size=(766, 29))
        scores = standardised_score(responses)
        sums = [sum(int(v) for v in row) for row in responses]
        mean = statistics.fmean(sums)
        sd = statistics.stdev(sums)
        oracle = [(s - mean) / sd for s in sums]
        np.testing.assert_allclose(scores, oracle, atol=1e-12)


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


SCHEMA = ColumnSchema(item_columns=("R1", "R2"), criterion_column="derive")


class TestLoadDataset:
    def test_loads_survey_shape(self, tmp_path):
        rng = np.random.default_rng(5)
        rows = ["R1,R2,age"]
        for _ in range(766):
            rows.append(f"{rng.integers(1, 6)},{rng.integers(1, 6)},{rng.integers(0, 2)}")
        path = write(tmp_path, "\n".join(rows) + "\n")
        frame = load_dataset(path, SCHEMA)
        assert frame.shape[0] == 766
        assert frame["R1"].dtype == np.float64

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_dataset(tmp_path / "absent.csv", SCHEMA)

    def test_empty_file(self, tmp_path):
        with pytest.raises(DataError, match="empty"):
            load_dataset(write(tmp_path, ""), SCHEMA)

    def test_duplicate_header(self, tmp_path):
        with pytest.raises(DataError, match="duplicate"):
            load_dataset(write(tmp_path, "R1,R1,R2\n1,2,3\n"), SCHEMA)

    def test_missing_column_before_rows(self, tmp_path):
        # the malformed cell in the data rows must not be reached
        path = write(tmp_path, "R1,other\nnot_a_number,1\n")
        with pytest.raises(DataError, match="missing column"):
            load_dataset(path, SCHEMA)

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        path = write(tmp_path, "R1,R2\n1,2\n3,abc\n")
        with pytest.raises(DataError, match=r"row 3, column 'R2'"):
            load_dataset(path, SCHEMA)

    def test_missing_values_rejected_with_row_numbers(self, tmp_path):
        path = write(tmp_path, "R1,R2\n1,2\n,3\n4,5\n")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            frame = load_dataset(path, SCHEMA)
        assert frame.shape[0] == 2
        messages = [str(w.message) for w in caught]
        assert any("line(s) 3" in m for m in messages)

    def test_all_rows_missing_rejected(self, tmp_path):
        path = write(tmp_path, "R1,R2\n,1\n,2\n")
        with pytest.raises(DataError, match="every row"):
            load_dataset(path, SCHEMA)

    def test_unreferenced_columns_untouched(self, tmp_path):
        path = write(tmp_path, "R1,R2,comment\n1,2,hello\n3,4,world\n")
        frame = load_dataset(path, SCHEMA)
        assert list(frame["comment"]) == ["hello", "world"]


class TestColumnSchema:
    def test_requires_items(self):
        with pytest.raises(DataError):
            ColumnSchema(item_columns=())

    def test_unique_names(self):
        with pytest.raises(DataError):
            ColumnSchema(item_columns=("R1", "R1"))

    def test_referenced_columns(self):
        schema = ColumnSchema(
            item_columns=("R1",),
            criterion_column="score",
            group_column="gender",
            asymptote_covariates=("age",),
        )
        assert schema.referenced_columns() == ["R1", "score", "gender", "age"]
