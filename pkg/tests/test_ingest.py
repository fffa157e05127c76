"""Matrix loading, normalization, binarization and amplitude encoding."""

import numpy as np
import pytest

from qxtalk.ingest import (
    MAX_GENES_PER_TYPE,
    AmplitudeVector,
    ExpressionMatrix,
    GeneSelection,
    StateHistogram,
    TargetDistribution,
    amplitudes,
    binarize,
    load_matrix,
    log_normalize,
    target_distribution,
)


def write(tmp_path, text, name="matrix.csv"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadMatrix:
    def test_basic_csv(self, tmp_path):
        path = write(tmp_path, "gA,gB,gC\n1,2,3\n0,5,0\n")
        m = load_matrix(path)
        assert m.gene_names == ["gA", "gB", "gC"]
        assert m.values.shape == (2, 3)
        assert m.values[1, 1] == 5.0

    def test_tsv_sniffed(self, tmp_path):
        path = write(tmp_path, "gA\tgB\n1\t2\n", name="matrix.tsv")
        m = load_matrix(path)
        assert m.gene_names == ["gA", "gB"]
        assert m.values[0, 1] == 2.0

    def test_explicit_delimiter(self, tmp_path):
        path = write(tmp_path, "gA;gB\n1;2\n")
        m = load_matrix(path, delimiter=";")
        assert m.gene_names == ["gA", "gB"]

    def test_row_label_column_tolerated(self, tmp_path):
        path = write(tmp_path, "gA,gB\ncell_0,1,2\ncell_1,3,4\n")
        m = load_matrix(path)
        assert m.values.shape == (2, 2)
        assert m.values[1, 0] == 3.0

    def test_leading_unnamed_index_column(self, tmp_path):
        path = write(tmp_path, ",gA,gB\nc0,1,2\nc1,3,4\n")
        m = load_matrix(path)
        assert m.gene_names == ["gA", "gB"]
        assert m.values[0, 1] == 2.0

    def test_duplicate_gene_reports_both_columns(self, tmp_path):
        path = write(tmp_path, "gA,gB,gA\n1,2,3\n")
        with pytest.raises(ValueError, match="duplicate gene"):
            load_matrix(path)

    def test_ragged_row_reports_row_number(self, tmp_path):
        path = write(tmp_path, "gA,gB\n1,2\n1,2,3\n")
        with pytest.raises(ValueError, match="row 3"):
            load_matrix(path)

    def test_non_numeric_reports_row_and_gene(self, tmp_path):
        path = write(tmp_path, "gA,gB\n1,huh\n")
        with pytest.raises(ValueError, match="row 2.*'gB'"):
            load_matrix(path)

    def test_negative_value_rejected(self, tmp_path):
        path = write(tmp_path, "gA,gB\n1,-2\n")
        with pytest.raises(ValueError, match="negative"):
            load_matrix(path)

    def test_empty_file(self, tmp_path):
        path = write(tmp_path, "")
        with pytest.raises(ValueError):
            load_matrix(path)

    def test_header_only(self, tmp_path):
        path = write(tmp_path, "gA,gB\n")
        with pytest.raises(ValueError, match="no cell rows"):
            load_matrix(path)


class TestLogNormalize:
    def test_median_scaling_and_log1p(self):
        m = ExpressionMatrix(values=np.array([[2.0, 0.0], [4.0, 4.0]]), gene_names=["a", "b"])
        out = log_normalize(m)
        # library sizes 2 and 8, median 5 -> scales 2.5 and 0.625
        assert out.values[0, 0] == pytest.approx(np.log1p(5.0))
        assert out.values[0, 1] == 0.0
        assert out.values[1, 0] == pytest.approx(np.log1p(2.5))

    def test_equal_libraries_unscaled(self):
        m = ExpressionMatrix(values=np.array([[1.0, 3.0], [3.0, 1.0]]), gene_names=["a", "b"])
        out = log_normalize(m)
        assert np.allclose(out.values, np.log1p(m.values))

    def test_zero_cell_reports_row(self):
        m = ExpressionMatrix(values=np.array([[1.0, 1.0], [0.0, 0.0]]), gene_names=["a", "b"])
        with pytest.raises(ValueError, match="row 2"):
            log_normalize(m)


class TestBinarize:
    def test_bitstring_tallies(self):
        # cells: (a on, b off), (a on, b on), (both off), (a on, b on)
        values = np.array([[1.0, 0.0], [2.0, 1.0], [0.0, 0.0], [5.0, 3.0]])
        m = ExpressionMatrix(values=values, gene_names=["a", "b"])
        h = binarize(m, GeneSelection(cell_type_label="T", genes=["a", "b"]))
        assert h.num_genes == 2
        assert h.counts == {"10": 1, "11": 2, "00": 1}
        assert h.total() == 4

    def test_gene_order_defines_bit_order(self):
        values = np.array([[1.0, 0.0]])
        m = ExpressionMatrix(values=values, gene_names=["a", "b"])
        h_ab = binarize(m, GeneSelection(cell_type_label="T", genes=["a", "b"]))
        h_ba = binarize(m, GeneSelection(cell_type_label="T", genes=["b", "a"]))
        assert h_ab.counts == {"10": 1}
        assert h_ba.counts == {"01": 1}

    def test_missing_gene(self):
        m = ExpressionMatrix(values=np.array([[1.0]]), gene_names=["a"])
        with pytest.raises(ValueError, match="not present"):
            binarize(m, GeneSelection(cell_type_label="T", genes=["zz"]))

    def test_subset_selection(self):
        values = np.array([[1.0, 9.0, 0.0], [0.0, 9.0, 2.0]])
        m = ExpressionMatrix(values=values, gene_names=["a", "b", "c"])
        h = binarize(m, GeneSelection(cell_type_label="T", genes=["a", "c"]))
        assert h.counts == {"10": 1, "01": 1}


class TestAmplitudeEncoding:
    def test_three_four_five(self):
        h = StateHistogram(num_genes=1, counts={"0": 3, "1": 4})
        a = amplitudes(h)
        assert np.allclose(a.amplitudes, [0.6, 0.8])

    def test_counts_weighted_by_squares_not_frequencies(self):
        # squared-count weighting: P(1) = 16/25, not the frequency 4/7
        h = StateHistogram(num_genes=1, counts={"0": 3, "1": 4})
        q = target_distribution(h)
        assert q.probabilities[1] == pytest.approx(0.64)
        assert q.probabilities[0] == pytest.approx(0.36)

    def test_unit_norm(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            d = int(rng.integers(1, 5))
            counts = {}
            for i in rng.choice(1 << d, size=rng.integers(1, 1 << d), replace=False):
                counts[format(int(i), f"0{d}b")[::-1]] = int(rng.integers(1, 50))
            a = amplitudes(StateHistogram(num_genes=d, counts=counts))
            assert np.linalg.norm(a.amplitudes) == pytest.approx(1.0, abs=1e-12)

    def test_empty_histogram_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            amplitudes(StateHistogram(num_genes=1, counts={}))

    def test_state_placement_is_little_endian(self):
        # bitstring "01" = gene0 off, gene1 on -> basis index 2
        h = StateHistogram(num_genes=2, counts={"01": 1})
        a = amplitudes(h)
        assert a.amplitudes[2] == 1.0


class TestValidation:
    def test_matrix_rejects_nan(self):
        with pytest.raises(ValueError):
            ExpressionMatrix(values=np.array([[np.nan]]), gene_names=["a"])

    def test_matrix_rejects_duplicate_names(self):
        with pytest.raises(ValueError):
            ExpressionMatrix(values=np.zeros((1, 2)), gene_names=["a", "a"])

    def test_selection_size_cap(self):
        genes = [f"g{i}" for i in range(MAX_GENES_PER_TYPE + 1)]
        with pytest.raises(ValueError):
            GeneSelection(cell_type_label="T", genes=genes)

    def test_selection_rejects_duplicates(self):
        with pytest.raises(ValueError):
            GeneSelection(cell_type_label="T", genes=["a", "a"])

    def test_selection_rejects_empty(self):
        with pytest.raises(ValueError):
            GeneSelection(cell_type_label="T", genes=[])

    def test_histogram_key_length_checked(self):
        with pytest.raises(ValueError):
            StateHistogram(num_genes=2, counts={"011": 1})

    def test_histogram_key_chars_checked(self):
        with pytest.raises(ValueError):
            StateHistogram(num_genes=2, counts={"0x": 1})

    def test_histogram_negative_count(self):
        with pytest.raises(ValueError):
            StateHistogram(num_genes=1, counts={"0": -1})

    def test_amplitude_vector_requires_unit_norm(self):
        with pytest.raises(ValueError):
            AmplitudeVector(num_qubits=1, amplitudes=np.array([1.0, 1.0]))

    def test_amplitude_vector_rejects_negative(self):
        with pytest.raises(ValueError):
            AmplitudeVector(num_qubits=1, amplitudes=np.array([-0.6, 0.8]))

    def test_target_distribution_sums_to_one(self):
        with pytest.raises(ValueError):
            TargetDistribution(num_qubits=1, probabilities=np.array([0.3, 0.3]))
