"""Tests for cohort files, preprocessing and fold assignment."""

import logging
from pathlib import Path

import numpy as np
import pytest

from apl_survival.data import (
    ExpressionNormalizer,
    TimeBins,
    decode_embeddings,
    discretize_survival,
    encode_embeddings,
    generate_synthetic,
    load_cohort,
    make_folds,
    read_embeddings,
    read_manifest,
    read_pathways,
    resolve_pathways,
    write_embeddings,
)
from apl_survival.data.formats import write_expression, write_manifest, write_pathways
from apl_survival.errors import CohortError, DiscretizationError, EmbeddingFormatError, FoldError
from apl_survival.models import PathwayDefinition

from tests.helpers import make_case, small_params


def _write_cohort(directory: Path, n_cases: int = 3, dim: int = 4) -> Path:
    """A minimal on-disk cohort with two pathways; returns the manifest path."""
    rng = np.random.default_rng(0)
    (directory / "embeddings").mkdir(parents=True)
    rows = []
    case_ids = [f"c{i}" for i in range(n_cases)]
    for i, case_id in enumerate(case_ids):
        rel = f"embeddings/{case_id}.pemb"
        write_embeddings(directory / rel, rng.normal(size=(2 + i, dim)))
        rows.append((case_id, rel, 5.0 + i, i % 2 == 0))
    write_manifest(directory / "manifest.csv", rows)
    genes = ["A", "B", "C"]
    write_expression(directory / "expression.csv", genes, case_ids, rng.normal(size=(3, n_cases)))
    write_pathways(directory / "pathways.tsv", [PathwayDefinition("P1", ("A", "B")), PathwayDefinition("P2", ("C",))])
    return directory / "manifest.csv"


class TestEmbeddingFormat:
    """Tests for the PEMB patch-embedding layout."""

    def test_decode_returns_float64(self):
        """Values are stored as float32 and read back as float64."""
        x = np.array([[0.5, -1.25], [3.0, 2.0], [0.0, 1.0]])
        out = decode_embeddings(encode_embeddings(x))
        assert out.dtype == np.float64
        np.testing.assert_array_equal(out, x)

    def test_header_is_sixteen_bytes(self):
        """Header plus n * dim float32 values."""
        raw = encode_embeddings(np.zeros((5, 3)))
        assert len(raw) == 16 + 5 * 3 * 4
        assert raw[:4] == b"PEMB"

    def test_bad_magic(self):
        """A foreign file is rejected."""
        raw = b"XXXX" + encode_embeddings(np.ones((1, 2)))[4:]
        with pytest.raises(EmbeddingFormatError, match="magic"):
            decode_embeddings(raw)

    def test_unknown_version(self):
        """Only version 1 is understood."""
        raw = bytearray(encode_embeddings(np.ones((1, 2))))
        raw[4] = 7
        with pytest.raises(EmbeddingFormatError, match="version"):
            decode_embeddings(bytes(raw))

    def test_truncated_payload(self):
        """Missing bytes are detected against the header."""
        raw = encode_embeddings(np.ones((2, 2)))[:-4]
        with pytest.raises(EmbeddingFormatError, match="payload"):
            decode_embeddings(raw)

    def test_short_file(self):
        """Fewer bytes than a header."""
        with pytest.raises(EmbeddingFormatError):
            decode_embeddings(b"PEMB")

    def test_expected_dimension(self):
        """A dimension other than the model's is an error."""
        with pytest.raises(EmbeddingFormatError, match="dimension"):
            decode_embeddings(encode_embeddings(np.ones((2, 3))), expected_dim=4)

    def test_encode_rejects_empty(self):
        """Zero patches cannot be written."""
        with pytest.raises(EmbeddingFormatError):
            encode_embeddings(np.empty((0, 3)))

    def test_missing_file(self, tmp_path):
        """Unreadable files surface as cohort errors."""
        with pytest.raises(CohortError):
            read_embeddings(tmp_path / "nope.pemb")


class TestManifest:
    """Tests for manifest parsing."""

    def test_paths_resolve_relative_to_manifest(self, tmp_path):
        """Embedding, expression and pathway paths sit beside the manifest."""
        manifest = read_manifest(_write_cohort(tmp_path / "cohort"))
        assert manifest.case_ids == ["c0", "c1", "c2"]
        assert manifest.entries[1].embedding_path == tmp_path / "cohort" / "embeddings" / "c1.pemb"
        assert manifest.entries[0].event is True
        assert manifest.entries[1].event is False
        assert manifest.entries[2].survival_months == 7.0
        assert manifest.expression_path == tmp_path / "cohort" / "expression.csv"

    def _rewrite(self, path: Path, text: str) -> Path:
        path.write_text(text)
        return path

    def test_missing_columns(self, tmp_path):
        """All four columns are required."""
        path = _write_cohort(tmp_path)
        self._rewrite(path, "case_id,embedding_path,event\nc0,embeddings/c0.pemb,1\n")
        with pytest.raises(CohortError, match="missing columns"):
            read_manifest(path)

    def test_duplicate_case_ids(self, tmp_path):
        """Case ids are unique."""
        path = _write_cohort(tmp_path)
        self._rewrite(path, "case_id,embedding_path,survival_months,event\n"
                            "c0,embeddings/c0.pemb,1.0,1\nc0,embeddings/c1.pemb,2.0,0\n")
        with pytest.raises(CohortError, match="duplicate"):
            read_manifest(path)

    def test_bad_event_label(self, tmp_path):
        """event is 0 or 1; the row is named."""
        path = _write_cohort(tmp_path)
        self._rewrite(path, "case_id,embedding_path,survival_months,event\nc0,embeddings/c0.pemb,1.0,2\n")
        with pytest.raises(CohortError, match=r"manifest.csv:2"):
            read_manifest(path)

    @pytest.mark.parametrize("months", ["-1.0", "abc"])
    def test_bad_survival_months(self, tmp_path, months):
        """Negative or non-numeric times are rejected."""
        path = _write_cohort(tmp_path)
        self._rewrite(path, f"case_id,embedding_path,survival_months,event\nc0,embeddings/c0.pemb,{months},1\n")
        with pytest.raises(CohortError, match="survival_months"):
            read_manifest(path)

    def test_missing_embedding_file(self, tmp_path):
        """Every listed embedding must exist."""
        path = _write_cohort(tmp_path)
        self._rewrite(path, "case_id,embedding_path,survival_months,event\nc9,embeddings/c9.pemb,1.0,1\n")
        with pytest.raises(CohortError, match="does not exist"):
            read_manifest(path)

    def test_missing_expression_matrix(self, tmp_path):
        """The expression matrix defaults to the manifest's directory."""
        path = _write_cohort(tmp_path)
        (tmp_path / "expression.csv").unlink()
        with pytest.raises(CohortError, match="expression.csv"):
            read_manifest(path)


class TestPathways:
    """Tests for pathway files and gene resolution."""

    def test_parse(self, tmp_path):
        """Blank lines are skipped and gene lists split on commas."""
        path = tmp_path / "pathways.tsv"
        path.write_text("P1\tA, B,C\n\nP2\tD\n")
        pathways = read_pathways(path)
        assert pathways == [PathwayDefinition("P1", ("A", "B", "C")), PathwayDefinition("P2", ("D",))]

    @pytest.mark.parametrize("text,message", [
        ("P1 A,B\n", "expected"),
        ("P1\t\n", "no genes"),
        ("P1\tA\nP1\tB\n", "duplicate"),
        ("\n\n", "no pathways"),
    ])
    def test_malformed(self, tmp_path, text, message):
        """Bad lines are reported with their position."""
        path = tmp_path / "pathways.tsv"
        path.write_text(text)
        with pytest.raises(CohortError, match=message):
            read_pathways(path)

    def test_missing_genes_are_dropped_with_warning(self, caplog):
        """Absent genes are removed and logged."""
        pathways = [PathwayDefinition("P1", ("A", "B", "Z"))]
        with caplog.at_level(logging.WARNING):
            resolved = resolve_pathways(pathways, {"A", "B"})
        assert resolved == [PathwayDefinition("P1", ("A", "B"))]
        assert "Z" in caplog.text

    def test_pathway_without_any_gene(self):
        """A pathway emptied by resolution is an error."""
        with pytest.raises(CohortError, match="none of its"):
            resolve_pathways([PathwayDefinition("P1", ("X",))], {"A"})


class TestLoadCohort:
    """Tests for assembling cases from disk."""

    def test_assembles_cases(self, tmp_path):
        """Each case carries its patches and per-pathway expression."""
        cohort = load_cohort(_write_cohort(tmp_path))
        assert len(cohort) == 3
        assert cohort.pathway_sizes == [2, 1]
        assert cohort.d_in == 4
        assert cohort[2].n_patches == 4
        assert cohort.find("c1").event is False

    def test_matches_in_memory_synthetic_cohort(self, tmp_path):
        """Reading the generator's files gives the same cases as its in-memory form."""
        synthetic, manifest = generate_synthetic(tmp_path / "synth", small_params(n_cases=12))
        loaded = load_cohort(manifest)
        expected = synthetic.to_cohort()
        assert loaded.pathways == expected.pathways
        for a, b in zip(loaded, expected):
            assert a.case_id == b.case_id
            assert a.survival_months == b.survival_months
            assert a.event == b.event
            np.testing.assert_array_equal(a.patch_embeddings, b.patch_embeddings)
            for x, y in zip(a.pathway_inputs, b.pathway_inputs):
                np.testing.assert_array_equal(x, y)

    def test_expected_dimension_is_enforced(self, tmp_path):
        """A model dimension other than the files' is rejected."""
        with pytest.raises(EmbeddingFormatError):
            load_cohort(_write_cohort(tmp_path), expected_dim=5)

    def test_case_without_expression_column(self, tmp_path):
        """Every case needs an expression profile."""
        path = _write_cohort(tmp_path)
        write_expression(tmp_path / "expression.csv", ["A", "B", "C"], ["c0", "c1"], np.zeros((3, 2)))
        with pytest.raises(CohortError, match="c2"):
            load_cohort(path)

    @pytest.mark.parametrize("cell", ["", "nan", "NA"])
    def test_missing_expression_value(self, tmp_path, cell):
        """A blank or NaN cell is reported with its gene and case, not loaded as NaN."""
        path = _write_cohort(tmp_path)
        (tmp_path / "expression.csv").write_text(
            f"gene_id,c0,c1,c2\nA,0.5,1.5,-0.25\nB,1.0,{cell},2.0\nC,0.0,0.1,0.2\n"
        )
        with pytest.raises(CohortError, match="gene B, case c1"):
            load_cohort(path)

    def test_duplicate_gene_rows(self, tmp_path):
        """A gene listed twice would lengthen its pathway vector."""
        path = _write_cohort(tmp_path)
        write_expression(tmp_path / "expression.csv", ["A", "B", "C", "A"], ["c0", "c1", "c2"],
                         np.zeros((4, 3)))
        with pytest.raises(CohortError, match="duplicate gene ids A"):
            load_cohort(path)


class TestExpressionNormalizer:
    """Tests for per-gene z-scoring."""

    def test_standardizes_training_split(self):
        """Fitted statistics give zero mean and unit population std."""
        rng = np.random.default_rng(0)
        cases = [make_case(rng, f"c{i}") for i in range(30)]
        normalized = ExpressionNormalizer.fit(cases).transform(cases)
        for p in range(2):
            values = np.stack([c.pathway_inputs[p] for c in normalized])
            np.testing.assert_allclose(values.mean(axis=0), 0.0, atol=1e-12)
            np.testing.assert_allclose(values.std(axis=0), 1.0, rtol=1e-12)

    def test_constant_gene_uses_unit_std(self):
        """A gene with no spread is centred, not divided by zero."""
        rng = np.random.default_rng(1)
        cases = [make_case(rng, f"c{i}") for i in range(4)]
        for c in cases:
            c.pathway_inputs[0][0] = 2.5
        normalizer = ExpressionNormalizer.fit(cases)
        assert normalizer.stds[0][0] == 1.0
        assert all(c.pathway_inputs[0][0] == 0.0 for c in normalizer.transform(cases))

    def test_transform_returns_copies(self):
        """Inputs are not modified."""
        rng = np.random.default_rng(2)
        case = make_case(rng)
        before = [x.copy() for x in case.pathway_inputs]
        ExpressionNormalizer.fit([case, make_case(rng, "c1")]).transform_case(case)
        for x, y in zip(case.pathway_inputs, before):
            np.testing.assert_array_equal(x, y)

    def test_serialization(self):
        """to_dict / from_dict preserve the statistics."""
        rng = np.random.default_rng(3)
        normalizer = ExpressionNormalizer.fit([make_case(rng, f"c{i}") for i in range(5)])
        restored = ExpressionNormalizer.from_dict(normalizer.to_dict())
        for a, b in zip(normalizer.means + normalizer.stds, restored.means + restored.stds):
            np.testing.assert_array_equal(a, b)

    def test_empty_split(self):
        """Statistics need at least one case."""
        with pytest.raises(CohortError):
            ExpressionNormalizer.fit([])

    def test_pathway_count_mismatch(self):
        """Cases must have the fitted pathway layout."""
        rng = np.random.default_rng(4)
        normalizer = ExpressionNormalizer.fit([make_case(rng)])
        with pytest.raises(CohortError):
            normalizer.transform_case(make_case(rng, pathway_sizes=(3,)))


class TestTimeBins:
    """Tests for quantile discretization."""

    def test_edges_at_uncensored_quantiles(self):
        """Censored times do not move the edges."""
        times = [1, 2, 3, 4, 5, 6, 7, 8, 100, 200]
        events = [True] * 8 + [False, False]
        bins = TimeBins.fit(times, events, 4)
        np.testing.assert_allclose(bins.edges, [2.75, 4.5, 6.25])

    def test_edge_belongs_to_lower_bin(self):
        """A time equal to an edge falls in the lower bin; outer bins are open."""
        bins = TimeBins(np.array([2.75, 4.5, 6.25]), 4)
        assert [bins.assign(t) for t in (0.0, 2.75, 2.76, 4.5, 6.3, 1e9)] == [0, 0, 1, 1, 3, 3]

    def test_every_bin_is_populated(self):
        """Quantile edges leave no bin empty among the uncensored times."""
        times = np.random.default_rng(0).exponential(20.0, size=200)
        bins = TimeBins.fit(times, np.ones(200, dtype=bool), 4)
        assert sorted(set(bins.assign_all(times).tolist())) == [0, 1, 2, 3]

    def test_single_bin(self):
        """One bin has no interior edge."""
        bins = TimeBins.fit([3.0, 9.0], [True, True], 1)
        assert bins.edges.size == 0
        assert bins.assign(1e6) == 0

    def test_too_few_distinct_times(self):
        """Three distinct event times cannot make four bins."""
        with pytest.raises(DiscretizationError):
            TimeBins.fit([1.0, 1.0, 2.0, 3.0, 9.0], [True, True, True, True, False], 4)

    def test_discretize_survival_labels_in_place(self):
        """Bins fitted on one split label another."""
        rng = np.random.default_rng(5)
        train = [make_case(rng, f"t{i}", months=float(i + 1)) for i in range(8)]
        other = [make_case(rng, "o", months=4.5)]
        bins = discretize_survival(other, 4, fit_on=train)
        assert other[0].bin == 1
        assert all(c.bin is None for c in train)
        assert TimeBins.from_dict(bins.to_dict()).edges.tolist() == bins.edges.tolist()


class TestFolds:
    """Tests for cross-validation fold assignment."""

    def _cases(self, n, n_events):
        rng = np.random.default_rng(0)
        return [make_case(rng, f"c{i:03d}", event=i < n_events) for i in range(n)]

    def test_five_folds_of_twenty(self):
        """100 cases split into five disjoint test sets of 20."""
        folds = make_folds(self._cases(100, 70), 5, seed=0)
        assert folds.sizes() == [20] * 5
        covered = np.concatenate([folds.test_indices(k) for k in range(5)])
        assert sorted(covered.tolist()) == list(range(100))
        assert set(folds.train_indices(0)).isdisjoint(folds.test_indices(0))

    def test_stratified_by_event(self):
        """Each fold gets 14 of the 70 events."""
        cases = self._cases(100, 70)
        folds = make_folds(cases, 5, seed=3)
        for k in range(5):
            assert sum(cases[i].event for i in folds.test_indices(k)) == 14

    def test_deterministic_for_a_seed(self):
        """The same seed gives the same assignment; another seed differs."""
        cases = self._cases(50, 30)
        a = make_folds(cases, 5, seed=1)
        b = make_folds(cases, 5, seed=1)
        c = make_folds(cases, 5, seed=2)
        np.testing.assert_array_equal(a.folds, b.folds)
        assert not np.array_equal(a.folds, c.folds)

    def test_falls_back_without_stratification(self, caplog):
        """With no class of size k, plain K-fold is used and a warning logged."""
        with caplog.at_level(logging.WARNING):
            folds = make_folds(self._cases(7, 4), 5, seed=0)
        assert "unstratified" in caplog.text
        assert sum(folds.sizes()) == 7
        assert min(folds.sizes()) >= 1

    def test_too_few_cases(self):
        """Fewer cases than folds."""
        with pytest.raises(FoldError):
            make_folds(self._cases(3, 2), 5, seed=0)

    def test_needs_two_folds(self):
        """k = 1 is not cross-validation."""
        with pytest.raises(FoldError):
            make_folds(self._cases(10, 5), 1, seed=0)
