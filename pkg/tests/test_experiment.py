import json

import numpy as np
import pytest

from bandverify.audio import AudioBuffer, read_wav, write_wav
from bandverify.experiment import (ExperimentConfig, extend_corpus,
                                   extract_multi_l, prepare_narrowband,
                                   render_report_table, run_experiment)
from bandverify.features import FrameConfig, lpcc_sequence, mfcc_sequence
from bandverify.synthcorpus import generate_corpus


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    generate_corpus(out, 3, 3, seed=21, train_seconds=4.0, test_seconds=1.5)
    return out


@pytest.fixture(scope="module")
def report_and_work(corpus_dir, tmp_path_factory):
    work = tmp_path_factory.mktemp("work")
    config = ExperimentConfig(
        corpus_dir=str(corpus_dir), work_dir=str(work),
        l_values=(4, 8), feature_kinds=("LPCC",),
        bwe_components=2, seed=3)
    return run_experiment(config), work


class TestConfig:
    def test_rejects_bad_dimension(self, tmp_path):
        with pytest.raises(ValueError):
            ExperimentConfig(str(tmp_path), str(tmp_path), l_values=(3,))
        with pytest.raises(ValueError):
            ExperimentConfig(str(tmp_path), str(tmp_path), l_values=(28,))

    def test_rejects_unknown_scenario(self, tmp_path):
        with pytest.raises(ValueError):
            ExperimentConfig(str(tmp_path), str(tmp_path),
                             scenarios=("telepathy",))

    def test_dict_roundtrip(self, tmp_path):
        cfg = ExperimentConfig(str(tmp_path), str(tmp_path), l_values=(4, 12),
                               bwe_lambda=3.0, seed=99, mean_removal=True)
        back = ExperimentConfig.from_dict(cfg.to_dict())
        assert back.to_dict() == cfg.to_dict()


class TestNarrowbandPrep:
    def test_writes_filtered_corpus(self, corpus_dir, tmp_path):
        manifest = prepare_narrowband(corpus_dir, tmp_path / "narrow")
        assert len(manifest.entries) == 9
        buf = read_wav(manifest.entries[0].path)
        assert buf.sample_rate_hz == 16000
        spec = np.abs(np.fft.rfft(buf.samples)) ** 2
        freqs = np.fft.rfftfreq(len(buf), 1 / 16000)
        hi = spec[freqs >= 4500].sum()
        mid = spec[(freqs >= 400) & (freqs < 3000)].sum()
        assert hi < 1e-4 * mid

    def test_alaw_variant(self, corpus_dir, tmp_path):
        manifest = prepare_narrowband(corpus_dir, tmp_path / "isdn",
                                      with_alaw=True)
        buf = read_wav(manifest.entries[0].path)
        assert buf.sample_rate_hz == 8000
        assert manifest.entries[0].scenario == "narrow-alaw"

    def test_directory_without_manifest(self, tmp_path):
        src = tmp_path / "src"
        src.mkdir()
        rng = np.random.default_rng(0)
        write_wav(AudioBuffer(0.1 * rng.standard_normal(8000), 16000),
                  src / "spkA_u0.wav")
        manifest = prepare_narrowband(src, tmp_path / "out")
        assert len(manifest.entries) == 1
        assert manifest.entries[0].spk == "spkA"


class TestMultiDimensionExtraction:
    def test_matches_single_dimension_paths(self):
        rng = np.random.default_rng(1)
        buf = AudioBuffer(0.2 * rng.standard_normal(16000), 8000)
        config = FrameConfig()
        lpcc = extract_multi_l(buf, "LPCC", (4, 12), config)
        assert np.allclose(lpcc[12].vectors,
                           lpcc_sequence(buf, 12, config).vectors, atol=1e-10)
        mel = extract_multi_l(buf, "MELCEPST", (4, 12), config)
        assert np.allclose(mel[12].vectors,
                           mfcc_sequence(buf, 12, config).vectors, atol=1e-10)

    def test_lower_dimension_is_not_a_prefix_for_lpcc(self):
        # order-4 and order-12 predictors differ, so LPCC-4 is recomputed,
        # not sliced
        rng = np.random.default_rng(2)
        buf = AudioBuffer(0.2 * rng.standard_normal(8000), 8000)
        out = extract_multi_l(buf, "LPCC", (4, 12), FrameConfig())
        assert not np.allclose(out[4].vectors, out[12].vectors[:, :4])

    def test_melcepst_is_a_prefix(self):
        rng = np.random.default_rng(3)
        buf = AudioBuffer(0.2 * rng.standard_normal(8000), 8000)
        out = extract_multi_l(buf, "MELCEPST", (4, 12), FrameConfig())
        assert np.allclose(out[4].vectors, out[12].vectors[:, :4])

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            extract_multi_l(AudioBuffer(np.zeros(4000), 8000), "PLP",
                            (4,), FrameConfig())


class TestRunExperiment:
    def test_report_structure(self, report_and_work):
        report, _ = report_and_work
        results = report["results"]
        assert set(results) == {"wide", "narrow", "extended"}
        for scenario in results:
            for l in ("4", "8"):
                cell = results[scenario]["LPCC"][l]
                assert 0.0 <= cell["min_dcf"] <= 1.0
                assert 0.0 <= cell["eer"] <= 1.0
                assert cell["n_trials"] == 18

    def test_artifacts_written(self, report_and_work):
        _, work = report_and_work
        assert (work / "report.json").exists()
        assert (work / "report.txt").exists()
        assert (work / "bwe_model.json").exists()
        for scenario in ("wide", "narrow", "extended"):
            for l in (4, 8):
                assert (work / f"det_{scenario}_LPCC_l{l}.csv").exists()
                assert (work / f"det_{scenario}_LPCC_l{l}.svg").exists()
                assert (work / f"trials_{scenario}_LPCC_l{l}.csv").exists()

    def test_report_json_matches_return(self, report_and_work):
        report, work = report_and_work
        on_disk = json.loads((work / "report.json").read_text())
        assert on_disk["results"] == report["results"]
        assert on_disk["config_fingerprint"] == report["config_fingerprint"]

    def test_relative_change_present(self, report_and_work):
        report, _ = report_and_work
        rel = report["extended_vs_narrow_relative_change_pct"]
        assert set(rel["LPCC"]) == {"4", "8"}

    def test_table_rendering(self, report_and_work):
        report, _ = report_and_work
        text = render_report_table(report)
        assert "Minimum DCF" in text
        assert "LPCC" in text
        for l in ("4", "8"):
            assert any(line.startswith(l + " ")
                       for line in text.splitlines())

    def test_deterministic_results(self, corpus_dir, report_and_work,
                                   tmp_path):
        report, _ = report_and_work
        config = ExperimentConfig(
            corpus_dir=str(corpus_dir), work_dir=str(tmp_path / "w2"),
            l_values=(4, 8), feature_kinds=("LPCC",),
            bwe_components=2, seed=3)
        again = run_experiment(config)
        assert again["results"] == report["results"]
        assert again["bwe_model_hash"] == report["bwe_model_hash"]

    def test_missing_manifest(self, tmp_path):
        config = ExperimentConfig(corpus_dir=str(tmp_path / "nope"),
                                  work_dir=str(tmp_path / "w"))
        with pytest.raises(FileNotFoundError):
            run_experiment(config)


class TestExtendCorpus:
    def test_extends_narrow_corpus(self, corpus_dir, report_and_work,
                                   tmp_path):
        _, work = report_and_work
        manifest = extend_corpus(work / "narrow" / "manifest.jsonl",
                                 work / "bwe_model.json", 2.0,
                                 tmp_path / "ext")
        assert len(manifest.entries) == 9
        buf = read_wav(manifest.entries[0].path)
        assert buf.sample_rate_hz == 16000
        assert manifest.entries[0].scenario == "extended"
