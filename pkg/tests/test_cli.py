import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from mcsep import corpus
from mcsep.cli import EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, main
from mcsep.config import PipelineConfig
from mcsep.corpus import load_manifest, schema


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    assert main(["simulate", "--count", "3", "--seed", "7", "--out", str(out), "--jobs", "1"]) == EXIT_OK
    return out / "manifest.json"


def tree_bytes(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_simulate_is_deterministic(small_corpus, tmp_path):
    assert main(["simulate", "--count", "3", "--seed", "7", "--out", str(tmp_path), "--jobs", "2"]) == 0
    assert tree_bytes(tmp_path) == tree_bytes(small_corpus.parent)


def test_manifest_schema(small_corpus):
    m = json.loads(small_corpus.read_text())
    jsonschema.validate(m, schema("manifest"))
    assert m["schema_version"] == 1 and len(m["utterances"]) == 3
    e = m["utterances"][0]
    assert e["scene"]["seed"] == 7 * 100000
    assert e["doa_deg"] == e["scene"]["target_doa_deg"]
    for p in e["paths"].values():
        assert (small_corpus.parent / p).exists()


def test_manifest_rejects_bad_files(tmp_path):
    (tmp_path / "m.json").write_text('{"schema_version": 2}')
    with pytest.raises(corpus.ManifestError):
        load_manifest(tmp_path / "m.json")
    assert main(["separate", "--manifest", str(tmp_path / "m.json"), "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_delay_sum_needs_only_mixture(small_corpus, tmp_path):
    scratch = tmp_path / "corpus"
    scratch.mkdir()
    (scratch / "wav").mkdir()
    (scratch / "manifest.json").write_text(small_corpus.read_text())
    for wav in (small_corpus.parent / "wav").glob("*_mixture.wav"):
        (scratch / "wav" / wav.name).write_bytes(wav.read_bytes())
    out = tmp_path / "ds"
    rc = main(["separate", "--manifest", str(scratch / "manifest.json"), "--method", "delay_sum",
               "--out", str(out), "--jobs", "1"])
    assert rc == EXIT_OK
    assert len(list(out.glob("utt*.wav"))) == 3
    # oracle masks need the stems, which are absent here
    rc = main(["separate", "--manifest", str(scratch / "manifest.json"), "--method", "mvdr",
               "--out", str(tmp_path / "mv"), "--jobs", "1"])
    assert rc == EXIT_PARTIAL


def test_missing_mask_file_fails_one_utterance(small_corpus, tmp_path):
    masks = tmp_path / "masks"
    assert main(["features", "--manifest", str(small_corpus), "--out", str(masks), "--masks",
                 "--jobs", "1"]) == EXIT_OK
    first = sorted(masks.glob("*_target_mask.tensor"))[0]
    first.unlink()
    out = tmp_path / "sep"
    rc = main(["separate", "--manifest", str(small_corpus), "--method", "mvdr", "--mask-source",
               "file", "--mask-dir", str(masks), "--out", str(out), "--jobs", "1"])
    assert rc == EXIT_PARTIAL
    log = json.loads((out / "run_log.json").read_text())
    assert log["failed"] == ["utt00000"]
    assert len(list(out.glob("utt*.wav"))) == 2
    assert all("seconds" in u for u in log["utterances"])
    expected = PipelineConfig().with_overrides(separation={"mask_source": "file"}).fingerprint()
    assert log["config_fingerprint"] == expected
    rc = main(["evaluate", "--manifest", str(small_corpus), "--separated", str(out),
               "--report", str(tmp_path / "r.json")])
    assert rc == EXIT_PARTIAL
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["complete"] is False and report["missing"] == ["utt00000"]


def test_features_shapes(small_corpus, tmp_path):
    from mcsep.tensorfile import read_tensor
    assert main(["features", "--manifest", str(small_corpus), "--out", str(tmp_path)]) == EXIT_OK
    ipd = read_tensor(tmp_path / "utt00000_ipd.tensor")
    af = read_tensor(tmp_path / "utt00000_af.tensor")
    assert ipd.shape[0] == 9 and ipd.shape[2] == 257 and af.shape == ipd.shape[1:]
    assert np.all(np.abs(af) <= 1 + 1e-12)


def test_evaluate_identity_and_target_copies(small_corpus, tmp_path):
    m = load_manifest(small_corpus)
    from mcsep.spectral import MultiChannelWaveform
    from mcsep.wavio import read_wav, write_wav
    mix_dir, tgt_dir = tmp_path / "mix", tmp_path / "tgt"
    mix_dir.mkdir()
    tgt_dir.mkdir()
    for e in m["utterances"]:
        for key, d in (("mixture", mix_dir), ("target", tgt_dir)):
            w = read_wav(corpus.resolve(small_corpus, e["paths"][key]))
            write_wav(d / f"{e['id']}.wav", MultiChannelWaveform(w.samples[:1], w.sample_rate))
    assert main(["evaluate", "--manifest", str(small_corpus), "--separated", str(mix_dir),
                 "--report", str(tmp_path / "a.json")]) == EXIT_OK
    rep = json.loads((tmp_path / "a.json").read_text())
    assert abs(rep["summary"]["delta"]["mean"]) < 0.01
    assert main(["evaluate", "--manifest", str(small_corpus), "--separated", str(tgt_dir),
                 "--report", str(tmp_path / "b.json")]) == EXIT_OK
    rep = json.loads((tmp_path / "b.json").read_text())
    assert all(u["si_snr_out"] == 80.0 for u in rep["utterances"])
    main(["evaluate", "--manifest", str(small_corpus), "--separated", str(tgt_dir),
          "--report", str(tmp_path / "c.json")])
    assert (tmp_path / "b.json").read_bytes() == (tmp_path / "c.json").read_bytes()


def test_usage_errors(tmp_path, capsys):
    assert main(["simulate", "--count", "0", "--out", str(tmp_path)]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["simulate"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["separate", "--manifest", "m.json", "--method", "gev"])
    assert exc.value.code == EXIT_USAGE
    bad = tmp_path / "c.yaml"
    bad.write_text("bogus: 1\n")
    assert main(["simulate", "--count", "1", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_USAGE
    assert "bogus" in capsys.readouterr().err


def test_preset_corpus(tmp_path):
    assert main(["simulate", "--count", "8", "--preset", "replay_doa", "--out", str(tmp_path),
                 "--jobs", "4"]) == EXIT_OK
    m = load_manifest(tmp_path / "manifest.json")
    pairs = [(round(e["scene"]["target_doa_deg"]), round(e["scene"]["interferer_doa_deg"]))
             for e in m["utterances"]]
    assert pairs == [(15, 30), (45, 30), (75, 30), (105, 30), (30, 60), (90, 60), (120, 60), (150, 60)]
    assert all(e["scene"]["room"]["dimensions"] == [10.0, 5.0, 3.0] for e in m["utterances"])


def test_sir_histogram_covers_all_values(tmp_path):
    from mcsep.room import sample_scene
    values = {sample_scene(corpus.utterance_seed(0, k)).sir_db for k in range(300)}
    assert values == {-6.0, 0.0, 6.0}
