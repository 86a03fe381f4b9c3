import numpy as np
import pytest

import synth
from gop_forge import __version__, acoustic, cli, g2p, lexicon


@pytest.fixture(scope="module")
def ws(tmp_path_factory, am, g2p_model):
    """On-disk workspace with every artifact the subcommands consume."""
    d = tmp_path_factory.mktemp("cli")
    (d / "lexicon.txt").write_text(synth.LEXICON_TEXT)
    (d / "addition.txt").write_text("KIT K IY T\n")
    (d / "transcript.txt").write_text("MA KIT SAM TI\n")
    (d / "words.txt").write_text("KIT\nSAM\n")
    acoustic.save_model(am, d / "am.txt")
    g2p.save_model(g2p_model, d / "g2p.txt")

    rng = np.random.default_rng(33)
    lex = synth.base_lexicon()
    wave, transcript = synth.utterance_for_words(["MA"], lex, rng)
    acoustic.write_wav(d / "ma.wav", wave, synth.RATE)
    (d / "amtrain.tsv").write_text(
        f"ma\t{d / 'ma.wav'}\t{' '.join(transcript)}\n")

    manifest = synth.write_corpus(str(d / "corpus"),
                                  [["MA", "KIT"], ["SA"], ["TIK"]], seed=34)
    return {"dir": d, "manifest": manifest}


def run(argv):
    return cli.dispatch([str(a) for a in argv])


def test_every_dispatch_entry_runs(ws, capsys):
    d = ws["dir"]
    invocations = {
        ("lexicon", "prepare"): [
            "lexicon", "prepare", "--lexicon", d / "lexicon.txt",
            "--out", d / "prepared.txt", "--inventory-dir", d / "inv"],
        ("lexicon", "merge"): [
            "lexicon", "merge", "--base", d / "lexicon.txt",
            "--addition", d / "addition.txt", "--out", d / "merged.txt"],
        ("lexicon", "oov"): [
            "lexicon", "oov", "--transcript", d / "transcript.txt",
            "--lexicon", d / "lexicon.txt", "--out", d / "oov.txt"],
        ("g2p", "train"): [
            "g2p", "train", "--lexicon", d / "lexicon.txt", "--order", "2",
            "--out", d / "g2p2.txt"],
        ("g2p", "apply"): [
            "g2p", "apply", "--model", d / "g2p.txt",
            "--words", d / "words.txt", "--scores"],
        ("graph", "compile-l"): [
            "graph", "compile-l", "--lexicon", d / "lexicon.txt",
            "--out", d / "l.fst", "--disambig",
            "--isyms", d / "l.isyms", "--osyms", d / "l.osyms"],
        ("graph", "compile-hcl"): [
            "graph", "compile-hcl", "--lexicon", d / "lexicon.txt",
            "--am", d / "am.txt", "--out", d / "hcl.fst"],
        ("graph", "info"): ["graph", "info", "--fst", d / "hcl.fst"],
        ("am", "extract"): [
            "am", "extract", "--wav", d / "ma.wav", "--out", d / "feats.txt"],
        ("am", "train"): [
            "am", "train", "--manifest", d / "amtrain.tsv",
            "--out", d / "am2.txt", "--iterations", "2"],
        ("am", "posteriors"): [
            "am", "posteriors", "--am", d / "am.txt", "--wav", d / "ma.wav",
            "--out", d / "post.txt"],
        ("align", "run"): [
            "align", "run", "--am", d / "am.txt",
            "--lexicon", d / "lexicon.txt", "--wav", d / "ma.wav",
            "--transcript", "MA", "--dump", d / "ma.ali",
            "--ctm-phone", d / "ma.phone.ctm", "--ctm-word", d / "ma.word.ctm"],
        ("align", "ctm"): [
            "align", "ctm", "--dump", d / "ma.ali", "--am", d / "am.txt"],
        ("gop", "score"): [
            "gop", "score", "--am", d / "am.txt",
            "--lexicon", d / "lexicon.txt", "--wav", d / "ma.wav",
            "--transcript", "MA", "--out", d / "ma.gop"],
        ("pipeline", "run"): [
            "pipeline", "run", "--mode", "hybrid",
            "--manifest", ws["manifest"], "--lexicon", d / "lexicon.txt",
            "--g2p-model", d / "g2p.txt", "--acoustic-model", d / "am.txt",
            "--out", d / "run_out", "--lexicon-out", d / "lexicon_out.txt"],
        ("selftest", None): ["selftest"],
    }
    assert set(invocations) == set(cli.DISPATCH)
    for key, argv in invocations.items():
        assert run(argv) == 0, key
    capsys.readouterr()


def test_lexicon_oov_output(ws):
    text = (ws["dir"] / "oov.txt").read_text()
    assert text.splitlines() == ["KIT", "SAM"]


def test_g2p_apply_output(ws, capsys):
    assert run(["g2p", "apply", "--model", ws["dir"] / "g2p.txt",
                "--words", ws["dir"] / "words.txt", "--scores"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split("\t")[0] == "KIT K IY T"
    assert float(lines[0].split("\t")[1]) < 0.0
    assert lines[1].startswith("SAM S AA M")


def test_graph_info_output(ws, capsys):
    assert run(["graph", "info", "--fst", ws["dir"] / "hcl.fst"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("states ")
    assert "arcs " in out and "final_states " in out


def test_align_artifacts(ws):
    d = ws["dir"]
    dump = (d / "ma.ali").read_text().split()
    assert dump[0] == "ma"
    assert all(f.isdigit() for f in dump[1:])
    ctm = (d / "ma.word.ctm").read_text().splitlines()
    assert len(ctm) == 1 and ctm[0].split()[-1] == "MA"


def test_gop_report_written(ws):
    lines = (ws["dir"] / "ma.gop").read_text().splitlines()
    assert lines
    phones = [ln.split()[1] for ln in lines]
    assert "M" in phones and "AA" in phones


def test_pipeline_run_outputs(ws, capsys):
    out = ws["dir"] / "run_out"
    summary = (out / "summary.txt").read_text()
    assert "succeeded = 3\n" in summary
    assert "unique_oov = 1\n" in summary
    assert "KIT" in lexicon.load_lexicon(ws["dir"] / "lexicon_out.txt")
    assert (out / "gop" / "utt000.gop").exists()


def test_pipeline_run_requires_models(ws, capsys):
    code = run(["pipeline", "run", "--manifest", ws["manifest"]])
    assert code == 1
    assert "gop-forge: ConfigError" in capsys.readouterr().err


def test_missing_file_exits_one(tmp_path, capsys):
    assert run(["graph", "info", "--fst", tmp_path / "absent.fst"]) == 1
    assert "gop-forge:" in capsys.readouterr().err


def test_usage_error_exits_two(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["lexicon"])  # missing subcommand
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run(["pipeline", "run", "--mode", "turbo", "--manifest", "m"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.strip() == __version__
