import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

import synth  # noqa: E402

from gop_forge import acoustic, align  # noqa: E402


_acceptance_results = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance_results.append((report.nodeid.split("::")[-1],
                                    report.outcome))


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion."""
    if not _acceptance_results:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, outcome in _acceptance_results:
        word = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"  {word}  {name}")


@pytest.fixture(scope="session")
def am():
    model, lls = synth.train_acoustic_model()
    assert all(b >= a - 1e-6 for a, b in zip(lls, lls[1:]))
    return model


@pytest.fixture(scope="session")
def g2p_model():
    return synth.train_g2p_model()


@pytest.fixture(scope="session")
def base_lexicon():
    return synth.base_lexicon()


@pytest.fixture(scope="session")
def inventory():
    return synth.inventory()


@pytest.fixture(scope="session")
def hcl(base_lexicon, inventory, am):
    return align.build_decoding_graph(base_lexicon, inventory, am)


@pytest.fixture(scope="session")
def aligned(base_lexicon, inventory, am, hcl):
    """Alignment and posterior matrix for one two-word synthetic utterance."""
    rng = np.random.default_rng(11)
    wave, _ = synth.utterance_for_words(["MAS", "TIK"], base_lexicon, rng)
    feats = acoustic.extract_features(wave, synth.RATE)
    graph = align.compile_utterance_graph(
        "MAS TIK", base_lexicon, inventory, am, hcl=hcl)
    alignment = align.force_align(graph, feats, am, utt_id="demo",
                                  transcript="MAS TIK", lexicon=base_lexicon)
    post = acoustic.posteriors(am, feats)
    return alignment, post


def toy_model(phones=("A", "B"), states_per_phone=1, dim=2, spread=4.0,
              self_loop=0.6):
    """Hand-built acoustic model with well-separated unit-variance states."""
    n = len(phones) * states_per_phone
    gmms = []
    for s in range(n):
        mean = np.zeros(dim)
        mean[s % dim] = spread * (1 + s // dim)
        gmms.append(acoustic.Gmm(np.array([1.0]), mean[None, :],
                                 np.ones((1, dim))))
    return acoustic.AcousticModel(tuple(phones), gmms,
                                  np.full(n, self_loop), states_per_phone, dim)


def sample_frames(model, senone_path, rng):
    """Draw one feature frame per senone from the model's own Gaussians."""
    rows = []
    for s in senone_path:
        g = model.gmms[s]
        rows.append(g.means[0] + np.sqrt(g.variances[0]) * rng.standard_normal(model.dim))
    return acoustic.FeatureMatrix(np.array(rows), 0.01, 0.025)
