from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def cha_dir() -> Path:
    return FIXTURES / "cha"


@pytest.fixture(scope="session")
def synth_corpus(tmp_path_factory):
    """One shared 100-participant synthetic corpus (seeded, deterministic)."""
    from adscreen.synth import SynthConfig, generate

    out = tmp_path_factory.mktemp("synth_corpus")
    config = SynthConfig(n_per_class=50, p_cue_AD=0.35, p_cue_nonAD=0.80, seed=1)
    corpus, truth = generate(config, out)
    return out, config, corpus, truth
