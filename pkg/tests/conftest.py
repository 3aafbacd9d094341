import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from models import AbbreviationRule, HabitProfile, Segment  # noqa: E402
from services.corpus_service import CorpusService  # noqa: E402
from services.segmentation_service import SegmentationService  # noqa: E402
from services.synth_service import SynthService  # noqa: E402

LEXICON = ('ende', 'van', 'den', 'in', 'dat', 'hi', 'die', 'niet', 'met', 'sijn', 'hem', 'wel', 'ons', 'heere', 'coninc')

ALPHA_RULES = (
    AbbreviationRule('ende', 'eñ', 0.8),
    AbbreviationRule('van', 'vā', 0.7),
    AbbreviationRule('den', 'dē', 0.6),
    AbbreviationRule('in', 'ī', 0.5),
)
BETA_RULES = (
    AbbreviationRule('ende', 'ẽ', 0.8),
    AbbreviationRule('met', 'mē', 0.6),
    AbbreviationRule('hem', 'hē', 0.6),
    AbbreviationRule('coninc', 'conīc', 0.5),
)


@pytest.fixture(scope='session')
def corpus_service():
    return CorpusService()


@pytest.fixture(scope='session')
def synth_service(corpus_service):
    return SynthService(corpus_service)


@pytest.fixture(scope='session')
def segmentation_service():
    return SegmentationService()


@pytest.fixture
def make_segment(corpus_service):
    """Segment built from literal text, cleaned and clustered like a transcription"""
    def factory(text, scribe='A', codex='C1', unit='I', index=0):
        doc = corpus_service.ingest_text(text, codex, unit, scribe)
        return Segment(codex_id=codex, unit_id=unit, scribe=scribe, index=index, clusters=doc.clusters)
    return factory


@pytest.fixture(scope='session')
def alpha_profile():
    return HabitProfile(base_lexicon=LEXICON, abbreviation_rules=ALPHA_RULES, seed=11, name='alpha')


@pytest.fixture(scope='session')
def beta_profile():
    return HabitProfile(base_lexicon=LEXICON, abbreviation_rules=BETA_RULES, seed=23, name='beta')


@pytest.fixture(scope='session')
def make_segments(synth_service, segmentation_service):
    """n segments of `size` clusters per (codex, unit) drawn from a profile"""
    def factory(profile, scribe, units, n_segments, size=500):
        segments = []
        for codex, unit in units:
            doc = synth_service.generate_unit(profile, n_segments * size, codex, unit, scribe)
            segments.extend(segmentation_service.segment_unit(doc, size))
        return segments
    return factory
