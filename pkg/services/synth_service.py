# services/synth_service.py

import json
import os
import logging
from typing import Dict, List, Optional, Tuple

from errors import BadHyperparameter, EmptyLexicon, InvalidProfile
from models import ClusterClass, GraphemeCluster, HabitProfile, ProductionUnitDoc
from services.corpus_service import CorpusService
from services.random_state import make_rng
from services.storage_service import StorageService

logger = logging.getLogger(__name__)

# allowed gap between a profile's declared and analytic density before warning
DENSITY_TOLERANCE = 0.05
_SPACE = GraphemeCluster(' ', ClusterClass.WHITESPACE)


class SynthService:
    """Reproducible toy corpora from scribe habit profiles (lexicon + abbreviation rules)"""

    def __init__(self, corpus_service=None):
        self.corpus = corpus_service or CorpusService()
        self._forms = {}

    def _clusters(self, form: str) -> Tuple[GraphemeCluster, ...]:
        clusters = self._forms.get(form)
        if clusters is None:
            clusters = tuple(self.corpus.segment_graphemes(form))
            self._forms[form] = clusters
        return clusters

    def _rules(self, profile: HabitProfile):
        """First rule per full form wins"""
        rules = {}
        for rule in profile.abbreviation_rules:
            rules.setdefault(rule.full, rule)
        return rules

    # ---------------------- PROFILES ----------------------
    def load_profile(self, path) -> HabitProfile:
        try:
            with open(path, 'r', encoding='utf-8') as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise InvalidProfile(f'profile not found: {path}')
        except json.JSONDecodeError as e:
            raise InvalidProfile(f'profile {path} is not valid JSON: {e}')
        if not isinstance(data, dict):
            raise InvalidProfile(f'profile {path} must hold a JSON object')
        data = {'name': os.path.splitext(os.path.basename(path))[0], **data}
        return self.validate_profile(HabitProfile.from_dict(data))

    def validate_profile(self, profile: HabitProfile) -> HabitProfile:
        if not profile.base_lexicon:
            raise EmptyLexicon(f"profile '{profile.name}' has an empty lexicon")
        for rule in profile.abbreviation_rules:
            if not any(c.is_brevigraph for c in self._clusters(rule.abbreviated)):
                raise InvalidProfile(f'abbreviated form {rule.abbreviated!r} holds no brevigraph')
            if any(c.is_brevigraph for c in self._clusters(rule.full)):
                raise InvalidProfile(f'full form {rule.full!r} already holds a brevigraph')

        if profile.target_density_char is not None:
            expected = self.expected_density_chars(profile)
            if abs(expected - profile.target_density_char) > DENSITY_TOLERANCE:
                logger.warning(f"Profile '{profile.name}': target density {profile.target_density_char:.3f} "
                               f"but rules imply {expected:.3f}")
        return profile

    def expected_density_chars(self, profile: HabitProfile) -> float:
        """Expected brevigraphs over expected letter-like clusters for one sampled word"""
        if not profile.base_lexicon:
            raise EmptyLexicon(f"profile '{profile.name}' has an empty lexicon")
        rules = self._rules(profile)
        brevigraphs = letters = 0.0
        for word in profile.base_lexicon:
            variants = [(1.0, word)]
            rule = rules.get(word)
            if rule is not None:
                variants = [(rule.probability, rule.abbreviated), (1.0 - rule.probability, word)]
            for weight, form in variants:
                n_brev, n_total = self._counts(form)
                brevigraphs += weight * n_brev
                letters += weight * n_total
        if letters == 0:
            raise InvalidProfile(f"profile '{profile.name}' produces no letters")
        return brevigraphs / letters

    def _counts(self, form):
        clusters = self._clusters(form)
        n_brev = sum(1 for c in clusters if c.cls == ClusterClass.BREVIGRAPH)
        n_letter = sum(1 for c in clusters if c.cls == ClusterClass.LETTER)
        return n_brev, n_brev + n_letter

    # ---------------------- GENERATION ----------------------
    def generate_unit(self, profile: HabitProfile, n_clusters: int, codex_id: str, unit_id: str,
                      scribe: str) -> ProductionUnitDoc:
        """Words drawn uniformly from the lexicon, abbreviated Bernoulli-wise, space separated.

        The stream is seeded by (profile seed, codex, unit) and cut at exactly n_clusters clusters.
        """
        if n_clusters < 1:
            raise BadHyperparameter(f'n_clusters must be >= 1, got {n_clusters}')
        self.validate_profile(profile)
        rng = make_rng(profile.seed, codex_id, unit_id)
        rules = self._rules(profile)
        lexicon = profile.base_lexicon

        clusters: List[GraphemeCluster] = []
        while len(clusters) < n_clusters:
            word = lexicon[int(rng.integers(len(lexicon)))]
            rule = rules.get(word)
            if rule is not None and rng.random() < rule.probability:
                word = rule.abbreviated
            if clusters:
                clusters.append(_SPACE)
            clusters.extend(self._clusters(word))

        logger.debug(f"Generated {codex_id} / {unit_id} for '{scribe}' from profile '{profile.name}'")
        return ProductionUnitDoc(codex_id=codex_id, unit_id=unit_id, scribe=scribe,
                                 clusters=tuple(clusters[:n_clusters]))

    def generate_corpus(self, plan: Dict, out_dir: Optional[str] = None, storage=None) -> List[ProductionUnitDoc]:
        """Units described by a plan {"profiles": {name: profile}, "units": [{codex, unit, scribe, profile, n_clusters}]}.

        With out_dir set, transcriptions and a manifest are written there as well.
        """
        if isinstance(plan, str):
            try:
                with open(plan, 'r', encoding='utf-8') as fh:
                    plan = json.load(fh)
            except (FileNotFoundError, json.JSONDecodeError) as e:
                raise InvalidProfile(f'cannot read corpus plan: {e}')
        if not isinstance(plan, dict) or 'units' not in plan:
            raise InvalidProfile("corpus plan needs a 'units' list")

        profiles = {}
        for name, data in plan.get('profiles', {}).items():
            profiles[name] = self.validate_profile(HabitProfile.from_dict({'name': name, **data}))

        docs = []
        for position, entry in enumerate(plan['units']):
            try:
                profile = profiles[entry['profile']]
                doc = self.generate_unit(profile, int(entry['n_clusters']), str(entry['codex']),
                                         str(entry['unit']), str(entry['scribe']))
            except KeyError as e:
                raise InvalidProfile(f'corpus plan unit {position}: unknown or missing {e}')
            docs.append(doc)
        logger.info(f"Generated {len(docs)} synthetic units from {len(profiles)} profiles")

        if out_dir is not None:
            (storage or StorageService()).save_corpus(docs, out_dir)
        return docs

    def profile_corpus(self, profile: HabitProfile, n_units: int, n_clusters: int, out_dir: Optional[str] = None,
                       storage=None) -> List[ProductionUnitDoc]:
        """n_units units of one profile, codex and scribe named after it, units numbered from 1"""
        if n_units < 1:
            raise BadHyperparameter(f'n_units must be >= 1, got {n_units}')
        docs = [self.generate_unit(profile, n_clusters, profile.name, str(i + 1), profile.name) for i in range(n_units)]
        logger.info(f"Generated {len(docs)} synthetic units from profile '{profile.name}'")

        if out_dir is not None:
            (storage or StorageService()).save_corpus(docs, out_dir)
        return docs

