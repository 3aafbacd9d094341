# services/corpus_service.py

import os
import re
import json
import logging
import unicodedata
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

import grapheme

import config
from errors import (
    ConfigError, InvalidInventory, MalformedManifest, DuplicateUnit, MissingFile, InvalidEncoding
)
from models import (
    BrevigraphInventory, ClusterClass, GraphemeCluster, Manifest, ManifestEntry, ProductionUnitDoc
)

logger = logging.getLogger(__name__)

_WHITESPACE_RUN = re.compile(r'\s+')
_REQUIRED_FIELDS = ('file', 'codex', 'unit', 'scribe')
COUNT_MODES = ('codepoint', 'grapheme')


class CorpusService:
    def __init__(self, inventory: Optional[BrevigraphInventory] = None):
        self.inventory = inventory or self.load_inventory(config.DEFAULT_INVENTORY_PATH)
        self._removable = {}

    def load_inventory(self, path) -> BrevigraphInventory:
        """Read a brevigraph inventory JSON file"""
        try:
            with open(path, 'r', encoding='utf-8') as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise InvalidInventory(f'inventory file not found: {path}')
        except json.JSONDecodeError as e:
            raise InvalidInventory(f'inventory {path} is not valid JSON: {e}')
        if not isinstance(data, dict):
            raise InvalidInventory(f'inventory {path} must hold a JSON object')
        inventory = BrevigraphInventory.from_dict(data)
        logger.info(f"Loaded inventory from {path}: {len(inventory.code_points)} code points, "
                    f"{len(inventory.combining_marks)} combining marks, {len(inventory.pua_ranges)} ranges")
        return inventory

    def use_inventory(self, inventory: BrevigraphInventory):
        self.inventory = inventory
        self._removable = {}

    # ---------------------- MANIFEST ----------------------
    def load_manifest(self, path) -> Manifest:
        """Load and validate a manifest; entry order is preserved"""
        try:
            with open(path, 'r', encoding='utf-8') as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise MissingFile(f'manifest not found: {path}')
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise MalformedManifest(f'manifest {path} is not valid JSON: {e}')

        if not isinstance(data, list):
            raise MalformedManifest('manifest must be a JSON array of entries')

        base_dir = os.path.dirname(os.path.abspath(path))
        entries = []
        seen = set()
        for position, item in enumerate(data):
            entry = self._parse_entry(item, position, base_dir)
            key = (entry.codex_id, entry.unit_id)
            if key in seen:
                raise DuplicateUnit(f'duplicate production unit {entry.codex_id} / {entry.unit_id}')
            seen.add(key)
            self._check_transcription(entry.file_path)
            entries.append(entry)

        logger.info(f"Manifest {path}: {len(entries)} production units")
        return Manifest(entries=tuple(entries), base_dir=base_dir)

    def _parse_entry(self, item, position, base_dir) -> ManifestEntry:
        if not isinstance(item, dict):
            raise MalformedManifest(f'entry {position} is not an object')
        missing = [name for name in _REQUIRED_FIELDS if item.get(name) in (None, '')]
        if missing:
            raise MalformedManifest(f'entry {position} lacks {", ".join(missing)}')
        values = {}
        for name in _REQUIRED_FIELDS:
            value = item[name]
            if isinstance(value, bool) or not isinstance(value, (str, int)):
                raise MalformedManifest(f'entry {position}: {name} must be a string')
            values[name] = str(value)

        date_range = self._parse_dates(item, position)
        file_path = values['file']
        if not os.path.isabs(file_path):
            file_path = os.path.join(base_dir, file_path)
        return ManifestEntry(
            file_path=file_path,
            codex_id=values['codex'],
            unit_id=values['unit'],
            scribe=values['scribe'],
            date_range=date_range,
            notes=item.get('notes'),
        )

    def _parse_dates(self, item, position) -> Optional[Tuple[int, int]]:
        date_from, date_to = item.get('date_from'), item.get('date_to')
        if date_from is None and date_to is None:
            return None
        date_from = date_to if date_from is None else date_from
        date_to = date_from if date_to is None else date_to
        if not all(isinstance(d, int) and not isinstance(d, bool) for d in (date_from, date_to)):
            raise MalformedManifest(f'entry {position}: date_from/date_to must be integers')
        if date_from > date_to:
            raise MalformedManifest(f'entry {position}: date_from {date_from} is after date_to {date_to}')
        return (date_from, date_to)

    def _check_transcription(self, file_path):
        if not os.path.isfile(file_path):
            raise MissingFile(f'transcription not found: {file_path}')
        with open(file_path, 'rb') as fh:
            raw = fh.read()
        try:
            raw.decode('utf-8')
        except UnicodeDecodeError as e:
            raise InvalidEncoding(f'{file_path} is not valid UTF-8: {e}')

    # ---------------------- CLEANING & CLUSTERING ----------------------
    def _is_removable(self, ch):
        removable = self._removable.get(ch)
        if removable is None:
            cp = ord(ch)
            if cp in config.ARTEFACT_CHARS:
                removable = True
            elif self.inventory.protects(cp):
                removable = False
            else:
                removable = cp in config.EXTRA_PUNCTUATION or unicodedata.category(ch).startswith('P')
            self._removable[ch] = removable
        return removable

    def clean_text(self, raw: str) -> str:
        """Drop punctuation and HTR artefacts, collapse whitespace runs to one space, trim"""
        kept = ''.join(ch for ch in raw if not self._is_removable(ch))
        return _WHITESPACE_RUN.sub(' ', kept).strip()

    def classify(self, text: str) -> ClusterClass:
        if self.inventory.matches(text):
            return ClusterClass.BREVIGRAPH
        if text.isspace():
            return ClusterClass.WHITESPACE
        if unicodedata.category(text[0]).startswith('L'):
            return ClusterClass.LETTER
        # digits, symbols, orphan marks
        return ClusterClass.OTHER

    def segment_graphemes(self, text: str) -> List[GraphemeCluster]:
        """Split text into extended grapheme clusters and classify each one"""
        return [GraphemeCluster(cluster, self.classify(cluster)) for cluster in grapheme.graphemes(text)]

    def count_characters(self, text: str, mode: str = 'grapheme') -> int:
        if mode == 'codepoint':
            return len(text)
        if mode == 'grapheme':
            return grapheme.length(text)
        raise ConfigError(f'count mode must be one of {COUNT_MODES}, got {mode!r}')

    # ---------------------- INGESTION ----------------------
    def ingest_text(self, raw, codex_id, unit_id, scribe, date_range=None) -> ProductionUnitDoc:
        clusters = tuple(self.segment_graphemes(self.clean_text(raw)))
        return ProductionUnitDoc(
            codex_id=codex_id,
            unit_id=unit_id,
            scribe=scribe,
            clusters=clusters,
            date_range=date_range,
        )

    def load_corpus(self, manifest: Manifest) -> List[ProductionUnitDoc]:
        """Read, clean and cluster every transcription named in the manifest"""
        units = []
        for entry in manifest:
            try:
                with open(entry.file_path, 'r', encoding='utf-8') as fh:
                    raw = fh.read()
            except FileNotFoundError:
                raise MissingFile(f'transcription not found: {entry.file_path}')
            except UnicodeDecodeError as e:
                raise InvalidEncoding(f'{entry.file_path} is not valid UTF-8: {e}')
            unit = self.ingest_text(raw, entry.codex_id, entry.unit_id, entry.scribe, entry.date_range)
            logger.debug(f"Ingested {entry.codex_id} / {entry.unit_id} ({entry.scribe}): {len(unit.clusters)} clusters")
            units.append(unit)
        logger.info(f"Loaded {len(units)} production units")
        return units

    def merge_labels(self, items, mapping: Dict[str, str]):
        """Relabel units or segments for reporting, e.g. {'gamma?': 'gamma'}"""
        if not mapping:
            return list(items)
        return [replace(item, scribe=mapping.get(item.scribe, item.scribe)) for item in items]
