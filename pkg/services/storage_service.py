# services/storage_service.py

import os
import re
import json
import logging
import math
from typing import Iterable, List

import numpy as np
import pandas as pd

import config
from models import ProductionUnitDoc

logger = logging.getLogger(__name__)

_UNSAFE = re.compile(r'[^\w.-]+')


def _stable(value):
    """Round floats to FLOAT_FORMAT precision so reports do not depend on BLAS thread counts"""
    if isinstance(value, dict):
        return {str(k): _stable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_stable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _stable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return None
        return float(config.FLOAT_FORMAT % value)
    return value


class StorageService:
    def __init__(self, output_dir=config.OUTPUT_DIR):
        self.output_dir = output_dir

    def _path(self, name, out_dir=None):
        target = out_dir or self.output_dir
        os.makedirs(target, exist_ok=True)
        return os.path.join(target, name)

    def save_table(self, frame: pd.DataFrame, name: str, out_dir=None) -> str:
        path = self._path(name, out_dir)
        frame.to_csv(path, index=False, float_format=config.FLOAT_FORMAT, lineterminator='\n', encoding='utf-8')
        logger.debug(f"Wrote {len(frame)} rows to {path}")
        return path

    def save_json(self, payload, name: str, out_dir=None) -> str:
        path = self._path(name, out_dir)
        with open(path, 'w', encoding='utf-8', newline='\n') as fh:
            fh.write(json.dumps(_stable(payload), ensure_ascii=False, indent=2))
            fh.write('\n')
        logger.debug(f"Wrote {path}")
        return path

    def save_svg(self, svg: str, name: str, out_dir=None) -> str:
        path = self._path(name, out_dir)
        with open(path, 'w', encoding='utf-8', newline='\n') as fh:
            fh.write(svg)
        return path

    def save_model(self, model_json: str, name: str, out_dir=None) -> str:
        path = self._path(name, out_dir)
        with open(path, 'w', encoding='utf-8', newline='\n') as fh:
            fh.write(model_json)
        logger.info(f"Saved model audit file {path}")
        return path

    def save_corpus(self, docs: Iterable[ProductionUnitDoc], out_dir: str) -> str:
        """Write one transcription per unit plus manifest.json; returns the manifest path"""
        entries: List[dict] = []
        for position, doc in enumerate(docs):
            filename = f"{position:03d}_{_UNSAFE.sub('_', f'{doc.codex_id}_{doc.unit_id}')}.txt"
            with open(self._path(filename, out_dir), 'w', encoding='utf-8', newline='\n') as fh:
                fh.write(doc.text)
            entry = {'file': filename, 'codex': doc.codex_id, 'unit': doc.unit_id, 'scribe': doc.scribe}
            if doc.date_range is not None:
                entry['date_from'], entry['date_to'] = doc.date_range
            entries.append(entry)
        manifest_path = self.save_json(entries, 'manifest.json', out_dir)
        logger.info(f"Saved {len(entries)} transcriptions and manifest to {out_dir}")
        return manifest_path
