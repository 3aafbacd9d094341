# services/segmentation_service.py

import logging
from typing import Iterable, List

import pandas as pd

import config
from errors import ConfigError
from models import ProductionUnitDoc, Segment

logger = logging.getLogger(__name__)


class SegmentationService:
    def segment_unit(self, doc: ProductionUnitDoc, size: int = config.SEGMENT_SIZE) -> List[Segment]:
        """Cut a unit into consecutive, non-overlapping windows of `size` clusters.

        Whitespace clusters count toward the window; the trailing remainder is dropped.
        """
        if size < 1:
            raise ConfigError(f'segment size must be >= 1, got {size}')
        n_segments = len(doc.clusters) // size
        return [
            Segment(
                codex_id=doc.codex_id,
                unit_id=doc.unit_id,
                scribe=doc.scribe,
                index=i,
                clusters=tuple(doc.clusters[i * size:(i + 1) * size]),
            )
            for i in range(n_segments)
        ]

    def segment_corpus(self, units: Iterable[ProductionUnitDoc], size: int = config.SEGMENT_SIZE) -> List[Segment]:
        segments = []
        for unit in units:
            unit_segments = self.segment_unit(unit, size)
            if not unit_segments:
                logger.debug(f"{unit.codex_id} / {unit.unit_id} is shorter than one segment ({len(unit.clusters)} clusters)")
            segments.extend(unit_segments)
        logger.info(f"Segmented corpus into {len(segments)} segments of {size} clusters")
        return segments

    def segment_table(self, segments: Iterable[Segment]) -> pd.DataFrame:
        return pd.DataFrame.from_records(
            [
                {
                    'codex': s.codex_id,
                    'unit': s.unit_id,
                    'scribe': s.scribe,
                    'index': s.index,
                    'n_clusters': len(s.clusters),
                } for s in segments
            ],
            columns=['codex', 'unit', 'scribe', 'index', 'n_clusters'],
        )
