# services/plot_service.py

import logging
from typing import Dict, List, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

import config
from models import DensityReport, EmbeddingResult, ImportanceReport, OutlierReport

logger = logging.getLogger(__name__)

PALETTE = ('#1f77b4', '#d62728', '#2ca02c', '#ff7f0e', '#9467bd', '#8c564b', '#e377c2', '#7f7f7f',
           '#bcbd22', '#17becf')
INLIER_COLOR = '#4c72b0'
OUTLIER_COLOR = '#dd8452'


class SvgCanvas:
    """Minimal SVG string builder; coordinates are in pixels, y grows downward"""

    def __init__(self, width, height):
        self.width = width
        self.height = height
        self.parts: List[str] = []

    def rect(self, x, y, w, h, fill, stroke='none', extra=''):
        self.parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{max(w, 0):.2f}" height="{max(h, 0):.2f}" '
                          f'fill="{fill}" stroke="{stroke}" {extra}/>')

    def line(self, x1, y1, x2, y2, stroke='#333', width=1.0):
        self.parts.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                          f'stroke="{stroke}" stroke-width="{width}"/>')

    def circle(self, cx, cy, r, fill, title=None):
        tip = f'<title>{escape(title)}</title>' if title else ''
        self.parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r}" fill="{fill}" fill-opacity="0.75">{tip}</circle>')

    def text(self, x, y, string, size=11, anchor='start', extra=''):
        self.parts.append(f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" text-anchor="{anchor}" '
                          f'font-family="sans-serif" {extra}>{escape(str(string))}</text>')

    def render(self, title='') -> str:
        header = [
            f'<!-- generated by {config.APP_NAME} {config.APP_VERSION} -->',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">',
        ]
        if title:
            header.append(f'<title>{escape(title)}</title>')
        header.append(f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="white"/>')
        return '\n'.join(header + self.parts + ['</svg>']) + '\n'


class _Axis:
    def __init__(self, low, high, start, end):
        if high <= low:
            low, high = low - 0.5, high + 0.5
        pad = (high - low) * 0.05
        self.low, self.high = low - pad, high + pad
        self.start, self.end = start, end

    def __call__(self, value):
        return self.start + (value - self.low) / (self.high - self.low) * (self.end - self.start)

    def ticks(self, n=5):
        return np.linspace(self.low, self.high, n)


class PlotService:
    def __init__(self, width=720, height=480, margin=60):
        self.width = width
        self.height = height
        self.margin = margin

    def _frame(self, canvas, x_axis, y_axis, x_label='', y_label=''):
        m = self.margin
        canvas.line(m, self.height - m, self.width - m, self.height - m)
        canvas.line(m, m, m, self.height - m)
        if y_axis is not None:
            for tick in y_axis.ticks():
                y = y_axis(tick)
                canvas.line(m - 4, y, m, y)
                canvas.text(m - 6, y + 4, f'{tick:.3g}', size=9, anchor='end')
        if x_axis is not None:
            for tick in x_axis.ticks():
                x = x_axis(tick)
                canvas.line(x, self.height - m, x, self.height - m + 4)
                canvas.text(x, self.height - m + 16, f'{tick:.3g}', size=9, anchor='middle')
        if x_label:
            canvas.text(self.width / 2, self.height - 12, x_label, anchor='middle')
        if y_label:
            canvas.text(16, self.height / 2, y_label, anchor='middle',
                        extra=f'transform="rotate(-90 16 {self.height / 2:.2f})"')

    def _legend(self, canvas, entries: Sequence[Tuple[str, str]]):
        x = self.width - self.margin + 8
        for i, (label, color) in enumerate(entries):
            y = self.margin + 16 * i
            canvas.rect(x, y - 9, 10, 10, color)
            canvas.text(x + 14, y, label, size=10)

    # ---------------------- SCATTER ----------------------
    def scatter(self, embedding: EmbeddingResult, title='') -> str:
        """Segments coloured by scribe"""
        canvas = SvgCanvas(self.width + 100, self.height)
        coords = embedding.coords
        scribes = list(dict.fromkeys(k.scribe for k in embedding.labels))
        colors = {s: PALETTE[i % len(PALETTE)] for i, s in enumerate(scribes)}
        m = self.margin
        x_axis = _Axis(coords[:, 0].min(), coords[:, 0].max(), m, self.width - m)
        y_axis = _Axis(coords[:, 1].min(), coords[:, 1].max(), self.height - m, m)
        self._frame(canvas, x_axis, y_axis, f'{embedding.method} 1', f'{embedding.method} 2')
        for (x, y), key in zip(coords, embedding.labels):
            canvas.circle(x_axis(x), y_axis(y), 3, colors[key.scribe], title=f'{key.scribe} {key.segment_id}')
        self._legend(canvas, [(s, colors[s]) for s in scribes])
        if title:
            canvas.text(self.width / 2, 24, title, size=14, anchor='middle')
        return canvas.render(title)

    # ---------------------- BOXPLOTS ----------------------
    def boxplot(self, groups: Sequence[Tuple[str, Dict[str, float]]], title='', y_label='') -> str:
        """One box per (label, {min, q1, median, q3, max}); whiskers span min..max"""
        canvas = SvgCanvas(self.width, self.height)
        if not groups:
            return canvas.render(title)
        m = self.margin
        low = min(stats['min'] for _, stats in groups)
        high = max(stats['max'] for _, stats in groups)
        y_axis = _Axis(low, high, self.height - m, m)
        self._frame(canvas, None, y_axis, y_label=y_label)
        slot = (self.width - 2 * m) / len(groups)
        for i, (label, stats) in enumerate(groups):
            center = m + slot * (i + 0.5)
            half = min(slot * 0.3, 30)
            color = PALETTE[i % len(PALETTE)]
            canvas.line(center, y_axis(stats['min']), center, y_axis(stats['q1']))
            canvas.line(center, y_axis(stats['q3']), center, y_axis(stats['max']))
            canvas.line(center - half / 2, y_axis(stats['min']), center + half / 2, y_axis(stats['min']))
            canvas.line(center - half / 2, y_axis(stats['max']), center + half / 2, y_axis(stats['max']))
            top, bottom = y_axis(stats['q3']), y_axis(stats['q1'])
            canvas.rect(center - half, top, 2 * half, bottom - top, color, stroke='#333', extra='fill-opacity="0.6"')
            canvas.line(center - half, y_axis(stats['median']), center + half, y_axis(stats['median']), width=2)
            canvas.text(center, self.height - m + 16, label, size=9, anchor='middle')
        if title:
            canvas.text(self.width / 2, 24, title, size=14, anchor='middle')
        return canvas.render(title)

    def density_boxplot(self, report: DensityReport, title='') -> str:
        groups = [(row.key, row.box) for row in report.rows]
        return self.boxplot(groups, title=title or f'{report.level} abbreviation density by {report.group_key}',
                            y_label='density')

    def importance_boxplot(self, report: ImportanceReport, title='') -> str:
        """Target and rest TF-IDF distributions side by side for the top features"""
        groups = []
        for feature in report.top():
            groups.append((f'{feature.bigram.label} T', feature.target_distribution))
            groups.append((f'{feature.bigram.label} R', feature.rest_distribution))
        codex, unit = report.target
        return self.boxplot(groups, title=title or f'top bigrams for {codex} / {unit} (T) vs rest (R)',
                            y_label='tf-idf')

    # ---------------------- STACKED BARS ----------------------
    def outlier_bars(self, report: OutlierReport, title='') -> str:
        canvas = SvgCanvas(self.width + 100, self.height)
        m = self.margin
        rows = report.rows
        y_axis = _Axis(0.0, 1.0, self.height - m, m)
        self._frame(canvas, None, y_axis, y_label='proportion of segments')
        slot = (self.width - 2 * m) / max(len(rows), 1)
        for i, row in enumerate(rows):
            x = m + slot * i + slot * 0.15
            width = slot * 0.7
            inlier_share = row.n_inliers / row.n_segments if row.n_segments else 0.0
            split = y_axis(inlier_share)
            canvas.rect(x, split, width, y_axis(0.0) - split, INLIER_COLOR)
            canvas.rect(x, y_axis(1.0), width, split - y_axis(1.0), OUTLIER_COLOR)
            label = row.codex_id if report.aggregated_by == 'codex' else f'{row.codex_id} {row.unit_id}'
            canvas.text(x + width / 2, self.height - m + 16, label, size=9, anchor='middle')
        self._legend(canvas, [('inlier', INLIER_COLOR), ('outlier', OUTLIER_COLOR)])
        if title or report.scribe:
            canvas.text(self.width / 2, 24, title or f'outliers for {report.scribe}', size=14, anchor='middle')
        return canvas.render(title)
