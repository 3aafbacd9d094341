import xml.etree.ElementTree as ET

import numpy as np
import pytest

from models import EmbeddingResult, OutlierReport, OutlierRow, SegmentKey
from services.plot_service import PlotService

SVG = '{http://www.w3.org/2000/svg}'


@pytest.fixture
def plots():
    return PlotService()


def embedding():
    labels = [SegmentKey('C1', 'I', 'alpha', 0), SegmentKey('C1', 'I', 'alpha', 1), SegmentKey('C2', 'I', 'b<eta>', 0)]
    return EmbeddingResult(coords=np.array([[0.0, 1.0], [1.0, 0.0], [5.0, 5.0]]), labels=labels, method='pca2d', seed=42)


def test_scatter_has_provenance_comment_and_one_point_per_segment(plots):
    svg = plots.scatter(embedding(), title='alpha & beta')
    assert svg.splitlines()[0] == '<!-- generated by ScribeFlow 1.0.0 -->'
    root = ET.fromstring(svg)
    assert len(root.findall(f'.//{SVG}circle')) == 3
    assert 'b&lt;eta&gt;' in svg


def test_boxplot_without_groups_is_an_empty_canvas(plots):
    root = ET.fromstring(plots.boxplot([]))
    assert root.findall(f'{SVG}rect')[0].get('fill') == 'white'


def test_outlier_bars_draw_two_stacks_per_row(plots):
    report = OutlierReport('alpha', [OutlierRow('C1', '*', 10, 9, 1), OutlierRow('C2', '*', 4, 0, 4)], 'codex', {})
    root = ET.fromstring(plots.outlier_bars(report))
    # background + 2 per row + 2 legend swatches
    assert len(root.findall(f'.//{SVG}rect')) == 1 + 4 + 2
