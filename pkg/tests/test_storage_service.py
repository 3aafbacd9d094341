import json

import numpy as np
import pandas as pd

from services.storage_service import StorageService


def test_table_floats_use_ten_significant_digits(tmp_path):
    storage = StorageService(str(tmp_path / 'out'))
    path = storage.save_table(pd.DataFrame({'label': ['ā'], 'value': [1 / 3]}), 'table.csv')
    assert open(path, encoding='utf-8').read() == 'label,value\nā,0.3333333333\n'


def test_json_is_rounded_and_readable(tmp_path):
    storage = StorageService(str(tmp_path))
    payload = {'scores': np.array([2 / 3, np.inf]), 'n': np.int64(4), 'label': 'eñ'}
    path = storage.save_json(payload, 'report.json')
    text = open(path, encoding='utf-8').read()
    assert 'eñ' in text
    assert text.endswith('}\n')
    assert json.loads(text) == {'scores': [0.6666666667, None], 'n': 4, 'label': 'eñ'}


def test_output_directory_is_created_on_demand(tmp_path):
    target = tmp_path / 'a' / 'b'
    StorageService(str(tmp_path)).save_svg('<svg/>', 'x.svg', out_dir=str(target))
    assert (target / 'x.svg').read_text() == '<svg/>'
