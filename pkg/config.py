# config.py

import os
import json
import logging
from dataclasses import dataclass, field, fields, asdict
from typing import Any, Dict, Optional

from errors import ConfigError

logger = logging.getLogger(__name__)

BASE_DIR = os.path.abspath(os.path.dirname(__file__))
DATA_DIR = os.path.join(BASE_DIR, 'data')
DEFAULT_INVENTORY_PATH = os.path.join(DATA_DIR, 'brevigraph_inventory.json')
OUTPUT_DIR = 'output'

APP_NAME = 'ScribeFlow'
APP_VERSION = '1.0.0'
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

# --- Corpus / sampling ---
SEGMENT_SIZE = 5000
TOP_K = 100
MIN_SEGMENTS = 10
SEED = 42
JOBS = 1

# Removed by clean_text on top of the Unicode P* categories
EXTRA_PUNCTUATION = frozenset({
    0x00B7,  # middle dot
    0x2E4E,  # punctus elevatus mark
    0xF161,  # MUFI punctus elevatus (PUA)
    0xF1E2,  # MUFI punctus versus (PUA)
})
# HTR artefacts
ARTEFACT_CHARS = frozenset({0xFEFF, 0x200B})

# --- Dimensionality reduction ---
PCA_DIMS = 25
EMBED_METHOD = 'pca2d'
EMBED_METHODS = ('pca2d', 'neighbor')
EMBED_NEIGHBORS = 15
EMBED_EPOCHS = 500
EMBED_LEARNING_RATE = 1.0
EMBED_NEGATIVE_SAMPLES = 5

# --- Learners ---
NU = 0.1
GAMMA = 'scale'
OCSVM_TOL = 1e-4
OCSVM_MAX_ITER = 10000
N_TREES = 200
MIN_SAMPLES_SPLIT = 2
KNN_K = 1

# --- Reports ---
TOP_M = 10
FLOAT_FORMAT = '%.10g'

_INT_FIELDS = ('segment_size', 'top_k', 'pca_dims', 'n_trees', 'min_segments', 'seed', 'jobs')


@dataclass
class RunConfig:
    manifest_path: Optional[str] = None
    inventory_path: Optional[str] = None
    segment_size: int = SEGMENT_SIZE
    top_k: int = TOP_K
    pca_dims: int = PCA_DIMS
    embed_method: str = EMBED_METHOD
    nu: float = NU
    gamma: Any = GAMMA
    n_trees: int = N_TREES
    min_segments: int = MIN_SEGMENTS
    seed: int = SEED
    output_dir: str = OUTPUT_DIR
    jobs: int = JOBS
    merge: Dict[str, str] = field(default_factory=dict)

    def validate(self):
        """Raise ConfigError when a field has the wrong type or is outside its documented range"""
        for name in _INT_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f'{name} must be an integer, got {value!r}')
        if isinstance(self.nu, bool) or not isinstance(self.nu, (int, float)):
            raise ConfigError(f'nu must be a number, got {self.nu!r}')
        if not isinstance(self.output_dir, str):
            raise ConfigError(f'output_dir must be a path string, got {self.output_dir!r}')
        if not isinstance(self.merge, dict):
            raise ConfigError(f'merge must map old labels to new ones, got {self.merge!r}')

        checks = [
            (self.segment_size >= 1, f'segment_size must be >= 1, got {self.segment_size}'),
            (self.top_k >= 1, f'top_k must be >= 1, got {self.top_k}'),
            (self.pca_dims >= 1, f'pca_dims must be >= 1, got {self.pca_dims}'),
            (self.embed_method in EMBED_METHODS, f'embed_method must be one of {EMBED_METHODS}, got {self.embed_method!r}'),
            (0 < self.nu <= 1, f'nu must lie in (0, 1], got {self.nu}'),
            (self.n_trees >= 1, f'n_trees must be >= 1, got {self.n_trees}'),
            (self.min_segments >= 0, f'min_segments must be >= 0, got {self.min_segments}'),
            (self.jobs >= 1, f'jobs must be >= 1, got {self.jobs}'),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        if self.gamma != 'scale':
            try:
                gamma = float(self.gamma)
            except (TypeError, ValueError):
                raise ConfigError(f"gamma must be 'scale' or a positive number, got {self.gamma!r}")
            if gamma <= 0:
                raise ConfigError(f'gamma must be positive, got {gamma}')
            self.gamma = gamma
        return self

    def to_dict(self):
        return asdict(self)


def load_run_config(config_path=None, overrides=None):
    """Defaults, then the JSON config file, then explicit overrides (CLI flags win)"""
    values = {}
    known = {f.name for f in fields(RunConfig)}

    if config_path:
        try:
            with open(config_path, 'r', encoding='utf-8') as fh:
                file_values = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f'config file not found: {config_path}')
        except json.JSONDecodeError as e:
            raise ConfigError(f'config file {config_path} is not valid JSON: {e}')
        if not isinstance(file_values, dict):
            raise ConfigError(f'config file {config_path} must hold a JSON object')
        unknown = sorted(set(file_values) - known)
        if unknown:
            raise ConfigError(f'unknown config keys: {", ".join(unknown)}')
        values.update(file_values)

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in known:
            raise ConfigError(f'unknown config key: {key}')
        values[key] = value

    config = RunConfig(**values).validate()
    logger.debug(f"Run config: {config.to_dict()}")
    return config
