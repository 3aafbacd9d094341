# services/__init__.py

# Import classes
from .corpus_service import CorpusService
from .segmentation_service import SegmentationService
from .metrics_service import MetricsService
from .feature_service import FeatureService
from .reduction_service import ReductionService
from .learning_service import LearningService
from .analysis_engine import ScribalAnalysisEngine
from .synth_service import SynthService
from .storage_service import StorageService
from .plot_service import PlotService

# Create instances
segmentation_service = SegmentationService()
metrics_service = MetricsService(segmentation_service)
feature_service = FeatureService()
reduction_service = ReductionService()
learning_service = LearningService()
analysis_engine = ScribalAnalysisEngine(feature_service, reduction_service, learning_service)
storage_service = StorageService()
plot_service = PlotService()

# Export instances
__all__ = [
    'CorpusService',
    'SynthService',
    'segmentation_service',
    'metrics_service',
    'feature_service',
    'reduction_service',
    'learning_service',
    'analysis_engine',
    'storage_service',
    'plot_service',
]
