"""Adaptive hierarchical certification for segmentation under Gaussian noise.

Given Monte-Carlo samples of a segmentation model's output under input
noise, certify each component either at the finest class granularity or,
adaptively, at a coarser vertex of a semantic class hierarchy, with a
familywise statistical guarantee; evaluate results with the certified
information gain metric family.
"""

__version__ = "0.1.0"

from .certify import (
    ABSTAIN,
    CertificationConfig,
    CertifiedSegmentation,
    certify_adaptive,
    certify_at_level,
    certify_flat,
    read_certification,
    run_certification,
    select_component_levels,
    write_certification,
)
from .errors import (
    DomainError,
    HeaderMismatchError,
    HierarchyError,
    HiercertError,
    InsufficientSamplesError,
    NonDescendingThresholdsError,
    StreamError,
    UnsupportedCapabilityError,
)
from .estimator import HierarchicalCertifier
from .hierarchy import HierarchyGraph, VertexRecord, hierarchy_from_dict, load_hierarchy
from .metrics import (
    GroundTruth,
    MetricsReport,
    abstain_rate,
    boundary_map,
    c_cig,
    cig,
    class_abstain_rate,
    evaluate,
    load_ground_truth,
    miou,
    per_class_cig,
    stratified_metrics,
    write_ground_truth,
)
from .sampler import (
    InMemorySource,
    SampleSource,
    SyntheticModel,
    make_generator,
    sample_posteriors,
    sample_vertex_counts,
)
from .stats import (
    binom_p_value,
    binom_p_values,
    bonferroni_test,
    certified_radius,
    inv_norm_cdf,
    norm_cdf,
)
from .streams import ProcessSource, StreamSource, open_process, open_stream, write_stream
from .thresholds import ThresholdSchedule

__all__ = [name for name in dir() if not name.startswith("_")]
