"""Partly linear transformation models for current status data."""

from ._cstrans import (
    B5dReport,
    BiasResult,
    CoverageSummary,
    Dataset,
    EfficientScorePieces,
    FitDiagnostics,
    FitResult,
    JackknifeResult,
    LinkFamily,
    ModelParams,
    StudyResult,
    __version__,
    bias_experiment,
    block_jackknife,
    efficient_information,
    family,
    fit,
    npmle,
    read_csv,
    run_study,
    write_csv,
)

__all__ = [
    "B5dReport",
    "BiasResult",
    "CoverageSummary",
    "Dataset",
    "EfficientScorePieces",
    "FitDiagnostics",
    "FitResult",
    "JackknifeResult",
    "LinkFamily",
    "ModelParams",
    "StudyResult",
    "__version__",
    "bias_experiment",
    "block_jackknife",
    "efficient_information",
    "family",
    "fit",
    "npmle",
    "read_csv",
    "run_study",
    "write_csv",
]
