from .export import (
    ExportError,
    ExportJob,
    NonStochasticRows,
    ShapeMismatch,
    export,
    read_dataset,
    validate_attention,
)

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "ExportJob",
    "NonStochasticRows",
    "ShapeMismatch",
    "export",
    "read_dataset",
    "validate_attention",
]
