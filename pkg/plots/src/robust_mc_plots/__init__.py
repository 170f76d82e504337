"""Figure rendering for robust-mc result CSVs."""

from .figures import (
    EXPECTED_HEADER,
    FIGURES,
    FigureSpec,
    RenderSummary,
    SchemaError,
    read_rows,
    render,
)

__version__ = "0.1.0"

__all__ = ["EXPECTED_HEADER", "FIGURES", "FigureSpec", "RenderSummary",
           "SchemaError", "read_rows", "render"]
