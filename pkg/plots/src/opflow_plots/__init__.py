"""Figure rendering for opflow experiment manifests."""

from .render import MissingCSV, RenderError, RenderInfo, SchemaMismatch, render_figure

__version__ = "0.1.0"
