"""Overlay statistics figures for urans2d stats CSV output."""

from .figures import PANELS, PanelNameError, render_statistics_figure
from .loading import REQUIRED_COLUMNS, SchemaError, SeriesBundle, load_run, load_runs

__version__ = "0.1.0"
