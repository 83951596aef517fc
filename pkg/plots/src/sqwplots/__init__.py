from .render import SCHEMAS, PlotJob, SchemaError, read_table, render

__all__ = ["PlotJob", "SCHEMAS", "SchemaError", "read_table", "render"]

__version__ = "0.1.0"
