from arena.errors import ExportError
from arena.store.services import export_log

__all__ = ["ExportError", "export_log"]
