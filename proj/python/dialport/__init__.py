"""Python access to the dialport core."""

import os as _os

from ._core import (
    ChatIndex,
    DialportError,
    Lexicon,
    Portal,
    SemanticFrame,
    default_data_dir,
    load_lexicon,
    parse,
    render,
)

_bundled = _os.path.join(_os.path.dirname(__file__), "data")
if "DIALPORT_DATA_DIR" not in _os.environ and _os.path.isfile(_os.path.join(_bundled, "deployment.json")):
    _os.environ["DIALPORT_DATA_DIR"] = _bundled

__all__ = ["ChatIndex", "DialportError", "Lexicon", "Portal", "SemanticFrame", "default_data_dir", "load_lexicon", "parse", "render"]
