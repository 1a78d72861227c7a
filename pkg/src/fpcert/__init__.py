"""fpcert: prove range and rounding-error bounds of straight-line
floating-point computations, with independently checkable certificates."""

__version__ = "0.1.0"

from .engine import Options
from .prover import Report, prove
from .syntax import Script, ScriptError, load_script

__all__ = ["Options", "Report", "Script", "ScriptError", "load_script",
           "prove", "__version__"]
