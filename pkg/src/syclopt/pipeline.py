"""Registry of module passes addressable by name from the command line."""

from __future__ import annotations

from typing import Callable

from .host import propagate_host_to_device, raise_host
from .ir.core import ModuleIR
from .transforms import ChangeReport, canonicalize, detect_reduction, licm, loop_internalize

Pass = Callable[[ModuleIR], ChangeReport]

PASSES: dict[str, Pass] = {
    "canonicalize": canonicalize,
    "licm": licm,
    "detect-reduction": detect_reduction,
    "loop-internalize": loop_internalize,
    "raise-host": raise_host,
    "sycl-constprop": propagate_host_to_device,
}
