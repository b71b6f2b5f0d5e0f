"""Static detection of virtual-machine dispatch structures in IR control-flow graphs."""
from .annotator import MarkerCollision, MarkerSpec, annotate, strip_markers
from .cfg import Cfg, UnknownBlock, build_cfg, out_degree, reachable_from, to_dot
from .detector import (DetectionResult, DiagCode, Diagnostic, VmEndMode, detect,
                       find_dispatch_start, find_handlers, find_vm_end, find_vm_start)
from .ir import (IrError, IrFunction, IrModule, ParseError, parse_module,
                 print_module, structurally_equal)
from .synth import GroundTruth, InvalidConfig, Mode, SynthConfig, generate, merge_transform

__version__ = "0.1.0"
