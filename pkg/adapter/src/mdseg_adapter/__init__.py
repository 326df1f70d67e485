"""mdseg-adapter: serves per-pixel class scores over the predictor protocol.

Bridges the segmentation toolkit to a model process: reads scale/flip
requests as JSON lines, runs a stub or a real checkpoint, and answers
with SGLT logit files.
"""

from .server import serve
from .sglt import read_sglt, write_sglt
from .stubs import CheckerboardStub, ConstantStub, GtLeakStub, make_stub

__version__ = "0.1.0"
