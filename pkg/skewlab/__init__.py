from skewlab.__version__ import __version__
from skewlab.certify import (
    LemmaReport,
    Region,
    check_angle_combinatorics,
    check_contract,
    check_escape_constant,
    check_fiber_escape,
    full_certificate,
)
from skewlab.cli import main, sub_command
from skewlab.config import Config, load_config
from skewlab.errors import SkewlabError
from skewlab.family import BiquadParams, construct_example
from skewlab.julia import GridSpec, PointCloud, filled_julia_base
from skewlab.numeric import Poly
from skewlab.parse import build_parser
from skewlab.skew import SkewProduct

__all__ = [
    "BiquadParams",
    "Config",
    "GridSpec",
    "LemmaReport",
    "PointCloud",
    "Poly",
    "Region",
    "SkewProduct",
    "SkewlabError",
    "build_parser",
    "check_angle_combinatorics",
    "check_contract",
    "check_escape_constant",
    "check_fiber_escape",
    "construct_example",
    "filled_julia_base",
    "full_certificate",
    "load_config",
    "main",
    "sub_command",
    "__version__",
]
