"""Select the compiled kernels when available, else the pure-Python ones.

Set ``BENDOLP_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

pure = _kernels_py

if os.environ.get("BENDOLP_PURE_PYTHON", "") not in ("", "0"):
    compiled = None
else:
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None

impl = compiled if compiled is not None else pure
BACKEND = "compiled" if compiled is not None else "python"

fk = impl.fk
jacobian = impl.jacobian
pose_error = impl.pose_error
rot_log = impl.rot_log
point_box_sd = impl.point_box_sd
