"""Backend selection for the steering-radius kernel.

The compiled extension is used when importable.  Setting the environment
variable ``STEERFILTER_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

BACKEND = "python"
if os.environ.get("STEERFILTER_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from steerfilter._kernel import (  # noqa: F401
            direction_search, free_residual, min_radius, solve_free,
        )
        BACKEND = "compiled"
    except ImportError:
        pass

if BACKEND == "python":
    from steerfilter._kernel_py import (  # noqa: F401
        direction_search, free_residual, min_radius, solve_free,
    )

__all__ = ["BACKEND", "direction_search", "free_residual", "min_radius", "solve_free"]
