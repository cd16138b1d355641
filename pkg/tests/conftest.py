"""Make the package importable from a plain checkout.

When roughsmile is pip-installed the compiled extension is available; on a
bare source tree this falls back to src/ on sys.path (pure-Python kernels).
CLI tests spawn subprocesses, so the same fallback is exported to them
through PYTHONPATH.
"""

import os
import sys
from pathlib import Path

_SRC = Path(__file__).resolve().parents[1] / "src"

try:
    import roughsmile  # noqa: F401
except ImportError:
    sys.path.insert(0, str(_SRC))


def subprocess_env():
    env = dict(os.environ)
    existing = env.get("PYTHONPATH", "")
    env["PYTHONPATH"] = str(_SRC) + (os.pathsep + existing if existing else "")
    return env
