"""Select the compiled hot-kernel implementation at import time.

``roughsmile._fastpath`` is a Cython extension built by setup.py; when it is
not available (pure-source checkout, failed compile) the numpy fallback is
used instead. ``HAVE_COMPILED`` records which one won so benchmarks and bug
reports can say what actually ran.
"""

try:
    from . import _fastpath as _impl

    HAVE_COMPILED = True
except ImportError:
    from . import _fastpath_py as _impl

    HAVE_COMPILED = False

max_weighted_increment = _impl.max_weighted_increment
batch_max_weighted_increment = _impl.batch_max_weighted_increment
