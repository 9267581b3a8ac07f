"""Table kernel backend selection.

The hot inner loops of every inference pass are two dense-table primitives:
an aligned product and an axis marginalization.  A compiled extension
(``_tablekern``, built from Cython) provides them with explicit stride
walks; ``dense`` is the numpy fallback.  Selection happens once at import:

* ``BORDERTREE_KERNELS=numpy``  force the numpy backend,
* ``BORDERTREE_KERNELS=cython`` require the compiled backend (ImportError
  if the extension is missing),
* unset / ``auto``              compiled if available, else numpy.
"""

from __future__ import annotations

import os

from . import dense


def _select():
    choice = os.environ.get("BORDERTREE_KERNELS", "auto").lower()
    if choice == "numpy":
        return dense
    if choice == "cython":
        from . import _tablekern

        return _tablekern
    try:
        from . import _tablekern

        return _tablekern
    except ImportError:
        return dense


_impl = _select()

BACKEND = _impl.BACKEND
product = _impl.product
sum_axes = _impl.sum_axes


def available_backends():
    """All importable backend modules, for parity tests and benchmarks."""
    mods = [dense]
    try:
        from . import _tablekern

        mods.append(_tablekern)
    except ImportError:
        pass
    return mods
