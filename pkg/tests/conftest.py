from __future__ import annotations

import pytest

from checkout import kernels

_BACKENDS = kernels.available_backends()


@pytest.fixture(params=sorted(_BACKENDS))
def backend(request):
    """Each kernel backend in turn (compiled and pure-python)."""
    return _BACKENDS[request.param]
