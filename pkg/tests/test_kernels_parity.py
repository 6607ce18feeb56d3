import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

HERE = Path(__file__).parent


def _run(tmp_path, disable: bool):
    env = dict(os.environ)
    env["GENPTR_DISABLE_NUMBA"] = "1" if disable else "0"
    target = tmp_path / ("numpy.npz" if disable else "numba.npz")
    subprocess.run([sys.executable, str(HERE / "_kernel_cases.py"), str(target)], env=env, check=True)
    return dict(np.load(target))


@pytest.fixture(scope="module")
def both(tmp_path_factory):
    d = tmp_path_factory.mktemp("parity")
    return _run(d, disable=False), _run(d, disable=True)


def test_backends_selected(both):
    jit, plain = both
    assert bool(jit["using_numba"]) and not bool(plain["using_numba"])


def test_outputs_agree(both):
    jit, plain = both
    assert set(jit) == set(plain)
    for key in sorted(jit):
        if key == "using_numba":
            continue
        # Integer counts must match exactly; float kernels up to reassociation.
        if key == "wins":
            assert np.array_equal(jit[key], plain[key]), key
        else:
            np.testing.assert_allclose(jit[key], plain[key], rtol=1e-12, atol=1e-300, err_msg=key)


def test_fallback_matches_in_process(both):
    from genptr import _accel

    sys.path.insert(0, str(HERE))
    import _kernel_cases

    here = _kernel_cases.evaluate()
    other = both[0] if _accel.USING_NUMBA else both[1]
    for key in here:
        if key != "using_numba":
            np.testing.assert_allclose(here[key], other[key], rtol=1e-12, atol=1e-300, err_msg=key)
