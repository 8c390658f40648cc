"""Central finite-difference harness for gradient checks."""

import numpy as np

FD_STEP = 1e-4  # for float64 math
REL_TOL = 1e-3


def finite_diff(scalar_fn, array, step=FD_STEP):
    """Central differences of ``scalar_fn`` with respect to ``array``.

    ``array`` is perturbed in place coordinate by coordinate and restored.
    """
    grad = np.zeros_like(array, dtype=float)
    flat = array.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_plus = scalar_fn()
        flat[i] = orig - step
        f_minus = scalar_fn()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def rel_error(analytic, numeric):
    na = np.linalg.norm(np.asarray(analytic).ravel())
    nn = np.linalg.norm(np.asarray(numeric).ravel())
    diff = np.linalg.norm((np.asarray(analytic) - np.asarray(numeric)).ravel())
    return diff / max(na, nn, 1e-12)


def assert_grad_matches(analytic, numeric, name, tol=REL_TOL):
    err = rel_error(analytic, numeric)
    assert err < tol, f"{name}: finite-difference mismatch, rel err {err:.3e}"
