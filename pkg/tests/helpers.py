"""Shared test oracles: finite differences and small scalar references."""

import numpy as np

from dynroad.autodiff import Tensor, backward


def fd_gradients(build, values, h=1e-5):
    """Central finite differences of a scalar-valued builder.

    ``build`` takes a list of numpy arrays and returns the loss as a float;
    it must construct the computation from scratch on every call so the
    oracle never touches the autodiff backward path.
    """
    grads = [np.zeros_like(v) for v in values]
    for k, v in enumerate(values):
        flat = v.ravel()
        gflat = grads[k].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = build(values)
            flat[i] = orig - h
            fm = build(values)
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
    return grads


def check_gradients(graph_fn, values, rtol=1e-4, atol=1e-7, h=1e-5):
    """Compare autodiff gradients against the finite-difference oracle.

    ``graph_fn`` maps a list of Tensors to a scalar loss Tensor. Raises
    AssertionError naming the worst offending parameter.
    """
    params = [Tensor(v.copy(), requires_grad=True) for v in values]
    loss = graph_fn(params)
    backward(loss, leaves=params)
    analytic = [p.grad.copy() for p in params]

    def value_of(vals):
        tensors = [Tensor(v) for v in vals]
        return float(graph_fn(tensors).data)

    numeric = fd_gradients(value_of, [v.copy() for v in values], h=h)
    for k, (a, n) in enumerate(zip(analytic, numeric)):
        err = np.abs(a - n)
        bound = atol + rtol * np.maximum(np.abs(a), np.abs(n))
        if not np.all(err <= bound):
            worst = float((err - bound).max())
            raise AssertionError(
                f"gradient mismatch on parameter {k}: worst excess {worst:.3e}, "
                f"analytic {a.ravel()[:4]}, numeric {n.ravel()[:4]}")
    return analytic
