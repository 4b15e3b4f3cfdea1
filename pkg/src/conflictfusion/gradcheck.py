"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autodiff import Tensor


class GradCheckError(ValueError):
    """The function under test cannot be finite-difference checked."""


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_err: float
    rel_tol: float
    n_entries: int
    worst_param: str = ""
    worst_index: tuple = ()

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        loc = f" at {self.worst_param}{list(self.worst_index)}" if self.worst_param else ""
        return (f"gradcheck {verdict}: max rel err {self.max_rel_err:.3e} over "
                f"{self.n_entries} entries (tol {self.rel_tol:.1e}){loc}")


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a) + abs(n), 1e-6)


def grad_check(f: Callable[[], Tensor], params: list[Tensor], *, rel_tol: float = 1e-4,
               h: float = 1e-5, names: list[str] | None = None) -> GradCheckReport:
    """Compare every analytic gradient entry of f() against central differences.

    `f` must rebuild its graph from `params` on each call and return a scalar
    Tensor. The check runs in whatever dtype the parameters carry; use
    float64 parameters for meaningful tolerances. A stochastic f (e.g. live
    dropout) is rejected up front by evaluating it twice.
    """
    if names is None:
        names = [f"param{i}" for i in range(len(params))]
    for p in params:
        if p.data.dtype != np.float64:
            raise GradCheckError("grad_check requires float64 parameters (64-bit mode)")

    first = f()
    second = f()
    if first.data.size != 1:
        raise GradCheckError("grad_check needs a scalar-valued function")
    if not np.array_equal(first.data, second.data):
        raise GradCheckError(
            "function is stochastic (two evaluations differ); disable dropout or fix its mask")
    if not np.isfinite(first.data).all():
        raise GradCheckError("function value is non-finite")

    for p in params:
        p.zero_grad()
    first.backward()
    analytic = []
    for name, p in zip(names, params):
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.isfinite(g).all():
            idx = tuple(int(i) for i in np.argwhere(~np.isfinite(g))[0])
            return GradCheckReport(False, float("inf"), rel_tol, 0, name, idx)
        analytic.append(g.copy())

    max_err = 0.0
    worst = ("", ())
    n_entries = 0
    for name, p, g in zip(names, params, analytic):
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = f().data.item()
            flat[i] = old - h
            down = f().data.item()
            flat[i] = old
            if not (np.isfinite(up) and np.isfinite(down)):
                return GradCheckReport(False, float("inf"), rel_tol, n_entries, name,
                                       np.unravel_index(i, p.data.shape))
            numeric = (up - down) / (2.0 * h)
            err = _rel_err(float(g.reshape(-1)[i]), numeric)
            n_entries += 1
            if err > max_err:
                max_err = err
                worst = (name, tuple(int(j) for j in np.unravel_index(i, p.data.shape)))
    return GradCheckReport(max_err <= rel_tol, max_err, rel_tol, n_entries, worst[0], worst[1])
