"""Shared test data."""

import numpy as np

from lagflow.torusmap import Shear, TrigPoly


def standard_shears(a: float = 0.1) -> list[Shear]:
    """x-shear by ``a sin(2 pi y)`` followed by a y-shear by ``a sin(2 pi x)``."""
    return [Shear("x", a, TrigPoly((1.0,))), Shear("y", a, TrigPoly((1.0,)))]


def asymmetric_shears() -> list[Shear]:
    return [
        Shear("x", 0.12, TrigPoly((1.0, 0.3), (0.0, 0.2))),
        Shear("y", 0.09, TrigPoly((0.4, 0.0), (1.0, 0.0, 0.25))),
    ]


def orders(errors):
    errors = np.asarray(errors, float)
    return np.log2(errors[:-1] / errors[1:])


class Scaled:
    """Profile ``a * p`` with the ``__call__``/``deriv`` interface of TrigPoly."""

    def __init__(self, a, p):
        self.a, self.p = a, p

    def __call__(self, s):
        return self.a * self.p(s)

    def deriv(self, s, order=1):
        return self.a * self.p.deriv(s, order)
