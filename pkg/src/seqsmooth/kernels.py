"""Smoothing kernels, their scaled weights and moments.

A kernel is stored as a :class:`KernelSpec`, an immutable record wrapping a
vectorised callable ``K(u)``.  Two kernels are built in (Gaussian and
Epanechnikov); higher-order kernels are derived from a base kernel with
:func:`make_higher_order_kernel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import KernelConstructionError

__all__ = [
    "KernelSpec",
    "GAUSSIAN",
    "EPANECHNIKOV",
    "eval_kernel",
    "scaled_kernel_weight",
    "kernel_moment",
    "kernel_roughness",
    "make_higher_order_kernel",
    "get_kernel",
    "available_kernels",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Gaussian tails are integrated on [-10, 10]; the mass outside is < 1e-22.
_GAUSSIAN_QUAD_RADIUS = 10.0
# Beyond 8 standard deviations phi(u) < 1e-14; used to skip grid points on update.
# (At 6 the skipped mass, divided by a small h, is visible at 1e-10 tolerances.)
_GAUSSIAN_EFFECTIVE_RADIUS = 8.0


@dataclass(frozen=True)
class KernelSpec:
    """An even smoothing kernel ``K`` with unit integral.

    Parameters
    ----------
    name : str
        Registry name, e.g. ``"gaussian"``.
    func : callable
        Vectorised map ``u -> K(u)``.
    support_radius : float
        ``K(u) = 0`` for ``|u| > support_radius``; ``math.inf`` for
        infinite support.
    order : int
        Smallest even ``j >= 2`` with a nonzero ``j``-th moment.
    effective_radius : float
        Radius beyond which weights are treated as zero by the sequential
        estimators.  Equals ``support_radius`` for compact kernels.
    quad_radius : float or None
        Integration range used for moments.  ``None`` means moments cannot
        be computed (infinite support with unknown tails).
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    support_radius: float
    order: int = 2
    effective_radius: float | None = None
    quad_radius: float | None = None

    def __post_init__(self):
        if self.effective_radius is None:
            object.__setattr__(self, "effective_radius", self.support_radius)
        if self.quad_radius is None and math.isfinite(self.support_radius):
            object.__setattr__(self, "quad_radius", self.support_radius)

    @property
    def is_compact(self) -> bool:
        return math.isfinite(self.support_radius)

    @property
    def nonnegative(self) -> bool:
        return self.order == 2

    def __call__(self, u):
        return self.evaluate(u)

    def raw(self, u: np.ndarray) -> np.ndarray:
        """Unchecked array evaluation for internal hot loops."""
        out = self.func(u)
        if self.is_compact:
            out = np.where(np.abs(u) <= self.support_radius, out, 0.0)
        return out

    def evaluate(self, u):
        """Evaluate ``K(u)``; scalars in give a float back."""
        arr = np.asarray(u, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("kernel argument must be finite")
        out = self.func(arr)
        if self.is_compact:
            out = np.where(np.abs(arr) <= self.support_radius, out, 0.0)
        return float(out) if out.ndim == 0 else out


def _gaussian(u: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * u * u) / _SQRT_2PI


def _epanechnikov(u: np.ndarray) -> np.ndarray:
    return 0.75 * np.maximum(0.0, 1.0 - u * u)


GAUSSIAN = KernelSpec(
    name="gaussian",
    func=_gaussian,
    support_radius=math.inf,
    effective_radius=_GAUSSIAN_EFFECTIVE_RADIUS,
    quad_radius=_GAUSSIAN_QUAD_RADIUS,
)

EPANECHNIKOV = KernelSpec(name="epanechnikov", func=_epanechnikov, support_radius=1.0)


def eval_kernel(k: KernelSpec, u: float) -> float:
    """Return ``K(u)``."""
    return k.evaluate(u)


def scaled_kernel_weight(k: KernelSpec, h: float, x, x0):
    """Return ``K_h(x, x0) = K((x - x0) / h) / h``.

    Works elementwise on arrays.  Symmetric in ``x`` and ``x0`` because
    ``K`` is even.
    """
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    u = (np.asarray(x, dtype=float) - np.asarray(x0, dtype=float)) / h
    return k.evaluate(u) / h


def _quad(f: Callable[[float], float], k: KernelSpec) -> float:
    if k.quad_radius is None:
        raise NotImplementedError(
            f"moments of kernel {k.name!r} are not supported (unbounded support)"
        )
    r = k.quad_radius
    # Split at 0 so both halves are smooth for compact polynomial kernels.
    total = 0.0
    for a, b in ((-r, 0.0), (0.0, r)):
        val, _ = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        total += val
    return total


def kernel_moment(k: KernelSpec, j: int) -> float:
    """Return ``int u**j K(u) du`` by adaptive quadrature."""
    if j < 0 or int(j) != j:
        raise ValueError("moment index must be a nonnegative integer")
    j = int(j)
    return _quad(lambda u: u**j * float(k.func(np.asarray(u))), k)


def kernel_roughness(k: KernelSpec) -> float:
    """Return ``int K(u)**2 du``."""
    return _quad(lambda u: float(k.func(np.asarray(u))) ** 2, k)


def make_higher_order_kernel(
    base: KernelSpec, target_order: int, name: str | None = None
) -> KernelSpec:
    """Build ``P(u) * base(u)`` with vanishing moments below ``target_order``.

    ``P`` is an even polynomial of degree ``target_order - 2``.  Its
    coefficients solve the moment system ``int P K u^(2j) = [j == 0]`` for
    ``j = 0 .. target_order/2 - 1``.

    Raises
    ------
    ValueError
        If ``target_order`` is odd or below 2.
    KernelConstructionError
        If the moment system is singular or the result fails verification.
    """
    if int(target_order) != target_order or target_order < 2 or target_order % 2:
        raise ValueError(f"target_order must be an even integer >= 2, got {target_order}")
    target_order = int(target_order)
    if target_order <= base.order:
        return base

    m = target_order // 2
    mom = np.array([kernel_moment(base, 2 * i) for i in range(2 * m)])
    system = np.array([[mom[i + j] for i in range(m)] for j in range(m)])
    rhs = np.zeros(m)
    rhs[0] = 1.0
    if np.linalg.cond(system) > 1e12:
        raise KernelConstructionError("moment system is singular")
    coef = np.linalg.solve(system, rhs)
    base_func = base.func
    powers = 2 * np.arange(m)

    def func(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        poly = np.tensordot(u[..., None] ** powers, coef, axes=([-1], [0]))
        return poly * base_func(u)

    k = KernelSpec(
        name=name or f"{base.name}-order{target_order}",
        func=func,
        support_radius=base.support_radius,
        order=target_order,
        effective_radius=base.effective_radius,
        quad_radius=base.quad_radius,
    )
    for j in range(0, target_order, 2):
        expected = 1.0 if j == 0 else 0.0
        if abs(kernel_moment(k, j) - expected) > 1e-8:
            raise KernelConstructionError(f"moment {j} failed verification")
    if abs(kernel_moment(k, target_order)) < 1e-10:
        raise KernelConstructionError(f"moment {target_order} vanished")
    return k


_REGISTRY: dict[str, KernelSpec] = {
    "gaussian": GAUSSIAN,
    "epanechnikov": EPANECHNIKOV,
}


def get_kernel(name: str) -> KernelSpec:
    """Look a kernel up by name, constructing ``<base>-order<d>`` on demand."""
    key = name.lower()
    if key in _REGISTRY:
        return _REGISTRY[key]
    base, sep, order = key.partition("-order")
    if sep and base in _REGISTRY and order.isdigit():
        k = make_higher_order_kernel(_REGISTRY[base], int(order), name=key)
        _REGISTRY[key] = k
        return k
    raise KeyError(f"unknown kernel {name!r}; choose from {available_kernels()}")


def available_kernels() -> list[str]:
    return ["gaussian", "epanechnikov", "epanechnikov-order4"]
