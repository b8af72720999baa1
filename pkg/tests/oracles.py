"""Reference implementations written independently of the package.

Nothing here imports corrdyn.  They are deliberately plain: scalar loops,
closed forms and polynomial root finders.
"""
import math

import numpy as np


def quadratic_radius(c: complex) -> float:
    # smallest r with r^2 - |c| >= 2r
    return 1.0 + math.sqrt(1.0 + abs(c))


def power_radius(p: int, q: int, abs_c: float) -> float:
    """Root of r**(p/q) - |c| - 2r by Newton from a safe starting point."""
    k = p / q
    r = max(2.0 ** (1.0 / (k - 1.0)), abs_c + 2.0)
    for _ in range(200):
        f = r**k - abs_c - 2.0 * r
        df = k * r ** (k - 1.0) - 2.0
        step = f / df
        r -= step
        if abs(step) < 1e-15 * r:
            break
    return max(r, 1.0)


def quadratic_escape_depth(z: complex, c: complex, max_depth: int) -> int:
    """Escape level of ``z`` under ``z*z + c``; ``max_depth`` if never."""
    R = quadratic_radius(c)
    if abs(z) > R:
        return 0
    for level in range(1, max_depth):
        z = z * z + c
        if abs(z) > R:
            return level
    return max_depth


def quadratic_multibrot(center: complex, half_width: float, width: int, height: int, depth: int):
    half_height = half_width * height / width
    rows = []
    for j in range(height):
        y = center.imag + half_height * ((height - 1 - 2 * j) / height)
        row = []
        for i in range(width):
            x = center.real + half_width * ((2 * i + 1 - width) / width)
            row.append(quadratic_escape_depth(0j, complex(x, y), depth))
        rows.append(row)
    return rows


def relation_roots_forward(z: complex, p: int, q: int, c: complex) -> np.ndarray:
    """All w with (w - c)**q = z**p via a companion-matrix root finder."""
    coeffs = np.zeros(q + 1, dtype=complex)
    coeffs[0] = 1.0
    coeffs[-1] = -(z**p)
    return np.roots(coeffs) + c


def relation_roots_backward(w: complex, p: int, q: int, c: complex) -> np.ndarray:
    coeffs = np.zeros(p + 1, dtype=complex)
    coeffs[0] = 1.0
    coeffs[-1] = -((w - c) ** q)
    return np.roots(coeffs)


def brute_preperiodicity(points, tol):
    """Minimal (ell, n) over all pairs, each cycle witnessed twice."""
    L = len(points)
    for ell in range(L):
        for n in range(1, L // 2 + 1):
            if ell + 2 * n > L:
                break
            if all(abs(points[j + n] - points[j]) < tol for j in range(ell, L - n)):
                return ell, n
    return None


def quadratic_misiurewicz(c: complex, depth: int = 60, tol: float = 1e-9):
    """True when 0 is strictly pre-periodic for z*z + c onto a repelling
    cycle.  Orbit indexing: z_0 = c."""
    R = quadratic_radius(c)
    orbit = [c]
    for _ in range(depth):
        if abs(orbit[-1]) > R:
            return False
        orbit.append(orbit[-1] ** 2 + c)
    for ell in range(depth // 2):
        for n in range(1, depth // 4):
            if abs(orbit[ell + n] - orbit[ell]) < tol:
                if ell == 0:
                    return False  # c itself periodic: critical cycle
                lam = 1.0
                for k in range(ell, ell + n):
                    lam *= abs(2 * orbit[k])
                return lam > 1.0
    return False
