"""
チェビシェフ選点の道具

[0, 1] 上のチェビシェフ点（z=1 から z=0 の順）、微分行列、クレンショウ・カーチス重み、
補間行列を提供します。微分行列は Weideman–Reddy の構成（三角恒等式と反転の工夫）に従います。
"""

import math
from functools import lru_cache
from typing import List, Tuple

import numpy as np
from scipy.interpolate import BarycentricInterpolator
from scipy.linalg import toeplitz


def chebdiff(n: int, m: int) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    [-1, 1] 上の n 点チェビシェフ微分行列 D1..Dm

    Args:
        n: 点数
        m: 必要な微分の階数（0 < m ≤ n−1）

    Returns:
        (x, [D1, ..., Dm])、x は 1 から −1 の順
    """
    n1 = n // 2
    n2 = int(math.ceil(n / 2.0))
    k = np.arange(n).reshape(n, 1)
    th = k * math.pi / (n - 1)

    # cos(th) = sin(pi/2 - th) で対称性を保つ
    x = np.sin(math.pi * np.arange(n - 1, -1 - n, -2) / (2.0 * (n - 1)))

    t = np.tile(th / 2.0, n)
    dx = 2.0 * np.sin(t.T + t) * np.sin(t.T - t)
    dx[n1:, :] = -np.flipud(np.fliplr(dx[:n2, :]))
    np.fill_diagonal(dx, 1.0)
    z = 1.0 / dx
    np.fill_diagonal(z, 0.0)

    c = toeplitz((-1.0) ** k)
    c[0, :] *= 2.0
    c[-1, :] *= 2.0
    c[:, 0] /= 2.0
    c[:, -1] /= 2.0

    matrices = []
    d = np.eye(n)
    for ell in range(m):
        diag_d = np.diag(d).reshape(n, 1)
        d = (ell + 1) * z * (c * np.tile(diag_d, n) - d)
        np.fill_diagonal(d, -np.sum(d, axis=1))
        matrices.append(d)
    return x.reshape(n), matrices


@lru_cache(maxsize=16)
def _unit_interval_operators(n: int) -> Tuple[np.ndarray, Tuple[np.ndarray, ...], np.ndarray]:
    x, mats = chebdiff(n, 4)
    z = 0.5 * (1.0 + x)
    # d/dz = 2 d/dx
    scaled = tuple(mat * 2.0 ** (i + 1) for i, mat in enumerate(mats))
    return z, scaled, clenshaw_curtis_weights(n)


def unit_grid(n: int) -> np.ndarray:
    """[0, 1] 上のチェビシェフ点（z=1 から z=0）"""
    return _unit_interval_operators(n)[0].copy()


def unit_derivatives(n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """[0, 1] 上の D1, D2, D3, D4"""
    return tuple(mat.copy() for mat in _unit_interval_operators(n)[1])


def unit_weights(n: int) -> np.ndarray:
    """[0, 1] 上のクレンショウ・カーチス重み"""
    return 0.5 * _unit_interval_operators(n)[2]


def clenshaw_curtis_weights(n: int) -> np.ndarray:
    """[-1, 1] 上の n 点クレンショウ・カーチス重み（x=1 から x=−1 の順）"""
    order = n - 1
    theta = np.pi * np.arange(n) / order
    w = np.zeros(n)
    inner = np.arange(1, order)
    v = np.ones(order - 1)
    if order % 2 == 0:
        w[0] = w[order] = 1.0 / (order ** 2 - 1)
        for k in range(1, order // 2):
            v -= 2.0 * np.cos(2.0 * k * theta[inner]) / (4.0 * k ** 2 - 1)
        v -= np.cos(order * theta[inner]) / (order ** 2 - 1)
    else:
        w[0] = w[order] = 1.0 / order ** 2
        for k in range(1, (order - 1) // 2 + 1):
            v -= 2.0 * np.cos(2.0 * k * theta[inner]) / (4.0 * k ** 2 - 1)
    w[inner] = 2.0 * v / order
    return w


def interpolation_matrix(nodes: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """
    節点値から targets での値への重心補間行列

    Args:
        nodes: チェビシェフ点
        targets: 評価点

    Returns:
        (len(targets), len(nodes)) の行列
    """
    interpolator = BarycentricInterpolator(nodes, np.eye(nodes.size))
    return np.asarray(interpolator(np.asarray(targets, dtype=float)))
