"""Outgoing Green's function of the barrier with its source at x' = 0.

Up to a kappa-independent constant, 2 G(0, x; kappa) is the pole sum

    H(kappa, x) = sum_n u_n(0) u_n(x) / (k_n (kappa - k_n)),   0 <= x <= L,

so the odd moments of the internal expansion weights

    Q_j(x) = sum_n u_n(0) u_n(x) / ((k^2 - k_n^2) k_n^j),   j = 1, 3, 5, ...

summed over every pole follow from H evaluated on a circle that no pole reaches.
"""
import numpy as np

CIRCLE_POINTS = 128


def _sin_over_q(q, y):
    return y * np.sinc(q * y / np.pi)


def green_weight(kappa, x, U, L):
    """H(kappa, x) = 2 f(x) / W(kappa), f outgoing at x = L and W the Wronskian.

    Depends on q only through q^2, so the branch of q = sqrt(kappa^2 - U) is free.
    """
    kappa = np.asarray(kappa, dtype=complex)
    q = np.sqrt(kappa * kappa - U + 0j)
    y = L - np.asarray(x, dtype=float)
    f = np.cos(q * y) - 1j * kappa * _sin_over_q(q, y)
    W = 2j * kappa * np.cos(q * L) + (q * q + kappa * kappa) * _sin_over_q(q, L)
    return 2.0 * f / W


def odd_moments(k, x, U, L, k_min, orders=(1, 3, 5)):
    """Q_j(x) for j in orders, shape (len(orders), len(x)).

    k_min is the smallest |k_n|; H is analytic inside |kappa| < k_min.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ring = np.exp(2j * np.pi * np.arange(CIRCLE_POINTS) / CIRCLE_POINTS)
    if k < 0.5 * k_min:
        # residues at 0 and +-k, all inside the circle
        s = np.sqrt(k * k_min) * ring
        H = green_weight(s[None, :], x[:, None], U, L)
        return np.stack([-(H * s ** (2 - j) / (k * k - s * s)).mean(axis=1) for j in orders])

    s = 0.5 * k_min * ring
    H = green_weight(s[None, :], x[:, None], U, L)
    taylor = {p: (H * s ** (-p)).mean(axis=1) for p in range(1, max(orders), 2)}
    diff = green_weight(k, x, U, L) - green_weight(-k, x, U, L)
    moments = []
    for j in orders:
        m = (j - 1) // 2
        value = diff / (2.0 * k**j)
        for r in range(m):
            value = value - taylor[2 * m - 1 - 2 * r] / k ** (2 * r + 2)
        moments.append(value)
    return np.stack(moments)


def transmitted_moments(k, c, U, L, b_min, orders):
    """R_j(c) = sum_n T_n / (k_n - c)^j over every pole, shape (len(orders), len(c)).

    T_n = 2ik u_n(0) u_n(L) e^{-ik_n L} / (k^2 - k_n^2) are the residues of
    2ik s H(s, L) e^{-isL} / (k^2 - s^2), so R_j is minus the residues of that
    function over (s - c)^j at s = c and s = +-k. c must be real; b_min is the
    smallest |Im k_n|, which keeps every pole off a circle of radius < b_min
    around c.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    radii = b_min * np.array([0.6, 0.2, 0.2 / 3])
    gaps = np.stack([np.abs(c - k), np.abs(c + k)])
    with np.errstate(divide="ignore"):
        margin = np.abs(np.log(gaps[None, :, :] / radii[:, None, None])).min(axis=1)
    r = radii[np.argmax(margin, axis=0)]

    ring = np.exp(2j * np.pi * np.arange(CIRCLE_POINTS) / CIRCLE_POINTS)
    offset = r[:, None] * ring[None, :]
    s = c[:, None] + offset
    kernel = 2j * k * s * green_weight(s, L, U, L) * np.exp(-1j * s * L) / (k * k - s * s)

    edge_plus = -1j * k * complex(green_weight(k, L, U, L)) * np.exp(-1j * k * L)
    edge_minus = -1j * k * complex(green_weight(-k, L, U, L)) * np.exp(1j * k * L)
    outside_plus = gaps[0] >= r
    outside_minus = gaps[1] >= r
    safe_plus = np.where(outside_plus, k - c, 1.0)
    safe_minus = np.where(outside_minus, -k - c, 1.0)

    moments = []
    for j in orders:
        enclosed = (kernel * offset ** (1 - j)).mean(axis=1)
        enclosed = enclosed + np.where(outside_plus, edge_plus / safe_plus**j, 0.0)
        enclosed = enclosed + np.where(outside_minus, edge_minus / safe_minus**j, 0.0)
        moments.append(-enclosed)
    return np.stack(moments)
