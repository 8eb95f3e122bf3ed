"""Pure numpy implementations of the pairwise kernels.

Same signatures and semantics as the compiled ``_ckernels`` module; used
when the extension is not built or when ``SISPCA_BACKEND=python``.
"""
import numpy as np


def pairwise_sq_dists(Z):
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    sq = np.einsum("ij,ij->i", Z, Z)
    D = sq[:, None] + sq[None, :] - 2.0 * (Z @ Z.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    # exact symmetry; the Gram trick is only symmetric up to rounding
    return 0.5 * (D + D.T)


def gaussian_kernel(Z, w2):
    K = np.exp(-w2 * pairwise_sq_dists(Z))
    np.fill_diagonal(K, 1.0)
    return K


def double_center(K):
    K = np.asarray(K, dtype=np.float64)
    row = K.mean(axis=1)
    col = K.mean(axis=0)
    return K - row[:, None] - col[None, :] + K.mean()


def gaussian_grad(Z, K, G, w2):
    """Gradient of sum(G * K) w.r.t. Z for K = exp(-w2 * ||z_a - z_b||^2).

    G must be symmetric.
    """
    W = G * K
    return -4.0 * w2 * (W.sum(axis=1)[:, None] * Z - W @ Z)
