import numpy as np


def random_density(rng, D, rank=None):
    """Random full-rank (or given-rank) density matrix."""
    k = D if rank is None else rank
    G = rng.normal(size=(D, k)) + 1j * rng.normal(size=(D, k))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def coherent_ket(alpha, dim):
    n = np.arange(dim)
    from math import factorial
    c = np.array([alpha**k / np.sqrt(float(factorial(k))) for k in n], dtype=complex)
    return c / np.linalg.norm(c)
