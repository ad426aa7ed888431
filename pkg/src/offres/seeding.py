"""Named, counter-based random streams.

Every random draw in the package goes through :func:`named_rng` so that a
single scenario seed reproduces all outputs on any platform.
"""

import zlib

import numpy as np


def named_rng(seed, name):
    """Philox stream keyed by ``(seed, name)``."""
    key = zlib.crc32(name.encode("utf-8"))
    ss = np.random.SeedSequence(int(seed), spawn_key=(key,))
    return np.random.Generator(np.random.Philox(ss))


def random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (a + a.conj().T) / 2


def random_unitary(rng, n):
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def phase_pattern_couplings(rng, n, magnitude, real_pairs=((0, 1),)):
    """Off-diagonal couplings of fixed magnitude and random phases.

    Pairs listed in ``real_pairs`` (0-based, upper triangle) keep a real,
    positive coupling so the qubit rotation axis stays along x.
    """
    g = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            phase = 0.0 if (i, j) in real_pairs else rng.uniform(0.0, 2 * np.pi)
            g[i, j] = magnitude * np.exp(1j * phase)
    return g + g.conj().T
