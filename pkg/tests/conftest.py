import numpy as np
import pytest

from leo_rsma import (AllocationState, ChannelRealization, DualState,
                      SystemConfig)


@pytest.fixture(scope="session")
def cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def tiny_cfg():
    """Two beams, four users: fast enough for repeated solver runs."""
    return SystemConfig(num_beams=2, num_resource_blocks=2, num_users=4,
                        total_power=20.0, max_iterations=4000)


def make_realization(cfg, h2, f, seed=0):
    """Hand-set channel realization: h2 is (M, U, K) power gains, f is (M, K)."""
    h2 = np.asarray(h2, dtype=float)
    m, u, k = h2.shape
    rng = np.random.default_rng(seed)
    return ChannelRealization(
        leo_gains=np.sqrt(h2).astype(complex),
        geo_to_leo_gains=rng.uniform(0.1, 1.0, (m, u, k)),
        leo_to_geo_gains=np.asarray(f, dtype=float),
        doppler_phases=np.zeros((m, u, k)),
        distances=np.full((m, u, k), 7e5),
        boresight_angles=np.zeros((m, u, k)),
    )


def make_alloc(cfg, x, p, eta0, eta, shares=None):
    x = np.asarray(x, dtype=np.int8)
    m, u, k = x.shape
    return AllocationState(
        beam_power=np.asarray(p, dtype=float),
        common_coeff=np.asarray(eta0, dtype=float),
        private_coeff=np.asarray(eta, dtype=float),
        common_share=np.zeros((m, u, k)) if shares is None else np.asarray(shares, float),
        assignment=x,
        precoders=np.ones((m, u + 1, k), dtype=complex),
    )


def make_dual(cfg, m, u, k, lam1=0.0, lam2=0.0, lam3=0.0, lam4=0.0, lam5=0.0,
              g_p=None, g_c=None):
    return DualState(
        lam1=np.full(u, float(lam1)),
        lam2=np.full((m, k), float(lam2)),
        lam3=np.full((m, k), float(lam3)),
        lam4=np.full((m, k), float(lam4)),
        lam5=float(lam5),
        sca_gamma_private=np.zeros((m, u, k)) if g_p is None else np.asarray(g_p, float),
        sca_gamma_common=np.zeros((m, k)) if g_c is None else np.asarray(g_c, float),
    )
