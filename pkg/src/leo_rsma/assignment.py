"""User-to-(beam, resource block) assignment: greedy by channel and random.

Greedy runs ceil(U/M) rounds; in each round every beam, in index order, grabs
the still-unassigned user with the strongest channel on the beam's block. Each
beam is capped at ceil(U/M) users in total so later beams are never starved.
With the default "diagonal" pairing, beam m transmits only on block m mod K;
"free" pairing lets a beam take one user per block and round until its cap.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil
from pathlib import Path

import numpy as np

from .model import ChannelRealization, SystemConfig


@dataclass(frozen=True)
class Assignment:
    """Binary user assignment indexed [beam, user, block]."""

    x: np.ndarray

    @property
    def per_beam_counts(self) -> np.ndarray:
        return self.x.sum(axis=(1, 2))

    def validate(self, cfg: SystemConfig):
        m, u, k = cfg.num_beams, cfg.num_users, cfg.num_resource_blocks
        assert self.x.shape == (m, u, k), "assignment shape mismatch"
        assert np.all(np.isin(self.x, (0, 1))), "assignment must be binary"
        assert np.all(self.x.sum(axis=(0, 2)) == 1), \
            "each user needs exactly one (beam, block)"
        cap = ceil(u / m)
        assert np.all(self.per_beam_counts <= cap), "per-beam user cap exceeded"

    def to_csv(self, path):
        triples = np.argwhere(self.x == 1)
        lines = ["beam,user,block"]
        lines += [f"{m},{u},{k}" for m, u, k in triples]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_csv(cls, path, cfg: SystemConfig) -> "Assignment":
        x = np.zeros((cfg.num_beams, cfg.num_users, cfg.num_resource_blocks),
                     dtype=np.int8)
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        for line in lines[1:]:
            if not line.strip():
                continue
            m, u, k = (int(v) for v in line.split(","))
            x[m, u, k] = 1
        return cls(x=x)


def _beam_blocks(cfg: SystemConfig, m: int) -> list[int]:
    if cfg.block_pairing == "diagonal":
        return [m % cfg.num_resource_blocks]
    return list(range(cfg.num_resource_blocks))


def greedy_assign(real: ChannelRealization, cfg: SystemConfig) -> Assignment:
    """Channel-greedy assignment with per-beam cap and lowest-index tie-break."""
    m_n, u_n, k_n = cfg.num_beams, cfg.num_users, cfg.num_resource_blocks
    cap = ceil(u_n / m_n)
    gains = real.power_gains
    x = np.zeros((m_n, u_n, k_n), dtype=np.int8)
    unassigned = np.ones(u_n, dtype=bool)
    counts = np.zeros(m_n, dtype=int)

    for _ in range(cap):
        for m in range(m_n):
            for k in _beam_blocks(cfg, m):
                if not unassigned.any():
                    return Assignment(x=x)
                if counts[m] >= cap:
                    break
                masked = np.where(unassigned, gains[m, :, k], -np.inf)
                e = int(np.argmax(masked))  # argmax keeps the lowest index on ties
                x[m, e, k] = 1
                unassigned[e] = False
                counts[m] += 1
    return Assignment(x=x)


def random_assign(cfg: SystemConfig, seed: int) -> Assignment:
    """Uniform valid assignment: users drop into shuffled per-beam slots."""
    m_n, u_n, k_n = cfg.num_beams, cfg.num_users, cfg.num_resource_blocks
    cap = ceil(u_n / m_n)
    rng = np.random.default_rng(seed)
    slots = np.repeat(np.arange(m_n), cap)
    rng.shuffle(slots)
    x = np.zeros((m_n, u_n, k_n), dtype=np.int8)
    for u in range(u_n):
        m = int(slots[u])
        if cfg.block_pairing == "diagonal":
            k = m % k_n
        else:
            k = int(rng.integers(k_n))
        x[m, u, k] = 1
    return Assignment(x=x)
