"""Reproducible sampling of branching paths and of their martingale limits.

Bulk samplers work on blocks of ``BLOCK_SIZE`` replicates. Block ``b`` draws
from a generator seeded by ``SeedSequence(master_seed, spawn_key=(stream, b))``,
so the output depends only on ``(specs, cfg)`` and never on how blocks are
distributed over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .distributions import ImmigrationSpec, OffspringSpec

BLOCK_SIZE = 1 << 14
DEFAULT_GENERATIONS = 20

# stream tags keep the samplers' random streams disjoint
_STREAM_W = 1
_STREAM_GWI = 2
_STREAM_DECOMP = 3
_STREAM_TILDE = 4
_STREAM_PATH = 5


class CappedPathError(RuntimeError):
    """Population exceeded ``population_cap``; ``partial`` holds the counts so far."""

    def __init__(self, partial, cap: int):
        super().__init__(f"population exceeded cap {cap}")
        self.partial = partial
        self.cap = cap


@dataclass(frozen=True)
class SimConfig:
    generations: int = DEFAULT_GENERATIONS
    replicates: int = 1
    master_seed: int = 0
    population_cap: int = 10**8
    workers: int = 1

    def __post_init__(self):
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


class StartMode(str, Enum):
    IMMIGRANT = "immigrant_start"
    SINGLE_ANCESTOR = "single_ancestor"


@dataclass(frozen=True)
class PathSample:
    counts: tuple[int, ...]
    normalized_limit: float


def stream(master_seed: int, tag: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(master_seed, spawn_key=(tag, index))
    return np.random.Generator(np.random.PCG64(ss))


# -- single paths, drawn individual by individual ----------------------------


def _grow_individually(off, rng, counts, n, cap, imm=None):
    for _ in range(n):
        z = counts[-1]
        nxt = int(off.pmf.sample(rng, z).sum()) if z else 0
        if imm is not None:
            nxt += int(imm.pmf.sample(rng, 1)[0])
        if nxt > cap:
            raise CappedPathError(tuple(counts), cap)
        counts.append(nxt)
    return counts


def simulate_gw(off: OffspringSpec, cfg: SimConfig, start: int = 1, replicate: int = 0) -> PathSample:
    """One Galton-Watson path ``Z_0 = start, ..., Z_n`` and ``Z_n / m^n``."""
    if start < 1:
        raise ValueError("start must be >= 1")
    rng = stream(cfg.master_seed, _STREAM_PATH, replicate)
    counts = _grow_individually(off, rng, [start], cfg.generations, cfg.population_cap)
    return PathSample(tuple(counts), counts[-1] / off.m**cfg.generations)


def simulate_gwi(
    off: OffspringSpec,
    imm: ImmigrationSpec,
    cfg: SimConfig,
    start_mode: StartMode | str = StartMode.IMMIGRANT,
    replicate: int = 0,
) -> PathSample:
    """One path of the process with immigration.

    ``immigrant_start`` begins from a ``Y_0`` draw, ``single_ancestor`` from 1.
    """
    start_mode = StartMode(start_mode)
    rng = stream(cfg.master_seed, _STREAM_PATH, replicate)
    z0 = int(imm.pmf.sample(rng, 1)[0]) if start_mode is StartMode.IMMIGRANT else 1
    counts = _grow_individually(off, rng, [z0], cfg.generations, cfg.population_cap, imm)
    return PathSample(tuple(counts), counts[-1] / off.m**cfg.generations)


# -- bulk samplers ------------------------------------------------------------


def grow(off, rng, z, n, cap, imm=None, history=None):
    """Advance an array of populations ``n`` generations with aggregated draws."""
    for _ in range(n):
        z = off.pmf.sample_sum(rng, z)
        if imm is not None:
            z = z + imm.pmf.sample(rng, z.shape)
        if history is not None:
            history.append(z)
        if z.size and z.max() > cap:
            raise CappedPathError(np.array(history) if history is not None else z, cap)
    return z


def _block_sizes(replicates: int):
    full, rest = divmod(replicates, BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def _run_blocks(fn: Callable, cfg: SimConfig, args: tuple) -> np.ndarray:
    sizes = _block_sizes(cfg.replicates)
    jobs = [(b, size) for b, size in enumerate(sizes)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(fn, *zip(*[(args + job) for job in jobs])))
    else:
        parts = [fn(*args, *job) for job in jobs]
    return np.concatenate(parts)


def _w_block(off, n, seed, cap, block, size):
    rng = stream(seed, _STREAM_W, block)
    z = grow(off, rng, np.ones(size, dtype=np.int64), n, cap)
    return z / off.m**n


def sample_W(off: OffspringSpec, cfg: SimConfig) -> np.ndarray:
    """``replicates`` draws of ``Z_n / m^n`` from a single ancestor."""
    return _run_blocks(_w_block, cfg, (off, cfg.generations, cfg.master_seed, cfg.population_cap))


def _gwi_block(off, imm, n, seed, cap, single, block, size):
    rng = stream(seed, _STREAM_GWI, block)
    z0 = np.ones(size, dtype=np.int64) if single else imm.pmf.sample(rng, size)
    z = grow(off, rng, z0, n, cap, imm)
    return z / off.m**n


def sample_gwi(
    off: OffspringSpec,
    imm: ImmigrationSpec,
    cfg: SimConfig,
    start_mode: StartMode | str = StartMode.IMMIGRANT,
) -> np.ndarray:
    """``replicates`` draws of the normalized population with immigration at depth n."""
    single = StartMode(start_mode) is StartMode.SINGLE_ANCESTOR
    args = (off, imm, cfg.generations, cfg.master_seed, cfg.population_cap, single)
    return _run_blocks(_gwi_block, cfg, args)


def gwi_paths(
    off: OffspringSpec,
    imm: ImmigrationSpec | None,
    cfg: SimConfig,
    start: int = 1,
) -> np.ndarray:
    """Full count histories, shape ``(replicates, n + 1)``; ``imm=None`` means no immigration."""
    rows = []
    for block, size in enumerate(_block_sizes(cfg.replicates)):
        rng = stream(cfg.master_seed, _STREAM_PATH, block)
        z = np.full(size, start, dtype=np.int64)
        hist = [z]
        grow(off, rng, z, cfg.generations, cfg.population_cap, imm, hist)
        rows.append(np.stack(hist, axis=1))
    return np.concatenate(rows)


def decomposition_levels(off: OffspringSpec, imm: ImmigrationSpec, tol: float = 1e-4) -> int:
    """Smallest L with ``m^-L * E Y / (1 - 1/m) < tol``."""
    if imm.meanY == 0.0:
        return 0
    bound = imm.meanY / (1.0 - 1.0 / off.m)
    return max(0, math.floor(math.log(bound / tol) / math.log(off.m)) + 1)


def _decomp_block(off, imm, n, levels, seed, cap, block, size):
    rng = stream(seed, _STREAM_DECOMP, block)
    total = np.zeros(size)
    for level in range(levels + 1):
        y = imm.pmf.sample(rng, size)
        # sum of y independent copies of W is a GW started from y ancestors
        z = grow(off, rng, y, n, cap)
        total += z / off.m ** (n + level)
    return total


def sample_curlyW_decomposition(
    off: OffspringSpec,
    imm: ImmigrationSpec,
    cfg: SimConfig,
    levels: int | None = None,
) -> np.ndarray:
    """Draws of ``sum_{l<=L} m^-l sum_{j<=Y_l} W_l^j`` with independent immigrant lines."""
    if levels is None:
        levels = decomposition_levels(off, imm)
    args = (off, imm, cfg.generations, levels, cfg.master_seed, cfg.population_cap)
    return _run_blocks(_decomp_block, cfg, args)


def _tilde_block(off, imm, n, levels, seed, cap, block, size):
    rng = stream(seed, _STREAM_TILDE, block)
    w = grow(off, rng, np.ones(size, dtype=np.int64), n, cap) / off.m**n
    curly = np.zeros(size)
    for level in range(levels + 1):
        y = imm.pmf.sample(rng, size)
        curly += grow(off, rng, y, n, cap) / off.m ** (n + level)
    return w + curly / off.m


def sample_tildeW(
    off: OffspringSpec,
    imm: ImmigrationSpec,
    cfg: SimConfig,
    levels: int | None = None,
) -> np.ndarray:
    """Draws of ``W + W'/m`` with ``W'`` an independent immigration limit."""
    if levels is None:
        levels = decomposition_levels(off, imm)
    args = (off, imm, cfg.generations, levels, cfg.master_seed, cfg.population_cap)
    return _run_blocks(_tilde_block, cfg, args)


def sample_hs_product(hs, cfg: SimConfig) -> np.ndarray:
    """Draws of ``W0 * W~`` where ``W0`` is 0 w.p. rho, else ``1/(1-rho)``."""
    wt = sample_W(hs.transformed, cfg)
    rng = stream(cfg.master_seed, _STREAM_TILDE, 2**32 - 1)
    alive = rng.random(cfg.replicates) >= hs.rho
    return np.where(alive, hs.w0_atom * wt, 0.0)


def write_samples(path, samples: Sequence[float], header: dict) -> None:
    """One value per line with ``#`` header comments."""
    with open(path, "w") as fh:
        for key, value in header.items():
            fh.write(f"# {key} = {value}\n")
        for v in samples:
            fh.write(f"{float(v):.17g}\n")


def read_samples(path) -> np.ndarray:
    return np.loadtxt(path, comments="#", ndmin=1)
