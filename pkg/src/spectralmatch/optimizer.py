"""Coarse-to-fine minimization of the matching energy.

The energy is a mean of per-pair contributions, so minimizing it reduces to an
independent argmin per source patch. Each level runs windowed descent: every
source patch repeatedly moves to the cheapest target inside a Chebyshev window
around its current assignment. The coarsest level is seeded with the nearest
target in embedding space; each finer level is seeded by doubling the
displacement found for the parent patch.
"""

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from spectralmatch import energy as en
from spectralmatch.errors import InputError, MatchWarning
from spectralmatch.features import (
    SaliencyMap,
    gradient_saliency,
    hog_descriptor,
    load_descriptors,
    load_saliency,
    mpi_descriptor,
    tessellate,
)
from spectralmatch.graph import build_joint_graph
from spectralmatch.imageio import ImageRaster, build_pyramid
from spectralmatch.spectral import SpectralEmbedding, cross_jsed, spectral_embedding

DESCRIPTOR_MODES = ("mpi", "hog", "external")
SALIENCY_MODES = ("gradient", "external", "none")
REGULARIZERS = ("auto",) + en.REG_MODES


@dataclass(frozen=True)
class MatchConfig:
    patch_size: int = 16
    m: int = 8
    levels: int = 2
    window_radius: int = 2
    max_passes: int = 20
    keep_percentile: float = 80.0
    sigma: float = 1.0
    weights: en.EnergyWeights = field(default_factory=en.EnergyWeights)
    descriptor: str = "hog"
    saliency: str = "gradient"
    regularizer: str = "auto"

    def __post_init__(self):
        for name in ("patch_size", "m", "levels"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be positive")
        if self.window_radius < 0 or self.max_passes < 0:
            raise InputError("window_radius and max_passes must be non-negative")
        if not 0 < self.keep_percentile <= 100:
            raise InputError("keep_percentile must lie in (0, 100]")
        if not self.sigma > 0:
            raise InputError("sigma must be positive")
        if self.descriptor not in DESCRIPTOR_MODES:
            raise InputError(f"unknown descriptor mode {self.descriptor!r}")
        if self.saliency not in SALIENCY_MODES:
            raise InputError(f"unknown saliency mode {self.saliency!r}")
        if self.regularizer not in REGULARIZERS:
            raise InputError(f"unknown regularizer {self.regularizer!r}")

    def echo(self) -> str:
        w = self.weights
        return (
            f"patch_size={self.patch_size} eigs={self.m} levels={self.levels} "
            f"window={self.window_radius} max_passes={self.max_passes} "
            f"keep_percentile={self.keep_percentile:g} sigma={self.sigma:g} "
            f"lambda={w.lambda1:g},{w.lambda2:g},{w.lambda3:g} descriptor={self.descriptor} "
            f"saliency={self.saliency} regularizer={self.regularizer}"
        )


@dataclass(frozen=True)
class ExternalInputs:
    """Sidecar files per pyramid level (index 0 = finest).

    Lists shorter than the pyramid leave the coarser levels on the built-in
    extractors.
    """

    desc_a: tuple = ()
    desc_b: tuple = ()
    sal_a: tuple = ()
    sal_b: tuple = ()


@dataclass
class LevelTrace:
    level: int
    grid_a: tuple  # (rows, cols)
    grid_b: tuple
    m: int
    energies: list  # energy before refinement, then after every pass
    embedding: SpectralEmbedding = field(repr=False)


@dataclass
class CorrespondenceSet:
    source: np.ndarray  # (n, 2) patch centers in image A, finest level
    target: np.ndarray  # (n, 2) patch centers in image B
    cost: np.ndarray  # (n,) weighted per-pair contribution in [0, 1]
    selected: np.ndarray  # (n,) bool, membership in the kept subset
    mapping: en.Mapping = None
    trace: list = field(default_factory=list, repr=False)

    def __len__(self):
        return self.cost.size

    def to_text(self) -> str:
        lines = [str(len(self))]
        for (x1, y1), (x2, y2), c, s in zip(self.source, self.target, self.cost, self.selected):
            lines.append(f"{x1:g} {y1:g} {x2:g} {y2:g} {float(c)!r} {int(s)}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())


def load_correspondences(path) -> CorrespondenceSet:
    rows = []
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise InputError(f"{path}: empty correspondence file")
    try:
        n = int(lines[0])
        for ln in lines[1:]:
            x1, y1, x2, y2, c, s = ln.split()
            rows.append((float(x1), float(y1), float(x2), float(y2), float(c), int(s)))
    except ValueError:
        raise InputError(f"{path}: malformed correspondence file") from None
    if len(rows) != n:
        raise InputError(f"{path}: header declares {n} pairs, found {len(rows)}")
    arr = np.array(rows, dtype=np.float64).reshape(-1, 6)
    return CorrespondenceSet(arr[:, 0:2], arr[:, 2:4], arr[:, 4], arr[:, 5].astype(bool))


def init_matching(embedding: SpectralEmbedding) -> en.Mapping:
    """Nearest target in embedding space; lowest index wins ties."""
    return en.Mapping(np.argmin(cross_jsed(embedding), axis=1), embedding.n2)


def window_table(rows: int, cols: int, radius: int):
    """For every target patch, the ascending indices within Chebyshev ``radius``."""
    table = []
    for t in range(rows * cols):
        r, c = divmod(t, cols)
        rr = np.arange(max(0, r - radius), min(rows, r + radius + 1))
        cc = np.arange(max(0, c - radius), min(cols, c + radius + 1))
        table.append((rr[:, None] * cols + cc[None, :]).ravel())
    return table


def refine_level(mapping: en.Mapping, costs: np.ndarray, target_grid: tuple,
                 window_radius: int = 2, max_passes: int = 20):
    """Windowed per-point descent on a separable cost matrix.

    ``costs[i, t]`` is the contribution of pairing source ``i`` with target
    ``t``. Passes visit sources in index order; a source moves only when a
    window candidate is strictly cheaper (lowest index among equal minima).
    Returns the refined mapping and the energy before and after each pass.
    """
    rows, cols = target_grid
    if costs.shape[1] != rows * cols:
        raise InputError("cost matrix does not match the target grid")
    table = window_table(rows, cols, window_radius)
    assign = mapping.assignments.copy()
    active = np.flatnonzero(assign != en.UNMATCHED)
    energies = [_energy(costs, assign, active)]
    for _ in range(max_passes):
        changed = False
        for i in active:
            cur = assign[i]
            cand = table[cur]
            vals = costs[i, cand]
            best = int(np.argmin(vals))
            if vals[best] < costs[i, cur]:
                assign[i] = cand[best]
                changed = True
        energies.append(_energy(costs, assign, active))
        if energies[-1] > energies[-2]:
            raise RuntimeError("energy increased during refinement")
        if not changed:
            break
    return en.Mapping(assign, mapping.n_targets), energies


def _energy(costs, assign, active):
    if active.size == 0:
        return 0.0
    return float(np.mean(costs[active, assign[active]]))


def select_subsets(mapping: en.Mapping, costs, keep_percentile: float = 80.0):
    """Flag pairs whose cost is at or below the nearest-rank percentile."""
    costs = np.asarray(costs, dtype=np.float64).reshape(-1)
    if costs.size == 0:
        raise InputError("empty cost list")
    if mapping is not None and costs.size != mapping.matched.size:
        raise InputError("costs are not aligned with the matched pairs")
    if not 0 < keep_percentile <= 100:
        raise InputError("keep_percentile must lie in (0, 100]")
    rank = max(1, math.ceil(keep_percentile / 100.0 * costs.size))
    threshold = np.sort(costs, kind="stable")[rank - 1]
    return costs <= threshold, float(threshold)


INFORMATIVE_LIMIT = 1.0 - 1e-9


def level_embedding(graph, m: int) -> SpectralEmbedding:
    """Embedding restricted to informative modes.

    Normalized-Laplacian eigenvalues at or above 1 belong to vectors that the
    affinity matrix maps to zero or to their negation; they carry no affinity
    structure, and for two identical images they form a degenerate block whose
    basis is arbitrary. The requested ``m`` is therefore capped at the number
    of non-trivial eigenvalues below 1 (at least one mode is always kept).
    """
    full = spectral_embedding(graph, min(m, graph.n - 1))
    keep = max(1, int(np.sum(full.eigenvalues < INFORMATIVE_LIMIT)))
    if keep >= full.m:
        return full
    return SpectralEmbedding(full.n1, full.n2, full.eigenvalues[:keep], full.coords[:, :keep])


def _level_path(paths, level):
    return paths[level] if level < len(paths) else None


def _descriptors(mode, raster, grid, path, level, side):
    if mode == "mpi":
        return mpi_descriptor(raster, grid), "mpi"
    if mode == "hog":
        return hog_descriptor(raster, grid), "hog"
    if path is None:
        if level == 0:
            raise InputError(f"external descriptors for image {side} missing at the finest level")
        warnings.warn(
            f"no external descriptors for image {side} at level {level}; using hog",
            MatchWarning,
            stacklevel=3,
        )
        return hog_descriptor(raster, grid), "hog"
    return load_descriptors(path, grid), "external"


def _saliency(mode, raster, grid, path, level, side):
    if mode == "none":
        return SaliencyMap(np.ones(grid.n))
    if mode == "gradient":
        return gradient_saliency(raster, grid)
    if path is None:
        if level == 0:
            raise InputError(f"external saliency for image {side} missing at the finest level")
        warnings.warn(
            f"no external saliency for image {side} at level {level}; using gradient",
            MatchWarning,
            stacklevel=3,
        )
        return gradient_saliency(raster, grid)
    return load_saliency(path, grid)


def _reg_mode(config: MatchConfig, used_kind: str) -> str:
    if config.regularizer != "auto":
        return config.regularizer
    return {"mpi": "mpi", "hog": "hog", "external": "feature"}[used_kind]


def project_mapping(coarse: en.Mapping, coarse_a: tuple, coarse_b: tuple,
                    fine_a: tuple, fine_b: tuple) -> en.Mapping:
    """Seed a finer level from its parent level.

    Each fine source patch takes its parent's displacement, doubled, and is
    clamped to the nearest valid target patch.
    """
    rows_a, cols_a = fine_a
    rows_b, cols_b = fine_b
    _, pcols_a = coarse_a
    _, pcols_b = coarse_b
    r, c = np.divmod(np.arange(rows_a * cols_a), cols_a)
    pr = np.minimum(r // 2, coarse_a[0] - 1)
    pc = np.minimum(c // 2, coarse_a[1] - 1)
    parent_target = coarse.assignments[pr * pcols_a + pc]
    tr, tc = np.divmod(parent_target, pcols_b)
    nr = np.clip(r + 2 * (tr - pr), 0, rows_b - 1)
    nc = np.clip(c + 2 * (tc - pc), 0, cols_b - 1)
    return en.Mapping(nr * cols_b + nc, rows_b * cols_b)


def prepare_level(raster_a: ImageRaster, raster_b: ImageRaster, config: MatchConfig,
                  external: ExternalInputs = None, level: int = 0):
    """Grids, embedding and per-pair cost matrices for one pyramid level."""
    external = external or ExternalInputs()
    grid_a = tessellate(raster_a, config.patch_size)
    grid_b = tessellate(raster_b, config.patch_size)
    desc_a, kind_a = _descriptors(config.descriptor, raster_a, grid_a,
                                  _level_path(external.desc_a, level), level, "A")
    desc_b, kind_b = _descriptors(config.descriptor, raster_b, grid_b,
                                  _level_path(external.desc_b, level), level, "B")
    if kind_a != kind_b:
        warnings.warn(f"level {level}: external descriptors only for one image; using hog",
                      MatchWarning, stacklevel=2)
        desc_a, desc_b, kind_a = hog_descriptor(raster_a, grid_a), hog_descriptor(raster_b, grid_b), "hog"
    sal_a = _saliency(config.saliency, raster_a, grid_a, _level_path(external.sal_a, level), level, "A")
    sal_b = _saliency(config.saliency, raster_b, grid_b, _level_path(external.sal_b, level), level, "B")

    graph = build_joint_graph(desc_a, desc_b, config.sigma)
    emb = level_embedding(graph, config.m)
    costs = en.pair_cost_matrix(
        en.data_cost_matrix(emb),
        en.reg_cost_matrix(desc_a, desc_b, _reg_mode(config, kind_a)),
        en.saliency_cost_matrix(sal_a, sal_b),
        config.weights,
    )
    return grid_a, grid_b, emb, costs


def match_multiresolution(raster_a: ImageRaster, raster_b: ImageRaster,
                          config: MatchConfig = None, external: ExternalInputs = None) -> CorrespondenceSet:
    config = config or MatchConfig()
    pyr_a = build_pyramid(raster_a, config.levels, config.patch_size)
    pyr_b = build_pyramid(raster_b, config.levels, config.patch_size)
    n_levels = min(len(pyr_a), len(pyr_b))

    mapping = None
    prev = None
    trace = []
    for level in range(n_levels - 1, -1, -1):
        grid_a, grid_b, emb, costs = prepare_level(pyr_a[level], pyr_b[level], config, external, level)
        shape_a, shape_b = (grid_a.rows, grid_a.cols), (grid_b.rows, grid_b.cols)
        if mapping is None:
            mapping = init_matching(emb)
        else:
            mapping = project_mapping(mapping, prev[0], prev[1], shape_a, shape_b)
        mapping, energies = refine_level(mapping, costs, shape_b, config.window_radius, config.max_passes)
        trace.append(LevelTrace(level, shape_a, shape_b, emb.m, energies, emb))
        prev = (shape_a, shape_b)

    src, dst = mapping.pairs()
    pair_costs = np.clip(costs[src, dst], 0.0, 1.0)
    selected, _ = select_subsets(mapping, pair_costs, config.keep_percentile)
    return CorrespondenceSet(
        source=np.array(grid_a.centers[src]),
        target=np.array(grid_b.centers[dst]),
        cost=pair_costs,
        selected=selected,
        mapping=mapping,
        trace=trace,
    )


def external_from_paths(desc_a=None, desc_b=None, sal_a=None, sal_b=None) -> ExternalInputs:
    def seq(p):
        if p is None:
            return ()
        if isinstance(p, (str, os.PathLike)):
            return (p,)
        return tuple(p)

    return ExternalInputs(seq(desc_a), seq(desc_b), seq(sal_a), seq(sal_b))
