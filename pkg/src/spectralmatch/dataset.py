"""Pair manifests, keypoint annotations and batch evaluation."""

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from spectralmatch.errors import InputError, MatchWarning
from spectralmatch.geometry import classify_pair, estimate_homography
from spectralmatch.imageio import load_raster
from spectralmatch.metrics import GroundTruth, correspondence_r2, mae
from spectralmatch.optimizer import MatchConfig, external_from_paths, match_multiresolution

DIFFICULTIES = ("easy", "difficult")
DEFAULT_TAUS = (10.0, 20.0, 30.0, 40.0)


@dataclass(frozen=True)
class PairRecord:
    pair_id: str
    path_a: str
    path_b: str
    annotation: str
    difficulty: str = None
    desc_a: str = None
    desc_b: str = None
    sal_a: str = None
    sal_b: str = None


def _read_data_lines(path):
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"file not found: {path}")
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.split("#", 1)[0].strip()
            if stripped:
                yield lineno, stripped.split()


def load_annotations(path, rho: float = 10.0, declared: str = None) -> GroundTruth:
    """Read ``x1 y1 x2 y2`` rows; fit a homography and classify when possible."""
    rows = []
    for lineno, fields in _read_data_lines(path):
        try:
            vals = [float(v) for v in fields]
        except ValueError:
            raise InputError(f"{path}:{lineno}: malformed annotation line") from None
        if len(vals) != 4 or not all(math.isfinite(v) for v in vals):
            raise InputError(f"{path}:{lineno}: malformed annotation line")
        rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no annotated pairs")
    gt = GroundTruth(np.array(rows), source=os.fspath(path))
    if len(rows) >= 4:
        try:
            gt.homography = estimate_homography(gt.pairs)
        except InputError as exc:
            warnings.warn(f"{path}: no homography fitted ({exc})", MatchWarning, stacklevel=2)
    if declared is not None:
        gt.difficulty = declared
    elif gt.homography is not None:
        gt.difficulty = classify_pair(gt.homography, gt.pairs, rho)
    return gt


def load_manifest(path):
    """Parse ``pair_id path_a path_b annot [difficulty] [desc_a desc_b] [sal_a sal_b]``.

    Relative paths resolve against the manifest's directory; ``-`` stands for
    an absent optional field.
    """
    base = os.path.dirname(os.path.abspath(os.fspath(path)))

    def resolve(p):
        if p is None or p == "-":
            return None
        return p if os.path.isabs(p) else os.path.join(base, p)

    records, seen = [], set()
    for lineno, fields in _read_data_lines(path):
        if len(fields) < 4:
            raise InputError(f"{path}:{lineno}: expected at least 4 fields")
        pair_id, a, b, ann, *rest = fields
        difficulty = None
        if rest and (rest[0] in DIFFICULTIES or (rest[0] == "-" and len(rest) % 2 == 1)):
            difficulty = None if rest[0] == "-" else rest[0]
            rest = rest[1:]
        if len(rest) not in (0, 2, 4):
            raise InputError(f"{path}:{lineno}: unreadable line")
        if pair_id in seen:
            raise InputError(f"{path}:{lineno}: duplicate pair_id {pair_id!r}")
        seen.add(pair_id)
        sidecars = [resolve(p) for p in rest] + [None] * (4 - len(rest))
        records.append(PairRecord(pair_id, resolve(a), resolve(b), resolve(ann), difficulty, *sidecars))
    return records


@dataclass
class PairResult:
    pair_id: str
    difficulty: str = None
    r2: tuple = ()
    mae: float = float("nan")
    n_gt: int = 0
    n_pred: int = 0
    error: str = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _mean(values):
    values = list(values)
    return math.fsum(values) / len(values) if values else None


@dataclass
class EvalReport:
    taus: tuple
    rows: list
    config_echo: str = ""
    theta: float = 5.0
    rho: float = 10.0
    figures: list = field(default_factory=list)

    @property
    def evaluated(self):
        return [r for r in self.rows if r.ok]

    @property
    def failures(self):
        return [r for r in self.rows if not r.ok]

    def split(self, difficulty):
        return [r for r in self.evaluated if r.difficulty == difficulty]

    def r2_mean(self, k: int, difficulty: str = None):
        rows = self.evaluated if difficulty is None else self.split(difficulty)
        return _mean(r.r2[k] for r in rows)

    def mae_mean(self, difficulty: str = None):
        rows = self.evaluated if difficulty is None else self.split(difficulty)
        return _mean(r.mae for r in rows)

    def to_text(self) -> str:
        def fmt(v):
            return "-" if v is None else f"{v:.4f}"

        ev = self.evaluated
        lines = [
            "# spectral correspondence evaluation",
            f"# config: {self.config_echo}",
            f"# theta={self.theta:g} rho={self.rho:g} taus={','.join(f'{t:g}' for t in self.taus)}",
            f"pairs {len(self.rows)}  evaluated {len(ev)}  failed {len(self.failures)}  "
            f"easy {len(self.split('easy'))}  difficult {len(self.split('difficult'))}",
            "",
            f"{'metric':<10}{'easy/difficult':>20}{'overall':>12}",
        ]
        for k, tau in enumerate(self.taus):
            xy = f"{fmt(self.r2_mean(k, 'easy'))}/{fmt(self.r2_mean(k, 'difficult'))}"
            lines.append(f"{'R2@' + format(tau, 'g'):<10}{xy:>20}{fmt(self.r2_mean(k)):>12}")
        xy = f"{fmt(self.mae_mean('easy'))}/{fmt(self.mae_mean('difficult'))}"
        lines.append(f"{'MAE':<10}{xy:>20}{fmt(self.mae_mean()):>12}")
        lines.append("")
        head = f"{'pair_id':<16}{'difficulty':<12}" + "".join(f"{'R2@' + format(t, 'g'):>9}" for t in self.taus)
        lines.append(head + f"{'MAE':>10}{'gt':>5}{'pred':>6}")
        for r in ev:
            vals = "".join(f"{v:>9.4f}" for v in r.r2)
            lines.append(f"{r.pair_id:<16}{r.difficulty:<12}{vals}{r.mae:>10.3f}{r.n_gt:>5}{r.n_pred:>6}")
        if self.failures:
            lines.append("")
            lines.append("failures:")
            for r in self.failures:
                lines.append(f"  {r.pair_id}: {r.error}")
        return "\n".join(lines) + "\n"

    def to_rows(self) -> str:
        """Machine-readable companion: ``pair_id difficulty R2@tau... MAE`` per evaluated pair."""
        lines = ["# pair_id difficulty " + " ".join(f"R2@{t:g}" for t in self.taus) + " MAE"]
        for r in self.evaluated:
            lines.append(" ".join([r.pair_id, r.difficulty] + [repr(float(v)) for v in r.r2] + [repr(float(r.mae))]))
        return "\n".join(lines) + "\n"


    def to_summary(self) -> str:
        """Full-precision split means: ``split n R2@tau... MAE``; ``-`` for an empty split."""
        lines = ["# split n " + " ".join(f"R2@{t:g}" for t in self.taus) + " MAE"]
        for name, diff in (("easy", "easy"), ("difficult", "difficult"), ("all", None)):
            n = len(self.evaluated if diff is None else self.split(diff))
            vals = [self.r2_mean(k, diff) for k in range(len(self.taus))] + [self.mae_mean(diff)]
            lines.append(" ".join([name, str(n)] + ["-" if v is None else repr(float(v)) for v in vals]))
        return "\n".join(lines) + "\n"


def parse_summary(text: str):
    """Inverse of ``EvalReport.to_summary``: ``{split: (n, values)}`` with ``None`` for ``-``."""
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        f = line.split()
        out[f[0]] = (int(f[1]), [None if v == "-" else float(v) for v in f[2:]])
    return out


def parse_rows(text: str, n_taus: int):
    out = []
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        f = line.split()
        out.append(PairResult(f[0], f[1], tuple(float(v) for v in f[2:2 + n_taus]), float(f[2 + n_taus])))
    return out


def evaluate_pair(record: PairRecord, config: MatchConfig, taus=DEFAULT_TAUS,
                  theta: float = 5.0, rho: float = 10.0) -> PairResult:
    """Match one pair and score it; errors are captured in the result."""
    try:
        raster_a = load_raster(record.path_a)
        raster_b = load_raster(record.path_b)
        gt = load_annotations(record.annotation, rho=rho, declared=record.difficulty)
        if gt.difficulty is None:
            raise InputError(f"{record.annotation}: fewer than 4 usable pairs; difficulty must be declared")
        external = None
        if config.descriptor == "external" or config.saliency == "external":
            external = external_from_paths(record.desc_a, record.desc_b, record.sal_a, record.sal_b)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MatchWarning)
            pred = match_multiresolution(raster_a, raster_b, config, external)
        diag = math.hypot(raster_b.width, raster_b.height)
        return PairResult(
            record.pair_id,
            gt.difficulty,
            tuple(correspondence_r2(gt, pred, tau, theta) for tau in taus),
            mae(gt, pred, diag),
            len(gt.pairs),
            len(pred),
        )
    except (InputError, OSError, ValueError, RuntimeError) as exc:
        return PairResult(record.pair_id, record.difficulty, error=f"{type(exc).__name__}: {exc}")


def evaluate_dataset(records, config: MatchConfig = None, taus=DEFAULT_TAUS, theta: float = 5.0,
                     rho: float = 10.0, workers: int = 1) -> EvalReport:
    records = list(records)
    if not records:
        raise InputError("empty manifest")
    config = config or MatchConfig()
    taus = tuple(float(t) for t in taus)
    args = [(r, config, taus, theta, rho) for r in records]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_evaluate_star, args))
    else:
        rows = [evaluate_pair(*a) for a in args]
    return EvalReport(taus, rows, config.echo(), theta, rho)


def _evaluate_star(args):
    return evaluate_pair(*args)


def write_report(report: EvalReport, out_prefix, figures: bool = True):
    """Write ``<prefix>.txt``, ``<prefix>.rows``, ``<prefix>.summary`` and, optionally, PNG figures."""
    out_prefix = os.fspath(out_prefix)
    parent = os.path.dirname(out_prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)
    paths = [out_prefix + ".txt", out_prefix + ".rows", out_prefix + ".summary"]
    for path, text in zip(paths, (report.to_text(), report.to_rows(), report.to_summary())):
        with open(path, "w") as fh:
            fh.write(text)
    if figures and report.evaluated:
        from spectralmatch import plotting

        paths.extend(plotting.report_figures(report, out_prefix))
    return paths
