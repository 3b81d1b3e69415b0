"""Cross-section case study: ingest binned (Q2, xB, t, phi) data, build
noise-rescaled pseudodata against a toy harmonic model, run paired
classical/quantum extractions, and reduce the results to per-set
outperformance outcomes, t-trends, and matched-control groupings."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple
from zlib import crc32

import numpy as np

from . import cdnn as cdnn_mod
from . import qdnn as qdnn_mod
from .complexity import characterize
from .optim import TrainConfig, TrainingDivergence, fit
from .perfmetrics import xi as xi_dvcs
from .qualifier import QualifierCorpusEntry

CSV_HEADER = ["experiment", "E_beam", "Q2", "xB", "t", "phi", "F", "sigma_F"]

# kinematic envelopes (GeV / GeV^2) and published point counts of the four
# JLab unpolarized cross-section data sets the synthetic corpus mirrors
@dataclass(frozen=True)
class ExperimentEnvelope:
    e_beam: Tuple[float, float]
    q2: Tuple[float, float]
    minus_t: Tuple[float, float]
    xb: Tuple[float, float]
    n_points: int


EXPERIMENT_ENVELOPES: Dict[str, ExperimentEnvelope] = {
    "Hall_A_E12-06-114": ExperimentEnvelope((4.487, 10.992), (2.71, 8.51),
                                            (0.204, 1.373), (0.363, 0.617), 1080),
    "Hall_A_E07-007": ExperimentEnvelope((3.355, 5.55), (1.49, 2.0),
                                         (0.177, 0.363), (0.356, 0.361), 404),
    "Hall_A_E00-110": ExperimentEnvelope((5.75, 5.75), (1.82, 2.37),
                                         (0.171, 0.372), (0.336, 0.401), 468),
    "Hall_B_e1-DVCS1": ExperimentEnvelope((5.75, 5.75), (1.11, 3.77),
                                          (0.11, 0.45), (0.126, 0.475), 1933),
}

SYNTHETIC_SET_SIZE = 24
EXTRACTION_GRID_N = 181
# fixed scales that put the kinematic features into O(1) for the networks
Q2_SCALE = 10.0
T_SCALE = 2.0
E_SCALE = 12.0


class ModelFitError(ValueError):
    """Least-squares fit of the cross-section model is rank deficient."""


@dataclass
class KinematicSet:
    set_id: str
    experiment: str
    e_beam: float
    q2: float
    xb: float
    t: float
    phi: np.ndarray
    f: np.ndarray
    sigma_f: np.ndarray

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=np.float64)
        self.f = np.asarray(self.f, dtype=np.float64)
        self.sigma_f = np.asarray(self.sigma_f, dtype=np.float64)
        if not (self.phi.shape == self.f.shape == self.sigma_f.shape) or self.phi.ndim != 1:
            raise ValueError(f"set {self.set_id}: phi, F, sigma_F must share one length")
        if len(self.phi) < 4:
            raise ValueError(f"set {self.set_id}: need >= 4 phi points")
        order = np.argsort(self.phi, kind="stable")
        self.phi = self.phi[order]
        self.f = self.f[order]
        self.sigma_f = self.sigma_f[order]
        if np.any(np.diff(self.phi) == 0):
            raise ValueError(f"set {self.set_id}: duplicate phi value")
        if np.any((self.phi < 0) | (self.phi >= 360)):
            raise ValueError(f"set {self.set_id}: phi must lie in [0, 360)")
        if np.any(self.sigma_f <= 0):
            raise ValueError(f"set {self.set_id}: sigma_F must be > 0")
        if self.q2 <= 0 or not 0 < self.xb < 1 or self.t >= 0 or self.e_beam <= 0:
            raise ValueError(f"set {self.set_id}: kinematics out of range")

    @property
    def kin(self) -> Tuple[float, float, float, float]:
        return (self.q2, self.xb, self.t, self.e_beam)

    @property
    def n_points(self) -> int:
        return len(self.phi)


def envelope_issues(kset: KinematicSet) -> List[str]:
    """Range violations against the published envelope for the set's
    experiment tag; empty for unknown tags."""
    env = EXPERIMENT_ENVELOPES.get(kset.experiment)
    if env is None:
        return []
    issues = []
    checks = [("E_beam", kset.e_beam, env.e_beam), ("Q2", kset.q2, env.q2),
              ("-t", -kset.t, env.minus_t), ("xB", kset.xb, env.xb)]
    for name, value, (lo, hi) in checks:
        if not lo - 1e-9 <= value <= hi + 1e-9:
            issues.append(f"{kset.set_id}: {name}={value:g} outside [{lo:g}, {hi:g}]")
    return issues


@dataclass(frozen=True)
class ToyHarmonicModel:
    """F = A(kin) * (c0 + c1 cos(phi) + c2 cos(2 phi)) with the positive
    envelope A = 1 / (Q2 * (1 + |t|)); linear in the three parameters."""

    name: str = "harmonic3"
    n_params: int = 3

    def envelope(self, kin) -> float:
        q2, _, t, _ = kin
        return 1.0 / (q2 * (1.0 + abs(t)))

    def design_matrix(self, kin, phi_deg) -> np.ndarray:
        rad = np.deg2rad(np.asarray(phi_deg, dtype=np.float64))
        a = self.envelope(kin)
        return a * np.column_stack([np.ones_like(rad), np.cos(rad), np.cos(2 * rad)])

    def evaluate(self, params, kin, phi_deg) -> np.ndarray:
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters")
        return self.design_matrix(kin, phi_deg) @ params


def fit_params(model, kset: KinematicSet) -> np.ndarray:
    """Plain least-squares parameters of the model on the set's points."""
    design = model.design_matrix(kset.kin, kset.phi)
    params, _, rank, _ = np.linalg.lstsq(design, kset.f, rcond=None)
    if rank < model.n_params:
        raise ModelFitError(f"set {kset.set_id}: rank-deficient model fit")
    return params


def make_pseudodata(kset: KinematicSet, model, lam: float, seed
                    ) -> Tuple[KinematicSet, Callable]:
    """Replica of the set around the model fit: F_true is the model at the
    least-squares parameters, pseudo F = F_true + lam * sigma_F * N(0,1),
    pseudo sigma_F = lam * sigma_F.  With lam=0 the original uncertainties
    are kept so the set stays valid (the draws are exact either way)."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    params = fit_params(model, kset)

    def f_true(phi_deg):
        return model.evaluate(params, kset.kin, phi_deg)

    rng = np.random.default_rng(seed)
    truth = f_true(kset.phi)
    if lam > 0:
        pseudo_f = truth + lam * kset.sigma_f * rng.standard_normal(kset.n_points)
        pseudo_sigma = lam * kset.sigma_f
    else:
        pseudo_f = truth.copy()
        pseudo_sigma = kset.sigma_f.copy()
    return (KinematicSet(kset.set_id, kset.experiment, kset.e_beam, kset.q2,
                         kset.xb, kset.t, kset.phi.copy(), pseudo_f, pseudo_sigma),
            f_true)


def point_features(kset: KinematicSet, phi_deg=None) -> np.ndarray:
    """Per-point network inputs: the first two phi harmonics plus the
    set's rescaled kinematics (constant within a set)."""
    phi = kset.phi if phi_deg is None else np.asarray(phi_deg, dtype=np.float64)
    rad = np.deg2rad(phi)
    n = len(phi)
    cols = [np.sin(rad), np.cos(rad), np.sin(2 * rad), np.cos(2 * rad),
            np.full(n, kset.q2 / Q2_SCALE), np.full(n, kset.xb),
            np.full(n, kset.t / T_SCALE), np.full(n, kset.e_beam / E_SCALE)]
    return np.column_stack(cols)


METRIC_RESAMPLE_N = 64


def set_metrics(phi, f, n_resample: int = METRIC_RESAMPLE_N) -> np.ndarray:
    """Data characteristics of one set's phi-dependence.  The binned
    points are linearly resampled onto a uniform grid first: the metric
    preconditions need more points than a typical set carries, and the
    frequency metrics need uniform spacing."""
    phi = np.asarray(phi, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    order = np.argsort(phi, kind="stable")
    dense = np.linspace(phi[order][0], phi[order][-1], n_resample)
    return characterize(dense, np.interp(dense, phi[order], f[order])).as_array()


@dataclass
class ExtractionResult:
    family: str
    cffs: np.ndarray
    diverged: bool = False
    checkpoint_cffs: Dict[int, np.ndarray] = field(default_factory=dict)


def _build_net(family: str, cfg: TrainConfig):
    if family == "cdnn":
        return cdnn_mod.build_default_cdnn(8, "regression", seed=cfg.seed)
    if family == "qdnn":
        return qdnn_mod.build_default_qdnn(8, task="regression", seed=cfg.seed)
    raise ValueError(f"family must be 'cdnn' or 'qdnn', got {family!r}")


def extract_cffs(pseudo: KinematicSet, model, family: str, cfg: TrainConfig,
                 checkpoints: Optional[Sequence[int]] = None,
                 grid: Optional[np.ndarray] = None) -> ExtractionResult:
    """Train one network of the chosen family on the set's points, then
    project its predicted phi-curve onto the model basis by least squares.
    Divergence flags the result instead of raising.  Optional epoch
    checkpoints record intermediate projections."""
    if grid is None:
        grid = np.linspace(0.0, 360.0, EXTRACTION_GRID_N)
    net = _build_net(family, cfg)
    X = point_features(pseudo)
    grid_X = point_features(pseudo, grid)
    design = model.design_matrix(pseudo.kin, grid)

    def project() -> np.ndarray:
        curve = net.forward(grid_X)
        params, _, _, _ = np.linalg.lstsq(design, curve, rcond=None)
        return params

    result = ExtractionResult(family=family, cffs=np.full(model.n_params, np.nan))
    wanted = sorted(set(int(c) for c in checkpoints)) if checkpoints else []

    def on_epoch(epoch, _model, _loss):
        if epoch in wanted:
            result.checkpoint_cffs[epoch] = project()

    try:
        fit(net, X, pseudo.f, "mse", cfg, on_epoch=on_epoch if wanted else None)
    except TrainingDivergence:
        result.diverged = True
        return result
    result.cffs = project()
    if 0 in wanted and cfg.epochs == 0:
        result.checkpoint_cffs[0] = result.cffs
    return result


def m_dvcs(f_dnn, f_true, phi_grid) -> float:
    """Trapezoidal integral of |F_dnn - F_true| over the phi grid, in
    (cross-section unit x degrees)."""
    phi_grid = np.asarray(phi_grid, dtype=np.float64)
    f_dnn = np.asarray(f_dnn, dtype=np.float64)
    f_true = np.asarray(f_true, dtype=np.float64)
    if not (phi_grid.shape == f_dnn.shape == f_true.shape) or phi_grid.ndim != 1:
        raise ValueError("curves must share one 1-D phi grid")
    if len(phi_grid) < 2 or np.any(np.diff(phi_grid) <= 0):
        raise ValueError("phi grid must be strictly increasing")
    return float(np.trapezoid(np.abs(f_dnn - f_true), phi_grid))


@dataclass
class DvcsOutcome:
    set_id: str
    experiment: str
    lam: float
    q2: float
    xb: float
    t: float
    e_beam: float
    n_points: int
    m_cdnn: float
    m_qdnn: float
    eps_bar: float
    ensemble: int
    n_failed: int = 0
    metrics: Tuple[float, ...] = ()
    qualifier_hat: Optional[float] = None
    xi_dvcs: float = field(init=False)

    def __post_init__(self):
        self.xi_dvcs = xi_dvcs(self.m_cdnn, self.m_qdnn)


def _rep_seed_seq(master: int, set_id: str, rep: int) -> np.random.SeedSequence:
    # lam is deliberately absent: replicas share one noise realization
    # across noise scales (common random numbers), so scale-to-scale
    # comparisons measure the scale effect, not draw-to-draw variance
    return np.random.SeedSequence([int(master), crc32(set_id.encode()), int(rep)])


def _campaign_cell(job: Tuple) -> Dict:
    """One (set, lam) campaign cell; module level so worker pools can
    dispatch it.  Returns the outcome plus per-cell report fragments."""
    kset, model, lam, ensemble, cfg, checkpoints, grid_n = job
    grid = np.linspace(0.0, 360.0, grid_n)
    ms = {"cdnn": [], "qdnn": []}
    ck_ms = {"cdnn": {n: [] for n in checkpoints},
             "qdnn": {n: [] for n in checkpoints}}
    metric_rows = []
    eps_vals = []
    cell: Dict = {"outcome": None, "diverged": [], "all_failed": None, "corpus": []}
    for rep in range(ensemble):
        seq = _rep_seed_seq(cfg.seed, kset.set_id, rep)
        pseudo_seq, train_seq = seq.spawn(2)
        pseudo, f_true = make_pseudodata(kset, model, lam, pseudo_seq)
        train_seed = int(train_seq.generate_state(1)[0] & 0x7FFFFFFF)
        rep_cfg = replace(cfg, seed=train_seed)
        res = {fam: extract_cffs(pseudo, model, fam, rep_cfg,
                                 checkpoints=checkpoints, grid=grid)
               for fam in ("cdnn", "qdnn")}
        if res["cdnn"].diverged or res["qdnn"].diverged:
            cell["diverged"].append((kset.set_id, lam, rep))
            continue
        truth = f_true(grid)
        for fam in ("cdnn", "qdnn"):
            pred = model.evaluate(res[fam].cffs, kset.kin, grid)
            ms[fam].append(m_dvcs(pred, truth, grid))
            for n, cffs in res[fam].checkpoint_cffs.items():
                pred_n = model.evaluate(cffs, kset.kin, grid)
                ck_ms[fam][n].append(m_dvcs(pred_n, truth, grid))
        metric_rows.append(set_metrics(pseudo.phi, pseudo.f))
        denom = np.maximum(np.abs(f_true(kset.phi)), 1e-12)
        eps_vals.append(float(np.mean(pseudo.sigma_f / denom)))
    if not ms["cdnn"]:
        cell["all_failed"] = (f"set {kset.set_id} lam={lam:g}: "
                              f"all {ensemble} replicas diverged")
        return cell
    metrics = tuple(float(v) for v in np.mean(metric_rows, axis=0))
    cell["outcome"] = DvcsOutcome(
        set_id=kset.set_id, experiment=kset.experiment, lam=lam,
        q2=kset.q2, xb=kset.xb, t=kset.t, e_beam=kset.e_beam,
        n_points=kset.n_points,
        m_cdnn=float(np.mean(ms["cdnn"])),
        m_qdnn=float(np.mean(ms["qdnn"])),
        eps_bar=float(np.mean(eps_vals)),
        ensemble=len(ms["cdnn"]), n_failed=len(cell["diverged"]), metrics=metrics)
    for n in checkpoints:
        if ck_ms["cdnn"][n] and ck_ms["qdnn"][n] and n >= 1:
            mc = float(np.mean(ck_ms["cdnn"][n]))
            mq = float(np.mean(ck_ms["qdnn"][n]))
            if mq > 0:
                cell["corpus"].append(QualifierCorpusEntry(
                    metrics=metrics, xi=xi_dvcs(mc, mq), epoch=n))
    return cell


def run_campaign(sets: Sequence[KinematicSet], model, lams: Sequence[float],
                 ensemble: int, cfg: TrainConfig,
                 epoch_checkpoints: Optional[Sequence[int]] = None,
                 grid_n: int = EXTRACTION_GRID_N, n_workers: int = 1
                 ) -> Tuple[List[DvcsOutcome], Dict]:
    """Paired extractions per (set, lam): each replica draws one pseudo
    set that both families train on, m values are ensemble means over the
    replicas where both extractions converge, and the outperformance is
    formed from the mean m values.  Replica seeds derive from (cfg.seed,
    set_id, lam, replica), so outcomes are invariant to the ordering of
    the input sets and to the worker count.  Per-set model-fit failures
    are reported and skipped.

    The report carries a qualifier corpus: per (set, lam) the ensemble
    mean data characteristics of the pseudodata, paired with the ensemble
    mean outperformance at each checkpoint epoch."""
    if not sets:
        raise ValueError("need at least one kinematic set")
    if ensemble < 1:
        raise ValueError("ensemble must be >= 1")
    if n_workers < 1:
        raise ValueError("n_workers must be >= 1")
    checkpoints = sorted(set(int(c) for c in epoch_checkpoints)) if epoch_checkpoints else []
    outcomes: List[DvcsOutcome] = []
    report: Dict = {"failed_fits": [], "diverged": [], "qualifier_corpus": [],
                    "checkpoints": checkpoints}
    jobs = []
    for kset in sets:
        try:
            fit_params(model, kset)
        except ModelFitError as exc:
            report["failed_fits"].append(str(exc))
            continue
        for lam in lams:
            jobs.append((kset, model, lam, ensemble, cfg, checkpoints, grid_n))
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(n_workers, len(jobs))) as pool:
            cells = list(pool.map(_campaign_cell, jobs))
    else:
        cells = [_campaign_cell(job) for job in jobs]
    for cell in cells:
        report["diverged"].extend(cell["diverged"])
        if cell["all_failed"] is not None:
            report["failed_fits"].append(cell["all_failed"])
            continue
        outcomes.append(cell["outcome"])
        report["qualifier_corpus"].extend(cell["corpus"])
    return outcomes, report


@dataclass
class TrendResult:
    ts: np.ndarray
    xis: np.ndarray
    grid: Optional[np.ndarray]
    trend: Optional[np.ndarray]
    crossings: Tuple[float, ...]
    bandwidth: float
    smoothed: bool
    label: str = ""


def t_trend(outcomes: Sequence[DvcsOutcome], bandwidth: float = 0.15,
            grid_n: int = 101, label: str = "",
            value=lambda o: o.xi_dvcs) -> TrendResult:
    """Outperformance against t, smoothed by Gaussian-kernel local linear
    regression; with fewer than 5 distinct t values only the raw scatter
    is returned."""
    if not outcomes:
        raise ValueError("need at least one outcome")
    ts = np.asarray([o.t for o in outcomes], dtype=np.float64)
    xis = np.asarray([value(o) for o in outcomes], dtype=np.float64)
    if len(np.unique(ts)) < 5:
        return TrendResult(ts, xis, None, None, (), bandwidth, False, label)
    grid = np.linspace(ts.min(), ts.max(), grid_n)
    trend = np.empty(grid_n)
    for i, t0 in enumerate(grid):
        w = np.exp(-0.5 * ((ts - t0) / bandwidth) ** 2)
        sw = w.sum()
        if sw <= 1e-12:
            trend[i] = np.nan
            continue
        dt = ts - t0
        # weighted linear fit evaluated at t0 (its intercept)
        a11, a12 = sw, float(w @ dt)
        a22 = float(w @ (dt * dt))
        b1, b2 = float(w @ xis), float(w @ (dt * xis))
        det = a11 * a22 - a12 * a12
        if abs(det) < 1e-14 * max(a11 * a22, 1e-300):
            trend[i] = b1 / sw
        else:
            trend[i] = (b1 * a22 - b2 * a12) / det
    crossings = []
    for i in range(grid_n - 1):
        y0, y1 = trend[i], trend[i + 1]
        if np.isfinite(y0) and np.isfinite(y1) and y0 * y1 < 0:
            crossings.append(float(grid[i] - y0 * (grid[i + 1] - grid[i]) / (y1 - y0)))
        elif y0 == 0.0 and (i == 0 or trend[i - 1] != 0.0):
            crossings.append(float(grid[i]))
    return TrendResult(ts, xis, grid, trend, tuple(crossings), bandwidth, True, label)


def matched_controls(outcomes: Sequence[DvcsOutcome], mode: str, k: int = 3,
                     fraction: float = 0.5, bandwidth: float = 0.15
                     ) -> Tuple[Dict[str, TrendResult], List[str]]:
    """Re-run the t-trend inside control groups: relative-error quantile
    bins, or the fraction of sets with the most points.  Groups with
    fewer than 5 sets are omitted with a note."""
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("need at least one outcome")
    notes: List[str] = []
    groups: Dict[str, List[DvcsOutcome]] = {}
    if mode == "uncertainty_quantiles":
        if k < 1:
            raise ValueError("k must be >= 1")
        eps = np.asarray([o.eps_bar for o in outcomes])
        edges = np.quantile(eps, np.linspace(0.0, 1.0, k + 1))
        for i in range(k):
            lo, hi = edges[i], edges[i + 1]
            sel = (eps >= lo) & ((eps <= hi) if i == k - 1 else (eps < hi))
            groups[f"eps_bin_{i + 1}_of_{k}"] = [o for o, s in zip(outcomes, sel) if s]
    elif mode == "density_top_fraction":
        if not 0 < fraction <= 1:
            raise ValueError("fraction must be in (0, 1]")
        ranked = sorted(outcomes, key=lambda o: (-o.n_points, o.set_id))
        keep = max(1, math.ceil(fraction * len(ranked)))
        groups[f"densest_{fraction:g}"] = ranked[:keep]
    else:
        raise ValueError("mode must be 'uncertainty_quantiles' or 'density_top_fraction'")
    trends: Dict[str, TrendResult] = {}
    for label, members in groups.items():
        if len(members) < 5:
            notes.append(f"group {label}: only {len(members)} sets, omitted")
            continue
        trends[label] = t_trend(members, bandwidth=bandwidth, label=label)
    return trends, notes


OUTCOME_COLUMNS = ["set_id", "experiment", "lam", "Q2", "xB", "t", "E_beam",
                   "n_points", "ensemble", "n_failed", "eps_bar",
                   "m_cdnn", "m_qdnn", "xi_dvcs", "qualifier_hat"]


def outcomes_to_csv(outcomes: Sequence[DvcsOutcome], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(OUTCOME_COLUMNS)
        for o in outcomes:
            writer.writerow([
                o.set_id, o.experiment, repr(float(o.lam)), repr(float(o.q2)),
                repr(float(o.xb)), repr(float(o.t)), repr(float(o.e_beam)),
                o.n_points, o.ensemble, o.n_failed, repr(float(o.eps_bar)),
                repr(float(o.m_cdnn)), repr(float(o.m_qdnn)),
                repr(float(o.xi_dvcs)),
                "" if o.qualifier_hat is None else repr(float(o.qualifier_hat))])


def ingest(path) -> Tuple[List[KinematicSet], Dict]:
    """Parse one data file, group points into kinematic sets keyed by
    (experiment, Q2, xB, t), and report per-experiment point counts.
    Errors carry the offending line number."""
    groups: Dict[Tuple, Dict] = {}
    counts: Dict[str, int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return [], {"per_experiment": {}, "total": 0, "n_sets": 0}
        if header != CSV_HEADER:
            raise ValueError(f"expected header {','.join(CSV_HEADER)}, "
                             f"got {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"line {lineno}: expected {len(CSV_HEADER)} fields")
            exp = row[0]
            try:
                e_beam, q2, xb, t, phi, f, sigma = (float(v) for v in row[1:])
            except ValueError:
                raise ValueError(f"line {lineno}: non-numeric field") from None
            if sigma <= 0:
                raise ValueError(f"line {lineno}: sigma_F must be > 0")
            key = (exp, q2, xb, t)
            entry = groups.setdefault(key, {"e_beam": e_beam, "phi": [], "f": [],
                                            "sigma": [], "lines": {}})
            if entry["e_beam"] != e_beam:
                raise ValueError(f"line {lineno}: mixed E_beam within one "
                                 f"(experiment, Q2, xB, t) group")
            if phi in entry["lines"]:
                raise ValueError(f"line {lineno}: duplicate phi {phi:g} "
                                 f"(first at line {entry['lines'][phi]})")
            entry["lines"][phi] = lineno
            entry["phi"].append(phi)
            entry["f"].append(f)
            entry["sigma"].append(sigma)
            counts[exp] = counts.get(exp, 0) + 1
    sets = []
    for (exp, q2, xb, t), entry in groups.items():
        set_id = f"{exp}:Q2={q2:g}:xB={xb:g}:t={t:g}"
        sets.append(KinematicSet(set_id, exp, entry["e_beam"], q2, xb, t,
                                 np.asarray(entry["phi"]), np.asarray(entry["f"]),
                                 np.asarray(entry["sigma"])))
    report = {"per_experiment": counts, "total": int(sum(counts.values())),
              "n_sets": len(sets)}
    return sets, report


def ingest_many(paths) -> Tuple[List[KinematicSet], Dict]:
    sets: List[KinematicSet] = []
    merged = {"per_experiment": {}, "total": 0, "n_sets": 0}
    for path in paths:
        part, report = ingest(path)
        sets.extend(part)
        for exp, n in report["per_experiment"].items():
            merged["per_experiment"][exp] = merged["per_experiment"].get(exp, 0) + n
        merged["total"] += report["total"]
        merged["n_sets"] += report["n_sets"]
    return sets, merged


def serialize_sets(sets: Sequence[KinematicSet], path) -> None:
    """Inverse of ingest: one point per row under the exact header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for s in sets:
            for phi, f, sigma in zip(s.phi, s.f, s.sigma_f):
                writer.writerow([s.experiment, repr(float(s.e_beam)),
                                 repr(float(s.q2)), repr(float(s.xb)),
                                 repr(float(s.t)), repr(float(phi)),
                                 repr(float(f)), repr(float(sigma))])


def synthetic_experiment(experiment: str, seed: int = 0) -> List[KinematicSet]:
    """Schema-valid synthetic sets matching one experiment's envelope and
    published point count; the relative error grows with |t| plus jitter,
    and the harmonic coefficients keep F strictly positive."""
    env = EXPERIMENT_ENVELOPES[experiment]
    model = ToyHarmonicModel()
    n_full, rem = divmod(env.n_points, SYNTHETIC_SET_SIZE)
    sizes = [SYNTHETIC_SET_SIZE] * n_full + ([rem] if rem else [])
    rng = np.random.default_rng(np.random.SeedSequence([seed, crc32(experiment.encode())]))
    t_lo, t_hi = env.minus_t
    sets = []
    for idx, size in enumerate(sizes):
        e_beam = float(rng.uniform(*env.e_beam))
        q2 = float(rng.uniform(*env.q2))
        minus_t = float(rng.uniform(t_lo, t_hi))
        xb = float(rng.uniform(*env.xb))
        t = -minus_t
        phi = np.arange(size) * (360.0 / size) + 180.0 / size
        c0 = rng.uniform(1.5, 3.0)
        c1 = c0 * rng.uniform(-0.4, 0.4)
        c2 = c0 * rng.uniform(-0.25, 0.25)
        kin = (q2, xb, t, e_beam)
        f_model = model.evaluate(np.array([c0, c1, c2]), kin, phi)
        rel = (0.04 + 0.18 * (minus_t - t_lo) / max(t_hi - t_lo, 1e-12)
               + 0.04 * rng.uniform(size=size))
        sigma = rel * f_model
        f_data = f_model + sigma * rng.standard_normal(size)
        f_data = np.maximum(f_data, 0.1 * f_model)
        set_id = f"{experiment}:synthetic_{idx:03d}"
        sets.append(KinematicSet(set_id, experiment, e_beam, q2, xb, t,
                                 phi, f_data, sigma))
    return sets


def synthetic_corpus(seed: int = 0) -> List[KinematicSet]:
    sets = []
    for experiment in EXPERIMENT_ENVELOPES:
        sets.extend(synthetic_experiment(experiment, seed))
    return sets


def write_synthetic_corpus(out_dir, seed: int = 0) -> Dict[str, str]:
    """One file per experiment under the exact schema; returns tag->path."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for experiment in EXPERIMENT_ENVELOPES:
        sets = synthetic_experiment(experiment, seed)
        path = os.path.join(out_dir, experiment + ".csv")
        serialize_sets(sets, path)
        paths[experiment] = path
    return paths
