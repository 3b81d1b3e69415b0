import csv
from dataclasses import replace

import numpy as np
import pytest

from qqual import dvcs
from qqual.optim import TrainConfig

MODEL = dvcs.ToyHarmonicModel()
KIN = (2.0, 0.35, -0.3, 5.75)


def make_set(params=(2.5, 0.8, -0.4), n=24, rel_sigma=0.05, set_id="unit",
             experiment="toy", kin=KIN):
    phi = np.arange(n) * (360.0 / n) + 180.0 / n
    f = MODEL.evaluate(np.asarray(params, dtype=float), kin, phi)
    q2, xb, t, e_beam = kin
    return dvcs.KinematicSet(set_id, experiment, e_beam, q2, xb, t,
                             phi, f, rel_sigma * np.abs(f))


def degenerate_set():
    # cos(phi) takes only two distinct values, so the model design has rank 2
    phi = np.array([80.0, 100.0, 260.0, 280.0])
    return dvcs.KinematicSet("degenerate", "toy", 5.75, 2.0, 0.3, -0.4,
                             phi, np.array([1.0, 1.1, 1.2, 1.3]), np.full(4, 0.1))


class TestKinematicSet:
    def test_points_sorted_by_phi(self):
        kset = dvcs.KinematicSet("s", "x", 5.75, 2.0, 0.3, -0.4,
                                 [270.0, 90.0, 180.0, 10.0],
                                 [4.0, 2.0, 3.0, 1.0], [0.4, 0.2, 0.3, 0.1])
        assert kset.phi.tolist() == [10.0, 90.0, 180.0, 270.0]
        assert kset.f.tolist() == [1.0, 2.0, 3.0, 4.0]
        assert kset.sigma_f.tolist() == [0.1, 0.2, 0.3, 0.4]

    def test_kin_and_n_points(self):
        kset = make_set()
        assert kset.kin == KIN
        assert kset.n_points == 24

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            dvcs.KinematicSet("s", "x", 5.75, 2.0, 0.3, -0.4,
                              [0.0, 90.0, 180.0], [1.0, 1.0, 1.0],
                              [0.1, 0.1, 0.1])

    def test_duplicate_phi(self):
        with pytest.raises(ValueError, match="duplicate"):
            dvcs.KinematicSet("s", "x", 5.75, 2.0, 0.3, -0.4,
                              [0.0, 90.0, 90.0, 180.0], np.ones(4), np.full(4, 0.1))

    def test_phi_range(self):
        with pytest.raises(ValueError, match="phi"):
            dvcs.KinematicSet("s", "x", 5.75, 2.0, 0.3, -0.4,
                              [0.0, 90.0, 180.0, 360.0], np.ones(4), np.full(4, 0.1))

    def test_sigma_positive(self):
        with pytest.raises(ValueError, match="sigma"):
            dvcs.KinematicSet("s", "x", 5.75, 2.0, 0.3, -0.4,
                              [0.0, 90.0, 180.0, 270.0], np.ones(4),
                              [0.1, 0.0, 0.1, 0.1])

    def test_kinematic_ranges(self):
        phi, f, sig = [0.0, 90.0, 180.0, 270.0], np.ones(4), np.full(4, 0.1)
        for q2, xb, t, e in [(-1.0, 0.3, -0.4, 5.75), (2.0, 1.2, -0.4, 5.75),
                             (2.0, 0.3, 0.4, 5.75), (2.0, 0.3, -0.4, -1.0)]:
            with pytest.raises(ValueError, match="kinematics"):
                dvcs.KinematicSet("s", "x", e, q2, xb, t, phi, f, sig)


class TestSyntheticCorpus:
    def test_counts_match_published(self):
        counts = {exp: sum(s.n_points for s in dvcs.synthetic_experiment(exp))
                  for exp in dvcs.EXPERIMENT_ENVELOPES}
        assert counts == {"Hall_A_E12-06-114": 1080, "Hall_A_E07-007": 404,
                          "Hall_A_E00-110": 468, "Hall_B_e1-DVCS1": 1933}
        assert sum(counts.values()) == 3885

    def test_corpus_within_envelopes(self):
        for kset in dvcs.synthetic_corpus(seed=0):
            assert dvcs.envelope_issues(kset) == []

    def test_out_of_range_flagged(self):
        kset = make_set(experiment="Hall_A_E00-110", kin=(9.0, 0.35, -0.3, 5.75))
        issues = dvcs.envelope_issues(kset)
        assert len(issues) == 1 and "Q2" in issues[0]

    def test_unknown_tag_unchecked(self):
        assert dvcs.envelope_issues(make_set(kin=(99.0, 0.9, -9.0, 50.0))) == []

    def test_seeded_reproducibility(self):
        a = dvcs.synthetic_experiment("Hall_A_E07-007", seed=3)
        b = dvcs.synthetic_experiment("Hall_A_E07-007", seed=3)
        c = dvcs.synthetic_experiment("Hall_A_E07-007", seed=4)
        assert all(np.array_equal(x.f, y.f) for x, y in zip(a, b))
        assert not np.array_equal(a[0].f, c[0].f)


class TestToyModel:
    def test_constant_without_higher_harmonics(self):
        phi = np.linspace(0.0, 359.0, 40)
        f = MODEL.evaluate([2.0, 0.0, 0.0], KIN, phi)
        assert np.ptp(f) == 0.0
        assert f[0] == pytest.approx(2.0 * MODEL.envelope(KIN))

    def test_harmonic_orthogonality(self):
        # closed uniform grid: the oscillating terms integrate to zero
        phi = np.linspace(0.0, 360.0, 73)
        f = MODEL.evaluate([2.5, 0.8, -0.4], KIN, phi)
        dc = 2.5 * MODEL.envelope(KIN)
        assert abs(np.trapezoid(f - dc, phi)) < 1e-10

    def test_linear_least_squares_recovery(self):
        params = np.array([2.5, 0.8, -0.4])
        kset = make_set(params=params)
        fitted = dvcs.fit_params(MODEL, kset)
        assert np.abs(fitted - params).max() < 1e-6

    def test_param_count_enforced(self):
        with pytest.raises(ValueError):
            MODEL.evaluate([1.0, 2.0], KIN, [0.0, 90.0])

    def test_rank_deficient_fit(self):
        with pytest.raises(dvcs.ModelFitError):
            dvcs.fit_params(MODEL, degenerate_set())


class TestPseudodata:
    def test_lam_zero_keeps_truth(self):
        kset = make_set()
        pseudo, f_true = dvcs.make_pseudodata(kset, MODEL, 0.0, seed=5)
        assert np.array_equal(pseudo.f, f_true(kset.phi))
        assert np.array_equal(pseudo.sigma_f, kset.sigma_f)

    def test_seed_reproducibility(self):
        kset = make_set()
        a, _ = dvcs.make_pseudodata(kset, MODEL, 1.0, seed=5)
        b, _ = dvcs.make_pseudodata(kset, MODEL, 1.0, seed=5)
        c, _ = dvcs.make_pseudodata(kset, MODEL, 1.0, seed=6)
        assert np.array_equal(a.f, b.f)
        assert not np.array_equal(a.f, c.f)

    def test_sigma_rescaled(self):
        kset = make_set()
        pseudo, _ = dvcs.make_pseudodata(kset, MODEL, 2.0, seed=5)
        assert np.allclose(pseudo.sigma_f, 2.0 * kset.sigma_f, atol=1e-15)
        assert pseudo.kin == kset.kin

    def test_ensemble_mean_approaches_truth(self):
        kset = make_set()
        lam, n_rep = 1.0, 1000
        truth = dvcs.make_pseudodata(kset, MODEL, lam, seed=0)[1](kset.phi)
        total = np.zeros(kset.n_points)
        for rep in range(n_rep):
            pseudo, _ = dvcs.make_pseudodata(kset, MODEL, lam, seed=1000 + rep)
            total += pseudo.f
        bound = 3.0 * lam * kset.sigma_f / np.sqrt(n_rep)
        assert np.all(np.abs(total / n_rep - truth) < bound)

    def test_negative_lam_rejected(self):
        with pytest.raises(ValueError):
            dvcs.make_pseudodata(make_set(), MODEL, -0.5, seed=0)


class TestExtraction:
    def test_zero_epoch_deterministic(self):
        kset = make_set()
        pseudo, _ = dvcs.make_pseudodata(kset, MODEL, 0.0, seed=0)
        for family in ("cdnn", "qdnn"):
            cfg = TrainConfig(epochs=0, seed=3)
            a = dvcs.extract_cffs(pseudo, MODEL, family, cfg)
            b = dvcs.extract_cffs(pseudo, MODEL, family, cfg)
            assert np.array_equal(a.cffs, b.cffs)
            assert np.all(np.isfinite(a.cffs)) and not a.diverged

    def test_family_validated(self):
        pseudo, _ = dvcs.make_pseudodata(make_set(), MODEL, 0.0, seed=0)
        with pytest.raises(ValueError, match="family"):
            dvcs.extract_cffs(pseudo, MODEL, "mlp", TrainConfig(epochs=0))

    def test_checkpoints_recorded(self):
        pseudo, _ = dvcs.make_pseudodata(make_set(), MODEL, 0.0, seed=0)
        res = dvcs.extract_cffs(pseudo, MODEL, "cdnn", TrainConfig(epochs=5, seed=1),
                                checkpoints=(1, 3, 5))
        assert sorted(res.checkpoint_cffs) == [1, 3, 5]
        for cffs in res.checkpoint_cffs.values():
            assert cffs.shape == (3,) and np.all(np.isfinite(cffs))
        assert np.array_equal(res.checkpoint_cffs[5], res.cffs)

    def test_noiseless_cdnn_recovery(self):
        kset = make_set()
        pseudo, f_true = dvcs.make_pseudodata(kset, MODEL, 0.0, seed=0)
        grid = np.linspace(0.0, 360.0, 181)
        truth = f_true(grid)
        bound = 0.05 * float(np.mean(truth)) * 360.0
        wins = 0
        for seed in range(10):
            res = dvcs.extract_cffs(pseudo, MODEL, "cdnn",
                                    TrainConfig(epochs=300, seed=seed), grid=grid)
            pred = MODEL.evaluate(res.cffs, kset.kin, grid)
            if dvcs.m_dvcs(pred, truth, grid) < bound:
                wins += 1
        assert wins >= 8

    @pytest.mark.slow
    def test_noiseless_qdnn_recovery(self):
        kset = make_set()
        pseudo, f_true = dvcs.make_pseudodata(kset, MODEL, 0.0, seed=0)
        grid = np.linspace(0.0, 360.0, 181)
        truth = f_true(grid)
        bound = 0.05 * float(np.mean(truth)) * 360.0
        wins = 0
        for seed in range(10):
            res = dvcs.extract_cffs(pseudo, MODEL, "qdnn",
                                    TrainConfig(epochs=60, seed=seed), grid=grid)
            pred = MODEL.evaluate(res.cffs, kset.kin, grid)
            if dvcs.m_dvcs(pred, truth, grid) < bound:
                wins += 1
        assert wins >= 8


class TestMDvcs:
    def test_identical_curves(self):
        grid = np.linspace(0.0, 360.0, 50)
        f = np.sin(np.deg2rad(grid)) + 2.0
        assert dvcs.m_dvcs(f, f, grid) == 0.0

    def test_constant_gap(self):
        grid = np.linspace(0.0, 360.0, 37)
        assert dvcs.m_dvcs(np.full(37, 1.25), np.ones(37), grid) == pytest.approx(
            360.0 * 0.25, abs=1e-10)

    def test_refinement_oracle(self):
        # nonnegative piecewise-linear gap: the trapezoid rule is exact once
        # the grid contains the kinks, so refinement must agree
        knots = np.array([0.0, 60.0, 180.0, 300.0, 360.0])
        gap = np.array([0.0, 2.0, 0.5, 1.5, 0.0])
        coarse = dvcs.m_dvcs(gap, np.zeros_like(gap), knots)
        fine_grid = np.linspace(0.0, 360.0, 100001)
        fine = dvcs.m_dvcs(np.interp(fine_grid, knots, gap),
                           np.zeros_like(fine_grid), fine_grid)
        assert coarse == pytest.approx(fine, rel=1e-6)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            dvcs.m_dvcs(np.ones(5), np.ones(4), np.linspace(0, 360, 5))
        with pytest.raises(ValueError):
            dvcs.m_dvcs(np.ones(3), np.ones(3), np.array([0.0, 90.0, 90.0]))


class TestOutcome:
    def outcome(self, m_c, m_q):
        return dvcs.DvcsOutcome(set_id="s", experiment="x", lam=1.0, q2=2.0,
                                xb=0.3, t=-0.4, e_beam=5.75, n_points=24,
                                m_cdnn=m_c, m_qdnn=m_q, eps_bar=0.1, ensemble=1)

    def test_xi_derived_from_means(self):
        assert self.outcome(2.0, 1.0).xi_dvcs == pytest.approx(1.0)
        assert self.outcome(1.5, 1.5).xi_dvcs == 0.0
        assert self.outcome(1.0, 2.0).xi_dvcs == pytest.approx(-0.5)

    def test_sign_tracks_winner(self):
        assert self.outcome(3.0, 1.0).xi_dvcs > 0  # quantum fits closer
        assert self.outcome(1.0, 3.0).xi_dvcs < 0


class TestCampaign:
    @classmethod
    def setup_class(cls):
        cls.sets = dvcs.synthetic_experiment("Hall_A_E07-007", seed=0)[:2]
        cls.cfg = TrainConfig(epochs=2, seed=11)
        cls.out, cls.report = dvcs.run_campaign(
            cls.sets, MODEL, lams=(0.5, 2.0), ensemble=2, cfg=cls.cfg,
            epoch_checkpoints=(1, 2))

    def test_reorder_invariance(self):
        out_rev, _ = dvcs.run_campaign(
            list(reversed(self.sets)), MODEL, lams=(0.5, 2.0), ensemble=2,
            cfg=self.cfg, epoch_checkpoints=(1, 2))
        a = {(o.set_id, o.lam): o for o in self.out}
        b = {(o.set_id, o.lam): o for o in out_rev}
        assert set(a) == set(b)
        for key in a:
            assert a[key].m_cdnn == b[key].m_cdnn
            assert a[key].m_qdnn == b[key].m_qdnn
            assert a[key].metrics == b[key].metrics

    def test_lam_changes_noise_only(self):
        by_set = {}
        for o in self.out:
            by_set.setdefault(o.set_id, {})[o.lam] = o
        for pair in by_set.values():
            lo, hi = pair[0.5], pair[2.0]
            assert (lo.q2, lo.xb, lo.t, lo.e_beam) == (hi.q2, hi.xb, hi.t, hi.e_beam)
            assert hi.eps_bar == pytest.approx(4.0 * lo.eps_bar, rel=1e-12)

    def test_ensemble_means_and_counts(self):
        assert len(self.out) == 4
        for o in self.out:
            assert o.ensemble == 2 and o.n_failed == 0
            assert len(o.metrics) == 5 and np.all(np.isfinite(o.metrics))
            assert o.m_cdnn > 0 and o.m_qdnn > 0 and np.isfinite(o.xi_dvcs)

    def test_qualifier_corpus_collected(self):
        corpus = self.report["qualifier_corpus"]
        assert len(corpus) == 8  # 2 sets x 2 lams x 2 checkpoints
        assert sorted({e.epoch for e in corpus}) == [1, 2]
        assert all(np.isfinite(e.xi) for e in corpus)

    def test_single_replica_matches_manual_pipeline(self):
        kset = self.sets[0]
        cfg = TrainConfig(epochs=1, seed=7)
        out, _ = dvcs.run_campaign([kset], MODEL, lams=(1.0,), ensemble=1, cfg=cfg)
        seq = dvcs._rep_seed_seq(cfg.seed, kset.set_id, 0)
        pseudo_seq, train_seq = seq.spawn(2)
        pseudo, f_true = dvcs.make_pseudodata(kset, MODEL, 1.0, pseudo_seq)
        rep_cfg = replace(cfg, seed=int(train_seq.generate_state(1)[0] & 0x7FFFFFFF))
        grid = np.linspace(0.0, 360.0, dvcs.EXTRACTION_GRID_N)
        truth = f_true(grid)
        for family, got in (("cdnn", out[0].m_cdnn), ("qdnn", out[0].m_qdnn)):
            res = dvcs.extract_cffs(pseudo, MODEL, family, rep_cfg, grid=grid)
            pred = MODEL.evaluate(res.cffs, kset.kin, grid)
            assert dvcs.m_dvcs(pred, truth, grid) == got
        denom = np.maximum(np.abs(f_true(kset.phi)), 1e-12)
        assert out[0].eps_bar == float(np.mean(pseudo.sigma_f / denom))

    def test_worker_pool_matches_serial(self):
        out_pool, report_pool = dvcs.run_campaign(
            self.sets, MODEL, lams=(0.5, 2.0), ensemble=2, cfg=self.cfg,
            epoch_checkpoints=(1, 2), n_workers=2)
        assert len(out_pool) == len(self.out)
        for a, b in zip(self.out, out_pool):
            assert a.m_cdnn == b.m_cdnn and a.m_qdnn == b.m_qdnn
            assert a.metrics == b.metrics
        assert [(e.epoch, e.xi) for e in report_pool["qualifier_corpus"]] == \
               [(e.epoch, e.xi) for e in self.report["qualifier_corpus"]]

    def test_unfittable_set_skipped_with_report(self):
        out, report = dvcs.run_campaign(
            [degenerate_set(), self.sets[0]], MODEL, lams=(1.0,), ensemble=1,
            cfg=TrainConfig(epochs=1, seed=2))
        assert len(out) == 1 and out[0].set_id == self.sets[0].set_id
        assert len(report["failed_fits"]) == 1
        assert "degenerate" in report["failed_fits"][0]

    def test_validation(self):
        with pytest.raises(ValueError):
            dvcs.run_campaign([], MODEL, lams=(1.0,), ensemble=1, cfg=self.cfg)
        with pytest.raises(ValueError):
            dvcs.run_campaign(self.sets, MODEL, lams=(1.0,), ensemble=0,
                              cfg=self.cfg)


def trend_outcome(set_id, t, xi_value, eps_bar=0.1, n_points=24):
    # m_qdnn pinned to 1 makes xi_dvcs equal m_cdnn - 1
    out = dvcs.DvcsOutcome(set_id=set_id, experiment="x", lam=1.0, q2=2.0,
                           xb=0.3, t=t, e_beam=5.75, n_points=n_points,
                           m_cdnn=xi_value + 1.0, m_qdnn=1.0, eps_bar=eps_bar,
                           ensemble=1)
    return out


class TestTTrend:
    def test_linear_crossing_recovered(self):
        ts = np.linspace(-1.4, -0.2, 25)
        outs = [trend_outcome(f"s{i}", t, t + 0.8) for i, t in enumerate(ts)]
        trend = dvcs.t_trend(outs)
        assert trend.smoothed and trend.bandwidth == 0.15
        assert len(trend.crossings) == 1
        assert abs(trend.crossings[0] + 0.8) <= 0.05

    def test_constant_flat_no_crossing(self):
        ts = np.linspace(-1.4, -0.2, 20)
        outs = [trend_outcome(f"s{i}", t, 0.4) for i, t in enumerate(ts)]
        trend = dvcs.t_trend(outs)
        assert np.ptp(trend.trend) < 1e-12
        assert trend.crossings == ()

    def test_few_distinct_t_raw_only(self):
        outs = [trend_outcome(f"s{i}", -0.5 - 0.1 * (i % 4), 0.1) for i in range(12)]
        trend = dvcs.t_trend(outs)
        assert not trend.smoothed
        assert trend.trend is None and trend.grid is None
        assert len(trend.ts) == 12 and len(trend.xis) == 12

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            dvcs.t_trend([])


class TestMatchedControls:
    def linear_outcomes(self):
        ts = np.linspace(-1.4, -0.2, 30)
        return [trend_outcome(f"s{i}", t, t + 0.8, eps_bar=0.05 + 0.01 * i,
                              n_points=20 + i) for i, t in enumerate(ts)]

    def test_single_quantile_is_unbinned_trend(self):
        outs = self.linear_outcomes()
        full = dvcs.t_trend(outs)
        groups, notes = dvcs.matched_controls(outs, "uncertainty_quantiles", k=1)
        assert notes == [] and len(groups) == 1
        assert np.allclose(next(iter(groups.values())).trend, full.trend)

    def test_full_fraction_is_whole_sample(self):
        outs = self.linear_outcomes()
        full = dvcs.t_trend(outs)
        groups, notes = dvcs.matched_controls(outs, "density_top_fraction",
                                              fraction=1.0)
        assert notes == [] and len(groups) == 1
        assert np.allclose(next(iter(groups.values())).trend, full.trend)

    def test_confounded_bins_go_flat(self):
        # outperformance depends only on the relative error, so controlling
        # for it must remove the apparent t-dependence
        rng = np.random.default_rng(0)
        outs = []
        for i in range(30):
            eps = (0.1, 0.2, 0.3)[i % 3]
            outs.append(trend_outcome(f"c{i}", float(rng.uniform(-1.4, -0.2)),
                                      10.0 * eps, eps_bar=eps))
        groups, _ = dvcs.matched_controls(outs, "uncertainty_quantiles", k=3)
        assert len(groups) == 3
        for trend in groups.values():
            assert np.ptp(trend.trend) < 1e-9

    def test_thin_groups_omitted_with_note(self):
        outs = self.linear_outcomes()[:12]
        groups, notes = dvcs.matched_controls(outs, "uncertainty_quantiles", k=3)
        assert groups == {}
        assert len(notes) == 3 and all("omitted" in n for n in notes)
        groups, notes = dvcs.matched_controls(outs, "density_top_fraction",
                                              fraction=0.3)
        assert groups == {} and len(notes) == 1

    def test_validation(self):
        outs = self.linear_outcomes()
        with pytest.raises(ValueError):
            dvcs.matched_controls(outs, "by_moon_phase")
        with pytest.raises(ValueError):
            dvcs.matched_controls(outs, "uncertainty_quantiles", k=0)
        with pytest.raises(ValueError):
            dvcs.matched_controls(outs, "density_top_fraction", fraction=0.0)
        with pytest.raises(ValueError):
            dvcs.matched_controls([], "uncertainty_quantiles")


class TestIngest:
    def test_full_corpus_counts(self, tmp_path):
        paths = dvcs.write_synthetic_corpus(tmp_path, seed=0)
        assert set(paths) == set(dvcs.EXPERIMENT_ENVELOPES)
        sets, report = dvcs.ingest_many(paths.values())
        assert report["total"] == 3885
        assert report["per_experiment"] == {
            "Hall_A_E12-06-114": 1080, "Hall_A_E07-007": 404,
            "Hall_A_E00-110": 468, "Hall_B_e1-DVCS1": 1933}
        assert report["n_sets"] == len(sets)

    def test_single_file_counts(self, tmp_path):
        paths = dvcs.write_synthetic_corpus(tmp_path, seed=0)
        sets, report = dvcs.ingest(paths["Hall_A_E12-06-114"])
        assert report["total"] == 1080
        assert report["per_experiment"] == {"Hall_A_E12-06-114": 1080}
        assert all(s.experiment == "Hall_A_E12-06-114" for s in sets)

    def test_round_trip_lossless(self, tmp_path):
        paths = dvcs.write_synthetic_corpus(tmp_path, seed=1)
        first, _ = dvcs.ingest(paths["Hall_A_E00-110"])
        again_path = tmp_path / "again.csv"
        dvcs.serialize_sets(first, again_path)
        second, _ = dvcs.ingest(again_path)
        a = sorted(first, key=lambda s: s.set_id)
        b = sorted(second, key=lambda s: s.set_id)
        assert len(a) == len(b)
        for x, y in zip(a, b):
            assert (x.set_id, x.experiment) == (y.set_id, y.experiment)
            assert (x.e_beam, x.q2, x.xb, x.t) == (y.e_beam, y.q2, y.xb, y.t)
            assert np.array_equal(x.phi, y.phi)
            assert np.array_equal(x.f, y.f)
            assert np.array_equal(x.sigma_f, y.sigma_f)

    def write_rows(self, path, rows, header=None):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(dvcs.CSV_HEADER if header is None else header)
            writer.writerows(rows)

    def good_row(self, phi, e_beam=5.75):
        return ["exp", e_beam, 2.0, 0.3, -0.4, phi, 1.0, 0.1]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        sets, report = dvcs.ingest(path)
        assert sets == []
        assert report == {"per_experiment": {}, "total": 0, "n_sets": 0}

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "bad.csv"
        self.write_rows(path, [], header=["a", "b"])
        with pytest.raises(ValueError, match="header"):
            dvcs.ingest(path)

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        self.write_rows(path, [self.good_row(0.0), ["exp", 5.75, 2.0]])
        with pytest.raises(ValueError, match="line 3"):
            dvcs.ingest(path)

    def test_non_numeric_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        row = self.good_row(10.0)
        row[6] = "not-a-number"
        self.write_rows(path, [self.good_row(0.0), row])
        with pytest.raises(ValueError, match="line 3"):
            dvcs.ingest(path)

    def test_bad_sigma_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        row = self.good_row(10.0)
        row[7] = -0.1
        self.write_rows(path, [self.good_row(0.0), row])
        with pytest.raises(ValueError, match="line 3.*sigma"):
            dvcs.ingest(path)

    def test_duplicate_phi_names_both_lines(self, tmp_path):
        path = tmp_path / "bad.csv"
        self.write_rows(path, [self.good_row(0.0), self.good_row(90.0),
                               self.good_row(0.0)])
        with pytest.raises(ValueError, match="line 4.*line 2"):
            dvcs.ingest(path)

    def test_mixed_beam_energy_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        self.write_rows(path, [self.good_row(0.0), self.good_row(90.0, e_beam=6.0)])
        with pytest.raises(ValueError, match="line 3.*E_beam"):
            dvcs.ingest(path)

    def test_outcomes_csv(self, tmp_path):
        outs = [trend_outcome("a", -0.4, 0.25), trend_outcome("b", -0.8, -0.1)]
        path = tmp_path / "outcomes.csv"
        dvcs.outcomes_to_csv(outs, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == dvcs.OUTCOME_COLUMNS
        assert len(rows) == 3
        assert float(rows[1][rows[0].index("xi_dvcs")]) == pytest.approx(0.25)


class TestSetMetrics:
    def test_resamples_to_required_length(self):
        kset = make_set()
        vals = dvcs.set_metrics(kset.phi, kset.f)
        assert vals.shape == (5,) and np.all(np.isfinite(vals))

    def test_order_invariant(self):
        rng = np.random.default_rng(2)
        kset = make_set()
        perm = rng.permutation(kset.n_points)
        a = dvcs.set_metrics(kset.phi, kset.f)
        b = dvcs.set_metrics(kset.phi[perm], kset.f[perm])
        assert np.array_equal(a, b)
