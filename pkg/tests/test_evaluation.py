import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from entropic_kde.detector import WindowConfig
from entropic_kde.errors import ParameterError
from entropic_kde.evaluation import (
    F1Result,
    SweepPoint,
    f1_overlap,
    method_config,
    positive_truth,
    spearman,
    sweep_delta_ke,
    sweep_detection,
    time_method,
)
from entropic_kde.simulators import make_injection_record
from entropic_kde.timeseries import LabeledInterval

WINDOWS = [(s, 256) for s in range(0, 2000, 128)]
TRUTH = [LabeledInterval(700, 1300)]


class TestF1:
    def test_counts(self):
        r = F1Result.from_counts(3, 1, 2)
        assert r.precision == 0.75 and r.recall == 0.6
        assert r.f1 == pytest.approx(2 * 0.75 * 0.6 / 1.35)
        assert F1Result.from_counts(0, 0, 0).f1 == 0.0
        with pytest.raises(ParameterError):
            F1Result.from_counts(-1, 0, 0)

    def test_perfect_detector(self):
        pos = positive_truth(WINDOWS, TRUTH)
        assert f1_overlap(WINDOWS, pos, TRUTH).f1 == 1.0

    def test_no_flags(self):
        r = f1_overlap(WINDOWS, np.zeros(len(WINDOWS), bool), TRUTH)
        assert r.f1 == 0.0 and r.fn > 0

    def test_quarter_overlap_boundary_is_inclusive(self):
        truth = [LabeledInterval(192, 1000)]
        assert positive_truth([(0, 256)], truth).tolist() == [True]
        assert positive_truth([(0, 256)], [LabeledInterval(193, 1000)]).tolist() == [False]

    def test_truth_denominator(self):
        truth = [LabeledInterval(0, 1000)]
        assert positive_truth([(0, 256)], truth, denominator="truth").tolist() == [True]
        assert positive_truth([(0, 200)], truth, denominator="truth").tolist() == [False]
        with pytest.raises(ParameterError):
            positive_truth([(0, 256)], truth, denominator="record")

    def test_shape_mismatch(self):
        with pytest.raises(ParameterError):
            f1_overlap(WINDOWS, [True], TRUTH)

    @given(st.lists(st.booleans(), min_size=len(WINDOWS), max_size=len(WINDOWS)),
           st.randoms(use_true_random=False))
    def test_permutation_invariance(self, flags, random):
        truth = [LabeledInterval(100, 400), LabeledInterval(900, 1500)]
        order = list(range(len(WINDOWS)))
        random.shuffle(order)
        a = f1_overlap(WINDOWS, flags, truth)
        b = f1_overlap([WINDOWS[i] for i in order], [flags[i] for i in order], truth[::-1])
        assert a == b

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_min_overlap_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert positive_truth(WINDOWS, TRUTH, hi).sum() <= positive_truth(WINDOWS, TRUTH, lo).sum()


class TestSweeps:
    def test_delta_ke_sweep_shape_and_reproducibility(self):
        kwargs = dict(formats=["BPSK", "QPSK"], snr_grid=(-10, 11), trials=2, decimations=(1, 2),
                      length=1000, tau_max=10, cells=16, seed=4)
        res = sweep_delta_ke(**kwargs)
        assert res.groups() == ("decimation=1", "decimation=2")
        assert all(p.trials == 4 and p.std >= 0 for p in res.points)
        assert res == sweep_delta_ke(**kwargs)
        assert sweep_delta_ke(workers=2, **kwargs) == res
        x, mean, std = res.curve("decimation=1")
        assert x.tolist() == [-10.0, 11.0] and mean[1] > mean[0]

    def test_default_grid_has_eight_points(self):
        from entropic_kde.evaluation import DEFAULT_SNR_GRID
        assert list(DEFAULT_SNR_GRID) == [-10, -7, -4, -1, 2, 5, 8, 11]

    def test_detection_sweep(self):
        kwargs = dict(formats=["BPSK"], snr_sir_grid=(10,), trials=1, methods=("kl-kde", "kl-psd"),
                      seed=2)
        res = sweep_detection(**kwargs)
        assert res.groups() == ("kl-kde", "kl-psd")
        assert res == sweep_detection(**kwargs)
        assert 0 <= res.point("kl-kde", 10).mean <= 1

    def test_write_csv(self, tmp_path):
        res = sweep_delta_ke(["BPSK"], (0,), 1, (1,), 1000, 0, 5, 8)
        res.write_csv(tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "group,snr_db,mean_delta_ke,std_delta_ke,trials" and len(lines) == 2

    def test_bad_arguments(self):
        with pytest.raises(ParameterError):
            sweep_delta_ke(trials=0)
        with pytest.raises(ParameterError):
            sweep_delta_ke(length=1001)
        with pytest.raises(ParameterError):
            sweep_detection(formats=[])
        with pytest.raises(ParameterError):
            SweepPoint("g", 0.0, 0.0, 0.0, 0)


def test_method_config():
    assert method_config("KL-PSD").representation == "psd"
    assert method_config("delta-ke", WindowConfig(stride=64)).stride == 64
    with pytest.raises(ParameterError):
        method_config("autoencoder")


def test_time_method():
    rec = make_injection_record("BPSK", seed=1)
    t = time_method("kl-psd", rec, repeats=2, warmup=0)
    assert len(t.samples) == 2 and t.mean_s > 0 and t.std_s >= 0


def test_spearman():
    assert spearman([1, 2, 3], [2, 4, 9]) == pytest.approx(1.0)
    assert math.isnan(spearman([1, 1, 1], [1, 2, 3]))
