import numpy as np
import pytest

from mtot import MetricReport, msee, mspe, smspe


def test_smspe_cases():
    y = np.array([3.0, 4.0])
    assert smspe(y, y) == 0.0
    assert smspe(y, np.zeros(2)) == 1.0
    assert np.isclose(smspe(y, np.array([3.0, 0.0])), 0.64)


def test_smspe_scale_invariance():
    rng = np.random.default_rng(0)
    y = rng.standard_normal((4, 5))
    yh = rng.standard_normal((4, 5))
    # dyadic scale factors keep the scaling lossless in binary floating point
    for alpha in (2.0, -4.0, 0.5, 1024.0):
        assert smspe(alpha * y, alpha * yh) == smspe(y, yh)
    assert np.isclose(smspe(3.7 * y, 3.7 * yh), smspe(y, yh), rtol=1e-12)


def test_smspe_validation():
    with pytest.raises(ValueError):
        smspe(np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        smspe(np.ones((2, 2)), np.ones((2, 3)))


def test_mspe_cases():
    y = np.ones((3, 4))
    assert mspe(y, y) == 0.0
    assert np.isclose(mspe(y, y + 0.5), 0.25)
    assert np.isclose(mspe(np.array([[1.0, 3.0]]), np.array([[0.0, 0.0]])), 5.0)


def test_mspe_zero_iff_equal():
    rng = np.random.default_rng(1)
    y = rng.standard_normal((3, 4))
    yh = y.copy()
    yh[0, 0] += 1e-9
    assert mspe(y, yh) > 0.0


def test_msee_cases():
    rng = np.random.default_rng(2)
    truth = rng.standard_normal((5, 7))
    noise = 0.3 * rng.standard_normal((5, 7))
    y = truth + noise
    assert msee(y, noise, truth) <= 1e-30  # only fp rounding of truth + noise - noise
    assert np.isclose(msee(y, noise, y), float(np.mean(noise**2)))
    assert np.isclose(msee(np.array([[1.0, 3.0]]), np.zeros((1, 2)), np.zeros((1, 2))), 5.0)
    with pytest.raises(ValueError):
        msee(y, noise[:, :3], truth)


def test_msee_not_above_mspe_for_fitted_truth():
    rng = np.random.default_rng(3)
    truth = rng.standard_normal((20, 10))
    noise = 0.5 * rng.standard_normal((20, 10))
    y = truth + noise
    pred = truth + 0.1 * rng.standard_normal((20, 10))
    # independence of noise and prediction error keeps estimation error below
    # prediction error on average; check the identity-based inequality in
    # expectation via many draws
    gaps = []
    for _ in range(50):
        noise = 0.5 * rng.standard_normal((20, 10))
        y = truth + noise
        gaps.append(mspe(y, pred) - msee(y, noise, pred))
    assert np.mean(gaps) > 0.0


def test_report_summary_and_csv(tmp_path):
    report = MetricReport(kind="smspe", values=[0.1, 0.2, 0.3])
    assert np.isclose(report.mean, 0.2)
    assert np.isclose(report.sd, np.std([0.1, 0.2, 0.3], ddof=1))
    single = MetricReport(kind="smspe", values=[0.5])
    assert single.sd is None

    out = tmp_path / "report.csv"
    report.to_csv(out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "metric,replication,value"
    assert len(lines) == 6
    assert lines[-2].startswith("smspe,mean,")
    assert lines[-1].startswith("smspe,sd,")
