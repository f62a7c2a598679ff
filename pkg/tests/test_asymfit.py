"""Tests for power-law fitting and the effective-chain report."""
import math

import numpy as np
import pytest

from cuspspec.asymfit import (FitReport, RejectedInputError, SweepRecord,
                              admissible_records, effective_chain_report,
                              fit_gap, fit_power_law, predicted_exponent,
                              predicted_prefactor, remainder_window)


def synthetic_records(c, q, alphas, extra_level=None):
    records = []
    for a in alphas:
        e1 = c * a ** q - a * a
        levels = (e1,) if extra_level is None else (e1, e1 + extra_level(a))
        records.append(SweepRecord(a, levels))
    return records


def test_exact_power_law_recovery():
    records = synthetic_records(4.2426, 1.5, [8.0, 12.0, 16.0, 20.0, 24.0])
    fit = fit_power_law(records, 2.0)
    assert fit.exponent == pytest.approx(1.5, abs=1e-12)
    assert fit.prefactor == pytest.approx(4.2426, rel=1e-12)
    assert fit.residual < 1e-12


def test_fit_reports_predictions_from_model_solve():
    fit = fit_power_law(
        synthetic_records(1.0, 1.5, [8.0, 12.0, 16.0, 20.0]), 2.0)
    assert fit.predicted_exponent == pytest.approx(1.5)
    assert fit.predicted_prefactor == pytest.approx(3.0 * math.sqrt(2.0),
                                                    abs=1e-6)
    assert fit.eta_window == pytest.approx(min(1.0 / 8.0, 1.0 / 6.0))


def test_remainder_window_formula():
    p = 3.0
    assert remainder_window(p) == pytest.approx(
        min((p - 1) / (2 * (p + 2)), 2 * (p - 1) / ((p + 1) * (p + 2))))


def test_fit_rejects_short_or_nonpositive_data():
    good = synthetic_records(4.0, 1.5, [8.0, 12.0, 16.0])
    with pytest.raises(RejectedInputError):
        fit_power_law(good, 2.0)
    bad = [SweepRecord(a, (-a * a - 1.0,)) for a in (8.0, 12.0, 16.0, 20.0)]
    with pytest.raises(RejectedInputError, match="alpha"):
        fit_power_law(bad, 2.0)


def test_gap_fit_exact_recovery():
    records = synthetic_records(4.2426, 1.5, [8.0, 12.0, 16.0, 20.0],
                                extra_level=lambda a: 5.6569 * a ** 1.5)
    fit = fit_gap(records, 2.0)
    assert fit.exponent == pytest.approx(1.5, abs=1e-12)
    assert fit.prefactor == pytest.approx(5.6569, rel=1e-12)
    assert fit.predicted_prefactor == pytest.approx(4.0 * math.sqrt(2.0),
                                                    abs=1e-6)


def test_admission_rule_helper():
    records = [SweepRecord(10.0, (-80.0,)), SweepRecord(20.0, (-150.0,))]
    kept = admissible_records(records)
    assert [r.alpha for r in kept] == [10.0]


def test_fit_windows_api():
    fit = fit_power_law(
        synthetic_records(4.0, 1.5, [8.0, 12.0, 16.0, 20.0]), 2.0)
    assert fit.exponent_in(1.35, 1.65)
    assert fit.prefactor_within(0.25) == (
        abs(4.0 - fit.predicted_prefactor) <= 0.25 * fit.predicted_prefactor)


def test_predicted_quantities_golden_p2():
    assert predicted_exponent(2.0) == pytest.approx(1.5)
    assert predicted_prefactor(2.0, 1) == pytest.approx(3 * math.sqrt(2), abs=1e-6)
    assert predicted_prefactor(2.0, 2) == pytest.approx(7 * math.sqrt(2), abs=1e-5)


def test_chain_report_structure_and_prediction():
    report = effective_chain_report(2.0, [1e-1, 1e-2], k=1.0 / 3.0, n_cells=2048)
    assert {e.h for e in report.entries} == {1e-1, 1e-2}
    entry = next(e for e in report.entries if e.h == 1e-2)
    assert entry.model_value == pytest.approx(3.0, abs=1e-6)
    # prediction at h: factor * E_1(A); deviations are relative to it
    assert entry.k_deviation == pytest.approx(
        abs(entry.k_scaled - entry.model_value) / entry.model_value)
    assert report.monotone(1, "K")
    rows = report.to_csv_rows()
    assert len(rows) == 2 and rows[0].count(",") == 6


def test_chain_rejects_bad_h():
    with pytest.raises(RejectedInputError):
        effective_chain_report(2.0, [0.1, 1.5])


def test_secondary_definition_exact():
    rec = SweepRecord(10.0, (-92.5, -60.0))
    assert rec.secondary(1) == -92.5 + 100.0
    assert rec.secondary(2) == 40.0
