"""End-to-end smoke tests for the python bindings."""
import json
import math

import pytest

import clvkit


SCENARIO = {
    "n_customers": 400,
    "r": 1.0,
    "alpha": 0.6,
    "s": 1.0,
    "beta": 0.8,
    "gg": {"p": 3.0, "q": 5.0, "gamma": 40.0},
    "estimation_length": 52,
    "holdout_length": 26,
    "seed": 7,
}


def test_simulate_fit_predict_roundtrip():
    ds, log = clvkit.simulate(json.dumps(SCENARIO))
    assert ds.n_customers == 400
    assert ds.estimation_length == pytest.approx(52.0)
    assert len(log) > 400

    fit = clvkit.fit(ds, family="pnbd", hessian=False)
    assert fit.converged
    assert 0.3 < fit.param("r") < 3.0
    assert fit.family == "pnbd"

    gg = clvkit.fit(ds, family="gg", hessian=False)
    assert gg.converged

    rows = clvkit.predict(fit, ds, spending=gg)
    assert len(rows) == 400
    row = rows[0]
    assert 0.0 <= row["palive"] <= 1.0
    assert row["cet"] >= 0.0
    assert row["predicted_clv"] == pytest.approx(
        row["dert"] * row["predicted_mean_spending"], rel=1e-12
    )
    assert "actual_x" in row


def test_ingest_and_summary():
    rows = [
        ("a", "2020-01-05", 10.0),
        ("a", "2020-03-01", 20.0),
        ("b", "2020-01-10", None),
    ]
    ds = clvkit.ingest(rows, date_format="ymd", time_unit="week", data_end="2020-06-01")
    assert ds.n_customers == 2
    summary = ds.summary()
    assert summary["n_customers"] == 2
    assert summary["total_transactions"] == 3
    assert summary["zero_repeater_percent"] == pytest.approx(50.0)


def test_model_json_roundtrip():
    ds, _ = clvkit.simulate(json.dumps(SCENARIO))
    fit = clvkit.fit(ds, family="pnbd", hessian=False)
    back = clvkit.fit_from_json(fit.to_json())
    assert back.loglik == fit.loglik
    assert back.param("alpha") == fit.param("alpha")


def test_discount_conversion():
    assert clvkit.discount_per_unit(0.075, "week") == pytest.approx(
        math.log(1.075) / 52.0
    )


def test_bootstrap_intervals():
    ds, _ = clvkit.simulate(json.dumps(dict(SCENARIO, n_customers=250)))
    fit = clvkit.fit(ds, family="pnbd", hessian=False)
    ci = clvkit.bootstrap_params(fit, ds, num_boots=8, seed=3)
    lo, hi = ci["r"]
    assert lo <= hi


def test_errors_are_typed():
    with pytest.raises(clvkit.InputError):
        clvkit.ingest([], date_format="ymd")
