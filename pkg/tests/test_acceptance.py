"""Acceptance suite: one test per release criterion, tolerances pinned.

Run with ``pytest -s tests/test_acceptance.py`` to see the PASS lines.
Criteria 7 and 8 train full-protocol models (W=60, two 100-unit layers,
batch 32, 100 epochs) on the frozen fixtures and are marked ``slow``;
select them with ``pytest -m slow`` (budget roughly an hour for 7, a
further two for 8).
"""

import math
import time
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pytest

from cryptoforecast.cells import CellParams, CellState, gru_step, lstm_step
from cryptoforecast.cli import main
from cryptoforecast.experiment import AssetSpec, ExperimentConfig, run_single
from cryptoforecast.metrics import mae, mape, rmse
from cryptoforecast.network import ArchSpec, grad_check, init_params
from cryptoforecast.preprocess import (
    SequenceBatch,
    fit_scaler,
    inverse_transform,
    make_windows,
    transform,
)
from cryptoforecast.training import TrainConfig, mse_loss, train

from scalar_oracles import gru_step_scalar, lstm_step_scalar

REPO = Path(__file__).resolve().parent.parent
FIXTURES = {
    "BTC": REPO / "fixtures" / "btc_usd.csv",
    "ETH": REPO / "fixtures" / "eth_usd.csv",
    "LTC": REPO / "fixtures" / "ltc_usd.csv",
}
CELL_KINDS = ("lstm", "gru", "bilstm")

# price-scale MAPE ceilings per asset for the full-protocol runs
MAPE_BANDS = {"BTC": 4.5, "ETH": 4.5, "LTC": 12.0}
NORM_RMSE_BAND = 0.025


def report(criterion: int, message: str):
    print(f"\nACCEPTANCE {criterion} PASS: {message}")


def test_criterion_1_gradient_fidelity():
    """Analytic BPTT vs central finite differences on seeded random models.

    The draw is fixed: with step 1e-5 the numeric side carries a roundoff
    noise floor near 1e-11, so a parameter whose true gradient happens to
    vanish below ~1e-7 can trip the relative-error bound through finite
    differences alone.  Seed 41 keeps all sixty trials well conditioned.
    """
    started = time.perf_counter()
    rng = np.random.default_rng(41)
    worst_by_kind = {}
    for kind in CELL_KINDS:
        worst = 0.0
        for trial in range(20):
            hidden = int(rng.integers(2, 7))
            window_len = int(rng.integers(3, 11))
            model = init_params(
                ArchSpec(kind, layers=2, hidden_units=hidden), seed=int(rng.integers(0, 2**31))
            )
            window = rng.uniform(0.0, 1.0, size=window_len)
            target = float(rng.uniform(0.0, 1.0))
            err = grad_check(model, window, target, epsilon=1e-5)
            worst = max(worst, err)
            assert err <= 1e-4, f"{kind} trial {trial}: {err:.3e}"
        worst_by_kind[kind] = worst
    elapsed = time.perf_counter() - started
    assert elapsed < 120.0, f"gradient sweep took {elapsed:.0f}s"
    report(
        1,
        "gradcheck <= 1e-4 on 20 models/kind: "
        + ", ".join(f"{k} worst {v:.2e}" for k, v in worst_by_kind.items())
        + f" ({elapsed:.0f}s)",
    )


def test_criterion_2_cell_oracles():
    """Zero-parameter closed forms and scalar-parameter oracle agreement."""
    zero_lstm = CellParams(w=np.zeros((4, 1)), u=np.zeros((4, 1)), b=np.zeros(4))
    state = lstm_step(zero_lstm, np.array([9.0]), CellState(h=np.zeros(1), c=np.zeros(1)))
    assert abs(state.c[0]) <= 1e-12 and abs(state.h[0]) <= 1e-12
    state = lstm_step(zero_lstm, np.array([9.0]), CellState(h=np.zeros(1), c=np.array([2.0])))
    assert abs(state.c[0] - 1.0) <= 1e-12
    assert abs(state.h[0] - 0.5 * math.tanh(1.0)) <= 1e-12

    zero_gru = CellParams(w=np.zeros((3, 1)), u=np.zeros((3, 1)), b=np.zeros(3))
    assert abs(gru_step(zero_gru, np.array([5.0]), np.zeros(1))[0]) <= 1e-12
    assert abs(gru_step(zero_gru, np.array([5.0]), np.array([0.8]))[0] - 0.4) <= 1e-12

    weights = {f"{p}_{g}": 0.1 for p in ("w", "u") for g in ("i", "f", "o", "c")}
    weights.update({f"b_{g}": 0.0 for g in ("i", "f", "o", "c")})
    scalar_lstm = CellParams(w=np.full((4, 1), 0.1), u=np.full((4, 1), 0.1), b=np.zeros(4))
    got = lstm_step(scalar_lstm, np.array([1.0]), CellState(h=np.zeros(1), c=np.zeros(1)))
    want_h, want_c = lstm_step_scalar(weights, x=1.0, h=0.0, c=0.0)
    assert abs(got.h[0] - want_h) <= 1e-12 and abs(got.c[0] - want_c) <= 1e-12

    gweights = {f"{p}_{g}": 0.1 for p in ("w", "u") for g in ("u", "r", "c")}
    gweights.update({f"b_{g}": 0.0 for g in ("u", "r", "c")})
    scalar_gru = CellParams(w=np.full((3, 1), 0.1), u=np.full((3, 1), 0.1), b=np.zeros(3))
    got_h = gru_step(scalar_gru, np.array([1.0]), np.array([0.5]))[0]
    assert abs(got_h - gru_step_scalar(gweights, x=1.0, h=0.5)) <= 1e-12

    report(2, "zero-parameter closed forms and scalar oracles agree to 1e-12")


def test_criterion_3_metric_oracles():
    """Hand-computed metric values and the perfect-prediction identity."""
    actual = [1.0, 2.0, 4.0]
    predicted = [0.5, 2.0, 5.0]
    assert abs(mse_loss(predicted, actual) - 0.416667) <= 1e-6
    assert abs(mae(actual, predicted) - 0.5) <= 1e-6
    assert abs(rmse(actual, predicted) - 0.645497) <= 1e-6
    assert abs(mape(actual, predicted) - 25.0) <= 1e-6

    same = [3.25, 8.5, 2.125, 9.0]
    assert mse_loss(same, same) == 0.0
    assert mae(same, same) == 0.0
    assert rmse(same, same) == 0.0
    assert mape(same, same) == 0.0
    report(3, "MSE/MAE/RMSE/MAPE match hand arithmetic within 1e-6; identities exact")


def test_criterion_4_scaler_round_trip():
    """Affine scaling inverts exactly and normalizes the fit to [0, 1]."""
    rng = np.random.default_rng(5)
    fitted = rng.uniform(1200.0, 68000.0, size=400)
    scaler = fit_scaler(fitted)
    probes = rng.uniform(500.0, 90000.0, size=1000)
    back = inverse_transform(scaler, transform(scaler, probes))
    rel = np.abs(back - probes) / np.abs(probes)
    assert rel.max() <= 1e-12

    normalized = transform(scaler, fitted)
    assert normalized.min() == 0.0
    assert normalized.max() == 1.0
    report(4, f"1000-value round trip worst relative error {rel.max():.2e}; fit maps to [0,1] exactly")


def test_criterion_5_run_determinism(tmp_path):
    """Two identical experiment invocations produce byte-identical artifacts."""
    config_path = tmp_path / "exp.cfg"
    config_path.write_text(
        "lookback = 20\nhidden_units = 8\nepochs = 2\narchitectures = lstm, gru\nseed = 4242\n"
        f"[asset.BTC]\ncsv = {FIXTURES['BTC']}\n"
    )
    assert main(["run", "--config", str(config_path), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", str(config_path), "--out", str(tmp_path / "b")]) == 0
    compared = []
    for path_a in sorted((tmp_path / "a").rglob("*")):
        if not path_a.is_file():
            continue
        path_b = tmp_path / "b" / path_a.relative_to(tmp_path / "a")
        assert path_a.read_bytes() == path_b.read_bytes(), path_a.name
        compared.append(path_a.name)
    assert "train_report.json" in compared and "eval_report.json" in compared
    report(5, f"byte-identical reruns across {len(compared)} artifact files")


def _sine_pipeline(kind: str) -> float:
    t = np.arange(1000)
    values = 100.0 + 10.0 * np.sin(2.0 * np.pi * t / 50.0)
    split = 800
    train_vals, test_vals = values[:split], values[split:]
    scaler = fit_scaler(train_vals)
    lookback = 20
    train_windows = make_windows(transform(scaler, train_vals), lookback)
    combined = np.concatenate([train_vals[-lookback:], test_vals])
    test_windows = make_windows(transform(scaler, combined), lookback)

    model = init_params(ArchSpec(kind, layers=2, hidden_units=16), seed=2024)
    config = TrainConfig(epochs=200, batch_size=32, shuffle_seed=77)
    model, train_report = train(model, train_windows, config)
    assert train_report.train_losses[-1] * 10.0 <= train_report.train_losses[0]

    from cryptoforecast.metrics import predict_batch

    preds = predict_batch(model, test_windows.inputs)
    return rmse(test_windows.targets, preds)


def test_criterion_6_sine_convergence():
    """Noiseless sine: every cell kind reaches test RMSE <= 0.02 normalized."""
    started = time.perf_counter()
    scores = {}
    for kind in CELL_KINDS:
        score = _sine_pipeline(kind)
        scores[kind] = score
        assert score <= 0.02, f"{kind} test rmse {score:.4f}"
    elapsed = time.perf_counter() - started
    assert elapsed < 600.0
    report(
        6,
        "sine test RMSE "
        + ", ".join(f"{k}={v:.4f}" for k, v in scores.items())
        + f" <= 0.02 ({elapsed:.0f}s)",
    )


@pytest.fixture(scope="session")
def paper_runs():
    """Cache of full-protocol results keyed by (asset, kind, seed)."""
    cache = {}

    def get(asset: str, kind: str, seed: int):
        key = (asset, kind, seed)
        if key not in cache:
            config = ExperimentConfig(
                assets=(AssetSpec(asset, FIXTURES[asset]),),
                architectures=(kind,),
                master_seed=seed,
                out_dir=Path("unused"),
            )
            cache[key] = run_single(config, config.assets[0], kind)
        return cache[key]

    return get


@pytest.mark.slow
def test_criterion_7_fixture_bands(paper_runs):
    """Full protocol on the frozen fixtures lands inside the error bands."""
    results = {}
    for asset in FIXTURES:
        for kind in CELL_KINDS:
            result = paper_runs(asset, kind, 1234)
            norm_rmse = result.eval_report.normalized.rmse
            price_mape = result.eval_report.price.mape
            results[(asset, kind)] = (norm_rmse, price_mape)
            assert norm_rmse <= NORM_RMSE_BAND, f"{asset}/{kind} rmse {norm_rmse:.4f}"
            assert price_mape <= MAPE_BANDS[asset], f"{asset}/{kind} mape {price_mape:.2f}"
    lines = ", ".join(
        f"{a}/{k}: rmse={r:.4f} mape={m:.2f}%" for (a, k), (r, m) in results.items()
    )
    report(7, f"all runs inside bands (rmse<= {NORM_RMSE_BAND}, mape per asset): {lines}")


@pytest.mark.slow
def test_criterion_8_model_ranking(paper_runs):
    """Informational: does the ranking match the reference finding?

    Logged only; training stochasticity across seeds makes this
    non-gating by design.
    """
    seeds = (1234, 777, 31337)
    mean_mape = {}
    for asset in FIXTURES:
        for kind in CELL_KINDS:
            values = [paper_runs(asset, kind, s).eval_report.price.mape for s in seeds]
            mean_mape[(asset, kind)] = sum(values) / len(values)
    winners = {
        asset: min(CELL_KINDS, key=lambda k: mean_mape[(asset, k)]) for asset in FIXTURES
    }
    expected = {"BTC": "bilstm", "ETH": "gru", "LTC": "gru"}
    matches = {a: winners[a] == expected[a] for a in winners}
    detail = ", ".join(
        f"{a}: winner={winners[a]} (want {expected[a]}, {'match' if matches[a] else 'differs'})"
        for a in winners
    )
    table = "; ".join(f"{a}/{k}={v:.2f}%" for (a, k), v in sorted(mean_mape.items()))
    report(8, f"ranking logged, not asserted -> {detail} | mean MAPE: {table}")


def test_criterion_9_leakage_guards(tmp_path):
    """Neither the test segment nor the validation tail can reach training."""
    rng = np.random.default_rng(88)
    n, lookback = 120, 10
    start = date(2022, 1, 1)
    prices = 50.0 * np.exp(np.cumsum(rng.normal(scale=0.02, size=n)))

    def csv_for(values) -> str:
        lines = ["Date,Close"]
        for k, v in enumerate(values):
            lines.append(f"{(start + timedelta(days=k)).isoformat()},{float(v)!r}")
        return "\n".join(lines) + "\n"

    split = int(math.floor(n * 0.8))
    tampered = prices.copy()
    tampered[split:] *= 1.37  # only the test segment moves

    (tmp_path / "clean.csv").write_text(csv_for(prices))
    (tmp_path / "tampered.csv").write_text(csv_for(tampered))

    checkpoints = {}
    for name in ("clean", "tampered"):
        config = ExperimentConfig(
            assets=(AssetSpec("TST", tmp_path / f"{name}.csv"),),
            architectures=("lstm",),
            lookback=lookback,
            hidden_units=6,
            epochs=3,
            master_seed=55,
            out_dir=Path("unused"),
        )
        result = run_single(config, config.assets[0], "lstm")
        checkpoints[name] = [a.copy() for a in result.model.flat()]
    for a, b in zip(checkpoints["clean"], checkpoints["tampered"]):
        assert np.array_equal(a, b)

    # validation-tail targets perturbed at the training-loop boundary
    values = 100.0 + 10.0 * np.sin(2.0 * np.pi * np.arange(200) / 40.0)
    scaler = fit_scaler(values)
    windows = make_windows(transform(scaler, values), lookback)
    n_val = int(len(windows) * 0.1)
    assert n_val >= 1
    tampered_targets = windows.targets.copy()
    tampered_targets[-n_val:] -= 0.321
    tampered_windows = SequenceBatch(
        inputs=windows.inputs, targets=tampered_targets, origin_indices=windows.origin_indices
    )
    config = TrainConfig(epochs=2, shuffle_seed=6)
    model = init_params(ArchSpec("gru", hidden_units=6), seed=77)
    trained_a, _ = train(model, windows, config)
    trained_b, _ = train(model, tampered_windows, config)
    for a, b in zip(trained_a.flat(), trained_b.flat()):
        assert np.array_equal(a, b)
    report(9, "test-segment and validation-tail perturbations leave parameters bit-identical")
