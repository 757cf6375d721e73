import numpy as np
import pytest

from src.common.exceptions import CapacityError, InvariantViolation
from src.market.amm import (average_power, predict_flexible_consumption, alpha, buy_price, sell_price,
                            commit_request)
from src.market.core import MarketConfig
from src.conftest import make_request, make_state, hourly_config, hourly_grid, pin_prices


def test_average_power():
    assert average_power(make_request("r", 0, 10, 6.0, 3.0)) == pytest.approx(0.6)
    assert average_power(make_request("r", 0, 2, 6.0, 3.0)) == pytest.approx(3.0)
    assert average_power(make_request("r", 0, 4, 1.0, 1.0)) == pytest.approx(0.25)


def test_predict_flexible_consumption():
    grid = hourly_grid(24)
    assert not predict_flexible_consumption([], grid).c_fa.any()

    r = make_request("r", 0, 10, 6.0, 3.0)
    c_fa = predict_flexible_consumption([r], grid).c_fa
    np.testing.assert_allclose(c_fa[:10], 0.6)
    np.testing.assert_allclose(c_fa[10:], 0.0)

    twin = make_request("s", 0, 10, 6.0, 3.0)
    np.testing.assert_allclose(predict_flexible_consumption([r, twin], grid).c_fa, 2 * c_fa)


def test_forecast_is_clipped_to_the_window():
    r = make_request("r", -4, 4, 2.0, 1.0)
    c_fa = predict_flexible_consumption([r], hourly_grid(6)).c_fa
    np.testing.assert_allclose(c_fa, [0.25] * 4 + [0.0] * 2)


@pytest.mark.parametrize("available, c_fa, expected", [
    (5.0, 5.0, 1.0),
    (50.0, 100.0, 0.5),
    (3.0, 0.0, 1.0),
    (0.0, 0.0, 1.0),
    (0.0, 2.0, 0.0),
    (8.0, 2.0, 1.0),
])
def test_alpha(available, c_fa, expected):
    assert alpha(available, c_fa) == pytest.approx(expected)


def test_alpha_is_vectorised():
    np.testing.assert_allclose(alpha(np.array([1.0, 2.0, 4.0]), np.array([4.0, 4.0, 4.0])), [0.25, 0.5, 1.0])


def test_price_curves():
    config = MarketConfig()
    assert buy_price(0.0, config) == pytest.approx(config.bp_max)
    assert buy_price(1.0, config) == 0.0
    assert buy_price(0.5, config) == pytest.approx(0.5)
    assert sell_price(1.0, config) == 0.0
    assert sell_price(0.5, config.with_options(sp_max=1.0)) == pytest.approx(0.5)
    assert sell_price(0.0, config.with_options(sp_max=0.4)) == pytest.approx(0.4)

    quadratic = config.with_options(curve="quadratic")
    assert buy_price(0.5, quadratic) == pytest.approx(0.25)
    np.testing.assert_allclose(buy_price(np.array([0.0, 0.5, 1.0]), config), [1.0, 0.5, 0.0])


def test_prices_follow_scarcity():
    r = make_request("r", 0, 4, 8.0, 2.0)
    state = make_state([4.0, 1.0, 2.0, 0.0], requests=[r])
    np.testing.assert_allclose(state.c_fa, 2.0)
    np.testing.assert_allclose(state.alpha, [1.0, 0.5, 1.0, 0.0])
    np.testing.assert_allclose(state.bp, [0.0, 0.5, 0.0, 1.0])


def test_commit_consumes_available_supply():
    r = make_request("r", 0, 4, 2.0, 1.0, budget=10.0)
    state = make_state([1.0, 1.0, 1.0, 1.0], requests=[r])
    commit_request(state, r, 1)
    np.testing.assert_allclose(state.available, [1.0, 0.0, 0.0, 1.0])
    assert state.ledger.is_consistent()
    assert "r" not in state.open
    np.testing.assert_allclose(state.c_fa, 0.0)

    other = make_request("s", 0, 4, 1.0, 1.0, budget=10.0)
    with pytest.raises(CapacityError):
        commit_request(state, other, 2)
    assert len(state.ledger) == 1


def test_commit_charges_per_period_or_paper_literal():
    r = make_request("r", 0, 3, 2.0, 1.0, budget=10.0)
    state = pin_prices(make_state([5.0, 5.0, 5.0]), [0.5, 0.2, 0.3])
    assert state.slot_cost(r, 0) == pytest.approx(0.7)

    literal = pin_prices(make_state([5.0, 5.0, 5.0], config=hourly_config(3, pricing_mode="paper-literal")),
                         [0.5, 0.2, 0.3])
    assert literal.slot_cost(r, 0) == pytest.approx(1.0)
    assert literal.slot_cost(r, 1) == pytest.approx(0.4)


def test_commit_never_exceeds_budget():
    r = make_request("r", 0, 2, 1.0, 1.0, budget=0.1)
    state = pin_prices(make_state([1.0, 1.0]), [0.5, 0.5])
    with pytest.raises(InvariantViolation):
        commit_request(state, r, 0)


def test_essential_demand_reduces_capacity():
    state = make_state([1.0, 0.0], essential=[2.0, 3.0])
    np.testing.assert_allclose(state.flexible_supply, [1.0, 0.0])
    np.testing.assert_allclose(state.available, [1.0, 0.0])


def test_snapshot_is_independent():
    r = make_request("r", 0, 2, 1.0, 1.0)
    state = make_state([1.0, 1.0], requests=[r])
    twin = state.snapshot()
    commit_request(twin, r, 0)
    np.testing.assert_allclose(state.available, [1.0, 1.0])
    assert len(state.ledger) == 0 and "r" in state.open


def test_add_supply_raises_alpha():
    r = make_request("r", 0, 2, 2.0, 1.0)
    state = make_state([0.5, 0.5], requests=[r])
    np.testing.assert_allclose(state.alpha, 0.5)
    state.add_supply([0.5, 0.0])
    np.testing.assert_allclose(state.alpha, [1.0, 0.5])


@pytest.mark.parametrize("curve", ["linear", "quadratic"])
def test_buy_price_falls_strictly_over_alpha(curve):
    config = MarketConfig(curve=curve)
    grid = np.linspace(0.0, 1.0, 1000)
    bp = buy_price(grid, config)
    assert bp[0] == pytest.approx(config.bp_max)
    assert bp[-1] == 0.0
    assert np.all(np.diff(bp) < 0)
    assert sell_price(1.0, config) == 0.0


def test_incremental_forecast_matches_recompute(rng):
    requests = [make_request(f"r{i}", int(e), int(e) + int(w), 1.0, 1.0, budget=10.0)
                for i, (e, w) in enumerate(zip(rng.integers(0, 8, 12), rng.integers(1, 5, 12)))]
    state = make_state([20.0] * 12, requests=requests)
    np.testing.assert_allclose(state.c_fa, state.recomputed_forecast())

    for k, r in enumerate(requests):
        if k % 3 == 0:
            state.withdraw(r)
        elif state.fits(r, state.start_bounds(r)[0]):
            commit_request(state, r, state.start_bounds(r)[0])
        np.testing.assert_allclose(state.c_fa, state.recomputed_forecast(), atol=1e-12)
    assert not state.open


def test_commit_order_does_not_change_the_state():
    a = make_request("a", 0, 4, 2.0, 1.0, budget=10.0)
    b = make_request("b", 1, 6, 3.0, 1.0, budget=10.0)
    forward = make_state([1.5] * 6, requests=[a, b])
    commit_request(forward, a, 0)
    commit_request(forward, b, 2)

    backward = make_state([1.5] * 6, requests=[a, b])
    commit_request(backward, b, 2)
    commit_request(backward, a, 0)

    # Both blocks applied at once
    scheduled = np.zeros(6)
    scheduled[0:2] += 1.0
    scheduled[2:5] += 1.0
    for state in (forward, backward):
        np.testing.assert_allclose(state.scheduled, scheduled)
        np.testing.assert_allclose(state.available, 1.5 - scheduled)
        np.testing.assert_allclose(state.c_fa, 0.0)
        np.testing.assert_allclose(state.alpha, forward.alpha)
        assert state.ledger.is_consistent()
    assert not forward.open and not backward.open
