import numpy as np
import pytest

from core.errors import ConfigError
from core.schedule import TrainSchedule, random_bptt_length, stlr


def test_stlr_endpoints_and_peak():
    schedule = TrainSchedule(total_steps=100, lr_max=0.1)
    assert schedule.cut == 10
    assert stlr(0, schedule) == pytest.approx(0.1 / 32)
    assert stlr(10, schedule) == pytest.approx(0.1)
    assert stlr(100, schedule) == pytest.approx(0.1 / 32)


def test_stlr_midpoints():
    schedule = TrainSchedule(total_steps=100, lr_max=0.1, cut_frac=0.1, ratio=32)
    # p = 0.5 -> 0.1 * (1 + 0.5 * 31) / 32
    assert stlr(5, schedule) == pytest.approx(0.0515625)
    assert stlr(55, schedule) == pytest.approx(0.0515625)


def test_stlr_is_rising_then_falling():
    schedule = TrainSchedule(total_steps=200, lr_max=1.0)
    rates = [schedule.learning_rate(t) for t in range(201)]
    peak = rates.index(max(rates))
    assert peak == schedule.cut
    assert all(a < b for a, b in zip(rates[:peak], rates[1:peak + 1]))
    assert all(a > b for a, b in zip(rates[peak:], rates[peak + 1:]))


def test_short_schedule_keeps_positive_cut():
    schedule = TrainSchedule(total_steps=5, lr_max=1.0)
    assert schedule.cut == 1
    assert all(schedule.learning_rate(t) > 0 for t in range(6))


@pytest.mark.parametrize("kwargs", [
    {"total_steps": 0, "lr_max": 1.0},
    {"total_steps": 10, "lr_max": 0.0},
    {"total_steps": 10, "lr_max": 1.0, "cut_frac": 0.0},
    {"total_steps": 10, "lr_max": 1.0, "cut_frac": 1.0},
    {"total_steps": 10, "lr_max": 1.0, "ratio": 1.0},
])
def test_invalid_schedule(kwargs):
    with pytest.raises(ConfigError):
        TrainSchedule(**kwargs)


def test_step_out_of_range():
    schedule = TrainSchedule(total_steps=10, lr_max=1.0)
    with pytest.raises(ConfigError):
        schedule.learning_rate(11)
    with pytest.raises(ConfigError):
        schedule.learning_rate(-1)


def test_random_bptt_length_bounds():
    rng = np.random.default_rng(0)
    lengths = [random_bptt_length(70, rng) for _ in range(2000)]
    assert min(lengths) >= 5
    assert max(lengths) <= 140
    # 大多数窗口围绕基准长度
    assert np.mean(np.abs(np.array(lengths) - 70) <= 15) > 0.85


def test_random_bptt_length_short_base():
    rng = np.random.default_rng(1)
    lengths = {random_bptt_length(3, rng) for _ in range(500)}
    assert lengths <= set(range(3, 7))


def test_random_bptt_length_is_seeded():
    a = [random_bptt_length(20, np.random.default_rng(9)) for _ in range(3)]
    b = [random_bptt_length(20, np.random.default_rng(9)) for _ in range(3)]
    assert a == b
