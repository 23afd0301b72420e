import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from haarsense.errors import SignalFormatError
from haarsense.signals import (Impulse, ImpulseTrain, SampledSignal, Sinusoid, Waveform,
                               generate, impulse_template, load_csv,
                               random_impulse_train, save_csv)


def test_zero_amplitude_sinusoid():
    s = generate(Sinusoid(0.0, 10.0, 1.3), 10.0, 64)
    np.testing.assert_array_equal(s.samples, 0.0)


def test_quarter_phase_is_cosine():
    T = 32.0
    s = generate(Sinusoid(1.0, T, math.pi / 2), T, 128)
    np.testing.assert_allclose(s.samples, np.cos(2 * np.pi * s.times / T), atol=1e-15)


def test_midpoint_grid():
    s = generate(Sinusoid(1.0, 8.0), 8.0, 4)
    np.testing.assert_array_equal(s.times, [1.0, 3.0, 5.0, 7.0])
    assert s.dt == 2.0


def test_phase_periodicity():
    a = generate(Sinusoid(2.0, 5.0, 0.4), 10.0, 100)
    b = generate(Sinusoid(2.0, 5.0, 0.4 + 2 * math.pi), 10.0, 100)
    np.testing.assert_allclose(a.samples, b.samples, atol=1e-12)


def test_template_peak_and_zero_area():
    w = 3.0
    assert impulse_template(0.0, w) == pytest.approx(1.0)
    s = np.linspace(0, 5 * w, 2001)
    assert impulse_template(s, w).max() == pytest.approx(1.0)
    area, _ = quad(lambda u: float(impulse_template(u, w)), 0, 60 * w, points=[w / 5, w],
                   limit=200)
    assert abs(area) < 1e-10


def test_template_is_causal_and_biphasic():
    w = 2.0
    assert impulse_template(-0.01, w) == 0.0
    tail = impulse_template(np.linspace(w, 4 * w, 50), w)
    assert np.all(tail < 0)


def test_single_impulse_integrates_to_zero():
    T = 400.0
    s = generate(ImpulseTrain((Impulse(T / 2, 1, 1.0, 2.0),)), T, 2 ** 17)
    # sampled quadrature over the full window; the template tail at T is ~e**-100
    assert abs(np.sum(s.samples) * s.dt) < 1e-3


def test_polarity_and_amplitude():
    T = 20.0
    pos = generate(ImpulseTrain((Impulse(5.0, 1, 2.5, 1.0),)), T, 400)
    neg = generate(ImpulseTrain((Impulse(5.0, -1, 2.5, 1.0),)), T, 400)
    np.testing.assert_array_equal(pos.samples, -neg.samples)
    assert pos.samples.max() <= 2.5 and pos.samples.max() > 2.0


def test_train_is_sum_of_events():
    T = 64.0
    ev = (Impulse(10.0, 1, 1.0, 2.0), Impulse(40.0, -1, 3.0, 1.0))
    both = generate(ImpulseTrain(ev), T, 1024).samples
    parts = sum(generate(ImpulseTrain((e,)), T, 1024).samples for e in ev)
    np.testing.assert_allclose(both, parts, atol=1e-15)


@pytest.mark.parametrize("bad", [
    lambda: Sinusoid(-1.0, 1.0), lambda: Sinusoid(1.0, 0.0),
    lambda: Impulse(1.0, width=0.0), lambda: Impulse(1.0, polarity=2),
    lambda: Waveform(), lambda: Waveform(values=(1.0,), path="x.csv"),
])
def test_spec_validation(bad):
    with pytest.raises(SignalFormatError):
        bad()


@pytest.mark.parametrize("center", [-1.0, 10.0])
def test_event_outside_window(center):
    with pytest.raises(SignalFormatError):
        generate(ImpulseTrain((Impulse(center),)), 10.0, 100)


def test_generate_argument_checks():
    with pytest.raises(SignalFormatError):
        generate(Sinusoid(1.0, 1.0), 1.0, 1)
    with pytest.raises(SignalFormatError):
        generate(Sinusoid(1.0, 1.0), 0.0, 8)


def test_waveform_zero_order_hold():
    s = generate(Waveform(values=(1.0, -2.0, 3.0, 0.5)), 8.0, 16)
    np.testing.assert_array_equal(s.samples, np.repeat([1.0, -2.0, 3.0, 0.5], 4))


def test_sampled_signal_validation():
    with pytest.raises(SignalFormatError):
        SampledSignal(1.0, [1.0])
    with pytest.raises(SignalFormatError):
        SampledSignal(0.0, [1.0, 2.0])
    with pytest.raises(SignalFormatError):
        SampledSignal(1.0, [1.0, np.nan])
    s = SampledSignal(1.0, [1.0, 2.0])
    with pytest.raises(ValueError):
        s.samples[0] = 3.0


def test_block_averages():
    s = SampledSignal(1.0, np.arange(8.0))
    np.testing.assert_array_equal(s.block_averages(4), [0.5, 2.5, 4.5, 6.5])
    with pytest.raises(SignalFormatError):
        s.block_averages(3)


def test_random_train_is_seeded_and_separated():
    a = random_impulse_train(11, 4, 64.0, amplitude=2.0, width=4.0)
    b = random_impulse_train(11, 4, 64.0, amplitude=2.0, width=4.0)
    assert a == b
    c = np.array([e.center for e in a.events])
    assert np.all(np.diff(c) >= 12.0)
    assert c.min() >= 4.0 and c.max() < 64.0 - 8.0


def test_random_train_that_cannot_fit():
    with pytest.raises(SignalFormatError):
        random_impulse_train(0, 10, 20.0, amplitude=1.0, width=4.0)


# --- CSV ----------------------------------------------------------------------------

def test_csv_round_trip_is_bitwise(tmp_path):
    rng = np.random.default_rng(1)
    s = SampledSignal(37.3, rng.normal(size=256) * 1e3)
    p = tmp_path / "s.csv"
    save_csv(s, p)
    back = load_csv(p)
    np.testing.assert_array_equal(back.samples, s.samples)
    assert back.duration == pytest.approx(s.duration, rel=1e-14)
    assert p.read_text().splitlines()[0] == "t_us,b_uT"


def _write(path, text):
    path.write_text(text)
    return path


def test_csv_three_columns(tmp_path):
    p = _write(tmp_path / "a.csv", "t_us,b_uT\n0.5,1,2\n1.5,2,3\n")
    with pytest.raises(SignalFormatError):
        load_csv(p)


def test_csv_jittered_grid(tmp_path):
    t = (np.arange(16) + 0.5)
    t[7] += 1e-3
    body = "".join(f"{a:.17g},0\n" for a in t)
    with pytest.raises(SignalFormatError, match="spacing"):
        load_csv(_write(tmp_path / "j.csv", "t_us,b_uT\n" + body))


def test_csv_non_monotonic(tmp_path):
    p = _write(tmp_path / "m.csv", "t_us,b_uT\n0.5,0\n2.5,0\n1.5,0\n")
    with pytest.raises(SignalFormatError, match="increasing"):
        load_csv(p)


@pytest.mark.parametrize("text", ["", "time,b\n0.5,1\n1.5,1\n", "t_us,b_uT\n0.5,x\n1.5,1\n",
                                  "t_us,b_uT\n0.5,1\n", "t_us,b_uT\n0.0,1\n1.0,1\n"])
def test_csv_format_errors(tmp_path, text):
    with pytest.raises(SignalFormatError):
        load_csv(_write(tmp_path / "e.csv", text))


def test_waveform_from_file(tmp_path):
    p = tmp_path / "w.csv"
    save_csv(SampledSignal(4.0, [1.0, 2.0, 3.0, 4.0]), p)
    s = generate(Waveform(path=str(p)), 4.0, 8)
    np.testing.assert_array_equal(s.samples, np.repeat([1.0, 2.0, 3.0, 4.0], 2))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=64),
       st.floats(1e-3, 1e4))
def test_csv_round_trip_property(tmp_path_factory, values, duration):
    p = tmp_path_factory.mktemp("rt") / "s.csv"
    s = SampledSignal(duration, values)
    save_csv(s, p)
    np.testing.assert_array_equal(load_csv(p).samples, s.samples)
