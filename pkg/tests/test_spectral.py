import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from powerstab import (NoACContent, PowerTrace, analyze, band_energy, band_energy_fraction, dominant_frequency,
                       gen_square_wave)
from powerstab.spectral import hann, next_pow2, save_spectrum_csv

from helpers import random_trace
from oracles import naive_spectrum


def sine(freq, dt, duration, amp=100.0, offset=500.0):
    t = np.arange(int(round(duration / dt))) * dt
    return PowerTrace(dt, offset + amp * np.sin(2 * np.pi * freq * t))


def test_window_and_padding_helpers():
    np.testing.assert_allclose(hann(4), [0.0, 0.5, 1.0, 0.5])
    assert [next_pow2(n) for n in (1, 16, 17, 1000, 1024)] == [1, 16, 32, 1024, 1024]


@pytest.mark.parametrize("seed", range(8))
def test_matches_naive_dft(seed):
    tr = random_trace(np.random.default_rng(seed))
    spec = analyze(tr)
    freqs, mags = naive_spectrum(tr.samples, tr.dt)
    np.testing.assert_allclose(spec.freqs_hz, freqs, rtol=1e-12)
    assert np.max(np.abs(spec.magnitudes - mags)) <= 1e-9 * np.max(mags)
    assert spec.n_samples == len(tr) and spec.window == "hann"


def test_frequency_axis():
    spec = analyze(PowerTrace(0.01, np.arange(100.0)))
    assert spec.nfft == 128
    assert spec.freqs_hz[0] == 0.0 and spec.freqs_hz[-1] == pytest.approx(50.0)
    assert spec.bin_width_hz == pytest.approx(1 / 1.28)
    assert len(spec.freqs_hz) == len(spec.magnitudes) == 65


def test_constant_has_no_ac():
    spec = analyze(PowerTrace(0.01, [500.0] * 1000))
    assert np.all(spec.magnitudes[1:] < 1e-9 * 500)
    assert not spec.has_ac_content()
    with pytest.raises(NoACContent):
        band_energy_fraction(spec, 0.1, 20)
    with pytest.raises(NoACContent):
        dominant_frequency(spec, 0.01)


def test_too_short():
    with pytest.raises(ValueError):
        analyze(PowerTrace(0.01, np.arange(15.0)))


def test_half_hertz_sine():
    spec = analyze(sine(0.5, 0.01, 60))
    assert abs(dominant_frequency(spec, 0.01) - 0.5) <= spec.bin_width_hz
    assert band_energy_fraction(spec, 0.1, 20) >= 0.99


def test_thirty_hertz_sine_out_of_band():
    spec = analyze(sine(30, 0.01, 60))
    assert band_energy_fraction(spec, 0.1, 20) <= 0.01


def test_on_bin_amplitude_reads_true_amplitude():
    spec = analyze(sine(2.0, 1 / 128, 8, amp=37.0))
    k = int(np.argmax(spec.magnitudes[1:])) + 1
    assert spec.freqs_hz[k] == 2.0
    assert spec.magnitudes[k] == pytest.approx(37.0, rel=1e-12)


def test_square_wave_odd_harmonics():
    spec = analyze(gen_square_wave(20, 0.5, 1000, 300, 400, 0.1))
    f = spec.freqs_hz

    def near(freq):
        sel = np.abs(f - freq) <= 1.5 * spec.bin_width_hz
        return np.max(spec.magnitudes[sel])

    assert abs(dominant_frequency(spec, 0.01) - 0.05) <= spec.bin_width_hz
    assert near(0.15) > 10 * near(0.10)
    assert near(0.25) > 10 * near(0.20)
    assert near(0.05) / near(0.15) == pytest.approx(3.0, rel=0.1)


def test_tie_breaks_low():
    dt, n = 1 / 128, 1024
    t = np.arange(n) * dt
    tr = PowerTrace(dt, 500 + 50 * np.sin(2 * np.pi * 1 * t) + 50 * np.sin(2 * np.pi * 2 * t))
    assert dominant_frequency(analyze(tr)) == 1.0
    tr2 = PowerTrace(dt, 500 + 50 * np.sin(2 * np.pi * 1 * t) + 51 * np.sin(2 * np.pi * 2 * t))
    assert dominant_frequency(analyze(tr2)) == 2.0


def test_dominant_needs_bins():
    spec = analyze(sine(1, 0.01, 10))
    with pytest.raises(ValueError):
        dominant_frequency(spec, 60.0)


@pytest.mark.parametrize("lo, hi", [(0, 1), (2, 1), (1, 60)])
def test_bad_band(lo, hi):
    with pytest.raises(ValueError):
        band_energy_fraction(analyze(sine(1, 0.01, 10)), lo, hi)


def test_metrics():
    tr = PowerTrace(0.01, 500 + 100 * np.sin(2 * np.pi * np.arange(6000) * 0.01) + 50 * np.sin(2 * np.pi * 30 * np.arange(6000) * 0.01))
    spec = analyze(tr)
    e = band_energy_fraction(spec, 0.1, 20)
    a = band_energy_fraction(spec, 0.1, 20, "amplitude")
    p = band_energy_fraction(spec, 0.1, 20, "peak")
    assert 0 < p <= e <= 1 and 0 < a <= 1
    assert e == pytest.approx(0.8, abs=0.01)
    with pytest.raises(ValueError):
        band_energy_fraction(spec, 0.1, 20, "rms")
    assert band_energy(spec, 0.1, 20) == pytest.approx(e * spec.ac_energy)


@settings(max_examples=60, deadline=None)
@given(x=arrays(np.float64, st.integers(16, 600), elements=st.floats(0, 1e4)))
def test_parseval_and_full_band(x):
    spec = analyze(PowerTrace(0.01, x))
    y = (x - x.mean()) * hann(x.size)
    s = hann(x.size).sum()
    expected = 2 * (spec.nfft * np.sum(y ** 2) - np.sum(y) ** 2) / s ** 2
    assert spec.ac_energy == pytest.approx(expected, rel=1e-6, abs=1e-9 * max(1.0, x.max()) ** 2)
    if spec.has_ac_content():
        assert band_energy_fraction(spec, 1e-9, spec.nyquist_hz) == pytest.approx(1.0)


def test_spectrum_csv(tmp_path):
    p = tmp_path / "s.csv"
    save_spectrum_csv(analyze(sine(1, 0.01, 1.28)), p)
    lines = p.read_text().splitlines()
    assert lines[0] == "freq_hz,magnitude" and len(lines) == 1 + 65
