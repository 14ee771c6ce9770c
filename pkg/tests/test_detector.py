from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capstream.detector import (
    AdaptiveThresholdDetector,
    DetectorConfig,
    GestureFrame,
    extract_frame,
    initialize_offsets,
    run_detector,
    update_threshold,
)
from capstream.dsp import weighted_smoothed_difference
from capstream.errors import (
    CapacityError,
    InsufficientDataError,
    InvalidParameterError,
    OrderingError,
)
from capstream.signals import ProcessedStream
from capstream.simulate import generate_idle


def _drive(det: AdaptiveThresholdDetector, trace, start_index: int = 0):
    """Feed a (4, n) array or per-sample scalar list through the detector."""
    frames = []
    arr = np.asarray(trace, dtype=float)
    if arr.ndim == 1:
        arr = np.tile(arr, (4, 1)) * np.array([[1.0], [0.0], [0.0], [0.0]])
    for m in range(arr.shape[1]):
        frame = det.step(start_index + m, arr[:, m])
        if frame is not None:
            frames.append(frame)
    return frames


def _pulse_trace(length=1200, lo=500, hi=560, level=100.0):
    """Sensor 1 carries a clean rectangular pulse; others stay silent."""
    trace = np.zeros((4, length))
    trace[0, lo:hi] = level
    return trace


class TestInitializeOffsets:
    def test_zero_prefix(self):
        states = initialize_offsets(np.zeros((4, 100)), init_period=100, phi=20.0)
        for s in states:
            assert s.offset == 0.0
            assert s.threshold == 20.0
            assert s.start == 0 and s.end == 0

    def test_mean_prefix(self):
        prefix = np.full((4, 50), 3.5)
        states = initialize_offsets(prefix, init_period=50, phi=20.0)
        assert all(s.offset == pytest.approx(3.5) for s in states)

    def test_idle_offset_matches_direct_mean(self, params, dsp_cfg):
        idle = generate_idle(6, 1200, params, 53.0)
        proc = weighted_smoothed_difference(idle, dsp_cfg)
        states = initialize_offsets(proc, init_period=530, phi=20.0)
        expected = proc.values[:, :530].mean(axis=1)
        for s, e in zip(states, expected):
            assert s.offset == pytest.approx(e, abs=1e-12)

    def test_insufficient_prefix(self):
        with pytest.raises(InsufficientDataError):
            initialize_offsets(np.zeros((4, 10)), init_period=100, phi=20.0)


class TestUpdateThreshold:
    def test_zero_window(self):
        assert update_threshold(np.zeros(318), offset=0.0, phi=20.0, update_period=318) == 20.0

    def test_mean_five_window(self):
        window = np.full(318, 5.0)
        assert update_threshold(window, offset=0.0, phi=20.0, update_period=318) == pytest.approx(25.0)

    def test_idle_window_stays_near_floor(self, params, dsp_cfg):
        # Frozen seed with non-negative offset-subtracted window means.
        idle = generate_idle(6, 2000, params, 53.0)
        proc = weighted_smoothed_difference(idle, dsp_cfg)
        lam = proc.values[:, :530].mean(axis=1)
        for s in range(4):
            delta = update_threshold(proc.values[s, 600:918], lam[s], 20.0, 318)
            assert 20.0 <= delta <= 20.0 + 0.5 * params.idle_sigma

    def test_wrong_window_length(self):
        with pytest.raises(InvalidParameterError):
            update_threshold(np.zeros(100), 0.0, 20.0, 318)


class TestStep:
    def test_single_pulse_frame_arithmetic(self):
        # Up-crossing at 500, down-crossing at 560 with pads 70/70.
        det = AdaptiveThresholdDetector(DetectorConfig(init_period=200))
        frames = _drive(det, _pulse_trace())
        assert [(f.start, f.end) for f in frames] == [(430, 630)]
        assert frames[0].k == 1
        assert frames[0].channels.shape == (4, 201)

    def test_idle_stream_emits_nothing(self, params, dsp_cfg, det_cfg):
        idle = generate_idle(12, int(60 * 53), params, 53.0)
        frames = run_detector(idle, dsp_cfg, det_cfg)
        assert frames == []

    def test_saturation_recomputes_and_stays_silent(self):
        # Dwell above threshold far beyond the safety period: the pending
        # detection is voided, the threshold is recomputed, and nothing is
        # emitted during or after the contact plateau.
        cfg = DetectorConfig(init_period=200)
        det = AdaptiveThresholdDetector(cfg)
        rng = np.random.default_rng(0)
        length = 3000
        trace = np.zeros((4, length))
        trace[0, 500:1500] = 500.0 + rng.normal(0, 2.0, 1000)
        frames = _drive(det, trace)
        assert frames == []
        assert det.diagnostics["safety_recomputes"] >= 1

    def test_saturation_recovers_for_later_gestures(self):
        cfg = DetectorConfig(init_period=200)
        det = AdaptiveThresholdDetector(cfg)
        trace = np.zeros((4, 4500))
        trace[0, 500:1500] = 500.0  # contact plateau
        trace[0, 3000:3060] = 100.0  # clean gesture afterwards
        frames = _drive(det, trace)
        assert [(f.start, f.end) for f in frames] == [(2930, 3130)]

    def test_frames_overlap_exactly_one_event(self, session_10, dsp_cfg, det_cfg):
        frames = run_detector(session_10.stream, dsp_cfg, det_cfg)
        assert len(frames) == len(session_10.events)
        # Oracle: brute-force interval intersection per frame.
        for frame in frames:
            hits = [
                ev
                for ev in session_10.events
                if min(frame.end, ev.end) - max(frame.start, ev.start) >= 0
            ]
            assert len(hits) == 1

    def test_out_of_order_feed_rejected(self):
        det = AdaptiveThresholdDetector(DetectorConfig(init_period=10))
        det.step(0, (0, 0, 0, 0))
        det.step(1, (0, 0, 0, 0))
        with pytest.raises(OrderingError):
            det.step(1, (0, 0, 0, 0))
        with pytest.raises(OrderingError):
            det.step(5, (0, 0, 0, 0))

    def test_replay_determinism(self, session_10, dsp_cfg, det_cfg):
        a = run_detector(session_10.stream, dsp_cfg, det_cfg)
        b = run_detector(session_10.stream, dsp_cfg, det_cfg)
        assert [(f.start, f.end) for f in a] == [(f.start, f.end) for f in b]
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa.channels, fb.channels)

    def test_no_update_while_frame_open(self):
        # Offset/threshold must stay quiescent from the upward crossing to
        # the frame commit (no safety events in this trace).
        cfg = DetectorConfig(init_period=200, update_period=50)
        det = AdaptiveThresholdDetector(cfg)
        trace = _pulse_trace(length=1200, lo=500, hi=540)
        lam_during, delta_during = [], []
        for m in range(trace.shape[1]):
            det.step(m, trace[:, m])
            state = det.sensor_state(1)
            if state.start != 0 or state.end != 0:
                lam_during.append(state.offset)
                delta_during.append(state.threshold)
        assert len(set(lam_during)) == 1
        assert len(set(delta_during)) == 1
        assert det.diagnostics["safety_recomputes"] == 0

    def test_start_underflow_clamped(self):
        cfg = DetectorConfig(init_period=10, warmup_period=15, pre_pad=70, post_pad=5)
        det = AdaptiveThresholdDetector(cfg)
        trace = np.zeros((4, 120))
        trace[0, 30:40] = 100.0
        frames = _drive(det, trace)
        assert det.diagnostics["clamped_starts"] == 1
        assert frames and frames[0].start == 1

    def test_downward_without_upward_is_ignored(self):
        # The signal goes high inside the initialization window and falls
        # later: the downward crossing has no recorded start and must not
        # produce a frame.
        cfg = DetectorConfig(init_period=100, warmup_period=110)
        det = AdaptiveThresholdDetector(cfg)
        trace = np.zeros((4, 800))
        trace[0, 50:150] = 100.0  # straddles the end of initialization
        frames = _drive(det, trace)
        assert frames == []
        assert det.diagnostics["orphan_down_crossings"] == 1

    def test_long_dwell_diagnostic(self):
        det = AdaptiveThresholdDetector(DetectorConfig(init_period=200))
        _drive(det, _pulse_trace(lo=500, hi=560))  # dwell 60 > 50
        assert det.diagnostics["long_dwells"] == 1

    def test_no_frame_without_crossing(self, session_10, dsp_cfg, det_cfg):
        processed = weighted_smoothed_difference(session_10.stream, dsp_cfg)
        det = AdaptiveThresholdDetector(det_cfg)
        base = processed.start_index
        for m in range(processed.values.shape[1]):
            frame = det.step(base + m, processed.values[:, m])
            if frame is None:
                continue
            deltas = det.thresholds()
            inner = frame.channels[
                :, det_cfg.pre_pad : frame.channels.shape[1] - det_cfg.post_pad
            ]
            assert (inner.max(axis=1) > deltas).any()

    def test_detection_closing_during_warmup_is_discarded(self):
        # A crossing pair entirely inside warm-up must neither emit nor
        # wedge the sensor open for later gestures.
        cfg = DetectorConfig(init_period=50, warmup_period=600)
        det = AdaptiveThresholdDetector(cfg)
        trace = np.zeros((4, 2000))
        trace[0, 100:140] = 100.0  # closes at 210, still inside warm-up
        trace[0, 800:840] = 100.0
        frames = _drive(det, trace)
        assert [(f.start, f.end) for f in frames] == [(730, 910)]

    def test_paper_literal_merge_takes_last_sensor(self):
        cfg = DetectorConfig(init_period=200, merge_policy="paper-literal")
        det = AdaptiveThresholdDetector(cfg)
        trace = np.zeros((4, 1200))
        trace[0, 500:540] = 100.0  # sensor 1
        trace[3, 510:550] = 100.0  # sensor 4 crosses later
        frames = _drive(det, trace)
        assert [(f.start, f.end) for f in frames] == [(440, 620)]

    def test_union_merge_covers_both_sensors(self):
        cfg = DetectorConfig(init_period=200, merge_policy="union")
        det = AdaptiveThresholdDetector(cfg)
        trace = np.zeros((4, 1200))
        trace[0, 500:540] = 100.0
        trace[3, 510:550] = 100.0
        frames = _drive(det, trace)
        assert [(f.start, f.end) for f in frames] == [(430, 620)]


class TestThresholdFloorProperty:
    @given(st.integers(0, 10_000))
    @settings(max_examples=100, deadline=None)
    def test_delta_at_least_phi_for_nonnegative_means(self, seed):
        rng = np.random.default_rng(seed)
        window = rng.normal(2.0, 1.0, size=318)
        offset = min(window.mean(), 2.0)  # keeps the subtracted mean >= 0
        delta = update_threshold(window, offset, 20.0, 318)
        assert delta >= 20.0


class TestExtractFrame:
    def _history(self, n=800, base=5):
        rng = np.random.default_rng(2)
        return ProcessedStream(
            sampling_rate=53.0, start_index=base, values=rng.normal(3, 1, size=(4, n))
        )

    def test_span_length(self):
        hist = self._history()
        frame = extract_frame(hist, 430, 630, np.zeros(4))
        assert frame.channels.shape == (4, 201)

    def test_zero_offsets_identity(self):
        hist = self._history()
        frame = extract_frame(hist, 100, 150, np.zeros(4))
        np.testing.assert_array_equal(frame.channels, hist.values[:, 95:146])

    def test_offsets_subtracted(self):
        hist = self._history()
        lam = np.array([1.0, 2.0, 3.0, 4.0])
        frame = extract_frame(hist, 100, 150, lam)
        np.testing.assert_allclose(frame.channels, hist.values[:, 95:146] - lam[:, None])

    def test_evicted_range_rejected(self):
        hist = self._history(n=100, base=500)
        with pytest.raises(CapacityError):
            extract_frame(hist, 100, 200, np.zeros(4))

    def test_emitted_frames_have_zero_centred_margin(self, session_10, dsp_cfg, det_cfg):
        # Oracle: the pre-gesture padding of every emitted frame averages
        # near zero (well inside +-phi).
        frames = run_detector(session_10.stream, dsp_cfg, det_cfg)
        assert frames
        for frame in frames:
            margin = frame.channels[:, : det_cfg.pre_pad]
            assert abs(margin.mean()) <= det_cfg.phi


class TestDetectorConfig:
    def test_from_rate_reference_values(self):
        cfg = DetectorConfig.from_rate(53.0)
        assert cfg.update_period == 318
        assert cfg.init_period == 530
        assert cfg.warmup_period == 424
        assert cfg.safety_period == 159

    def test_default_capacity(self):
        cfg = DetectorConfig()
        assert cfg.capacity == 2 * (70 + 70 + 159 + 318)

    def test_invalid_values(self):
        with pytest.raises(InvalidParameterError):
            DetectorConfig(phi=0.0)
        with pytest.raises(InvalidParameterError):
            DetectorConfig(merge_policy="max")

    def test_frame_invariants(self):
        with pytest.raises(InvalidParameterError):
            GestureFrame(k=1, start=10, end=10)
        with pytest.raises(InvalidParameterError):
            GestureFrame(k=1, start=0, end=10, channels=np.zeros((4, 5)))


class TestIdleZeroSetting:
    def test_offset_tracks_window_mean(self, params, dsp_cfg):
        # After each periodic refresh the offset equals the mean of the
        # window it was computed from, so the offset-subtracted window mean
        # vanishes (far below 0.05 * idle_sigma).
        idle = generate_idle(2, 3500, params, 53.0)
        processed = weighted_smoothed_difference(idle, dsp_cfg)
        cfg = DetectorConfig()
        det = AdaptiveThresholdDetector(cfg)
        base = processed.start_index
        boundaries = []
        for m in range(processed.values.shape[1]):
            j = base + m
            det.step(j, processed.values[:, m])
            if det.initialized and j % cfg.update_period == 0:
                boundaries.append((j, det.offsets().copy()))
        assert len(boundaries) >= 2
        for j, lam in boundaries[1:]:
            lo = j - cfg.update_period + 1 - base
            window = processed.values[:, lo : j - base + 1]
            gap = np.abs(window.mean(axis=1) - lam)
            assert np.all(gap <= 0.05 * params.idle_sigma)
