import math

import numpy as np
import pytest

from efmbench.harness import (
    ActionChunk,
    EnsembleBuffer,
    ProtocolError,
    avg_fz_max,
    fz_range_mean,
    fz_reduction,
    run_trials,
    success_rate_percent,
    temporal_ensemble,
    trial_seeds,
)
from efmbench.harness.protocol import (
    InProcessEndpoint,
    PROTOCOL_VERSION,
    decode_message,
    encode_message,
    parse_action_reply,
)


def scalar_chunk(value, issued_at, dim0=0):
    """Chunk whose rows equal a valid neutral action, with actions[:, dim0] set."""
    row = np.zeros(16)
    row[3] = 1.0  # left quat w
    row[11] = 1.0  # right quat w
    row[dim0] = value
    return ActionChunk(np.tile(row, (8, 1)), issued_at)


class TestTemporalEnsemble:
    def test_single_prediction_passthrough(self):
        buf = EnsembleBuffer(m=0.7)
        buf.push(scalar_chunk(0.42, 0))
        out = temporal_ensemble(buf, 3)
        assert out[0] == pytest.approx(0.42, abs=1e-12)

    def test_mean_of_equals(self):
        buf = EnsembleBuffer(m=0.0)
        buf.push(scalar_chunk(0.3, 0))
        buf.push(scalar_chunk(0.3, 2))
        out = temporal_ensemble(buf, 4)
        assert out[0] == pytest.approx(0.3, abs=1e-12)

    def test_closed_form_weights(self):
        # ages {1, 0} with m=1: (0*e^-1 + 1*1)/(e^-1 + 1)... targets 0 and 1:
        # prediction issued at t-1 has value 0, the fresh one value 1.
        buf = EnsembleBuffer(m=1.0)
        buf.push(scalar_chunk(0.0, 0))
        buf.push(scalar_chunk(1.0, 1))
        out = temporal_ensemble(buf, 1)
        expect = (0.0 * math.exp(-1.0) + 1.0 * 1.0) / (math.exp(-1.0) + 1.0)
        assert out[0] == pytest.approx(expect, abs=1e-12)
        assert expect == pytest.approx(0.7310585786300049)
        # Mirror case from the weight arithmetic: values {0, 1} with the
        # old prediction carrying value 1.
        buf = EnsembleBuffer(m=1.0)
        buf.push(scalar_chunk(1.0, 0))
        buf.push(scalar_chunk(0.0, 1))
        out = temporal_ensemble(buf, 1)
        expect = (1.0 * math.exp(-1.0)) / (math.exp(-1.0) + 1.0)
        assert out[0] == pytest.approx(expect, abs=1e-12)
        assert expect == pytest.approx(0.2689414213699951, abs=1e-12)

    def test_limit_large_m_recovers_newest(self):
        buf = EnsembleBuffer(m=50.0)
        buf.push(scalar_chunk(-0.5, 0))
        buf.push(scalar_chunk(0.9, 4))
        out = temporal_ensemble(buf, 4)
        assert abs(out[0] - 0.9) < 1e-6

    def test_m_zero_is_arithmetic_mean(self):
        buf = EnsembleBuffer(m=0.0)
        vals = [0.1, 0.5, 0.6]
        for k, v in enumerate(vals):
            buf.push(scalar_chunk(v, k))
        out = temporal_ensemble(buf, 2)
        assert out[0] == pytest.approx(np.mean(vals), abs=1e-15)

    def test_eviction_and_empty_error(self):
        buf = EnsembleBuffer()
        buf.push(scalar_chunk(1.0, 0))
        with pytest.raises(ProtocolError):
            temporal_ensemble(buf, 8)  # chunk covers t in [0, 8)

    def test_quaternion_renormalized(self):
        row = np.zeros(16)
        row[3:7] = [1.0, 0, 0, 0]
        row[11:15] = [0.8, 0.6, 0, 0]  # non-unit on purpose is invalid; build two valid
        a = np.tile(row, (8, 1))
        a[:, 11:15] = [1, 0, 0, 0]
        b = a.copy()
        b[:, 11:15] = [0, 1, 0, 0]
        buf = EnsembleBuffer(m=0.0)
        buf.push(ActionChunk(a, 0))
        buf.push(ActionChunk(b, 0))
        out = temporal_ensemble(buf, 0)
        q = out[11:15]
        assert np.linalg.norm(q) == pytest.approx(1.0, abs=1e-12)
        assert q[0] >= 0

    def test_bad_chunk_shapes_rejected(self):
        with pytest.raises(ProtocolError):
            ActionChunk(np.zeros((7, 16)), 0)
        with pytest.raises(ProtocolError):
            ActionChunk(np.full((8, 16), np.nan), 0)


class TestMetrics:
    def test_success_rate_table_precision(self):
        assert success_rate_percent(23, 30) == 76.7
        assert success_rate_percent(0, 30) == 0.0
        assert success_rate_percent(30, 30) == 100.0
        assert success_rate_percent(2, 3) == 66.7
        assert success_rate_percent(1, 8) == 12.5

    def _episodes(self, traces, arm="right"):
        class Ep:
            def __init__(self, z):
                z = np.asarray(z, dtype=np.float32)
                n = len(z)
                self.operating_arm = arm
                self.wrench_right = np.zeros((n, 6), dtype=np.float32)
                self.wrench_left = np.zeros((n, 6), dtype=np.float32)
                if arm == "right":
                    self.wrench_right[:, 2] = z
                else:
                    self.wrench_left[:, 2] = z

        return [Ep(t) for t in traces]

    def test_avg_fz_max_mean_of_extrema(self):
        eps = self._episodes([[0, 1, 3.0, 2], [4.0, 1, 0, 0]])
        assert avg_fz_max(eps, "max") == pytest.approx(3.5, abs=1e-12)

    def test_signed_min_convention(self):
        eps = self._episodes([[-16, -2, 0], [-17, -1, 0]])
        assert avg_fz_max(eps, "min") == pytest.approx(-16.5, abs=1e-12)

    def test_zero_trace(self):
        eps = self._episodes([[0.0, 0.0]])
        assert avg_fz_max(eps, "max") == 0.0

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            avg_fz_max([], "max")
        with pytest.raises(ValueError):
            fz_range_mean([])

    def test_fz_reduction_arithmetic(self):
        # Magnitude matches the headline arithmetic; the sign goes negative
        # when the variant's peak is smaller in magnitude.
        r = fz_reduction(3.5, -0.2, 12.76)
        assert abs(r) == pytest.approx(28.997, abs=0.01)
        assert r < 0
        assert fz_reduction(1.0, 1.0, 10.0) == 0.0
        r2 = fz_reduction(0.0, 2.2, 10.0)
        assert r2 == pytest.approx(22.0, abs=1e-12)
        with pytest.raises(ValueError):
            fz_reduction(1.0, 2.0, 0.0)

    def test_fz_range_mean(self):
        eps = self._episodes([[-1, 2], [0, 6]])
        assert fz_range_mean(eps) == pytest.approx((3 + 6) / 2, abs=1e-12)


class TestProtocol:
    def test_version_mandatory(self):
        with pytest.raises(ProtocolError, match="protocol_version"):
            decode_message(b'{"type": "action"}')
        msg = decode_message(encode_message({"protocol_version": PROTOCOL_VERSION, "type": "x"}))
        assert msg["type"] == "x"

    def test_malformed_json(self):
        with pytest.raises(ProtocolError, match="malformed"):
            decode_message(b"{nope")

    def test_action_reply_validation(self):
        with pytest.raises(ProtocolError, match="expected action"):
            parse_action_reply({"protocol_version": 1, "type": "reset"})
        with pytest.raises(ProtocolError, match="policy error"):
            parse_action_reply({"protocol_version": 1, "type": "error", "message": "boom"})
        chunk, force = parse_action_reply(
            {
                "protocol_version": 1,
                "type": "action",
                "chunk": np.zeros((8, 16)).tolist(),
                "force_pred": np.zeros((8, 6)).tolist(),
            }
        )
        assert chunk.shape == (8, 16) and force.shape == (8, 6)

    def test_stdio_server_round_trip(self):
        import io

        from efmbench.harness.protocol import serve_stdio

        class Echo:
            def reset(self, msg):
                self.task = msg["task"]

            def act(self, msg):
                row = [0.0] * 16
                row[3] = row[11] = 1.0
                return {
                    "protocol_version": PROTOCOL_VERSION,
                    "type": "action",
                    "chunk": [row] * 8,
                }

        fin = io.BytesIO(
            encode_message(
                {"protocol_version": 1, "type": "reset", "task": "box_push", "seed": 0}
            )
            + encode_message({"protocol_version": 1, "type": "obs", "t": 0})
            + encode_message({"protocol_version": 1, "type": "bogus"})
        )
        fout = io.BytesIO()
        serve_stdio(Echo(), stdin=fin, stdout=fout)
        lines = fout.getvalue().splitlines()
        assert len(lines) == 2  # reset gets no reply
        first = decode_message(lines[0])
        assert first["type"] == "action"
        second = decode_message(lines[1])
        assert second["type"] == "error"

    def test_cmd_endpoint_with_expert_process(self):
        from efmbench.harness.protocol import CmdEndpoint, obs_message, reset_message
        from efmbench.perception.observe import Observation

        ep = CmdEndpoint("python3 -m efmbench.harness.expert_policy", timeout=120.0)
        try:
            ep.reset(reset_message("box_push", "Push the box to the lined area",
                                   "area_ee", 3, "right", "symbolic"))
            obs = Observation(
                state=np.zeros(16), wrench_left=np.zeros(6), wrench_right=np.zeros(6),
                instruction="", symbolic={},
            )
            reply = ep.query(obs_message(0, obs))
            chunk, force = parse_action_reply(reply)
            assert chunk.shape == (8, 16)
            assert force.shape == (8, 6)
        finally:
            ep.close()


class TestRunner:
    def test_trial_seeds_fixed_and_distinct(self):
        a = trial_seeds("box_push")
        b = trial_seeds("box_push")
        assert a == b
        assert len(set(a)) == 30
        assert trial_seeds("cup_hang") != a

    def test_expert_endpoint_succeeds(self):
        from efmbench.harness.protocol import open_endpoint

        ep = open_endpoint("expert")
        te = run_trials(ep, "light_plug", n_trials=3)
        assert te.successes == 3
        assert te.success_rate == 100.0

    def test_protocol_violation_counted(self):
        class Broken:
            def reset(self, msg):
                pass

            def act(self, msg):
                return {"protocol_version": 1, "type": "action", "chunk": [[0.0] * 16] * 3}

        te = run_trials(InProcessEndpoint(Broken()), "box_push", n_trials=2)
        assert te.successes == 0
        assert te.failure_histogram == {"protocol_error": 2}

    def test_random_endpoint_fails_hard_task(self):
        rng = np.random.default_rng(0)

        class RandomPolicy:
            def reset(self, msg):
                pass

            def act(self, msg):
                chunk = rng.normal(0, 0.1, size=(8, 16))
                chunk[:, 3:7] = [1, 0, 0, 0]
                chunk[:, 11:15] = [1, 0, 0, 0]
                chunk[:, [7, 15]] = 1.0
                return {"protocol_version": 1, "type": "action", "chunk": chunk.tolist()}

        te = run_trials(InProcessEndpoint(RandomPolicy()), "charger_plug", n_trials=2)
        assert te.successes == 0

    def test_report_reproducible(self):
        from efmbench.harness.protocol import open_endpoint
        from efmbench.harness.runner import EvalReport

        reports = []
        for _ in range(2):
            ep = open_endpoint("expert")
            te = run_trials(ep, "box_push", n_trials=2)
            reports.append(EvalReport("max", {"box_push": te}).to_json())
        assert reports[0] == reports[1]

    def test_replay_perturbed_action_diverges(self):
        from efmbench.expert import demonstrate
        from efmbench.harness import replay_episode
        from efmbench.tasks import instantiate_task

        inst = instantiate_task("box_push", 2)
        ep = demonstrate(inst, "area_ee", 2)
        div, _ = replay_episode(ep)
        assert div == 0.0
        ep.actions[5, 0] += 0.05
        div2, _ = replay_episode(ep)
        assert div2 > 0.0
