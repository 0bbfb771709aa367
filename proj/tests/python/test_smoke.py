# Copyright 2026 The powerbench Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import io
import json
import os
import subprocess
import sys
import time

import pytest

import powerbench
from powerbench.adapters import (
    AdapterStateError,
    SyntheticWorkloadSpec,
    TrainerAdapter,
    run_synthetic,
)

SOURCE = os.environ.get("POWERBENCH_SOURCE_DIR", os.path.join(os.path.dirname(__file__), "..", ".."))
REPLAY = [os.path.join(SOURCE, "data", "replay", f) for f in ("table3_cv.csv", "table4_llm.csv")]


def test_profiles_and_operating_point():
    assert "h100-like" in powerbench.builtin_profile_names()
    op = powerbench.simulate_operating_point("h100-like", 700.0)
    assert op["power_w"] == pytest.approx(700.0)
    assert op["sm_clock_mhz"] == pytest.approx(1980.0)


def test_plan_caps():
    assert powerbench.plan_caps("h100-like") == [200, 300, 400, 500, 600, 700]
    assert powerbench.plan_caps("mi300x-like")[-1] == 750


def test_energy_and_enforcement():
    t = [0, 5_000_000_000, 10_000_000_000]
    assert powerbench.integrate_energy(t, [100, 100, 100], 0, t[-1]) == pytest.approx(1000.0)
    enforced, excess = powerbench.enforcement_verdict(300, 455)
    assert not enforced
    assert excess == pytest.approx(0.5167, abs=1e-4)


def test_errors_are_translated():
    with pytest.raises(powerbench.PowerbenchError, match="parse-error"):
        powerbench.parse_event_line('{"ev":"batch_end","seq":7,"ep')


def test_analysis_primitives():
    assert powerbench.pareto_front([(9, 6), (9, 4), (12, 4)]) == [0, 2]
    assert powerbench.find_efficiency_peak([200, 300, 400], [3.7457, 4.0394, 3.3553]) == (300, 4.0394)
    assert powerbench.check_unimodal([200, 300, 400, 500], [1, 3, 1, 3]) == (False, 1)
    assert powerbench.format_table_value(1426.0) == "1426.0"


def test_replay_peaks():
    peaks = powerbench.peaks(powerbench.replay_files(REPLAY))
    assert peaks[("H100", "ResNet-50")] == 300
    assert peaks[("H100", "pre-training")] == 400
    assert peaks[("H200", "pre-training")] == 500


def test_simulate():
    analysis = powerbench.simulate("h100-like", [200, 300, 400])
    assert powerbench.peaks(analysis)[("h100-like", "synthetic")] == 300


def test_run_cli():
    code, out, _ = powerbench.run_cli(["replay"] + REPLAY)
    assert code == 0
    assert "H100/ResNet-50: 300 W" in out
    code, _, err = powerbench.run_cli(["sweep", "--config", "/nowhere.json"])
    assert code == 2 and "/nowhere.json" in err


def _events(text):
    return [json.loads(line) for line in text.splitlines()]


def test_synthetic_event_count_and_conformance():
    buf = io.StringIO()
    run_synthetic(SyntheticWorkloadSpec(epochs=2, batches_per_epoch=3, samples_per_batch=10,
                                        batch_duration_s=0.001), out=buf, wait=lambda s: None)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 18
    seqs = [powerbench.parse_event_line(line)["seq"] for line in lines]
    assert seqs == sorted(set(seqs))
    assert _events(buf.getvalue())[-1]["ev"] == "run_end"


def test_synthetic_tokens_handshake():
    buf = io.StringIO()
    run_synthetic(SyntheticWorkloadSpec(epochs=1, batches_per_epoch=1, unit="tokens"), out=buf,
                  wait=lambda s: None)
    assert powerbench.parse_event_line(buf.getvalue().splitlines()[0])["unit"] == "tokens"


def test_synthetic_steady_state_through_harness():
    buf = io.StringIO()
    clock = [0]

    def fake_wait(s):
        clock[0] += int(s * 1e9)

    stamped = []

    class Stamp(io.StringIO):
        def write(self, text):
            for line in text.splitlines():
                clock[0] += 1000
                stamped.append((line, clock[0]))
            return len(text)

    run_synthetic(SyntheticWorkloadSpec(epochs=3, batches_per_epoch=4, samples_per_batch=50,
                                        batch_duration_s=0.1, first_epoch_slowdown=2.0),
                  out=Stamp(), wait=fake_wait)
    samples, active, rate = powerbench.stream_throughput(stamped, 1, 0)
    assert samples == 8 * 50
    assert rate == pytest.approx(50 / 0.1, rel=0.05)


def test_synthetic_cli_process():
    start = time.monotonic()
    proc = subprocess.run(
        [sys.executable, "-m", "powerbench.adapters", "--epochs", "2", "--batches", "2",
         "--batch-seconds", "0.01", "--first-epoch-slowdown", "2.0"],
        capture_output=True, text=True, check=True)
    assert time.monotonic() - start < 10
    lines = proc.stdout.splitlines()
    assert len(lines) == 1 + 2 * (2 + 2 * 2) + 1
    for line in lines:
        powerbench.parse_event_line(line)


def test_trainer_adapter():
    buf = io.StringIO()
    a = TrainerAdapter("resnet50", out=buf)
    a.on_epoch_begin(0)
    for _ in range(2):
        a.on_batch_begin()
        a.on_batch_end(256)
    a.on_epoch_end()
    a.finish()
    ends = [e for e in _events(buf.getvalue()) if e["ev"] == "batch_end"]
    assert [e["samples"] for e in ends] == [256, 256]

    tok = io.StringIO()
    t = TrainerAdapter("gpt", unit="tokens", out=tok)
    t.on_epoch_begin(0)
    t.on_batch_begin()
    t.on_batch_end(8192)
    assert _events(tok.getvalue())[-1]["samples"] == 8192


def test_trainer_adapter_rejects_out_of_order_hooks():
    buf = io.StringIO()
    a = TrainerAdapter("x", out=buf)
    before = buf.getvalue()
    with pytest.raises(AdapterStateError):
        a.on_batch_end(1)
    with pytest.raises(AdapterStateError):
        a.on_batch_begin()
    assert buf.getvalue() == before
    for line in buf.getvalue().splitlines():
        powerbench.parse_event_line(line)


def test_sweep_drives_the_python_adapter(tmp_path):
    config = {
        "backend": {"kind": "sim", "profile": "h100-like", "gpus_per_node": 2},
        "sweep": {
            "caps": [300, 500],
            "workload_command": [sys.executable, "-m", "powerbench.adapters", "--epochs", "3",
                                 "--batches", "3", "--batch-seconds", "0.03"],
            "sampling_interval_ms": 5,
            "settle_ms": 20,
        },
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(config))
    code, out, err = powerbench.run_cli(["sweep", "--config", str(path), "--output",
                                         str(tmp_path / "out")])
    assert code == 0, err
    assert "sweep status=completed runs=2" in out
    doc = json.loads((tmp_path / "out" / "analysis.json").read_text())
    assert len(doc["curves"][0]["points"]) == 2
