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
"""Workload-side emitters of the line protocol the harness reads."""

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass

PROTOCOL_VERSION = 1
UNITS = ("images", "tokens")


@dataclass
class SyntheticWorkloadSpec:
    epochs: int = 11
    batches_per_epoch: int = 10
    samples_per_batch: int = 256
    batch_duration_s: float = 0.1
    unit: str = "images"
    first_epoch_slowdown: float = 1.0
    name: str = "synthetic"
    busy: bool = False

    def validate(self):
        if self.epochs < 1 or self.batches_per_epoch < 1:
            raise ValueError("epochs and batches_per_epoch must be >= 1")
        if self.samples_per_batch < 0:
            raise ValueError("samples_per_batch must be >= 0")
        if not self.batch_duration_s > 0:
            raise ValueError("batch_duration_s must be > 0")
        if self.first_epoch_slowdown < 1:
            raise ValueError("first_epoch_slowdown must be >= 1")
        if self.unit not in UNITS:
            raise ValueError(f"unit must be one of {UNITS}")


class EventWriter:
    """Serializes events with a strictly increasing seq, one flushed line each."""

    def __init__(self, out):
        self._out = out
        self._seq = 0

    def emit(self, ev, **fields):
        line = json.dumps({"ev": ev, "seq": self._seq, **fields}, separators=(",", ":"))
        self._out.write(line + "\n")
        self._out.flush()
        self._seq += 1


def _wait(seconds, busy):
    if not busy:
        time.sleep(seconds)
        return
    end = time.perf_counter() + seconds
    while time.perf_counter() < end:
        pass


def run_synthetic(spec, out=None, wait=None):
    """Writes a full run for spec to out (stdout by default)."""
    spec.validate()
    out = sys.stdout if out is None else out
    wait = wait or (lambda s: _wait(s, spec.busy))
    w = EventWriter(out)
    w.emit("handshake", workload=spec.name, unit=spec.unit, version=PROTOCOL_VERSION)
    for e in range(spec.epochs):
        w.emit("epoch_begin", epoch=e)
        duration = spec.batch_duration_s * (spec.first_epoch_slowdown if e == 0 else 1.0)
        for _ in range(spec.batches_per_epoch):
            w.emit("batch_begin", epoch=e)
            wait(duration)
            w.emit("batch_end", epoch=e, samples=spec.samples_per_batch)
        w.emit("epoch_end", epoch=e)
    w.emit("run_end")


class AdapterStateError(RuntimeError):
    pass


class TrainerAdapter:
    """Maps training-loop hooks onto protocol events.

    Call the hooks from the framework's callbacks; out-of-order calls raise
    before anything is written.
    """

    def __init__(self, workload, unit="images", out=None):
        if unit not in UNITS:
            raise ValueError(f"unit must be one of {UNITS}")
        self._w = EventWriter(sys.stdout if out is None else out)
        self._w.emit("handshake", workload=workload, unit=unit, version=PROTOCOL_VERSION)
        self._epoch = None
        self._in_batch = False
        self._done = False

    def _require(self, ok, what):
        if self._done or not ok:
            raise AdapterStateError(what)

    def on_epoch_begin(self, epoch):
        self._require(self._epoch is None, "epoch_begin while an epoch is open")
        self._epoch = epoch
        self._w.emit("epoch_begin", epoch=epoch)

    def on_batch_begin(self):
        self._require(self._epoch is not None and not self._in_batch,
                      "batch_begin outside an epoch or inside a batch")
        self._in_batch = True
        self._w.emit("batch_begin", epoch=self._epoch)

    def on_batch_end(self, samples):
        self._require(self._in_batch, "batch_end without batch_begin")
        if samples < 0:
            raise ValueError("samples must be >= 0")
        self._in_batch = False
        self._w.emit("batch_end", epoch=self._epoch, samples=int(samples))

    def on_epoch_end(self):
        self._require(self._epoch is not None and not self._in_batch,
                      "epoch_end with no open epoch or an open batch")
        self._w.emit("epoch_end", epoch=self._epoch)
        self._epoch = None

    def finish(self):
        self._require(self._epoch is None, "run_end inside an epoch")
        self._w.emit("run_end")
        self._done = True


def main(argv=None):
    p = argparse.ArgumentParser(prog="synthetic-workload")
    p.add_argument("--epochs", type=int, default=11)
    p.add_argument("--batches", type=int, default=10)
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--batch-seconds", type=float, default=0.1)
    p.add_argument("--unit", choices=UNITS, default="images")
    p.add_argument("--first-epoch-slowdown", type=float, default=1.0)
    p.add_argument("--name", default="synthetic")
    p.add_argument("--busy", action="store_true", help="spin instead of sleeping")
    a = p.parse_args(argv)
    spec = SyntheticWorkloadSpec(a.epochs, a.batches, a.samples, a.batch_seconds, a.unit,
                                 a.first_epoch_slowdown, a.name, a.busy)
    try:
        spec.validate()
    except ValueError as e:
        p.error(str(e))
    try:
        run_synthetic(spec)
    except BrokenPipeError:
        # Keep the interpreter's final flush from raising again.
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
