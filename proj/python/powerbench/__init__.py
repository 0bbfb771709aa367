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

"""Python access to the powerbench core."""

from ._powerbench import (
    PowerbenchError,
    builtin_profile_names,
    check_unimodal,
    enforcement_verdict,
    find_efficiency_peak,
    format_table_value,
    integrate_energy,
    parse_event_line,
    pareto_front,
    plan_caps,
    replay,
    run_cli,
    simulate,
    simulate_operating_point,
    stream_throughput,
)


def replay_files(paths, overhead_w=100.0):
    """Replay published throughput tables from CSV files under the cap proxy."""
    texts = []
    for p in paths:
        with open(p, encoding="utf-8") as f:
            texts.append(f.read())
    return replay(texts, overhead_w)


def peaks(analysis):
    """(device, workload) -> peak cap in watts, for curves that have a peak."""
    return {
        (c["device"], c["workload"]): c["peak"]["cap_w"]
        for c in analysis["curves"]
        if c["peak"] is not None
    }


__all__ = [
    "PowerbenchError",
    "builtin_profile_names",
    "check_unimodal",
    "enforcement_verdict",
    "find_efficiency_peak",
    "format_table_value",
    "integrate_energy",
    "parse_event_line",
    "pareto_front",
    "peaks",
    "plan_caps",
    "replay",
    "replay_files",
    "run_cli",
    "simulate",
    "simulate_operating_point",
    "stream_throughput",
]
