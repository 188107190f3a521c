"""Problem model and text format for job-shop instances.

An instance is a list of jobs; each job is an ordered chain of operations,
each operation runs on one machine for an integer duration >= 1.  Machines
process at most one operation at a time.  Intervals are half-open, so an
operation ending at t and another starting at t on the same machine do not
overlap.

Text format: first non-comment line is "numJobs numMachines".  Each following
non-comment line describes one job as whitespace-separated integers.  Two line
shapes are accepted and distinguished by token-count parity:

  * even count:  m0 d0 m1 d1 ...            (pairs only)
  * odd count:   k m0 d0 ... m_{k-1} d_{k-1}  (leading op count, then pairs)

Lines starting with '#' and blank lines are skipped.  The writer emits the
prefixed form only when jobs have unequal lengths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable


class InstanceError(ValueError):
    """Violation of the instance model (bad duration, machine index, ...)."""


class ParseError(InstanceError):
    """Malformed instance text; message carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Operation:
    machine: int
    duration: int


@dataclass(frozen=True)
class Job:
    ops: tuple[Operation, ...]

    def __len__(self) -> int:
        return len(self.ops)


@dataclass(frozen=True)
class Instance:
    num_jobs: int
    num_machines: int
    jobs: tuple[Job, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.num_jobs != len(self.jobs):
            raise InstanceError(
                f"header says {self.num_jobs} jobs, found {len(self.jobs)}")
        if self.num_jobs < 1 or self.num_machines < 1:
            raise InstanceError("need at least one job and one machine")
        for j, job in enumerate(self.jobs):
            if len(job.ops) == 0:
                raise InstanceError(f"job {j} has no operations")
            for k, op in enumerate(job.ops):
                if not (0 <= op.machine < self.num_machines):
                    raise InstanceError(
                        f"job {j} op {k}: machine {op.machine} out of range "
                        f"[0, {self.num_machines})")
                if op.duration < 1:
                    raise InstanceError(
                        f"job {j} op {k}: duration {op.duration} < 1")

    @property
    def num_ops(self) -> int:
        return sum(len(job) for job in self.jobs)

    def is_rectangular(self) -> bool:
        """True when every job visits every machine exactly once."""
        for job in self.jobs:
            if len(job.ops) != self.num_machines:
                return False
            seen = set(op.machine for op in job.ops)
            if len(seen) != self.num_machines:
                return False
        return True

    def has_recirculation(self) -> bool:
        """True when some job visits a machine more than once."""
        for job in self.jobs:
            machines = [op.machine for op in job.ops]
            if len(set(machines)) != len(machines):
                return True
        return False

    def machine_load(self, m: int) -> int:
        return sum(op.duration for job in self.jobs for op in job.ops
                   if op.machine == m)

    def horizon(self) -> int:
        """Sum of all durations; trivially feasible as an end-of-schedule cap."""
        return sum(op.duration for job in self.jobs for op in job.ops)


def make_instance(rows: Iterable[Iterable[tuple[int, int]]],
                  num_machines: int | None = None,
                  name: str = "") -> Instance:
    """Build an Instance from [(machine, duration), ...] per job."""
    jobs = tuple(Job(tuple(Operation(m, d) for m, d in row)) for row in rows)
    if num_machines is None:
        num_machines = 1 + max(op.machine for job in jobs for op in job.ops)
    return Instance(len(jobs), num_machines, jobs, name=name)


def parse_instance(text: str, name: str = "") -> Instance:
    """Parse instance text (see module docstring for the accepted shapes)."""
    header: tuple[int, int] | None = None
    header_line = 0
    rows: list[list[tuple[int, int]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            tokens = [int(t) for t in line.split()]
        except ValueError:
            raise ParseError("non-integer token", lineno)
        if header is None:
            if len(tokens) != 2:
                raise ParseError(
                    f"expected header 'numJobs numMachines', got {len(tokens)} "
                    "tokens", lineno)
            header = (tokens[0], tokens[1])
            header_line = lineno
            if header[0] < 1 or header[1] < 1:
                raise ParseError("header counts must be >= 1", lineno)
            continue
        if len(tokens) % 2 == 0:
            pairs = tokens
        else:
            count, pairs = tokens[0], tokens[1:]
            if count * 2 != len(pairs):
                raise ParseError(
                    f"op count prefix {count} does not match {len(pairs)} "
                    "remaining tokens", lineno)
        if not pairs:
            raise ParseError("job line with no operations", lineno)
        ops = []
        for i in range(0, len(pairs), 2):
            m, d = pairs[i], pairs[i + 1]
            if not (0 <= m < header[1]):
                raise ParseError(
                    f"machine index {m} out of range [0, {header[1]})", lineno)
            if d < 1:
                raise ParseError(f"duration {d} < 1", lineno)
            ops.append((m, d))
        rows.append(ops)
    if header is None:
        raise ParseError("empty input, no header", 1)
    if len(rows) != header[0]:
        raise ParseError(
            f"header says {header[0]} jobs, found {len(rows)}", header_line)
    return make_instance(rows, num_machines=header[1], name=name)


def parse_instance_file(path: str) -> Instance:
    import os
    with open(path, "r") as fh:
        text = fh.read()
    stem = os.path.splitext(os.path.basename(path))[0]
    return parse_instance(text, name=stem)


def classic_names() -> list[str]:
    """Names of the bundled classic benchmark instances."""
    import os
    here = os.path.join(os.path.dirname(__file__), "data", "classic")
    return sorted(os.path.splitext(f)[0] for f in os.listdir(here)
                  if f.endswith(".jss"))


def load_classic(name: str) -> Instance:
    """Load a bundled classic instance (e.g. "ft06") by name."""
    import os
    path = os.path.join(os.path.dirname(__file__), "data", "classic",
                        name + ".jss")
    if not os.path.exists(path):
        raise InstanceError(
            f"no bundled instance {name!r}; have {', '.join(classic_names())}")
    return parse_instance_file(path)


def write_instance(inst: Instance) -> str:
    """Render an instance in the text format (round-trips with parse)."""
    rect = all(len(job) == len(inst.jobs[0]) for job in inst.jobs)
    out = [f"{inst.num_jobs} {inst.num_machines}"]
    for job in inst.jobs:
        flat: list[str] = []
        if not rect:
            flat.append(str(len(job.ops)))
        for op in job.ops:
            flat.append(str(op.machine))
            flat.append(str(op.duration))
        out.append(" ".join(flat))
    return "\n".join(out) + "\n"


def lower_bound(inst: Instance) -> int:
    """max(max machine load, max job length): a valid makespan lower bound."""
    loads = [0] * inst.num_machines
    best_job = 0
    for job in inst.jobs:
        total = 0
        for op in job.ops:
            loads[op.machine] += op.duration
            total += op.duration
        best_job = max(best_job, total)
    return max(max(loads), best_job)


@dataclass(frozen=True)
class Solution:
    """Start times per (job, op-position) plus the claimed makespan."""
    instance: str
    makespan: int
    starts: tuple[tuple[int, ...], ...]

    def to_json(self) -> str:
        return json.dumps({
            "instance": self.instance,
            "makespan": self.makespan,
            "starts": [list(row) for row in self.starts],
        })

    @staticmethod
    def from_json(text: str) -> "Solution":
        obj = json.loads(text)
        return Solution(
            instance=obj["instance"],
            makespan=int(obj["makespan"]),
            starts=tuple(tuple(int(s) for s in row) for row in obj["starts"]),
        )


@dataclass(frozen=True)
class ValidationResult:
    """Verdict of validate_solution; on failure carries the first violation."""
    ok: bool
    kind: str = ""
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def validate_solution(inst: Instance, sol: Solution) -> ValidationResult:
    """Check starts against the model: shape, nonnegative starts, precedence
    within each job, no overlap per machine (half-open intervals), and that
    the claimed makespan equals the true maximum end."""
    if len(sol.starts) != inst.num_jobs:
        return ValidationResult(False, "shape",
                                f"{len(sol.starts)} start rows for "
                                f"{inst.num_jobs} jobs")
    for j, job in enumerate(inst.jobs):
        if len(sol.starts[j]) != len(job.ops):
            return ValidationResult(False, "shape",
                                    f"job {j}: {len(sol.starts[j])} starts for "
                                    f"{len(job.ops)} ops")
    for j, job in enumerate(inst.jobs):
        for k, op in enumerate(job.ops):
            s = sol.starts[j][k]
            if s < 0:
                return ValidationResult(False, "negative_start",
                                        f"job {j} op {k} starts at {s}")
            if k > 0:
                prev_end = sol.starts[j][k - 1] + job.ops[k - 1].duration
                if s < prev_end:
                    return ValidationResult(
                        False, "precedence",
                        f"job {j} op {k} starts at {s} before previous op "
                        f"ends at {prev_end}")
    by_machine: dict[int, list[tuple[int, int, int, int]]] = {}
    for j, job in enumerate(inst.jobs):
        for k, op in enumerate(job.ops):
            s = sol.starts[j][k]
            by_machine.setdefault(op.machine, []).append(
                (s, s + op.duration, j, k))
    for m, ivs in by_machine.items():
        ivs.sort()
        for a, b in zip(ivs, ivs[1:]):
            if b[0] < a[1]:
                return ValidationResult(
                    False, "overlap",
                    f"machine {m}: job {a[2]} op {a[3]} [{a[0]},{a[1]}) "
                    f"overlaps job {b[2]} op {b[3]} [{b[0]},{b[1]})")
    true_makespan = max(sol.starts[j][k] + op.duration
                        for j, job in enumerate(inst.jobs)
                        for k, op in enumerate(job.ops))
    if true_makespan != sol.makespan:
        return ValidationResult(False, "makespan",
                                f"claimed {sol.makespan}, actual "
                                f"{true_makespan}")
    return ValidationResult(True)
