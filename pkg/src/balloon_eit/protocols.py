"""Measurement protocols over the 2x8 electrode layout.

Electrode indexing: ring 1 holds 1..8 counter-clockwise viewed from the
distal tip, ring 2 holds 9..16 with electrode k+8 axially aligned to k.

Two protocols are provided:

* radial  -- 8 rows; row k injects between the aligned pair (k, k+8) and
  measures on the neighbouring aligned pair (k+1, k+9), indices wrapping
  within each ring.
* full    -- 136 rows; 8 aligned cross-ring injections each measured on the
  7 other aligned pairs (56 rows), plus the adjacent-pair drive/measure
  pattern run on each ring separately (8 injections x 5 valid adjacent
  measurement pairs per ring, 80 rows).  Every row that would measure on a
  current-carrying electrode is removed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

N_PER_RING = 8
N_ELECTRODES = 16


def _ring_next(k: int, offset: int = 1) -> int:
    """Electrode `offset` steps counter-clockwise from k on the same ring."""
    ring = (k - 1) // N_PER_RING
    pos = (k - 1) % N_PER_RING
    return ring * N_PER_RING + (pos + offset) % N_PER_RING + 1


@dataclass(frozen=True)
class Protocol:
    """Ordered (inject+, inject-, measure+, measure-) electrode quadruples."""

    name: str
    rows: tuple

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=np.int64)

    def injection_pairs(self) -> list:
        """Unique injection pairs in first-appearance order."""
        seen, out = set(), []
        for ip, im, _, _ in self.rows:
            if (ip, im) not in seen:
                seen.add((ip, im))
                out.append((ip, im))
        return out

    def measurement_pairs(self) -> list:
        seen, out = set(), []
        for _, _, mp, mm in self.rows:
            if (mp, mm) not in seen:
                seen.add((mp, mm))
                out.append((mp, mm))
        return out

    def swapped(self) -> "Protocol":
        """Protocol with injection and measurement pairs exchanged per row."""
        return Protocol(self.name + "-swapped",
                        tuple((mp, mm, ip, im) for ip, im, mp, mm in self.rows))


def radial_protocol() -> Protocol:
    rows = []
    for k in range(1, N_PER_RING + 1):
        rows.append((k, k + N_PER_RING, _ring_next(k), _ring_next(k) + N_PER_RING))
    return Protocol("radial", tuple(rows))


def full_protocol() -> Protocol:
    rows = []
    # Aligned cross-ring injections, measured on every other aligned pair.
    for k in range(1, N_PER_RING + 1):
        for j in range(1, N_PER_RING + 1):
            if j != k:
                rows.append((k, k + N_PER_RING, j, j + N_PER_RING))
    # Adjacent drive and measure on each ring separately.
    for ring_base in (0, N_PER_RING):
        for k in range(ring_base + 1, ring_base + N_PER_RING + 1):
            inj = (k, _ring_next(k))
            for j in range(ring_base + 1, ring_base + N_PER_RING + 1):
                meas = (j, _ring_next(j))
                if set(meas) & set(inj):
                    continue
                rows.append((*inj, *meas))
    return Protocol("full", tuple(rows))


@dataclass
class ValidationReport:
    valid: bool
    issues: list

    def __bool__(self) -> bool:
        return self.valid


def validate_protocol(protocol: Protocol, catheter=None) -> ValidationReport:
    """Check index bounds, per-row disjointness and duplicate rows."""
    n_max = catheter.electrode_count if catheter is not None else N_ELECTRODES
    issues = []
    seen = {}
    for r, (ip, im, mp, mm) in enumerate(protocol):
        for e in (ip, im, mp, mm):
            if not 1 <= e <= n_max:
                issues.append(f"row {r}: electrode {e} out of range 1..{n_max}")
        if ip == im:
            issues.append(f"row {r}: injection electrodes coincide")
        if mp == mm:
            issues.append(f"row {r}: measurement electrodes coincide")
        if {mp, mm} & {ip, im}:
            issues.append(f"row {r}: measures on an injecting electrode")
        key = (ip, im, mp, mm)
        if key in seen:
            issues.append(f"row {r}: duplicate of row {seen[key]}")
        else:
            seen[key] = r
    return ValidationReport(valid=not issues, issues=issues)


CSV_HEADER = ["inject_pos", "inject_neg", "meas_pos", "meas_neg"]


def save_protocol_csv(protocol: Protocol, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        writer.writerows(protocol.rows)


def load_protocol_csv(path, name: str | None = None) -> Protocol:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != CSV_HEADER:
            raise ParameterError(f"unexpected protocol CSV header: {header}")
        rows = tuple(tuple(int(v) for v in row) for row in reader if row)
    return Protocol(name or "imported", rows)
