"""Compressed schedule wire format.

    magic    b"ESCH"
    version  u8 = 1
    -- an empty schedule ends here --
    nformula u8 = (number of unique formulas) - 1
    table    formulas, each in the formula wire encoding
    nslots   u32le   number of capture slots covered
    slots    one byte per capture slot:
               0x00-0xFD  index into the formula table
               0xFE       capture has no formula
               0xFF       escape: u16le count, repeat the previous slot byte
                          that many more times

Slots are capture indices in the satellite's plan.  Decoding re-merges
consecutive slots with the same formula (skipping empty slots), which is the
canonical form :func:`orbitsched.ground.merge_slots` produces.
"""

from __future__ import annotations

import struct
from typing import Sequence

from .formula import DnfFormula, FormulaError, decode_formula, encode_formula, formula_size
from .ground import ScheduleEntry, merge_slots

MAGIC = b"ESCH"
VERSION = 1
NO_FORMULA = 0xFE
ESCAPE = 0xFF
MAX_FORMULAS = 0xFE  # indices 0x00-0xFD
MIN_RUN = 4  # shorter repeats are cheaper as literal bytes


class ScheduleCapacityError(ValueError):
    """More unique formulas than the one-byte index can address."""


class ScheduleDecodeError(ValueError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} (at byte offset {offset})")
        self.offset = offset


def _slots_of(entries: Sequence[ScheduleEntry]) -> tuple[list[DnfFormula], list[int]]:
    table: list[DnfFormula] = []
    index: dict[DnfFormula, int] = {}
    loc_formula: dict[int, int] = {}
    for e in entries:
        if not e.locs:
            raise ValueError("schedule entry without locations")
        k = index.get(e.formula)
        if k is None:
            k = index[e.formula] = len(table)
            table.append(e.formula)
        for loc in e.locs:
            if loc < 0 or loc in loc_formula:
                raise ValueError(f"invalid or repeated capture index {loc}")
            loc_formula[loc] = k
    n = max(loc_formula) + 1 if loc_formula else 0
    return table, [loc_formula.get(i, NO_FORMULA) for i in range(n)]


def encode_schedule(entries: Sequence[ScheduleEntry]) -> bytes:
    table, slots = _slots_of(entries)
    if len(table) > MAX_FORMULAS:
        raise ScheduleCapacityError(
            f"{len(table)} unique formulas; at most {MAX_FORMULAS} fit one schedule, split the horizon"
        )
    if merge_slots([None if s == NO_FORMULA else table[s] for s in slots]) != list(entries):
        raise ValueError("entries are not in canonical merged form")
    out = bytearray(MAGIC)
    out.append(VERSION)
    if not table:
        return bytes(out)
    out.append(len(table) - 1)
    for f in table:
        out += encode_formula(f)
    out += struct.pack("<I", len(slots))
    i = 0
    n = len(slots)
    while i < n:
        v = slots[i]
        j = i + 1
        while j < n and slots[j] == v:
            j += 1
        out.append(v)
        extra = j - i - 1
        if extra >= MIN_RUN - 1:
            while extra > 0:
                chunk = min(extra, 0xFFFF)
                out.append(ESCAPE)
                out += struct.pack("<H", chunk)
                extra -= chunk
        else:
            out += bytes([v]) * extra
        i = j
    return bytes(out)


def decode_schedule(blob: bytes) -> list[ScheduleEntry]:
    if len(blob) < 5 or blob[:4] != MAGIC:
        raise ScheduleDecodeError("bad magic", 0)
    if blob[4] != VERSION:
        raise ScheduleDecodeError(f"unsupported version {blob[4]}", 4)
    if len(blob) == 5:
        return []
    n_formulas = blob[5] + 1
    if n_formulas > MAX_FORMULAS:
        raise ScheduleDecodeError(f"formula count {n_formulas} exceeds {MAX_FORMULAS}", 5)
    pos = 6
    table = []
    for _ in range(n_formulas):
        try:
            f, pos = decode_formula(blob, pos)
        except FormulaError as exc:
            raise ScheduleDecodeError(f"corrupt formula table: {exc}", pos) from None
        table.append(f)
    if pos + 4 > len(blob):
        raise ScheduleDecodeError("truncated slot count", pos)
    (n_slots,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    slots: list[int] = []
    prev = None
    while len(slots) < n_slots:
        if pos >= len(blob):
            raise ScheduleDecodeError(f"truncated slot stream ({len(slots)} of {n_slots} slots)", pos)
        b = blob[pos]
        if b == ESCAPE:
            if prev is None:
                raise ScheduleDecodeError("run escape without a preceding slot", pos)
            if pos + 3 > len(blob):
                raise ScheduleDecodeError("truncated run length", pos)
            (count,) = struct.unpack_from("<H", blob, pos + 1)
            if len(slots) + count > n_slots:
                raise ScheduleDecodeError("run overflows slot count", pos)
            slots.extend([prev] * count)
            pos += 3
            continue
        if b != NO_FORMULA and b >= n_formulas:
            raise ScheduleDecodeError(f"formula index {b} out of table range", pos)
        slots.append(b)
        prev = b
        pos += 1
    if pos != len(blob):
        raise ScheduleDecodeError("trailing bytes after slot stream", pos)
    return merge_slots([None if s == NO_FORMULA else table[s] for s in slots])


def naive_size(entries: Sequence[ScheduleEntry]) -> int:
    """Bytes needed to ship every capture's formula inline."""
    return sum(formula_size(e.formula) * len(e.locs) for e in entries)


def compression_ratio(entries: Sequence[ScheduleEntry]) -> float:
    return naive_size(entries) / len(encode_schedule(entries))
