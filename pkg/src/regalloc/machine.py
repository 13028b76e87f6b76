"""Abstract target machines.

A machine description declares the register file (registers grouped into
types and congruence classes), per-opcode latencies, implicit clobbers,
and fixed-register operand constraints.  Descriptions are immutable after
loading and safe to share between threads.

Congruence classes model registers that occupy the same physical storage
at different widths (al < ax < eax < rax): assigning any member of a class
blocks every other member for overlapping values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import yaml


class MachineError(Exception):
    """Base class for machine-description problems."""


class MachineParseError(MachineError):
    """The description document is structurally malformed."""


class MachineValidationError(MachineError):
    """The description violates a register-file invariant."""


@dataclass(frozen=True)
class PhysReg:
    id: str
    type_id: str
    width: int

    def __str__(self) -> str:
        return f"${self.id}"


@dataclass(frozen=True)
class OpcodeInfo:
    latency: int
    is_mem: bool = False
    # (operand index over defs then uses, register id) pairs the parser
    # enforces on the instruction text.
    fixed_constraints: tuple[tuple[int, str], ...] = ()
    # Registers implicitly overwritten by the instruction.
    clobbers: tuple[str, ...] = ()


@dataclass(frozen=True)
class MachineDescription:
    name: str
    registers: dict[str, PhysReg]
    type_widths: dict[str, int]
    # Allocatable registers per type, in allocation preference order.
    reg_types: dict[str, tuple[PhysReg, ...]]
    # Reserved per-type scratch registers, used only for spill plumbing
    # when every allocatable register is occupied (scavenger style).
    scratch_regs: dict[str, tuple[PhysReg, ...]]
    congruence_of: dict[str, str]
    class_members: dict[str, tuple[PhysReg, ...]]
    opcode_table: dict[str, OpcodeInfo]
    clobbered_anywhere: frozenset[str] = field(default_factory=frozenset)

    def reg(self, reg_id: str) -> PhysReg:
        try:
            return self.registers[reg_id]
        except KeyError:
            raise MachineValidationError(f"unknown register id {reg_id!r}") from None

    def allocatable(self, type_id: str) -> tuple[PhysReg, ...]:
        try:
            return self.reg_types[type_id]
        except KeyError:
            raise MachineValidationError(f"unknown register type {type_id!r}") from None

    def opcode(self, name: str) -> OpcodeInfo:
        try:
            return self.opcode_table[name]
        except KeyError:
            raise MachineValidationError(f"unknown opcode {name!r}") from None


def aliases(md: MachineDescription, r1, r2) -> bool:
    """True iff the two registers share a congruence class (covers r1 == r2)."""
    id1 = r1.id if isinstance(r1, PhysReg) else r1
    id2 = r2.id if isinstance(r2, PhysReg) else r2
    if id1 not in md.congruence_of:
        raise MachineValidationError(f"unknown register id {id1!r}")
    if id2 not in md.congruence_of:
        raise MachineValidationError(f"unknown register id {id2!r}")
    return md.congruence_of[id1] == md.congruence_of[id2]


def load_machine_description(text: str) -> MachineDescription:
    """Parse and validate a machine-description document.

    The document is YAML with top-level keys ``name``, ``types``,
    ``registers``, ``congruence_classes`` and ``opcodes``; see the README
    for the field-by-field schema.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise MachineParseError(f"not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise MachineParseError("top level must be a mapping")

    for key in ("name", "types", "registers", "congruence_classes", "opcodes"):
        if key not in doc:
            raise MachineParseError(f"missing top-level key {key!r}")

    name = doc["name"]
    if not isinstance(name, str) or not name:
        raise MachineParseError("'name' must be a non-empty string")

    type_widths: dict[str, int] = {}
    for tid, spec in _as_map(doc["types"], "types").items():
        width = spec.get("width") if isinstance(spec, dict) else spec
        if not isinstance(width, int) or width <= 0:
            raise MachineParseError(f"type {tid!r}: width must be a positive integer")
        type_widths[str(tid)] = width

    registers: dict[str, PhysReg] = {}
    scratch_ids: set[str] = set()
    if not isinstance(doc["registers"], list):
        raise MachineParseError("'registers' must be a list")
    for i, entry in enumerate(doc["registers"]):
        if not isinstance(entry, dict) or "id" not in entry or "type" not in entry:
            raise MachineParseError(f"registers[{i}]: need 'id' and 'type' fields")
        rid = str(entry["id"])
        tid = str(entry["type"])
        if rid in registers:
            raise MachineValidationError(f"duplicate register id {rid!r}")
        if tid not in type_widths:
            raise MachineParseError(f"registers[{i}] ({rid}): unknown type {tid!r}")
        width = int(entry.get("width", type_widths[tid]))
        if width != type_widths[tid]:
            raise MachineValidationError(
                f"register {rid!r} has width {width} but its type {tid!r} "
                f"has width {type_widths[tid]}"
            )
        registers[rid] = PhysReg(rid, tid, width)
        if entry.get("scratch", False):
            scratch_ids.add(rid)

    congruence_of: dict[str, str] = {}
    class_members: dict[str, tuple[PhysReg, ...]] = {}
    for cid, members in _as_map(doc["congruence_classes"], "congruence_classes").items():
        cid = str(cid)
        if not isinstance(members, list) or not members:
            raise MachineParseError(f"congruence class {cid!r} must be a non-empty list")
        regs = []
        for rid in members:
            rid = str(rid)
            if rid not in registers:
                raise MachineParseError(f"congruence class {cid!r}: unknown register {rid!r}")
            if rid in congruence_of:
                raise MachineValidationError(
                    f"register {rid!r} assigned to two congruence classes "
                    f"({congruence_of[rid]!r} and {cid!r})"
                )
            congruence_of[rid] = cid
            regs.append(registers[rid])
        widths = [r.width for r in regs]
        if widths != sorted(widths):
            raise MachineValidationError(
                f"congruence class {cid!r}: member widths {widths} are not "
                "ordered from narrowest to widest"
            )
        class_members[cid] = tuple(regs)

    for rid in registers:
        if rid not in congruence_of:
            raise MachineValidationError(f"register {rid!r} belongs to no congruence class")

    reg_types: dict[str, tuple[PhysReg, ...]] = {}
    scratch_regs: dict[str, tuple[PhysReg, ...]] = {}
    for tid in type_widths:
        alloc = tuple(r for r in registers.values() if r.type_id == tid and r.id not in scratch_ids)
        scratch = tuple(r for r in registers.values() if r.type_id == tid and r.id in scratch_ids)
        if not alloc:
            raise MachineValidationError(f"type {tid!r} has no allocatable registers")
        reg_types[tid] = alloc
        scratch_regs[tid] = scratch

    opcode_table: dict[str, OpcodeInfo] = {}
    clobbered: set[str] = set()
    for op, spec in _as_map(doc["opcodes"], "opcodes").items():
        op = str(op)
        spec = spec or {}
        if not isinstance(spec, dict):
            raise MachineParseError(f"opcode {op!r}: entry must be a mapping")
        latency = spec.get("latency", 1)
        if not isinstance(latency, int) or latency <= 0:
            raise MachineValidationError(f"opcode {op!r}: latency must be a positive integer")
        fixed = []
        for fc in spec.get("fixed", []):
            if not isinstance(fc, dict) or "operand" not in fc or "reg" not in fc:
                raise MachineParseError(f"opcode {op!r}: fixed entries need 'operand' and 'reg'")
            rid = str(fc["reg"])
            if rid not in registers:
                raise MachineParseError(f"opcode {op!r}: unknown fixed register {rid!r}")
            fixed.append((int(fc["operand"]), rid))
        clb = []
        for rid in spec.get("clobbers", []):
            rid = str(rid)
            if rid not in registers:
                raise MachineParseError(f"opcode {op!r}: unknown clobber register {rid!r}")
            clb.append(rid)
        clobbered.update(clb)
        opcode_table[op] = OpcodeInfo(
            latency=latency,
            is_mem=bool(spec.get("is_mem", False)),
            fixed_constraints=tuple(fixed),
            clobbers=tuple(clb),
        )

    return MachineDescription(
        name=name,
        registers=registers,
        type_widths=type_widths,
        reg_types=reg_types,
        scratch_regs=scratch_regs,
        congruence_of=congruence_of,
        class_members=class_members,
        opcode_table=opcode_table,
        clobbered_anywhere=frozenset(clobbered),
    )


def estimate_throughput(md: MachineDescription, fn) -> Fraction:
    """Cost of a fully physical function under the latency model.

    cost = sum over instructions of latency(opcode) * 10 ** loop_depth.
    Lower cost means higher throughput.  Raises if the function still
    contains virtual registers or uses an opcode the machine lacks.
    """
    from . import mir  # local import; mir depends on machine for parsing

    total = Fraction(0)
    for block in fn.blocks:
        for instr in block.instrs:
            for op in instr.operands():
                if isinstance(op, mir.VReg):
                    raise MachineValidationError(
                        f"virtual register %{op.name} at point {instr.point}; "
                        "estimate_throughput needs a fully physical function"
                    )
            info = md.opcode(instr.opcode)
            total += Fraction(info.latency) * Fraction(10) ** instr.loop_depth
    return total


def _as_map(value, what: str) -> dict:
    if not isinstance(value, dict):
        raise MachineParseError(f"'{what}' must be a mapping")
    return value
