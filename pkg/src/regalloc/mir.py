"""A small machine IR: parser, printer, validator, and interpreter.

The IR is deliberately tiny.  A function is a list of labelled basic
blocks holding three-address instructions over an unbounded set of typed
virtual registers, explicit physical registers, integer immediates, and
abstract stack slots.  Functions are immutable values once built; all
transformations produce new functions.

Opcodes:

    mov   d, s          copy register or immediate
    add   d, a, b       d = a + b        (sub, mul alike)
    div   d, a, b       d = a / b        truncating; error on b == 0
    cmp   d, a, b       d = 1 if a < b else 0
    br    c, T, F       branch to T if c != 0 else F
    jmp   T             unconditional branch
    load  d, slot       read an abstract stack slot
    store slot, s       write an abstract stack slot
    print s             append s to the output list
    ret   [s]           stop, optionally returning s
    call  name          external call; machine-dependent clobbers,
                        optional fixed-register result

The textual grammar (one instruction per line, ';' or '#' comments):

    func NAME [ ( %v:TYPE, ... ) ] {
    bbN:
      [%v:TYPE =] OPCODE operand, ...
      ...
    }

Operands are ``%name:type`` (virtual register), ``$name`` (physical
register), or integer literals.  The address operand of load/store is an
integer stack-slot index.  Program points number instructions 1..N in
textual order.  A block that does not end in ``br``/``jmp``/``ret`` falls
through to the next block in the file (or halts, for the last block).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .machine import MachineDescription

CALL_RESULT = 11  # deterministic value an external call produces
DEFAULT_FUEL = 100_000

TERMINATORS = frozenset({"br", "jmp", "ret"})

# opcode -> (number of defs, allowed numbers of uses, number of targets)
_SHAPES = {
    "mov": (1, (1,), 0),
    "add": (1, (2,), 0),
    "sub": (1, (2,), 0),
    "mul": (1, (2,), 0),
    "div": (1, (2,), 0),
    "cmp": (1, (2,), 0),
    "br": (0, (1,), 2),
    "jmp": (0, (0,), 1),
    "load": (1, (1,), 0),
    "store": (0, (2,), 0),
    "print": (0, (1,), 0),
    "ret": (0, (0, 1), 0),
    "call": (-1, (0,), 0),  # -1: zero or one defs
}

OPCODES = frozenset(_SHAPES)


class MirError(Exception):
    pass


class MirSyntaxError(MirError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class MirValidationError(MirError):
    pass


class InterpreterError(MirError):
    pass


class FuelExhausted(InterpreterError):
    pass


@dataclass(frozen=True)
class VReg:
    name: str
    type_id: str

    def __str__(self) -> str:
        return f"%{self.name}:{self.type_id}"


@dataclass(frozen=True)
class PReg:
    id: str

    def __str__(self) -> str:
        return f"${self.id}"


@dataclass(frozen=True)
class Imm:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class SlotRef:
    index: int

    def __str__(self) -> str:
        return str(self.index)


Operand = VReg | PReg | Imm | SlotRef


@dataclass(frozen=True)
class Instruction:
    opcode: str
    defs: tuple[Operand, ...] = ()
    uses: tuple[Operand, ...] = ()
    targets: tuple[str, ...] = ()
    callee: str | None = None
    clobbers: tuple[PReg, ...] = ()
    point: int = 0
    loop_depth: int = 0

    def operands(self) -> tuple[Operand, ...]:
        return self.defs + self.uses

    def vreg_defs(self) -> tuple[VReg, ...]:
        return tuple(o for o in self.defs if isinstance(o, VReg))

    def vreg_uses(self) -> tuple[VReg, ...]:
        return tuple(o for o in self.uses if isinstance(o, VReg))

    def is_terminator(self) -> bool:
        return self.opcode in TERMINATORS

    def __str__(self) -> str:
        parts = []
        if self.defs:
            parts.append(", ".join(str(d) for d in self.defs) + " = ")
        parts.append(self.opcode)
        tail = [str(u) for u in self.uses]
        if self.callee is not None:
            tail.insert(0, self.callee)
        tail.extend(self.targets)
        if tail:
            parts.append(" " + ", ".join(tail))
        return "".join(parts)


@dataclass
class BasicBlock:
    label: str
    instrs: list[Instruction] = field(default_factory=list)


@dataclass
class MachineFunction:
    name: str
    params: tuple[Operand, ...]
    blocks: list[BasicBlock]
    vreg_types: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self._index()

    def _index(self) -> None:
        self._by_point: dict[int, Instruction] = {}
        self._block_of_point: dict[int, str] = {}
        for b in self.blocks:
            for ins in b.instrs:
                self._by_point[ins.point] = ins
                self._block_of_point[ins.point] = b.label

    @property
    def entry(self) -> str:
        return self.blocks[0].label

    def block(self, label: str) -> BasicBlock:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    def instructions(self):
        for b in self.blocks:
            yield from b.instrs

    def instr_at(self, point: int) -> Instruction:
        return self._by_point[point]

    def block_of(self, point: int) -> str:
        return self._block_of_point[point]

    def num_points(self) -> int:
        return sum(len(b.instrs) for b in self.blocks)

    def successors(self) -> dict[str, tuple[str, ...]]:
        succs: dict[str, tuple[str, ...]] = {}
        for i, b in enumerate(self.blocks):
            last = b.instrs[-1] if b.instrs else None
            if last is not None and last.opcode in ("br", "jmp"):
                succs[b.label] = last.targets
            elif last is not None and last.opcode == "ret":
                succs[b.label] = ()
            elif i + 1 < len(self.blocks):
                succs[b.label] = (self.blocks[i + 1].label,)
            else:
                succs[b.label] = ()
        return succs

    def predecessors(self) -> dict[str, tuple[str, ...]]:
        preds: dict[str, list[str]] = {b.label: [] for b in self.blocks}
        for label, ss in self.successors().items():
            for s in ss:
                preds[s].append(label)
        return {k: tuple(v) for k, v in preds.items()}

    def max_slot(self) -> int:
        mx = -1
        for ins in self.instructions():
            for op in ins.operands():
                if isinstance(op, SlotRef):
                    mx = max(mx, op.index)
        return mx

    def fresh_vreg(self, base: str) -> str:
        names = set(self.vreg_types)
        if base not in names:
            return base
        i = 1
        while f"{base}_{i}" in names:
            i += 1
        return f"{base}_{i}"


@dataclass(frozen=True)
class Outputs:
    printed: tuple[int, ...]
    returned: int | None


# ---------------------------------------------------------------- parsing

_TOKEN_FUNC = re.compile(r"^func\s+([A-Za-z_][\w.]*)\s*(\(([^)]*)\))?\s*\{\s*$")
_TOKEN_LABEL = re.compile(r"^([A-Za-z_][\w.]*):$")
_TOKEN_VREG = re.compile(r"^%([A-Za-z_][\w.']*):([A-Za-z_]\w*)$")
_TOKEN_PREG = re.compile(r"^\$([A-Za-z_]\w*)$")
_TOKEN_INT = re.compile(r"^-?\d+$")
_TOKEN_NAME = re.compile(r"^[A-Za-z_][\w.]*$")


def _strip_comment(line: str) -> str:
    for mark in (";", "#"):
        pos = line.find(mark)
        if pos >= 0:
            line = line[:pos]
    return line.strip()


def _parse_operand(tok: str, lineno: int) -> Operand:
    m = _TOKEN_VREG.match(tok)
    if m:
        return VReg(m.group(1), m.group(2))
    m = _TOKEN_PREG.match(tok)
    if m:
        return PReg(m.group(1))
    if _TOKEN_INT.match(tok):
        return Imm(int(tok))
    raise MirSyntaxError(f"bad operand {tok!r}", lineno)


def parse_function(text: str, md: MachineDescription | None = None) -> MachineFunction:
    """Parse one function; validate it; assign points and loop depths.

    With a machine description the parser also injects implicit clobbers,
    checks fixed-register constraints, and rejects opcodes the machine
    does not define.
    """
    lines = text.splitlines()
    name = None
    params: list[Operand] = []
    blocks: list[BasicBlock] = []
    cur: BasicBlock | None = None
    closed = False

    for lineno, raw in enumerate(lines, start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        if name is None:
            m = _TOKEN_FUNC.match(line)
            if not m:
                raise MirSyntaxError("expected 'func NAME {'", lineno)
            name = m.group(1)
            if m.group(3):
                for tok in m.group(3).split(","):
                    tok = tok.strip()
                    op = _parse_operand(tok, lineno)
                    if isinstance(op, (Imm, SlotRef)):
                        raise MirSyntaxError("parameters must be registers", lineno)
                    params.append(op)
            continue
        if closed:
            raise MirSyntaxError("text after closing '}'", lineno)
        if line == "}":
            closed = True
            continue
        m = _TOKEN_LABEL.match(line)
        if m:
            cur = BasicBlock(m.group(1))
            blocks.append(cur)
            continue
        if cur is None:
            cur = BasicBlock("bb0")
            blocks.append(cur)
        cur.instrs.append(_parse_instruction(line, lineno, md))

    if name is None:
        raise MirSyntaxError("no function found")
    if not closed:
        raise MirSyntaxError("missing closing '}'")
    if not blocks:
        blocks = [BasicBlock("bb0")]

    fn = MachineFunction(name=name, params=tuple(params), blocks=blocks)
    finish_function(fn, md)
    return fn


def _parse_instruction(line: str, lineno: int, md: MachineDescription | None) -> Instruction:
    defs: list[Operand] = []
    if "=" in line:
        lhs, _, rhs = line.partition("=")
        for tok in lhs.split(","):
            op = _parse_operand(tok.strip(), lineno)
            if isinstance(op, Imm):
                raise MirSyntaxError("immediate on the left of '='", lineno)
            defs.append(op)
        line = rhs.strip()

    parts = line.split(None, 1)
    opcode = parts[0]
    if opcode not in OPCODES:
        raise MirSyntaxError(f"unknown opcode {opcode!r}", lineno)
    rest = parts[1] if len(parts) > 1 else ""
    toks = [t.strip() for t in rest.split(",")] if rest.strip() else []

    ndefs, nuses_allowed, ntargets = _SHAPES[opcode]
    callee = None
    targets: list[str] = []
    uses: list[Operand] = []

    if opcode == "call":
        if not toks or not _TOKEN_NAME.match(toks[0]):
            raise MirSyntaxError("call needs a callee name", lineno)
        callee = toks[0]
        toks = toks[1:]

    if ntargets:
        if len(toks) < ntargets:
            raise MirSyntaxError(f"{opcode} needs {ntargets} target label(s)", lineno)
        for tok in toks[-ntargets:]:
            if not _TOKEN_NAME.match(tok):
                raise MirSyntaxError(f"bad target label {tok!r}", lineno)
            targets.append(tok)
        toks = toks[:-ntargets]

    for idx, tok in enumerate(toks):
        op = _parse_operand(tok, lineno)
        # load/store address positions hold abstract stack slots
        if isinstance(op, Imm) and (
            (opcode == "load" and idx == 0) or (opcode == "store" and idx == 0)
        ):
            op = SlotRef(op.value)
        uses.append(op)

    if ndefs >= 0 and len(defs) != ndefs:
        raise MirSyntaxError(f"{opcode} takes {ndefs} def(s), got {len(defs)}", lineno)
    if ndefs == -1 and len(defs) > 1:
        raise MirSyntaxError(f"{opcode} takes at most one def", lineno)
    if len(uses) not in nuses_allowed:
        raise MirSyntaxError(f"{opcode} takes {nuses_allowed} use(s), got {len(uses)}", lineno)
    for d in defs:
        if isinstance(d, SlotRef):
            raise MirSyntaxError("stack slot cannot be defined", lineno)

    clobbers: tuple[PReg, ...] = ()
    if md is not None:
        if opcode not in md.opcode_table:
            raise MirSyntaxError(f"machine {md.name!r} lacks opcode {opcode!r}", lineno)
        info = md.opcode_table[opcode]
        clobbers = tuple(PReg(r) for r in info.clobbers)
        slots = list(defs) + list(uses)
        for slot_idx, rid in info.fixed_constraints:
            if slot_idx < len(slots):
                got = slots[slot_idx]
                if not (isinstance(got, PReg) and got.id == rid):
                    raise MirSyntaxError(
                        f"{opcode} operand {slot_idx} is constrained to ${rid}, got {got}",
                        lineno,
                    )
        for op in list(defs) + list(uses):
            if isinstance(op, PReg) and op.id not in md.registers:
                raise MirSyntaxError(f"unknown register ${op.id}", lineno)
            if isinstance(op, VReg) and op.type_id not in md.type_widths:
                raise MirSyntaxError(f"unknown register type {op.type_id!r}", lineno)

    return Instruction(
        opcode=opcode,
        defs=tuple(defs),
        uses=tuple(uses),
        targets=tuple(targets),
        callee=callee,
        clobbers=clobbers,
    )


def finish_function(fn: MachineFunction, md: MachineDescription | None = None) -> None:
    """Assign points and loop depths, collect vreg types, and validate."""
    from . import dom

    point = 1
    labels = set()
    for b in fn.blocks:
        if b.label in labels:
            raise MirValidationError(f"duplicate block label {b.label!r}")
        labels.add(b.label)
    succs = None
    for b in fn.blocks:
        for i, ins in enumerate(b.instrs):
            if ins.is_terminator() and i != len(b.instrs) - 1:
                raise MirValidationError(
                    f"terminator {ins.opcode!r} mid-block in {b.label!r}"
                )
            for t in ins.targets:
                if t not in labels:
                    raise MirValidationError(f"branch to unknown block {t!r}")
    succs = fn.successors()
    depths = dom.loop_depths(fn.entry, succs)
    point = 1
    for b in fn.blocks:
        depth = depths.get(b.label, 0)
        for i in range(len(b.instrs)):
            b.instrs[i] = replace(b.instrs[i], point=point, loop_depth=depth)
            point += 1
    fn._index()
    _collect_vreg_types(fn)
    _check_definite_assignment(fn)


def _collect_vreg_types(fn: MachineFunction) -> None:
    types: dict[str, str] = {}
    def note(op):
        if isinstance(op, VReg):
            seen = types.get(op.name)
            if seen is not None and seen != op.type_id:
                raise MirValidationError(
                    f"%{op.name} used with types {seen!r} and {op.type_id!r}"
                )
            types[op.name] = op.type_id
    for p in fn.params:
        note(p)
    for ins in fn.instructions():
        for op in ins.operands():
            note(op)
    fn.vreg_types = types


def _check_definite_assignment(fn: MachineFunction) -> None:
    """Every vreg use must be preceded by a def on all paths from entry."""
    param_names = {p.name for p in fn.params if isinstance(p, VReg)}
    all_names = set(fn.vreg_types)
    labels = [b.label for b in fn.blocks]
    preds = fn.predecessors()
    blocks = {b.label: b for b in fn.blocks}

    out_sets: dict[str, set[str]] = {l: set(all_names) for l in labels}
    in_sets: dict[str, set[str]] = {l: set() for l in labels}
    changed = True
    while changed:
        changed = False
        for label in labels:
            if label == fn.entry:
                inn = set(param_names)
                if preds[label]:
                    # entry with predecessors (a loop header): values still
                    # guaranteed are those guaranteed on every path in
                    inn = set(param_names)
            else:
                ps = preds[label]
                inn = set.intersection(*(out_sets[p] for p in ps)) if ps else set(param_names)
            cur = set(inn)
            for ins in blocks[label].instrs:
                cur.update(v.name for v in ins.vreg_defs())
            if inn != in_sets[label] or cur != out_sets[label]:
                changed = True
                in_sets[label] = inn
                out_sets[label] = cur

    # unreachable blocks are not executed; skip them
    reachable = _reachable(fn)
    for label in labels:
        if label not in reachable:
            continue
        cur = set(in_sets[label])
        for ins in blocks[label].instrs:
            for v in ins.vreg_uses():
                if v.name not in cur:
                    raise MirValidationError(
                        f"%{v.name} used at point {ins.point} before any def"
                    )
            cur.update(v.name for v in ins.vreg_defs())


def _reachable(fn: MachineFunction) -> set[str]:
    succs = fn.successors()
    seen = {fn.entry}
    work = [fn.entry]
    while work:
        for s in succs[work.pop()]:
            if s not in seen:
                seen.add(s)
                work.append(s)
    return seen


def reachable_blocks(fn: MachineFunction) -> set[str]:
    return _reachable(fn)


# --------------------------------------------------------------- printing

def print_function(fn: MachineFunction) -> str:
    lines = []
    header = f"func {fn.name}"
    if fn.params:
        header += "(" + ", ".join(str(p) for p in fn.params) + ")"
    lines.append(header + " {")
    for b in fn.blocks:
        lines.append(f"{b.label}:")
        for ins in b.instrs:
            lines.append(f"  {ins}")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------ dominance

def dominance_frontier(fn: MachineFunction) -> dict[str, set[str]]:
    """Dominance frontiers of all reachable blocks.

    DF(B) = blocks X such that B dominates a predecessor of X but does
    not strictly dominate X.  Unreachable blocks are excluded.
    """
    from . import dom

    reach = _reachable(fn)
    succs = {l: tuple(s for s in ss if s in reach)
             for l, ss in fn.successors().items() if l in reach}
    return dom.dominance_frontier(fn.entry, succs)


# ----------------------------------------------------------- interpreter

def interpret(fn: MachineFunction, inputs: list[int] | None = None,
              fuel: int = DEFAULT_FUEL) -> Outputs:
    """Execute the function deterministically.

    Works on virtual-register and fully physical forms alike.  Missing
    inputs default to 0.  Raises on division by zero, reads of unwritten
    locations, and fuel exhaustion.
    """
    inputs = list(inputs or [])
    vregs: dict[str, int] = {}
    pregs: dict[str, int] = {}
    slots: dict[int, int] = {}
    printed: list[int] = []

    def write(op: Operand, value: int) -> None:
        if isinstance(op, VReg):
            vregs[op.name] = value
        elif isinstance(op, PReg):
            pregs[op.id] = value
        else:
            raise InterpreterError(f"cannot write to {op}")

    def read(op: Operand) -> int:
        if isinstance(op, Imm):
            return op.value
        if isinstance(op, VReg):
            if op.name not in vregs:
                raise InterpreterError(f"read of unwritten %{op.name}")
            return vregs[op.name]
        if isinstance(op, PReg):
            if op.id not in pregs:
                raise InterpreterError(f"read of unwritten ${op.id}")
            return pregs[op.id]
        raise InterpreterError(f"cannot read {op}")

    for i, p in enumerate(fn.params):
        write(p, inputs[i] if i < len(inputs) else 0)

    if not fn.blocks:
        return Outputs(tuple(printed), None)
    block_index = {b.label: i for i, b in enumerate(fn.blocks)}
    cur = 0
    remaining = fuel
    while True:
        block = fn.blocks[cur]
        jumped = False
        for ins in block.instrs:
            remaining -= 1
            if remaining < 0:
                raise FuelExhausted(f"fuel exhausted after {fuel} steps")
            op = ins.opcode
            if op == "mov":
                write(ins.defs[0], read(ins.uses[0]))
            elif op == "add":
                write(ins.defs[0], read(ins.uses[0]) + read(ins.uses[1]))
            elif op == "sub":
                write(ins.defs[0], read(ins.uses[0]) - read(ins.uses[1]))
            elif op == "mul":
                write(ins.defs[0], read(ins.uses[0]) * read(ins.uses[1]))
            elif op == "div":
                a, b = read(ins.uses[0]), read(ins.uses[1])
                if b == 0:
                    raise InterpreterError(f"division by zero at point {ins.point}")
                q = abs(a) // abs(b)
                write(ins.defs[0], q if (a >= 0) == (b >= 0) else -q)
            elif op == "cmp":
                write(ins.defs[0], 1 if read(ins.uses[0]) < read(ins.uses[1]) else 0)
            elif op == "load":
                slot = ins.uses[0]
                assert isinstance(slot, SlotRef)
                if slot.index not in slots:
                    raise InterpreterError(f"read of unwritten slot {slot.index}")
                write(ins.defs[0], slots[slot.index])
            elif op == "store":
                slot = ins.uses[0]
                assert isinstance(slot, SlotRef)
                slots[slot.index] = read(ins.uses[1])
            elif op == "print":
                printed.append(read(ins.uses[0]))
            elif op == "ret":
                value = read(ins.uses[0]) if ins.uses else None
                return Outputs(tuple(printed), value)
            elif op == "br":
                target = ins.targets[0] if read(ins.uses[0]) != 0 else ins.targets[1]
                cur = block_index[target]
                jumped = True
            elif op == "jmp":
                cur = block_index[ins.targets[0]]
                jumped = True
            elif op == "call":
                for c in ins.clobbers:
                    pregs[c.id] = 0
                if ins.defs:
                    write(ins.defs[0], CALL_RESULT)
            else:  # pragma: no cover
                raise InterpreterError(f"unhandled opcode {op!r}")
            if ins.clobbers and op != "call":
                for c in ins.clobbers:
                    pregs[c.id] = 0
        if jumped:
            continue
        cur += 1
        if cur >= len(fn.blocks):
            return Outputs(tuple(printed), None)
