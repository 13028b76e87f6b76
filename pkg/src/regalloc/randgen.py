"""Seeded random function generator.

Produces small, structured, reducible functions that always validate and
always run cleanly on a zero input vector: operand choices are limited to
definitely-assigned registers, divisors are freshly set non-zero
constants, and loops count down from small constants.  Used to build
training and test corpora.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .machine import MachineDescription
from .mir import (
    BasicBlock,
    Imm,
    Instruction,
    MachineFunction,
    PReg,
    VReg,
    finish_function,
)


@dataclass
class GenParams:
    blocks: int = 4
    instrs: int = 20
    vregs: int = 8
    loop_prob: float = 0.3
    diamond_prob: float = 0.25
    call_prob: float = 0.06
    div_prob: float = 0.08
    print_prob: float = 0.2
    types: tuple[str, ...] = ("gr32",)
    machine: MachineDescription | None = None


def generate_random_function(seed: int, params: GenParams | None = None) -> MachineFunction:
    """Deterministically generate one function for the given seed."""
    p = params or GenParams()
    machine = p.machine
    types = p.types
    if machine is not None:
        have = [t for t in types if t in machine.type_widths]
        types = tuple(have) or tuple(
            t for t in machine.type_widths if t.startswith("gr")
        )[:2]
    n_blocks = max(1, int(p.blocks))
    n_instrs = max(1, int(p.instrs))
    n_vregs = max(0, int(p.vregs))

    rng = random.Random(seed)
    gen = _Builder(rng, machine, types, n_vregs)

    n_params = rng.randint(0, min(2, n_vregs))
    fn_params = tuple(gen.new_vreg() for _ in range(n_params))
    gen.available.update(v.name for v in fn_params)

    budget = n_instrs
    block_budget = n_blocks
    while budget > 0:
        roll = rng.random()
        if block_budget >= 3 and roll < p.loop_prob:
            used_b, used_i = gen.emit_loop(budget, p)
        elif block_budget >= 4 and roll < p.loop_prob + p.diamond_prob:
            used_b, used_i = gen.emit_diamond(budget, p)
        else:
            used_b, used_i = gen.emit_straight(min(budget, rng.randint(2, 6)), p)
        budget -= used_i
        block_budget -= used_b

    for v in gen.pick_prints(rng.randint(1, 3)):
        gen.emit(Instruction("print", uses=(v,)))
    if rng.random() < 0.5:
        tail = gen.pick_value()
        gen.emit(Instruction("ret", uses=(tail,) if tail is not None else ()))

    fn = MachineFunction(name=f"f{seed}", params=fn_params, blocks=gen.blocks)
    finish_function(fn, machine)
    return fn


class _Builder:
    def __init__(self, rng: random.Random, machine, types, max_vregs: int):
        self.rng = rng
        self.machine = machine
        self.types = types
        self.max_vregs = max_vregs
        self.counter = 0
        self.available: set[str] = set()
        # live loop counters; never redefined by body instructions
        self.protected: set[str] = set()
        self.vreg_type: dict[str, str] = {}
        self.blocks: list[BasicBlock] = [BasicBlock("bb0")]
        self.label_counter = 0
        self.ext_counter = 0

    # -------------------------------------------------- low-level pieces

    def new_label(self) -> str:
        self.label_counter += 1
        return f"bb{self.label_counter}"

    def new_vreg(self, type_id: str | None = None) -> VReg:
        t = type_id or self.rng.choice(self.types)
        name = f"v{self.counter}"
        self.counter += 1
        self.vreg_type[name] = t
        return VReg(name, t)

    def emit(self, ins: Instruction) -> None:
        self.blocks[-1].instrs.append(ins)

    def open_block(self, label: str) -> None:
        self.blocks.append(BasicBlock(label))

    def pick_source(self, type_id: str) -> VReg | Imm:
        pool = [n for n in self.available if self.vreg_type[n] == type_id]
        if pool and self.rng.random() < 0.75:
            return VReg(self.rng.choice(sorted(pool)), type_id)
        return Imm(self.rng.randint(-20, 20))

    def pick_value(self) -> VReg | None:
        if not self.available:
            return None
        name = self.rng.choice(sorted(self.available))
        return VReg(name, self.vreg_type[name])

    def pick_prints(self, k: int) -> list[VReg]:
        pool = sorted(self.available)
        self.rng.shuffle(pool)
        return [VReg(n, self.vreg_type[n]) for n in pool[:k]]

    def def_target(self, type_id: str) -> VReg:
        pool = [n for n in self.available
                if self.vreg_type[n] == type_id and n not in self.protected]
        if self.counter < self.max_vregs or not pool:
            v = self.new_vreg(type_id)
            self.available.add(v.name)
            return v
        return VReg(self.rng.choice(sorted(pool)), type_id)

    def clobbers_of(self, opcode: str) -> tuple[PReg, ...]:
        if self.machine is None:
            return ()
        info = self.machine.opcode_table.get(opcode)
        return tuple(PReg(r) for r in info.clobbers) if info else ()

    # ------------------------------------------------------ region kinds

    def emit_compute(self, p) -> int:
        rng = self.rng
        if self.max_vregs == 0:
            self.emit(Instruction("print", uses=(Imm(rng.randint(-20, 20)),)))
            return 1
        roll = rng.random()
        t = rng.choice(self.types)
        if roll < p.div_prob:
            divisor = self.new_vreg(t)
            self.available.add(divisor.name)
            self.emit(Instruction("mov", defs=(divisor,), uses=(Imm(rng.randint(2, 9)),)))
            num = self.pick_source(t)
            dst = self.def_target(t)
            self.emit(Instruction("div", defs=(dst,), uses=(num, divisor),
                                  clobbers=self.clobbers_of("div")))
            return 2
        if roll < p.div_prob + p.call_prob and self.machine is not None \
                and "call" in self.machine.opcode_table:
            info = self.machine.opcode_table["call"]
            self.ext_counter += 1
            callee = f"ext{self.ext_counter}"
            fixed = dict(info.fixed_constraints)
            if 0 in fixed:
                result = PReg(fixed[0])
                self.emit(Instruction("call", defs=(result,), callee=callee,
                                      clobbers=self.clobbers_of("call")))
                rt = self.machine.registers[result.id].type_id
                if rt in self.types:
                    dst = self.def_target(rt)
                    self.emit(Instruction("mov", defs=(dst,), uses=(result,)))
                    return 2
                return 1
            self.emit(Instruction("call", callee=callee,
                                  clobbers=self.clobbers_of("call")))
            return 1
        if roll < p.div_prob + p.call_prob + p.print_prob and self.available:
            v = self.pick_value()
            self.emit(Instruction("print", uses=(v,)))
            return 1
        opcode = rng.choice(("mov", "add", "sub", "mul", "cmp"))
        if opcode == "mov":
            src = self.pick_source(t)
            dst = self.def_target(t)
            self.emit(Instruction("mov", defs=(dst,), uses=(src,)))
            return 1
        a, b = self.pick_source(t), self.pick_source(t)
        if isinstance(a, Imm) and isinstance(b, Imm) and opcode != "cmp":
            a = Imm(rng.randint(-5, 5))
        if opcode == "mul" and a == b:
            # repeated self-multiplication in nested loops makes values
            # explode; keep magnitudes test-friendly
            b = Imm(rng.randint(-4, 4))
        dst = self.def_target(t)
        self.emit(Instruction(opcode, defs=(dst,), uses=(a, b)))
        return 1

    def emit_straight(self, budget: int, p) -> tuple[int, int]:
        used = 0
        while used < budget:
            used += self.emit_compute(p)
        return 0, used

    def emit_loop(self, budget: int, p) -> tuple[int, int]:
        rng = self.rng
        counter = self.new_vreg(self.types[0])
        self.available.add(counter.name)
        self.protected.add(counter.name)
        self.emit(Instruction("mov", defs=(counter,), uses=(Imm(rng.randint(2, 4)),)))
        head = self.new_label()
        exit_ = self.new_label()
        self.open_block(head)
        used = 1
        body_budget = min(max(budget - 4, 1), rng.randint(2, 5))
        saved = set(self.available)
        while used - 1 < body_budget:
            used += self.emit_compute(p)
        # loop-local definitions stay usable: the body always runs at
        # least once before any exit (do-while shape)
        one = Imm(1)
        self.emit(Instruction("sub", defs=(counter,), uses=(counter, one)))
        cond = self.new_vreg(self.types[0])
        self.emit(Instruction("cmp", defs=(cond,), uses=(Imm(0), counter)))
        self.emit(Instruction("br", uses=(cond,), targets=(head, exit_)))
        used += 3
        self.open_block(exit_)
        self.available = set(self.available) | saved
        self.protected.discard(counter.name)
        return 2, used

    def emit_diamond(self, budget: int, p) -> tuple[int, int]:
        rng = self.rng
        t = self.types[0]
        a, b = self.pick_source(t), self.pick_source(t)
        cond = self.new_vreg(t)
        self.emit(Instruction("cmp", defs=(cond,), uses=(a, b)))
        then_l, else_l, merge_l = self.new_label(), self.new_label(), self.new_label()
        self.emit(Instruction("br", uses=(cond,), targets=(then_l, else_l)))
        used = 2
        before = set(self.available)

        self.open_block(then_l)
        side = min(max((budget - used) // 2, 1), rng.randint(1, 3))
        got = 0
        while got < side:
            got += self.emit_compute(p)
        self.emit(Instruction("jmp", targets=(merge_l,)))
        used += got + 1
        self.available = set(before)

        self.open_block(else_l)
        got = 0
        while got < side:
            got += self.emit_compute(p)
        self.emit(Instruction("jmp", targets=(merge_l,)))
        used += got + 1

        # only registers assigned on both paths survive the merge
        self.available = set(before)
        self.open_block(merge_l)
        return 4, used
