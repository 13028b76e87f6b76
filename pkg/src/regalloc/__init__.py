"""Register allocation laboratory.

A small machine IR with an interpreter, liveness and interference
analysis, constraint-checked coloring, live-range splitting, spilling,
instruction embeddings, reference allocators, an episodic allocation
environment, and a length-prefixed wire protocol for external learners.
"""

from importlib import resources

from .machine import MachineDescription, load_machine_description

SHIPPED_MACHINES = ("x86like", "arm64like", "tiny3")


def load_shipped_machine(name: str) -> MachineDescription:
    """Load one of the machine descriptions shipped with the package."""
    if name not in SHIPPED_MACHINES:
        raise ValueError(f"unknown shipped machine {name!r}; have {SHIPPED_MACHINES}")
    text = resources.files("regalloc.data").joinpath(f"{name}.yaml").read_text()
    return load_machine_description(text)
