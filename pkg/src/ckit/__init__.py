"""ckit: a verification toolkit for behavioral contracts of service orchestrations."""

from .syntax import (
    Action, Contract, Process, Declarations, parse_contract, parse_process,
    parse_file, print_contract, print_process,
)
from .contracts import init, normalize, ready_sets, reachable, step
from .relations import compliant, equivalent, process_compliant, subcontract
from .abstraction import abstract_contract, alc
from .typesystem import type_of, type_of_abstraction, ground
from .simabs import AbsQuery, check_abstraction

__all__ = [
    "Action", "Contract", "Process", "Declarations",
    "parse_contract", "parse_process", "parse_file",
    "print_contract", "print_process",
    "init", "normalize", "ready_sets", "reachable", "step",
    "compliant", "equivalent", "process_compliant", "subcontract",
    "abstract_contract", "alc",
    "type_of", "type_of_abstraction", "ground",
    "AbsQuery", "check_abstraction",
]
