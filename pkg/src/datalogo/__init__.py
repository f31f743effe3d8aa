"""datalogo: datalog over partially ordered pre-semirings.

Typical use::

    from datalogo import parse_file, load_database, run_program, RunOptions
    prog = parse_file("sssp.dl")
    result = run_program(prog, load_database(prog, "fig1/"), RunOptions(engine="naive"))
"""
from .ast import Program, StratificationError, ValidationError, stratify, validate
from .engine import (
    DivergenceError,
    IterationCap,
    RunOptions,
    RunResult,
    Solution,
    Status,
    compute_cap,
    naive_eval,
    run_program,
    seminaive_eval,
)
from .ground import GroundedSystem, active_domain_restrict, ground, ico_apply
from .linear import linear_lfp, matrix_stability_index
from .loader import bundled, load_database
from .parser import ParseError, parse, parse_file, pretty
from .pops import BOOL, BOT, NAT, NNRAT, REAL_BOT, THREE, TROP, TROPPLUS, Pops, Tri, get_pops
from .store import Database, DomainTable, Relation, Schema

__version__ = "0.1.0"
