from .ssa import (
    ArrayElemAssign, ArrayElemRead, ArrayInit, Assign, Binary, Block, CallStmt,
    CastStmt, Cfg, Const, EDGE_FALSE, EDGE_TRUE, EDGE_UNCOND, IterReset,
    IterValid, IterValue, Jump, JumpIf, OpaqueStmt, Operand, ParamRef, Phi,
    PropRead, PropWrite, ReturnStmt, Stmt, Superglobal, ThrowStmt, Unary,
    Value, YieldStmt, defined_values, dump_cfg, format_stmt, used_operands,
)
from .lower import (
    IncompleteFunction, Lowerer, assigned_names, flatten_conditions,
    lower_function, lower_project,
)
