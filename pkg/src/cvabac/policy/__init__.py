"""Authorization condition language, policy documents and decisions."""

from .document import (ALLOW, EVALUATION_ERROR, NO_POLICY, SOURCE_FAILED, TARGET_FAILED, Decision,
                       OperationPolicy, PolicyDocument, ScopeRule, auth_op, authorize_activity,
                       load_policy_document, policy_document_from_dict)
from .errors import (DuplicateOperation, KindError, PolicyError, PolicyIoError, PolicySyntaxError,
                     SchemaError, UnboundVariable)
from .evaluate import EvalContext, evaluate, evaluate_expr
from .parser import parse_expr, print_expr

__all__ = [
    "ALLOW", "EVALUATION_ERROR", "NO_POLICY", "SOURCE_FAILED", "TARGET_FAILED",
    "Decision", "OperationPolicy", "PolicyDocument", "ScopeRule", "auth_op",
    "authorize_activity", "load_policy_document", "policy_document_from_dict",
    "DuplicateOperation", "KindError", "PolicyError", "PolicyIoError", "PolicySyntaxError",
    "SchemaError", "UnboundVariable", "EvalContext", "evaluate", "evaluate_expr",
    "parse_expr", "print_expr",
]
