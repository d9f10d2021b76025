"""sepchan: a proof-outline checker for concurrent heap/channel programs.

The toolkit has three layers:

* a frontend for a small imperative language with bounded channels and
  for proof outlines whose conditions carry foreign/native temporal
  formulas next to separation-logic assertions;
* an exhaustive interleaving engine over the lowered transition
  systems, used both as a semantics and as a validation oracle;
* a rule-by-rule outline checker cross-validated against that oracle.
"""

from .assertions import (
    EvalContext, check_trace_inductive, check_trace_pointwise,
    eval_assertion, eval_condition, eval_temporal, eval_temporal_final,
    is_pure,
)
from .checker import (
    ResourceInvariant, StepRecord, Verdict, check_channel_receive,
    check_channel_send, check_consequence, check_critical_region,
    check_outline, default_invariant, strip_environment,
)
from .crossval import RuntimeCheckResult, outline_runtime_check
from .engine import (
    Bounds, ExploreResult, TripleResult, explore, initial_states_for,
    lower_program, make_initial_state, step, validate_triple, zero_stack,
)
from .lowering import LoweredSystem, Transition, TransitionSystem, lower
from .state import (
    ActionOccurrence, ChannelState, Heap, HeapOverlapError, LabeledTrace,
    ProgramState, SplitBoundExceeded, Stack, TemporalMemory,
    enumerate_splits, happens_before, heap_disjoint_union, label, project,
)
from .syntax import (
    Condition, Declarations, ProgramFile, SourceError, SpecFile,
    parse_condition_text, parse_program, parse_spec, parse_temporal_text,
    pretty_print,
)

__version__ = "0.2.0"
