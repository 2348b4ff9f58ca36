"""Context-oriented programming with event-driven adaptation.

A program runs against a Datalog context. Behavioural variations and
dlet-bound parameters pick their code by querying the context; events
change the context asynchronously, and checkpoints recorded at dispatch
time let the running application recover when a selected goal stops holding.
"""

from .datalog import Atom, Context, parse_datalog, parse_goal, retract_fact, solve, stratify, tell_fact
from .events import EventDef, HandlerTable, MasterConfig, Scenario, apply_event, enqueue, run, step_master
from .interpreter import PEnv, SlaveConfig, dsp, run_to_value, step_slave
from .parser import parse_expr
from .syntax import closed_check, fresh_var, pretty, substitute

__all__ = [
    "Atom", "Context", "parse_datalog", "parse_goal", "retract_fact", "solve", "stratify", "tell_fact",
    "EventDef", "HandlerTable", "MasterConfig", "Scenario", "apply_event", "enqueue", "run", "step_master",
    "PEnv", "SlaveConfig", "dsp", "run_to_value", "step_slave", "parse_expr", "closed_check",
    "fresh_var", "pretty", "substitute",
]
