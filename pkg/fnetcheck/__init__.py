VERSION = (0, 1, 0)
__version__ = '.'.join(map(str, VERSION))
try:
    from .model import FnetError, Model
    from .dsl import load_model, parse_model, render_model
    from .net import containment_closure, resolve_reference, validate_net
    from .consistency import check_specialization, check_view, match_connector
    from .scenario import check_scenario, compile_monitor, eval_condition
    from .sim import load_trace, run_monitor, run_simulation
    from .modes import check_mode_machine, check_variants, mode_timeline
except ImportError as exc:
    import traceback
    traceback.print_exc()
