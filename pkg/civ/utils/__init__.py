from .errors import CivError
from .civ_helpers import measure_execution_time, parse_node_list, parse_tuple_label, tuple_label

__all__ = [
    "CivError",
    "measure_execution_time",
    "parse_node_list",
    "parse_tuple_label",
    "tuple_label",
]
