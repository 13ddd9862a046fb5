from .geometry import (
    format_float,
    head_on_pair,
    min_distance,
    random_allowed_positions,
    unit_vector,
)
