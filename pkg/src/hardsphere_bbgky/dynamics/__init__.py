from .models import (
    MAX_PARTICLES,
    CollisionEvent,
    CollisionPreconditionError,
    Configuration,
    ConfigurationError,
    PathologyError,
    PathologyFlag,
    PathologyKind,
    PhasePoint,
)
from .events import apply_collision, next_collision
from .flow import (
    ClusterFlowCache,
    TrajectoryRecorder,
    act_on_observable,
    act_on_state,
    evolve,
    free_contact_time,
    free_generator,
)
