"""Event-triggered control simulator and certificate engine for modal systems."""

from . import cert, etm, linalg, model, sim
from .errors import (
    CertificateError,
    ConfigParseError,
    ConfigurationError,
    DefinitenessError,
    DomainError,
    EtcsimError,
    HorizonError,
    NotHurwitzError,
    ShapeError,
    SpectralGapError,
    UnsupportedStructureError,
    ZenoSuspected,
)
from .etm import ETMSpec, ETMVariant, EventOutcome, next_event, trigger_margin
from .model import (
    Decomposition,
    ModalSystem,
    apply_semigroup,
    beam_initial_preset,
    beam_project_initial,
    build_beam,
    build_heat_cascade,
    build_heat_rod,
    decompose,
    delta,
    input_norm,
    shift_zeno_sequence,
    state_norm,
)
from .sim import (
    EventLog,
    Trajectory,
    count_updates,
    min_inter_event,
    perturb_compare,
    settling_time,
    simulate,
)

__version__ = "0.1.0"
