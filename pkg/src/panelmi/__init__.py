"""Multiple imputation for country-year panels: PMM chained equations, pooling,
screening diagnostics and composite capacity indices."""
from .datamodel import (Capacity, MissingProfile, PanelDataset, Role, VariableMeta,
                        build_panel, from_columns, missing_profile)
from .errors import (CollinearityError, ConfigError, DuplicateCellError, IncompleteAuxiliary,
                     IngestError, InsufficientData, PanelError, PanelValueError,
                     ShapeMismatchError, UnimputableVariable, UnknownCodeError)
from .mice import ImputationResult, MiceConfig, VisitOrder, run_mice
from .pmm import MatchType, PmmSettings
from .pooling import PooledEstimate, per_variable_fmi, pool, pooled_regress

__version__ = "0.1.0"

__all__ = [
    "Capacity", "MissingProfile", "PanelDataset", "Role", "VariableMeta", "build_panel",
    "from_columns", "missing_profile", "CollinearityError", "ConfigError", "DuplicateCellError",
    "IncompleteAuxiliary", "IngestError", "InsufficientData", "PanelError", "PanelValueError",
    "ShapeMismatchError", "UnimputableVariable", "UnknownCodeError", "ImputationResult",
    "MiceConfig", "VisitOrder", "run_mice", "MatchType", "PmmSettings", "PooledEstimate",
    "per_variable_fmi", "pool", "pooled_regress",
]
