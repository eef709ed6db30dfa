from .io import load_epi_csv, load_genomic_csv, load_panels, load_policy_csv, load_spatial_csv, write_panels
from .types import (
    POLICY_IDS,
    POLICY_LEVELS,
    DataRecord,
    EpiSeriesPoint,
    GenomicRecord,
    GenomicRow,
    Panels,
    PolicyRecord,
    SpatialProfile,
    StateId,
    WeekIndex,
)
