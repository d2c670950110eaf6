"""Impedance models, exclusion bandwidth and frequency scans for grid-forming converters."""
from .band_index import (BandIndexReport, ComplianceBandSet, NoCornerError, compliance_check,
                         compliance_preset, compute_band_index, find_corner_frequencies)
from .curves import ImpedanceCurve, ingest_measured_curve, write_curve_csv
from .models import (APCL_SIMPLIFIED, CCL_ONLY, CCL_VCL, FULL_NUMERIC, ModelTier,
                     apcl_simplified_matrix, dq_to_positive_sequence, full_impedance_numeric,
                     sample_curve, tier_from_name)
from .operating_point import OperatingPoint, build_ssop_matrices, solve_operating_point
from .params import ConverterParams, GridParams, load_params, per_unit_bases
from .tf import RationalTF, TFMatrix2x2

__all__ = [
    "APCL_SIMPLIFIED", "CCL_ONLY", "CCL_VCL", "FULL_NUMERIC", "BandIndexReport",
    "ComplianceBandSet", "ConverterParams", "GridParams", "ImpedanceCurve", "ModelTier",
    "NoCornerError", "OperatingPoint", "RationalTF", "TFMatrix2x2", "apcl_simplified_matrix",
    "build_ssop_matrices", "compliance_check", "compliance_preset", "compute_band_index",
    "dq_to_positive_sequence", "find_corner_frequencies", "full_impedance_numeric",
    "ingest_measured_curve", "load_params", "per_unit_bases", "sample_curve",
    "solve_operating_point", "tier_from_name", "write_curve_csv",
]
