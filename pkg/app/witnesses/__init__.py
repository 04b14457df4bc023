# Witness constructions and the checks they report through
from app.witnesses.antihomog import antihomog_partition, halved_target
from app.witnesses.c1 import c1_builder, c1_extract_report, c1_pair_extraction
from app.witnesses.checks import check_bijection, check_iso, check_transfer
from app.witnesses.erdos_ulam import block_ratio, eu_dense_counterexample, eu_nondense_counterexample
from app.witnesses.homogeneity import (
    costar_report,
    costar_witness,
    edfin_report,
    edfin_witness,
    gallai2_report,
    gallai2_witness,
    idd_enum_report,
    idd_enum_witness,
    product_report,
    product_witness,
    superset_closure,
    superset_report,
    trace_a_prime,
)

__all__ = [
    "antihomog_partition",
    "block_ratio",
    "c1_builder",
    "c1_extract_report",
    "c1_pair_extraction",
    "check_bijection",
    "check_iso",
    "check_transfer",
    "costar_report",
    "costar_witness",
    "edfin_report",
    "edfin_witness",
    "eu_dense_counterexample",
    "eu_nondense_counterexample",
    "gallai2_report",
    "gallai2_witness",
    "halved_target",
    "idd_enum_report",
    "idd_enum_witness",
    "product_report",
    "product_witness",
    "superset_closure",
    "superset_report",
    "trace_a_prime",
]
