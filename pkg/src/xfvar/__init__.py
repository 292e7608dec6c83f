"""Counterfactual explainability of model outputs.

A probability measure over an algebra of explanation events on input
variables: atoms are normalized interaction variance components, the
mass of "S explains Y" is the normalized upper sensitivity index of S.
Works for black-box functions of independent inputs (Monte Carlo or
exact enumeration) and for outcomes of fitted causal models.
"""

from .algebra import (
    EXACT,
    Clause,
    ExplanationMeasure,
    Provenance,
    ShapleyValues,
    TotalsTable,
    ValidationReport,
    clause_atom,
    clause_subset,
    clause_to_str,
    clause_var,
    clip_negative_atoms,
    iter_subsets,
    measure_from_totals,
    measure_interaction,
    measure_marginalize,
    measure_query,
    measure_query_str,
    measure_validate,
    parse_clause,
    popcount,
    shapley_from_measure,
    subset_label,
    subset_zeta,
    superset_mobius,
    superset_zeta,
    totals_from_measure,
)
from .anova_oracle import (
    AnovaDecomposition,
    DiscreteDomain,
    SensitivityIndices,
    exact_contrast_cov,
    exact_contrast_var,
    exact_measure,
    exact_pickfreeze,
    hoeffding_decompose,
    indices_from_decomposition,
    rademacher_domain,
)
from .errors import (
    ConsistencyError,
    CycleError,
    DomainError,
    FitError,
    ModelError,
    NotReducibleError,
    ParseError,
    XfvarError,
    ZeroVarianceError,
)
from .fit import Dataset, FitConfig, dag_from_json, fit_model, read_csv, read_dag
from .formula import Formula, parse_formula
from .mc import Estimate, EstimatorConfig
from .report import (
    RunReport,
    dumps_report,
    format_table,
    read_report,
    report_from_json,
    report_to_json,
    subset_key,
    write_report,
)
from .scm import (
    AdditiveNoise,
    Dag,
    Deterministic,
    HeteroGaussian,
    Mechanism,
    ParentFn,
    QuantileTable,
    RootCategorical,
    RootEmpirical,
    RootGaussian,
    RootRademacher,
    RootUniform,
    ScmModel,
    ancestral_closure,
    counterfactual_outcome,
    counterfactual_total,
    estimate_counterfactual_measure,
    forward_sample,
    model_from_json,
    model_to_json,
    read_model,
    sample_noise,
    topo_order,
    write_model,
)
from .sensitivity import (
    IndependentSampler,
    estimate_lower,
    estimate_measure,
    estimate_superset,
    estimate_upper,
    interaction_contrast,
    named_function,
    standard_normal_sampler,
)
from .venn import venn_ascii, venn_svg

__version__ = "0.1.0"

__all__ = [
    "AdditiveNoise",
    "AnovaDecomposition",
    "Clause",
    "ConsistencyError",
    "CycleError",
    "Dag",
    "Dataset",
    "Deterministic",
    "DiscreteDomain",
    "DomainError",
    "EXACT",
    "Estimate",
    "EstimatorConfig",
    "ExplanationMeasure",
    "FitConfig",
    "FitError",
    "Formula",
    "HeteroGaussian",
    "IndependentSampler",
    "Mechanism",
    "ModelError",
    "NotReducibleError",
    "ParentFn",
    "ParseError",
    "Provenance",
    "QuantileTable",
    "RootCategorical",
    "RootEmpirical",
    "RootGaussian",
    "RootRademacher",
    "RootUniform",
    "RunReport",
    "ScmModel",
    "SensitivityIndices",
    "ShapleyValues",
    "TotalsTable",
    "ValidationReport",
    "XfvarError",
    "ZeroVarianceError",
    "ancestral_closure",
    "clause_atom",
    "clause_subset",
    "clause_to_str",
    "clause_var",
    "clip_negative_atoms",
    "counterfactual_outcome",
    "counterfactual_total",
    "dag_from_json",
    "dumps_report",
    "estimate_counterfactual_measure",
    "estimate_lower",
    "estimate_measure",
    "estimate_superset",
    "estimate_upper",
    "exact_contrast_cov",
    "exact_contrast_var",
    "exact_measure",
    "exact_pickfreeze",
    "fit_model",
    "format_table",
    "forward_sample",
    "hoeffding_decompose",
    "indices_from_decomposition",
    "interaction_contrast",
    "iter_subsets",
    "measure_from_totals",
    "measure_interaction",
    "measure_marginalize",
    "measure_query",
    "measure_query_str",
    "measure_validate",
    "model_from_json",
    "model_to_json",
    "named_function",
    "parse_clause",
    "parse_formula",
    "popcount",
    "rademacher_domain",
    "read_csv",
    "read_dag",
    "read_model",
    "read_report",
    "report_from_json",
    "report_to_json",
    "sample_noise",
    "shapley_from_measure",
    "standard_normal_sampler",
    "subset_key",
    "subset_label",
    "subset_zeta",
    "superset_mobius",
    "superset_zeta",
    "topo_order",
    "totals_from_measure",
    "venn_ascii",
    "venn_svg",
    "write_model",
    "write_report",
]
