"""Risk-aware assignment of RBAC roles to virtual machines.

Roles read overlapping slices of a check-in dataset; colocating roles on
leaky VMs lets one role infer a statistical property of data it cannot read.
The package builds Zipfian RBAC workloads, scores role sets with
information-theoretic properties and assigns roles to VMs to keep the
resulting disclosure risk low.
"""

from .assignment import (Assignment, DisclosureTable, build_disclosure_table, risk_of_role,
                         solve_exact, solve_nbh, solve_tdh, total_risk)
from .checkins import JointPmf, estimate_joint_pmf, ingest, map_poi, parse_checkins, slot_of
from .measures import (PropertyContext, PropertyKind, entropy, kl_divergence,
                       monotonicity_curve, mutual_information, property_value)
from .metrics import (RiskReport, build_report, discrimination_index, property_attackability,
                      quality_of_risk_reduction)
from .rbac import (RbacPolicy, SensitivePropertyProfile, SensitivityClass, bind_dataset,
                   classify_sensitivity, evaluate_profile, generate_workload, role_dataset,
                   zipf_sample)
from .vuln import VulnerabilityMatrix, generate_vuln_matrix, validate

__version__ = "0.1.0"

__all__ = [
    "Assignment", "DisclosureTable", "build_disclosure_table", "risk_of_role", "solve_exact",
    "solve_nbh", "solve_tdh", "total_risk", "JointPmf", "estimate_joint_pmf", "ingest", "map_poi",
    "parse_checkins", "slot_of", "PropertyContext", "PropertyKind", "entropy", "kl_divergence",
    "monotonicity_curve", "mutual_information", "property_value", "RiskReport", "build_report",
    "discrimination_index", "property_attackability", "quality_of_risk_reduction", "RbacPolicy",
    "SensitivePropertyProfile", "SensitivityClass", "bind_dataset", "classify_sensitivity",
    "evaluate_profile", "generate_workload", "role_dataset", "zipf_sample", "VulnerabilityMatrix",
    "generate_vuln_matrix", "validate",
]
