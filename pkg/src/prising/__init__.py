"""Differentially private estimation of the Ising inverse temperature."""

from .estimator import (Calibration, EstimateBatch, EstimateReport, PrivacyBudget, calibrate,
                        mple, prising, prising_many, pseudo_likelihood_slope,
                        pseudo_likelihood_value, sample_noise, solve_perturbed)
from .graph import (CouplingMatrix, GraphFormatError, Network, coupling_normalized_laplacian,
                    coupling_scaled_adjacency, generate_erdos_renyi, generate_regular,
                    load_edge_list, load_outcomes, prune, row_sum_max)
from .ising import (IsingModel, hamiltonian, local_fields, log_partition_exact,
                    sample_exact, sample_glauber)

__all__ = [
    "Calibration", "CouplingMatrix", "EstimateBatch", "EstimateReport", "GraphFormatError",
    "IsingModel", "Network", "PrivacyBudget", "calibrate", "coupling_normalized_laplacian",
    "coupling_scaled_adjacency", "generate_erdos_renyi", "generate_regular", "hamiltonian",
    "load_edge_list", "load_outcomes", "local_fields", "log_partition_exact", "mple",
    "prising", "prising_many", "prune", "pseudo_likelihood_slope", "pseudo_likelihood_value",
    "row_sum_max", "sample_exact", "sample_glauber", "sample_noise", "solve_perturbed",
]
