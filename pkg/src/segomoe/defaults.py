from __future__ import annotations

# Surrogate hyperparameter search
nugget_start = 1e-10
nugget_max = 1e-4
nugget_factor = 10.0
# Iterative refinement of the mean weights against the kernel without nugget.
refinement_steps = 2
log10_theta_bounds = (-3.0, 2.0)
theta_starts = 10
theta_polish_iterations = 200
duplicate_tolerance = 1e-12

# Pareto / hypervolume
reference_margin = 0.1
reference_offset = 1e-6
hypervolume_mc_samples = 200_000
hypervolume_mc_seed = 0

# Acquisition
gamma = 1.0
criterion_mc_samples = 2_000

# Infill
infill_starts = 20
infill_archive_starts = 5
constraint_tolerance = 1e-6
dedup_draws = 100
infill_max_iterations = 400

# NSGA-II
population_size = 100
generations = 200
crossover_probability = 0.9
crossover_eta = 15.0
mutation_eta = 20.0

# Service
data_dir = "segomoe-data"
port = 8000
max_budget = 5000
wire_version = 1
