"""Pseudo-spectral tools for a surface-electromigration model of
Zakharov-Kuznetsov type: periodic solvers, conserved-quantity diagnostics,
dyadic decompositions, and numerical probes of the well-posedness estimates.
"""

__version__ = "0.1.0"

from semzk.spectral import (
    DEALIAS_FRACTION,
    Grid2D,
    MultiplierTable,
    RealField,
    SpectralField,
    apply_multiplier,
    dealias,
    forward_transform,
    inverse_transform,
    make_multiplier,
)
from semzk.norms import (
    DiagnosticsRecord,
    MixedNormDescriptor,
    conserved_I1,
    conserved_I2,
    diagnostics_header,
    mixed_norm,
    sobolev_norm,
)
from semzk.dynamics import (
    KINDS,
    EquationKind,
    LINEAR,
    SEM,
    ZK,
    SolitonParams,
    background_terms,
    nonlinear_rhs,
    poisson_residual,
    potential_profile,
    propagator_apply,
    sem_on_soliton,
    solve_potential,
    soliton_profile,
    soliton_profile_dx,
)
from semzk.integrators import (
    PicardReport,
    TrajectoryPath,
    duhamel_term,
    evolve,
    ifrk4_step,
    picard_solve,
)
from semzk.dyadic import (
    SparseBlock,
    SpaceTimeField,
    annulus,
    block_modes,
    bump,
    frequency_weight,
    modulation_weight,
    project_frequency,
    project_modulation,
    random_block,
    random_block_sparse,
    smooth_step,
    spacetime_from_snapshots,
)
from semzk.probes import (
    BilinearReport,
    BlockTrial,
    CoefficientBox,
    LinearProbeReport,
    NonlinearProbeReport,
    bilinear_bound,
    fit_separated_exponent,
    nonlinear_box,
    probe_block_bilinear,
    probe_l4_estimate,
    probe_linear_estimates,
    probe_nonlinear_estimate,
    product_l2,
    random_bandlimited_spacetime,
    random_low_mode_field,
    sparse_product_l2,
    xsb_norm,
)
from semzk.snapshots import Snapshot, read_snapshot, write_snapshot
from semzk.config import RunConfig, parse_toml_file, parse_toml_text
from semzk.scenarios import (
    DiagnosticsCollector,
    run_instability,
    run_picard_demo,
    run_probe_bilinear,
    run_probe_linear,
    run_probe_nonlinear,
    run_simulation,
    run_soliton_benchmark,
)
