//! Exact l_p range search over a cascade of block-projected subspaces.
//!
//! Each level maps blocks of coordinates to a single feature whose
//! difference lower-bounds the block's l_p distance, so candidates can be
//! pruned coarse-to-fine without false dismissals.

pub mod bench;
pub mod cost;
pub mod dataset;
pub mod error;
pub mod norms;
pub mod oracle;
pub mod par;
pub mod pca;
pub mod persist;
pub mod projection;
pub mod reference;
pub mod report;
pub mod tree;

pub use bench::{build_cells, run_bench, split_queries, BenchConfig, BuiltCell, DataSource, EpsilonPolicy};
pub use cost::{estimate_cost, fit_const};
pub use dataset::{
    generate, load_auto, load_csv, load_fvecs, save_auto, write_csv, write_fvecs, DataSet, SyntheticModel, SyntheticSpec,
};
pub use error::{Error, Result};
pub use norms::{check_norm_equivalence, lp_distance, lp_norm, NormOrder};
pub use oracle::{brute_force_range, brute_force_range_with, calibrate_epsilon, BruteForceResult, CalibrationSpec};
pub use par::Execution;
pub use pca::{first_principal_component, CovarianceAccumulator, PrincipalComponent, SymmetricMatrix};
pub use persist::{load_index, read_index, save_index, write_index};
pub use projection::{
    adaptive_feature, diversion, orthogonal_feature, project_level, q_mapping_norm, BlockPartition, BlockProjector,
    DiversionReport, ProjectionLevel, ProjectionMode,
};
pub use report::{read_report, write_report, BenchRow, ReportFormat};
pub use tree::{cascade_cost, BuildDiagnostics, DimensionSchedule, Match, QueryReport, SubspaceIndex};
