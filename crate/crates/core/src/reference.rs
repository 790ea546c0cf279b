//! Published reference measurements at full scale.
//!
//! Group 1 was measured on 10^5 GIST descriptors (n = 960), group 2 on 9,876
//! RGB images (n = 12,288). These rows are for display next to harness
//! output; reproducing them needs the original data sets, which are not
//! bundled.

use crate::norms::NormOrder;
use crate::projection::ProjectionMode;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceRow {
    pub group: u8,
    pub mode: ProjectionMode,
    pub p: NormOrder,
    pub epsilon: f64,
    pub cost: u64,
    pub ratio: f64,
}

/// Data set behind each group: (group, description, s, n).
pub const REFERENCE_DATASETS: [(u8, &str, usize, usize); 2] = [
    (1, "GIST descriptors", 100_000, 960),
    (2, "RGB images", 9_876, 12_288),
];

const fn row(group: u8, mode: ProjectionMode, p: NormOrder, epsilon: f64, cost: u64, ratio: f64) -> ReferenceRow {
    ReferenceRow { group, mode, p, epsilon, cost, ratio }
}

use ProjectionMode::{Adaptive, Orthogonal};

pub const REFERENCE_ROWS: [ReferenceRow; 7] = [
    row(1, Orthogonal, NormOrder::L2, 6300.0, 4_584_277, 21.38),
    row(1, Adaptive, NormOrder::L2, 6300.0, 4_393_127, 22.31),
    row(2, Orthogonal, NormOrder::L1, 1_240_000.0, 8_571_752, 42.47),
    row(2, Orthogonal, NormOrder::L2, 8500.0, 10_386_043, 35.05),
    row(2, Orthogonal, NormOrder::L4, 825.0, 12_464_281, 29.32),
    row(2, Orthogonal, NormOrder::LINF, 161.0, 39_639_239, 9.19),
    row(2, Adaptive, NormOrder::L2, 8500.0, 10_343_766, 35.20),
];

pub fn reference_rows(group: u8) -> impl Iterator<Item = &'static ReferenceRow> {
    REFERENCE_ROWS.iter().filter(move |r| r.group == group)
}
