//! Structure, sequence and distribution metrics.

mod distribution;
mod sequence;
mod structure;

pub use distribution::{
    angle_divergence, ramachandran_bins, region, AngleHistogram, Divergence, RamachandranCounts,
    Region, NUM_BINS, SMOOTHING_EPS,
};
pub use sequence::{
    nw_score, recovery_rate, seq_diversity, seq_similarity, AlignmentConfig, DEFAULT_GAP_PENALTY,
};
pub use structure::{
    contact_rate, kabsch, kabsch_rmsd, rmsd, roundtrip_rmsd, superpose, tm_d0, tm_score, RigidTransform,
    RoundtripReport,
};
