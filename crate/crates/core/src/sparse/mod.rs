//! Sparse families and their construction: exceptional sets, the local
//! Calderón–Zygmund stopping time, recursive local families, the ring cover of the
//! window and the dilated global family.

mod family;
mod pipeline;
mod stopping;

pub use family::{SparseEntry, SparseEntryRecord, SparseFamily, SparseFamilyRecord};
pub use pipeline::{
    build_sparse_domination, exceptional_set, local_sparse_family, partition_cover, support_box,
    transform_on_window, ConstantLedger, CubeRecord, LevelStat, PipelineConfig, SparseDomination,
    ThresholdMode,
};
pub use stopping::local_cz_decomposition;
