//! Kernel operators on the grid: restricted application `T(f χ_S)`, modulated
//! suprema and empirical regularity constants of the kernel.

mod apply;
mod kernel;
mod regularity;

pub use apply::{
    apply_restricted, maximally_modulated, modulate, ModulationFamily, TransformTable,
    DEFAULT_TABLE_BUDGET,
};
pub use kernel::{dini_log_modulus, Kernel, KernelFn, KernelSpec, ModulusFn};
pub use regularity::{dini_constant, hormander_constant, DiniEstimate, HormanderEstimate, DINI_NODES};
