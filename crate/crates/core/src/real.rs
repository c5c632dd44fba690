//! Floating-point scalar abstraction for the chain solver.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the analytic queue math is generic over: f32 or f64.
///
/// The acceptance tolerances (1e-10 .. 1e-12) are only reachable with f64, which
/// is the default everywhere; f32 remains available for memory-bound sweeps.
pub trait Real: Float + FromPrimitive + core::fmt::Debug + 'static {
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Real")
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize converts to any Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}
