//! Float functions backed by `libm`, so results are identical with and
//! without `std` and across platforms.

pub(crate) use libm::{ceil, cos, cosh, exp, fabs as abs, log, log2, sin, sinh, sqrt};
