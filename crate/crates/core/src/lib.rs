pub mod bounds;
pub mod dyck;
pub mod kernel;
pub mod pipeline;
pub mod projection;
pub mod rng;
pub mod trajectory;
pub mod validate;
pub mod transport;

/// Version stamped on every JSON report the crate writes.
pub const SCHEMA_VERSION: u32 = 1;
