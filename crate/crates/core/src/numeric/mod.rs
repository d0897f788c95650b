//! Exact and interval number types backing digit extraction.

mod exact;
mod interval;

pub use exact::ExactReal;
pub use interval::{Dyadic, Interval, Round};
