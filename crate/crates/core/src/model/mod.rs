//! Problem description: expressions, control sets, problem specs and the catalog.

pub mod catalog;
pub mod control_set;
pub mod expr;
pub mod problem;
