//! Finite approximations for topological full groups: cocycle tables, sofic
//! almost actions, hyperfiniteness certificates, Følner bounds, the
//! Elek–Monod coloring and LEF models.

pub mod boxes;
pub mod elekmonod;
pub mod folner;
pub mod fullgroup;
pub mod graph;
pub mod groups;
pub mod hyperfinite;
pub mod lef;
pub mod rational;
pub mod sofic;
pub mod systems;
