//! Executable distributive laws between the delay monad and algebraic monads.

pub mod cli;
pub mod combos;
pub mod delay;
pub mod freemodel;
pub mod laws;
pub mod lifting;
pub mod nogo;
pub mod theory;
