pub mod bnb;
pub mod catalog;
pub mod cli;
pub mod copolyblock;
pub mod expr;
pub mod neurodynamic;
pub mod outcome;
pub mod problem;
