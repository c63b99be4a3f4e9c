pub mod eval;
pub mod run;
pub mod synth;
pub mod train;
