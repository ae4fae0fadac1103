pub mod lang;
pub mod nets;
pub mod asym;
pub mod statecomp;
pub mod compile;
pub mod train;
pub mod verify;
