pub mod descend;
pub mod landscape;
pub mod reduce;
pub mod restarts;
pub mod train;
pub mod verify;
