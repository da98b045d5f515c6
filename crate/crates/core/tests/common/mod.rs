pub mod mock;
pub mod qf;
