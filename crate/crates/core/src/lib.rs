pub mod audit;
pub mod cli;
pub mod decomposition;
pub mod equilibrium;
pub mod generate;
pub mod instance;
pub mod pipeline;
pub mod rational;
pub mod reduction;
pub mod rounding;
pub mod simplex;
