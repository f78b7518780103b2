pub mod error;
pub mod expo;
pub mod kernel;
pub mod params;
pub mod profile;
pub mod wave;
pub mod newton;
pub mod solver;
pub mod parallel;
pub mod quad;
pub mod stability;
pub mod continuation;
pub mod difm;
pub mod generic;
pub mod oracles;
pub mod io;
pub mod families;
pub mod experiments;
pub mod verify;
