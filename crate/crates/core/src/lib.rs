pub mod area;
pub mod asymptotics;
pub mod funcspace;
pub mod numerics;
pub mod solver;
pub mod transform;
