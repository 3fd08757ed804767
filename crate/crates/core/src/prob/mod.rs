//! Exact finite probability tables and information measures (bits).

mod alphabet;
mod measures;
mod table;

pub use alphabet::Alphabet;
pub use measures::{
    conditional_entropy, entropy, entropy_of, joint_entropy, kl_divergence, kl_min_mass_bound, kl_of,
    min_positive_mass, mutual_information, Divergence, INFO_TOL,
};
pub use table::{CondPmf, JointPmf, Pmf, ProbTable, MASS_TOL};
