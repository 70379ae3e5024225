//! Discrete functions on the integers, their convolutions and norms, and
//! exact additive energies of lattice sets.

mod convolution;
mod function;
mod lattice;
mod norms;

pub use convolution::{convolve, convolve_with, ConvMethod, Convolved, FFT_THRESHOLD};
pub use function::DiscreteFunction;
pub use lattice::{
    energy_bruteforce, energy_bruteforce_capped, energy_interval_formula, energy_of_set, tensor_power,
    tensor_power_capped, trivial_lower_bound, LatticeSet, DEFAULT_ORACLE_CAP, DEFAULT_TENSOR_CAP,
};
pub use norms::{fourier_l4_pow4, l4_pow4_quadruple_sum, lq_norm, ratio_report, Bounded, RatioReport};

pub(crate) use norms::{l4hat_bounded, lq_bounded};
