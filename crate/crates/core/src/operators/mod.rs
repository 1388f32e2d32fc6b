//! Operators acting on sampled fields.

mod maximal;
mod multiplier;
mod square;
mod subordination;

pub use maximal::{hl_maximal, m_s, rectangle_comparability, MaximalComparability};
pub use multiplier::{
    gradient, lp_block, poisson_semigroup, q_semigroup, riesz_potential, riesz_potential_unchecked,
    LpPartition, MEAN_TOLERANCE,
};
pub use square::{
    g_q, marcinkiewicz_d_alpha, t_j_square_function, DAlpha, DyadicQuadrature, ShellKind, TRange,
    TjDecomposition,
};
pub use subordination::{subordination, subordination_with_plan, w_alpha, SubordinationQuadrature};
