//! Discrete gate sizing by gradient descent over a differentiable
//! sizing-aware timing model: straight-through rounding for integer sizes,
//! log-sum-exp smoothed timing targets, Gumbel-Softmax adaptive per-gate
//! learning rates, and a golden static timing analyzer for scoring.

pub mod bench;
pub mod cli;
pub mod layout;
pub mod model;
pub mod nn;
pub mod optimizer;
pub mod sta;
pub mod surrogate;
pub mod tape;
