//! Causal direction and causal order discovery from joint extremes.
//!
//! Pipeline: transform margins to a common α-Pareto scale ([`margins`]),
//! estimate the angular support interval of every variable pair and its
//! angular asymmetry coefficient ([`angular`]), then order the variables
//! with extremal ancestral search ([`discovery`]). [`simulate`] generates
//! data from heavy-tailed structural causal models and [`bench`] runs the
//! seeded replication experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angular;
pub mod bench;
pub mod discovery;
pub mod error;
pub mod graph;
pub mod io;
pub mod margins;
pub mod optim;
pub mod seeding;
pub mod simulate;

pub use angular::{aac_pair, estimate_support, polarize, AacConfig, PolarSeries, SupportInterval};
pub use discovery::{ease_order, pairwise_direction, score_matrix_from_data, Direction, ScoreMatrix};
pub use error::{Error, Result};
pub use graph::{CausalOrder, Dag};
pub use margins::{pareto_transform, Sample, TailIndex};
