//! Exact computations for completed Tate constructions on periodic theories.

pub mod error;
pub mod ring;
pub mod series;
pub mod fgl;
pub mod tate;
pub mod floer;

pub use error::{Error, Result};
pub use ring::{construct_ring, Elem, Ring, RingDescriptor};
pub use fgl::{catalog, fgl_axiom_check, FglSpec, FormalGroupLaw};
pub use series::{BivariateSeries, GradedSeries, TrivariateSeries, UnitProfile};
pub use floer::{BlindedData, Homology, ManifoldModel, OrbitDatum};
pub use tate::{Parity, TateValue};
