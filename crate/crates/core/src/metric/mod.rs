//! Riemannian metric tensors and analytic metric fields.

mod field;
mod tensor;

pub use field::{FieldKind, MetricDerivatives, MetricField, Profile, Rect};
pub use tensor::{pullback, rotation, MetricTensor, SymEigen};
