//! Grids, multi-component fields, coefficient data and the assembled
//! discrete elliptic operator.

mod assemble;
mod coeffs;
mod field;
mod grid;

pub use assemble::{assemble_strong, assemble_weak, CoupledOperator, OperatorKind};
pub use coeffs::{
    sample_points, tensor_stability, validate_coefficients, validate_strong, validate_weak,
    Assumption, AssumptionCheck, CoefficientReport, CoefficientsRef, Diffusion, FieldSpec,
    ScalarField, StrongCoefficients, Tabulated, Tensor4, TensorField, WeakCoefficients,
};
pub use field::{Field, PointFn, Profile};
pub use grid::{Grid, MIN_INTERIOR};
