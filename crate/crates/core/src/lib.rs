//! Discretization of continuous frames on finite quadrature models.
//!
//! A [`FrameModel`] places frame vectors `psi_x in C^d` on the points of a
//! [`QuadratureSpace`]. Coverings of the grid, the oscillation of the
//! reproducing kernel over them, and the sampled operator `U_Phi` yield
//! certified discrete frames, atomic decompositions and Banach frames.

pub mod covering;
pub mod discretizer;
pub mod error;
pub mod frame;
pub mod kernel;
pub mod linalg;
pub mod oscillation;
pub mod pipeline;
pub mod quadrature;
pub mod spaces;
pub mod verify;

pub use covering::{build_pou, uniform_covering, uniform_covering_axes, AxisWindow, Covering, CoveringReport, PartitionOfUnity, PouKind};
pub use error::{Error, Result};
pub use frame::{FrameModel, GaborParams, HilbertVector};
pub use kernel::{DiscreteMeasure, Kernel, Weight2D};
pub use oscillation::{check_property_d, kernel_phase, osc_kernel, refine_until, OscReport, PhaseFunction, PhaseRule, RefineOptions};
pub use quadrature::{GridFunction, QuadratureSpace};
pub use spaces::{norm_flat, norm_natural, Exponent, SequenceNorms, WeightedLp};
pub use pipeline::{discretize, DiscretizationResult, PipelineOptions};
pub use verify::InequalityCheck;
