//! Analytic gradients of every loss term w.r.t. every Gaussian parameter,
//! and a finite-difference checker for them.

mod blend;
mod full;
mod geom;
pub mod gradcheck;

pub use blend::{backward_blend, backward_color_var, backward_normal_var, BlendUpstream, ContribGrad};
pub use full::{backward_full, backward_splats, GradientBuffer};
pub use geom::{backward_alpha_geom, finalize, geom_term, AlphaGeomGrad, GeomAccum, GeomTerm};
