//! Symplectic differential systems `(v, α)′ = X(t)(v, α)` with `X(t)` in
//! `sp(2n)`: integration, conjugate instants and reduction to Morse–Sturm form.

mod detect;
mod integrate;
mod reduce;
mod system;

pub use detect::{
    conjugate_instants, conjugate_instants_with, crossing_data, maslov_regular, Cluster, ConjugateReport,
    CrossingData, DetectOptions, Instant, InstantKind, ReportMeta, Signature, SIGNATURE_CONVENTION,
};
pub use integrate::{fundamental_matrix, phi_at, Fundamental, IntegrateOptions};
pub use reduce::{apply_isomorphism, flatten_b, morse_sturm_curvature, to_morse_sturm, to_morse_sturm_report, IsoPair, Reduction};
pub use system::{AnalyticId, Blocks, BlocksJet, Coeff, MatCurve, MorseSturm, SampledMatCurve, SympDiffSystem};
