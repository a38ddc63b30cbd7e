//! Synthetic pointwise cross sections and self-shielded multigroup libraries.

mod condense;
mod groups;
mod library;
mod nuclide;
mod spectrum;

pub use condense::{
    background_xs, bondarenko_factor, chord_length, group_quadrature, infinitely_dilute_mg,
    GroupXs, ShieldingFactors, ESCAPE_FREE_CHORD_CM,
};
pub use groups::EnergyGroupStructure;
pub use library::{
    build_library, Constituent, LibraryMode, LibraryOptions, MaterialComposition, MaterialXs, MgLibrary,
    DILUTE_SIGMA0,
};
pub use nuclide::{PointXs, Resonance, ResonanceNuclide, E_REF_THERMAL, GLOBAL_E_MAX, GLOBAL_E_MIN};
pub use spectrum::{fission_group_fractions, SpectrumSegment, WeightSpectrum};
