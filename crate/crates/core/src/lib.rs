//! Exact symbolic tooling for residues of Rankin-Selberg periods on GL(n) x GL(n+1).

pub mod cones;
pub mod formal_mero;
pub mod lfactors;
pub mod local_zeta;
pub mod parabolic;
pub mod quad;
pub mod rat;
pub mod relevance;
pub mod rs;
pub mod special;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Per-module versions embedded in reports; bump when a module's output changes.
pub const MODULE_VERSIONS: &[(&str, &str)] = &[
    ("parabolic", "1.0.0"),
    ("rs", "1.0.0"),
    ("cones", "1.0.0"),
    ("formal_mero", "1.0.0"),
    ("lfactors", "1.0.0"),
    ("relevance", "1.0.0"),
    ("local_zeta", "1.0.0"),
];
