//! Exact and certified evaluation of the conjectured distributions of
//! Sylow `p`-subgroups of class groups of `Γ`-extensions, together with the
//! independent checks used to validate them: moment reconstruction and a
//! random symplectic matrix model.

pub mod decomp;
pub mod galois;
pub mod measure;
pub mod moments;
pub mod nongalois;
pub mod partmod;
pub mod qexact;
pub mod spmodel;
pub mod verify;

pub use decomp::{ComponentData, DecompData, GroupSpec};
pub use measure::{LevelSpec, MeasureError};
pub use partmod::{ModuleShape, Partition};
pub use qexact::{CertValue, QNum, Rational};
