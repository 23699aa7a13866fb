//! Polarization-dependent AC Stark shifts of the ¹⁷¹Yb⁺ ground-state hyperfine
//! qubits under a pulsed frequency comb.
//!
//! The pieces, in dependency order:
//! - [`ion_params`]: species constants, laser and field parameters
//! - [`polarization`]: Jones calculus for the HWP/QWP pair, circular basis
//! - [`dressing`]: Zeeman-dressed ground states and their dipole elements
//! - [`stark`]: second- and fourth-order differential shifts
//! - [`magic`]: minimum-shift angles and the cancellation threshold field
//! - [`ramsey`]: Ramsey fringes and dephasing under intensity noise

pub mod dressing;
pub mod error;
pub mod ion_params;
pub mod magic;
pub mod polarization;
pub mod ramsey;
pub mod stark;

pub use dressing::{dress, DressedBasis, GroundState};
pub use error::{Error, Result};
pub use ion_params::{builtin_yb171, load_species, IonSpecies, LaserField, MagneticField};
pub use magic::{find_min_shift, scan_theta, threshold_field, MagicSearchResult};
pub use polarization::PolarizationState;
pub use ramsey::{fit_coherence, simulate_decay, CoherenceFit, NoiseModel, RamseySequence};
pub use stark::{comb_spec, differential_shift, CombSpec, QubitKind, ShiftBreakdown, ShiftModel};
