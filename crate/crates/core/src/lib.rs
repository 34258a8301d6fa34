//! Analysis and synthesis of negative-imaginary linear systems.
//!
//! A square transfer matrix R(s) with no poles in the open right half
//! plane is negative imaginary when j[R(jw) - R(jw)*] is positive
//! semidefinite for all w > 0 off the poles. Systems of this kind show up
//! whenever force actuators are collocated with position sensors, which is
//! why the crate revolves around lightly damped flexible structures: modal
//! plant models, frequency sweeps, state-space certificates for the NI,
//! strict-NI and bounded-band variants, interconnection stability tests
//! based on DC gain, and static state-feedback synthesis that enforces the
//! property on the closed loop.

pub mod analysis;
pub mod controllers;
pub mod lmi;
pub mod lti;
pub mod modal;
pub mod numerics;
pub mod sim;
pub mod stability;
pub mod synthesis;

pub use lti::StateSpace;
