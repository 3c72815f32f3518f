//! Exact input derivatives of network fields and parameter gradients.
//!
//! Input derivatives come from forward propagation of truncated Taylor jets
//! (up to third order in `x`, first order in `t`) through each layer. The jet
//! computation is itself recorded on a reverse-mode [`Tape`], so parameter
//! gradients of any loss built from jet channels are exact.

mod check;
mod jet;
mod tape;

pub use check::{finite_difference_check, loss_gradient, loss_value};
pub use jet::{evaluate_bundle, evaluate_bundles, network_on_tape, DerivativeBundle};
pub use tape::{Tape, Var, Vjp};

/// Which derivative channels a stacked jet carries.
///
/// Channel order is value, then `d/dx` through `d^x_order/dx^x_order`, then
/// `d/dt` when present.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JetLayout {
    pub x_order: usize,
    pub with_t: bool,
}

impl JetLayout {
    pub fn new(x_order: usize, with_t: bool) -> Self {
        assert!(x_order <= 3, "x derivatives above third order are not propagated");
        JetLayout { x_order, with_t }
    }

    /// Value channel only.
    pub fn value_only() -> Self {
        JetLayout {
            x_order: 0,
            with_t: false,
        }
    }

    pub fn channels(&self) -> usize {
        1 + self.x_order + usize::from(self.with_t)
    }

    pub fn t_channel(&self) -> Option<usize> {
        self.with_t.then_some(1 + self.x_order)
    }
}
