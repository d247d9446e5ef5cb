//! Worked applications of the screening model: drug approval, civil
//! service reform and CEO strategy permission. Each builder returns a
//! ready-to-solve scenario together with what is needed to read the
//! optimal menu back in application terms.

// `!(x > 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ceo;
pub mod civil;
pub mod fda;
pub mod lp;
