pub mod approx;
pub mod covering;
pub mod emip;
pub mod io;
pub mod milp;
pub mod pwl;
pub mod rational;
pub mod reduction;
pub mod voting;

#[cfg(feature = "dev-oracle")]
pub mod oracle;
