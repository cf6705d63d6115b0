//! District-heating dispatch with energy and grade (temperature) prices.
//!
//! A case ([`case::CaseDefinition`]) describes a water network with fixed
//! mass flows, heat sources with quadratic costs, loads, and temperature
//! requirements over a horizon of periods. [`dispatch`] turns it into a
//! convex QP solved by [`qp`]; [`pricing`] reads energy prices (LMPs) and
//! grade prices off the multipliers and settles both pricing rules;
//! [`surplus`] splits the operator's surplus into congestion rent and the
//! two inertia terms and checks the identities that tie them together;
//! [`oracle`] re-derives prices by finite differences.
//!
//! ```
//! use heatgrade::{qp::QpSettings, scenarios, surplus::analyse};
//!
//! let a = analyse(&scenarios::toy(), &QpSettings::default()).unwrap();
//! let gen = a.prices.get(0, 0).lmp;
//! let load = a.prices.get(1, 0).lmp;
//! assert!(load < gen);
//! assert!(a.double.surplus[0].abs() < 1e-6);
//! assert!(a.energy.surplus[0] < 0.0);
//! ```

pub mod case;
pub mod case_file;
pub mod dispatch;
pub mod network;
pub mod oracle;
pub mod pipeline;
pub mod pricing;
pub mod qp;
pub mod report;
pub mod scenarios;
pub mod surplus;
pub mod units;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/network.md")]
    pub mod network {}
    #[doc = include_str!("../../../book/src/dispatch.md")]
    pub mod dispatch {}
    #[doc = include_str!("../../../book/src/settlement.md")]
    pub mod settlement {}
    #[doc = include_str!("../../../book/src/surplus.md")]
    pub mod surplus {}
    #[doc = include_str!("../../../book/src/units.md")]
    pub mod units {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    pub mod oracle {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
