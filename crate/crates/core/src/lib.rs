//! Labeled sequent calculus for dynamic logic with cyclic proofs, parametric in the
//! program language and its operational semantics.

pub mod autoprover;
pub mod cert;
pub mod cyclic;
pub mod document;
pub mod expr;
pub mod formula;
pub mod kernel;
pub mod label;
pub mod oracle;
pub mod parse;
pub mod program;
pub mod render;
pub mod script;
pub mod semantics;
pub mod sequent;
pub mod step;
pub mod subst;

pub use expr::{Expr, Int};
pub use formula::{CmpOp, Formula};
pub use label::{Label, Store, StoreHeap};
pub use program::{InstKind, Instantiation, Program};
pub use sequent::{LFormula, Occ, Sequent, Side};
pub use subst::Subst;
