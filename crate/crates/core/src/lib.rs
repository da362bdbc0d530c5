pub mod ast;
pub mod engine;
pub mod feht;
pub mod formula;
pub mod interp;
pub mod oracle;
pub mod parser;
pub mod scalar;
pub mod smt;
pub mod verify;

pub use ast::{ArithExpr, BoolExpr, Stmt, VarName};
pub use feht::{Feht, Hints, QuantifiedProgram, Quantifier};
pub use formula::{Formula, NameSupply, ParametricAssertion};
pub use parser::{parse_spec, print_spec, ParseError};
pub use verify::{verify, Report, Verdict, VerifyConfig, VerifyError};

/// Interpreter states over machine integers; overflow is reported, not wrapped.
pub type FastState = interp::State<i64>;
/// Interpreter states over unbounded integers.
pub type ExactState = interp::State<num_bigint::BigInt>;
pub type FastVerdict = oracle::OracleVerdict<i64>;
pub type ExactVerdict = oracle::OracleVerdict<num_bigint::BigInt>;
