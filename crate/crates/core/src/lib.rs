//! Dynamic relational programs: first-order update formulas that maintain
//! auxiliary relations under tuple insertions and deletions, together with
//! decision procedures for emptiness, consistency and history independence
//! on the fragments where these are decidable, and bounded searches
//! everywhere else.

pub mod logic;
pub mod dynprog;
pub mod dsl;
pub mod corpus;
pub mod counter;
pub mod wsts;
pub mod emptiness;
pub mod hi;
pub mod transforms;
pub mod modulo;
