//! Correlations, Bell-type inequalities and measurement-dependent hidden
//! variable models for bilocal and star networks.

pub mod error;
pub mod inequalities;
pub mod lhv;
pub mod oracle;
pub mod quantum;
pub mod scenario;

pub use error::{NetError, Result};
pub use inequalities::{md_bound, required_md, s_n, InequalityReport};
pub use lhv::{lhv_behavior, md_degree, MDLhvModel};
pub use oracle::{max_s_given_md, SearchConfig, SearchResult};
pub use quantum::{quantum_behavior, QuantumSetup};
pub use scenario::{BehaviorTensor, Scenario};
