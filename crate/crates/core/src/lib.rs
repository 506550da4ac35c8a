//! Structured blockDAG protocol core.
//!
//! Every block carries three references: `idp` to the creator's previous
//! block, `idm` to the highest milestone it knows and `idt` to a tip of
//! another peer. Milestones form a tree whose longest chain orders the DAG
//! into level sets, and the level sets order the ledger.

pub mod block;
pub mod crypto;
pub mod dag;
pub mod dump;
pub mod fixture;
pub mod hash;
pub mod ledger;
pub mod mempool;
pub mod node;
pub mod params;
pub mod tx;

pub use block::{classify, genesis, genesis_id, mine, tx_distance, Block, BlockClass, PeerId};
pub use dag::{SDag, TieBreak, Violation, ViolationKind};
pub use hash::Hash256;
pub use params::{Frac, Params, Threshold};
pub use tx::{Address, OutPoint, Transaction, TxInput, TxKind, TxOutput};
