//! Reports for the five-miner example DAG.

use std::fmt::Write;

use sdag_core::dag::TieBreak;
use sdag_core::dump::dump;
use sdag_core::fixture::{five_miners, Fixture};
use sdag_core::ledger::{dfs_order, Ledger};
use sdag_core::{Hash256, SDag};

fn names(f: &Fixture, ids: &[Hash256]) -> String {
    f.labels(ids).join(" ")
}

fn sorted_names(f: &Fixture, ids: impl IntoIterator<Item = Hash256>) -> String {
    let mut v: Vec<&str> = ids.into_iter().map(|i| f.label(&i)).collect();
    v.sort_unstable();
    v.join(" ")
}

pub fn level_report(f: &Fixture, d: &SDag) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "main chain: {}", names(f, &d.main_chain()));
    for k in 1..d.level_count() {
        let ms = d.main_milestone(k).unwrap();
        let _ = writeln!(s, "level {k} ({}): {}", f.label(&ms), sorted_names(f, d.level(k)));
    }
    let _ = writeln!(s, "pending: {}", sorted_names(f, d.pending_set()));
    let _ = writeln!(s, "milestone leaves: {}", sorted_names(f, d.milestone_leaf_set()));
    s
}

pub fn dfs_report(f: &Fixture, d: &SDag) -> String {
    let mut s = String::new();
    for k in 1..d.level_count() {
        let ms = d.main_milestone(k).unwrap();
        let order = dfs_order(d, &ms).expect("main-chain milestone");
        let _ = writeln!(s, "level {k}: {}", names(f, &order));
    }
    s
}

pub struct DemoOutputs {
    pub dag: String,
    pub levels: String,
    pub dfs: String,
    pub ledger: String,
}

pub fn build() -> DemoOutputs {
    let f = five_miners();
    let d = f.dag(TieBreak::LowestId);
    let ledger = Ledger::from_sdag(&d, f.ledger_config());
    DemoOutputs { dag: dump(&d), levels: level_report(&f, &d), dfs: dfs_report(&f, &d), ledger: ledger.to_csv() }
}
