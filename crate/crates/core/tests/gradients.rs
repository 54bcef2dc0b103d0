mod common;

use common::gradcheck::{run_all, TOLERANCE};

#[test]
fn every_op_and_loss_matches_finite_differences() {
    let results = run_all(11, 4, 3);
    assert!(results.len() >= 100, "only {} configurations", results.len());
    let bad: Vec<_> = results.iter().filter(|r| r.max_rel_err > TOLERANCE).collect();
    assert!(bad.is_empty(), "{bad:#?}");
}
