use paveval_bench::{crowded_detections, dataset, noisy_predictions};

#[test]
fn fixtures_are_seeded() {
    let a = dataset(1, 5, 3, 100, 80, true);
    assert_eq!(a, dataset(1, 5, 3, 100, 80, true));
    assert_ne!(a, dataset(2, 5, 3, 100, 80, true));
    assert!(a
        .iter()
        .all(|r| r.annotations.len() == 3 && r.validate().is_ok()));
    let p = noisy_predictions(&a, 9, 2.0, 4);
    assert_eq!(p, noisy_predictions(&a, 9, 2.0, 4));
    assert!(p.values().all(|d| d.len() == 7));
    assert_eq!(crowded_detections(3, 50).len(), 50);
}
