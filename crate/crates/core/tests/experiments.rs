use energy_lab::experiments::{bounds_table, render_csv, BoundsOptions};

#[test]
fn bounds_table_matches_golden_csv() {
    let rows = bounds_table(&[2, 3], &BoundsOptions::default()).unwrap();
    let golden = include_str!("golden/bounds_2_3.csv");
    assert_eq!(render_csv(&rows), golden);
}
