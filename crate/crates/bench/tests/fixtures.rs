use conjdense::rational::ratio;
use conjdense_bench::{half_set, random_map};

#[test]
fn fixtures_are_deterministic_and_half_measure() {
    assert_eq!(random_map(8, 1), random_map(8, 1));
    let a = half_set(10, 2);
    assert_eq!(a.measure(), ratio(1, 2));
    assert_eq!(a, half_set(10, 2));
}
