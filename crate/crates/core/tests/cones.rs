mod common;

use common::cone_probe;
use noc_core::cones::{adjacent_cone_member, second_order_member, ConvexSet, Membership};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn disc() -> ConvexSet {
    ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap()
}

#[test]
fn disc_bottom_has_the_upper_half_plane_as_adjacent_cone() {
    let u = [0.0, -1.0];
    for (v, inside) in [([1.0, 0.0], true), ([-3.0, 0.2], true), ([0.5, -0.1], false), ([0.0, -1.0], false)] {
        let c = adjacent_cone_member(&disc(), &u, &v).unwrap();
        let want = if inside { Membership::Member } else { Membership::NonMember };
        assert_eq!(c.verdict, want, "{v:?}");
        assert_eq!(c.oracle_verdict, want, "{v:?}");
    }
}

#[test]
fn disc_bottom_second_order_set_is_a_shifted_half_plane() {
    let (u, v) = ([0.0, -1.0], [1.0, 0.0]);
    for (w, inside) in [([0.0, 0.6], true), ([2.0, 0.55], true), ([0.0, 0.45], false), ([-1.0, 0.0], false)] {
        let c = second_order_member(&disc(), &u, &v, &w).unwrap();
        let want = if inside { Membership::Member } else { Membership::NonMember };
        assert_eq!(c.verdict, want, "{w:?}");
        assert_eq!(c.oracle_verdict, want, "{w:?}");
        assert!((c.margin.unwrap() - (w[1] - 0.5)).abs() < 1e-12);
    }
}

#[test]
fn points_outside_the_set_are_rejected() {
    assert!(adjacent_cone_member(&disc(), &[0.0, -1.1], &[1.0, 0.0]).is_err());
    // A direction outside the adjacent cone has no second-order set.
    assert!(second_order_member(&disc(), &[0.0, -1.0], &[0.0, -1.0], &[0.0, 0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn analytic_verdict_matches_projection_oracle(seed in any::<u64>()) {
        let p = cone_probe(&mut ChaCha8Rng::seed_from_u64(seed));
        let c = match &p.w {
            None => adjacent_cone_member(&p.set, &p.u, &p.v).unwrap(),
            Some(w) => second_order_member(&p.set, &p.u, &p.v, w).unwrap(),
        };
        prop_assert_eq!(c.verdict, c.oracle_verdict, "{:?} {:?}", p, c.oracle);
    }
}
