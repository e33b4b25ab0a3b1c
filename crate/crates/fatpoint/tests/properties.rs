//! Randomized laws of the lattice, reduction, oracle, and degeneration
//! layers. Every assertion is exact; there are no tolerances anywhere.

use fatpoint::cremona::{quadratic_transform, shgh_dim, DimStatus};
use fatpoint::degeneration::{build_stage, replay, twist};
use fatpoint::lattice::{
    canonical_class, expected_dim, pair, virtual_dim, Configuration, DivisorClass, Label,
};
use fatpoint::oracle::{generic_dim, OracleOptions, DEFAULT_PRIME};
use fatpoint::Int;
use num_traits::ToPrimitive;
use proptest::prelude::*;

fn aligned(cfg: &Configuration, degree: i64, mults: &[i64]) -> DivisorClass<Int> {
    let mults: Vec<Int> = mults.iter().copied().map(Int::from).collect();
    DivisorClass::aligned(Int::from(degree), &mults, cfg)
}

proptest! {
    #[test]
    fn pairing_is_symmetric_and_bilinear(
        free in 0usize..=3,
        chains in 0usize..=2,
        degrees in proptest::array::uniform3(-3i64..=8),
        mults in proptest::collection::vec(-2i64..=4, 21),
    ) {
        let cfg = Configuration::with_clusters(free, chains);
        let n = cfg.len();
        let x = aligned(&cfg, degrees[0], &mults[..n]);
        let y = aligned(&cfg, degrees[1], &mults[n..2 * n]);
        let z = aligned(&cfg, degrees[2], &mults[2 * n..3 * n]);
        prop_assert_eq!(pair(&x, &y, &cfg)?, pair(&y, &x, &cfg)?);
        prop_assert_eq!(
            pair(&x.plus(&y), &z, &cfg)?,
            pair(&x, &z, &cfg)? + pair(&y, &z, &cfg)?
        );
    }

    #[test]
    fn virtual_dimension_matches_the_adjunction_count(
        free in 0usize..=3,
        chains in 0usize..=2,
        degree in -3i64..=10,
        mults in proptest::collection::vec(-2i64..=4, 7),
    ) {
        let cfg = Configuration::with_clusters(free, chains);
        let x = aligned(&cfg, degree, &mults[..cfg.len()]);
        let canonical = canonical_class::<Int>(&cfg);
        let self_int = pair(&x, &x, &cfg)?;
        let with_canonical = pair(&x, &canonical, &cfg)?;
        prop_assert_eq!(Int::from(2) * virtual_dim(&x), self_int - with_canonical);
    }

    #[test]
    fn exceptional_classes_are_minus_one_classes(
        free in 1usize..=3,
        chains in 0usize..=2,
    ) {
        let cfg = Configuration::with_clusters(free, chains);
        let canonical = canonical_class::<Int>(&cfg);
        for label in cfg.labels() {
            let e: DivisorClass<Int> = DivisorClass::exceptional(label.clone());
            prop_assert_eq!(pair(&e, &e, &cfg)?, Int::from(-1));
            prop_assert_eq!(pair(&e, &canonical, &cfg)?, Int::from(-1));
        }
    }

    #[test]
    fn quadratic_transformation_is_a_lattice_involution(
        k in 3usize..=6,
        degree in -2i64..=10,
        mults in proptest::collection::vec(-2i64..=4, 6),
    ) {
        let cfg = Configuration::free(k);
        let x = aligned(&cfg, degree, &mults[..k]);
        let triple = [Label::from("p1"), Label::from("p2"), Label::from("p3")];
        let once = quadratic_transform(&x, &triple, &cfg)?;
        let twice = quadratic_transform(&once, &triple, &cfg)?;
        prop_assert_eq!(&twice, &x);
        let canonical = canonical_class::<Int>(&cfg);
        prop_assert_eq!(virtual_dim(&once), virtual_dim(&x));
        prop_assert_eq!(pair(&once, &once, &cfg)?, pair(&x, &x, &cfg)?);
        prop_assert_eq!(pair(&once, &canonical, &cfg)?, pair(&x, &canonical, &cfg)?);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduction_dimension_dominates_the_expected_dimension(
        k in 1usize..=6,
        degree in 0i64..=12,
        mults in proptest::collection::vec(0i64..=5, 6),
    ) {
        let cfg = Configuration::free(k);
        let x = aligned(&cfg, degree, &mults[..k]);
        let reduced = shgh_dim(&x, &cfg)?;
        prop_assert!(reduced.dim >= expected_dim(&x));
        prop_assert_eq!(reduced.status, DimStatus::Proven);
    }

    #[test]
    fn standard_systems_have_the_expected_dimension(
        k in 1usize..=6,
        degree in 0i64..=12,
        mults in proptest::collection::vec(0i64..=5, 6),
    ) {
        let mut sorted = mults[..k].to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let top: i64 = sorted.iter().take(3).sum();
        prop_assume!(degree >= top);
        let cfg = Configuration::free(k);
        let x = aligned(&cfg, degree, &mults[..k]);
        let reduced = shgh_dim(&x, &cfg)?;
        prop_assert_eq!(reduced.dim, expected_dim(&x));
    }

    #[test]
    fn sampled_dimension_dominates_the_expected_dimension(
        k in 1usize..=6,
        degree in 0i64..=10,
        mults in proptest::collection::vec(0i64..=4, 6),
        seed in 0u64..=1000,
    ) {
        let cfg = Configuration::free(k);
        let x = aligned(&cfg, degree, &mults[..k]);
        let options = OracleOptions { p: DEFAULT_PRIME, trials: 1, seed };
        let sampled = generic_dim(&x, &cfg, &options)?;
        prop_assert!(Int::from(sampled.dim) >= expected_dim(&x));
    }

    #[test]
    fn sampled_dimension_matches_the_reduction_on_few_points(
        k in 1usize..=6,
        degree in 0i64..=10,
        mults in proptest::collection::vec(0i64..=4, 6),
    ) {
        let cfg = Configuration::free(k);
        let x = aligned(&cfg, degree, &mults[..k]);
        let reduced = shgh_dim(&x, &cfg)?;
        let options = OracleOptions { p: DEFAULT_PRIME, trials: 3, seed: 1 };
        let sampled = generic_dim(&x, &cfg, &options)?;
        prop_assert_eq!(Some(sampled.dim), reduced.dim.to_i64());
    }

    #[test]
    fn sampling_is_deterministic_in_its_options(
        k in 1usize..=5,
        degree in 0i64..=8,
        mults in proptest::collection::vec(0i64..=3, 5),
        seed in 0u64..=1000,
    ) {
        let cfg = Configuration::free(k);
        let x = aligned(&cfg, degree, &mults[..k]);
        let options = OracleOptions { p: DEFAULT_PRIME, trials: 2, seed };
        let first = generic_dim(&x, &cfg, &options)?;
        let second = generic_dim(&x, &cfg, &options)?;
        prop_assert_eq!(first, second);
    }

    #[test]
    fn second_stage_fibers_replay_and_untwist(
        m in 5i64..=40,
        offset in 0i64..=5,
        a_raw in 0i64..=40,
        t in -3i64..=3,
    ) {
        let d_lo = (174 * m + 54) / 55;
        let d_hi = (10 * m - 1) / 3;
        prop_assume!(d_lo + offset <= d_hi);
        let d = d_lo + offset;
        let a = a_raw % (m + 1);
        let fiber = build_stage::<i64>(2, d, m, a)?;
        let replayed = replay(d, m, a, &fiber.history)?;
        prop_assert_eq!(&replayed, &fiber);
        let twisted = twist(&fiber, "Z", t)?;
        let back = twist(&twisted, "Z", -t)?;
        prop_assert_eq!(&back.components, &fiber.components);
        prop_assert_eq!(&back.double_curves, &fiber.double_curves);
        prop_assert_eq!(&back.params, &fiber.params);
    }

    #[test]
    fn fourth_stage_fibers_replay(
        ell in 1i64..=2,
        alpha_off in 0i64..=10,
        a_raw in 0i64..=100,
    ) {
        let alpha = 9 * ell + alpha_off;
        let d = 3 * ell + 19 * alpha;
        let m = ell + 6 * alpha;
        let b0 = (10 * m - 3 * d + d % 2) / 2;
        let a = a_raw % b0;
        let fiber = build_stage::<i64>(4, d, m, a)?;
        let replayed = replay(d, m, a, &fiber.history)?;
        prop_assert_eq!(replayed, fiber);
    }
}
