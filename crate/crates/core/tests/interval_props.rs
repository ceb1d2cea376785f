use kepler_core::decimal::rational_from_f64;
use kepler_core::Interval;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLES: usize = 100_000;

fn q(x: f64) -> BigRational {
    rational_from_f64(x)
}

fn encloses(r: &Interval, exact: &BigRational) -> bool {
    q(r.lo()) <= *exact && *exact <= q(r.hi())
}

fn random_float(rng: &mut ChaCha8Rng) -> f64 {
    let mag = 10f64.powi(rng.gen_range(-6..=6));
    let x = rng.gen_range(-1.0..1.0) * mag;
    match rng.gen_range(0..10) {
        0 => 0.0,
        1 => x.round(),
        _ => x,
    }
}

fn random_interval(rng: &mut ChaCha8Rng) -> Interval {
    let a = random_float(rng);
    let b = if rng.gen_bool(0.2) { a } else { random_float(rng) };
    Interval::new(a.min(b), a.max(b)).unwrap()
}

fn sample_in(rng: &mut ChaCha8Rng, x: &Interval) -> f64 {
    match rng.gen_range(0..6) {
        0 => x.lo(),
        1 => x.hi(),
        _ => (x.lo() + rng.gen::<f64>() * (x.hi() - x.lo())).clamp(x.lo(), x.hi()),
    }
}

fn pow_exact(x: &BigRational, n: i32) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..n.unsigned_abs() {
        acc *= x;
    }
    if n < 0 {
        acc.recip()
    } else {
        acc
    }
}

#[test]
fn binary_operations_contain_exact_results() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..SAMPLES {
        let (a, b) = (random_interval(&mut rng), random_interval(&mut rng));
        let (x, y) = (sample_in(&mut rng, &a), sample_in(&mut rng, &b));
        let (qx, qy) = (q(x), q(y));
        assert!(encloses(&(a + b), &(&qx + &qy)), "{a:?} + {b:?}");
        assert!(encloses(&(a - b), &(&qx - &qy)), "{a:?} - {b:?}");
        assert!(encloses(&(a * b), &(&qx * &qy)), "{a:?} * {b:?}");
        match a.div(&b) {
            Ok(r) => assert!(encloses(&r, &(&qx / &qy)), "{a:?} / {b:?}"),
            Err(_) => assert!(b.contains_zero()),
        }
        assert!(encloses(&a.min(&b), &qx.clone().min(qy.clone())));
        assert!(encloses(&a.max(&b), &qx.max(qy)));
    }
}

#[test]
fn unary_operations_contain_exact_results() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..SAMPLES {
        let a = random_interval(&mut rng);
        let x = sample_in(&mut rng, &a);
        let qx = q(x);
        assert!(encloses(&(-a), &(-qx.clone())));
        assert!(encloses(&a.abs(), &qx.abs()));
        assert!(encloses(&a.sqr(), &(&qx * &qx)));
        let n = rng.gen_range(-3..=5);
        match a.powi(n) {
            Ok(r) => {
                if !(n < 0 && qx.is_zero()) {
                    assert!(encloses(&r, &pow_exact(&qx, n)), "{a:?}^{n}");
                }
            }
            Err(_) => assert!(n < 0 && a.contains_zero()),
        }
        if x >= 0.0 {
            // lo <= sqrt(x) <= hi  iff  lo² <= x <= hi² (for lo, hi >= 0)
            let r = a.sqrt().unwrap();
            let (lo, hi) = (q(r.lo()), q(r.hi()));
            assert!(r.lo() >= 0.0);
            assert!(&lo * &lo <= qx && qx <= &hi * &hi, "sqrt {a:?} at {x}");
        }
    }
}

#[test]
fn powers_of_wide_intervals_contain_sampled_powers() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10_000 {
        let a = random_interval(&mut rng);
        let r = a.powi(4).unwrap();
        for _ in 0..4 {
            let x = q(sample_in(&mut rng, &a));
            assert!(encloses(&r, &pow_exact(&x, 4)));
        }
        assert!(r.lo() >= 0.0);
    }
}

fn interval_strategy() -> impl Strategy<Value = Interval> {
    (-1e3f64..1e3, 0f64..1e3).prop_map(|(lo, w)| Interval::new(lo, lo + w).unwrap())
}

fn sub_interval(x: Interval, s: f64, t: f64) -> Interval {
    let a = x.lo() + s.min(t) * x.width();
    let b = x.lo() + s.max(t) * x.width();
    Interval::new(a.clamp(x.lo(), x.hi()), b.clamp(x.lo(), x.hi())).unwrap()
}

proptest! {
    #[test]
    fn inclusion_monotone(a in interval_strategy(), b in interval_strategy(),
                          s in 0f64..1.0, t in 0f64..1.0, u in 0f64..1.0, v in 0f64..1.0) {
        let a2 = sub_interval(a, s, t);
        let b2 = sub_interval(b, u, v);
        prop_assert!((a2 + b2).is_subset_of(&(a + b)));
        prop_assert!((a2 - b2).is_subset_of(&(a - b)));
        prop_assert!((a2 * b2).is_subset_of(&(a * b)));
        prop_assert!(a2.sqr().is_subset_of(&a.sqr()));
        prop_assert!(a2.abs().sqrt().unwrap().is_subset_of(&a.abs().sqrt().unwrap()));
        if let Ok(wide) = a.div(&b) {
            prop_assert!(a2.div(&b2).unwrap().is_subset_of(&wide));
        }
    }

    #[test]
    fn results_are_ordered_and_bounded(a in interval_strategy(), b in interval_strategy()) {
        for r in [a + b, a - b, a * b, a.hull(&b), a.min(&b), a.max(&b)] {
            prop_assert!(r.lo() <= r.hi());
            prop_assert!(r.is_bounded());
        }
    }

    #[test]
    fn bisect_halves_cover(a in interval_strategy()) {
        let (l, r) = a.bisect();
        prop_assert_eq!(l.lo(), a.lo());
        prop_assert_eq!(r.hi(), a.hi());
        prop_assert_eq!(l.hi(), r.lo());
    }
}

#[test]
fn serialized_intervals_round_trip_to_supersets() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let a = random_interval(&mut rng);
        let text = serde_json::to_string(&a).unwrap();
        let back: Interval = serde_json::from_str(&text).unwrap();
        assert!(a.is_subset_of(&back), "{text}");
    }
    let exact: BigRational = BigRational::zero();
    assert!(encloses(&Interval::ZERO, &exact));
}
