mod common;

use proptest::prelude::*;
use subci::model::{conditional_density_m, density_v, summarize, Sampler};
use subci::{ModelConfig, Sample};

#[test]
fn density_v_integrates_to_one() {
    let total = common::integrate(&density_v, -2.0, 2.0, &[0.0]);
    assert!((total - 1.0).abs() < 1e-12, "{total}");
}

fn cdf_v(v: f64) -> f64 {
    if v <= -2.0 {
        0.0
    } else if v < 0.0 {
        (2.0 + v).powi(2) / 8.0
    } else if v < 2.0 {
        1.0 - (2.0 - v).powi(2) / 8.0
    } else {
        1.0
    }
}

fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn sampled_v_matches_marginal_density() {
    let mut sampler = Sampler::new(ModelConfig::standard(), 2024, 0).unwrap();
    let vs: Vec<f64> = (0..1_000_000)
        .map(|_| {
            let s = sampler.next_sample();
            s.coords[1] - s.coords[0]
        })
        .collect();
    let d = ks_distance(vs, cdf_v);
    assert!(d < 0.002, "KS distance {d}");
}

#[test]
fn midrange_is_conditionally_uniform_given_range() {
    let theta = 3.25;
    let config = ModelConfig::new(theta, 1.0, 2).unwrap();
    let mut sampler = Sampler::new(config, 77, 5).unwrap();
    let bin = 0.05;
    let nbins = 40;
    let mut per_bin: Vec<Vec<f64>> = vec![Vec::new(); nbins];
    for _ in 0..400_000 {
        let stat = summarize(&sampler.next_sample(), &config).unwrap();
        let idx = ((stat.v.abs() / bin) as usize).min(nbins - 1);
        per_bin[idx].push(stat.m - theta);
    }
    for (i, ms) in per_bin.into_iter().enumerate() {
        if ms.len() < 500 {
            continue;
        }
        let u_mid = (i as f64 + 0.5) * bin;
        let half = 1.0 - u_mid / 2.0;
        let cdf = |x: f64| ((x + half) / (2.0 * half)).clamp(0.0, 1.0);
        let d = ks_distance(ms, cdf);
        assert!(d < 0.05, "bin {i}: KS {d}");
    }
}

#[test]
fn conditional_density_matches_histogram_for_negative_v() {
    // m given v near -1 is uniform on theta +/- 0.5, density 1.0
    let theta = 0.0;
    let config = ModelConfig::standard();
    let mut sampler = Sampler::new(config, 9, 0).unwrap();
    let (mut inside, mut total) = (0u64, 0u64);
    for _ in 0..2_000_000 {
        let s = sampler.next_sample();
        let stat = summarize(&s, &config).unwrap();
        if (stat.v + 1.0).abs() < 0.01 {
            total += 1;
            if (stat.m - (theta + 0.4)).abs() < 0.05 {
                inside += 1;
            }
        }
    }
    let density = inside as f64 / total as f64 / 0.1;
    let expect = conditional_density_m(theta + 0.4, -1.0, theta).unwrap();
    assert_eq!(expect, 1.0);
    assert!((density - expect).abs() < 0.1, "{density} from {total} draws");
}

proptest! {
    #[test]
    fn summarize_is_shift_equivariant(
        a in -1024i32..1024, b in -1024i32..1024, c in -4096i32..4096, extra in prop::collection::vec(-1024i32..1024, 0..4)
    ) {
        // dyadic coordinates make shifts exact in binary floating point
        let coords: Vec<f64> = [a, b].iter().chain(&extra).map(|&x| x as f64 / 1024.0).collect();
        let n = coords.len();
        let shift = c as f64 / 256.0;
        let config = ModelConfig::new(0.0, 2.0, n).unwrap();
        let s = Sample::new(coords);
        let base = summarize(&s, &config).unwrap();
        let moved = summarize(&s.shifted(shift), &config).unwrap();
        prop_assert_eq!(moved.m, base.m + shift);
        prop_assert_eq!(moved.v, base.v);
    }

    #[test]
    fn summarize_is_nearly_shift_equivariant_for_any_floats(
        x1 in -1.0f64..1.0, x2 in -1.0f64..1.0, c in -100.0f64..100.0
    ) {
        let config = ModelConfig::standard();
        let s = Sample::new(vec![x1, x2]);
        let base = summarize(&s, &config).unwrap();
        let moved = summarize(&s.shifted(c), &config).unwrap();
        prop_assert!((moved.m - (base.m + c)).abs() <= 1e-12 * (1.0 + c.abs()));
        prop_assert!((moved.v - base.v).abs() <= 1e-12 * (1.0 + c.abs()));
    }

    #[test]
    fn sampled_statistics_respect_support(seed in any::<u64>(), stream in 0u64..64, n in 2usize..8, k in 0.1f64..10.0) {
        let config = ModelConfig::new(1.5, k, n).unwrap();
        let mut sampler = Sampler::new(config, seed, stream).unwrap();
        for _ in 0..20 {
            let stat = summarize(&sampler.next_sample(), &config).unwrap();
            prop_assert!(stat.v.abs() <= 2.0 * k);
            let half = k - stat.v.abs() / 2.0;
            prop_assert!((stat.m - 1.5).abs() <= half + 1e-12);
        }
    }
}
