use proptest::prelude::*;
use vscl_core::reliability::{normal_cdf, InstrumentalDensity};
use vscl_core::sensitivity::{garson_si, total_effect_indices, Grouping, SensitivityMethod};
use vscl_core::stochastic::{lhs_sample, Binding, Dispersion, Family, GaussianSpace, LhsOptions, RandomVariableSpec};
use vscl_core::surrogate::{train, SurrogateNet, TrainConfig};

fn space(dim: usize, std: f64) -> GaussianSpace {
    let specs: Vec<_> = (0..dim)
        .map(|i| RandomVariableSpec {
            name: format!("z{i}"),
            target: Binding::Rho,
            family: Family::Normal,
            mean: 0.0,
            dispersion: Dispersion::Std(std),
        })
        .collect();
    GaussianSpace::new(&specs).unwrap()
}

fn names(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("z{i}")).collect()
}

/// Total effect of `z1` on `I(z1 + z2 > c)`: `E[p(z2)(1 - p(z2))] / (p (1 - p))`
/// with `p(z2) = Phi(z2 - c)`, integrated by the trapezoid rule.
fn linear_pair_oracle(c: f64) -> f64 {
    let p = normal_cdf(-c / 2f64.sqrt());
    let (lo, hi, n) = (-10.0, 10.0, 20_000);
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let t = lo + k as f64 * h;
        let pt = normal_cdf(t - c);
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        acc += w * pt * (1.0 - pt) * (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    }
    acc * h / (p * (1.0 - p))
}

#[test]
fn single_active_variable() {
    let sp = space(3, 1.0);
    let r = total_effect_indices(&|x: &[f64]| 1.0 - x[0], &sp, &Grouping::singletons(&names(3)), 100_000, 1, None)
        .unwrap();
    assert_eq!(r.method, SensitivityMethod::TotalEffectMcs);
    assert!((r.indices[0] - 1.0).abs() < 0.02, "{:?}", r.indices);
    assert_eq!(&r.indices[1..], &[0.0, 0.0]);
}

#[test]
fn symmetric_linear_state_matches_oracle() {
    let sp = space(3, 1.0);
    let c = 3.0;
    let g = |x: &[f64]| c - x[0] - x[1];
    let r = total_effect_indices(&g, &sp, &Grouping::singletons(&names(3)), 200_000, 2, None).unwrap();
    let s = r.std.as_ref().unwrap();
    assert!((r.indices[0] - r.indices[1]).abs() < 3.0 * (s[0] * s[0] + s[1] * s[1]).sqrt());
    let oracle = linear_pair_oracle(c);
    for i in 0..2 {
        assert!((r.indices[i] - oracle).abs() < 3.0 * s[i], "{} vs {oracle} +- {}", r.indices[i], s[i]);
    }
    assert_eq!(r.indices[2], 0.0);
}

#[test]
fn reweighted_and_plain_estimates_agree() {
    let sp = space(3, 1.0);
    let g = |x: &[f64]| 3.0 - x[0] - x[1] + 0.2 * x[2];
    let grouping = Grouping::singletons(&names(3));
    let plain = total_effect_indices(&g, &sp, &grouping, 200_000, 3, None).unwrap();
    let h = InstrumentalDensity::at(vec![1.45, 1.45, -0.3]);
    let is = total_effect_indices(&g, &sp, &grouping, 50_000, 4, Some(&h)).unwrap();
    assert_eq!(is.method, SensitivityMethod::TotalEffectIs);
    let (sp_, si) = (plain.std.unwrap(), is.std.unwrap());
    for i in 0..3 {
        let pooled = (sp_[i] * sp_[i] + si[i] * si[i]).sqrt();
        assert!((plain.indices[i] - is.indices[i]).abs() < 3.0 * pooled, "{i}: {} vs {}", plain.indices[i], is.indices[i]);
    }
}

#[test]
fn grouped_columns_are_frozen_together() {
    let sp = space(3, 1.0);
    let g = |x: &[f64]| 2.5 - x[0] - x[1];
    let grouping = Grouping { groups: vec![("pair".into(), vec![0, 1]), ("z2".into(), vec![2])] };
    let r = total_effect_indices(&g, &sp, &grouping, 100_000, 5, None).unwrap();
    assert!((r.indices[0] - 1.0).abs() < 0.03);
    assert_eq!(r.indices[1], 0.0);
    assert_eq!(r.ranking(), vec!["pair", "z2"]);
}

#[test]
fn rare_failures_warn() {
    let sp = space(2, 1.0);
    let r = total_effect_indices(&|x: &[f64]| 3.5 - x[0], &sp, &Grouping::singletons(&names(2)), 10_000, 1, None).unwrap();
    assert!(!r.warnings.is_empty());
}

#[test]
fn thread_count_does_not_matter() {
    let sp = space(4, 1.0);
    let g = |x: &[f64]| 2.0 - x[0] - 0.5 * x[1] * x[2] + 0.3 * x[3];
    let grouping = Grouping::singletons(&names(4));
    let run = |t: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(|| {
            total_effect_indices(&g, &sp, &grouping, 30_000, 8, None).unwrap().indices
        })
    };
    let (a, b) = (run(1), run(3));
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

/// Straight transcription of the P -> Q -> S -> SI steps, kept apart from
/// the library code.
fn garson_by_hand(net: &SurrogateNet) -> Vec<f64> {
    let (ni, nh) = (net.inputs, net.hidden);
    let p: Vec<Vec<f64>> =
        (0..nh).map(|i| (0..ni).map(|j| net.w_out[i].abs() * net.w_hidden[i * ni + j].abs()).collect()).collect();
    let q: Vec<Vec<f64>> = p
        .iter()
        .filter(|row| row.iter().sum::<f64>() > 0.0)
        .map(|row| {
            let t: f64 = row.iter().sum();
            row.iter().map(|v| v / t).collect()
        })
        .collect();
    let s: Vec<f64> = (0..ni).map(|j| q.iter().map(|row| row[j]).sum()).collect();
    let t: f64 = s.iter().sum();
    s.iter().map(|v| v / t).collect()
}

#[test]
fn garson_ranks_the_dominant_input_first() {
    let sp = space(2, 0.25);
    let mut data = lhs_sample(300, &sp, &LhsOptions::default(), 6).unwrap();
    data.evaluate(|x| Ok(5.0 * x[0] + x[1])).unwrap();
    let (net, _) = train(&data, &TrainConfig { hidden: 4, seed: 2, max_epochs: 3000, ..TrainConfig::default() }).unwrap();
    let r = garson_si(&net).unwrap();
    assert!(r.indices[0] > r.indices[1], "{:?}", r.indices);
    let hand = garson_by_hand(&net);
    assert!(r.indices.iter().zip(&hand).all(|(a, b)| (a - b).abs() < 1e-14));
    assert_eq!(r.labels, vec!["z0", "z1"]);
}

fn random_net(ni: usize, nh: usize, w: &[f64]) -> SurrogateNet {
    let mut net = SurrogateNet::zeros(nh, vec![-1.0; ni], vec![1.0; ni], -1.0, 1.0).unwrap();
    net.w_hidden = w[..ni * nh].to_vec();
    net.w_out = w[ni * nh..ni * nh + nh].to_vec();
    net
}

proptest! {
    #[test]
    fn garson_sums_to_one_and_permutes(
        ni in 2usize..7,
        nh in 1usize..8,
        w in proptest::collection::vec(-3.0f64..3.0, 64),
        seed in any::<u64>(),
    ) {
        let net = random_net(ni, nh, &w);
        prop_assume!(net.w_out.iter().any(|v| v.abs() > 1e-3));
        let r = garson_si(&net).unwrap();
        prop_assert!((r.indices.iter().sum::<f64>() - 1.0).abs() < 1e-10);

        let mut perm: Vec<usize> = (0..ni).collect();
        let mut s = seed;
        for i in (1..ni).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let mut permuted = net.clone();
        for h in 0..nh {
            for (new, &old) in perm.iter().enumerate() {
                permuted.w_hidden[h * ni + new] = net.w_hidden[h * ni + old];
            }
        }
        let rp = garson_si(&permuted).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            prop_assert!((rp.indices[new] - r.indices[old]).abs() < 1e-12);
        }
    }
}
