use pdtriage_core::rules::{weighted_category_vector, CategoryMapping, RankWeights};
use pdtriage_core::Category;
use proptest::prelude::*;

/// Straight summation over topics, no shared code with the library.
fn naive_wc(theta: &[f64], mapping: &CategoryMapping) -> [f64; 8] {
    let w = [0.5, 1.0 / 3.0, 1.0 / 6.0];
    let mut wc = [0.0; 8];
    for (k, &mass) in theta.iter().enumerate() {
        let entry = mapping.entries.iter().find(|e| e.topic == k).unwrap();
        if entry.ranks.iter().all(|c| *c == Category::Other) {
            wc[7] += mass;
        } else {
            for (c, share) in entry.ranks.iter().zip(w) {
                wc[c.code() as usize] += mass * share;
            }
        }
    }
    wc
}

fn ranks() -> impl Strategy<Value = [Category; 3]> {
    prop_oneof![
        1 => Just([Category::Other; 3]),
        3 => Just((0u8..7).collect::<Vec<_>>()).prop_shuffle().prop_map(|codes| {
            [0, 1, 2].map(|i| Category::from_code(codes[i]).unwrap())
        }),
    ]
}

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, k).prop_map(|mut v| {
        // Occasional exact zeros.
        v.iter_mut().filter(|x| **x < 0.05).for_each(|x| *x = 0.0);
        if v.iter().all(|x| *x == 0.0) {
            v[0] = 1.0;
        }
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    })
}

fn mapping_of(ranks: &[[Category; 3]]) -> CategoryMapping {
    let mut m = CategoryMapping::all_other(ranks.len());
    for (k, r) in ranks.iter().enumerate() {
        m.set(k, format!("topic {k}"), *r);
    }
    m
}

struct Instance {
    a: Vec<f64>,
    b: Vec<f64>,
    lambda: f64,
    perm: Vec<usize>,
    ranks: Vec<[Category; 3]>,
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=40).prop_flat_map(|k| {
        (
            simplex(k),
            simplex(k),
            0.0f64..=1.0,
            Just((0..k).collect::<Vec<_>>()).prop_shuffle(),
            prop::collection::vec(ranks(), k),
        )
            .prop_map(|(a, b, lambda, perm, ranks)| Instance {
                a,
                b,
                lambda,
                perm,
                ranks,
            })
    })
}

impl std::fmt::Debug for Instance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "k={} lambda={} perm={:?}", self.a.len(), self.lambda, self.perm)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn wc_properties(inst in instance()) {
        let mapping = mapping_of(&inst.ranks);
        let wa = weighted_category_vector(&inst.a, &mapping).unwrap();
        let wb = weighted_category_vector(&inst.b, &mapping).unwrap();

        prop_assert!((wa.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(wa.iter().all(|x| *x >= 0.0));
        let oracle = naive_wc(&inst.a, &mapping);
        for c in 0..8 {
            prop_assert!((wa[c] - oracle[c]).abs() <= 1e-12, "category {c}: {} vs {}", wa[c], oracle[c]);
        }

        let mix: Vec<f64> = inst.a.iter().zip(&inst.b).map(|(x, y)| inst.lambda * x + (1.0 - inst.lambda) * y).collect();
        let wm = weighted_category_vector(&mix, &mapping).unwrap();
        for c in 0..8 {
            let expected = inst.lambda * wa[c] + (1.0 - inst.lambda) * wb[c];
            prop_assert!((wm[c] - expected).abs() <= 1e-9);
        }

        // Renumber topics: topic k becomes perm[k], in both theta and mapping.
        let k = inst.a.len();
        let mut theta_p = vec![0.0; k];
        let mut ranks_p = vec![[Category::Other; 3]; k];
        for (old, &new) in inst.perm.iter().enumerate() {
            theta_p[new] = inst.a[old];
            ranks_p[new] = inst.ranks[old];
        }
        let wp = weighted_category_vector(&theta_p, &mapping_of(&ranks_p)).unwrap();
        prop_assert_eq!(wp.map(f64::to_bits), wa.map(f64::to_bits));
    }
}

#[test]
fn all_other_topic_sends_full_mass_to_other() {
    let mapping = mapping_of(&[
        [Category::Other; 3],
        [Category::Funding, Category::Programs, Category::Movement],
    ]);
    let wc = weighted_category_vector(&[0.6, 0.4], &mapping).unwrap();
    assert_eq!(wc[7], 0.6);
    assert!((wc[6] - 0.2).abs() < 1e-15);
    assert!((wc[5] - 0.4 / 3.0).abs() < 1e-15);
    assert!((wc[1] - 0.4 / 6.0).abs() < 1e-15);
}

#[test]
fn default_weights_are_three_two_one() {
    let w = RankWeights::default();
    assert_eq!((w.first, w.second, w.third), (0.5, 1.0 / 3.0, 1.0 / 6.0));
    assert!((w.first / w.third - 3.0).abs() < 1e-12 && (w.second / w.third - 2.0).abs() < 1e-12);
}
