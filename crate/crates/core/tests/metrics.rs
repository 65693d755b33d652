use coauthor_core::ingest::Segmenter;
use coauthor_core::metrics::{
    correction_rate, rouge_l, rouge_n, soft_cardinality, soft_heading_recall, HeadingRole, HeadingSet, Normalization,
};
use proptest::prelude::*;

/// Direct evaluation with plain loops and naive sums.
mod oracle {
    pub fn cos(a: &[f32], b: &[f32]) -> f64 {
        let mut dot = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for i in 0..a.len() {
            dot += a[i] as f64 * b[i] as f64;
            na += a[i] as f64 * a[i] as f64;
            nb += b[i] as f64 * b[i] as f64;
        }
        dot / (na.sqrt() * nb.sqrt())
    }

    pub fn sim(a: &[f32], b: &[f32]) -> f64 {
        cos(a, b).clamp(0.0, 1.0)
    }

    pub fn card(t: &[Vec<f32>]) -> f64 {
        let mut total = 0.0;
        for i in 0..t.len() {
            let mut denom = 0.0;
            for j in 0..t.len() {
                denom += if i == j { 1.0 } else { sim(&t[i], &t[j]) };
            }
            total += 1.0 / denom;
        }
        total
    }

    pub fn shr(g: &[Vec<f32>], r: &[Vec<f32>]) -> f64 {
        let union: Vec<Vec<f32>> = r.iter().chain(g).cloned().collect();
        (card(r) + card(g) - card(&union)) / card(r)
    }
}

fn set(vs: Vec<Vec<f32>>, role: HeadingRole) -> HeadingSet {
    let titles = (0..vs.len()).map(|i| format!("h{i}")).collect();
    HeadingSet::new(titles, vs, role, "heading-model").unwrap()
}

fn vector(dim: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-1.0f32..1.0, dim).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn pair() -> impl Strategy<Value = (Vec<Vec<f32>>, Vec<Vec<f32>>)> {
    (2usize..=16).prop_flat_map(|dim| {
        (prop::collection::vec(vector(dim), 1..=10), prop::collection::vec(vector(dim), 1..=10))
    })
}

#[test]
fn hand_chosen_three_title_cardinality() {
    // Pairwise clamped sims 0.5 (t0,t1), 0.2 (t0,t2), 0.0 (t1,t2).
    let t0 = vec![1.0f32, 0.0, 0.0];
    let t1 = vec![0.5f32, 0.75f32.sqrt(), 0.0];
    // t2 = (0.2, y, w) with t1·t2 = 0.
    let y = -0.1f32 / 0.75f32.sqrt();
    let w = (1.0f32 - 0.04 - y * y).sqrt();
    let t2 = vec![0.2f32, y, w];
    let s = set(vec![t0.clone(), t1.clone(), t2.clone()], HeadingRole::Reference);
    let by_hand = 1.0 / (1.0 + 0.5 + 0.2) + 1.0 / (1.0 + 0.5 + 0.0) + 1.0 / (1.0 + 0.2 + 0.0);
    let got = soft_cardinality(&s).unwrap();
    assert!((got - by_hand).abs() < 1e-6, "{got} vs {by_hand}");
    assert!((got - oracle::card(&[t0, t1, t2])).abs() < 1e-9);
}

#[test]
fn mixed_example_matches_oracle() {
    let shared = vec![0.2f32, 0.9, 0.1, 0.3];
    let near = vec![0.8f32, 0.1, 0.5, 0.0];
    let near_dup = vec![0.79f32, 0.12, 0.52, 0.01];
    let r = vec![shared.clone(), near, vec![0.0, 0.0, 0.0, 1.0]];
    let g = vec![shared, near_dup, vec![0.0, 1.0, -1.0, 0.0]];
    let got = soft_heading_recall(&set(g.clone(), HeadingRole::Generated), &set(r.clone(), HeadingRole::Reference)).unwrap();
    assert!((got - oracle::shr(&g, &r)).abs() < 1e-9);
}

#[test]
fn recall_can_exceed_one() {
    // One reference heading "between" two generated ones: the generated set
    // covers the reference direction from two sides and the intersection
    // term outgrows card(R) = 1.
    let h = std::f32::consts::FRAC_1_SQRT_2;
    let r = vec![vec![h, h]];
    let g = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let got = soft_heading_recall(&set(g.clone(), HeadingRole::Generated), &set(r.clone(), HeadingRole::Reference)).unwrap();
    assert!((got - oracle::shr(&g, &r)).abs() < 1e-9);
    assert!((got - 2f64.sqrt()).abs() < 1e-6, "{got}");
}

#[test]
fn rouge_anchors() {
    assert_eq!(rouge_n("x y z", "x y z", 1).f1, 1.0);
    assert_eq!(rouge_n("x y z", "x y z", 2).f1, 1.0);
    assert_eq!(rouge_l("x y z", "x y z").f1, 1.0);
    assert_eq!(rouge_n("a b", "c d", 1).f1, 0.0);
    assert!((rouge_n("the cat", "the cat sat", 1).f1 - 0.8).abs() < 1e-9);
    assert!((rouge_l("a b c d", "a x c y").f1 - 0.5).abs() < 1e-9);
}

#[test]
fn correction_anchors() {
    let seg = Segmenter::default();
    let initial: Vec<String> = (1..=10).map(|i| format!("Finding {i} was recorded.")).collect();
    let st = correction_rate(&initial.join(" "), &initial.join(" "), &seg, Normalization::Retained).unwrap();
    assert_eq!(st.rate, 0.0);

    let mut edited: Vec<String> = initial.iter().filter(|s| !s.contains(" 3 ") && !s.contains(" 7 ")).cloned().collect();
    edited.insert(4, "An inserted claim.".into());
    edited.push("Another insertion.".into());
    edited.push("A closing remark.".into());
    let st = correction_rate(&initial.join(" "), &edited.join(" "), &seg, Normalization::Retained).unwrap();
    assert_eq!((st.n, st.m, st.s), (10, 11, 8));
    assert_eq!(st.rate, 0.25);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn shr_agrees_with_oracle((g, r) in pair()) {
        let got = soft_heading_recall(&set(g.clone(), HeadingRole::Generated), &set(r.clone(), HeadingRole::Reference)).unwrap();
        prop_assert!((got - oracle::shr(&g, &r)).abs() < 1e-9);
    }

    #[test]
    fn cardinality_is_between_one_and_k((g, _) in pair()) {
        let c = soft_cardinality(&set(g.clone(), HeadingRole::Generated)).unwrap();
        prop_assert!(c >= 1.0 - 1e-12 && c <= g.len() as f64 + 1e-12);
    }

    #[test]
    fn self_recall_is_exactly_one((_, r) in pair()) {
        let s = set(r, HeadingRole::Reference);
        prop_assert_eq!(soft_heading_recall(&s, &s).unwrap(), 1.0);
    }

    #[test]
    fn recall_is_nonnegative_and_permutation_invariant((g, r) in pair(), rot in 0usize..10) {
        let base = soft_heading_recall(&set(g.clone(), HeadingRole::Generated), &set(r.clone(), HeadingRole::Reference)).unwrap();
        prop_assert!(base >= -1e-12);
        let mut g2 = g.clone();
        let mut r2 = r.clone();
        let gl = g2.len();
        let rl = r2.len();
        g2.rotate_left(rot % gl);
        r2.reverse();
        r2.rotate_left(rot % rl);
        let shuffled = soft_heading_recall(&set(g2, HeadingRole::Generated), &set(r2, HeadingRole::Reference)).unwrap();
        prop_assert!((shuffled - base).abs() < 1e-12);
    }

    #[test]
    fn similarity_is_symmetric(a in vector(8), b in vector(8)) {
        prop_assert!((coauthor_core::metrics::sim(&a, &b) - coauthor_core::metrics::sim(&b, &a)).abs() < 1e-9);
    }

    #[test]
    fn rouge_is_bounded(c in "[a-c ]{0,30}", r in "[a-c ]{0,30}") {
        for p in [rouge_n(&c, &r, 1), rouge_n(&c, &r, 2), rouge_l(&c, &r)] {
            prop_assert!((0.0..=1.0).contains(&p.precision));
            prop_assert!((0.0..=1.0).contains(&p.recall));
            prop_assert!((0.0..=1.0).contains(&p.f1));
            prop_assert_eq!(p.f1 == 0.0, p.precision == 0.0 && p.recall == 0.0);
        }
    }

    #[test]
    fn correction_rate_recomputes_from_counts(keep in prop::collection::vec(any::<bool>(), 1..15), extra in 0usize..5) {
        let initial: Vec<String> = (0..keep.len()).map(|i| format!("Sentence {i} stands.")).collect();
        let mut fin: Vec<String> = initial.iter().zip(&keep).filter(|(_, k)| **k).map(|(s, _)| s.clone()).collect();
        fin.extend((0..extra).map(|i| format!("Added {i} here.")));
        prop_assume!(keep.iter().any(|k| *k));
        let st = correction_rate(&initial.join(" "), &fin.join(" "), &Segmenter::default(), Normalization::Retained).unwrap();
        prop_assert!(st.s <= st.m);
        prop_assert_eq!(st.rate.to_bits(), ((st.n - st.s) as f64 / st.s as f64).to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Upper bound SHR <= 1 does not hold in general; see `recall_can_exceed_one`.
    #[test]
    #[ignore = "SHR is not bounded above by 1; kept to measure the violation rate"]
    fn recall_is_at_most_one((g, r) in pair()) {
        let got = soft_heading_recall(&set(g, HeadingRole::Generated), &set(r, HeadingRole::Reference)).unwrap();
        prop_assert!(got <= 1.0 + 1e-6, "{}", got);
    }
}
