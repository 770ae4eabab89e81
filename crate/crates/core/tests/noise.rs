use lig_core::{
    enumerate_psne, generate_game, global_constants, scan_constants, Game64, GlobalNoiseModel,
    JointAction, JointDistribution, LocalNoiseModel, NoiseModel, PsneSet,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn random_psne(rng: &mut ChaCha8Rng, n: usize) -> PsneSet {
    let size = rng.gen_range(1..=1usize << (n - 1));
    let picked = rand::seq::index::sample(rng, 1 << n, size);
    PsneSet::new(
        n,
        picked
            .iter()
            .map(|b| JointAction::from_bits(b as u32))
            .collect(),
    )
    .unwrap()
}

fn random_model(rng: &mut ChaCha8Rng, n: usize) -> NoiseModel<f64> {
    let psne = random_psne(rng, n);
    if rng.gen::<bool>() {
        let lo = psne.len() as f64 / (1u64 << n) as f64;
        let q_g = lo + (1.0 - lo) * rng.gen_range(0.01..1.0);
        NoiseModel::Global(GlobalNoiseModel::new(psne, q_g).unwrap())
    } else {
        let q = (0..n).map(|_| rng.gen_range(0.51..1.0)).collect();
        NoiseModel::Local(LocalNoiseModel::new(psne, q).unwrap())
    }
}

fn total_mass<D: JointDistribution<f64>>(d: &D) -> f64 {
    JointAction::all(d.n()).map(|x| d.pmf(x)).sum()
}

#[test]
fn pmfs_are_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..60 {
        let n = 2 + trial % 9;
        let d = random_model(&mut rng, n);
        assert!((total_mass(&d) - 1.0).abs() <= 1e-12, "{} n={n}", d.label());
    }
}

#[test]
fn global_mass_is_flat_on_each_side() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let n = rng.gen_range(2..=8);
        let psne = random_psne(&mut rng, n);
        let lo = psne.len() as f64 / (1u64 << n) as f64;
        let d = GlobalNoiseModel::new(psne.clone(), lo + (1.0 - lo) * 0.5).unwrap();
        let ne: Vec<f64> = psne.iter().map(|x| d.pmf(x)).collect();
        let other: Vec<f64> = JointAction::all(n)
            .filter(|x| !psne.contains(*x))
            .map(|x| d.pmf(x))
            .collect();
        assert!(ne.iter().all(|&p| p == ne[0]));
        assert!(other.iter().all(|&p| p == other[0]));
        let c = d.constants().unwrap();
        assert!(c.assumption1_holds);
        assert!(c.tp_max / other.len() as f64 <= c.p_ne_min);
    }
}

#[test]
fn global_pmf_examples() {
    let two = PsneSet::new(
        3,
        vec![JointAction::from_bits(0), JointAction::from_bits(7)],
    )
    .unwrap();
    let d = GlobalNoiseModel::new(two, 0.5).unwrap();
    assert_eq!(d.pmf(JointAction::from_bits(7)), 0.25);

    // q = 1/n with a single equilibrium at n = 4
    let one = PsneSet::new(4, vec![JointAction::from_bits(3)]).unwrap();
    let d = GlobalNoiseModel::new(one, 0.25f64).unwrap();
    assert!((d.pmf(JointAction::from_bits(3)) - 0.25).abs() < 1e-15);
    assert!((d.pmf(JointAction::from_bits(4)) - 0.05).abs() < 1e-15);
}

#[test]
fn global_constructor_interval() {
    let psne = PsneSet::new(2, vec![JointAction::from_bits(1)]).unwrap();
    let err = GlobalNoiseModel::new(psne.clone(), 0.25)
        .unwrap_err()
        .to_string();
    assert!(err.contains("(0.25, 1]"), "{err}");
    assert!(GlobalNoiseModel::new(psne.clone(), 1.01).is_err());
    assert!(GlobalNoiseModel::new(psne, 1.0).is_ok());
    let everything = PsneSet::new(
        1,
        vec![JointAction::from_bits(0), JointAction::from_bits(1)],
    )
    .unwrap();
    assert!(GlobalNoiseModel::new(everything, 0.9).is_err());
    assert!(GlobalNoiseModel::new(PsneSet::new(3, vec![]).unwrap(), 0.9).is_err());
}

#[test]
fn global_constants_closed_form() {
    let c = global_constants(0.9f64, 3, 5).unwrap();
    assert!((c.tp_min - 0.1).abs() < 1e-15 && (c.tp_max - 0.1).abs() < 1e-15);
    assert!((c.p_max - 0.3).abs() < 1e-15);
    assert!(c.assumption1_holds);
    assert_eq!(global_constants(0.5, 2, 4).unwrap().f_ne, 0.25);
    // at the lower end of the interval the signal ties with the noise
    assert!(
        !global_constants(3.0 / 32.0, 3, 5)
            .unwrap()
            .assumption1_holds
    );
}

#[test]
fn local_pmf_examples() {
    let y = JointAction::from_signs(&[1, 1]).unwrap();
    let d = LocalNoiseModel::uniform(PsneSet::new(2, vec![y]).unwrap(), 0.6f64).unwrap();
    let p = |s: &[i8]| d.pmf(JointAction::from_signs(s).unwrap());
    assert!((p(&[1, 1]) - 0.36).abs() < 1e-15);
    assert!((p(&[-1, -1]) - 0.16).abs() < 1e-15);
    assert!((p(&[1, -1]) - 0.24).abs() < 1e-15 && (p(&[-1, 1]) - 0.24).abs() < 1e-15);

    let exact = LocalNoiseModel::uniform(
        PsneSet::new(5, vec![JointAction::from_bits(9)]).unwrap(),
        1.0,
    )
    .unwrap();
    assert_eq!(exact.pmf(JointAction::from_bits(9)), 1.0);
    assert_eq!(exact.pmf(JointAction::from_bits(8)), 0.0);
    let c = exact.constants().unwrap();
    assert_eq!((c.tp_min, c.tp_max), (0.0, 0.0));
    assert!(!c.assumption1_holds);
    assert!(LocalNoiseModel::uniform(PsneSet::new(2, vec![y]).unwrap(), 0.5).is_err());
}

#[test]
fn local_two_equilibrium_closed_forms() {
    // equilibria differ only in the first player; everyone else plays +1
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [3usize, 5, 8, 10] {
        let x1 = JointAction::from_bits((1u32 << n) - 1);
        let x2 = JointAction::from_bits((1u32 << n) - 2);
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.55..0.95)).collect();
        let d = LocalNoiseModel::new(PsneSet::new(n, vec![x1, x2]).unwrap(), q.clone()).unwrap();
        let c = d.constants().unwrap();
        let others = ((1u64 << n) - 2) as f64;
        let rest = &q[1..];
        let tp_min = 0.5 * rest.iter().map(|qi| 1.0 - qi).product::<f64>() * others;
        let j = (1..n).min_by(|&a, &b| q[a].total_cmp(&q[b])).unwrap();
        let tp_max =
            0.5 * (1.0 - q[j]) * (1..n).filter(|&i| i != j).map(|i| q[i]).product::<f64>() * others;
        let p_max = 0.5 * rest.iter().product::<f64>();
        assert!((c.tp_min - tp_min).abs() < 1e-12, "n={n}");
        assert!((c.tp_max - tp_max).abs() < 1e-12, "n={n}");
        assert!((c.p_max - p_max).abs() < 1e-12, "n={n}");
    }
}

#[test]
fn constant_scan_matches_second_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let n = 8;
        let d = random_model(&mut rng, n);
        let c = scan_constants(&d).unwrap();
        let psne = d.psne();
        let mut ne = Vec::new();
        let mut other = Vec::new();
        for bits in 0..(1u32 << n) {
            let x = JointAction::from_bits(bits);
            if psne.contains(x) {
                ne.push(d.pmf(x))
            } else {
                other.push(d.pmf(x))
            }
        }
        let cnt = other.len() as f64;
        let min_o = other.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_o = other.iter().cloned().fold(0.0, f64::max);
        assert!((c.tp_min - cnt * min_o).abs() < 1e-12);
        assert!((c.tp_max - cnt * max_o).abs() < 1e-12);
        assert!((c.p_max - ne.iter().cloned().fold(0.0, f64::max)).abs() < 1e-12);
        assert!((c.ne_mass - ne.iter().sum::<f64>()).abs() < 1e-12);
        assert_eq!(c.f_ne, psne.len() as f64 / 128.0);
        if let NoiseModel::Global(g) = &d {
            let closed = global_constants(g.q_g(), psne.len(), n).unwrap();
            assert!(
                (closed.tp_min - c.tp_min).abs() < 1e-12 && (closed.p_max - c.p_max).abs() < 1e-12
            );
        }
    }
}

#[test]
fn local_pmf_is_relabeling_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let n = 6;
        let psne = random_psne(&mut rng, n);
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.51..1.0)).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let moved_psne = PsneSet::new(n, psne.iter().map(|x| x.permuted(&perm)).collect()).unwrap();
        let mut moved_q = vec![0.0; n];
        for i in 0..n {
            moved_q[perm[i]] = q[i];
        }
        let a = LocalNoiseModel::new(psne, q).unwrap();
        let b = LocalNoiseModel::new(moved_psne, moved_q).unwrap();
        for x in JointAction::all(n) {
            assert!((a.pmf(x) - b.pmf(x.permuted(&perm))).abs() < 1e-15);
        }
    }
}

fn chi_square_p<D: JointDistribution<f64>>(d: &D, m: usize, seed: u64) -> f64 {
    let counts = d
        .sample_counts(m, &mut ChaCha8Rng::seed_from_u64(seed))
        .unwrap();
    let mut stat = 0.0;
    let mut cells = 0;
    for x in JointAction::all(d.n()) {
        let e = d.pmf(x) * m as f64;
        if e == 0.0 {
            assert_eq!(counts.count(x), 0);
            continue;
        }
        let o = counts.count(x) as f64;
        stat += (o - e) * (o - e) / e;
        cells += 1;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn samplers_fit_their_pmfs() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // odd anti-coordination cycles have no equilibrium; draw until one exists
    let psne = loop {
        let g: Game64 = generate_game(6, 1, &mut rng).unwrap();
        let p = enumerate_psne(&g).unwrap();
        if !p.is_empty() {
            break p;
        }
    };
    let lo = psne.len() as f64 / 64.0;
    let global = GlobalNoiseModel::new(psne.clone(), lo + (1.0 - lo) * 0.3).unwrap();
    let local = LocalNoiseModel::uniform(psne, 0.6).unwrap();
    let pg = chi_square_p(&global, 200_000, 10);
    let pl = chi_square_p(&local, 200_000, 11);
    assert!(pg > 0.001, "global p = {pg}");
    assert!(pl > 0.001, "local p = {pl}");
}

#[test]
fn noiseless_samplers_stay_on_equilibria() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let psne = random_psne(&mut rng, 7);
    let g = GlobalNoiseModel::new(psne.clone(), 1.0).unwrap();
    let l = LocalNoiseModel::uniform(psne.clone(), 1.0).unwrap();
    assert!(g
        .sample(5000, &mut rng)
        .unwrap()
        .iter()
        .all(|x| psne.contains(*x)));
    assert!(l
        .sample(5000, &mut rng)
        .unwrap()
        .iter()
        .all(|x| psne.contains(*x)));
}

#[test]
fn counts_and_list_sampling_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d = random_model(&mut rng, 6);
    let list = d.sample(3000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let counts = d
        .sample_counts(3000, &mut ChaCha8Rng::seed_from_u64(1))
        .unwrap();
    assert_eq!(
        lig_core::ActionCounts::from_actions(6, &list).unwrap(),
        counts
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn global_models_above_the_floor_satisfy_assumption1(seed in any::<u64>(), t in 0.001f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=10);
        let psne = random_psne(&mut rng, n);
        let lo = psne.len() as f64 / (1u64 << n) as f64;
        let q_g = lo + (1.0 - lo) * t;
        prop_assume!(q_g < 1.0 && q_g > lo);
        let c = GlobalNoiseModel::new(psne, q_g).unwrap().constants().unwrap();
        prop_assert!(c.assumption1_holds);
        prop_assert!(c.f_ne > 0.0 && c.f_ne <= 1.0);
    }
}
