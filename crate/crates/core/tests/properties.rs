//! Randomized invariants across modules, driven by proptest over seeds and
//! sizes.

use proptest::prelude::*;

use steinlab::divergences::{max_relative_entropy, relative_entropy, stein_upper_bound};
use steinlab::hypothesis::{beta_n, positive_part_iid};
use steinlab::linalg::{fidelity, herm_eig, partial_trace, positive_part_trace, trace_norm, HermOperator, DEFAULT_DIM_CAP};
use steinlab::measures::{log_robustness, rel_ent_to_set, smooth_from_certificate, FwOptions, SmoothingStrategy};
use steinlab::povm::{ic_povm, km_estimate, reconstruct};
use steinlab::protocol::{simulate_alternative, Adversary, ProtocolConfig};
use steinlab::random;
use steinlab::state_sets::{k_extendible_embed, ppt_set, sep_inner_set, ConvexSet};
use steinlab::states::{purify_symmetric, random_state, random_state_dims, symmetrize, validate_state, DensityMatrix};
use steinlab::symmetry::{orthonormalize, superposition_check, typical_projector};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn random_herm(d: usize, seed: u64) -> HermOperator {
    let mut rng = random::rng(seed);
    HermOperator::new(vec![d], random::hermitian(d, &mut rng)).unwrap()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn positive_part_identity(d in 2usize..7, seed in any::<u64>()) {
        let a = random_herm(d, seed);
        let lhs = positive_part_trace(&a).unwrap();
        let rhs = 0.5 * (trace_norm(&a).unwrap() + a.trace());
        prop_assert!((lhs - rhs).abs() <= 1e-10);
    }

    #[test]
    fn partial_trace_contracts_norms_and_raises_fidelity(seed in any::<u64>()) {
        let dims = [2, 3];
        let x = HermOperator::new(dims.to_vec(), random::hermitian(6, &mut random::rng(seed))).unwrap();
        let rx = partial_trace(&x, &[0]).unwrap();
        prop_assert!(trace_norm(&rx).unwrap() <= trace_norm(&x).unwrap() + 1e-9);
        prop_assert!(positive_part_trace(&rx).unwrap() <= positive_part_trace(&x).unwrap() + 1e-9);
        let a = random_state_dims(&dims, 3, seed ^ 1).unwrap();
        let b = random_state_dims(&dims, 2, seed ^ 2).unwrap();
        let f = fidelity(a.op(), b.op()).unwrap();
        let fr = fidelity(a.partial_trace(&[0]).unwrap().op(), b.partial_trace(&[0]).unwrap().op()).unwrap();
        prop_assert!(fr >= f - 1e-9);
    }

    #[test]
    fn eig_is_deterministic(d in 2usize..9, seed in any::<u64>()) {
        let a = random_herm(d, seed);
        let s1 = herm_eig(&a).unwrap();
        let s2 = herm_eig(&a.clone()).unwrap();
        prop_assert_eq!(s1.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), s2.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert!((&s1.vectors - &s2.vectors).max_abs() == 0.0);
    }

    #[test]
    fn random_states_validate(d in 1usize..6, seed in any::<u64>()) {
        let rank = 1 + (seed as usize % d);
        let rho = random_state(d, rank, seed).unwrap();
        prop_assert!(validate_state(rho.into_op()).is_ok());
    }

    #[test]
    fn relative_entropy_below_max_and_additive(d in 2usize..5, seed in any::<u64>()) {
        let rho = random_state(d, d, seed).unwrap();
        let sigma = random_state(d, d, seed ^ 7).unwrap();
        let s = relative_entropy(&rho, &sigma).unwrap().value;
        let smax = max_relative_entropy(&rho, &sigma).unwrap().value;
        prop_assert!(s <= smax + 1e-8);
        let s2 = relative_entropy(&rho.tensor_power(2, DEFAULT_DIM_CAP).unwrap(), &sigma.tensor_power(2, DEFAULT_DIM_CAP).unwrap()).unwrap().value;
        prop_assert!((s2 - 2.0 * s).abs() <= 1e-8);
    }

    #[test]
    fn relative_entropy_jointly_convex(seed in any::<u64>(), lambda in 0.0f64..1.0) {
        let r1 = random_state(3, 3, seed).unwrap();
        let r2 = random_state(3, 2, seed ^ 1).unwrap();
        let s1 = random_state(3, 3, seed ^ 2).unwrap();
        let s2 = random_state(3, 3, seed ^ 3).unwrap();
        let lhs = relative_entropy(&r1.mix(lambda, &r2), &s1.mix(lambda, &s2)).unwrap().value;
        let rhs = lambda * relative_entropy(&r1, &s1).unwrap().value + (1.0 - lambda) * relative_entropy(&r2, &s2).unwrap().value;
        prop_assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn positive_part_below_stein_bound(seed in any::<u64>(), y in -0.5f64..2.0, n in 1usize..7) {
        let rho = random_state(2, 2, seed).unwrap();
        let sigma = random_state(2, 2, seed ^ 5).unwrap();
        let v = positive_part_iid(&rho, &sigma, n, y).unwrap();
        let b = stein_upper_bound(&rho, &sigma, n, y).unwrap();
        prop_assert!(v <= b + 1e-9, "value {} bound {}", v, b);
    }

    #[test]
    fn symmetrize_fixes_powers(seed in any::<u64>(), n in 2usize..5) {
        let rho = random_state(2, 2, seed).unwrap();
        let p = rho.tensor_power(n, DEFAULT_DIM_CAP).unwrap();
        let s = symmetrize(p.op(), n).unwrap();
        prop_assert!((s.mat() - p.op().mat()).max_abs() <= 1e-10);
    }

    #[test]
    fn superposition_lemma_on_orthonormal_families(seed in any::<u64>(), dim in 2usize..9, count in 1usize..6) {
        let mut rng = random::rng(seed);
        let raw: Vec<_> = (0..count.min(dim)).map(|_| random::unit_vector(dim, &mut rng)).collect();
        let ortho = orthonormalize(&raw);
        prop_assert!(superposition_check(&ortho).unwrap() >= -1e-9);
    }

    #[test]
    fn reconstruction_is_linear(seed in any::<u64>(), w in 0.0f64..1.0) {
        let f = ic_povm(3, seed).unwrap();
        let a = random_state(3, 3, seed ^ 1).unwrap();
        let b = random_state(3, 1, seed ^ 2).unwrap();
        let mix = a.mix(w, &b);
        let la = reconstruct(&f, &f.probabilities(a.op()).unwrap()).unwrap().operator;
        let lb = reconstruct(&f, &f.probabilities(b.op()).unwrap()).unwrap().operator;
        let lm = reconstruct(&f, &f.probabilities(mix.op()).unwrap()).unwrap().operator;
        prop_assert!((lm.mat() - la.combine(w, &lb, 1.0 - w).mat()).max_abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn ppt_projection_idempotent_and_nonexpansive(seed in any::<u64>()) {
        let set = ppt_set(&[2, 2]).unwrap();
        let x = HermOperator::new(vec![2, 2], random::hermitian(4, &mut random::rng(seed))).unwrap();
        let y = HermOperator::new(vec![2, 2], random::hermitian(4, &mut random::rng(seed ^ 9))).unwrap();
        let px = set.project(&x).unwrap().point;
        let ppx = set.project(&px).unwrap().point;
        prop_assert!(ppx.frobenius_distance(&px) <= 1e-7);
        let py = set.project(&y).unwrap().point;
        prop_assert!(px.frobenius_distance(&py) <= x.frobenius_distance(&y) + 1e-7);
    }

    #[test]
    fn inner_hull_members_are_ppt(seed in any::<u64>()) {
        let inner = sep_inner_set(&[2, 3], 8, seed).unwrap();
        let ppt = ppt_set(&[2, 3]).unwrap();
        let m = inner.sample_member(seed ^ 4).unwrap();
        prop_assert!(ppt.membership(m.op(), 1e-9).unwrap().is_member());
    }

    #[test]
    fn extension_is_b_symmetric(seed in any::<u64>(), k in 1usize..4) {
        let rho = random_state_dims(&[2, 2], 2, seed).unwrap();
        prop_assert!(k_extendible_embed(&rho, k).unwrap().b_symmetry_residual <= 1e-12);
    }

    #[test]
    fn measure_ordering_and_smoothing_monotone(seed in any::<u64>()) {
        let rho = random_state_dims(&[2, 2], 2, seed).unwrap();
        let set = ppt_set(&[2, 2]).unwrap();
        let e = rel_ent_to_set(&rho, &set, &FwOptions::default()).unwrap();
        let lr = log_robustness(&rho, &set, 1e-6).unwrap();
        prop_assert!(e.value <= lr.value + 1e-6, "E {} LR {}", e.value, lr.value);
        let s_cert = relative_entropy(&rho, &lr.certificate).unwrap().value;
        prop_assert!(s_cert >= e.value - 1e-3);
        prop_assert!(e.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let mut last = f64::INFINITY;
        for eps in [0.0, 0.05, 0.1, 0.2, 0.4] {
            let v = smooth_from_certificate(&rho, &lr, eps, SmoothingStrategy::Best).unwrap().value;
            prop_assert!(v <= last + 1e-12);
            last = v;
        }
    }

    #[test]
    fn beta_nonincreasing_in_eps(seed in any::<u64>(), n in 1usize..5) {
        let rho = random_state(2, 2, seed).unwrap();
        let sigma = random_state(2, 2, seed ^ 3).unwrap();
        let mut last = f64::INFINITY;
        for eps in [0.01, 0.05, 0.1, 0.3] {
            let b = beta_n(&rho, &sigma, n, eps).unwrap().0.type2;
            prop_assert!(b <= last + 1e-12);
            last = b;
        }
    }

    #[test]
    fn typical_mass_meets_hoeffding(p in 0.05f64..0.95, n in 2usize..11) {
        let rho = DensityMatrix::from_diag(&[p, 1.0 - p]).unwrap();
        let delta = 0.3;
        let t = typical_projector(&rho, n, delta).unwrap();
        let span = (p.log2() - (1.0 - p).log2()).abs();
        let hoeffding = 1.0 - 2.0 * (-2.0 * n as f64 * delta * delta / (span * span)).exp();
        prop_assert!(t.mass >= hoeffding - 1e-12);
    }

    #[test]
    fn purify_symmetric_is_permutation_invariant(seed in any::<u64>(), n in 2usize..4) {
        let rho = random_state(2, 2, seed).unwrap();
        let rho_n = DensityMatrix::assume_valid(symmetrize(random_state(1 << n, 2, seed ^ 1).unwrap().op(), n).unwrap()).with_dims(vec![2; n]).unwrap();
        let out = purify_symmetric(&rho_n, &rho, n).unwrap();
        let dims = out.state.dims().to_vec();
        let blocks: Vec<Vec<usize>> = (0..n).map(|i| vec![2 * i, 2 * i + 1]).collect();
        for j in 1..n {
            let pi = steinlab::states::Permutation::transposition(n, j - 1, j);
            let moved = steinlab::states::permute_vector(out.state.amps(), &dims, &blocks, &pi).unwrap();
            let err = moved.iter().zip(out.state.amps()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-9);
        }
    }

    #[test]
    fn km_at_least_one(seed in any::<u64>()) {
        let f = ic_povm(2, seed).unwrap();
        prop_assert!(km_estimate(&f, 30, seed).unwrap().estimate >= 1.0);
    }
}

#[test]
fn permuted_and_iid_adversaries_agree_within_ci() {
    let f = steinlab::povm::tetrahedral_frame().unwrap();
    let target = steinlab::states::max_entangled(2).density();
    let cfg = ProtocolConfig { target, n: 60, alpha: 0.5, eps_gap: 1.6, frames: vec![f.clone(), f], trials: 400, seed: 3 };
    let sigma = DensityMatrix::maximally_mixed(&[2, 2]).mix(0.5, &DensityMatrix::from_diag(&[0.5, 0.0, 0.0, 0.5]).unwrap().with_dims(vec![2, 2]).unwrap());
    let iid = simulate_alternative(&cfg, &Adversary::Iid(sigma.clone()), &[60]).unwrap();
    let perm = simulate_alternative(&cfg, &Adversary::PermutedProducts(vec![sigma.clone(), sigma]), &[60]).unwrap();
    let (a, b) = (&iid.points[0], &perm.points[0]);
    assert!(a.ci_low <= b.ci_high && b.ci_low <= a.ci_high, "{a:?} vs {b:?}");
}
