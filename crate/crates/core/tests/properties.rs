use carpet_spectra::covering::{count_inside, enumerate_s, DEFAULT_CAP};
use carpet_spectra::dimensions::{average_residual, column_residual, projected_residual};
use carpet_spectra::input::{parse_carpet, to_json};
use carpet_spectra::pressure::g_value;
use carpet_spectra::variational::{f_eval, functionals, kl_divergence, project, z_vector, ProbVector};
use carpet_spectra::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn carpet_from(seed: u64) -> GLCarpet {
    fixtures::random_carpet(&mut ChaCha8Rng::seed_from_u64(seed), 4, 4)
}

fn regular_carpet(seed: u64) -> Option<(GLCarpet, CarpetSummary)> {
    let k = carpet_from(seed);
    let s = summarize(&k);
    (!s.degenerate).then_some((k, s))
}

fn weights(seed: u64, n: usize) -> ProbVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // sprinkle exact zeros so faces of the simplex are covered too
    let raw: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() })
        .collect();
    if raw.iter().all(|&x| x == 0.0) {
        return ProbVector::uniform(n);
    }
    ProbVector::normalized(raw).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn carpet_rebuilds_identically(seed in any::<u64>()) {
        let k = carpet_from(seed);
        let again = GLCarpet::from_maps(k.maps().to_vec()).unwrap();
        prop_assert_eq!(&again, &k);
        prop_assert_eq!(parse_carpet(&to_json(&k)).unwrap(), k.clone());
        let area: f64 = k.maps().iter().map(|m| m.a * m.b).sum();
        prop_assert!(area <= 1.0);
    }

    #[test]
    fn dimension_chain(seed in any::<u64>()) {
        let k = carpet_from(seed);
        let s = summarize(&k);
        prop_assert!(projected_residual(&k, s.dim_eta).abs() <= 1e-12);
        prop_assert!(average_residual(&k, s.dim_eta, s.t_min).abs() <= 1e-12);
        for (j, &sj) in s.s.iter().enumerate() {
            prop_assert!(column_residual(&k, j, sj).unwrap().abs() <= 1e-12);
        }
        let smin = s.s.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(0.0 <= smin && smin <= s.t_min + 1e-12);
        prop_assert!(s.t_min <= s.t_max && s.t_max <= 1.0);
        prop_assert_eq!(s.dim_box, s.dim_eta + s.t_min);
        prop_assert_eq!(s.dim_assouad, s.dim_eta + s.t_max);
        prop_assert!(1.0 < s.kappa_min && s.kappa_min <= s.kappa_max);
    }

    #[test]
    fn g_is_concave_increasing_and_vanishes_at_t_max(seed in any::<u64>(), u in 0.0..1.0f64, v in 0.0..1.0f64, lam in 0.0..1.0f64) {
        let Some((k, s)) = regular_carpet(seed) else { return Ok(()) };
        let span = s.t_max - s.t_min;
        let (t1, t2) = (s.t_min + span * u.min(v), s.t_min + span * u.max(v));
        let mid = lam * t1 + (1.0 - lam) * t2;
        prop_assert!(g_value(&k, mid) >= lam * g_value(&k, t1) + (1.0 - lam) * g_value(&k, t2) - 1e-12);
        for j in 0..k.num_columns() {
            prop_assert!(pressure::psi_prime(&k, j, mid).unwrap() > 0.0);
            prop_assert!(pressure::psi_second(&k, j, mid).unwrap() <= 0.0);
        }
        prop_assert!(g_value(&k, s.t_max).abs() <= 1e-11);
        if t1 < s.t_max {
            prop_assert!(g_value(&k, t1) < 0.0);
        }
        if t2 > t1 {
            prop_assert!(g_value(&k, t2) > g_value(&k, t1));
        }
    }

    #[test]
    fn partition_tiles_and_orders_theta(seed in any::<u64>()) {
        let Some((k, s)) = regular_carpet(seed) else { return Ok(()) };
        let p = build_partition(&k, &s).unwrap();
        prop_assert_eq!(p.parts.first().unwrap().t_lo, s.t_min);
        prop_assert_eq!(p.parts.last().unwrap().t_hi, s.t_max);
        for w in p.parts.windows(2) {
            prop_assert_eq!(w[0].t_hi, w[1].t_lo);
            prop_assert!(w[0].column != w[1].column);
            prop_assert!(w[0].theta_max <= w[1].theta_min);
        }
        for (n, part) in p.parts.iter().enumerate() {
            prop_assert!(part.t_lo < part.t_hi);
            if part.homogeneous {
                prop_assert_eq!(part.theta_min, part.theta_max);
            } else {
                prop_assert!(part.theta_min < part.theta_max);
            }
            for i in 1..100 {
                let t = part.t_lo + (part.t_hi - part.t_lo) * i as f64 / 100.0;
                let (_, argmin) = pressure::g(&k, t);
                // ties within the identity tolerance name every tied column
                prop_assert!(argmin.contains(&part.column), "part {} at t = {}: {:?}", n, t, argmin);
            }
        }
    }

    #[test]
    fn spectrum_bounds_cases_and_inverse(seed in any::<u64>(), theta in 1e-4..(1.0 - 1e-4)) {
        let k = carpet_from(seed);
        let s = summarize(&k);
        let pt = spectrum(&k, &s, None, theta).unwrap();
        prop_assert!(s.dim_box - 1e-12 <= pt.value && pt.value <= s.dim_assouad);
        if s.degenerate {
            prop_assert_eq!(pt.value, s.dim_box);
            prop_assert_eq!(pt.case, Case::Degenerate);
            return Ok(());
        }
        let p = build_partition(&k, &s).unwrap();
        prop_assert_eq!(pt.case == Case::AssouadPlateau, theta >= p.theta_global_max);
        let back = phi_inv(phi(theta, s.kappa_max).unwrap(), s.kappa_max).unwrap();
        prop_assert!((back - theta).abs() <= 1e-12);
        let pw = spectrum_piecewise(&k, &s, &p, theta).unwrap();
        prop_assert!((pw - pt.value).abs() <= 1e-10);
    }

    #[test]
    fn fenchel_inequality(seed in any::<u64>(), u in 0.0..1.0f64, alpha in 0.01..20.0f64) {
        let Some((k, s)) = regular_carpet(seed) else { return Ok(()) };
        let p = build_partition(&k, &s).unwrap();
        let t = s.t_min + (s.t_max - s.t_min) * u;
        let c = conjugate(&k, &s, &p, alpha).unwrap();
        prop_assert!(c.value + g_value(&k, t) <= alpha * t + 1e-11);
        prop_assert!((c.value - (alpha * c.t_star - g_value(&k, c.t_star))).abs() <= 1e-10);
    }

    #[test]
    fn functionals_and_eccentricity(seed in any::<u64>(), wseed in any::<u64>()) {
        let k = carpet_from(seed);
        let s = summarize(&k);
        let w = weights(wseed, k.num_maps());
        let f = functionals(&k, &w).unwrap();
        prop_assert!(f.chi2 > f.chi1 && f.chi1 > 0.0);
        prop_assert!(s.kappa_min - 1e-12 <= f.gamma && f.gamma <= s.kappa_max + 1e-12);
        prop_assert!(f.entropy >= f.projected_entropy - 1e-12 && f.projected_entropy >= -1e-15);
        prop_assert!((project(&k, &w).unwrap().as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn z_vector_keeps_column_marginal(seed in any::<u64>(), pseed in any::<u64>(), u in 0.0..1.0f64) {
        let k = carpet_from(seed);
        let s = summarize(&k);
        let p = weights(pseed, k.num_columns());
        let t = s.t_min + (s.t_max - s.t_min) * u;
        let z = z_vector(&k, t, &p).unwrap();
        let eta = project(&k, &z).unwrap();
        prop_assert!(eta.l1(&p) <= 1e-12);
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_the_diagonal(n in 1usize..10, a in any::<u64>(), b in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(a ^ b.rotate_left(17));
        let w = ProbVector::normalized((0..n).map(|_| rng.random::<f64>() + 1e-9).collect()).unwrap();
        let v = ProbVector::normalized((0..n).map(|_| rng.random::<f64>() + 1e-9).collect()).unwrap();
        prop_assert!(kl_divergence(&w, &v).unwrap() >= 0.0);
        prop_assert!(kl_divergence(&w, &w).unwrap().abs() <= 1e-15);
    }

    #[test]
    fn f_is_continuous_across_the_branch_boundary(seed in any::<u64>(), wseed in any::<u64>()) {
        let Some((k, s)) = regular_carpet(seed) else { return Ok(()) };
        let w = weights(wseed, k.num_maps());
        let fw = functionals(&k, &w).unwrap();
        // v = the most eccentric map, θ solving φ(θ, v) = Γ(w)
        let n = k.num_maps();
        let top = (0..n).max_by(|&a, &b| k.maps()[a].kappa().total_cmp(&k.maps()[b].kappa())).unwrap();
        let v = ProbVector::vertex(n, top);
        let gv = functionals(&k, &v).unwrap().gamma;
        let theta = 1.0 / (1.0 + fw.gamma * (1.0 - 1.0 / gv));
        let below = f_eval(&k, &s, theta * (1.0 - 1e-10), &v, &w).unwrap();
        let above = f_eval(&k, &s, theta * (1.0 + 1e-10), &v, &w).unwrap();
        prop_assert!((below - above).abs() <= 1e-8, "{} vs {}", below, above);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn spectrum_grid_shape(seed in any::<u64>()) {
        let Some((k, s)) = regular_carpet(seed) else {
            let k = carpet_from(seed);
            let s = summarize(&k);
            let pts = spectrum_grid(&k, &s, None, &uniform_thetas(200), Parallelism::Sequential).unwrap();
            prop_assert!(pts.iter().all(|p| p.value == s.dim_box));
            return Ok(());
        };
        let p = build_partition(&k, &s).unwrap();
        let th = uniform_thetas(10_000);
        let v: Vec<f64> = spectrum_grid(&k, &s, Some(&p), &th, Parallelism::Parallel)
            .unwrap()
            .iter()
            .map(|x| x.value)
            .collect();
        for i in 1..v.len() {
            prop_assert!(v[i] >= v[i - 1]);
            if th[i] < p.theta_global_max - 1e-3 {
                prop_assert!(v[i] - v[i - 1] > 1e-13);
            }
        }
        // convex on the box tail and on kink plateaus
        let mut convex = vec![(0.0, p.theta_global_min)];
        for w in p.parts.windows(2) {
            convex.push((w[0].theta_max, w[1].theta_min));
        }
        for i in 1..v.len() - 1 {
            let d2 = v[i - 1] - 2.0 * v[i] + v[i + 1];
            if convex.iter().any(|&(a, b)| th[i - 1] > a && th[i + 1] < b) {
                prop_assert!(d2 > 0.0, "not convex at θ = {}: {}", th[i], d2);
            }
        }
    }

    #[test]
    fn covering_squares_form_a_section(seed in any::<u64>(), wseed in any::<u64>(), r in 0.02..0.3f64) {
        let k = fixtures::random_carpet(&mut ChaCha8Rng::seed_from_u64(seed), 3, 2);
        let squares = enumerate_s(&k, r, DEFAULT_CAP).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(wseed);
        for _ in 0..20 {
            let word: Vec<usize> = (0..400).map(|_| rng.random_range(0..k.num_maps())).collect();
            let hits = squares.iter().filter(|q| q.matches(&k, &word)).count();
            prop_assert_eq!(hits, 1);
        }
        for q in squares.iter().take(10) {
            let rho = q.base.height * 0.5;
            prop_assert!(count_inside(&k, q, rho, DEFAULT_CAP).unwrap() >= 1.0);
        }
    }
}
