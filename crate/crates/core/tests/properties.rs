use std::f64::consts::TAU;

use hpgpn::analytics::{self, AnalyticInputs};
use hpgpn::channel::{array_response, generate_channel, ChannelParams};
use hpgpn::detection::{polar_metric, DetectorConfig};
use hpgpn::linalg::{frobenius, SortedSvd};
use hpgpn::modulation::{build_pqam, demap_symbols, map_bits, Scheme};
use hpgpn::montecarlo::rng::derive_stream_rng;
use hpgpn::montecarlo::{run_ber_sweep, ExperimentConfig};
use hpgpn::phasenoise::{apply_clo, compensate, estimate_pn, PnConfig, PnTrace};
use hpgpn::precoding::{design_hybrid, equivalent_channel, AltMinOptions};
use hpgpn::C64;
use nalgebra::DVector;
use proptest::prelude::*;

fn params(n_tx: usize, n_rx: usize, n_clusters: usize, n_rays: usize) -> ChannelParams {
    ChannelParams {
        n_tx,
        n_rx,
        n_clusters,
        n_rays,
        angular_spread_deg: 10.0,
    }
}

fn pqam_shapes() -> impl Strategy<Value = (usize, usize)> {
    prop_oneof![
        Just((4, 1)),
        Just((8, 1)),
        Just((8, 2)),
        Just((16, 1)),
        Just((16, 2)),
        Just((16, 4)),
        Just((16, 8)),
        Just((64, 4)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn array_response_has_unit_norm(theta in -10.0f64..10.0, n in 1usize..300) {
        let a = array_response(theta, n).unwrap();
        prop_assert!((a.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channel_is_a_pure_function_of_seed(seed: u64, index in 0u64..1000) {
        let p = params(16, 8, 2, 3);
        let a = generate_channel(&p, &mut derive_stream_rng(seed, index, 0)).unwrap();
        let b = generate_channel(&p, &mut derive_stream_rng(seed, index, 0)).unwrap();
        prop_assert_eq!(a.h, b.h);
    }

    #[test]
    fn few_paths_bound_the_rank(seed: u64, clusters in 1usize..3, rays in 1usize..3) {
        let p = params(24, 16, clusters, rays);
        let h = generate_channel(&p, &mut derive_stream_rng(seed, 0, 0)).unwrap().h;
        let svd = SortedSvd::new(&h).unwrap();
        let rank = svd.s.iter().filter(|&&s| s > 1e-9 * svd.s[0]).count();
        prop_assert!(rank <= clusters * rays, "rank {} > {}", rank, clusters * rays);
    }

    #[test]
    fn pqam_energy_gaps_and_gray_labels((m, gamma) in pqam_shapes()) {
        let c = build_pqam(m, gamma).unwrap();
        prop_assert!((c.mean_energy() - 1.0).abs() < 1e-12);
        let mut radii: Vec<f64> = c.symbols.iter().map(|s| s.norm()).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        prop_assert_eq!(radii.len(), gamma);
        let gap = 2.0 / ((4.0 * (gamma * gamma) as f64 - 1.0) / 3.0).sqrt();
        for w in radii.windows(2) {
            prop_assert!((w[1] - w[0] - gap).abs() < 1e-12);
        }
        let per_ring = m / gamma;
        let find = |ring: usize, phase: usize| {
            (0..m).find(|&i| c.ring[i] == ring && c.phase_index[i] == phase).unwrap()
        };
        for ring in 0..gamma {
            for p in 0..per_ring {
                let a = find(ring, p);
                if per_ring > 1 {
                    let b = find(ring, (p + 1) % per_ring);
                    prop_assert_eq!((a ^ b).count_ones(), 1);
                }
                if ring + 1 < gamma {
                    let b = find(ring + 1, p);
                    prop_assert_eq!((a ^ b).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn bits_survive_mapping((m, gamma) in pqam_shapes(), seed: u64) {
        let c = Scheme::pqam(m, gamma).build().unwrap();
        let mut rng = derive_stream_rng(seed, 0, 0);
        let bits: Vec<u8> = (0..c.bits_per_symbol * 40).map(|_| rand::Rng::random_range(&mut rng, 0..2u8)).collect();
        let idx = map_bits(&c, &bits).unwrap();
        prop_assert_eq!(demap_symbols(&c, &idx).unwrap(), bits);
    }

    #[test]
    fn polar_metric_ignores_full_turns(
        rho in 0.0f64..2.0,
        theta in -3.1f64..3.1,
        s_rho in 0.1f64..2.0,
        s_theta in -3.1f64..3.1,
        turns in -3i32..4,
        s2 in 0.0f64..0.2,
    ) {
        let cfg = DetectorConfig::polar(s2, 100.0).unwrap();
        let a = polar_metric(rho, theta, (s_rho, s_theta), &cfg);
        let b = polar_metric(rho, theta + TAU * turns as f64, (s_rho, s_theta), &cfg);
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn pilot_estimate_inverts_noiseless_rotation(psi in -3.1f64..3.1, gains in proptest::collection::vec(0.1f64..5.0, 1..4)) {
        let rho = 0.7;
        let pilots: Vec<C64> = (0..gains.len()).map(|q| C64::from_polar(1.0, 0.3 * q as f64)).collect();
        let r: Vec<C64> = pilots
            .iter()
            .zip(&gains)
            .map(|(s, g)| C64::from_polar(1.0, psi) * s * rho * g)
            .collect();
        let streams: Vec<usize> = (0..gains.len()).collect();
        let est = estimate_pn(&streams, &r, &pilots, &gains, rho).unwrap();
        prop_assert!((est - psi).abs() < 1e-12);
        let mut back = r.clone();
        compensate(&mut back, est);
        for ((b, s), g) in back.iter().zip(&pilots).zip(&gains) {
            prop_assert!((b - s * rho * g).norm() < 1e-12);
        }
    }

    #[test]
    fn bound_meets_rate_without_noise_and_awgn_ber_falls(
        v in proptest::collection::vec(0.05f64..10.0, 1..6),
        sigma2 in 1e-4f64..10.0,
    ) {
        let mut v = v;
        v.sort_by(|a, b| b.total_cmp(a));
        let n = v.len();
        let inputs = AnalyticInputs {
            v_diag: v,
            rho: 1.3,
            xi: vec![1.0; n],
            omega: 2.0,
            sigma2,
            sigma2_psi: 1e-12,
            n_pil: 0,
        };
        let bound = analytics::se_pn_lower_bound(&inputs).unwrap();
        let rate = analytics::se_no_pn(&inputs).unwrap();
        prop_assert!((bound - rate).abs() <= 1e-9 * rate);
        let noisier = AnalyticInputs { sigma2_psi: 0.1, ..inputs.clone() };
        prop_assert!(analytics::se_pn_lower_bound(&noisier).unwrap() < rate);
        let lo = analytics::ber_no_pn_qam(&inputs, 16).unwrap();
        let hi = analytics::ber_no_pn_qam(&AnalyticInputs { sigma2: sigma2 * 2.0, ..inputs }, 16).unwrap();
        prop_assert!(lo <= hi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn hybrid_design_invariants(seed: u64, n_s in 1usize..4, extra_rf in 0usize..2) {
        let p = params(32, 12, 3, 4);
        let h = generate_channel(&p, &mut derive_stream_rng(seed, 0, 0)).unwrap().h;
        let n_rf = n_s + extra_rf;
        let d = design_hybrid(&h, n_s, n_rf, &AltMinOptions::default()).unwrap();
        let ps = &d.precoders;
        ps.check_invariants().unwrap();
        // inter-stream leakage after the digital stage
        let eff = ps.u_bb.adjoint() * equivalent_channel(&h, &ps.f_rf, &ps.w_rf).unwrap() * &ps.f_bb;
        for k in 0..n_s {
            for i in 0..n_s {
                if k != i {
                    prop_assert!(eff[(k, i)].norm() <= 1e-9 * ps.v_diag[0]);
                }
            }
        }
        // hybrid rate never beats the fully digital one at the same thermal noise
        let sigma2 = 0.5;
        let xi: Vec<f64> = (0..n_s)
            .map(|k| (ps.w_rf.clone() * ps.u_bb.column(k)).norm_squared())
            .collect();
        let hp: Vec<f64> = (0..n_s).map(|k| (ps.rho * ps.v_diag[k]).powi(2) / (sigma2 * xi[k])).collect();
        let fdp: Vec<f64> = d.fdp.singular_values.iter().map(|s| s * s / sigma2).collect();
        prop_assert!(analytics::sum_rate(&hp) <= analytics::sum_rate(&fdp) * (1.0 + 1e-12));
    }

    #[test]
    fn received_model_reduces_to_gain_times_symbol(seed: u64, psi in -3.0f64..3.0) {
        let p = params(16, 8, 2, 3);
        let h = generate_channel(&p, &mut derive_stream_rng(seed, 0, 0)).unwrap().h;
        let ps = design_hybrid(&h, 2, 2, &AltMinOptions::default()).unwrap().precoders;
        let s = DVector::from_vec(vec![C64::new(0.7, -0.7), C64::new(-1.0, 0.0)]);
        let trace = PnTrace { psi: vec![psi], phi_rx: vec![0.2] };
        let r = apply_clo(&s, &ps, &h, &DVector::zeros(8), &trace, 0).unwrap();
        for k in 0..2 {
            let want = C64::from_polar(1.0, psi) * s[k] * ps.rho * ps.v_diag[k];
            prop_assert!((r[k] - want).norm() <= 1e-9 * frobenius(&h));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn sweeps_do_not_depend_on_worker_count(seed: u64, workers in 2usize..5) {
        let cfg = ExperimentConfig {
            channel: params(16, 8, 2, 3),
            n_s: 2,
            n_rf: 2,
            n_channels: 70,
            n_symbols: 8,
            snr_db: vec![0.0, 15.0],
            pn: vec![PnConfig::from_total(0.01).unwrap()],
            master_seed: seed,
            min_bit_errors: 50,
            ..ExperimentConfig::default()
        };
        let one = run_ber_sweep(&cfg, Some(1)).unwrap();
        let many = run_ber_sweep(&cfg, Some(workers)).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        one.write_csv_to(&mut a).unwrap();
        many.write_csv_to(&mut b).unwrap();
        prop_assert_eq!(a, b);
    }
}
