//! End-to-end checks over small ensembles of the default scenario.

use uwa_qdchan::export::{summary_json, SUMMARY_SCHEMA};
use uwa_qdchan::pipeline::{time_step, Simulator};
use uwa_qdchan::stats::{acf, coherence_time, doppler_moments, doppler_psd};
use uwa_qdchan::{ConfigFile64, Simulator64, Taper, ValidatedConfig64};

fn scenario(n: usize, max_lag_s: f64) -> ValidatedConfig64 {
    let file = ConfigFile64 {
        n_realizations: n,
        anchor_times_s: vec![0.0, 2.0],
        max_lag_s,
        seed: 9,
        ..ConfigFile64::default()
    };
    file.validate().unwrap()
}

/// One line-of-sight ray whose Doppler factor is the constant `a`.
fn constant_doppler(a: f64) -> ValidatedConfig64 {
    let los_theta = (-(60.0_f64 - 40.0) / 1500.0).atan();
    let file = ConfigFile64 {
        max_total_bounces: 0,
        s_d: 1.0,
        s_r: 0.0,
        s_f: 0.0,
        tx_drift_amp: a.abs() * 1500.0,
        tx_drift_freq: 0.0,
        tx_drift_phase: Some(std::f64::consts::FRAC_PI_2.copysign(a)),
        theta_t: Some(los_theta),
        rx_drift_amp: 0.0,
        wave_amp_m: 0.0,
        n_realizations: 2,
        anchor_times_s: vec![0.0],
        ..ConfigFile64::default()
    };
    file.validate().unwrap()
}

#[test]
fn constant_doppler_chain() {
    for a in [-8e-4, -1e-4, 0.0, 2.5e-4, 1e-3] {
        let cfg = constant_doppler(a);
        let fc = cfg.grid().carrier_freq_hz;
        let sim = Simulator::new_traced(cfg);
        let ens = sim.ensemble(Some(1)).unwrap();
        let out = sim.analyze(&ens).unwrap();
        let acf = out[0].acf();
        for (_, v, _) in acf.time_slice().unwrap() {
            assert!((v.norm() - 1.0).abs() < 1e-9);
        }
        let spec = &out[0].spectrum;
        let m = &out[0].result.moments;
        assert!((m.mean_shift_hz - a * fc).abs() < spec.bin_width_hz, "a={a}: {m:?}");
        assert!(m.rms_spread_hz < spec.bin_width_hz);
        assert!(out[0].result.coherence_time_s.is_infinite());
    }
}

#[test]
fn stats_chain_on_default_scenario() {
    let cfg = scenario(40, 1.0);
    let sim = Simulator::new_traced(cfg.clone());
    let ens = sim.ensemble(None).unwrap();
    let step = time_step(&cfg.grid().time_samples).unwrap();
    let half = cfg.analysis().lag_steps(step);
    let corr = acf(&ens, 0.0, 0.0, step, half).unwrap();
    let slice = corr.total.time_slice().unwrap();
    assert_eq!(slice.len(), 2 * half + 1);
    assert!((slice[half].1.re - 1.0).abs() < 1e-12 && slice[half].1.im.abs() < 1e-12);

    let spec = doppler_psd(&corr.total, Taper::default()).unwrap();
    assert!(spec.psd.iter().all(|p| p.is_finite()));
    let m = doppler_moments(&spec).unwrap();
    assert!(m.rms_spread_hz > 0.0 && m.rms_spread_hz < 20.0);
    let tc = coherence_time(&corr.total, 0.5).unwrap();
    assert!(tc > 0.0 && tc < 1.0);
    // Lower threshold, longer time.
    assert!(coherence_time(&corr.total, 0.3).unwrap() >= tc);
}

#[test]
fn ctf_power_audit() {
    let cfg = scenario(60, 0.5);
    let p = cfg.power().clone();
    let sim = Simulator::new_traced(cfg);
    let ens = sim.ensemble(None).unwrap();
    let (mut total, mut parts, mut n) = (0.0, 0.0, 0usize);
    for g in &ens {
        assert!(g.h_total.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        for (((t, d), r), f) in g.h_total.iter().zip(&g.h_d).zip(&g.h_r).zip(&g.h_f) {
            total += t.norm_sqr();
            parts += p.s_d * d.norm_sqr() + p.s_r * r.norm_sqr() + p.s_f * f.norm_sqr();
            n += 1;
        }
    }
    let (total, parts) = (total / n as f64, parts / n as f64);
    assert!(((total - parts) / parts).abs() < 0.10, "{total} vs {parts}");
}

#[test]
fn component_recombination_within_three_standard_errors() {
    let cfg = scenario(200, 0.5);
    let power = cfg.power().clone();
    let sim: Simulator64 = Simulator::new_traced(cfg.clone());
    let ens = sim.ensemble(None).unwrap();
    let step = time_step(&cfg.grid().time_samples).unwrap();
    for anchor in [0.0, 2.0] {
        let corr = acf(&ens, anchor, 0.0, step, 100).unwrap();
        let rec = corr.recombined(&power);
        for ((&raw, &r), &se) in corr.total.raw.iter().zip(&rec).zip(&corr.total.std_err) {
            assert!((raw - r).norm() <= 3.0 * se, "anchor {anchor}: |{raw} - {r}| > 3·{se}");
        }
    }
}

#[test]
fn summary_validates_against_schema() {
    let schema: serde_json::Value = serde_json::from_str(SUMMARY_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let cfg = scenario(8, 0.2);
    let sim = Simulator::new_traced(cfg.clone());
    let ens = sim.ensemble(None).unwrap();
    let results: Vec<_> = sim.analyze(&ens).unwrap().into_iter().map(|c| c.result).collect();
    let summary = summary_json(&cfg, &results);
    let errors: Vec<String> = validator.iter_errors(&summary).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");

    let mut broken = summary.clone();
    broken["config_digest"] = serde_json::json!("not-a-digest");
    assert!(!validator.is_valid(&broken));
    let mut extra = summary;
    extra["unexpected"] = serde_json::json!(1);
    assert!(!validator.is_valid(&extra));
}

#[test]
fn single_and_double_precision_agree() {
    let file = ConfigFile64 {
        n_realizations: 3,
        anchor_times_s: vec![0.0],
        max_lag_s: 0.1,
        ..ConfigFile64::default()
    };
    let file32: uwa_qdchan::ConfigFile<f32> = serde_json::from_value(serde_json::to_value(&file).unwrap()).unwrap();
    let g64 = Simulator::new_traced(file.validate().unwrap()).synthesize(1).unwrap();
    let g32 = Simulator::new_traced(file32.validate().unwrap()).synthesize(1).unwrap();
    let scale = g64.h_total.iter().map(|z| z.norm()).fold(0.0, f64::max);
    // Phases of ~1e5 rad in f32 keep only a few digits.
    let worst = g64
        .h_d
        .iter()
        .zip(&g32.h_d)
        .map(|(a, b)| (a.re - b.re as f64).hypot(a.im - b.im as f64))
        .fold(0.0, f64::max);
    assert!(worst < 0.05 * scale, "{worst} vs {scale}");
}
