use std::f64::consts::{PI, TAU};

use eqcentre::cycles::{ApsisKind, ApsisSource};
use eqcentre::frames::{fit_principal_plane, project_to_plane, Vec3};
use eqcentre::kepler::{centre_exact, Eccentricity};
use eqcentre::pipeline::{preprocess_records, PreprocessConfig, PreprocessOutput};
use eqcentre::synth::{synth_dataset, OrbitalElements, SynthSpec};
use nalgebra::Rotation3;
use proptest::prelude::*;

fn run(elements: OrbitalElements, cfg: &PreprocessConfig) -> PreprocessOutput {
    let records = synth_dataset(&SynthSpec::new(elements)).unwrap();
    preprocess_records(&records, cfg).unwrap()
}

fn lunar(e: f64) -> OrbitalElements {
    OrbitalElements::lunar_like().with_eccentricity(Eccentricity::new(e).unwrap())
}

#[test]
fn synthetic_residuals_follow_the_exact_centre() {
    let out = run(lunar(0.0549), &PreprocessConfig::default());
    let e = Eccentricity::new(0.0549).unwrap();
    let worst =
        out.samples.iter().map(|s| (s.residual - centre_exact(s.mean_anomaly, e).unwrap()).abs()).fold(0.0, f64::max);
    assert!(worst < 5e-3, "{worst}");
    let amplitude = out.samples.iter().map(|s| s.residual.abs()).fold(0.0, f64::max);
    assert!((amplitude / 0.1098 - 1.0).abs() < 0.02, "{amplitude}");
    let apsis_e = out.diagnostics.apsis_eccentricity.unwrap();
    assert!((apsis_e - 0.0549).abs() < 1e-3);
}

#[test]
fn cycles_conserve_records_and_motion_is_monotone() {
    let out = run(lunar(0.0549), &PreprocessConfig::default());
    let apogees: Vec<f64> = out.apsides.iter().filter(|a| a.kind == ApsisKind::Apogee).map(|a| a.epoch).collect();
    let (first, last) = (apogees[0], *apogees.last().unwrap());
    let inside = out.samples.len();
    let span = synth_dataset(&SynthSpec::new(lunar(0.0549)))
        .unwrap()
        .iter()
        .filter(|r| (first..last).contains(&r.epoch.as_f64()))
        .count();
    assert_eq!(inside, span);
    assert_eq!(out.diagnostics.cycle_records.iter().sum::<usize>(), inside);
    assert_eq!(out.segments.len(), apogees.len() - 1);
    for (k, seg) in out.segments.iter().enumerate() {
        assert_eq!(seg.index, k + 1);
        let rows: Vec<_> = out.samples.iter().filter(|s| s.cycle == seg.index).collect();
        // anomalies are reported in [0, 2pi) and wrap once, at the perigee
        let step = |a: f64, b: f64| (b - a).rem_euclid(TAU);
        assert!(rows.windows(2).all(|w| (1e-6..1.0).contains(&step(w[0].mean_anomaly, w[1].mean_anomaly))));
        assert!(rows.windows(2).all(|w| (1e-6..1.0).contains(&step(w[0].true_anomaly, w[1].true_anomaly))));
        assert!(rows.iter().all(|s| (s.residual - (s.true_anomaly - s.mean_anomaly)).abs() == 0.0));
    }
}

#[test]
fn circular_orbit_has_no_residual() {
    let cfg = PreprocessConfig { apsis_source: ApsisSource::Planar, ..PreprocessConfig::default() };
    let out = run(lunar(0.0), &cfg);
    assert!(out.segments.len() >= 12);
    let worst = out.samples.iter().map(|s| s.residual.abs()).fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn plane_of_the_synthetic_orbit_is_recovered() {
    let out = run(lunar(0.0549), &PreprocessConfig::default());
    // the orbit is exactly planar, so nothing is left out of plane
    assert!(out.diagnostics.reconstruction_ratio < 1e-9);
    let basis = &out.basis;
    for i in 0..3 {
        assert!((basis.components[i].norm() - 1.0).abs() < 1e-12);
        for j in i + 1..3 {
            assert!(basis.components[i].dot(&basis.components[j]).abs() < 1e-12);
        }
    }
}

fn cloud() -> impl Strategy<Value = Vec<Vec3>> {
    (
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 8..200),
        (0.5..3.0f64, 0.1..0.5f64, 0.0..0.05f64),
        (-PI..PI, -PI..PI, -PI..PI),
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64),
    )
        .prop_map(|(raw, scale, (r, p, y), shift)| {
            let rot = Rotation3::from_euler_angles(r, p, y);
            let shift = Vec3::new(shift.0, shift.1, shift.2);
            raw.into_iter().map(|(a, b, c)| rot * Vec3::new(a * scale.0, b * scale.1, c * scale.2) + shift).collect()
        })
}

proptest! {
    #[test]
    fn principal_basis_is_orthonormal(points in cloud()) {
        let basis = fit_principal_plane(&points).unwrap();
        for i in 0..3 {
            prop_assert!((basis.components[i].norm() - 1.0).abs() < 1e-12);
            for j in i + 1..3 {
                prop_assert!(basis.components[i].dot(&basis.components[j]).abs() < 1e-12);
            }
        }
        prop_assert!(basis.eigenvalues[0] >= basis.eigenvalues[1] && basis.eigenvalues[1] >= basis.eigenvalues[2]);
        let n = points.len() as f64;
        let trace: f64 = points.iter().map(|p| (p - basis.centroid).norm_squared()).sum::<f64>() / n;
        let total: f64 = basis.eigenvalues.iter().sum();
        prop_assert!((total - trace).abs() <= 1e-10 * trace);
    }

    #[test]
    fn projection_and_embedding_lose_only_the_normal(points in cloud()) {
        let basis = fit_principal_plane(&points).unwrap();
        let planar = project_to_plane(&points, &basis);
        for (p, q) in points.iter().zip(&planar) {
            let back = basis.embed(q) + basis.components[2] * basis.out_of_plane(p);
            prop_assert!((back - p).norm() < 1e-12);
        }
    }

    #[test]
    fn circles_in_any_plane_have_zero_residual(phase in 0.0..TAU, tilt in 0.0..1.2f64) {
        let mut el = lunar(0.0);
        el.inclination = tilt;
        el.mean_anomaly_at_epoch = phase;
        let cfg = PreprocessConfig { apsis_source: ApsisSource::Planar, ..PreprocessConfig::default() };
        let out = run(el, &cfg);
        let worst = out.samples.iter().map(|s| s.residual.abs()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-9, "{worst}");
    }
}
