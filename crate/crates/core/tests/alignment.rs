use amptcr_core::alignment::{rotation_challenge, rotation_challenge_with_poses, ChallengeReport};
use amptcr_core::chemio::{parse_structure, Molecule, StructureFormat};
use amptcr_core::pipeline::{build_cloud, CloudConfig};
use amptcr_core::Mat3;

fn fixture(name: &str) -> Molecule<f64> {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_structure(&std::fs::read_to_string(path).unwrap(), StructureFormat::Xyz).unwrap()
}

fn light() -> CloudConfig {
    CloudConfig {
        n_points: 256,
        ..CloudConfig::default()
    }
}

#[test]
fn identical_poses_agree_exactly() {
    let mol = fixture("asym20.xyz");
    let poses = [Mat3::identity(), Mat3::identity()];
    let r = rotation_challenge_with_poses(&mol, &light(), &poses, 0.05).unwrap();
    assert_eq!(r.trials, 2);
    assert!(r.max_rmsd < 1e-12, "{}", r.max_rmsd);
    assert_eq!(r.success_rate, 1.0);
    assert_eq!(r.sign_flips, [0, 0, 0]);
}

#[test]
fn challenge_needs_two_trials() {
    let mol = fixture("asym20.xyz");
    assert!(rotation_challenge(&mol, &light(), 1, 0, 0.05).is_err());
}

#[test]
fn report_json_keys() {
    let mol = fixture("asym20.xyz");
    let r = rotation_challenge(&mol, &light(), 3, 4, 0.05).unwrap();
    assert!(r.success_rate >= 0.0 && r.success_rate <= 1.0);
    assert!(r.sign_flips.iter().all(|&c| c <= r.trials));
    let v: serde_json::Value = serde_json::to_value(&r).unwrap();
    for key in ["trials", "mean_rmsd", "max_rmsd", "sign_flips", "success_rate"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let back: ChallengeReport = serde_json::from_value(v).unwrap();
    assert_eq!(back, r);
}

#[test]
fn built_cloud_invariants() {
    let mol = fixture("asym20.xyz");
    let cfg = light();
    let b = build_cloud(&mol, &cfg).unwrap();
    assert_eq!(b.cloud.len(), 256);
    assert_eq!(b.cloud.topo.len(), 256);
    assert!(b.cloud.scalars.iter().all(|s| s.abs() <= 1.0));
    assert!(b.cloud.scalars.iter().any(|s| s.abs() == 1.0));
    assert!((b.frame.rotation.det() - 1.0).abs() < 1e-9);
    assert!(b.frame.rotation.orthonormality_error() < 1e-9);
    assert!(b.cloud.centroid().norm() < 0.5);
    for d in &b.cloud.topo {
        assert!((d.t1.norm() - 1.0).abs() < 1e-6);
        assert!(d.t1.dot(&d.t2).abs() < 1e-6);
        assert_eq!(d.channels().len(), 12);
    }
    let again = build_cloud(&mol, &cfg).unwrap();
    assert_eq!(again.cloud, b.cloud);
}

#[test]
fn too_many_points_is_an_error() {
    let mol = fixture("benzene.xyz");
    let cfg = CloudConfig {
        n_points: 10_000_000,
        ..CloudConfig::default()
    };
    assert!(build_cloud(&mol, &cfg).is_err());
}

#[test]
fn fukui_scalar_kind_builds() {
    let mol = fixture("asym20.xyz");
    let cfg = CloudConfig {
        scalar: "fukui".parse().unwrap(),
        ..light()
    };
    let b = build_cloud(&mol, &cfg).unwrap();
    assert!(b.cloud.scalars.iter().any(|s| *s != 0.0));
}
