use proptest::prelude::*;

use wopsip::analysis::{fill_rates, records_from_csv, records_to_csv, ErrorRecord};
use wopsip::experiment::{ExperimentConfig, OutputFormat, PoissonExample};
use wopsip::mesh::MeshFamily;
use wopsip::stokes::{Example, Variant};

fn family() -> impl Strategy<Value = MeshFamily> {
    prop_oneof![
        Just(MeshFamily::Uniform),
        Just(MeshFamily::Graded),
        Just(MeshFamily::Cosine)
    ]
}

proptest! {
    #[test]
    fn stokes_config_survives_json(
        mesh in family(),
        first in 1usize..20,
        levels in 1usize..5,
        nu in 1e-8f64..1e3,
        eta in 1e-3f64..1e6,
        plain in any::<bool>(),
        markdown in any::<bool>(),
    ) {
        let n: Vec<usize> = (0..levels).map(|k| first << k).collect();
        let example = if plain { Example::Example2 } else { Example::Example1 };
        let mut cfg = ExperimentConfig::stokes(mesh, example, nu, eta, n);
        cfg.variant = if plain { Variant::Plain } else { Variant::Robust };
        cfg.format = if markdown { OutputFormat::Markdown } else { OutputFormat::Csv };
        prop_assert!(cfg.validate().is_ok());
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), cfg.to_json());
    }

    #[test]
    fn csv_text_is_a_fixed_point(
        first in 2usize..10,
        errs in proptest::collection::vec((1e-9f64..1e3, 1e-9f64..1e3, proptest::option::of(1e-9f64..1e3)), 1..6),
    ) {
        let mut rows: Vec<ErrorRecord> = errs
            .iter()
            .enumerate()
            .map(|(k, &(w, l, q))| ErrorRecord::new(first << k, 1.0 / (first << k) as f64, w, l, q))
            .collect();
        fill_rates(&mut rows);
        let text = records_to_csv(&rows);
        let parsed = records_from_csv(&text).unwrap();
        prop_assert_eq!(parsed.len(), rows.len());
        prop_assert_eq!(records_to_csv(&parsed), text);
        for (a, b) in parsed.iter().zip(&rows) {
            prop_assert_eq!(a.n, b.n);
            prop_assert!((a.err_energy - b.err_energy).abs() <= 1e-5 * b.err_energy);
        }
    }
}

#[test]
fn unknown_fields_and_bad_sizes_are_rejected() {
    let good =
        ExperimentConfig::poisson(MeshFamily::Graded, PoissonExample::Exponential, vec![4, 8])
            .to_json();
    assert!(ExperimentConfig::from_json(&good).is_ok());
    let extra = good.replacen('{', "{\"bogus\": 1,", 1);
    assert!(ExperimentConfig::from_json(&extra).is_err());
    let mut cfg =
        ExperimentConfig::poisson(MeshFamily::Graded, PoissonExample::Exponential, vec![4, 12]);
    assert!(cfg.validate().is_err());
    cfg.n = vec![];
    assert!(cfg.validate().is_err());
    cfg.n = vec![4, 8];
    cfg.example = "nope".into();
    assert!(cfg.validate().is_err());
}
