use std::collections::BTreeSet;

use stainfuse::labels::Diagnosis;
use stainfuse::scoring::extract_features;
use stainfuse::synth::{generate_cohorts, generate_slide, CohortManifest, SiteProfile, SynthConfig};
use stainfuse::tiling::{tessellate, Stain, TessellationParams};

fn small() -> SynthConfig {
    SynthConfig {
        image_size: 474,
        slides_per_class: 2,
        ..SynthConfig::default()
    }
}

#[test]
fn same_seed_same_pixels() {
    let cfg = small();
    let site = &cfg.sites[1];
    for stain in Stain::ALL {
        let (a, ma) = generate_slide(Diagnosis::Melanoma, site, stain, &cfg, "B-0001", 42).unwrap();
        let (b, mb) = generate_slide(Diagnosis::Melanoma, site, stain, &cfg, "B-0001", 42).unwrap();
        assert_eq!(a.pixels.as_raw(), b.pixels.as_raw());
        assert_eq!(ma, mb);
        let (c, _) = generate_slide(Diagnosis::Melanoma, site, stain, &cfg, "B-0001", 43).unwrap();
        assert_ne!(a.pixels.as_raw(), c.pixels.as_raw());
    }
}

#[test]
fn zero_effect_makes_labels_invisible() {
    let cfg = SynthConfig {
        effect_size: 0.0,
        ..small()
    };
    for site in &cfg.sites {
        for stain in Stain::ALL {
            for seed in 0..3 {
                let render = |d| generate_slide(d, site, stain, &cfg, "X-0001", seed).unwrap().0;
                let melanoma = render(Diagnosis::Melanoma);
                assert_eq!(melanoma, render(Diagnosis::Nevus));
                assert_eq!(melanoma, render(Diagnosis::InSitu));
            }
        }
    }
}

#[test]
fn chromogen_stays_inside_annotation() {
    let cfg = SynthConfig {
        effect_size: 1.0,
        image_size: 711,
        ..SynthConfig::default()
    };
    let site = &cfg.sites[0];
    for seed in 0..4 {
        let (img, mask) = generate_slide(Diagnosis::Melanoma, site, Stain::MelanA, &cfg, "A-0001", seed).unwrap();
        let inside = mask.rasterize(img.width(), img.height(), 1.0);
        let mut red = 0;
        for (x, y, p) in img.pixels.enumerate_pixels() {
            let [r, g, _] = p.0;
            if i32::from(r) - i32::from(g) > 40 {
                red += 1;
                assert!(inside.get(x, y), "chromogen pixel ({x}, {y}) outside the annotation");
            }
        }
        assert!(red > 100, "too few chromogen pixels: {red}");
    }
}

fn mean_features(cfg: &SynthConfig, site: &SiteProfile, seeds: std::ops::Range<u64>) -> Vec<f64> {
    let mut sum = Vec::new();
    let mut n = 0.0;
    for seed in seeds {
        let (img, mask) = generate_slide(Diagnosis::Nevus, site, Stain::HE, cfg, "S-0001", seed).unwrap();
        for tile in tessellate(&img, &mask, &TessellationParams::default()).unwrap() {
            let f = extract_features::<f64>(&img.crop(&tile)).unwrap();
            sum.resize(f.len(), 0.0);
            sum.iter_mut().zip(&f.values).for_each(|(s, v)| *s += v);
            n += 1.0;
        }
    }
    sum.iter().map(|s| s / n).collect()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn site_shift_exceeds_within_site_spread() {
    let cfg = small();
    let (a, b) = (&cfg.sites[0], &cfg.sites[1]);
    let a1 = mean_features(&cfg, a, 0..6);
    let a2 = mean_features(&cfg, a, 6..12);
    let b1 = mean_features(&cfg, b, 12..18);
    let within = distance(&a1, &a2);
    let between = distance(&a1, &b1);
    assert!(between > 2.0 * within, "between {between}, within {within}");
}

#[test]
fn cohorts_are_disjoint_and_deterministic() {
    let mut cfg = small();
    cfg.sites[2].slides_per_class = Some(0);
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let m1 = generate_cohorts(&cfg, d1.path()).unwrap();
    let m2 = generate_cohorts(&cfg, d2.path()).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(m1.len(), 3);

    let mut ids = BTreeSet::new();
    for m in &m1 {
        for e in &m.entries {
            assert!(ids.insert(e.slide_id.clone()), "duplicate {}", e.slide_id);
            for stain in Stain::ALL {
                let p1 = std::fs::read(d1.path().join(e.stains.get(stain))).unwrap();
                let p2 = std::fs::read(d2.path().join(e.stains.get(stain))).unwrap();
                assert_eq!(p1, p2);
            }
            assert!(d1.path().join(&e.annotation).is_file());
        }
        let path = CohortManifest::path_in(d1.path(), &m.cohort_id);
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(CohortManifest::path_in(d2.path(), &m.cohort_id)).unwrap());
        assert_eq!(&CohortManifest::load(&path).unwrap(), m);
    }
    assert_eq!(m1[0].entries.len(), 4);
    assert!(m1[2].entries.is_empty());
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = SynthConfig {
        image_size: 300,
        ..SynthConfig::default()
    };
    assert!(generate_cohorts(&cfg, std::path::Path::new("/nonexistent")).is_err());
    let cfg = SynthConfig {
        effect_size: 1.5,
        ..SynthConfig::default()
    };
    assert!(cfg.validate().is_err());
}
