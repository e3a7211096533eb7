//! Model-level fusion of slide scores.
//!
//! Scores are first calibrated so that each model's decision threshold maps
//! to 0.5, then averaged with one of three weightings. A fused prediction's
//! decision threshold is therefore always 0.5.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_traits::{FromPrimitive, Num, Signed};
use serde::{Deserialize, Serialize};

use crate::aggregate::{Modality, SlidePrediction};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Arithmetic needed by fusion: an ordered field. Implemented by `f32`,
/// `f64` and exact rationals such as `num_rational::Ratio<i64>`.
pub trait FusionScalar: Copy + PartialOrd + Num + Signed + FromPrimitive + fmt::Debug {}

impl<T: Copy + PartialOrd + Num + Signed + FromPrimitive + fmt::Debug> FusionScalar for T {}

fn half<T: FusionScalar>() -> T {
    T::one() / (T::one() + T::one())
}

/// `10^-k` built from integers, exact for rational types.
fn tenth_power<T: FusionScalar>(k: u32) -> T {
    T::one() / T::from_u64(10u64.pow(k)).expect("integer representable")
}

fn clamp<T: FusionScalar>(x: T, lo: T, hi: T) -> T {
    if x < lo { lo } else if x > hi { hi } else { x }
}

fn clamp_threshold<T: FusionScalar>(t: T) -> T {
    let lo = tenth_power::<T>(THRESHOLD_EXPONENT);
    clamp(t, lo, T::one() - lo)
}

/// Raw weights at or below this are treated as zero.
pub const WEIGHT_EPSILON: f64 = 1e-12;
const WEIGHT_EXPONENT: u32 = 12;

/// Thresholds are kept this far away from 0 and 1.
pub const THRESHOLD_CLAMP: f64 = 1e-6;
const THRESHOLD_EXPONENT: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    Unweighted,
    ValidationWeighted,
    ThresholdDistance,
}

impl FusionMode {
    pub const ALL: [FusionMode; 3] = [
        FusionMode::Unweighted,
        FusionMode::ValidationWeighted,
        FusionMode::ThresholdDistance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::Unweighted => "unweighted",
            FusionMode::ValidationWeighted => "validation_weighted",
            FusionMode::ThresholdDistance => "threshold_distance",
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown fusion mode {s:?}")))
    }
}

/// How H&E is combined with the MelanA magnification models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiStainLayout {
    /// One pool: H&E plus every MelanA model.
    #[default]
    Flat,
    /// MelanA models fused first; the result is fused with H&E.
    TwoLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelFusionParams<T> {
    pub model_id: String,
    pub threshold: T,
    pub validation_auroc: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FusionConfig<T> {
    pub mode: FusionMode,
    pub models: Vec<ModelFusionParams<T>>,
    #[serde(default)]
    pub layout: MultiStainLayout,
}

impl<T: FusionScalar> FusionConfig<T> {
    /// Validates ids and ranges and clamps thresholds into `[1e-6, 1 - 1e-6]`.
    pub fn new(mode: FusionMode, models: Vec<ModelFusionParams<T>>) -> Result<Self> {
        let mut config = FusionConfig {
            mode,
            models,
            layout: MultiStainLayout::Flat,
        };
        config.normalize()?;
        Ok(config)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for m in &mut self.models {
            if !seen.insert(m.model_id.clone()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate model_id {:?} in fusion config",
                    m.model_id
                )));
            }
            #[allow(clippy::eq_op)]
            if m.threshold != m.threshold {
                return Err(Error::InvalidInput(format!(
                    "threshold of {} is NaN",
                    m.model_id
                )));
            }
            if !(m.validation_auroc >= T::zero() && m.validation_auroc <= T::one()) {
                return Err(Error::InvalidInput(format!(
                    "validation_auroc of {} outside [0, 1]",
                    m.model_id
                )));
            }
            m.threshold = clamp_threshold(m.threshold);
        }
        Ok(())
    }

    pub fn model(&self, model_id: &str) -> Option<&ModelFusionParams<T>> {
        self.models.iter().find(|m| m.model_id == model_id)
    }

    pub fn with_mode(&self, mode: FusionMode) -> Self {
        FusionConfig {
            mode,
            ..self.clone()
        }
    }

}

impl<T: Scalar> FusionConfig<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut config: FusionConfig<T> = serde_json::from_str(text)?;
        config.normalize()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Result of fusing several models' predictions for one slide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FusedPrediction<T> {
    pub slide_id: String,
    pub score: T,
    /// `(model_id, weight)`, sorted by model id; weights sum to 1.
    pub contributions: Vec<(String, T)>,
    pub mode: FusionMode,
    /// True when every raw weight vanished and the unweighted mean was used.
    pub fell_back: bool,
}

impl<T: FusionScalar> FusedPrediction<T> {
    /// Converts to the slide-prediction schema.
    pub fn to_slide_prediction(
        &self,
        model_id: &str,
        stain: Modality,
        n_tiles: usize,
        label: Option<crate::labels::BinaryLabel>,
    ) -> SlidePrediction<T> {
        SlidePrediction {
            slide_id: self.slide_id.clone(),
            stain,
            model_id: model_id.to_string(),
            score: self.score,
            n_tiles,
            ci: None,
            label,
        }
    }
}

/// Piecewise-linear map sending `[0, t]` to `[0, 0.5]` and `[t, 1]` to `[0.5, 1]`.
pub fn calibrate_score<T: FusionScalar>(s: T, t: T) -> T {
    let half = half::<T>();
    if t == half {
        return s;
    }
    if s <= t {
        half * s / t
    } else {
        half + half * (s - t) / (T::one() - t)
    }
}

/// Fuses one slide's predictions from several models.
pub fn fuse<T: FusionScalar>(predictions: &[SlidePrediction<T>], config: &FusionConfig<T>) -> Result<FusedPrediction<T>> {
    let first = predictions
        .first()
        .ok_or_else(|| Error::InvalidInput("no predictions to fuse".into()))?;
    let mut calibrated: BTreeMap<&str, (T, T)> = BTreeMap::new();
    for p in predictions {
        let params = config
            .model(&p.model_id)
            .ok_or_else(|| Error::UnknownModel(p.model_id.clone()))?;
        let c = calibrate_score(p.score, params.threshold);
        let raw = match config.mode {
            FusionMode::Unweighted => T::one(),
            FusionMode::ValidationWeighted => {
                let excess = params.validation_auroc - half();
                if excess > T::zero() { excess } else { T::zero() }
            },
            FusionMode::ThresholdDistance => (c - half()).abs(),
        };
        if calibrated.insert(p.model_id.as_str(), (c, raw)).is_some() {
            return Err(Error::InvalidInput(format!(
                "model {} appears twice for slide {}",
                p.model_id, first.slide_id
            )));
        }
    }
    Ok(combine(&first.slide_id, &calibrated, config.mode))
}

/// Weighted mean over entries sorted by model id, so the result does not
/// depend on input order.
fn combine<T: FusionScalar>(slide_id: &str, entries: &BTreeMap<&str, (T, T)>, mode: FusionMode) -> FusedPrediction<T> {
    let eps = tenth_power::<T>(WEIGHT_EXPONENT);
    let fell_back = entries.values().all(|&(_, w)| w <= eps);
    let weight = |w: T| if fell_back { T::one() } else if w <= eps { T::zero() } else { w };
    let total = entries.values().fold(T::zero(), |acc, &(_, w)| acc + weight(w));
    let weighted = entries.values().fold(T::zero(), |acc, &(c, w)| acc + weight(w) * c);
    let mut calibrated = entries.values().map(|&(c, _)| c);
    let first = calibrated.next().expect("non-empty");
    let (lo, hi) = calibrated.fold((first, first), |(lo, hi), c| {
        (if c < lo { c } else { lo }, if c > hi { c } else { hi })
    });
    FusedPrediction {
        slide_id: slide_id.to_string(),
        score: clamp(weighted / total, lo, hi),
        contributions: entries
            .iter()
            .map(|(id, &(_, w))| (id.to_string(), weight(w) / total))
            .collect(),
        mode,
        fell_back,
    }
}

/// Model id under which a two-level layout looks up the pre-fused MelanA
/// score's parameters.
pub const MELANA_COMBINED_ID: &str = "MelanA-combined";

/// Fuses H&E with the MelanA models according to `config.layout`.
pub fn fuse_multistain<T: FusionScalar>(
    he: &SlidePrediction<T>,
    melana: &[SlidePrediction<T>],
    config: &FusionConfig<T>,
) -> Result<FusedPrediction<T>> {
    match config.layout {
        MultiStainLayout::Flat => {
            let mut pool = Vec::with_capacity(melana.len() + 1);
            pool.push(he.clone());
            pool.extend_from_slice(melana);
            fuse(&pool, config)
        }
        MultiStainLayout::TwoLevel => {
            let inner = fuse(melana, config)?;
            if config.model(MELANA_COMBINED_ID).is_none() {
                return Err(Error::UnknownModel(MELANA_COMBINED_ID.to_string()));
            }
            let combined = SlidePrediction {
                slide_id: he.slide_id.clone(),
                stain: Modality::MelanA,
                model_id: MELANA_COMBINED_ID.to_string(),
                score: inner.score,
                n_tiles: melana.iter().map(|p| p.n_tiles).sum(),
                ci: None,
                label: he.label,
            };
            fuse(&[he.clone(), combined], config)
        }
    }
}

/// H&E first; MelanA models join only when the H&E slide-score CI contains
/// the H&E decision threshold (bounds inclusive).
pub fn hierarchical_predict<T: FusionScalar>(
    he: &SlidePrediction<T>,
    he_threshold: T,
    melana: &[SlidePrediction<T>],
    config: &FusionConfig<T>,
) -> Result<FusedPrediction<T>> {
    let ci = he.ci.ok_or_else(|| Error::MissingCi {
        slide_id: he.slide_id.clone(),
    })?;
    if ci.low <= he_threshold && he_threshold <= ci.high {
        fuse_multistain(he, melana, config)
    } else {
        let t = clamp_threshold(he_threshold);
        Ok(FusedPrediction {
            slide_id: he.slide_id.clone(),
            score: calibrate_score(he.score, t),
            contributions: vec![(he.model_id.clone(), T::one())],
            mode: config.mode,
            fell_back: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Interval;
    use num_rational::Ratio;
    use proptest::prelude::*;

    fn pred(model: &str, score: f64) -> SlidePrediction<f64> {
        SlidePrediction {
            slide_id: "s".into(),
            stain: Modality::MelanA,
            model_id: model.into(),
            score,
            n_tiles: 4,
            ci: None,
            label: None,
        }
    }

    fn config(mode: FusionMode, params: &[(&str, f64, f64)]) -> FusionConfig<f64> {
        FusionConfig::new(
            mode,
            params
                .iter()
                .map(|&(id, t, auc)| ModelFusionParams {
                    model_id: id.into(),
                    threshold: t,
                    validation_auroc: auc,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn calibration_examples() {
        for t in [0.1, 0.3, 0.77, 0.999] {
            assert_eq!(calibrate_score(t, t), 0.5);
        }
        assert!((calibrate_score(0.6f64, 0.3) - (0.5 + 0.5 * 0.3 / 0.7)).abs() < 1e-15);
        assert!((calibrate_score(0.6f64, 0.3) - 0.714286).abs() < 1e-6);
        for s in [0.0, 0.13, 0.5, 0.92, 1.0] {
            assert_eq!(calibrate_score(s, 0.5), s);
        }
        assert_eq!(calibrate_score(0.0, 0.2), 0.0);
        assert_eq!(calibrate_score(1.0, 0.2), 1.0);
    }

    #[test]
    fn distance_weighting_worked_example() {
        type Q = Ratio<i64>;
        let q = |n: i64, d: i64| Q::new(n, d);
        let cfg = FusionConfig::new(
            FusionMode::ThresholdDistance,
            vec![
                ModelFusionParams { model_id: "a".into(), threshold: q(1, 2), validation_auroc: q(4, 5) },
                ModelFusionParams { model_id: "b".into(), threshold: q(1, 2), validation_auroc: q(4, 5) },
            ],
        )
        .unwrap();
        let preds = [
            SlidePrediction { score: q(4, 5), ..generic_pred("a") },
            SlidePrediction { score: q(2, 5), ..generic_pred("b") },
        ];
        let fused = fuse(&preds, &cfg).unwrap();
        assert_eq!(fused.score, q(7, 10));
        assert_eq!(fused.contributions[0].1, q(3, 4));
        assert_eq!(fused.contributions[1].1, q(1, 4));
        assert!(!fused.fell_back);

        // binary 0.8 and 0.4 put the exact answer one ulp above 0.7
        let cfg = config(FusionMode::ThresholdDistance, &[("a", 0.5, 0.8), ("b", 0.5, 0.8)]);
        let fused = fuse(&[pred("a", 0.8), pred("b", 0.4)], &cfg).unwrap();
        assert!((fused.score - 0.7).abs() <= f64::EPSILON * 0.7);
    }

    fn generic_pred<T: Default>(model: &str) -> SlidePrediction<T> {
        SlidePrediction {
            slide_id: "s".into(),
            stain: Modality::MelanA,
            model_id: model.into(),
            score: T::default(),
            n_tiles: 1,
            ci: None,
            label: None,
        }
    }

    #[test]
    fn unanimity_under_every_mode() {
        for mode in FusionMode::ALL {
            let cfg = config(mode, &[("a", 0.5, 0.9), ("b", 0.5, 0.7), ("c", 0.5, 0.6)]);
            let fused = fuse(&[pred("a", 0.63), pred("b", 0.63), pred("c", 0.63)], &cfg).unwrap();
            assert_eq!(fused.score, 0.63, "{mode}");
        }
    }

    #[test]
    fn all_at_threshold_falls_back() {
        let cfg = config(FusionMode::ThresholdDistance, &[("a", 0.3, 0.9), ("b", 0.6, 0.7)]);
        let fused = fuse(&[pred("a", 0.3), pred("b", 0.6)], &cfg).unwrap();
        assert!(fused.fell_back);
        assert_eq!(fused.score, 0.5);
        assert_eq!(fused.contributions[0].1, 0.5);
    }

    #[test]
    fn validation_weights() {
        // auroc 0.9 -> 0.4, 0.6 -> 0.1, 0.4 -> 0
        let cfg = config(
            FusionMode::ValidationWeighted,
            &[("a", 0.5, 0.9), ("b", 0.5, 0.6), ("c", 0.5, 0.4)],
        );
        let fused = fuse(&[pred("a", 1.0), pred("b", 0.0), pred("c", 0.0)], &cfg).unwrap();
        assert!((fused.score - 0.8).abs() < 1e-12);
        assert_eq!(fused.contributions[2], ("c".to_string(), 0.0));
        // all useless -> unweighted
        let cfg = config(FusionMode::ValidationWeighted, &[("a", 0.5, 0.5), ("b", 0.5, 0.3)]);
        let fused = fuse(&[pred("a", 1.0), pred("b", 0.0)], &cfg).unwrap();
        assert!(fused.fell_back);
        assert_eq!(fused.score, 0.5);
    }

    #[test]
    fn errors() {
        let cfg = config(FusionMode::Unweighted, &[("a", 0.5, 0.5)]);
        assert!(matches!(fuse(&[pred("zzz", 0.5)], &cfg), Err(Error::UnknownModel(_))));
        assert!(fuse::<f64>(&[], &cfg).is_err());
        let dup = FusionConfig::new(
            FusionMode::Unweighted,
            vec![
                ModelFusionParams { model_id: "a".into(), threshold: 0.5, validation_auroc: 0.5 },
                ModelFusionParams { model_id: "a".into(), threshold: 0.4, validation_auroc: 0.5 },
            ],
        );
        assert!(dup.is_err());
    }

    #[test]
    fn thresholds_are_clamped() {
        let cfg = config(FusionMode::Unweighted, &[("a", 0.0, 0.5), ("b", 1.0, 0.5)]);
        assert_eq!(cfg.models[0].threshold, 1e-6);
        assert_eq!(cfg.models[1].threshold, 1.0 - 1e-6);
    }

    #[test]
    fn config_json_schema() {
        let text = r#"{"mode": "threshold_distance",
            "models": [{"model_id": "HE@40x", "threshold": 0.42, "validation_auroc": 0.9}]}"#;
        let cfg = FusionConfig::<f64>::from_json(text).unwrap();
        assert_eq!(cfg.mode, FusionMode::ThresholdDistance);
        assert_eq!(cfg.layout, MultiStainLayout::Flat);
        assert_eq!(cfg.model("HE@40x").unwrap().threshold, 0.42);
    }

    fn he_pred(score: f64, lo: f64, hi: f64) -> SlidePrediction<f64> {
        SlidePrediction {
            stain: Modality::HE,
            model_id: "HE".into(),
            ci: Some(Interval::new(lo, hi)),
            ..pred("HE", score)
        }
    }

    fn five_model_config() -> FusionConfig<f64> {
        config(
            FusionMode::ThresholdDistance,
            &[
                ("HE", 0.5, 0.9),
                ("m40", 0.5, 0.8),
                ("m20", 0.4, 0.8),
                ("m10", 0.6, 0.8),
                ("m5", 0.5, 0.8),
            ],
        )
    }

    fn melana() -> Vec<SlidePrediction<f64>> {
        vec![pred("m40", 0.9), pred("m20", 0.2), pred("m10", 0.7), pred("m5", 0.1)]
    }

    #[test]
    fn certain_he_is_used_alone() {
        let out = hierarchical_predict(&he_pred(0.8, 0.7, 0.9), 0.5, &melana(), &five_model_config())
            .unwrap();
        assert_eq!(out.score, 0.8);
        assert_eq!(out.contributions, vec![("HE".to_string(), 1.0)]);
    }

    #[test]
    fn uncertain_he_adds_melana() {
        let cfg = five_model_config();
        let he = he_pred(0.55, 0.4, 0.7);
        let out = hierarchical_predict(&he, 0.5, &melana(), &cfg).unwrap();
        assert_eq!(out.contributions.len(), 5);
        let mut pool = vec![he];
        pool.extend(melana());
        assert_eq!(out, fuse(&pool, &cfg).unwrap());
    }

    #[test]
    fn threshold_on_ci_bound_is_uncertain() {
        let out = hierarchical_predict(&he_pred(0.6, 0.5, 0.7), 0.5, &melana(), &five_model_config())
            .unwrap();
        assert_eq!(out.contributions.len(), 5);
        let out = hierarchical_predict(&he_pred(0.4, 0.3, 0.5), 0.5, &melana(), &five_model_config())
            .unwrap();
        assert_eq!(out.contributions.len(), 5);
    }

    #[test]
    fn missing_ci_is_an_error() {
        let mut he = he_pred(0.6, 0.5, 0.7);
        he.ci = None;
        assert!(matches!(
            hierarchical_predict(&he, 0.5, &melana(), &five_model_config()),
            Err(Error::MissingCi { .. })
        ));
    }

    #[test]
    fn two_level_layout() {
        let mut cfg = five_model_config();
        cfg.mode = FusionMode::Unweighted;
        cfg.layout = MultiStainLayout::TwoLevel;
        let he = he_pred(0.9, 0.45, 0.95);
        assert!(matches!(fuse_multistain(&he, &melana(), &cfg), Err(Error::UnknownModel(_))));
        cfg.models.push(ModelFusionParams {
            model_id: MELANA_COMBINED_ID.into(),
            threshold: 0.5,
            validation_auroc: 0.8,
        });
        let inner = fuse(&melana(), &cfg).unwrap().score;
        let out = fuse_multistain(&he, &melana(), &cfg).unwrap();
        assert!((out.score - (0.9 + inner) / 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn single_model_keeps_decision(s in 0.0f64..=1.0, t in 0.001f64..0.999) {
            prop_assert_eq!(calibrate_score(s, t) >= 0.5, s >= t);
            for mode in FusionMode::ALL {
                let cfg = config(mode, &[("a", t, 0.7)]);
                let fused = fuse(&[pred("a", s)], &cfg).unwrap();
                prop_assert_eq!(fused.score >= 0.5, s >= t);
            }
        }

        #[test]
        fn calibration_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, t in 0.001f64..0.999) {
            let (ca, cb) = (calibrate_score(a, t), calibrate_score(b, t));
            prop_assert!((0.0..=1.0).contains(&ca));
            if a < b { prop_assert!(ca <= cb); }
        }

        #[test]
        fn fused_within_calibrated_range_and_order_free(
            entries in prop::collection::vec((0.0f64..=1.0, 0.05f64..0.95, 0.0f64..=1.0), 1..6),
            mode_ix in 0usize..3,
        ) {
            let mode = FusionMode::ALL[mode_ix];
            let ids: Vec<String> = (0..entries.len()).map(|i| format!("m{i}")).collect();
            let params: Vec<(&str, f64, f64)> = entries.iter().zip(&ids).map(|(&(_, t, a), id)| (id.as_str(), t, a)).collect();
            let cfg = config(mode, &params);
            let preds: Vec<_> = entries.iter().zip(&ids).map(|(&(s, _, _), id)| pred(id, s)).collect();
            let fused = fuse(&preds, &cfg).unwrap();
            let cs: Vec<f64> = entries.iter().map(|&(s, t, _)| calibrate_score(s, t)).collect();
            let lo = cs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= fused.score && fused.score <= hi);
            let wsum: f64 = fused.contributions.iter().map(|c| c.1).sum();
            prop_assert!((wsum - 1.0).abs() < 1e-12);
            prop_assert!(fused.contributions.iter().all(|c| c.1 >= 0.0));
            let mut reversed = preds.clone();
            reversed.reverse();
            prop_assert_eq!(fuse(&reversed, &cfg).unwrap(), fused);
        }

        #[test]
        fn more_confident_model_gets_weakly_more_weight(
            s1 in 0.0f64..=1.0, s2 in 0.0f64..=1.0, bump in 0.0f64..0.3,
        ) {
            let cfg = config(FusionMode::ThresholdDistance, &[("a", 0.5, 0.7), ("b", 0.5, 0.7)]);
            let base = fuse(&[pred("a", s1), pred("b", s2)], &cfg).unwrap();
            // push model a further from the threshold
            let s1b = if s1 >= 0.5 { (s1 + bump).min(1.0) } else { (s1 - bump).max(0.0) };
            let moved = fuse(&[pred("a", s1b), pred("b", s2)], &cfg).unwrap();
            if !base.fell_back && !moved.fell_back {
                prop_assert!(moved.contributions[0].1 >= base.contributions[0].1 - 1e-12);
            }
        }
    }
}
