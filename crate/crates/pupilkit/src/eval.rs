//! Detection-rate evaluation: pixel errors, rate curves, equal-weight
//! dataset averaging, and the leave-one-dataset-out cross-validation
//! protocol.
//!
//! The headline number is the detection rate at five pixels: the fraction
//! of frames whose predicted center lies within (inclusively) five pixels of
//! the hand label. Curves sample integer thresholds 0..=15. When several
//! datasets are averaged, each dataset counts equally regardless of its
//! image count.

use std::time::Instant;

use crate::detector::{detect_direct, detect_two_stage, DetectSettings, DetectionResult};
use crate::error::{Error, Result};
use crate::io::LabeledFrame;
use crate::nn::{build_config, NetworkModel};
use crate::trainer::{train_rounds, TrainingConfig};

/// Largest threshold (pixels) on a detection curve.
pub const CURVE_MAX_THRESHOLD: usize = 15;

/// Euclidean distance between a prediction and the hand label, in
/// full-resolution pixels.
pub fn pixel_error(pred: (f64, f64), truth: (f64, f64)) -> f64 {
    ((pred.0 - truth.0).powi(2) + (pred.1 - truth.1).powi(2)).sqrt()
}

/// One evaluated frame.
#[derive(Debug, Clone)]
pub struct ErrorRecord {
    pub dataset_id: String,
    pub frame_index: usize,
    pub predicted: (f64, f64),
    pub truth: (f64, f64),
    pub euclidean_error: f64,
    /// Wall-clock seconds for the detect call; zero when timing is off.
    pub latency: f64,
}

/// Detection rate as a function of the pixel-error threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionCurve {
    /// `rates[t]` is the fraction of frames with error <= t (inclusive).
    pub rates: Vec<f64>,
    pub frames: usize,
}

impl DetectionCurve {
    /// Rate at an integer threshold; the conventional summary is `rate(5)`.
    pub fn rate_at(&self, threshold: usize) -> f64 {
        self.rates[threshold.min(CURVE_MAX_THRESHOLD)]
    }
}

/// Counts errors into the inclusive-threshold curve. Rejects an empty list.
pub fn detection_curve(errors: &[f64]) -> Result<DetectionCurve> {
    if errors.is_empty() {
        return Err(Error::InvalidInput(
            "detection curve needs at least one error value".into(),
        ));
    }
    let n = errors.len() as f64;
    let rates = (0..=CURVE_MAX_THRESHOLD)
        .map(|t| errors.iter().filter(|&&e| e <= t as f64).count() as f64 / n)
        .collect();
    Ok(DetectionCurve {
        rates,
        frames: errors.len(),
    })
}

/// Unweighted mean of per-dataset curves: every dataset counts equally,
/// independent of its image count.
pub fn average_over_datasets(curves: &[DetectionCurve]) -> Result<DetectionCurve> {
    if curves.is_empty() {
        return Err(Error::InvalidInput("no curves to average".into()));
    }
    let n = curves.len() as f64;
    let rates = (0..=CURVE_MAX_THRESHOLD)
        .map(|t| curves.iter().map(|c| c.rates[t]).sum::<f64>() / n)
        .collect();
    Ok(DetectionCurve {
        rates,
        frames: curves.iter().map(|c| c.frames).sum(),
    })
}

/// A ready-to-run detector: either the direct single-stage network or the
/// two-stage pair.
#[derive(Debug, Clone)]
pub enum DetectorSpec {
    Direct {
        model: NetworkModel,
    },
    TwoStage {
        coarse: NetworkModel,
        fine: NetworkModel,
        settings: DetectSettings,
    },
}

impl DetectorSpec {
    /// Report name: the direct network's own name, or `F_<coarse name>` for
    /// the fine stage on top of a coarse network.
    pub fn name(&self) -> String {
        match self {
            DetectorSpec::Direct { model } => model.config.to_string(),
            DetectorSpec::TwoStage { coarse, .. } => format!("F_{}", coarse.config),
        }
    }

    pub fn detect(&self, image: &crate::image::GrayImage) -> Result<DetectionResult> {
        match self {
            DetectorSpec::Direct { model } => detect_direct(image, model),
            DetectorSpec::TwoStage {
                coarse,
                fine,
                settings,
            } => detect_two_stage(image, coarse, fine, settings),
        }
    }
}

/// Runs a detector over every frame, recording errors (and latencies when
/// `measure_latency` is set; otherwise the column is zero so reports stay
/// byte-reproducible).
pub fn evaluate_frames(
    frames: &[LabeledFrame],
    detector: &DetectorSpec,
    measure_latency: bool,
) -> Result<Vec<ErrorRecord>> {
    frames
        .iter()
        .map(|frame| {
            let started = Instant::now();
            let result = detector.detect(&frame.image)?;
            let latency = if measure_latency {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            };
            Ok(ErrorRecord {
                dataset_id: frame.dataset_id.clone(),
                frame_index: frame.frame_index,
                predicted: result.refined_center,
                truth: frame.pupil,
                euclidean_error: pixel_error(result.refined_center, frame.pupil),
                latency,
            })
        })
        .collect()
}

/// One line of the summary table.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub dataset_id: String,
    pub method: String,
    pub curve: DetectionCurve,
    pub mean_latency_s: f64,
    pub frames: usize,
}

impl EvalRow {
    pub fn from_records(
        dataset_id: &str,
        method: &str,
        records: &[ErrorRecord],
    ) -> Result<EvalRow> {
        let errors: Vec<f64> = records.iter().map(|r| r.euclidean_error).collect();
        let curve = detection_curve(&errors)?;
        let mean_latency_s =
            records.iter().map(|r| r.latency).sum::<f64>() / records.len() as f64;
        Ok(EvalRow {
            dataset_id: dataset_id.to_string(),
            method: method.to_string(),
            curve,
            mean_latency_s,
            frames: records.len(),
        })
    }
}

/// Which models to train inside each cross-validation fold.
#[derive(Debug, Clone)]
pub enum CvMethod {
    /// Train the SK8P8 single-stage network.
    Direct { training: TrainingConfig },
    /// Train a coarse network and the FINE network, then detect two-stage.
    TwoStage {
        coarse_training: TrainingConfig,
        fine_training: TrainingConfig,
        settings: DetectSettings,
    },
}

impl CvMethod {
    fn validate(&self) -> Result<()> {
        match self {
            CvMethod::Direct { training } => {
                if training.target_config != crate::nn::ConfigName::Sk8P8 {
                    return Err(Error::InvalidInput(
                        "direct cross-validation trains SK8P8".into(),
                    ));
                }
            }
            CvMethod::TwoStage {
                coarse_training,
                fine_training,
                ..
            } => {
                if !coarse_training.target_config.is_coarse() {
                    return Err(Error::InvalidInput(
                        "two-stage cross-validation needs a coarse target".into(),
                    ));
                }
                if fine_training.target_config != crate::nn::ConfigName::Fine {
                    return Err(Error::InvalidInput(
                        "two-stage cross-validation needs the FINE target".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn method_name(&self) -> String {
        match self {
            CvMethod::Direct { training } => training.target_config.to_string(),
            CvMethod::TwoStage {
                coarse_training, ..
            } => format!("F_{}", coarse_training.target_config),
        }
    }
}

/// One fold of the leave-one-dataset-out protocol.
#[derive(Debug, Clone)]
pub struct FoldResult {
    pub row: EvalRow,
    /// Datasets the fold's models were trained on.
    pub training_datasets: Vec<String>,
    /// Every (dataset, frame) identity in the training pool; lets callers
    /// assert leakage-freedom against the evaluated dataset.
    pub training_frames: Vec<(String, usize)>,
}

/// Leave-one-dataset-out cross-validation: for every dataset, train on all
/// the others and evaluate each of its frames. Needs at least two datasets.
pub fn cross_validate(
    datasets: &[Vec<LabeledFrame>],
    method: &CvMethod,
    measure_latency: bool,
) -> Result<Vec<FoldResult>> {
    if datasets.len() < 2 {
        return Err(Error::InvalidInput(
            "cross-validation needs at least two datasets".into(),
        ));
    }
    method.validate()?;
    let method_name = method.method_name();

    let mut folds = Vec::with_capacity(datasets.len());
    for held_out in 0..datasets.len() {
        let pool: Vec<&[LabeledFrame]> = datasets
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != held_out)
            .map(|(_, d)| d.as_slice())
            .collect();

        let detector = match method {
            CvMethod::Direct { training } => {
                let (model, _) = train_rounds(build_config(training.target_config), &pool, training)?;
                DetectorSpec::Direct { model }
            }
            CvMethod::TwoStage {
                coarse_training,
                fine_training,
                settings,
            } => {
                let (coarse, _) = train_rounds(
                    build_config(coarse_training.target_config),
                    &pool,
                    coarse_training,
                )?;
                let (fine, _) = train_rounds(
                    build_config(fine_training.target_config),
                    &pool,
                    fine_training,
                )?;
                DetectorSpec::TwoStage {
                    coarse,
                    fine,
                    settings: *settings,
                }
            }
        };

        let eval_frames = &datasets[held_out];
        let records = evaluate_frames(eval_frames, &detector, measure_latency)?;
        let dataset_id = eval_frames
            .first()
            .map(|f| f.dataset_id.clone())
            .unwrap_or_else(|| format!("dataset-{held_out}"));
        folds.push(FoldResult {
            row: EvalRow::from_records(&dataset_id, &method_name, &records)?,
            training_datasets: pool
                .iter()
                .filter_map(|d| d.first().map(|f| f.dataset_id.clone()))
                .collect(),
            training_frames: pool
                .iter()
                .flat_map(|d| d.iter().map(|f| (f.dataset_id.clone(), f.frame_index)))
                .collect(),
        });
    }
    Ok(folds)
}

/// Writes the summary CSV (`dataset,method,rate_at_5px,mean_latency_s,frames`)
/// and the per-threshold curve CSV (`dataset,method,threshold_px,rate`).
pub fn emit_report(
    rows: &[EvalRow],
    summary_path: impl AsRef<std::path::Path>,
    curve_path: impl AsRef<std::path::Path>,
) -> Result<()> {
    let summary_path = summary_path.as_ref();
    let curve_path = curve_path.as_ref();

    let mut summary = String::from("dataset,method,rate_at_5px,mean_latency_s,frames\n");
    let mut curves = String::from("dataset,method,threshold_px,rate\n");
    for row in rows {
        summary.push_str(&format!(
            "{},{},{:.6},{:.6},{}\n",
            row.dataset_id,
            row.method,
            row.curve.rate_at(5),
            row.mean_latency_s,
            row.frames
        ));
        for (t, rate) in row.curve.rates.iter().enumerate() {
            curves.push_str(&format!(
                "{},{},{},{:.6}\n",
                row.dataset_id, row.method, t, rate
            ));
        }
    }
    std::fs::write(summary_path, summary).map_err(|e| Error::io(summary_path, e))?;
    std::fs::write(curve_path, curves).map_err(|e| Error::io(curve_path, e))
}
