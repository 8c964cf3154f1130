//! SBM sparsity study, initialisation sweep and convergence comparison.

use super::{train_node, run, OperatorSpec, Result, TaskData, TrainConfig, TrainError, TrainHistory};
use crate::graph::{sample_sbm, split_nodes, SbmSpec};
use crate::nn::OperatorMode;
use crate::operator::{ParamSet, Preset};
use crate::rng::derive_seed;

/// Five levels at constant `p/q = 2`, dense to sparse.
pub fn desk_sbm_levels() -> Vec<(f64, f64)> {
    vec![(0.50, 0.25), (0.42, 0.21), (0.36, 0.18), (0.29, 0.145), (0.22, 0.11)]
}

/// Fifteen levels `p = 0.50, 0.48, ..., 0.22` with `q = p/2`.
pub fn full_sbm_levels() -> Vec<(f64, f64)> {
    (0..15)
        .map(|i| {
            let p = (50 - 2 * i) as f64 / 100.0;
            (p, p / 2.0)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbmStudyConfig {
    pub k: usize,
    pub community_size: usize,
    pub levels: Vec<(f64, f64)>,
    pub repeats: usize,
    pub seed: u64,
    pub train: TrainConfig,
}

impl SbmStudyConfig {
    pub fn desk() -> Self {
        Self {
            k: 3,
            community_size: 100,
            levels: desk_sbm_levels(),
            repeats: 5,
            seed: 0,
            train: TrainConfig { telemetry: super::Telemetry::Off, ..TrainConfig::node_default() },
        }
    }

    pub fn full() -> Self {
        Self { community_size: 200, levels: full_sbm_levels(), repeats: 25, ..Self::desk() }
    }
}

/// Outcome of one training run inside a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRun {
    pub level: usize,
    pub repeat: usize,
    pub final_params: ParamSet,
    pub final_val_acc: f64,
    pub final_test_acc: f64,
}

/// Per-level aggregates; `std` is the population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub label: String,
    pub repeats: usize,
    pub mean: [f64; 7],
    pub std: [f64; 7],
    pub test_acc: (f64, f64),
    pub val_acc: (f64, f64),
    /// Mean and std of `|e2 - e3|`.
    pub exponent_gap: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub levels: Vec<LevelStats>,
    pub cells: Vec<CellRun>,
}

impl SweepResult {
    fn from_cells(labels: Vec<String>, cells: Vec<CellRun>) -> Self {
        let levels = labels
            .into_iter()
            .enumerate()
            .map(|(l, label)| {
                let runs: Vec<&CellRun> = cells.iter().filter(|c| c.level == l).collect();
                let mut mean = [0.0; 7];
                let mut std = [0.0; 7];
                for k in 0..7 {
                    let v: Vec<f64> = runs.iter().map(|c| c.final_params.to_array()[k]).collect();
                    (mean[k], std[k]) = mean_std(&v);
                }
                let col = |f: &dyn Fn(&CellRun) -> f64| mean_std(&runs.iter().map(|c| f(c)).collect::<Vec<_>>());
                LevelStats {
                    label,
                    repeats: runs.len(),
                    mean,
                    std,
                    test_acc: col(&|c| c.final_test_acc),
                    val_acc: col(&|c| c.final_val_acc),
                    exponent_gap: col(&|c| (c.final_params.e2 - c.final_params.e3).abs()),
                }
            })
            .collect();
        Self { levels, cells }
    }

    /// Long-format rows `(level, param, mean, std)`: the seven operator
    /// parameters, then accuracies and the exponent gap.
    pub fn rows(&self) -> Vec<(String, &'static str, f64, f64)> {
        let mut out = Vec::new();
        for l in &self.levels {
            for (k, name) in ParamSet::NAMES.iter().enumerate() {
                out.push((l.label.clone(), *name, l.mean[k], l.std[k]));
            }
            out.push((l.label.clone(), "val_acc", l.val_acc.0, l.val_acc.1));
            out.push((l.label.clone(), "test_acc", l.test_acc.0, l.test_acc.1));
            out.push((l.label.clone(), "abs_e2_minus_e3", l.exponent_gap.0, l.exponent_gap.1));
        }
        out
    }
}

/// Mean and population standard deviation (0 for fewer than two values).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, _) = mean_std(&rx);
    let (my, _) = mean_std(&ry);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Trains on `repeats` fresh SBM samples per level and aggregates the final
/// operator tuples (the first tuple under mPGSO). Cells run in parallel;
/// each cell's seed depends only on its (level, repeat) position.
pub fn sbm_sparsity_study(study: &SbmStudyConfig) -> Result<SweepResult> {
    if study.repeats == 0 || study.levels.is_empty() {
        return Err(TrainError::Config("a study needs at least one level and one repeat".into()));
    }
    for &(p, q) in &study.levels {
        let (p0, q0) = study.levels[0];
        if (p * q0 - q * p0).abs() > 1e-12 {
            return Err(TrainError::Config(format!("level ({p}, {q}) changes the ratio p/q")));
        }
    }
    let total = study.levels.len() * study.repeats;
    let results = crate::par::map_indexed(total, |c| -> Result<CellRun> {
        let (level, repeat) = (c / study.repeats, c % study.repeats);
        let (p, q) = study.levels[level];
        let cell_seed = derive_seed(study.seed, &[level as u64, repeat as u64]);
        let g = sample_sbm(&SbmSpec { k: study.k, community_size: study.community_size, p, q, seed: cell_seed })?;
        let split = split_nodes(&g, study.train.fractions, true, derive_seed(cell_seed, &[1]))?;
        let config = TrainConfig { seed: derive_seed(cell_seed, &[2]), ..study.train };
        let h = train_node(&config, &g, &split)?.history;
        Ok(CellRun {
            level,
            repeat,
            final_params: h.final_params[0],
            final_val_acc: h.final_val_acc,
            final_test_acc: h.final_test_acc,
        })
    });
    let cells = results.into_iter().collect::<Result<Vec<_>>>()?;
    let labels = study.levels.iter().map(|(p, q)| format!("p={p} q={q}")).collect();
    Ok(SweepResult::from_cells(labels, cells))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitRun {
    pub init: Preset,
    pub history: TrainHistory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitSweep {
    pub runs: Vec<InitRun>,
    /// One level per initialisation, single repeat.
    pub summary: SweepResult,
}

/// One training per initial preset, same data and seed, keeping the full
/// histories. The operator mode of `config` is kept; a fixed mode is
/// promoted to a shared trainable tuple.
pub fn init_sensitivity(config: &TrainConfig, data: &TaskData, inits: &[Preset]) -> Result<InitSweep> {
    if inits.is_empty() {
        return Err(TrainError::Config("no initialisations given".into()));
    }
    let mode = match config.operator.mode {
        OperatorMode::Fixed => OperatorMode::Pgso,
        m => m,
    };
    let results = crate::par::map_indexed(inits.len(), |i| {
        let cfg = TrainConfig { operator: OperatorSpec::new(mode, inits[i]), ..*config };
        run(&cfg, data).map(|r| InitRun { init: inits[i], history: r.history })
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let cells = runs
        .iter()
        .enumerate()
        .map(|(level, r)| CellRun {
            level,
            repeat: 0,
            final_params: r.history.final_params[0],
            final_val_acc: r.history.final_val_acc,
            final_test_acc: r.history.final_test_acc,
        })
        .collect();
    let labels = inits.iter().map(|p| p.name().to_string()).collect();
    Ok(InitSweep { runs, summary: SweepResult::from_cells(labels, cells) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub baseline: TrainHistory,
    pub pgso: TrainHistory,
    /// Baseline final loss minus PGSO final loss.
    pub final_loss_difference: f64,
}

/// Trains the fixed preset and its trainable counterpart with the same
/// configuration and seed.
pub fn convergence_compare(config: &TrainConfig, data: &TaskData) -> Result<ConvergenceReport> {
    let preset = config.operator.init;
    let trainable = match config.operator.mode {
        OperatorMode::Fixed => OperatorMode::Pgso,
        m => m,
    };
    let base_cfg = TrainConfig { operator: OperatorSpec::new(OperatorMode::Fixed, preset), ..*config };
    let pgso_cfg = TrainConfig { operator: OperatorSpec::new(trainable, preset), ..*config };
    let (baseline, pgso) = crate::par::join(|| run(&base_cfg, data), || run(&pgso_cfg, data));
    let (baseline, pgso) = (baseline?.history, pgso?.history);
    let final_loss_difference = baseline.final_loss().unwrap_or(f64::NAN) - pgso.final_loss().unwrap_or(f64::NAN);
    Ok(ConvergenceReport { baseline, pgso, final_loss_difference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::Telemetry;

    fn tiny_study() -> SbmStudyConfig {
        SbmStudyConfig {
            community_size: 20,
            levels: vec![(0.5, 0.25), (0.3, 0.15)],
            repeats: 2,
            train: TrainConfig { epochs: 5, hidden: 8, telemetry: Telemetry::Off, ..TrainConfig::node_default() },
            ..SbmStudyConfig::desk()
        }
    }

    #[test]
    fn level_grids() {
        let full = full_sbm_levels();
        assert_eq!(full.len(), 15);
        assert_eq!(full[0], (0.5, 0.25));
        assert_eq!(full[14], (0.22, 0.11));
        assert!(desk_sbm_levels().iter().all(|(p, q)| (p / q - 2.0).abs() < 1e-12));
    }

    #[test]
    fn study_is_reproducible() {
        let a = sbm_sparsity_study(&tiny_study()).unwrap();
        let b = sbm_sparsity_study(&tiny_study()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.levels.len(), 2);
        assert_eq!(a.rows().len(), 2 * 10);
        assert!(a.levels.iter().all(|l| l.repeats == 2 && l.mean.iter().all(|m| m.is_finite())));
    }

    #[test]
    fn single_cell_has_zero_std() {
        let study = SbmStudyConfig { levels: vec![(0.5, 0.25)], repeats: 1, ..tiny_study() };
        let r = sbm_sparsity_study(&study).unwrap();
        assert_eq!(r.levels[0].std, [0.0; 7]);
        assert_eq!(r.levels[0].mean, r.cells[0].final_params.to_array());
    }

    #[test]
    fn ratio_must_be_constant() {
        let study = SbmStudyConfig { levels: vec![(0.5, 0.25), (0.4, 0.1)], ..tiny_study() };
        assert!(sbm_sparsity_study(&study).is_err());
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 2.0]) - 0.894_427_190_999_916).abs() < 1e-12);
    }

    #[test]
    fn mean_std_is_population() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
    }

    fn sbm_task() -> TaskData {
        let g = sample_sbm(&SbmSpec { k: 2, community_size: 15, p: 0.5, q: 0.1, seed: 3 }).unwrap();
        let split = split_nodes(&g, Default::default(), true, 3).unwrap();
        TaskData::Node { graph: g, split }
    }

    #[test]
    fn init_sweep_starts_at_presets() {
        let cfg = TrainConfig { epochs: 4, hidden: 8, ..TrainConfig::node_default() };
        let sweep = init_sensitivity(&cfg, &sbm_task(), &[Preset::Adjacency, Preset::AllZeros]).unwrap();
        assert_eq!(sweep.runs.len(), 2);
        for r in &sweep.runs {
            assert_eq!(r.history.records[0].params, vec![r.init.params()]);
        }
        assert!(init_sensitivity(&cfg, &sbm_task(), &[]).is_err());
    }

    #[test]
    fn convergence_arms_share_epoch_zero() {
        let cfg = TrainConfig { epochs: 6, hidden: 8, ..TrainConfig::node_default() };
        let rep = convergence_compare(&cfg, &sbm_task()).unwrap();
        assert_eq!(rep.baseline.records.len(), rep.pgso.records.len());
        assert_eq!(rep.baseline.records[0].loss.to_bits(), rep.pgso.records[0].loss.to_bits());
        let diff = rep.baseline.final_loss().unwrap() - rep.pgso.final_loss().unwrap();
        assert_eq!(rep.final_loss_difference, diff);
    }
}
