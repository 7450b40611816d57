use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Duration;

use crate::metrics::MetricsReport;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Present on epochs that ran a validation pass.
    pub val_weighted_f1: Option<f64>,
}

/// Everything reported about one training run.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub label: String,
    /// `[model]` and `[train]` sections as trained.
    pub config_echo: String,
    pub seed: u64,
    pub rng_algorithm: String,
    pub num_parameters: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_weighted_f1: Option<f64>,
    /// Validation metrics of the retained parameters.
    pub validation: Option<MetricsReport>,
    pub test: Option<MetricsReport>,
    /// Only the file name appears in [`RunRecord::body`].
    pub checkpoint: Option<PathBuf>,
    pub wall_clock: Duration,
}

impl RunRecord {
    pub fn train_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }

    /// Weighted F1 of the retained parameters on the validation set.
    pub fn validation_f1(&self) -> Option<f64> {
        self.validation.as_ref().map(|m| m.weighted_f1)
    }

    /// The deterministic part of the report.
    pub fn body(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "run: {}", self.label);
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "rng_algorithm: {}", self.rng_algorithm);
        let _ = writeln!(s, "parameters: {}", self.num_parameters);
        let _ = writeln!(s, "train_videos: {}", self.train_size);
        let _ = writeln!(s, "validation_videos: {}", self.validation_size);
        let _ = writeln!(
            s,
            "checkpoint: {}",
            self.checkpoint
                .as_ref()
                .and_then(|p| p.file_name())
                .map_or("none".to_string(), |n| n.to_string_lossy().into_owned())
        );
        s.push_str("\n# config\n");
        s.push_str(&self.config_echo);
        s.push_str("\n# epochs\nepoch,train_loss,val_weighted_f1\n");
        for e in &self.epochs {
            let f1 = e.val_weighted_f1.map_or("-".to_string(), |f| format!("{f:.6}"));
            let _ = writeln!(s, "{},{:.6},{}", e.epoch, e.train_loss, f1);
        }
        let _ = writeln!(s, "\nbest_epoch: {}", self.best_epoch);
        if let Some(f) = self.best_val_weighted_f1 {
            let _ = writeln!(s, "best_val_weighted_f1: {f:.6}");
        }
        if let Some(v) = &self.validation {
            s.push_str("\n# validation\n");
            s.push_str(&v.to_text());
        }
        if let Some(t) = &self.test {
            s.push_str("\n# test\n");
            s.push_str(&t.to_text());
        }
        s
    }

    /// Header line with the wall clock, then [`RunRecord::body`].
    pub fn report(&self) -> String {
        format!("# wall_clock_seconds: {:.3}\n{}", self.wall_clock.as_secs_f64(), self.body())
    }
}

/// Strips the wall-clock header line(s) from a report.
pub fn report_body(report: &str) -> String {
    report
        .lines()
        .filter(|l| !l.starts_with("# wall_clock"))
        .map(|l| format!("{l}\n"))
        .collect()
}
