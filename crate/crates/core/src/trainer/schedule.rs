//! Linear warmup / linear decay learning-rate schedule.

/// Piecewise-linear schedule: rises from 0 to `peak_lr` at
/// `warmup_ratio * total_steps`, then decays linearly to 0 at `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub peak_lr: f64,
    pub warmup_ratio: f64,
    pub total_steps: usize,
}

impl LrSchedule {
    pub fn new(peak_lr: f64, warmup_ratio: f64, total_steps: usize) -> Self {
        LrSchedule {
            peak_lr,
            warmup_ratio,
            total_steps,
        }
    }

    /// Learning rate at a (possibly fractional) step in [0, total_steps].
    pub fn lr_at(&self, step: f64) -> f64 {
        let total = self.total_steps as f64;
        if total <= 0.0 {
            return 0.0;
        }
        let peak = self.warmup_ratio * total;
        let step = step.clamp(0.0, total);
        if peak > 0.0 && step <= peak {
            self.peak_lr * step / peak
        } else if total > peak {
            self.peak_lr * (total - step) / (total - peak)
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn peaks_at_warmup_boundary_and_ends_at_zero() {
        let s = LrSchedule::new(5e-4, 0.2, 250);
        assert_abs_diff_eq!(s.lr_at(0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.lr_at(0.2 * 250.0), 5e-4, epsilon = 1e-15);
        assert_abs_diff_eq!(s.lr_at(250.0), 0.0, epsilon = 1e-15);
        // Piecewise linearity: midpoints interpolate exactly.
        assert_abs_diff_eq!(s.lr_at(25.0), 2.5e-4, epsilon = 1e-15);
        assert_abs_diff_eq!(s.lr_at(150.0), 5e-4 * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_warmup_is_pure_decay() {
        let s = LrSchedule::new(1e-3, 0.0, 100);
        assert_abs_diff_eq!(s.lr_at(0.0), 1e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(s.lr_at(50.0), 5e-4, epsilon = 1e-15);
    }
}
