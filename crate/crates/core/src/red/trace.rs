use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::psnr;

/// Iterate with the highest PSNR against the supplied ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct BestIterate {
    pub iteration: usize,
    pub psnr: f64,
    pub image: Image,
}

/// Penalty and denoiser-level schedule of a Plug-and-Play run, per iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub beta: Vec<f64>,
    pub sigma_f: Vec<f64>,
}

/// Outcome of a solver run. Traces hold one entry for the initial point
/// followed by one per completed outer iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub final_image: Image,
    pub energy_trace: Vec<f64>,
    pub grad_norm_trace: Vec<f64>,
    pub psnr_trace: Option<Vec<f64>>,
    pub iterations_run: usize,
    pub best: Option<BestIterate>,
    pub schedule: Option<Schedule>,
}

impl RunReport {
    pub fn final_energy(&self) -> f64 {
        *self.energy_trace.last().expect("trace holds the initial point")
    }

    pub fn final_psnr(&self) -> Option<f64> {
        self.psnr_trace.as_ref().and_then(|t| t.last().copied())
    }

    /// First iteration from which the energy stays within `rel_tol` of `target`.
    pub fn iterations_to_reach(&self, target: f64, rel_tol: f64) -> Option<usize> {
        let near = |e: f64| (e - target).abs() <= rel_tol * target.abs();
        let last_far = self.energy_trace.iter().rposition(|&e| !near(e));
        match last_far {
            None => Some(0),
            Some(k) if k + 1 < self.energy_trace.len() => Some(k + 1),
            Some(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Guard {
    /// Abort after 10 consecutive energy increases that end above the
    /// initial energy, or on non-finite values.
    EnergyRise,
    /// Abort only on non-finite values.
    FiniteOnly,
}

const RISE_LIMIT: usize = 10;

pub(crate) struct Tracker<'a> {
    ground_truth: Option<&'a Image>,
    guard: Guard,
    energy: Vec<f64>,
    grad_norm: Vec<f64>,
    psnr: Option<Vec<f64>>,
    best: Option<BestIterate>,
    rises: usize,
}

impl<'a> Tracker<'a> {
    pub fn new(ground_truth: Option<&'a Image>, guard: Guard) -> Self {
        Self {
            ground_truth,
            guard,
            energy: Vec::new(),
            grad_norm: Vec::new(),
            psnr: ground_truth.map(|_| Vec::new()),
            best: None,
            rises: 0,
        }
    }

    pub fn record(&mut self, x: &Image, energy: f64, grad_norm: f64) -> Result<()> {
        let iteration = self.energy.len();
        if !energy.is_finite() || !grad_norm.is_finite() || !x.is_finite() {
            return Err(Error::Diverged { iteration, energy });
        }
        if let Some(&prev) = self.energy.last() {
            self.rises = if energy > prev { self.rises + 1 } else { 0 };
            if self.guard == Guard::EnergyRise && self.rises >= RISE_LIMIT && energy > self.energy[0] {
                return Err(Error::Diverged { iteration, energy });
            }
        }
        self.energy.push(energy);
        self.grad_norm.push(grad_norm);
        if let (Some(gt), Some(trace)) = (self.ground_truth, self.psnr.as_mut()) {
            let p = psnr(gt, x)?.psnr_db;
            trace.push(p);
            if self.best.as_ref().is_none_or(|b| p > b.psnr) {
                self.best = Some(BestIterate {
                    iteration,
                    psnr: p,
                    image: x.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn initial_grad_norm(&self) -> f64 {
        self.grad_norm[0]
    }

    pub fn finish(self, final_image: Image, schedule: Option<Schedule>) -> RunReport {
        RunReport {
            final_image,
            iterations_run: self.energy.len() - 1,
            energy_trace: self.energy,
            grad_norm_trace: self.grad_norm,
            psnr_trace: self.psnr,
            best: self.best,
            schedule,
        }
    }
}

/// True once the gradient has shrunk by `tol` relative to the initial point.
pub(crate) fn grad_settled(tol: Option<f64>, initial: f64, current: f64) -> bool {
    tol.is_some_and(|t| current <= t * initial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_trips_on_sustained_rise_above_start() {
        let x = Image::zeros(2, 2);
        let mut t = Tracker::new(None, Guard::EnergyRise);
        t.record(&x, 1.0, 0.0).unwrap();
        let mut failed = None;
        for k in 1..=12 {
            if let Err(e) = t.record(&x, 1.0 + k as f64, 0.0) {
                failed = Some((k, e));
                break;
            }
        }
        let (k, e) = failed.expect("guard should trip");
        assert_eq!(k, 10);
        assert!(matches!(e, Error::Diverged { iteration: 10, .. }));
    }

    #[test]
    fn rises_below_start_are_tolerated() {
        let x = Image::zeros(2, 2);
        let mut t = Tracker::new(None, Guard::EnergyRise);
        t.record(&x, 100.0, 0.0).unwrap();
        t.record(&x, 1.0, 0.0).unwrap();
        for k in 0..20 {
            t.record(&x, 2.0 + k as f64, 0.0).unwrap();
        }
    }

    #[test]
    fn non_finite_always_trips() {
        let x = Image::zeros(2, 2);
        let mut t = Tracker::new(None, Guard::FiniteOnly);
        assert!(t.record(&x, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn best_iterate_and_lengths() {
        let gt = Image::filled(2, 2, 10.0);
        let mut t = Tracker::new(Some(&gt), Guard::FiniteOnly);
        for v in [0.0, 9.0, 5.0] {
            t.record(&Image::filled(2, 2, v), 1.0, 1.0).unwrap();
        }
        let r = t.finish(Image::filled(2, 2, 5.0), None);
        assert_eq!(r.iterations_run, 2);
        assert_eq!(r.energy_trace.len(), 3);
        assert_eq!(r.psnr_trace.as_ref().unwrap().len(), 3);
        assert_eq!(r.best.unwrap().iteration, 1);
    }

    #[test]
    fn iterations_to_reach_counts_from_last_excursion() {
        let r = RunReport {
            final_image: Image::zeros(1, 1),
            energy_trace: vec![10.0, 1.0, 5.0, 1.0005, 1.0],
            grad_norm_trace: vec![0.0; 5],
            psnr_trace: None,
            iterations_run: 4,
            best: None,
            schedule: None,
        };
        assert_eq!(r.iterations_to_reach(1.0, 1e-3), Some(3));
        assert_eq!(r.iterations_to_reach(0.0, 1e-3), None);
    }
}
