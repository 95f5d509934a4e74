//! Thermal phonon states as weighted mixtures of Fock product states.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::trajectory_rng;

/// Largest number of Fock product states enumerated.
pub const MAX_ENUMERATED: usize = 1 << 20;
/// Retained physical mass below which a warning is attached to results.
pub const MASS_WARNING: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThermalSampling {
    /// Heaviest Fock states first until the tolerance is met.
    Enumerate,
    /// Independent draws from the truncated distribution, equal weights.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalSpec {
    /// Mean phonon number, the same for every mode.
    pub nbar: f64,
    pub n_max: usize,
    /// Enumeration stops once the renormalized mass exceeds `1 − tolerance`.
    pub tolerance: f64,
    pub sampling: ThermalSampling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockBranch {
    pub occupations: Vec<usize>,
    /// Weight within the mixture; the weights of a branch set sum to one.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalBranches {
    pub branches: Vec<FockBranch>,
    /// Mass of the kept states under the distribution renormalized on `0..=n_max`.
    pub retained_mass: f64,
    /// Mass of the kept states under the untruncated thermal distribution.
    pub physical_mass: f64,
    /// `1 − Π_modes Σ_{n ≤ n_max} p_n`, the mass cut off by the Fock cutoff.
    pub renormalization_defect: f64,
    pub warning: Option<String>,
}

impl ThermalSpec {
    pub fn new(nbar: f64, n_max: usize, tolerance: f64) -> Result<Self> {
        let s = Self {
            nbar,
            n_max,
            tolerance,
            sampling: ThermalSampling::Enumerate,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn vacuum(n_max: usize) -> Self {
        Self {
            nbar: 0.0,
            n_max,
            tolerance: 1e-9,
            sampling: ThermalSampling::Enumerate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nbar >= 0.0 && self.nbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("mean phonon number must be >= 0, got {}", self.nbar)));
        }
        if !(self.tolerance >= 0.0 && self.tolerance < 1.0) {
            return Err(Error::InvalidParameter(format!("mass tolerance must lie in [0, 1), got {}", self.tolerance)));
        }
        if let ThermalSampling::MonteCarlo { samples, .. } = self.sampling {
            if samples == 0 {
                return Err(Error::InvalidParameter("Monte Carlo sampling needs samples > 0".into()));
            }
        }
        Ok(())
    }

    /// Untruncated `p_n = n̄ⁿ/(1+n̄)^{n+1}`.
    pub fn raw_weight(&self, n: usize) -> f64 {
        if self.nbar == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        let r = self.nbar / (1.0 + self.nbar);
        r.powi(n as i32) / (1.0 + self.nbar)
    }

    /// Per-mode weights renormalized over `0..=n_max`.
    pub fn mode_weights(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..=self.n_max).map(|n| self.raw_weight(n)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    /// Mass below the cutoff for a single mode.
    pub fn mode_mass(&self) -> f64 {
        (0..=self.n_max).map(|n| self.raw_weight(n)).sum()
    }

    pub fn branches(&self, num_modes: usize) -> Result<ThermalBranches> {
        self.validate()?;
        let per_mode = self.mode_weights();
        let mode_mass = self.mode_mass();
        let renormalization_defect = 1.0 - mode_mass.powi(num_modes as i32);
        let (branches, retained_mass) = match self.sampling {
            ThermalSampling::Enumerate => self.enumerate(num_modes, &per_mode)?,
            ThermalSampling::MonteCarlo { samples, seed } => (self.sample(num_modes, &per_mode, samples, seed), 1.0),
        };
        let physical_mass = match self.sampling {
            ThermalSampling::Enumerate => retained_mass * mode_mass.powi(num_modes as i32),
            ThermalSampling::MonteCarlo { .. } => mode_mass.powi(num_modes as i32),
        };
        let warning = (physical_mass < MASS_WARNING).then(|| {
            format!(
                "thermal mixture keeps {physical_mass:.6} of the phonon distribution (n_max = {}, nbar = {})",
                self.n_max, self.nbar
            )
        });
        Ok(ThermalBranches {
            branches,
            retained_mass,
            physical_mass,
            renormalization_defect,
            warning,
        })
    }

    fn enumerate(&self, num_modes: usize, per_mode: &[f64]) -> Result<(Vec<FockBranch>, f64)> {
        let levels = self.n_max + 1;
        let total = levels
            .checked_pow(num_modes as u32)
            .filter(|&t| t <= MAX_ENUMERATED)
            .ok_or_else(|| Error::LayoutTooLarge {
                dim: usize::MAX,
                limit: MAX_ENUMERATED,
            })?;
        let mut states: Vec<(f64, Vec<usize>)> = (0..total)
            .map(|mut k| {
                let mut occ = vec![0; num_modes];
                let mut w = 1.0;
                for o in occ.iter_mut() {
                    *o = k % levels;
                    k /= levels;
                    w *= per_mode[*o];
                }
                (w, occ)
            })
            .filter(|(w, _)| *w > 0.0)
            .collect();
        // Heaviest first; ties go to the smaller largest occupation, then to
        // the lexicographically smaller occupation list.
        states.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| a.1.iter().max().cmp(&b.1.iter().max()))
                .then_with(|| a.1.cmp(&b.1))
        });
        let mut kept = Vec::new();
        let mut mass = 0.0;
        for (w, occ) in states {
            if mass >= 1.0 - self.tolerance {
                break;
            }
            mass += w;
            kept.push(FockBranch {
                occupations: occ,
                weight: w,
            });
        }
        for b in kept.iter_mut() {
            b.weight /= mass;
        }
        Ok((kept, mass))
    }

    fn sample(&self, num_modes: usize, per_mode: &[f64], samples: usize, seed: u64) -> Vec<FockBranch> {
        let mut rng = trajectory_rng(seed, u64::MAX);
        let w = 1.0 / samples as f64;
        (0..samples)
            .map(|_| {
                let occupations = (0..num_modes)
                    .map(|_| {
                        let u: f64 = rng.gen();
                        let mut acc = 0.0;
                        for (n, p) in per_mode.iter().enumerate() {
                            acc += p;
                            if u < acc {
                                return n;
                            }
                        }
                        per_mode.len() - 1
                    })
                    .collect();
                FockBranch { occupations, weight: w }
            })
            .collect()
    }
}
