use super::profile::DetuningGrid;
use super::scheme::{class_offsets, IonClass, LevelScheme};
use crate::error::{Error, Result};

/// What has been carved into the ensemble so far.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreparationHistory {
    /// Width of the transparency window, when one has been burnt.
    pub pit_width_mhz: Option<f64>,
    /// Width of the single-class feature, when one has been burnt back.
    pub feature_width_mhz: Option<f64>,
}

/// Ground-state population fractions per detuning bin and ion class.
///
/// Entry `(bin, class)` describes the ions whose `class.ground →
/// class.excited` transition sits at the bin's detuning. Those ions'
/// reference transition lies at `δ_bin - offset(class)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPopulations {
    pub grid: DetuningGrid,
    pub offsets: [f64; 9],
    pops: Vec<[f64; 3]>,
    pub history: PreparationHistory,
}

impl ClassPopulations {
    /// Thermal state: every ground state equally populated.
    pub fn thermal(grid: DetuningGrid, scheme: &LevelScheme) -> Result<Self> {
        scheme.validate()?;
        let n = grid.len * 9;
        Ok(ClassPopulations {
            grid,
            offsets: class_offsets(scheme),
            pops: vec![[1.0 / 3.0; 3]; n],
            history: PreparationHistory::default(),
        })
    }

    pub fn bins(&self) -> usize {
        self.grid.len
    }

    pub fn get(&self, bin: usize, class: IonClass) -> [f64; 3] {
        self.pops[bin * 9 + class.index()]
    }

    pub fn set(&mut self, bin: usize, class: IonClass, fractions: [f64; 3]) -> Result<()> {
        let sum: f64 = fractions.iter().sum();
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "fractions",
                format!("{fractions:?} is not a probability vector"),
            ));
        }
        self.pops[bin * 9 + class.index()] = fractions;
        Ok(())
    }

    /// Flat view, index `bin * 9 + class.index()`.
    pub fn entries(&self) -> &[[f64; 3]] {
        &self.pops
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.pops
    }

    /// Reference-transition frequency of the ions in entry `idx`.
    pub fn reference_frequency(&self, idx: usize) -> f64 {
        self.grid.value(idx / 9) - self.offsets[idx % 9]
    }

    /// Largest deviation of any entry's population sum from one.
    pub fn max_sum_error(&self) -> f64 {
        self.pops
            .iter()
            .map(|p| (p.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest population fraction anywhere.
    pub fn min_fraction(&self) -> f64 {
        self.pops
            .iter()
            .flat_map(|p| p.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}
