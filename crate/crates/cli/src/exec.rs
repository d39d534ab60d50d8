//! Serial and rayon-parallel drivers. Work items are seeded by index and
//! reduced in index order, so both produce identical results.

use rayon::prelude::*;

use fnnstat_core::fit::{fit_restart, select_best, FitConfig, FitResult};
use fnnstat_core::likelihood::LikelihoodSpec;
use fnnstat_core::selection::{
    bic, check_folds, cv_fold, fit_linear, fold_assignment, linear_bic, summarize_folds, sweep_row, Candidate, CvResult,
    SelectionSweep,
};
use fnnstat_core::simgen::{
    aggregate, pd_study_with, power_sweep_with, run_replicate, PdRow, PowerRow, SimReport, SimScenario,
};
use fnnstat_core::{fit as core_fit, selection, simgen, Architecture, Dataset, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Serial,
    Parallel,
}

impl Exec {
    /// `Serial` for one thread, `Parallel` otherwise.
    pub fn from_threads(threads: usize) -> Self {
        if threads == 1 {
            Exec::Serial
        } else {
            Exec::Parallel
        }
    }

    pub fn fit(self, arch: &Architecture, data: &Dataset, spec: &LikelihoodSpec, config: &FitConfig) -> Result<FitResult> {
        match self {
            Exec::Serial => core_fit::fit(arch, data, spec, config),
            Exec::Parallel => {
                config.validate()?;
                let outcomes = (0..config.n_restarts)
                    .into_par_iter()
                    .map(|i| fit_restart(arch, data, spec, config, i))
                    .collect::<Result<Vec<_>>>()?;
                select_best(arch, data, spec, config, outcomes)
            }
        }
    }

    pub fn run_scenario(self, scenario: &SimScenario) -> Result<SimReport> {
        match self {
            Exec::Serial => simgen::run_scenario(scenario),
            Exec::Parallel => {
                scenario.validate()?;
                let outcomes = (0..scenario.replicates)
                    .into_par_iter()
                    .map(|i| run_replicate(scenario, i))
                    .collect();
                aggregate(scenario, outcomes)
            }
        }
    }

    pub fn power_sweep(self, base: &SimScenario, effects: &[f64]) -> Result<Vec<PowerRow>> {
        power_sweep_with(base, effects, |s| self.run_scenario(s))
    }

    pub fn pd_study(self, cells: &[SimScenario]) -> Result<Vec<PdRow>> {
        pd_study_with(cells, |s| self.run_scenario(s))
    }

    pub fn cross_validate(
        self,
        candidate: Candidate,
        data: &Dataset,
        folds: usize,
        spec: &LikelihoodSpec,
        config: &FitConfig,
    ) -> Result<CvResult> {
        match self {
            Exec::Serial => selection::cross_validate(candidate, data, folds, spec, config),
            Exec::Parallel => {
                check_folds(data.n(), folds)?;
                let labels = fold_assignment(data.n(), folds, config.seed);
                let fold_rmse = (0..folds)
                    .into_par_iter()
                    .map(|f| cv_fold(candidate, data, &labels, f, spec, config))
                    .collect::<Result<Vec<_>>>()?;
                Ok(summarize_folds(fold_rmse))
            }
        }
    }

    pub fn candidate_bic(self, candidate: Candidate, data: &Dataset, spec: &LikelihoodSpec, config: &FitConfig) -> Result<f64> {
        match candidate {
            Candidate::Linear => Ok(linear_bic(&fit_linear(data)?)),
            Candidate::Network(q) => {
                let arch = Architecture::new(data.p(), q, spec.family.output_activation())?;
                let f = self.fit(&arch, data, spec, config)?;
                bic(&f, &arch, data)
            }
        }
    }

    pub fn sweep(
        self,
        data: &Dataset,
        q_list: &[usize],
        folds: usize,
        spec: &LikelihoodSpec,
        config: &FitConfig,
    ) -> Result<SelectionSweep> {
        if q_list.is_empty() {
            return Err(Error::InvalidInput("no candidate hidden-layer sizes".into()));
        }
        check_folds(data.n(), folds)?;
        let row = |&q: &usize| {
            let c = Candidate::from_q(q);
            sweep_row(
                q,
                self.candidate_bic(c, data, spec, config),
                self.cross_validate(c, data, folds, spec, config),
            )
        };
        let rows = match self {
            Exec::Serial => q_list.iter().map(row).collect(),
            Exec::Parallel => q_list.par_iter().map(row).collect(),
        };
        Ok(SelectionSweep { rows })
    }
}
