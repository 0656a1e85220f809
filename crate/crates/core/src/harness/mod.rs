//! Attack-scenario experiments over anonymized speaker vectors.
//!
//! * Unprotected: original enrollment vs original test vectors.
//! * Ignorant: original enrollment vs user-anonymized test vectors.
//! * Lazy-informed: attacker-anonymized enrollment vs user-anonymized test
//!   vectors, with independent attacker randomness and CORAL fit samples.
//!
//! A run index `r` derives every per-run seed as `derive_seed(base, r)`
//! unless the corresponding `freeze_*` flag pins the base seed.

mod config;
mod report;

use std::fmt;
use std::str::FromStr;

pub use config::{load_scenario_file, parse_scenario_file, ScenarioFile, ScenarioSelection};
pub use report::{reports_to_text, ExperimentReport, RunResult, RESYNTHESIZED_NOTE};

use crate::anonymizer::{anonymize_set, AnonymizationPolicy, SeedScope};
use crate::asv::{score_trials, ScoreReport};
use crate::coral::{coral_apply_set, coral_fit_sampled, CoralTransform, DenormMode};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::store::VectorSet;
use crate::trials::TrialSet;

pub const DEFAULT_RUNS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Unprotected,
    /// Unprotected with resynthesized test audio; identical at vector level.
    Resynthesized,
    Ignorant,
    LazyInformed,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Unprotected => "unprotected",
            Scenario::Resynthesized => "resynthesized",
            Scenario::Ignorant => "ignorant",
            Scenario::LazyInformed => "lazy_informed",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unprotected" => Ok(Scenario::Unprotected),
            "resynthesized" => Ok(Scenario::Resynthesized),
            "ignorant" => Ok(Scenario::Ignorant),
            "lazy_informed" => Ok(Scenario::LazyInformed),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

/// CORAL step applied after anonymization.
#[derive(Debug, Clone, PartialEq)]
pub struct CoralSpec {
    /// Source-domain vectors the fit sample is drawn from.
    pub source: VectorSet,
    /// Target-domain vectors the fit sample is drawn from.
    pub target: VectorSet,
    /// Vectors drawn from each domain per fit.
    pub n_fit: usize,
    pub lambda: f64,
    pub denorm: DenormMode,
    pub seed: u64,
}

/// What one party (user or attacker) does to the vectors it controls.
#[derive(Debug, Clone, PartialEq)]
pub struct PartyPolicy {
    pub anonymization: AnonymizationPolicy,
    pub seed_scope: SeedScope,
    pub coral: Option<CoralSpec>,
    /// Pool override; `None` uses the experiment pool.
    pub pool: Option<VectorSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub enroll: VectorSet,
    pub test: VectorSet,
    pub trials: TrialSet,
    pub pool: VectorSet,
    pub user: PartyPolicy,
    pub attacker: Option<PartyPolicy>,
    pub runs: usize,
    pub freeze_anonymization: bool,
    pub freeze_coral: bool,
    /// Permits identical user and attacker seeds (degenerate test setups).
    pub allow_equal_seeds: bool,
    /// Extra provenance entries (e.g. input file paths) copied into reports.
    pub provenance: Vec<(String, String)>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be positive".into()));
        }
        self.trials.check_both_classes()?;
        match (self.scenario, &self.attacker) {
            (Scenario::LazyInformed, None) => {
                return Err(Error::Config("lazy_informed requires an attacker policy".into()))
            }
            (Scenario::LazyInformed, Some(_)) => {}
            (s, Some(_)) => {
                return Err(Error::Config(format!("scenario {s} does not take an attacker policy")))
            }
            (_, None) => {}
        }
        if matches!(self.scenario, Scenario::Ignorant | Scenario::LazyInformed) {
            self.check_party(&self.user, &self.pool)?;
        }
        if let Some(att) = &self.attacker {
            self.check_party(att, att.pool.as_ref().unwrap_or(&self.pool))?;
            if !self.allow_equal_seeds {
                if att.anonymization.seed == self.user.anonymization.seed {
                    return Err(Error::Config(
                        "user and attacker anonymization seeds must differ".into(),
                    ));
                }
                if let (Some(u), Some(a)) = (&self.user.coral, &att.coral) {
                    if u.seed == a.seed {
                        return Err(Error::Config("user and attacker CORAL seeds must differ".into()));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_party(&self, party: &PartyPolicy, pool: &VectorSet) -> Result<()> {
        party.anonymization.validate(pool.len())?;
        if pool.dimension() != self.test.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.test.dimension(),
                actual: pool.dimension(),
            });
        }
        if let Some(c) = &party.coral {
            for (name, set) in [("source", &c.source), ("target", &c.target)] {
                if c.n_fit > set.len() {
                    return Err(Error::Config(format!(
                        "CORAL needs {} {name} vectors, only {} available",
                        c.n_fit,
                        set.len()
                    )));
                }
            }
            if c.n_fit < 2 {
                return Err(Error::Config("CORAL fit size must be at least 2".into()));
            }
        }
        Ok(())
    }

    /// Same experiment under another scenario; the attacker policy is kept
    /// only for lazy-informed.
    pub fn with_scenario(&self, scenario: Scenario) -> Self {
        let mut cfg = self.clone();
        cfg.scenario = scenario;
        if scenario != Scenario::LazyInformed {
            cfg.attacker = None;
        }
        cfg
    }

    fn anon_seed(&self, base: u64, run: usize) -> u64 {
        if self.freeze_anonymization {
            base
        } else {
            derive_seed(base, run as u64)
        }
    }

    fn coral_seed(&self, base: u64, run: usize) -> u64 {
        if self.freeze_coral {
            base
        } else {
            derive_seed(base, run as u64)
        }
    }

    /// Anonymizes (and optionally CORAL-maps) `set` as `party` does in `run`.
    pub fn protect(
        &self,
        set: &VectorSet,
        party: &PartyPolicy,
        run: usize,
    ) -> Result<(VectorSet, Option<CoralTransform>)> {
        let pool = party.pool.as_ref().unwrap_or(&self.pool);
        let policy = AnonymizationPolicy {
            seed: self.anon_seed(party.anonymization.seed, run),
            ..party.anonymization
        };
        let anonymized = anonymize_set(set, pool, &policy, party.seed_scope)?;
        match &party.coral {
            None => Ok((anonymized, None)),
            Some(c) => {
                let t = coral_fit_sampled(
                    &c.source,
                    &c.target,
                    c.n_fit,
                    c.lambda,
                    self.coral_seed(c.seed, run),
                )?;
                let mapped = coral_apply_set(&t, &anonymized, c.denorm)?;
                Ok((mapped, Some(t)))
            }
        }
    }

    fn trial_sides(&self) -> Result<(VectorSet, VectorSet)> {
        let enroll = self.enroll.select_ids(self.trials.enroll_ids())?;
        let test = self.test.select_ids(self.trials.test_ids())?;
        if enroll.dimension() != test.dimension() {
            return Err(Error::DimensionMismatch {
                expected: enroll.dimension(),
                actual: test.dimension(),
            });
        }
        Ok((enroll, test))
    }

    /// Executes run `run` and keeps every intermediate output.
    pub fn execute_run(&self, run: usize) -> Result<RunArtifacts> {
        self.validate()?;
        let (enroll, test) = self.trial_sides()?;
        self.execute_run_on(&enroll, &test, run)
    }

    fn execute_run_on(&self, enroll: &VectorSet, test: &VectorSet, run: usize) -> Result<RunArtifacts> {
        let (user_test, user_transform) = match self.scenario {
            Scenario::Unprotected | Scenario::Resynthesized => (None, None),
            Scenario::Ignorant | Scenario::LazyInformed => {
                let (s, t) = self.protect(test, &self.user, run)?;
                (Some(s), t)
            }
        };
        let (attacker_enroll, attacker_transform) = match &self.attacker {
            Some(att) => {
                let (s, t) = self.protect(enroll, att, run)?;
                (Some(s), t)
            }
            None => (None, None),
        };
        let scores = score_trials(
            attacker_enroll.as_ref().unwrap_or(enroll),
            user_test.as_ref().unwrap_or(test),
            &self.trials,
        )?;
        Ok(RunArtifacts {
            run,
            user_test,
            attacker_enroll,
            user_transform,
            attacker_transform,
            report: ScoreReport::from_scores(scores)?,
        })
    }

    fn run_all(&self) -> Result<ExperimentReport> {
        self.validate()?;
        let (enroll, test) = self.trial_sides()?;
        let runs = match self.scenario {
            Scenario::Unprotected | Scenario::Resynthesized => 1,
            _ => self.runs,
        };
        let results: Vec<Result<RunResult>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..runs)
                .map(|r| {
                    let (enroll, test) = (&enroll, &test);
                    scope.spawn(move || self.execute_run_on(enroll, test, r).map(|a| a.summary()))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("run thread panicked"))
                .collect()
        });
        let results = results.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(ExperimentReport::new(self.scenario, results, self.provenance_entries()))
    }

    pub fn provenance_entries(&self) -> Vec<(String, String)> {
        let mut p: Vec<(String, String)> = vec![
            ("rng".into(), crate::seed::RNG_ALGORITHM.into()),
            ("scoring".into(), crate::asv::SCORING_BACKEND.into()),
            ("format_version".into(), crate::FORMAT_VERSION.to_string()),
            ("runs".into(), self.runs.to_string()),
            ("freeze_anonymization".into(), self.freeze_anonymization.to_string()),
            ("freeze_coral".into(), self.freeze_coral.to_string()),
            ("pool_size".into(), self.pool.len().to_string()),
            ("pool_domain".into(), self.pool.domain_label()),
            ("n_trials".into(), self.trials.len().to_string()),
        ];
        if matches!(self.scenario, Scenario::Ignorant | Scenario::LazyInformed) {
            party_provenance("user", &self.user, &mut p);
        }
        if let Some(att) = &self.attacker {
            party_provenance("attacker", att, &mut p);
            if let Some(pool) = &att.pool {
                p.push(("attacker.pool_size".into(), pool.len().to_string()));
            }
        }
        p.extend(self.provenance.iter().cloned());
        p
    }
}

fn party_provenance(prefix: &str, party: &PartyPolicy, out: &mut Vec<(String, String)>) {
    let a = &party.anonymization;
    out.push((format!("{prefix}.k"), a.farthest_k.to_string()));
    out.push((format!("{prefix}.n"), a.select_n.to_string()));
    out.push((format!("{prefix}.seed"), a.seed.to_string()));
    out.push((format!("{prefix}.seed_scope"), party.seed_scope.to_string()));
    match &party.coral {
        None => out.push((format!("{prefix}.coral"), "off".into())),
        Some(c) => {
            out.push((format!("{prefix}.coral.n"), c.n_fit.to_string()));
            out.push((format!("{prefix}.coral.lambda"), crate::io::fmt_f64(c.lambda)));
            out.push((format!("{prefix}.coral.denorm"), c.denorm.to_string()));
            out.push((format!("{prefix}.coral.seed"), c.seed.to_string()));
            out.push((format!("{prefix}.coral.source_domain"), c.source.domain_label()));
            out.push((format!("{prefix}.coral.target_domain"), c.target.domain_label()));
        }
    }
}

/// Everything one run produced.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub run: usize,
    /// User-protected test vectors (absent when unprotected).
    pub user_test: Option<VectorSet>,
    /// Attacker-protected enrollment vectors (lazy-informed only).
    pub attacker_enroll: Option<VectorSet>,
    pub user_transform: Option<CoralTransform>,
    pub attacker_transform: Option<CoralTransform>,
    pub report: ScoreReport,
}

impl RunArtifacts {
    /// `||A_user - A_attacker||_F` when both parties fit CORAL.
    pub fn coral_divergence(&self) -> Option<f64> {
        match (&self.user_transform, &self.attacker_transform) {
            (Some(u), Some(a)) => Some((&u.matrix - &a.matrix).norm()),
            _ => None,
        }
    }

    pub fn summary(&self) -> RunResult {
        RunResult {
            run: self.run,
            eer: self.report.eer,
            threshold: self.report.threshold,
            n_genuine: self.report.n_genuine,
            n_impostor: self.report.n_impostor,
            coral_divergence: self.coral_divergence(),
        }
    }
}

fn expect_scenario(cfg: &ScenarioConfig, want: Scenario) -> Result<()> {
    if cfg.scenario != want {
        return Err(Error::Config(format!(
            "config is for scenario {}, not {want}",
            cfg.scenario
        )));
    }
    Ok(())
}

pub fn run_unprotected(cfg: &ScenarioConfig) -> Result<ExperimentReport> {
    expect_scenario(cfg, Scenario::Unprotected)?;
    cfg.run_all()
}

/// Unprotected scores relabelled, with [`RESYNTHESIZED_NOTE`] attached.
pub fn run_resynthesized(cfg: &ScenarioConfig) -> Result<ExperimentReport> {
    let mut report = cfg.with_scenario(Scenario::Unprotected).run_all()?;
    report.scenario = Scenario::Resynthesized;
    report.notes.push(RESYNTHESIZED_NOTE.to_string());
    Ok(report)
}

pub fn run_ignorant(cfg: &ScenarioConfig) -> Result<ExperimentReport> {
    expect_scenario(cfg, Scenario::Ignorant)?;
    cfg.run_all()
}

pub fn run_lazy_informed(cfg: &ScenarioConfig) -> Result<ExperimentReport> {
    expect_scenario(cfg, Scenario::LazyInformed)?;
    cfg.run_all()
}

/// Runs whichever scenario `cfg` names.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ExperimentReport> {
    match cfg.scenario {
        Scenario::Resynthesized => run_resynthesized(cfg),
        _ => cfg.run_all(),
    }
}

/// One experiment per CORAL fit size, with both parties drawing `n` vectors.
///
/// Every run records the Frobenius distance between the user's and the
/// attacker's transfer matrices; both parties must therefore use CORAL.
pub fn coral_n_sweep(base: &ScenarioConfig, n_values: &[usize], runs: usize) -> Result<Vec<ExperimentReport>> {
    if n_values.is_empty() {
        return Ok(Vec::new());
    }
    if base.scenario != Scenario::LazyInformed {
        return Err(Error::Config("CORAL-N sweep needs a lazy_informed config".into()));
    }
    let att = base
        .attacker
        .as_ref()
        .ok_or_else(|| Error::Config("CORAL-N sweep needs an attacker policy".into()))?;
    if base.user.coral.is_none() || att.coral.is_none() {
        return Err(Error::Config("CORAL-N sweep needs CORAL for user and attacker".into()));
    }
    let mut cfg = base.clone();
    cfg.runs = runs;
    let mut reports = Vec::with_capacity(n_values.len());
    for &n in n_values {
        if let Some(c) = cfg.user.coral.as_mut() {
            c.n_fit = n;
        }
        if let Some(c) = cfg.attacker.as_mut().and_then(|a| a.coral.as_mut()) {
            c.n_fit = n;
        }
        let mut report = cfg.run_all()?;
        report.label = Some(format!("coral_n={n}"));
        reports.push(report);
    }
    Ok(reports)
}
