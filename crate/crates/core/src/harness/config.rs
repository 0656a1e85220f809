//! Scenario config files.
//!
//! Flat `key = value` text; relative paths resolve against the config file's
//! directory.
//!
//! ```text
//! scenario = all                  # unprotected | resynthesized | ignorant | lazy_informed | all
//! enroll = mandarin.tsv
//! test = mandarin.tsv             # defaults to `enroll`
//! trials = trials.tsv
//! pool = english.tsv
//! runs = 5
//! freeze_anonymization = false
//! freeze_coral = false
//! allow_equal_seeds = false
//! user.k = 200
//! user.n = 100
//! user.seed = 11
//! user.seed_scope = utterance     # or speaker
//! user.coral.target = general.tsv # enables CORAL
//! user.coral.source = english.tsv # defaults to the pool
//! user.coral.n = 10
//! user.coral.lambda = 1.0
//! user.coral.denorm = target      # or none
//! user.coral.seed = 12
//! attacker.*                      # same keys, plus attacker.pool
//! sweep.n_values = 10,20,50,100
//! ```

use std::path::{Path, PathBuf};

use super::{CoralSpec, PartyPolicy, Scenario, ScenarioConfig, DEFAULT_RUNS};
use crate::anonymizer::{AnonymizationPolicy, DEFAULT_FARTHEST_K, DEFAULT_SELECT_N};
use crate::coral::{DenormMode, DEFAULT_LAMBDA};
use crate::error::{Error, Result};
use crate::io;
use crate::kv::KvFile;
use crate::store::{load_vector_set, VectorSet};
use crate::trials::load_trials;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioSelection {
    One(Scenario),
    /// Unprotected, resynthesized, ignorant and (with an attacker) lazy-informed.
    All,
}

#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub selection: ScenarioSelection,
    /// Config for the lazy-informed case when an attacker is configured,
    /// otherwise for ignorant; see [`ScenarioFile::config_for`].
    pub config: ScenarioConfig,
    pub sweep_n_values: Vec<usize>,
}

impl ScenarioFile {
    pub fn config_for(&self, scenario: Scenario) -> Result<ScenarioConfig> {
        if scenario == Scenario::LazyInformed && self.config.attacker.is_none() {
            return Err(Error::Config("lazy_informed requires attacker.* keys".into()));
        }
        Ok(self.config.with_scenario(scenario))
    }

    pub fn scenarios(&self) -> Vec<Scenario> {
        match self.selection {
            ScenarioSelection::One(s) => vec![s],
            ScenarioSelection::All => {
                let mut v = vec![Scenario::Unprotected, Scenario::Resynthesized, Scenario::Ignorant];
                if self.config.attacker.is_some() {
                    v.push(Scenario::LazyInformed);
                }
                v
            }
        }
    }
}

const PARTY_KEYS: &[&str] = &[
    "k",
    "n",
    "seed",
    "seed_scope",
    "coral.target",
    "coral.source",
    "coral.n",
    "coral.lambda",
    "coral.denorm",
    "coral.seed",
];

fn known_key(k: &str) -> bool {
    const TOP: &[&str] = &[
        "scenario",
        "enroll",
        "test",
        "trials",
        "pool",
        "runs",
        "freeze_anonymization",
        "freeze_coral",
        "allow_equal_seeds",
        "sweep.n_values",
        "attacker.pool",
    ];
    TOP.contains(&k)
        || ["user.", "attacker."].iter().any(|p| {
            k.strip_prefix(p)
                .is_some_and(|rest| PARTY_KEYS.contains(&rest))
        })
}

struct Loader<'a> {
    kv: &'a KvFile,
    base: PathBuf,
    provenance: Vec<(String, String)>,
}

impl Loader<'_> {
    fn set(&mut self, key: &str) -> Result<VectorSet> {
        let value = self.kv.require(key)?;
        self.set_at(key, value)
    }

    fn set_at(&mut self, key: &str, value: &str) -> Result<VectorSet> {
        let path = self.base.join(value);
        self.provenance.push((format!("file.{key}"), value.to_string()));
        load_vector_set(&path).map_err(|e| Error::Config(format!("{key}: {e}")))
    }

    fn party(&mut self, prefix: &str, pool_path: &str) -> Result<PartyPolicy> {
        let key = |f: &str| format!("{prefix}.{f}");
        let kv = self.kv;
        let anonymization = AnonymizationPolicy::new(
            kv.parse_or(&key("k"), DEFAULT_FARTHEST_K)?,
            kv.parse_or(&key("n"), DEFAULT_SELECT_N)?,
            kv.parse_req(&key("seed"))?,
        );
        let seed_scope = kv.get(&key("seed_scope")).unwrap_or("utterance").parse()?;
        let coral = match kv.get(&key("coral.target")) {
            None => {
                if PARTY_KEYS
                    .iter()
                    .filter(|k| k.starts_with("coral."))
                    .any(|k| kv.get(&key(k)).is_some())
                {
                    return Err(Error::Config(format!(
                        "{prefix}.coral.* keys given without {prefix}.coral.target"
                    )));
                }
                None
            }
            Some(target) => {
                let target = self.set_at(&key("coral.target"), target)?;
                let source_path = kv.get(&key("coral.source")).unwrap_or(pool_path).to_string();
                let source = self.set_at(&key("coral.source"), &source_path)?;
                Some(CoralSpec {
                    source,
                    target,
                    n_fit: kv.parse_req(&key("coral.n"))?,
                    lambda: kv.parse_or(&key("coral.lambda"), DEFAULT_LAMBDA)?,
                    denorm: kv.get(&key("coral.denorm")).unwrap_or("target").parse::<DenormMode>()?,
                    seed: kv.parse_req(&key("coral.seed"))?,
                })
            }
        };
        Ok(PartyPolicy {
            anonymization,
            seed_scope,
            coral,
            pool: None,
        })
    }
}

pub fn parse_scenario_file(text: &str, base_dir: &Path) -> Result<ScenarioFile> {
    let kv = KvFile::parse(text)?;
    kv.check_keys(known_key)?;

    let selection = match kv.require("scenario")? {
        "all" => ScenarioSelection::All,
        s => ScenarioSelection::One(s.parse()?),
    };
    let mut loader = Loader {
        kv: &kv,
        base: base_dir.to_path_buf(),
        provenance: Vec::new(),
    };
    let enroll = loader.set("enroll")?;
    let test = match kv.get("test") {
        Some(t) => loader.set_at("test", t)?,
        None => enroll.clone(),
    };
    let trials_path = kv.require("trials")?;
    loader
        .provenance
        .push(("file.trials".into(), trials_path.to_string()));
    let trials = load_trials(base_dir.join(trials_path))
        .map_err(|e| Error::Config(format!("trials: {e}")))?;
    let pool_path = kv.require("pool")?.to_string();
    let pool = loader.set("pool")?;

    let needs_user = !matches!(
        selection,
        ScenarioSelection::One(Scenario::Unprotected | Scenario::Resynthesized)
    );
    let user = if needs_user || kv.get("user.seed").is_some() {
        loader.party("user", &pool_path)?
    } else {
        PartyPolicy {
            anonymization: AnonymizationPolicy::new(DEFAULT_FARTHEST_K, DEFAULT_SELECT_N, 0),
            seed_scope: Default::default(),
            coral: None,
            pool: None,
        }
    };
    let has_attacker = kv.keys().any(|k| k.starts_with("attacker."));
    if selection == ScenarioSelection::One(Scenario::LazyInformed) && !has_attacker {
        return Err(Error::Config("lazy_informed requires attacker.* keys".into()));
    }
    let attacker = if has_attacker {
        let attacker_pool_path = kv.get("attacker.pool").unwrap_or(&pool_path).to_string();
        let mut att = loader.party("attacker", &attacker_pool_path)?;
        if kv.get("attacker.pool").is_some() {
            att.pool = Some(loader.set("attacker.pool")?);
        }
        Some(att)
    } else {
        None
    };

    let sweep_n_values = match kv.get("sweep.n_values") {
        None => Vec::new(),
        Some(v) => v
            .split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Config(format!("invalid sweep.n_values entry `{s}`")))
            })
            .collect::<Result<Vec<usize>>>()?,
    };

    let scenario = match selection {
        ScenarioSelection::One(s) => s,
        ScenarioSelection::All if attacker.is_some() => Scenario::LazyInformed,
        ScenarioSelection::All => Scenario::Ignorant,
    };
    let config = ScenarioConfig {
        scenario,
        enroll,
        test,
        trials,
        pool,
        user,
        attacker,
        runs: kv.parse_or("runs", DEFAULT_RUNS)?,
        freeze_anonymization: kv.parse_bool_or("freeze_anonymization", false)?,
        freeze_coral: kv.parse_bool_or("freeze_coral", false)?,
        allow_equal_seeds: kv.parse_bool_or("allow_equal_seeds", false)?,
        provenance: loader.provenance,
    };
    config.validate()?;
    Ok(ScenarioFile {
        selection,
        config,
        sweep_n_values,
    })
}

pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<ScenarioFile> {
    let path = path.as_ref();
    let text = io::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario_file(&text, base)
}
