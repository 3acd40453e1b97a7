use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};

const DEFAULTS: &str = include_str!("../../data/pass_constants.json");

/// Pass thresholds per check name, plus committed regression maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassConstants {
    /// `null` marks an experiment without a threshold.
    pub limits: BTreeMap<String, Option<f64>>,
    #[serde(default)]
    pub regression: BTreeMap<String, f64>,
}

impl Default for PassConstants {
    fn default() -> Self {
        serde_json::from_str(DEFAULTS).expect("bundled pass constants parse")
    }
}

impl PassConstants {
    pub fn limit(&self, name: &str) -> Option<f64> {
        self.limits.get(name).copied().flatten()
    }

    pub fn regression(&self, name: &str) -> Option<f64> {
        self.regression.get(name).copied()
    }

    /// Replaces thresholds; unknown names are rejected.
    pub fn apply_overrides(&mut self, overrides: &BTreeMap<String, f64>) -> Result<()> {
        for (name, v) in overrides {
            match self.limits.get_mut(name) {
                Some(slot) => *slot = Some(*v),
                None => return Err(Error::Config(format!("unknown check `{name}` in overrides"))),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_defaults() {
        let pc = PassConstants::default();
        assert_eq!(pc.limit("tree.carleson"), Some(16.0));
        assert_eq!(pc.limit("c.l2decay"), Some(32.0));
        assert_eq!(pc.limit("oq.alpha"), None);
        assert!(pc.limits.contains_key("oq.alpha"));
        let mut pc2 = pc.clone();
        pc2.apply_overrides(&[("a.main".to_string(), 1.0)].into()).unwrap();
        assert_eq!(pc2.limit("a.main"), Some(1.0));
        assert!(pc2.apply_overrides(&[("nope".to_string(), 1.0)].into()).is_err());
    }
}
