use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Team {
    pub team_id: String,
    pub display_name: String,
    pub token: String,
}

/// Registered teams, looked up by id or by token.
#[derive(Debug, Clone, Default)]
pub struct Teams {
    teams: Vec<Team>,
    by_id: HashMap<String, usize>,
    by_token: HashMap<String, usize>,
}

impl Teams {
    pub fn new(teams: Vec<Team>) -> Result<Self> {
        let mut by_id = HashMap::new();
        let mut by_token = HashMap::new();
        for (i, t) in teams.iter().enumerate() {
            if t.team_id.is_empty() || t.token.is_empty() {
                return Err(ServiceError::Config(format!(
                    "team {i} has an empty team_id or token"
                )));
            }
            if by_id.insert(t.team_id.clone(), i).is_some() {
                return Err(ServiceError::Config(format!(
                    "duplicate team_id {}",
                    t.team_id
                )));
            }
            if by_token.insert(t.token.clone(), i).is_some() {
                return Err(ServiceError::Config(format!(
                    "team {} reuses another team's token",
                    t.team_id
                )));
            }
        }
        Ok(Self {
            teams,
            by_id,
            by_token,
        })
    }

    /// Reads a JSON array of `{team_id, display_name, token}`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        let teams: Vec<Team> = serde_json::from_str(&text)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::new(teams)
    }

    pub fn by_id(&self, team_id: &str) -> Option<&Team> {
        self.by_id.get(team_id).map(|&i| &self.teams[i])
    }

    pub fn by_token(&self, token: &str) -> Option<&Team> {
        self.by_token.get(token).map(|&i| &self.teams[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Team> {
        self.teams.iter()
    }

    pub fn len(&self) -> usize {
        self.teams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.teams.is_empty()
    }
}
