//! Submission intake, history and leaderboard, independent of HTTP.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use paveval_core::dataset::parse_submission;
use paveval_core::scoring::DEFAULT_IOU_THRESHOLD;
use paveval_core::{evaluate, Dataset};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::store::{LoggedSubmission, Store};
use crate::teams::Teams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub submission_id: u64,
    pub team_id: String,
    pub received_at: DateTime<Utc>,
    pub mean_f1: f64,
    pub per_class_f1: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub team_id: String,
    pub display_name: String,
    pub mean_f1: f64,
    /// Submission that first reached this score.
    pub submission_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub submission_id: u64,
    pub mean_f1: f64,
    pub per_class_f1: BTreeMap<String, f64>,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy)]
struct Best {
    mean_f1: f64,
    submission_id: u64,
}

#[derive(Debug, Default)]
struct State {
    history: Vec<SubmissionRecord>,
    best: HashMap<String, Best>,
    next_id: u64,
}

impl State {
    fn apply(&mut self, r: SubmissionRecord) {
        // a tie does not displace the earlier submission
        let better = self
            .best
            .get(&r.team_id)
            .is_none_or(|b| r.mean_f1.total_cmp(&b.mean_f1).is_gt());
        if better {
            self.best.insert(
                r.team_id.clone(),
                Best {
                    mean_f1: r.mean_f1,
                    submission_id: r.submission_id,
                },
            );
        }
        self.next_id = r.submission_id + 1;
        self.history.push(r);
    }

    fn ranking(&self) -> Vec<(&str, Best)> {
        let mut v: Vec<(&str, Best)> = self.best.iter().map(|(t, b)| (t.as_str(), *b)).collect();
        v.sort_by(|a, b| {
            b.1.mean_f1
                .total_cmp(&a.1.mean_f1)
                .then(a.1.submission_id.cmp(&b.1.submission_id))
        });
        v
    }

    fn rank_of(&self, team_id: &str) -> usize {
        self.ranking()
            .iter()
            .position(|(t, _)| *t == team_id)
            .map_or(0, |i| i + 1)
    }
}

/// The competition platform. Scoring runs outside any lock; assigning the id,
/// persisting and updating the leaderboard happen in one critical section.
#[derive(Debug)]
pub struct Platform {
    ground_truth: Option<Dataset>,
    teams: Teams,
    store: Option<Mutex<Store>>,
    state: RwLock<State>,
}

impl Platform {
    /// A platform that keeps history in memory only.
    pub fn in_memory(teams: Teams, ground_truth: Option<Dataset>) -> Self {
        Self {
            ground_truth,
            teams,
            store: None,
            state: RwLock::new(State {
                next_id: 1,
                ..State::default()
            }),
        }
    }

    /// A platform persisting to `data_dir`, replaying any existing log.
    pub fn open(teams: Teams, ground_truth: Option<Dataset>, data_dir: &Path) -> Result<Self> {
        let (store, logged) = Store::open(data_dir)?;
        let mut state = State {
            next_id: 1,
            ..State::default()
        };
        for entry in logged {
            state.apply(entry.record);
        }
        tracing::info!(submissions = state.history.len(), "replayed submission log");
        Ok(Self {
            ground_truth,
            teams,
            store: Some(Mutex::new(store)),
            state: RwLock::new(state),
        })
    }

    pub fn teams(&self) -> &Teams {
        &self.teams
    }

    pub fn ground_truth(&self) -> Option<&Dataset> {
        self.ground_truth.as_ref()
    }

    /// Scores a submission body for the team holding `token`.
    pub fn submit(&self, token: &str, body: &[u8]) -> Result<SubmitResponse> {
        let team = self
            .teams
            .by_token(token)
            .ok_or(ServiceError::Unauthorized)?;
        let gt = self
            .ground_truth
            .as_ref()
            .ok_or(ServiceError::GroundTruthUnavailable)?;
        let text = std::str::from_utf8(body).map_err(|e| {
            ServiceError::BadSubmission(paveval_core::Error::Parse {
                source_name: "submission".into(),
                line: None,
                message: format!("body is not UTF-8: {e}"),
            })
        })?;
        let preds = parse_submission(text)?;
        let report = evaluate(gt, &preds, DEFAULT_IOU_THRESHOLD)?;
        let hash = match &self.store {
            Some(s) => Some(s.lock().expect("store lock").put_body(body)?),
            None => None,
        };
        self.commit(&team.team_id, report.mean_f1, report.per_class_f1(), hash)
    }

    /// Records a score without a body. Used to load historical results.
    pub fn record_score(
        &self,
        team_id: &str,
        mean_f1: f64,
        per_class_f1: BTreeMap<String, f64>,
    ) -> Result<SubmitResponse> {
        if self.teams.by_id(team_id).is_none() {
            return Err(ServiceError::UnknownTeam(team_id.to_string()));
        }
        if !(0.0..=1.0).contains(&mean_f1) {
            return Err(ServiceError::BadSubmission(
                paveval_core::Error::Validation(format!("mean_f1 {mean_f1} outside [0, 1]")),
            ));
        }
        self.commit(team_id, mean_f1, per_class_f1, None)
    }

    fn commit(
        &self,
        team_id: &str,
        mean_f1: f64,
        per_class_f1: BTreeMap<String, f64>,
        body_sha256: Option<String>,
    ) -> Result<SubmitResponse> {
        let mut state = self.state.write().expect("state lock");
        let record = SubmissionRecord {
            submission_id: state.next_id,
            team_id: team_id.to_string(),
            received_at: Utc::now(),
            mean_f1,
            per_class_f1,
        };
        if let Some(store) = &self.store {
            store
                .lock()
                .expect("store lock")
                .append(&LoggedSubmission {
                    record: record.clone(),
                    body_sha256,
                })?;
        }
        let response = SubmitResponse {
            submission_id: record.submission_id,
            mean_f1: record.mean_f1,
            per_class_f1: record.per_class_f1.clone(),
            rank: 0,
        };
        state.apply(record);
        Ok(SubmitResponse {
            rank: state.rank_of(team_id),
            ..response
        })
    }

    pub fn leaderboard(&self) -> Vec<LeaderboardEntry> {
        let state = self.state.read().expect("state lock");
        state
            .ranking()
            .into_iter()
            .enumerate()
            .map(|(i, (team_id, best))| LeaderboardEntry {
                rank: i + 1,
                team_id: team_id.to_string(),
                display_name: self
                    .teams
                    .by_id(team_id)
                    .map_or_else(|| team_id.to_string(), |t| t.display_name.clone()),
                mean_f1: best.mean_f1,
                submission_id: best.submission_id,
            })
            .collect()
    }

    /// Chronological submissions of a registered team.
    pub fn history(&self, team_id: &str) -> Result<Vec<SubmissionRecord>> {
        if self.teams.by_id(team_id).is_none() {
            return Err(ServiceError::UnknownTeam(team_id.to_string()));
        }
        let state = self.state.read().expect("state lock");
        Ok(state
            .history
            .iter()
            .filter(|r| r.team_id == team_id)
            .cloned()
            .collect())
    }

    pub fn submission_count(&self) -> usize {
        self.state.read().expect("state lock").history.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teams::Team;
    use paveval_core::dataset::write_ground_truth;
    use paveval_core::{Annotation, BBox, DistressClass, ImageRecord};

    fn teams(n: usize) -> Teams {
        Teams::new(
            (0..n)
                .map(|i| Team {
                    team_id: format!("t{i}"),
                    display_name: format!("Team {i}"),
                    token: format!("secret{i}"),
                })
                .collect(),
        )
        .unwrap()
    }

    fn gt() -> Dataset {
        Dataset::new(vec![ImageRecord::new(
            "img",
            100,
            100,
            vec![
                Annotation::new(
                    BBox::new(0.0, 0.0, 10.0, 10.0).unwrap(),
                    DistressClass::Block,
                ),
                Annotation::new(
                    BBox::new(50.0, 50.0, 70.0, 70.0).unwrap(),
                    DistressClass::Manhole,
                ),
            ],
        )
        .unwrap()])
        .unwrap()
    }

    #[test]
    fn perfect_and_empty() {
        let p = Platform::in_memory(teams(2), Some(gt()));
        let body = write_ground_truth(&gt()).replace("\"bbox\"", "\"score\": 1.0, \"bbox\"");
        let r = p.submit("secret0", body.as_bytes()).unwrap();
        assert_eq!((r.mean_f1, r.rank, r.submission_id), (1.0, 1, 1));
        let r = p.submit("secret1", b"[]").unwrap();
        assert_eq!((r.mean_f1, r.rank, r.submission_id), (0.0, 2, 2));
        assert!(matches!(
            p.submit("bad", b"[]"),
            Err(ServiceError::Unauthorized)
        ));
        assert_eq!(p.submission_count(), 2);
    }

    #[test]
    fn error_kinds() {
        let p = Platform::in_memory(teams(1), Some(gt()));
        let unknown = br#"[{"image_id":"zzz","category_id":1,"bbox":[0,0,1,1],"score":0.5}]"#;
        assert!(
            matches!(p.submit("secret0", unknown), Err(ServiceError::UnknownImages(ids)) if ids == ["zzz"])
        );
        let bad = br#"[{"image_id":"img","category_id":9,"bbox":[0,0,1,1],"score":0.5}]"#;
        assert!(matches!(
            p.submit("secret0", bad),
            Err(ServiceError::BadSubmission(paveval_core::Error::Schema { path, .. })) if path == "[0].category_id"
        ));
        let no_gt = Platform::in_memory(teams(1), None);
        assert!(matches!(
            no_gt.submit("secret0", b"[]"),
            Err(ServiceError::GroundTruthUnavailable)
        ));
        assert_eq!(p.submission_count(), 0);
    }

    #[test]
    fn best_not_latest_and_ties() {
        let p = Platform::in_memory(teams(3), None);
        assert!(p.leaderboard().is_empty());
        p.record_score("t0", 0.5, BTreeMap::new()).unwrap();
        p.record_score("t0", 0.4, BTreeMap::new()).unwrap();
        p.record_score("t1", 0.5, BTreeMap::new()).unwrap();
        let r = p.record_score("t2", 0.6, BTreeMap::new()).unwrap();
        assert_eq!(r.rank, 1);
        let lb = p.leaderboard();
        let order: Vec<(&str, f64, usize)> = lb
            .iter()
            .map(|e| (e.team_id.as_str(), e.mean_f1, e.rank))
            .collect();
        assert_eq!(order, [("t2", 0.6, 1), ("t0", 0.5, 2), ("t1", 0.5, 3)]);
        // equal rescore keeps the original achievement
        p.record_score("t0", 0.5, BTreeMap::new()).unwrap();
        assert_eq!(p.leaderboard()[1].submission_id, 1);
        assert_eq!(p.history("t0").unwrap().len(), 3);
        assert!(matches!(
            p.history("nobody"),
            Err(ServiceError::UnknownTeam(_))
        ));
    }

    #[test]
    fn replay_reproduces_state() {
        let dir = tempfile::tempdir().unwrap();
        let p = Platform::open(teams(3), Some(gt()), dir.path()).unwrap();
        p.submit("secret1", b"[]").unwrap();
        p.record_score("t0", 0.3, BTreeMap::from([("Block".into(), 0.3)]))
            .unwrap();
        p.record_score("t2", 0.7, BTreeMap::new()).unwrap();
        let (lb, h) = (p.leaderboard(), p.history("t0").unwrap());
        drop(p);
        let q = Platform::open(teams(3), Some(gt()), dir.path()).unwrap();
        assert_eq!(q.leaderboard(), lb);
        assert_eq!(q.history("t0").unwrap(), h);
        assert_eq!(
            q.record_score("t1", 0.1, BTreeMap::new())
                .unwrap()
                .submission_id,
            4
        );
    }
}
