//! All studies of one running service, each backed by `<dir>/<id>.jsonl`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use crate::config::{Plan, StudyConfig};
use crate::error::StudyError;
use crate::store::{EventLog, StoreError};
use crate::study::Study;

pub struct Service {
    dir: Option<PathBuf>,
    studies: RwLock<BTreeMap<String, Arc<Study>>>,
}

/// What `Service::open` found on disk.
#[derive(Debug, Default)]
pub struct Recovery {
    pub studies: Vec<String>,
    /// Torn final records that were cut off, one per affected log.
    pub torn: Vec<StoreError>,
}

impl Service {
    /// A service that keeps nothing on disk.
    pub fn ephemeral() -> Service {
        Service { dir: None, studies: RwLock::new(BTreeMap::new()) }
    }

    /// Opens `dir`, replaying every study log in it. A torn final record
    /// is cut off and reported; any other corruption is an error.
    pub fn open(dir: impl AsRef<Path>) -> Result<(Service, Recovery), StudyError> {
        let dir = dir.as_ref();
        let io = |source| StudyError::Store(StoreError::Io { path: dir.display().to_string(), source });
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut studies = BTreeMap::new();
        let mut recovery = Recovery::default();
        for path in paths {
            let (log, records, torn) = EventLog::recover(&path)?;
            let study = Study::replay(&records, log)?;
            recovery.studies.push(study.id().to_string());
            recovery.torn.extend(torn);
            studies.insert(study.id().to_string(), Arc::new(study));
        }
        Ok((Service { dir: Some(dir.to_path_buf()), studies: RwLock::new(studies) }, recovery))
    }

    pub fn create_study(&self, config: StudyConfig) -> Result<Arc<Study>, StudyError> {
        // validate before touching the filesystem
        Plan::build(config.clone())?;
        let mut studies = self.studies.write().unwrap_or_else(|e| e.into_inner());
        if studies.contains_key(&config.id) {
            return Err(StudyError::StudyExists(config.id));
        }
        let log = match &self.dir {
            Some(dir) => {
                let path = dir.join(format!("{}.jsonl", config.id));
                if path.exists() {
                    return Err(StudyError::StudyExists(config.id));
                }
                EventLog::create(path)?
            }
            None => EventLog::ephemeral(),
        };
        let study = Arc::new(Study::create(config, log)?);
        studies.insert(study.id().to_string(), study.clone());
        Ok(study)
    }

    pub fn study(&self, id: &str) -> Result<Arc<Study>, StudyError> {
        let studies = self.studies.read().unwrap_or_else(|e| e.into_inner());
        studies.get(id).cloned().ok_or_else(|| StudyError::UnknownStudy(id.to_string()))
    }

    pub fn study_ids(&self) -> Vec<String> {
        self.studies.read().unwrap_or_else(|e| e.into_inner()).keys().cloned().collect()
    }

    /// Study owning a live session.
    pub fn study_of_session(&self, sid: &str) -> Result<Arc<Study>, StudyError> {
        let studies = self.studies.read().unwrap_or_else(|e| e.into_inner());
        studies
            .values()
            .find(|s| s.session(sid).is_ok())
            .cloned()
            .ok_or_else(|| StudyError::UnknownSession(sid.to_string()))
    }

    /// Deletes the key's data from every study it was registered in.
    /// Returns the number of annotations removed.
    pub fn delete_participant(&self, key: &str) -> Result<usize, StudyError> {
        let studies: Vec<Arc<Study>> =
            self.studies.read().unwrap_or_else(|e| e.into_inner()).values().cloned().collect();
        let mut found = false;
        let mut removed = 0;
        for s in studies {
            match s.delete_participant(key) {
                Ok(n) => {
                    found = true;
                    removed += n;
                }
                Err(StudyError::UnknownKey) => {}
                Err(e) => return Err(e),
            }
        }
        if found {
            Ok(removed)
        } else {
            Err(StudyError::UnknownKey)
        }
    }

    /// Closes every log; later writes fail.
    pub fn close(&self) {
        for s in self.studies.read().unwrap_or_else(|e| e.into_inner()).values() {
            s.close();
        }
    }
}
