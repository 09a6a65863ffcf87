//! Append-only JSONL store of accounts and login attempts.
//!
//! Each line is one record tagged by `kind`. Accounts are indexed in memory on
//! open; attempts are only appended. Recordings never reach this file: the
//! server only ever handles them encrypted and does not persist them at all.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::{ProtocolError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub username: String,
    /// Argon2id PHC string.
    pub password_digest: String,
    /// Base64 device public key.
    pub phone_pubkey: String,
    /// Base64 seed for fallback codes.
    pub fallback_secret: String,
    pub enrolled_at: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub addr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_agent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub username: String,
    pub timestamp: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default)]
    pub client: ClientMeta,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Account(UserAccount),
    Attempt(AttemptRecord),
}

#[derive(Debug)]
pub struct Store {
    path: Option<PathBuf>,
    accounts: RwLock<HashMap<String, UserAccount>>,
    attempts: Mutex<Vec<AttemptRecord>>,
    log: Mutex<Option<File>>,
}

impl Store {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            accounts: RwLock::default(),
            attempts: Mutex::default(),
            log: Mutex::new(None),
        }
    }

    /// Opens or creates the log at `path` and replays it.
    ///
    /// A final line without a newline is a torn write and is dropped; any
    /// other unparsable line is an error.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut accounts = HashMap::new();
        let mut attempts = Vec::new();
        let mut good_len = 0u64;
        if path.exists() {
            let mut reader = BufReader::new(File::open(&path)?);
            let mut line = String::new();
            let mut lineno = 0;
            loop {
                line.clear();
                let n = reader.read_line(&mut line)?;
                if n == 0 {
                    break;
                }
                lineno += 1;
                let terminated = line.ends_with('\n');
                match serde_json::from_str::<Record>(line.trim_end()) {
                    Ok(Record::Account(a)) => {
                        accounts.insert(a.username.clone(), a);
                    }
                    Ok(Record::Attempt(a)) => attempts.push(a),
                    Err(_) if !terminated => break,
                    Err(_) if line.trim().is_empty() => {}
                    Err(e) => {
                        return Err(ProtocolError::Storage(format!(
                            "{}:{lineno}: {e}",
                            path.display()
                        )))
                    }
                }
                if terminated {
                    good_len += n as u64;
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .read(true)
            .write(true)
            .truncate(false)
            .open(&path)?;
        file.set_len(good_len)?;
        let mut file = file;
        std::io::Seek::seek(&mut file, std::io::SeekFrom::End(0))?;
        Ok(Self {
            path: Some(path),
            accounts: RwLock::new(accounts),
            attempts: Mutex::new(attempts),
            log: Mutex::new(Some(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn append(&self, record: &Record) -> Result<()> {
        let mut log = self.log.lock().unwrap();
        if let Some(file) = log.as_mut() {
            let mut line = serde_json::to_vec(record).expect("records always serialize");
            line.push(b'\n');
            file.write_all(&line)?;
            file.sync_data()?;
        }
        Ok(())
    }

    pub fn insert_account(&self, account: UserAccount) -> Result<()> {
        let mut accounts = self.accounts.write().unwrap();
        if accounts.contains_key(&account.username) {
            return Err(ProtocolError::UsernameTaken);
        }
        self.append(&Record::Account(account.clone()))?;
        accounts.insert(account.username.clone(), account);
        Ok(())
    }

    pub fn account(&self, username: &str) -> Option<UserAccount> {
        self.accounts.read().unwrap().get(username).cloned()
    }

    pub fn account_count(&self) -> usize {
        self.accounts.read().unwrap().len()
    }

    pub fn append_attempt(&self, attempt: AttemptRecord) -> Result<()> {
        let mut attempts = self.attempts.lock().unwrap();
        self.append(&Record::Attempt(attempt.clone()))?;
        attempts.push(attempt);
        Ok(())
    }

    pub fn attempts(&self) -> Vec<AttemptRecord> {
        self.attempts.lock().unwrap().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn account(name: &str) -> UserAccount {
        UserAccount {
            username: name.into(),
            password_digest: "$argon2id$x".into(),
            phone_pubkey: "AAAA".into(),
            fallback_secret: "BBBB".into(),
            enrolled_at: 5,
        }
    }

    fn attempt(outcome: &str) -> AttemptRecord {
        AttemptRecord {
            username: "alice".into(),
            timestamp: 10,
            session_id: Some("s".into()),
            outcome: outcome.into(),
            reason: None,
            score: Some(0.25),
            client: ClientMeta {
                addr: Some("127.0.0.1".into()),
                user_agent: None,
            },
        }
    }

    #[test]
    fn duplicate_username() {
        let s = Store::in_memory();
        s.insert_account(account("alice")).unwrap();
        assert_eq!(
            s.insert_account(account("alice")),
            Err(ProtocolError::UsernameTaken)
        );
        assert_eq!(s.account_count(), 1);
    }

    #[test]
    fn reopen_replays_log() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        {
            let s = Store::open(&path).unwrap();
            s.insert_account(account("alice")).unwrap();
            s.append_attempt(attempt("ACCEPTED")).unwrap();
        }
        let s = Store::open(&path).unwrap();
        assert_eq!(s.account("alice"), Some(account("alice")));
        assert_eq!(s.attempts(), vec![attempt("ACCEPTED")]);
        assert_eq!(
            s.insert_account(account("alice")),
            Err(ProtocolError::UsernameTaken)
        );
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text
            .lines()
            .next()
            .unwrap()
            .starts_with(r#"{"kind":"account""#));
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        {
            let s = Store::open(&path).unwrap();
            s.insert_account(account("alice")).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"kind":"attempt","user"#).unwrap();
        drop(f);
        let s = Store::open(&path).unwrap();
        assert!(s.attempts().is_empty());
        s.append_attempt(attempt("REJECTED")).unwrap();
        drop(s);
        let s = Store::open(&path).unwrap();
        assert_eq!(s.attempts().len(), 1);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        std::fs::write(&path, "garbage\n{\"kind\":\"attempt\"}\n").unwrap();
        assert!(matches!(Store::open(&path), Err(ProtocolError::Storage(_))));
    }
}
