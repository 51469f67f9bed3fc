//! Accounts, sign-in sessions, password lifecycle and menus.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use parking_lot::{Mutex, RwLock};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::error::{Error, Result};
use crate::password;
use crate::permissions::Permissions;
use crate::session::{Locale, Session};
use crate::storage::{format_time, Criterion, EntityId, Gateway, Mutation, Value};

pub const PASSWORD_MIN: usize = 8;
pub const PASSWORD_MAX: usize = 32;

#[derive(Debug, Clone)]
pub struct AuthConfig {
    pub session_idle: Duration,
    pub pending_ttl: Duration,
    pub reset_ttl: Duration,
    pub challenge_ttl: Duration,
    pub outbox: PathBuf,
}

impl Default for AuthConfig {
    fn default() -> Self {
        AuthConfig {
            session_idle: Duration::minutes(30),
            pending_ttl: Duration::minutes(5),
            reset_ttl: Duration::minutes(15),
            challenge_ttl: Duration::minutes(10),
            outbox: PathBuf::from("var/outbox.jsonl"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MenuEntry {
    #[serde(rename = "MenuId")]
    pub id: u32,
    #[serde(rename = "MenuName")]
    pub name: &'static str,
    #[serde(rename = "MenuAddress")]
    pub address: &'static str,
    /// Governing permission; `None` means every signed-in user.
    pub permission: Option<&'static str>,
}

const fn menu(
    id: u32,
    name: &'static str,
    address: &'static str,
    permission: Option<&'static str>,
) -> MenuEntry {
    MenuEntry {
        id,
        name,
        address,
        permission,
    }
}

pub const MENU: &[MenuEntry] = &[
    menu(1, "My Account", "/account", None),
    menu(2, "Submit General Request", "/requests/general", None),
    menu(3, "Submit Specific Request", "/requests/specific", None),
    menu(4, "Search Requests", "/requests", None),
    menu(5, "Close Request", "/requests/{id}/close", Some("request.close")),
    menu(6, "Approve Request", "/requests/{id}/approve", Some("request.approve")),
    menu(7, "Add Asset", "/assets", Some("asset.add")),
    menu(8, "Search Assets", "/assets", Some("asset.search")),
    menu(9, "Asset Reports", "/assets/report", Some("asset.search")),
    menu(10, "Create Group", "/groups", Some("group.create")),
    menu(11, "View/Update/Delete Group", "/groups/{id}", Some("group.edit")),
    menu(12, "Add Building", "/buildings", Some("location.add")),
    menu(13, "Add Location", "/locations", Some("location.add")),
    menu(14, "Search Locations", "/locations", None),
    menu(15, "Add Software", "/software", Some("software.add")),
    menu(16, "Search Software", "/software", None),
    menu(17, "Licenses Near Expiry", "/licenses/expiring", Some("software.edit")),
    menu(18, "System Admin", "/admin/roles/{id}/grants", Some("admin.permissions")),
    menu(19, "Log Out", "/auth/logout", None),
];

#[derive(Debug, Clone, Serialize)]
pub struct DepartmentChoice {
    #[serde(rename = "DepartmentID")]
    pub id: EntityId,
    #[serde(rename = "DepartmentName")]
    pub name: String,
}

#[derive(Debug, Clone)]
pub enum LoginOutcome {
    Session(Session),
    /// The user belongs to several departments and must pick one.
    Pending {
        pending_token: String,
        departments: Vec<DepartmentChoice>,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct Challenge {
    pub challenge_id: String,
    pub question: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Account {
    #[serde(rename = "UserID")]
    pub user_id: EntityId,
    #[serde(rename = "UserName")]
    pub user_name: String,
    #[serde(rename = "FirstName")]
    pub first_name: Option<String>,
    #[serde(rename = "LastName")]
    pub last_name: Option<String>,
    #[serde(rename = "Email")]
    pub email: Option<String>,
    #[serde(rename = "RoleName")]
    pub role_name: Option<String>,
    #[serde(rename = "Level")]
    pub level: u8,
    pub departments: Vec<DepartmentChoice>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountChanges {
    #[serde(rename = "FirstName")]
    pub first_name: Option<String>,
    #[serde(rename = "LastName")]
    pub last_name: Option<String>,
    #[serde(rename = "Email")]
    pub email: Option<String>,
}

struct OpenSession {
    user: EntityId,
    department: Option<EntityId>,
    log: EntityId,
    last_seen: DateTime<Utc>,
    confirm: Option<String>,
    locale: Locale,
}

struct PendingLogin {
    user: EntityId,
    log: EntityId,
    created: DateTime<Utc>,
    departments: Vec<EntityId>,
}

pub struct Auth {
    store: Arc<dyn Gateway>,
    perms: Arc<Permissions>,
    clock: Arc<dyn Clock>,
    cfg: AuthConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<OpenSession>>>>,
    pending: Mutex<HashMap<String, PendingLogin>>,
    challenges: Mutex<HashMap<String, (i64, DateTime<Utc>)>>,
    outbox_lock: Mutex<()>,
    dummy_digest: std::sync::OnceLock<String>,
}

fn email_ok(s: &str) -> bool {
    let mut parts = s.split('@');
    matches!(
        (parts.next(), parts.next(), parts.next()),
        (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty()
    )
}

impl Auth {
    pub fn new(
        store: Arc<dyn Gateway>,
        perms: Arc<Permissions>,
        clock: Arc<dyn Clock>,
        cfg: AuthConfig,
    ) -> Self {
        Auth {
            store,
            perms,
            clock,
            cfg,
            sessions: RwLock::new(HashMap::new()),
            pending: Mutex::new(HashMap::new()),
            challenges: Mutex::new(HashMap::new()),
            outbox_lock: Mutex::new(()),
            dummy_digest: std::sync::OnceLock::new(),
        }
    }

    pub fn config(&self) -> &AuthConfig {
        &self.cfg
    }

    fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    fn memberships(&self, user: EntityId) -> Result<Vec<EntityId>> {
        Ok(self
            .store
            .scan("UserIsInDepartment", vec![Criterion::eq("UserID", user)])?
            .iter()
            .filter_map(|m| m.id_of("DepartmentID"))
            .collect())
    }

    fn department_choices(&self, ids: &[EntityId]) -> Result<Vec<DepartmentChoice>> {
        ids.iter()
            .map(|id| {
                let d = self.store.fetch("Department", *id)?;
                Ok(DepartmentChoice {
                    id: *id,
                    name: d.str("DepartmentName").to_string(),
                })
            })
            .collect()
    }

    fn close_log(&self, log: EntityId) -> Result<()> {
        self.store.apply(vec![
            Mutation::update("Log", log).set("LogoutDate", self.now())
        ])?;
        Ok(())
    }

    pub fn login(&self, username: &str, pass: &str) -> Result<LoginOutcome> {
        if username.is_empty() {
            return Err(Error::MissingField("UserName".into()));
        }
        if pass.is_empty() {
            return Err(Error::MissingField("Password".into()));
        }
        let user = self
            .store
            .scan("User", vec![Criterion::eq("UserName", username)])?
            .into_iter()
            .next();
        let Some(user) = user else {
            // same work as a real check
            password::verify(pass, self.dummy_digest.get_or_init(|| password::hash("not a real password")));
            return Err(Error::BadCredentials);
        };
        if !password::verify(pass, user.str("Password")) {
            return Err(Error::BadCredentials);
        }
        let depts = self.memberships(user.id)?;
        let log = self.store.apply(vec![Mutation::insert("Log")
            .set("UserID", user.id)
            .set("LoginDate", self.now())])?[0];
        if depts.len() > 1 {
            let token = password::random_token();
            let choices = self.department_choices(&depts)?;
            self.pending.lock().insert(
                token.clone(),
                PendingLogin {
                    user: user.id,
                    log,
                    created: self.now(),
                    departments: depts,
                },
            );
            return Ok(LoginOutcome::Pending {
                pending_token: token,
                departments: choices,
            });
        }
        let token = self.open(user.id, depts.first().copied(), log);
        self.session(&token).map(LoginOutcome::Session)
    }

    fn open(&self, user: EntityId, department: Option<EntityId>, log: EntityId) -> String {
        let token = password::random_token();
        self.sessions.write().insert(
            token.clone(),
            Arc::new(Mutex::new(OpenSession {
                user,
                department,
                log,
                last_seen: self.now(),
                confirm: None,
                locale: Locale::default(),
            })),
        );
        token
    }

    pub fn choose_department(&self, pending_token: &str, dept: EntityId) -> Result<Session> {
        let mut pending = self.pending.lock();
        let p = pending.get(pending_token).ok_or(Error::UnknownSession)?;
        if self.now() - p.created > self.cfg.pending_ttl {
            let p = pending.remove(pending_token).expect("present");
            drop(pending);
            self.close_log(p.log)?;
            return Err(Error::ExpiredPending);
        }
        if !p.departments.contains(&dept) {
            return Err(Error::NotAMember);
        }
        let p = pending.remove(pending_token).expect("present");
        drop(pending);
        let token = self.open(p.user, Some(dept), p.log);
        self.session(&token)
    }

    fn handle(&self, token: &str) -> Result<Arc<Mutex<OpenSession>>> {
        self.sessions
            .read()
            .get(token)
            .cloned()
            .ok_or(Error::UnknownSession)
    }

    fn expire(&self, token: &str) -> Result<()> {
        let removed = self.sessions.write().remove(token);
        if let Some(s) = removed {
            let log = s.lock().log;
            self.close_log(log)?;
        }
        Ok(())
    }

    /// Resolves a token, sliding its idle timeout.
    pub fn session(&self, token: &str) -> Result<Session> {
        let handle = self.handle(token)?;
        let (user, department, locale) = {
            let mut s = handle.lock();
            let now = self.now();
            if now - s.last_seen > self.cfg.session_idle {
                drop(s);
                self.expire(token)?;
                return Err(Error::UnknownSession);
            }
            s.last_seen = now;
            (s.user, s.department, s.locale)
        };
        let u = self.store.fetch("User", user)?;
        let role_id = u.id_of("RoleID").unwrap_or(EntityId(0));
        let level = self
            .store
            .get("Role", role_id)?
            .and_then(|r| r.int("Level"))
            .unwrap_or(0)
            .clamp(0, 3) as u8;
        let mut faculty_id = None;
        let mut faculty_name = None;
        if let Some(d) = department {
            if let Some(dep) = self.store.get("Department", d)? {
                faculty_id = dep.id_of("FacultyID");
                if let Some(f) = faculty_id {
                    faculty_name = self
                        .store
                        .get("Faculty", f)?
                        .map(|f| f.str("FacultyName").to_string());
                }
            }
        }
        Ok(Session {
            token: token.to_string(),
            user_id: user,
            user_name: u.str("UserName").to_string(),
            role_id,
            level,
            department_id: department,
            faculty_id,
            faculty_name,
            locale,
        })
    }

    pub fn set_locale(&self, session: &Session, locale: Locale) -> Result<()> {
        self.handle(&session.token)?.lock().locale = locale;
        Ok(())
    }

    /// First logout phase: returns the token that confirms it.
    pub fn logout(&self, session: &Session) -> Result<String> {
        let handle = self.handle(&session.token)?;
        let confirm = password::random_token();
        handle.lock().confirm = Some(confirm.clone());
        Ok(confirm)
    }

    /// Second logout phase; ends the session.
    pub fn confirm_logout(&self, token: &str, confirm: &str) -> Result<()> {
        let handle = self.handle(token)?;
        let ok = handle.lock().confirm.as_deref() == Some(confirm);
        if !ok {
            return Err(Error::UnknownSession);
        }
        self.expire(token)
    }

    pub fn open_sessions(&self) -> usize {
        self.sessions.read().len()
    }

    pub fn change_password(
        &self,
        session: &Session,
        old: &str,
        new1: &str,
        new2: &str,
    ) -> Result<()> {
        let u = self.store.fetch("User", session.user_id)?;
        if !password::verify(old, u.str("Password")) {
            return Err(Error::OldPasswordWrong);
        }
        if new1 != new2 {
            return Err(Error::Mismatch);
        }
        check_policy(new1)?;
        self.store.apply(vec![Mutation::update("User", u.id)
            .set("Password", password::hash(new1))
            .expect_version(u.version)])?;
        Ok(())
    }

    /// Issues a small arithmetic challenge, valid once.
    pub fn issue_challenge(&self) -> Challenge {
        let mut rng = rand::thread_rng();
        let (a, b): (i64, i64) = (rng.gen_range(1..=9), rng.gen_range(1..=9));
        let id = password::random_token();
        let now = self.now();
        let mut map = self.challenges.lock();
        map.retain(|_, (_, at)| now - *at <= self.cfg.challenge_ttl);
        map.insert(id.clone(), (a + b, now));
        Challenge {
            challenge_id: id,
            question: format!("{a} + {b}"),
        }
    }

    /// Answer for an outstanding challenge; lets tests and tooling script the flow.
    pub fn challenge_answer(&self, id: &str) -> Option<i64> {
        self.challenges.lock().get(id).map(|(a, _)| *a)
    }

    fn take_challenge(&self, id: &str, answer: &str) -> Result<()> {
        let entry = self.challenges.lock().remove(id);
        match entry {
            Some((expected, at))
                if self.now() - at <= self.cfg.challenge_ttl
                    && answer.trim().parse::<i64>().ok() == Some(expected) =>
            {
                Ok(())
            }
            _ => Err(Error::ChallengeFailed),
        }
    }

    /// Records and mails a reset token when the user exists. The reply is
    /// the same either way.
    pub fn reset_password(&self, username: &str, challenge_id: &str, answer: &str) -> Result<()> {
        self.take_challenge(challenge_id, answer)?;
        let Some(user) = self
            .store
            .scan("User", vec![Criterion::eq("UserName", username)])?
            .into_iter()
            .next()
        else {
            return Ok(());
        };
        let token = password::random_token();
        let now = self.now();
        self.store.apply(vec![Mutation::insert("ResetToken")
            .set("UserID", user.id)
            .set("TokenHash", password::token_fingerprint(&token))
            .set("IssuedAt", now)])?;
        let to = user
            .text("Email")
            .unwrap_or(user.str("UserName"))
            .to_string();
        let line = serde_json::json!({
            "to": to,
            "subject": "UUIS password reset",
            "token": token,
            "issued_at": format_time(&now),
        });
        let _g = self.outbox_lock.lock();
        if let Some(dir) = self.cfg.outbox.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.cfg.outbox)?;
        writeln!(f, "{line}")?;
        Ok(())
    }

    /// Redeems a mailed reset token.
    pub fn complete_reset(&self, token: &str, new1: &str, new2: &str) -> Result<()> {
        let invalid = || Error::invalid("token", "invalid or expired reset token");
        let rows = self.store.scan(
            "ResetToken",
            vec![Criterion::eq(
                "TokenHash",
                password::token_fingerprint(token),
            )],
        )?;
        let row = rows.first().ok_or_else(invalid)?;
        let issued = row.get("IssuedAt").as_time().ok_or_else(invalid)?;
        if row.bool("Used") == Some(true) || self.now() - issued > self.cfg.reset_ttl {
            return Err(invalid());
        }
        if new1 != new2 {
            return Err(Error::Mismatch);
        }
        check_policy(new1)?;
        let user = row.id_of("UserID").ok_or_else(invalid)?;
        self.store.apply(vec![
            Mutation::update("ResetToken", row.id)
                .set("Used", true)
                .expect_version(row.version),
            Mutation::update("User", user).set("Password", password::hash(new1)),
        ])?;
        Ok(())
    }

    pub fn view_account(&self, session: &Session) -> Result<Account> {
        self.handle(&session.token)?;
        let u = self.store.fetch("User", session.user_id)?;
        let role = self.store.get("Role", session.role_id)?;
        let depts = self.memberships(u.id)?;
        Ok(Account {
            user_id: u.id,
            user_name: u.str("UserName").to_string(),
            first_name: u.text("FirstName").map(str::to_string),
            last_name: u.text("LastName").map(str::to_string),
            email: u.text("Email").map(str::to_string),
            role_name: role.and_then(|r| r.text("RoleName").map(str::to_string)),
            level: session.level,
            departments: self.department_choices(&depts)?,
        })
    }

    /// Changes only the named personal fields; an empty string clears one.
    pub fn update_account(&self, session: &Session, changes: &AccountChanges) -> Result<Account> {
        self.handle(&session.token)?;
        let mut m = Mutation::update("User", session.user_id);
        for (field, v) in [
            ("FirstName", &changes.first_name),
            ("LastName", &changes.last_name),
            ("Email", &changes.email),
        ] {
            let Some(v) = v else { continue };
            if v.chars().count() > 64 {
                return Err(Error::FieldTooLong {
                    field: field.into(),
                    max: 64,
                });
            }
            if field == "Email" && !v.is_empty() && !email_ok(v) {
                return Err(Error::InvalidEmail);
            }
            let value = if v.is_empty() {
                Value::Null
            } else {
                Value::from(v.as_str())
            };
            m = m.set(field, value);
        }
        if !m.values.is_empty() {
            self.store.apply(vec![m])?;
        }
        self.view_account(session)
    }

    pub fn list_menu(&self, session: &Session) -> Result<Vec<MenuEntry>> {
        self.handle(&session.token)?;
        let mut out = Vec::new();
        for e in MENU {
            let allowed = match e.permission {
                None => true,
                Some(p) => self.perms.verify(session, p)?,
            };
            if allowed {
                out.push(*e);
            }
        }
        Ok(out)
    }
}

fn check_policy(p: &str) -> Result<()> {
    let n = p.chars().count();
    if n < PASSWORD_MIN {
        return Err(Error::PolicyViolation(format!(
            "at least {PASSWORD_MIN} characters"
        )));
    }
    if n > PASSWORD_MAX {
        return Err(Error::PolicyViolation(format!(
            "at most {PASSWORD_MAX} characters"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn email_shape() {
        assert!(email_ok("x@y.z"));
        assert!(!email_ok("notanemail"));
        assert!(!email_ok("@y"));
        assert!(!email_ok("a@"));
        assert!(!email_ok("a@b@c"));
    }

    #[test]
    fn policy_bounds() {
        assert!(check_policy("a").is_err());
        assert!(check_policy("12345678").is_ok());
        assert!(check_policy(&"x".repeat(32)).is_ok());
        assert!(check_policy(&"x".repeat(33)).is_err());
    }

    #[test]
    fn menu_ids_unique() {
        let mut ids: Vec<u32> = MENU.iter().map(|m| m.id).collect();
        ids.dedup();
        assert_eq!(ids.len(), MENU.len());
    }
}
