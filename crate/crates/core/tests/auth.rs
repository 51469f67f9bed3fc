mod support;

use std::sync::Arc;

use chrono::{Duration, TimeZone, Utc};
use uuis_core::auth::{AccountChanges, AuthConfig, LoginOutcome, MENU};
use uuis_core::clock::ManualClock;
use uuis_core::error::Error;
use uuis_core::session::Locale;
use uuis_core::storage::{Criterion, EntityId, MemoryStore};
use uuis_core::Uuis;

use support::{demo_path, login};

struct Rig {
    u: Uuis,
    clock: Arc<ManualClock>,
    _dir: tempfile::TempDir,
    outbox: std::path::PathBuf,
}

fn rig() -> Rig {
    let dir = tempfile::tempdir().unwrap();
    let outbox = dir.path().join("outbox.jsonl");
    let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2012, 3, 1, 9, 0, 0).unwrap()));
    let cfg = AuthConfig {
        outbox: outbox.clone(),
        ..AuthConfig::default()
    };
    let u = Uuis::new(Arc::new(MemoryStore::new()), clock.clone(), cfg);
    u.seed(&demo_path()).unwrap();
    Rig {
        u,
        clock,
        _dir: dir,
        outbox,
    }
}

#[test]
fn login_script() {
    let r = rig();
    let a = &r.u.auth;
    assert!(matches!(a.login("test1", ""), Err(Error::MissingField(f)) if f == "Password"));
    assert!(matches!(a.login("", "test1pass"), Err(Error::MissingField(f)) if f == "UserName"));
    assert!(matches!(a.login("test1", "wrong"), Err(Error::BadCredentials)));
    assert!(matches!(a.login("wrong", "test1pass"), Err(Error::BadCredentials)));
    let s = match a.login("test1", "test1pass").unwrap() {
        LoginOutcome::Session(s) => s,
        other => panic!("{other:?}"),
    };
    let menu: Vec<&str> = a.list_menu(&s).unwrap().iter().map(|m| m.name).collect();
    assert!(menu.contains(&"Log Out"));
    assert!(!menu.contains(&"Add Asset"));
    let logs = r.u.store.scan("Log", vec![Criterion::eq("UserID", s.user_id)]).unwrap();
    assert_eq!(logs.len(), 1);
}

#[test]
fn menu_follows_grants() {
    let r = rig();
    for (name, pass) in [("test1", "test1pass"), ("role2", "role2pass"), ("a_khan", "wemooki")] {
        let s = login(&r.u, name, pass);
        let got = r.u.auth.list_menu(&s).unwrap();
        let want: Vec<_> = MENU
            .iter()
            .filter(|m| m.permission.map_or(true, |p| r.u.perms.role_allows(s.role_id, p).unwrap()))
            .copied()
            .collect();
        assert_eq!(got, want, "{name}");
    }
}

#[test]
fn multi_department_login_needs_a_choice() {
    let r = rig();
    let a = &r.u.auth;
    let (token, depts) = match a.login("multi", "multipass").unwrap() {
        LoginOutcome::Pending {
            pending_token,
            departments,
        } => (pending_token, departments),
        other => panic!("{other:?}"),
    };
    assert_eq!(depts.len(), 2);
    assert!(matches!(a.choose_department(&token, EntityId(5)), Err(Error::NotAMember)));
    let s = a.choose_department(&token, depts[1].id).unwrap();
    assert_eq!(s.department_id, Some(depts[1].id));
    assert_eq!(s.faculty_name.as_deref(), Some("ENCS"));

    let token = match a.login("multi", "multipass").unwrap() {
        LoginOutcome::Pending { pending_token, .. } => pending_token,
        other => panic!("{other:?}"),
    };
    r.clock.advance(Duration::minutes(6));
    assert!(matches!(a.choose_department(&token, depts[0].id), Err(Error::ExpiredPending)));
}

#[test]
fn logout_confirm_and_return() {
    let r = rig();
    let a = &r.u.auth;
    let s = login(&r.u, "test1", "test1pass");
    let confirm = a.logout(&s).unwrap();
    // "Return": the session is still usable
    a.session(&s.token).unwrap();
    assert!(matches!(a.confirm_logout(&s.token, "nope"), Err(Error::UnknownSession)));
    a.session(&s.token).unwrap();
    a.confirm_logout(&s.token, &confirm).unwrap();
    assert!(matches!(a.session(&s.token), Err(Error::UnknownSession)));
    let log = &r.u.store.scan("Log", vec![Criterion::eq("UserID", s.user_id)]).unwrap()[0];
    assert!(!log.get("LogoutDate").is_null());
}

#[test]
fn idle_sessions_expire_and_activity_slides() {
    let r = rig();
    let a = &r.u.auth;
    let s = login(&r.u, "test1", "test1pass");
    r.clock.advance(Duration::minutes(20));
    a.session(&s.token).unwrap();
    r.clock.advance(Duration::minutes(20));
    a.session(&s.token).unwrap();
    r.clock.advance(Duration::minutes(31));
    assert!(matches!(a.session(&s.token), Err(Error::UnknownSession)));
    assert_eq!(a.open_sessions(), 0);
}

#[test]
fn change_password_round_trip() {
    let r = rig();
    let a = &r.u.auth;
    let s = login(&r.u, "test1", "test1pass");
    assert!(matches!(
        a.change_password(&s, "bad", "newpass12", "newpass12"),
        Err(Error::OldPasswordWrong)
    ));
    assert!(matches!(
        a.change_password(&s, "test1pass", "newpass12", "newpass13"),
        Err(Error::Mismatch)
    ));
    assert!(matches!(
        a.change_password(&s, "test1pass", "short", "short"),
        Err(Error::PolicyViolation(_))
    ));
    let long = "x".repeat(33);
    assert!(matches!(
        a.change_password(&s, "test1pass", &long, &long),
        Err(Error::PolicyViolation(_))
    ));
    a.change_password(&s, "test1pass", "newpass12", "newpass12").unwrap();
    assert!(matches!(a.login("test1", "test1pass"), Err(Error::BadCredentials)));
    login(&r.u, "test1", "newpass12");
}

#[test]
fn reset_via_outbox_is_single_use_and_expires() {
    let r = rig();
    let a = &r.u.auth;
    let c = a.issue_challenge();
    assert!(matches!(a.reset_password("test1", &c.challenge_id, "99"), Err(Error::ChallengeFailed)));
    // a challenge is consumed by the failed attempt
    let ans = a.challenge_answer(&c.challenge_id);
    assert!(ans.is_none());

    let c = a.issue_challenge();
    let ans = a.challenge_answer(&c.challenge_id).unwrap().to_string();
    a.reset_password("test1", &c.challenge_id, &ans).unwrap();
    let text = std::fs::read_to_string(&r.outbox).unwrap();
    let line: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(line["to"], "test1@iufa.example");
    assert_eq!(line["subject"], "UUIS password reset");
    let token = line["token"].as_str().unwrap().to_string();
    assert_eq!(token.len(), 32);

    a.complete_reset(&token, "resetpass1", "resetpass1").unwrap();
    login(&r.u, "test1", "resetpass1");
    assert!(a.complete_reset(&token, "resetpass2", "resetpass2").is_err());

    // unknown users get the same reply and no mail
    let c = a.issue_challenge();
    let ans = a.challenge_answer(&c.challenge_id).unwrap().to_string();
    a.reset_password("ghost", &c.challenge_id, &ans).unwrap();
    assert_eq!(std::fs::read_to_string(&r.outbox).unwrap().lines().count(), 1);

    let c = a.issue_challenge();
    let ans = a.challenge_answer(&c.challenge_id).unwrap().to_string();
    a.reset_password("role1", &c.challenge_id, &ans).unwrap();
    let text = std::fs::read_to_string(&r.outbox).unwrap();
    let line: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    r.clock.advance(Duration::minutes(16));
    assert!(a
        .complete_reset(line["token"].as_str().unwrap(), "resetpass1", "resetpass1")
        .is_err());
}

#[test]
fn account_view_and_update() {
    let r = rig();
    let a = &r.u.auth;
    let s = login(&r.u, "test1", "test1pass");
    let acc = a.view_account(&s).unwrap();
    assert_eq!(acc.user_name, "test1");
    assert_eq!(acc.level, 0);
    let bad = AccountChanges {
        email: Some("not-an-email".into()),
        ..Default::default()
    };
    assert!(matches!(a.update_account(&s, &bad), Err(Error::InvalidEmail)));
    let long = AccountChanges {
        first_name: Some("x".repeat(65)),
        ..Default::default()
    };
    assert!(matches!(a.update_account(&s, &long), Err(Error::FieldTooLong { .. })));
    let ok = AccountChanges {
        first_name: Some("Tess".into()),
        last_name: Some(String::new()),
        email: None,
    };
    let acc = a.update_account(&s, &ok).unwrap();
    assert_eq!(acc.first_name.as_deref(), Some("Tess"));
    assert_eq!(acc.last_name, None);
    assert_eq!(acc.email.as_deref(), Some("test1@iufa.example"));
}

#[test]
fn locale_sticks_to_session() {
    let r = rig();
    let s = login(&r.u, "test1", "test1pass");
    r.u.auth.set_locale(&s, Locale::Fr).unwrap();
    assert_eq!(r.u.auth.session(&s.token).unwrap().locale, Locale::Fr);
}
